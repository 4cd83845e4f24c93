//! Everything between a Structured Text unit and a CSV test suite: prompt
//! construction, LLM providers, exchange logging and CSV extraction.

pub mod exchange;
pub mod extract;
pub mod prompt;
pub mod provider;

pub use exchange::{query, ExchangeLog, LlmExchange};
pub use extract::{extract_csv, NoCsvFound};
pub use prompt::{build_prompt, InterfaceSummary, Mode, PromptBundle, PromptTemplates};
pub use provider::{Completion, HttpProvider, LlmError, MockProvider, Provider, ProviderConfig, ProviderKind};
