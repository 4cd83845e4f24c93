use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::prompt::{Mode, PromptBundle};
use crate::provider::{LlmError, Provider};

/// One prompt/response round trip, kept verbatim for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub provider: String,
    pub model: String,
    pub mode: Mode,
    pub prompt: String,
    pub response: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub latency_ms: u64,
    pub attempts: u32,
}

pub fn query(provider: &dyn Provider, bundle: &PromptBundle) -> Result<LlmExchange, LlmError> {
    let prompt = bundle.text();
    let started = Instant::now();
    let c = provider.complete(&prompt)?;
    Ok(LlmExchange {
        provider: provider.id().to_string(),
        model: provider.model().to_string(),
        mode: bundle.mode,
        prompt,
        response: c.text,
        prompt_tokens: c.prompt_tokens,
        completion_tokens: c.completion_tokens,
        latency_ms: started.elapsed().as_millis() as u64,
        attempts: c.attempts,
    })
}

/// Writes `exchange_<n>.json` files into a run directory, numbering from 1.
#[derive(Debug)]
pub struct ExchangeLog {
    dir: PathBuf,
    last: Mutex<u32>,
}

impl ExchangeLog {
    /// Numbering continues after any exchange files already in `dir`.
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let last = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_prefix("exchange_")?.strip_suffix(".json")?.parse::<u32>().ok()
            })
            .max()
            .unwrap_or(0);
        Ok(ExchangeLog { dir, last: Mutex::new(last) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn persist(&self, exchange: &LlmExchange) -> io::Result<PathBuf> {
        let mut last = self.last.lock().unwrap_or_else(|p| p.into_inner());
        let path = self.dir.join(format!("exchange_{}.json", *last + 1));
        let mut text = serde_json::to_string_pretty(exchange).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        *last += 1;
        Ok(path)
    }
}
