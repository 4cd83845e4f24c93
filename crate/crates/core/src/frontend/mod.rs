//! Structured Text frontend: lexing, parsing, printing and name/type resolution.

pub mod ast;
pub mod builtins;
pub mod ir;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod resolve;
pub mod source;
pub mod types;

use thiserror::Error;

use ir::TypedProgram;
use lexer::LexError;
use parser::ParseError;
use resolve::ResolveError;
use source::SourceUnit;

/// Diagnostics from the first failing frontend stage.
#[derive(Debug, Clone, Error)]
pub enum FrontendErrors {
    #[error("{} lexical error(s) in {origin}", errors.len())]
    Lex { origin: String, errors: Vec<LexError> },
    #[error("{} syntax error(s) in {origin}", errors.len())]
    Parse { origin: String, errors: Vec<ParseError> },
    #[error("{} semantic error(s) in {origin}", errors.len())]
    Resolve { origin: String, errors: Vec<ResolveError> },
}

impl FrontendErrors {
    /// One `origin:line:col: message` line per diagnostic.
    pub fn render(&self) -> String {
        let (origin, lines): (&str, Vec<String>) = match self {
            FrontendErrors::Lex { origin, errors } => (origin, errors.iter().map(|e| e.to_string()).collect()),
            FrontendErrors::Parse { origin, errors } => (origin, errors.iter().map(|e| e.to_string()).collect()),
            FrontendErrors::Resolve { origin, errors } => (origin, errors.iter().map(|e| e.to_string()).collect()),
        };
        lines.iter().map(|l| format!("{origin}:{l}\n")).collect()
    }
}

/// Lexes, parses and resolves `src` against `libraries`.
pub fn compile(src: &SourceUnit, libraries: &[TypedProgram]) -> Result<TypedProgram, FrontendErrors> {
    let origin = src.origin().to_string();
    let tokens = lexer::tokenize(src).map_err(|errors| FrontendErrors::Lex { origin: origin.clone(), errors })?;
    let ast = parser::parse(&tokens).map_err(|errors| FrontendErrors::Parse { origin: origin.clone(), errors })?;
    resolve::resolve_named(&origin, &ast, libraries).map_err(|errors| FrontendErrors::Resolve { origin, errors })
}
