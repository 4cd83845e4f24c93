//! Tokenizer for the Structured Text subset.
//!
//! Identifiers and keywords are case-insensitive; identifier tokens carry the
//! upper-cased name while `lexeme` keeps the raw source slice. Comments
//! (`(* ... *)` and `// ...`) and whitespace are trivia and produce no tokens.

use std::fmt;

use thiserror::Error;

use super::source::{SourceUnit, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    FunctionBlock,
    EndFunctionBlock,
    Function,
    EndFunction,
    Program,
    EndProgram,
    VarInput,
    VarOutput,
    VarInOut,
    Var,
    VarTemp,
    EndVar,
    Constant,
    Retain,
    If,
    Then,
    Elsif,
    Else,
    EndIf,
    Case,
    Of,
    EndCase,
    For,
    To,
    By,
    Do,
    EndFor,
    While,
    EndWhile,
    Repeat,
    Until,
    EndRepeat,
    Exit,
    Return,
    True,
    False,
    Not,
    And,
    Or,
    Xor,
    Mod,
    Array,
    String,
    Configuration,
    EndConfiguration,
    Resource,
    On,
    EndResource,
    Task,
    With,
}

const KEYWORDS: &[(&str, Keyword)] = &[
    ("FUNCTION_BLOCK", Keyword::FunctionBlock),
    ("END_FUNCTION_BLOCK", Keyword::EndFunctionBlock),
    ("FUNCTION", Keyword::Function),
    ("END_FUNCTION", Keyword::EndFunction),
    ("PROGRAM", Keyword::Program),
    ("END_PROGRAM", Keyword::EndProgram),
    ("VAR_INPUT", Keyword::VarInput),
    ("VAR_OUTPUT", Keyword::VarOutput),
    ("VAR_IN_OUT", Keyword::VarInOut),
    ("VAR", Keyword::Var),
    ("VAR_TEMP", Keyword::VarTemp),
    ("END_VAR", Keyword::EndVar),
    ("CONSTANT", Keyword::Constant),
    ("RETAIN", Keyword::Retain),
    ("IF", Keyword::If),
    ("THEN", Keyword::Then),
    ("ELSIF", Keyword::Elsif),
    ("ELSE", Keyword::Else),
    ("END_IF", Keyword::EndIf),
    ("CASE", Keyword::Case),
    ("OF", Keyword::Of),
    ("END_CASE", Keyword::EndCase),
    ("FOR", Keyword::For),
    ("TO", Keyword::To),
    ("BY", Keyword::By),
    ("DO", Keyword::Do),
    ("END_FOR", Keyword::EndFor),
    ("WHILE", Keyword::While),
    ("END_WHILE", Keyword::EndWhile),
    ("REPEAT", Keyword::Repeat),
    ("UNTIL", Keyword::Until),
    ("END_REPEAT", Keyword::EndRepeat),
    ("EXIT", Keyword::Exit),
    ("RETURN", Keyword::Return),
    ("TRUE", Keyword::True),
    ("FALSE", Keyword::False),
    ("NOT", Keyword::Not),
    ("AND", Keyword::And),
    ("OR", Keyword::Or),
    ("XOR", Keyword::Xor),
    ("MOD", Keyword::Mod),
    ("ARRAY", Keyword::Array),
    ("STRING", Keyword::String),
    ("CONFIGURATION", Keyword::Configuration),
    ("END_CONFIGURATION", Keyword::EndConfiguration),
    ("RESOURCE", Keyword::Resource),
    ("ON", Keyword::On),
    ("END_RESOURCE", Keyword::EndResource),
    ("TASK", Keyword::Task),
    ("WITH", Keyword::With),
];

impl Keyword {
    pub fn lookup(upper: &str) -> Option<Keyword> {
        KEYWORDS.iter().find(|(s, _)| *s == upper).map(|(_, k)| *k)
    }

    pub fn as_str(self) -> &'static str {
        KEYWORDS.iter().find(|(_, k)| *k == self).map(|(s, _)| *s).unwrap_or("?")
    }

    /// Keywords that open or close a declaration section; used for error recovery.
    pub fn is_section_boundary(self) -> bool {
        matches!(
            self,
            Keyword::FunctionBlock
                | Keyword::EndFunctionBlock
                | Keyword::Function
                | Keyword::EndFunction
                | Keyword::Program
                | Keyword::EndProgram
                | Keyword::VarInput
                | Keyword::VarOutput
                | Keyword::VarInOut
                | Keyword::Var
                | Keyword::VarTemp
                | Keyword::EndVar
                | Keyword::Configuration
                | Keyword::EndConfiguration
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sym {
    Assign,
    OutAssign,
    Plus,
    Minus,
    Star,
    Slash,
    Power,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Amp,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    DotDot,
}

impl Sym {
    pub fn as_str(self) -> &'static str {
        match self {
            Sym::Assign => ":=",
            Sym::OutAssign => "=>",
            Sym::Plus => "+",
            Sym::Minus => "-",
            Sym::Star => "*",
            Sym::Slash => "/",
            Sym::Power => "**",
            Sym::Eq => "=",
            Sym::Ne => "<>",
            Sym::Lt => "<",
            Sym::Le => "<=",
            Sym::Gt => ">",
            Sym::Ge => ">=",
            Sym::Amp => "&",
            Sym::LParen => "(",
            Sym::RParen => ")",
            Sym::LBracket => "[",
            Sym::RBracket => "]",
            Sym::Comma => ",",
            Sym::Semi => ";",
            Sym::Colon => ":",
            Sym::Dot => ".",
            Sym::DotDot => "..",
        }
    }

    fn is_operator(self) -> bool {
        matches!(
            self,
            Sym::Assign
                | Sym::OutAssign
                | Sym::Plus
                | Sym::Minus
                | Sym::Star
                | Sym::Slash
                | Sym::Power
                | Sym::Eq
                | Sym::Ne
                | Sym::Lt
                | Sym::Le
                | Sym::Gt
                | Sym::Ge
                | Sym::Amp
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    /// Upper-cased identifier.
    Ident(String),
    /// Integer literal, optionally with a type prefix such as `INT#`.
    Integer {
        value: u64,
        type_prefix: Option<String>,
    },
    Real {
        value: f64,
        type_prefix: Option<String>,
    },
    /// Duration in milliseconds.
    Time(i64),
    Str(String),
    Operator(Sym),
    Punctuation(Sym),
    Eof,
}

/// Coarse token classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Keyword,
    Identifier,
    IntegerLiteral,
    RealLiteral,
    TimeLiteral,
    StringLiteral,
    Operator,
    Punctuation,
    EndOfInput,
}

impl TokenKind {
    pub fn class(&self) -> TokenClass {
        match self {
            TokenKind::Keyword(_) => TokenClass::Keyword,
            TokenKind::Ident(_) => TokenClass::Identifier,
            TokenKind::Integer { .. } => TokenClass::IntegerLiteral,
            TokenKind::Real { .. } => TokenClass::RealLiteral,
            TokenKind::Time(_) => TokenClass::TimeLiteral,
            TokenKind::Str(_) => TokenClass::StringLiteral,
            TokenKind::Operator(_) => TokenClass::Operator,
            TokenKind::Punctuation(_) => TokenClass::Punctuation,
            TokenKind::Eof => TokenClass::EndOfInput,
        }
    }

    pub fn sym(&self) -> Option<Sym> {
        match self {
            TokenKind::Operator(s) | TokenKind::Punctuation(s) => Some(*s),
            _ => None,
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => write!(f, "{}", k.as_str()),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Integer { value, .. } => write!(f, "integer {value}"),
            TokenKind::Real { value, .. } => write!(f, "real {value}"),
            TokenKind::Time(ms) => write!(f, "time {ms}ms"),
            TokenKind::Str(s) => write!(f, "string '{s}'"),
            TokenKind::Operator(s) | TokenKind::Punctuation(s) => write!(f, "`{}`", s.as_str()),
            TokenKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Raw source slice, unnormalized.
    pub lexeme: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexErrorKind {
    UnterminatedString,
    UnterminatedComment,
    MalformedLiteral,
    UnexpectedCharacter,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct LexError {
    pub kind: LexErrorKind,
    pub span: Span,
    pub message: String,
}

/// Splits source text into tokens, ending with an `Eof` token.
///
/// All lexical errors are collected; scanning resumes after each one.
pub fn tokenize(src: &SourceUnit) -> Result<Vec<Token>, Vec<LexError>> {
    let mut lx = Lexer { src, bytes: src.text().as_bytes(), pos: 0, tokens: Vec::new(), errors: Vec::new() };
    lx.run();
    if lx.errors.is_empty() {
        Ok(lx.tokens)
    } else {
        Err(lx.errors)
    }
}

struct Lexer<'a> {
    src: &'a SourceUnit,
    bytes: &'a [u8],
    pos: usize,
    tokens: Vec<Token>,
    errors: Vec<LexError>,
}

impl<'a> Lexer<'a> {
    fn peek(&self, ahead: usize) -> u8 {
        self.bytes.get(self.pos + ahead).copied().unwrap_or(0)
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        let lexeme = self.src.text()[start..self.pos].to_string();
        self.tokens.push(Token { kind, lexeme, span: self.src.span(start, self.pos) });
    }

    fn error(&mut self, kind: LexErrorKind, start: usize, message: impl Into<String>) {
        self.errors.push(LexError { kind, span: self.src.span(start, self.pos.max(start)), message: message.into() });
    }

    fn run(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.peek(0);
            let start = self.pos;
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'(' if self.peek(1) == b'*' => self.block_comment(),
                b'/' if self.peek(1) == b'/' => {
                    while self.pos < self.bytes.len() && self.peek(0) != b'\n' {
                        self.pos += 1;
                    }
                }
                b'\'' => self.string(),
                b'0'..=b'9' => self.number(None, start),
                c if c.is_ascii_alphabetic() || c == b'_' => self.word(),
                _ => {
                    if let Some((sym, len)) = self.symbol() {
                        self.pos += len;
                        let kind = if sym.is_operator() { TokenKind::Operator(sym) } else { TokenKind::Punctuation(sym) };
                        self.push(kind, start);
                    } else {
                        let ch = self.src.text()[self.pos..].chars().next().unwrap_or('?');
                        self.pos += ch.len_utf8();
                        self.error(LexErrorKind::UnexpectedCharacter, start, format!("unexpected character `{ch}`"));
                    }
                }
            }
        }
        let end = self.bytes.len();
        self.tokens.push(Token { kind: TokenKind::Eof, lexeme: String::new(), span: self.src.span(end, end) });
    }

    fn symbol(&self) -> Option<(Sym, usize)> {
        let two = [self.peek(0), self.peek(1)];
        let sym2 = match &two {
            b":=" => Some(Sym::Assign),
            b"=>" => Some(Sym::OutAssign),
            b"**" => Some(Sym::Power),
            b"<>" => Some(Sym::Ne),
            b"<=" => Some(Sym::Le),
            b">=" => Some(Sym::Ge),
            b".." => Some(Sym::DotDot),
            _ => None,
        };
        if let Some(s) = sym2 {
            return Some((s, 2));
        }
        let s = match two[0] {
            b'+' => Sym::Plus,
            b'-' => Sym::Minus,
            b'*' => Sym::Star,
            b'/' => Sym::Slash,
            b'=' => Sym::Eq,
            b'<' => Sym::Lt,
            b'>' => Sym::Gt,
            b'&' => Sym::Amp,
            b'(' => Sym::LParen,
            b')' => Sym::RParen,
            b'[' => Sym::LBracket,
            b']' => Sym::RBracket,
            b',' => Sym::Comma,
            b';' => Sym::Semi,
            b':' => Sym::Colon,
            b'.' => Sym::Dot,
            _ => return None,
        };
        Some((s, 1))
    }

    fn block_comment(&mut self) {
        let start = self.pos;
        self.pos += 2;
        loop {
            if self.pos >= self.bytes.len() {
                self.error(LexErrorKind::UnterminatedComment, start, "unterminated comment");
                return;
            }
            if self.peek(0) == b'*' && self.peek(1) == b')' {
                self.pos += 2;
                return;
            }
            self.pos += 1;
        }
    }

    fn string(&mut self) {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let text = self.src.text();
        loop {
            if self.pos >= self.bytes.len() || self.peek(0) == b'\n' {
                self.error(LexErrorKind::UnterminatedString, start, "unterminated string literal");
                return;
            }
            match self.peek(0) {
                b'\'' => {
                    self.pos += 1;
                    break;
                }
                b'$' => {
                    let esc = self.peek(1);
                    let simple = match esc {
                        b'$' => Some('$'),
                        b'\'' => Some('\''),
                        b'L' | b'l' | b'N' | b'n' => Some('\n'),
                        b'P' | b'p' => Some('\x0c'),
                        b'R' | b'r' => Some('\r'),
                        b'T' | b't' => Some('\t'),
                        _ => None,
                    };
                    if let Some(ch) = simple {
                        out.push(ch);
                        self.pos += 2;
                    } else if esc.is_ascii_hexdigit() && self.peek(2).is_ascii_hexdigit() {
                        let hex = &text[self.pos + 1..self.pos + 3];
                        let code = u8::from_str_radix(hex, 16).unwrap_or(0);
                        out.push(code as char);
                        self.pos += 3;
                    } else {
                        let esc_start = self.pos;
                        self.pos += 1;
                        self.error(LexErrorKind::MalformedLiteral, esc_start, "invalid `$` escape in string literal");
                    }
                }
                _ => {
                    let ch = text[self.pos..].chars().next().unwrap_or('?');
                    out.push(ch);
                    self.pos += ch.len_utf8();
                }
            }
        }
        self.push(TokenKind::Str(out), start);
    }

    fn word(&mut self) {
        let start = self.pos;
        while self.peek(0).is_ascii_alphanumeric() || self.peek(0) == b'_' {
            self.pos += 1;
        }
        let upper = self.src.text()[start..self.pos].to_ascii_uppercase();
        if self.peek(0) == b'#' {
            match upper.as_str() {
                "T" | "TIME" => {
                    self.pos += 1;
                    self.time(start);
                    return;
                }
                _ if super::types::ElementaryType::from_name(&upper).is_some() => {
                    self.pos += 1;
                    if self.peek(0).is_ascii_digit() {
                        self.number(Some(upper), start);
                    } else {
                        // BOOL#TRUE and similar: drop the prefix
                        let kw_start = self.pos;
                        while self.peek(0).is_ascii_alphanumeric() || self.peek(0) == b'_' {
                            self.pos += 1;
                        }
                        let word = self.src.text()[kw_start..self.pos].to_ascii_uppercase();
                        match word.as_str() {
                            "TRUE" => self.push(TokenKind::Keyword(Keyword::True), start),
                            "FALSE" => self.push(TokenKind::Keyword(Keyword::False), start),
                            _ => self.error(LexErrorKind::MalformedLiteral, start, "malformed typed literal"),
                        }
                    }
                    return;
                }
                _ => {}
            }
        }
        let kind = match Keyword::lookup(&upper) {
            Some(k) => TokenKind::Keyword(k),
            None => TokenKind::Ident(upper),
        };
        self.push(kind, start);
    }

    fn digits(&mut self, radix: u32) -> String {
        let mut s = String::new();
        loop {
            let c = self.peek(0);
            if c == b'_' {
                self.pos += 1;
            } else if (c as char).is_digit(radix) {
                s.push(c as char);
                self.pos += 1;
            } else {
                break;
            }
        }
        s
    }

    fn number(&mut self, type_prefix: Option<String>, start: usize) {
        let int_part = self.digits(10);
        if self.peek(0) == b'#' {
            let radix: u32 = int_part.parse().unwrap_or(0);
            if ![2, 8, 16].contains(&radix) {
                self.pos += 1;
                self.error(LexErrorKind::MalformedLiteral, start, "radix must be 2, 8 or 16");
                return;
            }
            self.pos += 1;
            let ds = self.digits(radix);
            if ds.is_empty() || self.peek(0).is_ascii_alphanumeric() {
                self.skip_word();
                self.error(LexErrorKind::MalformedLiteral, start, "malformed based integer literal");
                return;
            }
            match u64::from_str_radix(&ds, radix) {
                Ok(value) => self.push(TokenKind::Integer { value, type_prefix }, start),
                Err(_) => self.error(LexErrorKind::MalformedLiteral, start, "integer literal too large"),
            }
            return;
        }
        let mut is_real = false;
        let mut text = int_part.clone();
        if self.peek(0) == b'.' && self.peek(1).is_ascii_digit() {
            self.pos += 1;
            is_real = true;
            text.push('.');
            text.push_str(&self.digits(10));
        }
        if matches!(self.peek(0), b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            let mut exp = String::from("e");
            if matches!(self.peek(0), b'+' | b'-') {
                exp.push(self.peek(0) as char);
                self.pos += 1;
            }
            let ed = self.digits(10);
            if ed.is_empty() {
                self.pos = save;
            } else {
                is_real = true;
                exp.push_str(&ed);
                text.push_str(&exp);
            }
        }
        if self.peek(0).is_ascii_alphabetic() || self.peek(0) == b'_' {
            self.skip_word();
            self.error(LexErrorKind::MalformedLiteral, start, "malformed numeric literal");
            return;
        }
        if is_real {
            match text.parse::<f64>() {
                Ok(value) => self.push(TokenKind::Real { value, type_prefix }, start),
                Err(_) => self.error(LexErrorKind::MalformedLiteral, start, "malformed real literal"),
            }
        } else {
            match text.parse::<u64>() {
                Ok(value) => self.push(TokenKind::Integer { value, type_prefix }, start),
                Err(_) => self.error(LexErrorKind::MalformedLiteral, start, "integer literal too large"),
            }
        }
    }

    fn skip_word(&mut self) {
        while self.peek(0).is_ascii_alphanumeric() || self.peek(0) == b'_' || self.peek(0) == b'.' {
            self.pos += 1;
        }
    }

    fn time(&mut self, start: usize) {
        let negative = if self.peek(0) == b'-' {
            self.pos += 1;
            true
        } else {
            false
        };
        let body_start = self.pos;
        while self.peek(0).is_ascii_alphanumeric() || self.peek(0) == b'_' || self.peek(0) == b'.' {
            self.pos += 1;
        }
        let body = self.src.text()[body_start..self.pos].to_string();
        match parse_duration_body(&body) {
            Some(ms) => self.push(TokenKind::Time(if negative { -ms } else { ms }), start),
            None => self.error(LexErrorKind::MalformedLiteral, start, "malformed time literal"),
        }
    }
}

/// Parses the part after `T#`, e.g. `1h2m3s500ms` or `1.5s`, into milliseconds.
pub fn parse_duration_body(body: &str) -> Option<i64> {
    let body: String = body.chars().filter(|c| *c != '_').collect::<String>().to_ascii_lowercase();
    if body.is_empty() {
        return None;
    }
    let bytes = body.as_bytes();
    let mut i = 0;
    let mut total = 0f64;
    let mut last_rank = usize::MAX;
    while i < bytes.len() {
        let num_start = i;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if num_start == i {
            return None;
        }
        let num: f64 = body[num_start..i].parse().ok()?;
        let unit_start = i;
        while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
            i += 1;
        }
        let (factor, rank) = match &body[unit_start..i] {
            "d" => (86_400_000.0, 4),
            "h" => (3_600_000.0, 3),
            "m" => (60_000.0, 2),
            "s" => (1_000.0, 1),
            "ms" => (1.0, 0),
            _ => return None,
        };
        if rank >= last_rank {
            return None;
        }
        last_rank = rank;
        total += num * factor;
    }
    if !total.is_finite() || total > i64::MAX as f64 {
        return None;
    }
    Some(total.round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        let src = SourceUnit::new("t", text);
        tokenize(&src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn smallest_statement() {
        assert_eq!(
            kinds("X := 1;"),
            vec![
                TokenKind::Ident("X".into()),
                TokenKind::Operator(Sym::Assign),
                TokenKind::Integer { value: 1, type_prefix: None },
                TokenKind::Punctuation(Sym::Semi),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn time_literal_is_one_token() {
        assert_eq!(kinds("T#100ms"), vec![TokenKind::Time(100), TokenKind::Eof]);
        assert_eq!(kinds("TIME#1s500ms"), vec![TokenKind::Time(1500), TokenKind::Eof]);
        assert_eq!(kinds("t#1h2m3s4ms"), vec![TokenKind::Time(3_723_004), TokenKind::Eof]);
        assert_eq!(kinds("T#1.5s"), vec![TokenKind::Time(1500), TokenKind::Eof]);
        assert_eq!(kinds("T#0s"), vec![TokenKind::Time(0), TokenKind::Eof]);
    }

    #[test]
    fn comments_are_trivia() {
        assert_eq!(kinds("(* c *) IF"), vec![TokenKind::Keyword(Keyword::If), TokenKind::Eof]);
        assert_eq!(kinds("// x\nif"), vec![TokenKind::Keyword(Keyword::If), TokenKind::Eof]);
    }

    #[test]
    fn identifiers_upper_cased() {
        let src = SourceUnit::new("t", "myVar");
        let toks = tokenize(&src).unwrap();
        assert_eq!(toks[0].kind, TokenKind::Ident("MYVAR".into()));
        assert_eq!(toks[0].lexeme, "myVar");
    }

    #[test]
    fn literals() {
        assert_eq!(
            kinds("16#FF 2#1010 1_000 1.5E-3 INT#5 'a$'b$$$N'"),
            vec![
                TokenKind::Integer { value: 255, type_prefix: None },
                TokenKind::Integer { value: 10, type_prefix: None },
                TokenKind::Integer { value: 1000, type_prefix: None },
                TokenKind::Real { value: 1.5e-3, type_prefix: None },
                TokenKind::Integer { value: 5, type_prefix: Some("INT".into()) },
                TokenKind::Str("a'b$\n".into()),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn range_dots_are_not_reals() {
        assert_eq!(
            kinds("1..5"),
            vec![
                TokenKind::Integer { value: 1, type_prefix: None },
                TokenKind::Punctuation(Sym::DotDot),
                TokenKind::Integer { value: 5, type_prefix: None },
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn errors_are_collected() {
        let src = SourceUnit::new("t", "X := 'abc\nY := 12ab; (* open");
        let errs = tokenize(&src).unwrap_err();
        let k: Vec<_> = errs.iter().map(|e| e.kind).collect();
        assert_eq!(k, vec![LexErrorKind::UnterminatedString, LexErrorKind::MalformedLiteral, LexErrorKind::UnterminatedComment]);
        assert_eq!(errs[1].span.start_pos.line, 2);
    }

    #[test]
    fn lexemes_and_trivia_reconstruct_source() {
        let text = "FUNCTION_BLOCK fb (* c *)\n  x := 16#1F + T#1s; // end\nEND_FUNCTION_BLOCK\n";
        let src = SourceUnit::new("t", text);
        let toks = tokenize(&src).unwrap();
        let mut rebuilt = String::new();
        let mut last = 0;
        for t in &toks {
            rebuilt.push_str(&text[last..t.span.start]);
            assert_eq!(&text[t.span.start..t.span.end], t.lexeme);
            rebuilt.push_str(&t.lexeme);
            last = t.span.end;
        }
        rebuilt.push_str(&text[last..]);
        assert_eq!(rebuilt, text);
    }
}
