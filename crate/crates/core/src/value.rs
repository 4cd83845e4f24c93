//! Runtime scalar values with exact-width integer semantics.

use std::fmt;

use thiserror::Error;

use crate::frontend::lexer::parse_duration_body;
use crate::frontend::printer::{format_real, normalize_real, quote_string};
use crate::frontend::types::{ElementaryType, Type};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i16),
    Dint(i32),
    Byte(u8),
    Word(u16),
    Real(f32),
    Lreal(f64),
    /// Milliseconds.
    Time(i64),
    String(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConversionError {
    #[error("value {value} out of range for {target}")]
    Overflow { value: String, target: &'static str },
    #[error("cannot parse {text:?} as {target}")]
    Parse { text: String, target: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct LiteralError {
    pub message: String,
}

impl Value {
    /// Type default: FALSE, zero, `T#0s` or the empty string.
    pub fn default_for(ty: &Type) -> Option<Value> {
        Some(match ty {
            Type::Bool => Value::Bool(false),
            Type::Int => Value::Int(0),
            Type::Dint => Value::Dint(0),
            Type::Byte => Value::Byte(0),
            Type::Word => Value::Word(0),
            Type::Real => Value::Real(0.0),
            Type::Lreal => Value::Lreal(0.0),
            Type::Time => Value::Time(0),
            Type::String(_) => Value::String(String::new()),
            Type::Array(_) | Type::Fb(_) => return None,
        })
    }

    pub fn elementary(&self) -> ElementaryType {
        match self {
            Value::Bool(_) => ElementaryType::Bool,
            Value::Int(_) => ElementaryType::Int,
            Value::Dint(_) => ElementaryType::Dint,
            Value::Byte(_) => ElementaryType::Byte,
            Value::Word(_) => ElementaryType::Word,
            Value::Real(_) => ElementaryType::Real,
            Value::Lreal(_) => ElementaryType::Lreal,
            Value::Time(_) => ElementaryType::Time,
            Value::String(_) => ElementaryType::String,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Integer view of integral, bit-string and TIME values.
    pub fn as_i64(&self) -> Option<i64> {
        Some(match self {
            Value::Int(v) => *v as i64,
            Value::Dint(v) => *v as i64,
            Value::Byte(v) => *v as i64,
            Value::Word(v) => *v as i64,
            Value::Time(v) => *v,
            _ => return None,
        })
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(*v as f64),
            Value::Lreal(v) => Some(*v),
            other => other.as_i64().map(|i| i as f64),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    /// Builds an integral value of type `ty`, wrapping to its width.
    pub fn from_i64_wrapping(v: i64, ty: &Type) -> Value {
        match ty {
            Type::Int => Value::Int(v as i16),
            Type::Dint => Value::Dint(v as i32),
            Type::Byte => Value::Byte(v as u8),
            Type::Word => Value::Word(v as u16),
            Type::Time => Value::Time(v),
            Type::Real => Value::Real(v as f32),
            Type::Lreal => Value::Lreal(v as f64),
            Type::Bool => Value::Bool(v != 0),
            _ => Value::Dint(v as i32),
        }
    }

    pub fn from_f64(v: f64, ty: &Type) -> Value {
        match ty {
            Type::Real => Value::Real(v as f32),
            _ => Value::Lreal(v),
        }
    }

    /// Implicit conversion along the promotion lattice; also truncates
    /// strings to the target capacity. Other combinations are returned as is.
    pub fn coerce(self, ty: &Type) -> Value {
        match (self, ty) {
            (Value::Int(v), Type::Dint) => Value::Dint(v as i32),
            (Value::Real(v), Type::Lreal) => Value::Lreal(v as f64),
            (Value::Byte(v), Type::Word) => Value::Word(v as u16),
            (Value::String(s), Type::String(cap)) => Value::String(truncate_chars(s, *cap as usize)),
            (v, _) => v,
        }
    }

    /// Explicit `X_TO_Y` conversion. Narrowing faults instead of wrapping.
    pub fn convert(&self, to: ElementaryType) -> Result<Value, ConversionError> {
        let target = to.name();
        let overflow = || ConversionError::Overflow { value: self.to_string(), target };
        let from_int = |i: i64| -> Result<Value, ConversionError> {
            let ty = to.to_type();
            match to {
                ElementaryType::Bool => Ok(Value::Bool(i != 0)),
                ElementaryType::Real => Ok(Value::Real(i as f32)),
                ElementaryType::Lreal => Ok(Value::Lreal(i as f64)),
                ElementaryType::Time => Ok(Value::Time(i)),
                ElementaryType::String => Ok(Value::String(i.to_string())),
                _ => {
                    let (lo, hi) = ty.int_range().expect("integral target");
                    if i < lo || i > hi {
                        Err(overflow())
                    } else {
                        Ok(Value::from_i64_wrapping(i, &ty))
                    }
                }
            }
        };
        match self {
            Value::Bool(b) => match to {
                ElementaryType::String => Ok(Value::String(if *b { "TRUE" } else { "FALSE" }.into())),
                _ => from_int(*b as i64),
            },
            Value::Int(_) | Value::Dint(_) | Value::Byte(_) | Value::Word(_) => from_int(self.as_i64().unwrap_or(0)),
            Value::Time(ms) => match to {
                ElementaryType::String => Ok(Value::String(format!("T#{ms}ms"))),
                _ => from_int(*ms),
            },
            Value::Real(_) | Value::Lreal(_) => {
                let f = self.as_f64().unwrap_or(0.0);
                match to {
                    ElementaryType::Real => {
                        let r = f as f32;
                        if f.is_finite() && !r.is_finite() {
                            Err(overflow())
                        } else {
                            Ok(Value::Real(r))
                        }
                    }
                    ElementaryType::Lreal => Ok(Value::Lreal(f)),
                    ElementaryType::Bool => Ok(Value::Bool(f != 0.0)),
                    ElementaryType::String => Ok(Value::String(self.to_string())),
                    _ => {
                        let r = round_half_away(f);
                        if !r.is_finite() || r < i64::MIN as f64 || r > i64::MAX as f64 {
                            return Err(overflow());
                        }
                        from_int(r as i64)
                    }
                }
            }
            Value::String(s) => match to {
                ElementaryType::String => Ok(self.clone()),
                _ => Value::parse_literal(s, &to.to_type()).map_err(|_| ConversionError::Parse { text: s.clone(), target }),
            },
        }
    }

    /// Parses a literal as written in a test-suite cell. Accepts IEC forms
    /// (`TRUE`, `16#FF`, `INT#5`, `T#1s500ms`, `'text'`) and plain forms
    /// (`1`, `0`, integer milliseconds, bare text).
    pub fn parse_literal(text: &str, ty: &Type) -> Result<Value, LiteralError> {
        let raw = text.trim();
        let err = |m: &str| LiteralError { message: format!("cannot parse {raw:?} as {ty}: {m}") };
        if let Type::String(cap) = ty {
            let body = if raw.len() >= 2 && raw.starts_with('\'') && raw.ends_with('\'') {
                unescape(&raw[1..raw.len() - 1]).ok_or_else(|| err("invalid `$` escape"))?
            } else {
                text.to_string()
            };
            if body.chars().count() > *cap as usize {
                return Err(err("longer than the string capacity"));
            }
            return Ok(Value::String(body));
        }
        let upper = raw.to_ascii_uppercase();
        // a sign may precede the prefix, as in -INT#5
        let (sign, unsigned) = match upper.strip_prefix('-') {
            Some(rest) => ("-", rest),
            None => ("", upper.as_str()),
        };
        // strip a matching type prefix such as INT# or BOOL#
        let body = match unsigned.split_once('#') {
            Some((prefix, rest)) if ElementaryType::from_name(prefix).is_some() && !matches!(prefix, "TIME") => {
                if ElementaryType::from_name(prefix) != ty.elementary() {
                    return Err(err("type prefix does not match"));
                }
                format!("{sign}{rest}")
            }
            _ => upper.clone(),
        };
        match ty {
            Type::Bool => match body.as_str() {
                "TRUE" | "1" => Ok(Value::Bool(true)),
                "FALSE" | "0" => Ok(Value::Bool(false)),
                _ => Err(err("expected TRUE or FALSE")),
            },
            Type::Int | Type::Dint | Type::Byte | Type::Word => {
                let v = parse_int(&body).ok_or_else(|| err("not an integer"))?;
                let (lo, hi) = ty.int_range().expect("integral");
                if v < lo || v > hi {
                    return Err(err("out of range"));
                }
                Ok(Value::from_i64_wrapping(v, ty))
            }
            Type::Real | Type::Lreal => {
                let cleaned: String = body.chars().filter(|c| *c != '_').collect();
                let v: f64 = match parse_int(&cleaned) {
                    Some(i) if !cleaned.contains(['.', 'E']) => i as f64,
                    _ => cleaned.parse().map_err(|_| err("not a number"))?,
                };
                if !v.is_finite() {
                    return Err(err("not finite"));
                }
                if *ty == Type::Real && !(v as f32).is_finite() {
                    return Err(err("out of range"));
                }
                Ok(Value::from_f64(v, ty))
            }
            Type::Time => {
                let (neg, t) = match body.strip_prefix('-') {
                    Some(rest) => (true, rest),
                    None => (false, body.as_str()),
                };
                let ms = if let Some(d) = t.strip_prefix("TIME#").or_else(|| t.strip_prefix("T#")) {
                    let (neg2, d) = match d.strip_prefix('-') {
                        Some(r) => (true, r),
                        None => (false, d),
                    };
                    parse_duration_body(d).map(|ms| if neg2 { -ms } else { ms })
                } else {
                    parse_int(t)
                }
                .ok_or_else(|| err("expected T#... or integer milliseconds"))?;
                Ok(Value::Time(if neg { -ms } else { ms }))
            }
            Type::String(_) | Type::Array(_) | Type::Fb(_) => Err(err("not a scalar type")),
        }
    }

    /// Structured Text literal text that re-lexes to this value.
    pub fn to_st_literal(&self) -> String {
        match self {
            Value::Bool(true) => "TRUE".into(),
            Value::Bool(false) => "FALSE".into(),
            Value::Int(v) => format!("INT#{v}").replace("INT#-", "-INT#"),
            Value::Dint(v) => format!("DINT#{v}").replace("DINT#-", "-DINT#"),
            Value::Byte(v) => format!("BYTE#{v}"),
            Value::Word(v) => format!("WORD#{v}"),
            Value::Real(v) => real_literal("REAL", v.is_sign_negative(), normalize_real(&format!("{:?}", v.abs()))),
            Value::Lreal(v) => real_literal("LREAL", v.is_sign_negative(), format_real(v.abs())),
            Value::Time(ms) if *ms < 0 => format!("-T#{}ms", ms.unsigned_abs()),
            Value::Time(ms) => format!("T#{ms}ms"),
            Value::String(s) => quote_string(s),
        }
    }
}

fn real_literal(prefix: &str, negative: bool, body: String) -> String {
    let sign = if negative { "-" } else { "" };
    format!("{sign}{prefix}#{body}")
}

/// Rounds to the nearest integer, ties away from zero.
pub fn round_half_away(f: f64) -> f64 {
    f.round()
}

fn truncate_chars(s: String, cap: usize) -> String {
    match s.char_indices().nth(cap) {
        Some((idx, _)) => s[..idx].to_string(),
        None => s,
    }
}

fn parse_int(body: &str) -> Option<i64> {
    let cleaned: String = body.chars().filter(|c| *c != '_').collect();
    let (neg, digits) = match cleaned.strip_prefix('-') {
        Some(rest) => (true, rest.to_string()),
        None => (false, cleaned.strip_prefix('+').unwrap_or(&cleaned).to_string()),
    };
    let v = match digits.split_once('#') {
        Some(("16", d)) => i64::from_str_radix(d, 16).ok()?,
        Some(("8", d)) => i64::from_str_radix(d, 8).ok()?,
        Some(("2", d)) => i64::from_str_radix(d, 2).ok()?,
        Some(_) => return None,
        None if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) => return None,
        None => digits.parse().ok()?,
    };
    Some(if neg { -v } else { v })
}

fn unescape(body: &str) -> Option<String> {
    let mut out = String::new();
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '$' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '$' => out.push('$'),
            '\'' => out.push('\''),
            'L' | 'l' | 'N' | 'n' => out.push('\n'),
            'P' | 'p' => out.push('\x0c'),
            'R' | 'r' => out.push('\r'),
            'T' | 't' => out.push('\t'),
            h1 if h1.is_ascii_hexdigit() => {
                let h2 = chars.next().filter(|c| c.is_ascii_hexdigit())?;
                out.push(u8::from_str_radix(&format!("{h1}{h2}"), 16).ok()? as char);
            }
            _ => return None,
        }
    }
    Some(out)
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(true) => write!(f, "TRUE"),
            Value::Bool(false) => write!(f, "FALSE"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Dint(v) => write!(f, "{v}"),
            Value::Byte(v) => write!(f, "{v}"),
            Value::Word(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Lreal(v) => write!(f, "{v}"),
            Value::Time(ms) => write!(f, "T#{ms}ms"),
            Value::String(s) => write!(f, "{}", quote_string(s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        assert_eq!(Value::default_for(&Type::Bool), Some(Value::Bool(false)));
        assert_eq!(Value::default_for(&Type::Time), Some(Value::Time(0)));
        assert_eq!(Value::default_for(&Type::String(80)), Some(Value::String(String::new())));
    }

    #[test]
    fn wrapping_is_two_complement() {
        assert_eq!(Value::from_i64_wrapping(32768, &Type::Int), Value::Int(-32768));
        assert_eq!(Value::from_i64_wrapping(-1, &Type::Word), Value::Word(65535));
    }

    #[test]
    fn narrowing_conversion_faults() {
        assert!(Value::Dint(70000).convert(ElementaryType::Int).is_err());
        assert_eq!(Value::Dint(-5).convert(ElementaryType::Int), Ok(Value::Int(-5)));
        assert_eq!(Value::Lreal(2.5).convert(ElementaryType::Int), Ok(Value::Int(3)));
        assert_eq!(Value::Lreal(-2.5).convert(ElementaryType::Dint), Ok(Value::Dint(-3)));
        assert!(Value::Int(-1).convert(ElementaryType::Byte).is_err());
    }

    #[test]
    fn literal_forms() {
        assert_eq!(Value::parse_literal("TRUE", &Type::Bool), Ok(Value::Bool(true)));
        assert_eq!(Value::parse_literal("16#FF", &Type::Word), Ok(Value::Word(255)));
        assert_eq!(Value::parse_literal("T#1s500ms", &Type::Time), Ok(Value::Time(1500)));
        assert_eq!(Value::parse_literal("1500", &Type::Time), Ok(Value::Time(1500)));
        assert_eq!(Value::parse_literal("'FF'", &Type::String(80)), Ok(Value::String("FF".into())));
        assert_eq!(Value::parse_literal("FF", &Type::String(80)), Ok(Value::String("FF".into())));
        assert_eq!(Value::parse_literal("0.5671", &Type::Real), Ok(Value::Real(0.5671)));
        assert_eq!(Value::parse_literal("-3", &Type::Int), Ok(Value::Int(-3)));
        assert!(Value::parse_literal("70000", &Type::Int).is_err());
        assert!(Value::parse_literal("yes", &Type::Bool).is_err());
    }

    #[test]
    fn st_literals() {
        assert_eq!(Value::Int(-5).to_st_literal(), "-INT#5");
        assert_eq!(Value::Real(0.1).to_st_literal(), "REAL#0.1");
        assert_eq!(Value::Lreal(1e-7).to_st_literal(), "LREAL#1.0E-7");
        assert_eq!(Value::String("a'b".into()).to_st_literal(), "'a$'b'");
    }
}
