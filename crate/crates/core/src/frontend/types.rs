use std::fmt;

use serde::Serialize;

pub const DEFAULT_STRING_CAPACITY: u32 = 80;
pub const MAX_STRING_CAPACITY: u32 = 65_535;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ElementaryType {
    Bool,
    Int,
    Dint,
    Byte,
    Word,
    Real,
    Lreal,
    Time,
    String,
}

impl ElementaryType {
    pub const ALL: [ElementaryType; 9] = [
        ElementaryType::Bool,
        ElementaryType::Int,
        ElementaryType::Dint,
        ElementaryType::Byte,
        ElementaryType::Word,
        ElementaryType::Real,
        ElementaryType::Lreal,
        ElementaryType::Time,
        ElementaryType::String,
    ];

    pub fn from_name(upper: &str) -> Option<ElementaryType> {
        Some(match upper {
            "BOOL" => ElementaryType::Bool,
            "INT" => ElementaryType::Int,
            "DINT" => ElementaryType::Dint,
            "BYTE" => ElementaryType::Byte,
            "WORD" => ElementaryType::Word,
            "REAL" => ElementaryType::Real,
            "LREAL" => ElementaryType::Lreal,
            "TIME" => ElementaryType::Time,
            "STRING" => ElementaryType::String,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementaryType::Bool => "BOOL",
            ElementaryType::Int => "INT",
            ElementaryType::Dint => "DINT",
            ElementaryType::Byte => "BYTE",
            ElementaryType::Word => "WORD",
            ElementaryType::Real => "REAL",
            ElementaryType::Lreal => "LREAL",
            ElementaryType::Time => "TIME",
            ElementaryType::String => "STRING",
        }
    }

    pub fn to_type(self) -> Type {
        match self {
            ElementaryType::Bool => Type::Bool,
            ElementaryType::Int => Type::Int,
            ElementaryType::Dint => Type::Dint,
            ElementaryType::Byte => Type::Byte,
            ElementaryType::Word => Type::Word,
            ElementaryType::Real => Type::Real,
            ElementaryType::Lreal => Type::Lreal,
            ElementaryType::Time => Type::Time,
            ElementaryType::String => Type::String(DEFAULT_STRING_CAPACITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ArrayType {
    pub lo: i64,
    pub hi: i64,
    pub elem: Type,
}

impl ArrayType {
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A resolved type. Multi-dimensional arrays are nested single-dimension arrays.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Type {
    Bool,
    Int,
    Dint,
    Byte,
    Word,
    Real,
    Lreal,
    Time,
    /// Capacity in characters.
    String(u32),
    Array(Box<ArrayType>),
    /// Function block instance, by upper-case type name.
    Fb(String),
}

impl Type {
    pub fn elementary(&self) -> Option<ElementaryType> {
        Some(match self {
            Type::Bool => ElementaryType::Bool,
            Type::Int => ElementaryType::Int,
            Type::Dint => ElementaryType::Dint,
            Type::Byte => ElementaryType::Byte,
            Type::Word => ElementaryType::Word,
            Type::Real => ElementaryType::Real,
            Type::Lreal => ElementaryType::Lreal,
            Type::Time => ElementaryType::Time,
            Type::String(_) => ElementaryType::String,
            Type::Array(_) | Type::Fb(_) => return None,
        })
    }

    pub fn is_signed_int(&self) -> bool {
        matches!(self, Type::Int | Type::Dint)
    }

    pub fn is_bit_string(&self) -> bool {
        matches!(self, Type::Byte | Type::Word)
    }

    /// Integer-valued types: signed integers and bit strings.
    pub fn is_integral(&self) -> bool {
        self.is_signed_int() || self.is_bit_string()
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Type::Real | Type::Lreal)
    }

    pub fn is_arithmetic(&self) -> bool {
        self.is_signed_int() || self.is_real()
    }

    pub fn is_string(&self) -> bool {
        matches!(self, Type::String(_))
    }

    pub fn is_scalar(&self) -> bool {
        self.elementary().is_some()
    }

    /// Integer range of an integral type.
    pub fn int_range(&self) -> Option<(i64, i64)> {
        Some(match self {
            Type::Int => (i16::MIN as i64, i16::MAX as i64),
            Type::Dint => (i32::MIN as i64, i32::MAX as i64),
            Type::Byte => (0, u8::MAX as i64),
            Type::Word => (0, u16::MAX as i64),
            _ => return None,
        })
    }

    pub fn bit_width(&self) -> Option<u32> {
        Some(match self {
            Type::Byte => 8,
            Type::Word | Type::Int => 16,
            Type::Dint => 32,
            _ => return None,
        })
    }

    /// Implicit widening allowed by the promotion lattice: INT→DINT,
    /// REAL→LREAL, BYTE→WORD, and any STRING capacity to any other.
    pub fn widens_to(&self, target: &Type) -> bool {
        if self == target {
            return true;
        }
        matches!(
            (self, target),
            (Type::Int, Type::Dint) | (Type::Real, Type::Lreal) | (Type::Byte, Type::Word) | (Type::String(_), Type::String(_))
        )
    }

    /// Least common type of two operands under the promotion lattice.
    pub fn common(a: &Type, b: &Type) -> Option<Type> {
        if a.widens_to(b) {
            Some(if a.is_string() { Type::String(MAX_STRING_CAPACITY) } else { b.clone() })
        } else if b.widens_to(a) {
            Some(a.clone())
        } else {
            None
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::String(cap) if *cap == DEFAULT_STRING_CAPACITY => write!(f, "STRING"),
            Type::String(cap) => write!(f, "STRING[{cap}]"),
            Type::Array(a) => write!(f, "ARRAY[{}..{}] OF {}", a.lo, a.hi, a.elem),
            Type::Fb(name) => write!(f, "{name}"),
            other => write!(f, "{}", other.elementary().map(|e| e.name()).unwrap_or("?")),
        }
    }
}
