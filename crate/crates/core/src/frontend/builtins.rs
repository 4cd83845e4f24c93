//! Standard function blocks and functions that resolve without declarations.

use std::sync::{Arc, OnceLock};

use super::ast::{PouKind, VarSection};
use super::ir::{TypedPou, VarInfo};
use super::source::Span;
use super::types::{ElementaryType, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinFb {
    Ton,
    Tof,
    Tp,
    RTrig,
    FTrig,
    Ctu,
    Ctd,
}

impl BuiltinFb {
    pub const ALL: [BuiltinFb; 7] =
        [BuiltinFb::Ton, BuiltinFb::Tof, BuiltinFb::Tp, BuiltinFb::RTrig, BuiltinFb::FTrig, BuiltinFb::Ctu, BuiltinFb::Ctd];

    pub fn from_name(upper: &str) -> Option<BuiltinFb> {
        BuiltinFb::ALL.into_iter().find(|b| b.name() == upper)
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinFb::Ton => "TON",
            BuiltinFb::Tof => "TOF",
            BuiltinFb::Tp => "TP",
            BuiltinFb::RTrig => "R_TRIG",
            BuiltinFb::FTrig => "F_TRIG",
            BuiltinFb::Ctu => "CTU",
            BuiltinFb::Ctd => "CTD",
        }
    }

    /// Interface in slot order. Internal state lives in `VAR` slots.
    fn interface(self) -> Vec<(&'static str, Type, VarSection)> {
        use VarSection::*;
        match self {
            BuiltinFb::Ton | BuiltinFb::Tof | BuiltinFb::Tp => vec![
                ("IN", Type::Bool, Input),
                ("PT", Type::Time, Input),
                ("Q", Type::Bool, Output),
                ("ET", Type::Time, Output),
                ("RUNNING", Type::Bool, Var),
                ("START", Type::Time, Var),
                ("PREV_IN", Type::Bool, Var),
            ],
            BuiltinFb::RTrig | BuiltinFb::FTrig => vec![("CLK", Type::Bool, Input), ("Q", Type::Bool, Output), ("M", Type::Bool, Var)],
            BuiltinFb::Ctu => vec![
                ("CU", Type::Bool, Input),
                ("R", Type::Bool, Input),
                ("PV", Type::Int, Input),
                ("Q", Type::Bool, Output),
                ("CV", Type::Int, Output),
                ("M", Type::Bool, Var),
            ],
            BuiltinFb::Ctd => vec![
                ("CD", Type::Bool, Input),
                ("LD", Type::Bool, Input),
                ("PV", Type::Int, Input),
                ("Q", Type::Bool, Output),
                ("CV", Type::Int, Output),
                ("M", Type::Bool, Var),
            ],
        }
    }
}

/// Slot numbers shared by the builtin interfaces above.
pub mod slot {
    pub const TIMER_IN: usize = 0;
    pub const TIMER_PT: usize = 1;
    pub const TIMER_Q: usize = 2;
    pub const TIMER_ET: usize = 3;
    pub const TIMER_RUNNING: usize = 4;
    pub const TIMER_START: usize = 5;
    pub const TIMER_PREV_IN: usize = 6;

    pub const TRIG_CLK: usize = 0;
    pub const TRIG_Q: usize = 1;
    pub const TRIG_M: usize = 2;

    /// CU for CTU, CD for CTD.
    pub const CNT_PULSE: usize = 0;
    /// R for CTU, LD for CTD.
    pub const CNT_RESET: usize = 1;
    pub const CNT_PV: usize = 2;
    pub const CNT_Q: usize = 3;
    pub const CNT_CV: usize = 4;
    pub const CNT_M: usize = 5;
}

/// Shared synthetic POU for a builtin FB.
pub fn fb_pou(fb: BuiltinFb) -> &'static Arc<TypedPou> {
    static POUS: OnceLock<Vec<Arc<TypedPou>>> = OnceLock::new();
    let all = POUS.get_or_init(|| {
        BuiltinFb::ALL
            .into_iter()
            .map(|b| {
                Arc::new(TypedPou {
                    kind: PouKind::FunctionBlock,
                    name: b.name().to_string(),
                    origin: "<builtin>".to_string(),
                    span: Span::default(),
                    vars: b
                        .interface()
                        .into_iter()
                        .map(|(name, ty, section)| VarInfo {
                            name: name.to_string(),
                            ty,
                            section,
                            constant: false,
                            init: None,
                            span: Span::default(),
                        })
                        .collect(),
                    return_slot: None,
                    body: Vec::new(),
                    sites: Vec::new(),
                    builtin: Some(b),
                })
            })
            .collect()
    });
    &all[BuiltinFb::ALL.iter().position(|b| *b == fb).expect("listed")]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinFn {
    Abs,
    Min,
    Max,
    Limit,
    Sel,
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Exp,
    Ln,
    Log,
    Sqrt,
    Trunc,
    Expt,
    Shl,
    Shr,
    Rol,
    Ror,
    Concat,
    Len,
    Mid,
    Left,
    Right,
    Find,
    /// Explicit `X_TO_Y` conversion.
    Convert(ElementaryType, ElementaryType),
    /// Simulated clock reading in milliseconds.
    TPlcMs,
}

const NAMED: &[(&str, BuiltinFn)] = &[
    ("ABS", BuiltinFn::Abs),
    ("MIN", BuiltinFn::Min),
    ("MAX", BuiltinFn::Max),
    ("LIMIT", BuiltinFn::Limit),
    ("SEL", BuiltinFn::Sel),
    ("SIN", BuiltinFn::Sin),
    ("COS", BuiltinFn::Cos),
    ("TAN", BuiltinFn::Tan),
    ("ASIN", BuiltinFn::Asin),
    ("ACOS", BuiltinFn::Acos),
    ("ATAN", BuiltinFn::Atan),
    ("EXP", BuiltinFn::Exp),
    ("LN", BuiltinFn::Ln),
    ("LOG", BuiltinFn::Log),
    ("SQRT", BuiltinFn::Sqrt),
    ("TRUNC", BuiltinFn::Trunc),
    ("EXPT", BuiltinFn::Expt),
    ("SHL", BuiltinFn::Shl),
    ("SHR", BuiltinFn::Shr),
    ("ROL", BuiltinFn::Rol),
    ("ROR", BuiltinFn::Ror),
    ("CONCAT", BuiltinFn::Concat),
    ("LEN", BuiltinFn::Len),
    ("MID", BuiltinFn::Mid),
    ("LEFT", BuiltinFn::Left),
    ("RIGHT", BuiltinFn::Right),
    ("FIND", BuiltinFn::Find),
    ("T_PLC_MS", BuiltinFn::TPlcMs),
];

impl BuiltinFn {
    pub fn lookup(upper: &str) -> Option<BuiltinFn> {
        if let Some((_, f)) = NAMED.iter().find(|(n, _)| *n == upper) {
            return Some(*f);
        }
        let (from, to) = upper.split_once("_TO_")?;
        Some(BuiltinFn::Convert(ElementaryType::from_name(from)?, ElementaryType::from_name(to)?))
    }

    pub fn name(self) -> String {
        match self {
            BuiltinFn::Convert(a, b) => format!("{}_TO_{}", a.name(), b.name()),
            other => NAMED.iter().find(|(_, f)| *f == other).map(|(n, _)| n.to_string()).unwrap_or_default(),
        }
    }

    /// Accepted argument counts, inclusive.
    pub fn arity(self) -> (usize, usize) {
        match self {
            BuiltinFn::TPlcMs => (0, 0),
            BuiltinFn::Min | BuiltinFn::Max | BuiltinFn::Concat => (2, usize::MAX),
            BuiltinFn::Limit | BuiltinFn::Sel | BuiltinFn::Mid => (3, 3),
            BuiltinFn::Expt
            | BuiltinFn::Shl
            | BuiltinFn::Shr
            | BuiltinFn::Rol
            | BuiltinFn::Ror
            | BuiltinFn::Left
            | BuiltinFn::Right
            | BuiltinFn::Find => (2, 2),
            _ => (1, 1),
        }
    }
}
