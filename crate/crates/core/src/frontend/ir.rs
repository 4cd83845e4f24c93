//! Typed intermediate representation produced by the resolver.
//!
//! Variables are addressed by slot index into their POU's variable table.
//! POUs refer to each other by upper-case name; names are unique within a
//! [`TypedProgram`] including everything it imports.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::ast::{BinaryOp, CaseLabel, CompilationUnit, PouKind, StmtId, StmtSite, UnaryOp, VarSection};
use super::builtins::{self, BuiltinFb, BuiltinFn};
use super::source::Span;
use super::types::Type;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct TypedProgram {
    pub origin: String,
    pub ast: CompilationUnit,
    /// Local POUs in source order, followed by imported ones.
    pub pous: Vec<Arc<TypedPou>>,
    pub local_count: usize,
    pub configurations: Vec<TypedConfig>,
    pub(crate) index: BTreeMap<String, usize>,
}

impl TypedProgram {
    /// Looks a POU up by name: local and imported first, then built-in FBs.
    pub fn pou(&self, name: &str) -> Option<&Arc<TypedPou>> {
        let upper = name.to_ascii_uppercase();
        match self.index.get(&upper) {
            Some(&i) => Some(&self.pous[i]),
            None => BuiltinFb::from_name(&upper).map(builtins::fb_pou),
        }
    }

    pub fn local_pous(&self) -> &[Arc<TypedPou>] {
        &self.pous[..self.local_count]
    }

    pub fn imported_pous(&self) -> &[Arc<TypedPou>] {
        &self.pous[self.local_count..]
    }

    pub fn is_local(&self, name: &str) -> bool {
        self.local_pous().iter().any(|p| p.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedPou {
    pub kind: PouKind,
    pub name: String,
    /// Origin label of the source unit that declared this POU.
    pub origin: String,
    pub span: Span,
    pub vars: Vec<VarInfo>,
    /// Slot holding a function's result.
    pub return_slot: Option<usize>,
    pub body: Vec<TStmt>,
    /// Coverage domain: every statement and guard site, sorted by id.
    pub sites: Vec<StmtSite>,
    pub builtin: Option<BuiltinFb>,
}

impl TypedPou {
    pub fn var(&self, name: &str) -> Option<(usize, &VarInfo)> {
        self.vars.iter().enumerate().find(|(_, v)| v.name.eq_ignore_ascii_case(name))
    }

    pub fn section_vars(&self, section: VarSection) -> impl Iterator<Item = &VarInfo> {
        self.vars.iter().filter(move |v| v.section == section)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &VarInfo> {
        self.section_vars(VarSection::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &VarInfo> {
        self.section_vars(VarSection::Output)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub ty: Type,
    pub section: VarSection,
    pub constant: bool,
    pub init: Option<VarInit>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarInit {
    Scalar(TExpr),
    /// Row-major element initializers; missing trailing elements take the default.
    Elements(Vec<TExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Place {
    pub root: usize,
    pub path: Vec<Step>,
    pub ty: Type,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// One array dimension.
    Index(Box<TExpr>),
    /// Slot in a function block instance.
    Member(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TExpr {
    pub kind: TExprKind,
    pub ty: Type,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TExprKind {
    Const(Value),
    Load(Place),
    /// Implicit conversion to `ty` along the promotion lattice.
    Widen(Box<TExpr>),
    Unary(UnaryOp, Box<TExpr>),
    Binary(BinaryOp, Box<TExpr>, Box<TExpr>),
    Builtin(BuiltinFn, Vec<TExpr>),
    /// User function call; arguments are bound to input slots.
    Call {
        function: String,
        args: Vec<(usize, TExpr)>,
    },
}

impl TExpr {
    pub fn constant(value: Value, ty: Type, span: Span) -> TExpr {
        TExpr { kind: TExprKind::Const(value), ty, span }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TStmt {
    pub id: StmtId,
    pub span: Span,
    pub kind: TStmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TStmtKind {
    Assign {
        target: Place,
        value: TExpr,
    },
    CallFb {
        instance: Place,
        fb_type: String,
        inputs: Vec<(usize, TExpr)>,
        /// Copy-in before the call, copy-out after it.
        in_outs: Vec<(usize, Place)>,
        outputs: Vec<(usize, Place)>,
    },
    /// Function call used as a statement; the result is discarded.
    Eval(TExpr),
    If {
        branches: Vec<TBranch>,
        else_body: Option<Vec<TStmt>>,
    },
    Case {
        selector: TExpr,
        arms: Vec<TCaseArm>,
        else_body: Option<Vec<TStmt>>,
    },
    For(Box<TFor>),
    While {
        cond: TExpr,
        body: Vec<TStmt>,
    },
    Repeat {
        body: Vec<TStmt>,
        until: TExpr,
    },
    Exit,
    Return,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TFor {
    pub var: Place,
    pub from: TExpr,
    pub to: TExpr,
    pub by: TExpr,
    pub body: Vec<TStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TBranch {
    pub guard_id: StmtId,
    pub span: Span,
    pub cond: TExpr,
    pub body: Vec<TStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TCaseArm {
    pub labels: Vec<CaseLabel>,
    pub body: Vec<TStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedConfig {
    pub name: String,
    pub task: Option<TaskInfo>,
    pub programs: Vec<ProgramInstance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskInfo {
    pub name: String,
    pub interval_ms: Option<i64>,
    pub priority: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramInstance {
    pub name: String,
    pub program_type: String,
}
