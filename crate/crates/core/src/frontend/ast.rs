//! Untyped syntax tree produced by the parser.
//!
//! Every statement carries a [`StmtId`]; ids are dense and assigned in source
//! order across the whole compilation unit. An `IF` consumes one id per guard
//! (the statement's own id is its first guard's id); loops and `CASE` consume
//! one id for their guard/selector site.

use std::fmt;

use serde::Serialize;

use super::source::Span;
use super::types::ElementaryType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct StmtId(pub u32);

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    /// Upper-cased name.
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>) -> Self {
        Ident { name: name.into().to_ascii_uppercase(), span: Span::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompilationUnit {
    pub pous: Vec<PouDecl>,
    pub configurations: Vec<ConfigDecl>,
    pub statement_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PouKind {
    FunctionBlock,
    Function,
    Program,
}

impl PouKind {
    pub fn keyword(self) -> &'static str {
        match self {
            PouKind::FunctionBlock => "FUNCTION_BLOCK",
            PouKind::Function => "FUNCTION",
            PouKind::Program => "PROGRAM",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PouDecl {
    pub kind: PouKind,
    pub name: Ident,
    pub return_type: Option<TypeRef>,
    pub var_blocks: Vec<VarBlock>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VarSection {
    Input,
    Output,
    InOut,
    Var,
    Temp,
}

impl VarSection {
    pub fn keyword(self) -> &'static str {
        match self {
            VarSection::Input => "VAR_INPUT",
            VarSection::Output => "VAR_OUTPUT",
            VarSection::InOut => "VAR_IN_OUT",
            VarSection::Var => "VAR",
            VarSection::Temp => "VAR_TEMP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarBlock {
    pub section: VarSection,
    pub constant: bool,
    pub retain: bool,
    pub decls: Vec<VarDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub names: Vec<Ident>,
    pub ty: TypeRef,
    pub init: Option<Initializer>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeRef {
    /// Elementary or function block type name.
    Named(Ident),
    String {
        capacity: Option<u32>,
        span: Span,
    },
    Array {
        dims: Vec<(i64, i64)>,
        elem: Box<TypeRef>,
        span: Span,
    },
}

impl TypeRef {
    pub fn span(&self) -> Span {
        match self {
            TypeRef::Named(id) => id.span,
            TypeRef::String { span, .. } | TypeRef::Array { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    Expr(Expr),
    Array(Vec<ArrayInitItem>, Span),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayInitItem {
    Value(Initializer),
    /// `n(value)`; an empty value means the element default.
    Repeat(u64, Option<Box<Initializer>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int {
        value: i64,
        type_prefix: Option<ElementaryType>,
    },
    Real {
        value: f64,
        type_prefix: Option<ElementaryType>,
    },
    Bool(bool),
    /// Milliseconds.
    Time(i64),
    Str(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    Xor,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
}

impl BinaryOp {
    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::Xor => 2,
            BinaryOp::And => 3,
            BinaryOp::Eq | BinaryOp::Ne => 4,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 5,
            BinaryOp::Add | BinaryOp::Sub => 6,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => 7,
            BinaryOp::Pow => 9,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "OR",
            BinaryOp::Xor => "XOR",
            BinaryOp::And => "AND",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "MOD",
            BinaryOp::Pow => "**",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or | BinaryOp::Xor)
    }
}

/// Precedence of unary operators (`-`, `NOT`), between `**` and `*`.
pub const UNARY_PRECEDENCE: u8 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Literal(Literal),
    Var(Ident),
    Member(Box<Expr>, Ident),
    Index(Box<Expr>, Vec<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Ident, Vec<CallArg>),
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgDirection {
    /// `name := value` or positional.
    In,
    /// `name => target`.
    Out,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallArg {
    pub name: Option<Ident>,
    pub direction: ArgDirection,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub id: StmtId,
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfBranch {
    pub guard_id: StmtId,
    pub cond: Expr,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseLabel {
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseArm {
    pub labels: Vec<CaseLabel>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign { target: Expr, value: Expr },
    Call { callee: Expr, args: Vec<CallArg> },
    If { branches: Vec<IfBranch>, else_body: Option<Vec<Stmt>> },
    Case { selector: Expr, arms: Vec<CaseArm>, else_body: Option<Vec<Stmt>> },
    For { var: Ident, from: Expr, to: Expr, by: Option<Expr>, body: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Repeat { body: Vec<Stmt>, until: Expr },
    Exit,
    Return,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDecl {
    pub name: Ident,
    pub resources: Vec<ResourceDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceDecl {
    /// `None` for tasks/programs declared directly in the configuration.
    pub name: Option<Ident>,
    pub on: Option<Ident>,
    pub tasks: Vec<TaskDecl>,
    pub programs: Vec<ProgramInstanceDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDecl {
    pub name: Ident,
    pub interval: Option<Expr>,
    pub priority: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramInstanceDecl {
    pub name: Ident,
    pub task: Option<Ident>,
    pub program_type: Ident,
    pub span: Span,
}

/// Visits every statement in pre-order (source order).
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in body {
        f(s);
        match &s.kind {
            StmtKind::If { branches, else_body } => {
                for b in branches {
                    walk_stmts(&b.body, f);
                }
                if let Some(e) = else_body {
                    walk_stmts(e, f);
                }
            }
            StmtKind::Case { arms, else_body, .. } => {
                for a in arms {
                    walk_stmts(&a.body, f);
                }
                if let Some(e) = else_body {
                    walk_stmts(e, f);
                }
            }
            StmtKind::For { body, .. } | StmtKind::While { body, .. } | StmtKind::Repeat { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}

/// A coverage site: a simple statement or a guard evaluation site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StmtSite {
    pub id: StmtId,
    pub span: Span,
}

/// All statement ids of a body in source order, including `ELSIF` guards.
pub fn statement_sites(body: &[Stmt]) -> Vec<StmtSite> {
    let mut out = Vec::new();
    walk_stmts(body, &mut |s| {
        if let StmtKind::If { branches, .. } = &s.kind {
            for b in branches {
                out.push(StmtSite { id: b.guard_id, span: b.span });
            }
        } else {
            out.push(StmtSite { id: s.id, span: s.span });
        }
    });
    // ELSIF guards are interleaved with the nested bodies in source order
    out.sort_by_key(|s| s.id);
    out
}

impl CompilationUnit {
    /// Clears every span so two trees can be compared structurally.
    pub fn strip_spans(&mut self) {
        for p in &mut self.pous {
            p.strip_spans();
        }
        for c in &mut self.configurations {
            c.span = Span::default();
            c.name.span = Span::default();
            for r in &mut c.resources {
                r.span = Span::default();
                if let Some(n) = &mut r.name {
                    n.span = Span::default();
                }
                if let Some(n) = &mut r.on {
                    n.span = Span::default();
                }
                for t in &mut r.tasks {
                    t.span = Span::default();
                    t.name.span = Span::default();
                    if let Some(e) = &mut t.interval {
                        e.strip_spans();
                    }
                    if let Some(e) = &mut t.priority {
                        e.strip_spans();
                    }
                }
                for p in &mut r.programs {
                    p.span = Span::default();
                    p.name.span = Span::default();
                    p.program_type.span = Span::default();
                    if let Some(t) = &mut p.task {
                        t.span = Span::default();
                    }
                }
            }
        }
    }
}

impl PouDecl {
    pub fn strip_spans(&mut self) {
        self.span = Span::default();
        self.name.span = Span::default();
        if let Some(t) = &mut self.return_type {
            t.strip_spans();
        }
        for b in &mut self.var_blocks {
            b.span = Span::default();
            for d in &mut b.decls {
                d.span = Span::default();
                for n in &mut d.names {
                    n.span = Span::default();
                }
                d.ty.strip_spans();
                if let Some(i) = &mut d.init {
                    i.strip_spans();
                }
            }
        }
        strip_body(&mut self.body);
    }
}

impl TypeRef {
    fn strip_spans(&mut self) {
        match self {
            TypeRef::Named(id) => id.span = Span::default(),
            TypeRef::String { span, .. } => *span = Span::default(),
            TypeRef::Array { elem, span, .. } => {
                *span = Span::default();
                elem.strip_spans();
            }
        }
    }
}

impl Initializer {
    fn strip_spans(&mut self) {
        match self {
            Initializer::Expr(e) => e.strip_spans(),
            Initializer::Array(items, span) => {
                *span = Span::default();
                for it in items {
                    match it {
                        ArrayInitItem::Value(v) => v.strip_spans(),
                        ArrayInitItem::Repeat(_, Some(v)) => v.strip_spans(),
                        ArrayInitItem::Repeat(_, None) => {}
                    }
                }
            }
        }
    }
}

impl Expr {
    pub fn strip_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            ExprKind::Literal(_) => {}
            ExprKind::Var(id) => id.span = Span::default(),
            ExprKind::Member(e, id) => {
                e.strip_spans();
                id.span = Span::default();
            }
            ExprKind::Index(e, idx) => {
                e.strip_spans();
                for i in idx {
                    i.strip_spans();
                }
            }
            ExprKind::Unary(_, e) => e.strip_spans(),
            ExprKind::Binary(_, l, r) => {
                l.strip_spans();
                r.strip_spans();
            }
            ExprKind::Call(id, args) => {
                id.span = Span::default();
                strip_args(args);
            }
        }
    }
}

fn strip_args(args: &mut [CallArg]) {
    for a in args {
        a.span = Span::default();
        if let Some(n) = &mut a.name {
            n.span = Span::default();
        }
        a.value.strip_spans();
    }
}

fn strip_body(body: &mut [Stmt]) {
    for s in body {
        s.span = Span::default();
        match &mut s.kind {
            StmtKind::Assign { target, value } => {
                target.strip_spans();
                value.strip_spans();
            }
            StmtKind::Call { callee, args } => {
                callee.strip_spans();
                strip_args(args);
            }
            StmtKind::If { branches, else_body } => {
                for b in branches {
                    b.span = Span::default();
                    b.cond.strip_spans();
                    strip_body(&mut b.body);
                }
                if let Some(e) = else_body {
                    strip_body(e);
                }
            }
            StmtKind::Case { selector, arms, else_body } => {
                selector.strip_spans();
                for a in arms {
                    a.span = Span::default();
                    strip_body(&mut a.body);
                }
                if let Some(e) = else_body {
                    strip_body(e);
                }
            }
            StmtKind::For { var, from, to, by, body } => {
                var.span = Span::default();
                from.strip_spans();
                to.strip_spans();
                if let Some(b) = by {
                    b.strip_spans();
                }
                strip_body(body);
            }
            StmtKind::While { cond, body } => {
                cond.strip_spans();
                strip_body(body);
            }
            StmtKind::Repeat { body, until } => {
                strip_body(body);
                until.strip_spans();
            }
            StmtKind::Exit | StmtKind::Return => {}
        }
    }
}
