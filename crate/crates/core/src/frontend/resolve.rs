//! Name binding and type checking from [`CompilationUnit`] to [`TypedProgram`].
//!
//! Names are looked up in the unit, then in the libraries in order, then
//! among the standard blocks and functions. A POU name may be declared only
//! once across the unit, its libraries and the standard function blocks, so
//! IR references by name are unambiguous. Untyped numeric literals take
//! their type from context (assignment target, other operand, parameter).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::ast::*;
use super::builtins::{fb_pou, BuiltinFb, BuiltinFn};
use super::ir::*;
use super::source::Span;
use super::types::{ArrayType, ElementaryType, Type, DEFAULT_STRING_CAPACITY, MAX_STRING_CAPACITY};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ResolveErrorKind {
    UnknownIdentifier,
    TypeMismatch,
    WrongArity,
    AssignToForeignInput,
    DuplicateDeclaration,
    LiteralOutOfRange,
    InvalidTarget,
    RecursiveInstance,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ResolveError {
    pub kind: ResolveErrorKind,
    pub span: Span,
    pub message: String,
}

pub fn resolve(ast: &CompilationUnit, libraries: &[TypedProgram]) -> Result<TypedProgram, Vec<ResolveError>> {
    resolve_named("<unit>", ast, libraries)
}

/// Like [`resolve`], labelling the resulting POUs with `origin`.
pub fn resolve_named(origin: &str, ast: &CompilationUnit, libraries: &[TypedProgram]) -> Result<TypedProgram, Vec<ResolveError>> {
    let mut errors = Vec::new();

    let mut imported: Vec<Arc<TypedPou>> = Vec::new();
    let mut imported_index: HashMap<String, usize> = HashMap::new();
    for lib in libraries {
        for p in &lib.pous {
            match imported_index.get(&p.name) {
                Some(&i) if Arc::ptr_eq(&imported[i], p) || *imported[i] == **p => {}
                Some(&i) => errors.push(ResolveError {
                    kind: ResolveErrorKind::DuplicateDeclaration,
                    span: p.span,
                    message: format!("POU {} is declared in both {} and {}", p.name, imported[i].origin, p.origin),
                }),
                None => {
                    imported_index.insert(p.name.clone(), imported.len());
                    imported.push(p.clone());
                }
            }
        }
    }

    let mut locals: Vec<&PouDecl> = Vec::new();
    let mut local_names: HashSet<String> = HashSet::new();
    for p in &ast.pous {
        let n = &p.name.name;
        let clash = if local_names.contains(n) {
            Some(format!("duplicate declaration of POU {n}"))
        } else if imported_index.contains_key(n) {
            Some(format!("POU {n} is already declared in a library"))
        } else if BuiltinFb::from_name(n).is_some() {
            Some(format!("{n} is a standard function block and cannot be redeclared"))
        } else {
            None
        };
        match clash {
            Some(message) => errors.push(ResolveError { kind: ResolveErrorKind::DuplicateDeclaration, span: p.name.span, message }),
            None => {
                local_names.insert(n.clone());
                locals.push(p);
            }
        }
    }

    let mut r = Resolver { sigs: HashMap::new() };
    for p in &imported {
        r.sigs.insert(p.name.clone(), Sig::of(p));
    }
    for b in BuiltinFb::ALL {
        r.sigs.insert(b.name().to_string(), Sig::of(fb_pou(b)));
    }
    // kinds first so type references to later POUs resolve
    for p in &locals {
        r.sigs.insert(p.name.name.clone(), Sig { kind: p.kind, name: p.name.name.clone(), vars: Vec::new(), return_slot: None });
    }
    for p in &locals {
        let sig = r.signature(p, &mut errors);
        r.sigs.insert(p.name.name.clone(), sig);
    }
    check_instance_cycles(&locals, &r, &mut errors);

    let mut typed = Vec::new();
    for p in &locals {
        let sig = &r.sigs[&p.name.name];
        let mut body = Body { r: &r, sig, errors: &mut errors, loop_depth: 0 };
        let mut vars = sig.vars.clone();
        let mut decl_inits = Vec::new();
        for b in &p.var_blocks {
            for d in &b.decls {
                for n in &d.names {
                    decl_inits.push((n.name.clone(), d.init.as_ref(), d.span));
                }
            }
        }
        for (name, init, span) in decl_inits {
            let Some(init) = init else { continue };
            if let Some(v) = vars.iter_mut().find(|v| v.name == name && v.span == span) {
                let ty = v.ty.clone();
                v.init = body.var_init(init, &ty);
            }
        }
        let tbody = body.stmts(&p.body);
        typed.push(Arc::new(TypedPou {
            kind: p.kind,
            name: p.name.name.clone(),
            origin: origin.to_string(),
            span: p.span,
            vars,
            return_slot: sig.return_slot,
            body: tbody,
            sites: statement_sites(&p.body),
            builtin: None,
        }));
    }

    let configurations = r.configurations(ast, &mut errors);

    if !errors.is_empty() {
        return Err(errors);
    }
    let local_count = typed.len();
    let mut pous = typed;
    pous.extend(imported);
    let index = pous.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect::<BTreeMap<_, _>>();
    Ok(TypedProgram { origin: origin.to_string(), ast: ast.clone(), pous, local_count, configurations, index })
}

#[derive(Debug, Clone)]
struct Sig {
    kind: PouKind,
    name: String,
    vars: Vec<VarInfo>,
    return_slot: Option<usize>,
}

impl Sig {
    fn of(p: &TypedPou) -> Sig {
        Sig { kind: p.kind, name: p.name.clone(), vars: p.vars.clone(), return_slot: p.return_slot }
    }

    fn var(&self, name: &str) -> Option<(usize, &VarInfo)> {
        self.vars.iter().enumerate().find(|(_, v)| v.name == name)
    }
}

struct Resolver {
    sigs: HashMap<String, Sig>,
}

fn err(errors: &mut Vec<ResolveError>, kind: ResolveErrorKind, span: Span, message: impl Into<String>) {
    errors.push(ResolveError { kind, span, message: message.into() });
}

impl Resolver {
    fn resolve_type(&self, t: &TypeRef, errors: &mut Vec<ResolveError>) -> Option<Type> {
        match t {
            TypeRef::Named(id) => {
                if let Some(e) = ElementaryType::from_name(&id.name) {
                    return Some(e.to_type());
                }
                match self.sigs.get(&id.name) {
                    Some(s) if s.kind == PouKind::FunctionBlock => Some(Type::Fb(id.name.clone())),
                    Some(s) => {
                        err(errors, ResolveErrorKind::TypeMismatch, id.span, format!("{} is a {}, not a type", id.name, s.kind.keyword()));
                        None
                    }
                    None => {
                        err(errors, ResolveErrorKind::UnknownIdentifier, id.span, format!("unknown type {}", id.name));
                        None
                    }
                }
            }
            TypeRef::String { capacity, .. } => Some(Type::String(capacity.unwrap_or(DEFAULT_STRING_CAPACITY))),
            TypeRef::Array { dims, elem, span } => {
                let mut ty = self.resolve_type(elem, errors)?;
                for &(lo, hi) in dims.iter().rev() {
                    if lo > hi {
                        err(errors, ResolveErrorKind::TypeMismatch, *span, format!("array bounds {lo}..{hi} are reversed"));
                        return None;
                    }
                    ty = Type::Array(Box::new(ArrayType { lo, hi, elem: ty }));
                }
                Some(ty)
            }
        }
    }

    fn signature(&self, p: &PouDecl, errors: &mut Vec<ResolveError>) -> Sig {
        let mut vars: Vec<VarInfo> = Vec::new();
        let mut return_slot = None;
        if let Some(rt) = &p.return_type {
            if let Some(ty) = self.resolve_type(rt, errors) {
                return_slot = Some(0);
                vars.push(VarInfo {
                    name: p.name.name.clone(),
                    ty,
                    section: VarSection::Var,
                    constant: false,
                    init: None,
                    span: p.name.span,
                });
            }
        }
        for b in &p.var_blocks {
            if p.kind == PouKind::Function && matches!(b.section, VarSection::Output | VarSection::InOut) {
                err(errors, ResolveErrorKind::Unsupported, b.span, format!("{} is not supported in functions", b.section.keyword()));
                continue;
            }
            for d in &b.decls {
                let ty = self.resolve_type(&d.ty, errors);
                for n in &d.names {
                    if vars.iter().any(|v| v.name == n.name) {
                        err(
                            errors,
                            ResolveErrorKind::DuplicateDeclaration,
                            n.span,
                            format!("duplicate declaration of {} in {}", n.name, p.name.name),
                        );
                        continue;
                    }
                    if let Some(ty) = &ty {
                        vars.push(VarInfo {
                            name: n.name.clone(),
                            ty: ty.clone(),
                            section: b.section,
                            constant: b.constant,
                            init: None,
                            span: d.span,
                        });
                    }
                }
            }
        }
        Sig { kind: p.kind, name: p.name.name.clone(), vars, return_slot }
    }

    fn configurations(&self, ast: &CompilationUnit, errors: &mut Vec<ResolveError>) -> Vec<TypedConfig> {
        if ast.configurations.len() > 1 {
            err(errors, ResolveErrorKind::Unsupported, ast.configurations[1].span, "only one CONFIGURATION per program is supported");
        }
        let mut out = Vec::new();
        for c in &ast.configurations {
            let tasks: Vec<&TaskDecl> = c.resources.iter().flat_map(|r| r.tasks.iter()).collect();
            if tasks.len() > 1 {
                err(errors, ResolveErrorKind::Unsupported, tasks[1].span, "only a single cyclic task is supported");
            }
            let task = tasks.first().map(|t| {
                let interval_ms = match t.interval.as_ref().map(|e| &e.kind) {
                    None => None,
                    Some(ExprKind::Literal(Literal::Time(ms))) => Some(*ms),
                    Some(_) => {
                        err(errors, ResolveErrorKind::TypeMismatch, t.span, "task INTERVAL must be a TIME literal");
                        None
                    }
                };
                let priority = match t.priority.as_ref().map(|e| &e.kind) {
                    None => None,
                    Some(ExprKind::Literal(Literal::Int { value, .. })) => Some(*value),
                    Some(_) => {
                        err(errors, ResolveErrorKind::TypeMismatch, t.span, "task PRIORITY must be an integer literal");
                        None
                    }
                };
                TaskInfo { name: t.name.name.clone(), interval_ms, priority }
            });
            let mut programs = Vec::new();
            for p in c.resources.iter().flat_map(|r| r.programs.iter()) {
                match self.sigs.get(&p.program_type.name) {
                    Some(s) if s.kind == PouKind::Program => {}
                    Some(_) => err(
                        errors,
                        ResolveErrorKind::TypeMismatch,
                        p.program_type.span,
                        format!("{} is not a PROGRAM", p.program_type.name),
                    ),
                    None => err(
                        errors,
                        ResolveErrorKind::UnknownIdentifier,
                        p.program_type.span,
                        format!("unknown program {}", p.program_type.name),
                    ),
                }
                if let Some(tn) = &p.task {
                    if task.as_ref().map(|t| &t.name) != Some(&tn.name) {
                        err(errors, ResolveErrorKind::UnknownIdentifier, tn.span, format!("unknown task {}", tn.name));
                    }
                }
                programs.push(ProgramInstance { name: p.name.name.clone(), program_type: p.program_type.name.clone() });
            }
            out.push(TypedConfig { name: c.name.name.clone(), task, programs });
        }
        out
    }
}

fn fb_types_in(ty: &Type, out: &mut Vec<String>) {
    match ty {
        Type::Fb(n) => out.push(n.clone()),
        Type::Array(a) => fb_types_in(&a.elem, out),
        _ => {}
    }
}

/// Rejects function blocks that contain themselves, directly or indirectly.
fn check_instance_cycles(locals: &[&PouDecl], r: &Resolver, errors: &mut Vec<ResolveError>) {
    let local: HashSet<&str> = locals.iter().map(|p| p.name.name.as_str()).collect();
    let edges = |name: &str| -> Vec<String> {
        let mut out = Vec::new();
        if let Some(s) = r.sigs.get(name) {
            for v in &s.vars {
                fb_types_in(&v.ty, &mut out);
            }
        }
        out.retain(|n| local.contains(n.as_str()));
        out
    };
    for p in locals {
        let start = p.name.name.as_str();
        let mut stack = edges(start);
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if n == start {
                err(
                    errors,
                    ResolveErrorKind::RecursiveInstance,
                    p.name.span,
                    format!("function block {start} contains an instance of itself"),
                );
                break;
            }
            if seen.insert(n.clone()) {
                stack.extend(edges(&n));
            }
        }
    }
}

/// True for expressions built only from unprefixed numeric literals.
fn is_poly(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Literal(Literal::Int { type_prefix: None, .. } | Literal::Real { type_prefix: None, .. }) => true,
        ExprKind::Unary(UnaryOp::Neg, x) => is_poly(x),
        ExprKind::Binary(op, l, r) if !op.is_comparison() && !op.is_logical() => is_poly(l) && is_poly(r),
        _ => false,
    }
}

fn poly_has_real(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Literal(Literal::Real { .. }) => true,
        ExprKind::Unary(_, x) => poly_has_real(x),
        ExprKind::Binary(_, l, r) => poly_has_real(l) || poly_has_real(r),
        _ => false,
    }
}

fn fits(v: i64, ty: &Type) -> bool {
    ty.int_range().is_some_and(|(lo, hi)| v >= lo && v <= hi)
}

fn widen(e: TExpr, to: &Type) -> TExpr {
    if e.ty == *to || (e.ty.is_string() && to.is_string()) {
        e
    } else {
        TExpr { span: e.span, ty: to.clone(), kind: TExprKind::Widen(Box::new(e)) }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Access {
    Read,
    Write,
}

struct Body<'r, 'e> {
    r: &'r Resolver,
    sig: &'r Sig,
    errors: &'e mut Vec<ResolveError>,
    loop_depth: u32,
}

impl<'r> Body<'r, '_> {
    fn err(&mut self, kind: ResolveErrorKind, span: Span, message: impl Into<String>) {
        err(self.errors, kind, span, message);
    }

    fn mismatch<T>(&mut self, span: Span, message: impl Into<String>) -> Option<T> {
        self.err(ResolveErrorKind::TypeMismatch, span, message);
        None
    }

    // ---- declarations ----

    fn var_init(&mut self, init: &Initializer, ty: &Type) -> Option<VarInit> {
        match (init, ty) {
            (_, Type::Fb(_)) => {
                let span = match init {
                    Initializer::Expr(e) => e.span,
                    Initializer::Array(_, s) => *s,
                };
                self.err(ResolveErrorKind::Unsupported, span, "function block instances cannot have initializers");
                None
            }
            (Initializer::Expr(e), Type::Array(_)) => self.mismatch(e.span, "array initializer must be a bracketed list"),
            (Initializer::Expr(e), t) => {
                let x = self.assign_value(e, t)?;
                self.check_const(&x)?;
                Some(VarInit::Scalar(x))
            }
            (Initializer::Array(items, span), Type::Array(_)) => {
                let mut elem = ty;
                let mut total: usize = 1;
                while let Type::Array(a) = elem {
                    total = total.saturating_mul(a.len());
                    elem = &a.elem;
                }
                if matches!(elem, Type::Fb(_)) {
                    self.err(ResolveErrorKind::Unsupported, *span, "function block instances cannot have initializers");
                    return None;
                }
                let elem = elem.clone();
                let mut out = Vec::new();
                self.flatten_items(items, &elem, total, &mut out)?;
                if out.len() > total {
                    return self.mismatch(*span, format!("{} initializers for an array of {total} elements", out.len()));
                }
                Some(VarInit::Elements(out))
            }
            (Initializer::Array(_, span), t) => self.mismatch(*span, format!("cannot initialize {t} with a list")),
        }
    }

    fn flatten_items(&mut self, items: &[ArrayInitItem], elem: &Type, total: usize, out: &mut Vec<TExpr>) -> Option<()> {
        for it in items {
            match it {
                ArrayInitItem::Value(Initializer::Expr(e)) => {
                    let x = self.assign_value(e, elem)?;
                    self.check_const(&x)?;
                    out.push(x);
                }
                ArrayInitItem::Value(Initializer::Array(inner, _)) => self.flatten_items(inner, elem, total, out)?,
                ArrayInitItem::Repeat(n, value) => {
                    let mut chunk = Vec::new();
                    match value.as_deref() {
                        None => {
                            chunk.push(TExpr::constant(Value::default_for(elem).expect("scalar element"), elem.clone(), Span::default()))
                        }
                        Some(Initializer::Expr(e)) => {
                            let x = self.assign_value(e, elem)?;
                            self.check_const(&x)?;
                            chunk.push(x);
                        }
                        Some(Initializer::Array(inner, _)) => self.flatten_items(inner, elem, total, &mut chunk)?,
                    }
                    let n = *n as usize;
                    if n.saturating_mul(chunk.len()) > total.saturating_sub(out.len()) {
                        // report through the caller's length check without expanding
                        out.extend(std::iter::repeat_n(chunk[0].clone(), total - out.len() + 1));
                        return Some(());
                    }
                    for _ in 0..n {
                        out.extend(chunk.iter().cloned());
                    }
                }
            }
        }
        Some(())
    }

    fn check_const(&mut self, e: &TExpr) -> Option<()> {
        fn walk(e: &TExpr) -> bool {
            match &e.kind {
                TExprKind::Const(_) => true,
                TExprKind::Load(_) | TExprKind::Call { .. } => false,
                TExprKind::Builtin(BuiltinFn::TPlcMs, _) => false,
                TExprKind::Builtin(_, args) => args.iter().all(walk),
                TExprKind::Widen(x) | TExprKind::Unary(_, x) => walk(x),
                TExprKind::Binary(_, l, r) => walk(l) && walk(r),
            }
        }
        if walk(e) {
            Some(())
        } else {
            self.mismatch(e.span, "initializer must be a constant expression")
        }
    }

    // ---- statements ----

    fn stmts(&mut self, body: &[Stmt]) -> Vec<TStmt> {
        body.iter().filter_map(|s| self.stmt(s)).collect()
    }

    fn condition(&mut self, e: &Expr) -> Option<TExpr> {
        let t = self.expr(e, Some(&Type::Bool))?;
        if t.ty != Type::Bool {
            return self.mismatch(e.span, format!("condition must be BOOL, found {}", t.ty));
        }
        Some(t)
    }

    fn stmt(&mut self, s: &Stmt) -> Option<TStmt> {
        let kind = match &s.kind {
            StmtKind::Assign { target, value } => {
                let p = self.place(target, Access::Write)?;
                if matches!(p.ty, Type::Fb(_) | Type::Array(_)) {
                    return self.mismatch(target.span, format!("cannot assign a whole {}", p.ty));
                }
                let v = self.assign_value(value, &p.ty)?;
                TStmtKind::Assign { target: p, value: v }
            }
            StmtKind::Call { callee, args } => self.call_stmt(callee, args, s.span)?,
            StmtKind::If { branches, else_body } => {
                let mut out = Vec::new();
                let mut ok = true;
                for b in branches {
                    let cond = self.condition(&b.cond);
                    let body = self.stmts(&b.body);
                    match cond {
                        Some(cond) => out.push(TBranch { guard_id: b.guard_id, span: b.span, cond, body }),
                        None => ok = false,
                    }
                }
                let else_body = else_body.as_ref().map(|e| self.stmts(e));
                if !ok {
                    return None;
                }
                TStmtKind::If { branches: out, else_body }
            }
            StmtKind::Case { selector, arms, else_body } => {
                let sel = self.expr(selector, None);
                if let Some(t) = &sel {
                    if !t.ty.is_integral() {
                        self.err(
                            ResolveErrorKind::TypeMismatch,
                            selector.span,
                            format!("CASE selector must be an integer, found {}", t.ty),
                        );
                    }
                }
                let mut tarms = Vec::new();
                for a in arms {
                    for l in &a.labels {
                        if l.lo > l.hi {
                            self.err(ResolveErrorKind::TypeMismatch, a.span, format!("case range {}..{} is reversed", l.lo, l.hi));
                        }
                    }
                    tarms.push(TCaseArm { labels: a.labels.clone(), body: self.stmts(&a.body) });
                }
                let else_body = else_body.as_ref().map(|e| self.stmts(e));
                let sel = sel.filter(|t| t.ty.is_integral())?;
                TStmtKind::Case { selector: sel, arms: tarms, else_body }
            }
            StmtKind::For { var, from, to, by, body } => {
                let p = self.place(&Expr { kind: ExprKind::Var(var.clone()), span: var.span }, Access::Write);
                let ty = p.as_ref().map(|p| p.ty.clone());
                if let Some(t) = &ty {
                    if !t.is_integral() {
                        self.err(ResolveErrorKind::TypeMismatch, var.span, format!("FOR variable must be an integer, found {t}"));
                    }
                }
                let ty = ty.filter(|t| t.is_integral());
                let (f, t, b) = match &ty {
                    Some(ty) => (
                        self.assign_value(from, ty),
                        self.assign_value(to, ty),
                        match by {
                            Some(b) => self.assign_value(b, ty),
                            None => Some(TExpr::constant(Value::from_i64_wrapping(1, ty), ty.clone(), s.span)),
                        },
                    ),
                    None => (None, None, None),
                };
                self.loop_depth += 1;
                let body = self.stmts(body);
                self.loop_depth -= 1;
                TStmtKind::For(Box::new(TFor { var: p?, from: f?, to: t?, by: b?, body }))
            }
            StmtKind::While { cond, body } => {
                let c = self.condition(cond);
                self.loop_depth += 1;
                let body = self.stmts(body);
                self.loop_depth -= 1;
                TStmtKind::While { cond: c?, body }
            }
            StmtKind::Repeat { body, until } => {
                self.loop_depth += 1;
                let body = self.stmts(body);
                self.loop_depth -= 1;
                let u = self.condition(until)?;
                TStmtKind::Repeat { body, until: u }
            }
            StmtKind::Exit => {
                if self.loop_depth == 0 {
                    self.err(ResolveErrorKind::InvalidTarget, s.span, "EXIT outside of a loop");
                    return None;
                }
                TStmtKind::Exit
            }
            StmtKind::Return => TStmtKind::Return,
        };
        Some(TStmt { id: s.id, span: s.span, kind })
    }

    fn call_stmt(&mut self, callee: &Expr, args: &[CallArg], span: Span) -> Option<TStmtKind> {
        if let ExprKind::Var(id) = &callee.kind {
            if self.sig.var(&id.name).is_none() {
                let e = self.call_expr(id, args, None, span)?;
                return Some(TStmtKind::Eval(e));
            }
        }
        let inst = self.place(callee, Access::Read)?;
        if inst.path.iter().any(|s| matches!(s, Step::Member(_))) {
            self.err(ResolveErrorKind::InvalidTarget, callee.span, "only instances declared in this POU can be called");
            return None;
        }
        let Type::Fb(fb) = &inst.ty else {
            return self.mismatch(callee.span, format!("a value of type {} cannot be called", inst.ty));
        };
        let fb = fb.clone();
        let sig: &'r Sig = &self.r.sigs[&fb];
        let mut inputs = Vec::new();
        let mut in_outs = Vec::new();
        let mut outputs = Vec::new();
        let mut seen = HashSet::new();
        let mut ok = true;
        for a in args {
            let Some(n) = &a.name else {
                self.err(ResolveErrorKind::WrongArity, a.span, "function block call arguments must be named");
                ok = false;
                continue;
            };
            if !seen.insert(n.name.clone()) {
                self.err(ResolveErrorKind::WrongArity, n.span, format!("argument {} given more than once", n.name));
                ok = false;
                continue;
            }
            let Some((idx, v)) = sig.var(&n.name) else {
                self.err(ResolveErrorKind::UnknownIdentifier, n.span, format!("{fb} has no parameter {}", n.name));
                ok = false;
                continue;
            };
            match (a.direction, v.section) {
                (ArgDirection::In, VarSection::Input) => match self.assign_value(&a.value, &v.ty) {
                    Some(e) => inputs.push((idx, e)),
                    None => ok = false,
                },
                (ArgDirection::In, VarSection::InOut) => match self.place(&a.value, Access::Write) {
                    Some(p) if p.ty == v.ty => in_outs.push((idx, p)),
                    Some(p) => {
                        self.err(
                            ResolveErrorKind::TypeMismatch,
                            a.value.span,
                            format!("VAR_IN_OUT {} needs {}, found {}", n.name, v.ty, p.ty),
                        );
                        ok = false;
                    }
                    None => ok = false,
                },
                (ArgDirection::Out, VarSection::Output) => match self.place(&a.value, Access::Write) {
                    Some(p) if v.ty.widens_to(&p.ty) => outputs.push((idx, p)),
                    Some(p) => {
                        self.err(
                            ResolveErrorKind::TypeMismatch,
                            a.value.span,
                            format!("cannot store output {} of type {} into {}", n.name, v.ty, p.ty),
                        );
                        ok = false;
                    }
                    None => ok = false,
                },
                (ArgDirection::In, VarSection::Output) => {
                    self.err(ResolveErrorKind::InvalidTarget, n.span, format!("{} is an output of {fb}; bind it with `=>`", n.name));
                    ok = false;
                }
                (ArgDirection::Out, _) => {
                    self.err(ResolveErrorKind::InvalidTarget, n.span, format!("{} is not an output of {fb}", n.name));
                    ok = false;
                }
                (ArgDirection::In, _) => {
                    self.err(ResolveErrorKind::InvalidTarget, n.span, format!("{} is not a parameter of {fb}", n.name));
                    ok = false;
                }
            }
        }
        for v in sig.vars.iter().filter(|v| v.section == VarSection::InOut) {
            if !seen.contains(&v.name) {
                self.err(ResolveErrorKind::WrongArity, span, format!("VAR_IN_OUT {} of {fb} must be bound", v.name));
                ok = false;
            }
        }
        if !ok {
            return None;
        }
        Some(TStmtKind::CallFb { instance: inst, fb_type: fb, inputs, in_outs, outputs })
    }

    // ---- expressions ----

    /// Types `value` for storage into `target`, applying implicit widening.
    fn assign_value(&mut self, value: &Expr, target: &Type) -> Option<TExpr> {
        if let ExprKind::Literal(Literal::Int { value: v, type_prefix: None }) = &value.kind {
            if let Some((lo, hi)) = target.int_range() {
                if *v < lo || *v > hi {
                    self.err(ResolveErrorKind::LiteralOutOfRange, value.span, format!("literal {v} exceeds the {target} range {lo}..{hi}"));
                    return None;
                }
            }
        }
        let e = self.expr(value, Some(target))?;
        self.coerce(e, target, value.span)
    }

    fn coerce(&mut self, e: TExpr, target: &Type, span: Span) -> Option<TExpr> {
        if e.ty.widens_to(target) {
            Some(widen(e, target))
        } else {
            self.mismatch(span, format!("cannot convert {} to {target} implicitly", e.ty))
        }
    }

    fn place(&mut self, e: &Expr, access: Access) -> Option<Place> {
        match &e.kind {
            ExprKind::Var(id) => {
                let Some((slot, v)) = self.sig.var(&id.name) else {
                    self.err(ResolveErrorKind::UnknownIdentifier, id.span, format!("unknown identifier {}", id.name));
                    return None;
                };
                if access == Access::Write && v.constant {
                    self.err(ResolveErrorKind::InvalidTarget, id.span, format!("cannot assign to constant {}", id.name));
                    return None;
                }
                Some(Place { root: slot, path: Vec::new(), ty: v.ty.clone(), span: e.span })
            }
            ExprKind::Member(base, m) => {
                let mut p = self.place(base, Access::Read)?;
                let Type::Fb(fb) = &p.ty else {
                    return self.mismatch(base.span, format!("a value of type {} has no members", p.ty));
                };
                let sig: &'r Sig = &self.r.sigs[fb];
                let Some((idx, mv)) = sig.var(&m.name) else {
                    self.err(ResolveErrorKind::UnknownIdentifier, m.span, format!("{} has no member {}", sig.name, m.name));
                    return None;
                };
                match access {
                    Access::Write if mv.section == VarSection::Input => {
                        self.err(
                            ResolveErrorKind::AssignToForeignInput,
                            e.span,
                            format!("cannot assign to input {} of another instance", m.name),
                        );
                        return None;
                    }
                    Access::Write => {
                        self.err(ResolveErrorKind::InvalidTarget, e.span, format!("cannot assign to {} of another instance", m.name));
                        return None;
                    }
                    Access::Read if !matches!(mv.section, VarSection::Input | VarSection::Output) => {
                        self.err(ResolveErrorKind::InvalidTarget, m.span, format!("{} is internal to {}", m.name, sig.name));
                        return None;
                    }
                    Access::Read => {}
                }
                p.path.push(Step::Member(idx));
                p.ty = mv.ty.clone();
                p.span = e.span;
                Some(p)
            }
            ExprKind::Index(base, idx) => {
                let mut p = self.place(base, access)?;
                for ix in idx {
                    let Type::Array(at) = p.ty.clone() else {
                        return self.mismatch(ix.span, format!("cannot index a value of type {}", p.ty));
                    };
                    let ie = self.expr(ix, Some(&Type::Dint))?;
                    if !ie.ty.is_integral() {
                        return self.mismatch(ix.span, format!("array index must be an integer, found {}", ie.ty));
                    }
                    p.path.push(Step::Index(Box::new(ie)));
                    p.ty = at.elem.clone();
                }
                p.span = e.span;
                Some(p)
            }
            _ => {
                self.err(ResolveErrorKind::InvalidTarget, e.span, "expression is not assignable");
                None
            }
        }
    }

    fn expr(&mut self, e: &Expr, hint: Option<&Type>) -> Option<TExpr> {
        let span = e.span;
        match &e.kind {
            ExprKind::Literal(l) => self.literal(l, hint, span),
            ExprKind::Var(_) | ExprKind::Member(_, _) | ExprKind::Index(_, _) => {
                let p = self.place(e, Access::Read)?;
                if matches!(p.ty, Type::Fb(_)) {
                    return self.mismatch(span, "a function block instance cannot be used as a value");
                }
                if matches!(p.ty, Type::Array(_)) {
                    return self.mismatch(span, "arrays can only be accessed element by element");
                }
                Some(TExpr { ty: p.ty.clone(), kind: TExprKind::Load(p), span })
            }
            ExprKind::Unary(op, x) => {
                let t = self.expr(x, hint)?;
                let ok = match op {
                    UnaryOp::Neg => t.ty.is_signed_int() || t.ty.is_real() || t.ty == Type::Time,
                    UnaryOp::Not => t.ty == Type::Bool || t.ty.is_bit_string(),
                };
                if !ok {
                    let sym = if *op == UnaryOp::Neg { "-" } else { "NOT" };
                    return self.mismatch(span, format!("operator {sym} does not apply to {}", t.ty));
                }
                Some(TExpr { ty: t.ty.clone(), kind: TExprKind::Unary(*op, Box::new(t)), span })
            }
            ExprKind::Binary(op, l, r) => self.binary(*op, l, r, hint, span),
            ExprKind::Call(name, args) => self.call_expr(name, args, hint, span),
        }
    }

    fn literal(&mut self, l: &Literal, hint: Option<&Type>, span: Span) -> Option<TExpr> {
        let (value, ty) = match l {
            Literal::Int { value, type_prefix } => {
                let v = *value;
                let target = match type_prefix {
                    Some(p) => p.to_type(),
                    None => match hint {
                        Some(h) if h.is_integral() && fits(v, h) => h.clone(),
                        Some(h) if h.is_real() => h.clone(),
                        _ if fits(v, &Type::Int) => Type::Int,
                        _ if fits(v, &Type::Dint) => Type::Dint,
                        _ => {
                            self.err(ResolveErrorKind::LiteralOutOfRange, span, format!("integer literal {v} exceeds the DINT range"));
                            return None;
                        }
                    },
                };
                match &target {
                    t if t.is_integral() => {
                        if !fits(v, t) {
                            let (lo, hi) = t.int_range().expect("integral");
                            self.err(ResolveErrorKind::LiteralOutOfRange, span, format!("literal {v} exceeds the {t} range {lo}..{hi}"));
                            return None;
                        }
                        (Value::from_i64_wrapping(v, t), target)
                    }
                    t if t.is_real() => (Value::from_f64(v as f64, t), target),
                    Type::Bool if v == 0 || v == 1 => (Value::Bool(v == 1), target),
                    t => return self.mismatch(span, format!("integer literal cannot have type {t}")),
                }
            }
            Literal::Real { value, type_prefix } => {
                let target = match type_prefix {
                    Some(p) => p.to_type(),
                    None => match hint {
                        Some(h) if h.is_real() => h.clone(),
                        _ => Type::Lreal,
                    },
                };
                if !target.is_real() {
                    return self.mismatch(span, format!("real literal cannot have type {target}"));
                }
                if target == Type::Real && value.is_finite() && !(*value as f32).is_finite() {
                    self.err(ResolveErrorKind::LiteralOutOfRange, span, format!("literal {value} exceeds the REAL range"));
                    return None;
                }
                (Value::from_f64(*value, &target), target)
            }
            Literal::Bool(b) => (Value::Bool(*b), Type::Bool),
            Literal::Time(ms) => (Value::Time(*ms), Type::Time),
            Literal::Str(s) => {
                let n = s.chars().count();
                if n > MAX_STRING_CAPACITY as usize {
                    self.err(ResolveErrorKind::LiteralOutOfRange, span, "string literal is too long");
                    return None;
                }
                (Value::String(s.clone()), Type::String(n.max(1) as u32))
            }
        };
        Some(TExpr::constant(value, ty, span))
    }

    fn operands(&mut self, l: &Expr, r: &Expr, hint: Option<&Type>) -> Option<(TExpr, TExpr)> {
        let (lp, rp) = (is_poly(l), is_poly(r));
        if lp && !rp {
            let rt = self.expr(r, hint);
            let h = rt.as_ref().map(|t| t.ty.clone()).or_else(|| hint.cloned());
            let lt = self.expr(l, h.as_ref());
            Some((lt?, rt?))
        } else if rp && !lp {
            let lt = self.expr(l, hint);
            let h = lt.as_ref().map(|t| t.ty.clone()).or_else(|| hint.cloned());
            let rt = self.expr(r, h.as_ref());
            Some((lt?, rt?))
        } else if lp && rp && (poly_has_real(l) || poly_has_real(r)) {
            let h = match hint {
                Some(t) if t.is_real() => t.clone(),
                _ => Type::Lreal,
            };
            let lt = self.expr(l, Some(&h));
            let rt = self.expr(r, Some(&h));
            Some((lt?, rt?))
        } else {
            let lt = self.expr(l, hint);
            let rt = self.expr(r, hint);
            Some((lt?, rt?))
        }
    }

    fn binary(&mut self, op: BinaryOp, l: &Expr, r: &Expr, hint: Option<&Type>, span: Span) -> Option<TExpr> {
        let operand_hint = if op.is_comparison() { None } else { hint };
        let (lt, rt) = self.operands(l, r, operand_hint)?;
        let make = |lt: TExpr, rt: TExpr, ty: Type| TExpr { kind: TExprKind::Binary(op, Box::new(lt), Box::new(rt)), ty, span };
        let bad = |s: &mut Self, lt: &TExpr, rt: &TExpr| {
            s.mismatch::<TExpr>(span, format!("operator {} cannot combine {} and {}", op.symbol(), lt.ty, rt.ty))
        };
        match op {
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div if lt.ty == Type::Time || rt.ty == Type::Time => {
                let (a, b) = (&lt.ty, &rt.ty);
                let ok = match op {
                    BinaryOp::Add | BinaryOp::Sub => *a == Type::Time && *b == Type::Time,
                    BinaryOp::Mul => (*a == Type::Time && b.is_arithmetic()) || (a.is_arithmetic() && *b == Type::Time),
                    _ => *a == Type::Time && b.is_arithmetic(),
                };
                if !ok {
                    return bad(self, &lt, &rt);
                }
                Some(make(lt, rt, Type::Time))
            }
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Mod => {
                let Some(c) = Type::common(&lt.ty, &rt.ty) else {
                    return bad(self, &lt, &rt);
                };
                let ok = if op == BinaryOp::Mod { c.is_integral() } else { c.is_arithmetic() || c.is_bit_string() };
                if !ok {
                    return bad(self, &lt, &rt);
                }
                Some(make(widen(lt, &c), widen(rt, &c), c))
            }
            BinaryOp::Pow => {
                if !lt.ty.is_real() || !rt.ty.is_arithmetic() {
                    return self.mismatch(span, format!("`**` needs a REAL or LREAL base, found {} ** {}", lt.ty, rt.ty));
                }
                let ty = lt.ty.clone();
                Some(make(lt, rt, ty))
            }
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => match Type::common(&lt.ty, &rt.ty) {
                Some(c) if c.is_scalar() => Some(make(widen(lt, &c), widen(rt, &c), Type::Bool)),
                _ => bad(self, &lt, &rt),
            },
            BinaryOp::And | BinaryOp::Or | BinaryOp::Xor => match Type::common(&lt.ty, &rt.ty) {
                Some(c) if c == Type::Bool || c.is_bit_string() => Some(make(widen(lt, &c), widen(rt, &c), c)),
                _ => bad(self, &lt, &rt),
            },
        }
    }

    fn call_expr(&mut self, name: &Ident, args: &[CallArg], hint: Option<&Type>, span: Span) -> Option<TExpr> {
        if let Some(sig) = self.r.sigs.get(&name.name) {
            let sig: &'r Sig = sig;
            if sig.kind != PouKind::Function {
                return self.mismatch(name.span, format!("{} is a {} and cannot be called as a function", name.name, sig.kind.keyword()));
            }
            return self.user_call(sig, args, span);
        }
        match BuiltinFn::lookup(&name.name) {
            Some(f) => self.builtin_call(f, args, hint, span),
            None => {
                self.err(ResolveErrorKind::UnknownIdentifier, name.span, format!("unknown function {}", name.name));
                None
            }
        }
    }

    fn user_call(&mut self, sig: &'r Sig, args: &[CallArg], span: Span) -> Option<TExpr> {
        let inputs: Vec<(usize, &VarInfo)> = sig.vars.iter().enumerate().filter(|(_, v)| v.section == VarSection::Input).collect();
        let named = args.iter().filter(|a| a.name.is_some()).count();
        if named != 0 && named != args.len() {
            self.err(ResolveErrorKind::WrongArity, span, format!("call to {} mixes named and positional arguments", sig.name));
            return None;
        }
        if args.len() > inputs.len() {
            self.err(ResolveErrorKind::WrongArity, span, format!("{} takes {} argument(s), found {}", sig.name, inputs.len(), args.len()));
            return None;
        }
        let mut bound = Vec::new();
        let mut seen = HashSet::new();
        let mut ok = true;
        for (i, a) in args.iter().enumerate() {
            if a.direction == ArgDirection::Out {
                self.err(ResolveErrorKind::Unsupported, a.span, "output arguments are not supported for functions");
                ok = false;
                continue;
            }
            let target = match &a.name {
                None => Some(inputs[i]),
                Some(n) => {
                    let found = inputs.iter().find(|(_, v)| v.name == n.name).copied();
                    if found.is_none() {
                        self.err(ResolveErrorKind::UnknownIdentifier, n.span, format!("{} has no input {}", sig.name, n.name));
                    }
                    found
                }
            };
            let Some((slot, v)) = target else {
                ok = false;
                continue;
            };
            if !seen.insert(slot) {
                self.err(ResolveErrorKind::WrongArity, a.span, format!("input {} given more than once", v.name));
                ok = false;
                continue;
            }
            match self.assign_value(&a.value, &v.ty) {
                Some(e) => bound.push((slot, e)),
                None => ok = false,
            }
        }
        if !ok {
            return None;
        }
        let ret = sig.return_slot.map(|s| sig.vars[s].ty.clone())?;
        Some(TExpr { kind: TExprKind::Call { function: sig.name.clone(), args: bound }, ty: ret, span })
    }

    /// Types a group of arguments to their common type, literals last.
    fn common_args(&mut self, args: &[&Expr], hint: Option<&Type>, span: Span) -> Option<(Vec<TExpr>, Type)> {
        let mut typed: Vec<Option<TExpr>> = vec![None; args.len()];
        let mut ok = true;
        for (i, a) in args.iter().enumerate() {
            if !is_poly(a) {
                typed[i] = self.expr(a, hint);
                ok &= typed[i].is_some();
            }
        }
        if !ok {
            return None;
        }
        let mut common: Option<Type> = None;
        for t in typed.iter().flatten() {
            common = match common {
                None => Some(t.ty.clone()),
                Some(c) => match Type::common(&c, &t.ty) {
                    Some(c) => Some(c),
                    None => return self.mismatch(span, format!("arguments of types {c} and {} do not combine", t.ty)),
                },
            };
        }
        let poly_hint = match &common {
            Some(c) => Some(c.clone()),
            None if args.iter().any(|a| poly_has_real(a)) => Some(match hint {
                Some(h) if h.is_real() => h.clone(),
                _ => Type::Lreal,
            }),
            None => hint.cloned(),
        };
        for (i, a) in args.iter().enumerate() {
            if typed[i].is_none() {
                let t = self.expr(a, poly_hint.as_ref())?;
                common = match common {
                    None => Some(t.ty.clone()),
                    Some(c) => match Type::common(&c, &t.ty) {
                        Some(c) => Some(c),
                        None => return self.mismatch(span, format!("arguments of types {c} and {} do not combine", t.ty)),
                    },
                };
                typed[i] = Some(t);
            }
        }
        let c = common?;
        Some((typed.into_iter().map(|t| widen(t.expect("typed"), &c)).collect(), c))
    }

    fn real_arg(&mut self, a: &Expr, hint: Option<&Type>) -> Option<TExpr> {
        let h = match hint {
            Some(h) if h.is_real() => h.clone(),
            _ => Type::Lreal,
        };
        let t = if is_poly(a) { self.expr(a, Some(&h))? } else { self.expr(a, hint)? };
        if !t.ty.is_real() {
            return self.mismatch(a.span, format!("expected REAL or LREAL, found {}", t.ty));
        }
        Some(t)
    }

    fn int_arg(&mut self, a: &Expr) -> Option<TExpr> {
        let t = self.expr(a, Some(&Type::Int))?;
        if !t.ty.is_integral() {
            return self.mismatch(a.span, format!("expected an integer, found {}", t.ty));
        }
        Some(t)
    }

    fn string_arg(&mut self, a: &Expr) -> Option<TExpr> {
        let t = self.expr(a, None)?;
        if !t.ty.is_string() {
            return self.mismatch(a.span, format!("expected STRING, found {}", t.ty));
        }
        Some(t)
    }

    fn builtin_call(&mut self, f: BuiltinFn, args: &[CallArg], hint: Option<&Type>, span: Span) -> Option<TExpr> {
        if let Some(a) = args.iter().find(|a| a.direction == ArgDirection::Out) {
            self.err(ResolveErrorKind::Unsupported, a.span, format!("output arguments are not supported for {}", f.name()));
            return None;
        }
        let (lo, hi) = f.arity();
        if args.len() < lo || args.len() > hi {
            let expected = if lo == hi {
                lo.to_string()
            } else if hi == usize::MAX {
                format!("at least {lo}")
            } else {
                format!("{lo} to {hi}")
            };
            self.err(ResolveErrorKind::WrongArity, span, format!("{} expects {expected} argument(s), found {}", f.name(), args.len()));
            return None;
        }
        let a: Vec<&Expr> = args.iter().map(|a| &a.value).collect();
        let string_ty = Type::String(MAX_STRING_CAPACITY);
        let (targs, ty) = match f {
            BuiltinFn::Abs => {
                let x = self.expr(a[0], hint)?;
                if !(x.ty.is_arithmetic()) {
                    return self.mismatch(span, format!("ABS does not apply to {}", x.ty));
                }
                let ty = x.ty.clone();
                (vec![x], ty)
            }
            BuiltinFn::Min | BuiltinFn::Max | BuiltinFn::Limit => {
                let (xs, c) = self.common_args(&a, hint, span)?;
                if !(c.is_arithmetic() || c.is_bit_string() || c == Type::Time || c.is_string()) {
                    return self.mismatch(span, format!("{} does not apply to {c}", f.name()));
                }
                (xs, c)
            }
            BuiltinFn::Sel => {
                let g = self.condition(a[0]);
                let (xs, c) = self.common_args(&a[1..], hint, span)?;
                let mut v = vec![g?];
                v.extend(xs);
                (v, c)
            }
            BuiltinFn::Sin
            | BuiltinFn::Cos
            | BuiltinFn::Tan
            | BuiltinFn::Asin
            | BuiltinFn::Acos
            | BuiltinFn::Atan
            | BuiltinFn::Exp
            | BuiltinFn::Ln
            | BuiltinFn::Log
            | BuiltinFn::Sqrt => {
                let x = self.real_arg(a[0], hint)?;
                let ty = x.ty.clone();
                (vec![x], ty)
            }
            BuiltinFn::Trunc => (vec![self.real_arg(a[0], None)?], Type::Dint),
            BuiltinFn::Expt => {
                let b = self.real_arg(a[0], hint);
                let e = self.expr(a[1], None);
                let (b, e) = (b?, e?);
                if !e.ty.is_arithmetic() {
                    return self.mismatch(a[1].span, format!("EXPT exponent must be numeric, found {}", e.ty));
                }
                let ty = b.ty.clone();
                (vec![b, e], ty)
            }
            BuiltinFn::Shl | BuiltinFn::Shr | BuiltinFn::Rol | BuiltinFn::Ror => {
                let x = self.expr(a[0], hint);
                let n = self.int_arg(a[1]);
                let (x, n) = (x?, n?);
                if !x.ty.is_integral() {
                    return self.mismatch(a[0].span, format!("{} needs a bit string, found {}", f.name(), x.ty));
                }
                let ty = x.ty.clone();
                (vec![x, n], ty)
            }
            BuiltinFn::Concat => {
                let xs: Vec<Option<TExpr>> = a.iter().map(|x| self.string_arg(x)).collect();
                (xs.into_iter().collect::<Option<Vec<_>>>()?, string_ty)
            }
            BuiltinFn::Len => (vec![self.string_arg(a[0])?], Type::Int),
            BuiltinFn::Mid => {
                let s = self.string_arg(a[0]);
                let l = self.int_arg(a[1]);
                let p = self.int_arg(a[2]);
                (vec![s?, l?, p?], string_ty)
            }
            BuiltinFn::Left | BuiltinFn::Right => {
                let s = self.string_arg(a[0]);
                let l = self.int_arg(a[1]);
                (vec![s?, l?], string_ty)
            }
            BuiltinFn::Find => {
                let x = self.string_arg(a[0]);
                let y = self.string_arg(a[1]);
                (vec![x?, y?], Type::Int)
            }
            BuiltinFn::Convert(from, to) => {
                let from_ty = from.to_type();
                let x = self.expr(a[0], Some(&from_ty))?;
                let x = self.coerce(x, &from_ty, a[0].span)?;
                (vec![x], to.to_type())
            }
            BuiltinFn::TPlcMs => (Vec::new(), Type::Time),
        };
        Some(TExpr { kind: TExprKind::Builtin(f, targs), ty, span })
    }
}
