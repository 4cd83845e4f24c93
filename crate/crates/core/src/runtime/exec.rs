//! Tree-walking evaluation of the typed IR.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::ops::{binary, call_builtin, unary};
use super::{stdfb, FaultKind, FbInstance, RuntimeFault, Slot, TraceEntry, MAX_CALL_DEPTH, MAX_LOOP_ITERATIONS};
use crate::frontend::ast::{BinaryOp, StmtId};
use crate::frontend::ir::*;
use crate::frontend::source::Span;
use crate::frontend::types::Type;
use crate::value::Value;

/// A fault before or after it has been attributed to a statement.
#[derive(Debug)]
pub(crate) enum Fault {
    Raw(FaultKind),
    Located(RuntimeFault),
}

impl From<FaultKind> for Fault {
    fn from(k: FaultKind) -> Fault {
        Fault::Raw(k)
    }
}

impl Fault {
    fn locate(self, pou: &str, stmt: Option<StmtId>, span: Span) -> RuntimeFault {
        match self {
            Fault::Located(f) => f,
            Fault::Raw(kind) => RuntimeFault { kind, pou: pou.to_string(), stmt, span, cycle: None },
        }
    }
}

impl From<Fault> for RuntimeFault {
    fn from(f: Fault) -> RuntimeFault {
        f.locate("<unknown>", None, Span::default())
    }
}

impl From<Fault> for super::RuntimeError {
    fn from(f: Fault) -> super::RuntimeError {
        super::RuntimeError::Fault(f.into())
    }
}

enum Flow {
    Normal,
    Exit,
    Return,
}

struct Frame<'a> {
    pou: &'a TypedPou,
    name: Arc<str>,
    vars: &'a mut [Slot],
}

pub(crate) struct Exec<'p> {
    prog: &'p TypedProgram,
    names: Vec<Arc<str>>,
    now: i64,
    pub(crate) trace: Vec<super::TraceEntry>,
    iterations: u64,
    depth: u32,
}

fn slot_ref<'s>(vars: &'s [Slot], root: usize, keys: &[usize]) -> &'s Slot {
    let mut s = &vars[root];
    for &k in keys {
        s = match s {
            Slot::Array(items) => &items[k],
            Slot::Fb(inst) => &inst.vars[k],
            Slot::Value(_) => unreachable!("path into a scalar"),
        };
    }
    s
}

fn slot_mut<'s>(vars: &'s mut [Slot], root: usize, keys: &[usize]) -> &'s mut Slot {
    let mut s = &mut vars[root];
    for &k in keys {
        s = match s {
            Slot::Array(items) => &mut items[k],
            Slot::Fb(inst) => &mut inst.vars[k],
            Slot::Value(_) => unreachable!("path into a scalar"),
        };
    }
    s
}

fn scalar(s: &Slot) -> Value {
    s.as_value().cloned().expect("scalar slot")
}

impl<'p> Exec<'p> {
    pub(crate) fn new(prog: &'p TypedProgram, now: i64) -> Exec<'p> {
        Exec {
            prog,
            names: prog.pous.iter().map(|p| Arc::from(p.name.as_str())).collect(),
            now,
            trace: Vec::new(),
            iterations: 0,
            depth: 0,
        }
    }

    pub(crate) fn begin_scan(&mut self, now: i64) {
        self.now = now;
        self.iterations = 0;
        self.trace.clear();
    }

    fn name_of(&self, pou: &TypedPou) -> Arc<str> {
        match self.prog.index.get(&pou.name) {
            Some(&i) => self.names[i].clone(),
            None => Arc::from(pou.name.as_str()),
        }
    }

    fn hit(&mut self, f: &Frame, id: StmtId) {
        self.trace.push(TraceEntry { pou: f.name.clone(), id });
    }

    fn tick(&mut self) -> Result<(), Fault> {
        self.iterations += 1;
        if self.iterations > MAX_LOOP_ITERATIONS {
            return Err(FaultKind::LoopBudget.into());
        }
        Ok(())
    }

    // ---- instances ----

    pub(crate) fn new_instance(&mut self, pou: &Arc<TypedPou>) -> Result<FbInstance, RuntimeFault> {
        let mut vars = Vec::with_capacity(pou.vars.len());
        for v in &pou.vars {
            let slot = self.init_slot(pou, &v.ty, v.init.as_ref()).map_err(|f| f.locate(&pou.name, None, v.span))?;
            vars.push(slot);
        }
        Ok(FbInstance { pou: pou.clone(), vars })
    }

    fn init_slot(&mut self, owner: &TypedPou, ty: &Type, init: Option<&VarInit>) -> Result<Slot, Fault> {
        match (ty, init) {
            (Type::Fb(_), _) => self.init_slot_fb(ty),
            (Type::Array(_), init) => {
                let mut values = Vec::new();
                if let Some(VarInit::Elements(es)) = init {
                    for e in es {
                        values.push(self.eval_const(owner, e)?);
                    }
                }
                let mut it = values.into_iter();
                self.build_array(ty, &mut it)
            }
            (_, Some(VarInit::Scalar(e))) => Ok(Slot::Value(self.eval_const(owner, e)?.coerce(ty))),
            _ => Ok(Slot::Value(Value::default_for(ty).expect("scalar type"))),
        }
    }

    fn build_array(&mut self, ty: &Type, it: &mut impl Iterator<Item = Value>) -> Result<Slot, Fault> {
        match ty {
            Type::Array(a) => {
                let mut items = Vec::with_capacity(a.len());
                for _ in 0..a.len() {
                    items.push(self.build_array(&a.elem, it)?);
                }
                Ok(Slot::Array(items))
            }
            Type::Fb(_) => self.init_slot_fb(ty),
            _ => Ok(Slot::Value(match it.next() {
                Some(v) => v.coerce(ty),
                None => Value::default_for(ty).expect("scalar type"),
            })),
        }
    }

    fn init_slot_fb(&mut self, ty: &Type) -> Result<Slot, Fault> {
        let Type::Fb(name) = ty else { unreachable!() };
        let pou = self.prog.pou(name).expect("resolved FB type").clone();
        Ok(Slot::Fb(Box::new(self.new_instance(&pou).map_err(Fault::Located)?)))
    }

    fn eval_const(&mut self, owner: &TypedPou, e: &TExpr) -> Result<Value, Fault> {
        let frame = Frame { pou: owner, name: self.name_of(owner), vars: &mut [] };
        self.eval(&frame, e)
    }

    /// Runs one call of `inst` as the outermost POU of a scan.
    pub(crate) fn call_top(&mut self, inst: &mut FbInstance) -> Result<(), RuntimeFault> {
        let name = inst.pou.name.clone();
        self.call_instance(inst).map_err(|f| f.locate(&name, None, Span::default()))
    }

    fn call_instance(&mut self, inst: &mut FbInstance) -> Result<(), Fault> {
        let FbInstance { pou, vars } = inst;
        if let Some(b) = pou.builtin {
            stdfb::step(b, vars, self.now);
            return Ok(());
        }
        if self.depth >= MAX_CALL_DEPTH {
            return Err(FaultKind::CallDepth.into());
        }
        self.depth += 1;
        let mut frame = Frame { pou, name: self.name_of(pou), vars };
        let r = self.exec_body(&mut frame, &pou.body);
        self.depth -= 1;
        r.map(|_| ()).map_err(Fault::Located)
    }

    /// One scan of a program body. With `isolate`, a fault in a top-level
    /// FB call quarantines that instance and the scan continues.
    pub(crate) fn program_scan(
        &mut self,
        inst: &mut FbInstance,
        quarantined: &mut BTreeSet<usize>,
        isolate: bool,
    ) -> Result<Vec<(usize, RuntimeFault)>, RuntimeFault> {
        let FbInstance { pou, vars } = inst;
        let mut frame = Frame { pou, name: self.name_of(pou), vars };
        let mut isolated = Vec::new();
        for s in &pou.body {
            let root = match &s.kind {
                TStmtKind::CallFb { instance, .. } if isolate && instance.path.is_empty() => Some(instance.root),
                _ => None,
            };
            if let Some(root) = root {
                if quarantined.contains(&root) {
                    continue;
                }
                let depth = self.depth;
                match self.exec_stmt(&mut frame, s) {
                    Ok(_) => {}
                    Err(f) => {
                        self.depth = depth;
                        quarantined.insert(root);
                        isolated.push((root, f));
                    }
                }
                continue;
            }
            match self.exec_stmt(&mut frame, s)? {
                Flow::Normal => {}
                Flow::Exit | Flow::Return => break,
            }
        }
        Ok(isolated)
    }

    // ---- statements ----

    fn exec_body(&mut self, f: &mut Frame, body: &[TStmt]) -> Result<Flow, RuntimeFault> {
        for s in body {
            match self.exec_stmt(f, s)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, f: &mut Frame, s: &TStmt) -> Result<Flow, RuntimeFault> {
        let name = f.name.clone();
        self.exec_inner(f, s).map_err(|e| e.locate(&name, Some(s.id), s.span))
    }

    fn nested(&mut self, f: &mut Frame, body: &[TStmt]) -> Result<Flow, Fault> {
        self.exec_body(f, body).map_err(Fault::Located)
    }

    fn exec_inner(&mut self, f: &mut Frame, s: &TStmt) -> Result<Flow, Fault> {
        match &s.kind {
            TStmtKind::Assign { target, value } => {
                self.hit(f, s.id);
                let v = self.eval(f, value)?;
                self.write(f, target, v)?;
            }
            TStmtKind::Eval(e) => {
                self.hit(f, s.id);
                self.eval(f, e)?;
            }
            TStmtKind::CallFb { instance, inputs, in_outs, outputs, .. } => {
                self.hit(f, s.id);
                self.call_fb(f, instance, inputs, in_outs, outputs)?;
            }
            TStmtKind::If { branches, else_body } => {
                for b in branches {
                    self.hit(f, b.guard_id);
                    let name = f.name.clone();
                    let c = self.eval(f, &b.cond).map_err(|e| Fault::Located(e.locate(&name, Some(b.guard_id), b.span)))?;
                    if c.as_bool() == Some(true) {
                        return self.nested(f, &b.body);
                    }
                }
                if let Some(e) = else_body {
                    return self.nested(f, e);
                }
            }
            TStmtKind::Case { selector, arms, else_body } => {
                self.hit(f, s.id);
                let sel = self.eval(f, selector)?.as_i64().expect("integral selector");
                let arm = arms.iter().find(|a| a.labels.iter().any(|l| l.lo <= sel && sel <= l.hi));
                match (arm, else_body) {
                    (Some(a), _) => return self.nested(f, &a.body),
                    (None, Some(e)) => return self.nested(f, e),
                    (None, None) => {}
                }
            }
            TStmtKind::For(l) => {
                let TFor { var, from, to, by, body } = &**l;
                let start = self.eval(f, from)?;
                self.write(f, var, start)?;
                let end = self.eval(f, to)?.as_i64().expect("integral bound");
                let step = self.eval(f, by)?;
                let up = step.as_i64().expect("integral step") >= 0;
                loop {
                    self.hit(f, s.id);
                    let cur = self.read(f, var)?;
                    let i = cur.as_i64().expect("integral counter");
                    if (up && i > end) || (!up && i < end) {
                        break;
                    }
                    self.tick()?;
                    match self.nested(f, body)? {
                        Flow::Normal => {}
                        Flow::Exit => break,
                        Flow::Return => return Ok(Flow::Return),
                    }
                    let cur = self.read(f, var)?;
                    let next = binary(BinaryOp::Add, cur, step.clone())?;
                    self.write(f, var, next)?;
                }
            }
            TStmtKind::While { cond, body } => loop {
                self.hit(f, s.id);
                if self.eval(f, cond)?.as_bool() != Some(true) {
                    break;
                }
                self.tick()?;
                match self.nested(f, body)? {
                    Flow::Normal => {}
                    Flow::Exit => break,
                    Flow::Return => return Ok(Flow::Return),
                }
            },
            TStmtKind::Repeat { body, until } => loop {
                self.tick()?;
                match self.nested(f, body)? {
                    Flow::Normal => {}
                    Flow::Exit => break,
                    Flow::Return => return Ok(Flow::Return),
                }
                self.hit(f, s.id);
                if self.eval(f, until)?.as_bool() == Some(true) {
                    break;
                }
            },
            TStmtKind::Exit => {
                self.hit(f, s.id);
                return Ok(Flow::Exit);
            }
            TStmtKind::Return => {
                self.hit(f, s.id);
                return Ok(Flow::Return);
            }
        }
        Ok(Flow::Normal)
    }

    /// Inputs and in-outs are copied in, the instance runs, then in-outs and
    /// `=>` outputs are copied back to the caller.
    fn call_fb(
        &mut self,
        f: &mut Frame,
        instance: &Place,
        inputs: &[(usize, TExpr)],
        in_outs: &[(usize, Place)],
        outputs: &[(usize, Place)],
    ) -> Result<(), Fault> {
        let mut in_vals = Vec::with_capacity(inputs.len());
        for (i, e) in inputs {
            in_vals.push((*i, self.eval(f, e)?));
        }
        let mut io_vals = Vec::with_capacity(in_outs.len());
        for (i, p) in in_outs {
            let keys = self.keys(f, p)?;
            io_vals.push((*i, slot_ref(f.vars, p.root, &keys).clone()));
        }
        let keys = self.keys(f, instance)?;
        let Slot::Fb(inst) = slot_mut(f.vars, instance.root, &keys) else { unreachable!("FB call on a non-instance") };
        for (i, v) in in_vals {
            let ty = &inst.pou.vars[i].ty;
            inst.vars[i] = Slot::Value(v.coerce(ty));
        }
        for (i, s) in io_vals {
            inst.vars[i] = s;
        }
        self.call_instance(inst)?;
        let io_back: Vec<Slot> = in_outs.iter().map(|(i, _)| inst.vars[*i].clone()).collect();
        let out_vals: Vec<Value> = outputs.iter().map(|(i, _)| scalar(&inst.vars[*i])).collect();
        for ((_, p), s) in in_outs.iter().zip(io_back) {
            let keys = self.keys(f, p)?;
            *slot_mut(f.vars, p.root, &keys) = s;
        }
        for ((_, p), v) in outputs.iter().zip(out_vals) {
            self.write(f, p, v)?;
        }
        Ok(())
    }

    // ---- places ----

    fn keys(&mut self, f: &Frame, p: &Place) -> Result<Vec<usize>, Fault> {
        if p.path.is_empty() {
            return Ok(Vec::new());
        }
        let mut keys = Vec::with_capacity(p.path.len());
        let mut ty: Type = f.pou.vars[p.root].ty.clone();
        for step in &p.path {
            match step {
                Step::Index(e) => {
                    let Type::Array(a) = ty else { unreachable!("index into non-array") };
                    let i = self.eval(f, e)?.as_i64().expect("integral index");
                    if i < a.lo || i > a.hi {
                        return Err(FaultKind::IndexOutOfBounds { index: i, lo: a.lo, hi: a.hi }.into());
                    }
                    keys.push((i - a.lo) as usize);
                    ty = a.elem.clone();
                }
                Step::Member(m) => {
                    let Type::Fb(name) = &ty else { unreachable!("member of non-instance") };
                    let pou = self.prog.pou(name).expect("resolved FB type");
                    keys.push(*m);
                    ty = pou.vars[*m].ty.clone();
                }
            }
        }
        Ok(keys)
    }

    fn read(&mut self, f: &Frame, p: &Place) -> Result<Value, Fault> {
        if p.path.is_empty() {
            return Ok(scalar(&f.vars[p.root]));
        }
        let keys = self.keys(f, p)?;
        Ok(scalar(slot_ref(f.vars, p.root, &keys)))
    }

    fn write(&mut self, f: &mut Frame, p: &Place, v: Value) -> Result<(), Fault> {
        let keys = self.keys(f, p)?;
        *slot_mut(f.vars, p.root, &keys) = Slot::Value(v.coerce(&p.ty));
        Ok(())
    }

    // ---- expressions ----

    fn eval(&mut self, f: &Frame, e: &TExpr) -> Result<Value, Fault> {
        Ok(match &e.kind {
            TExprKind::Const(v) => v.clone(),
            TExprKind::Load(p) => self.read(f, p)?,
            TExprKind::Widen(x) => self.eval(f, x)?.coerce(&e.ty),
            TExprKind::Unary(op, x) => unary(*op, self.eval(f, x)?),
            TExprKind::Binary(op, l, r) => {
                // AND/OR evaluate both operands, as IEC does not short-circuit
                let l = self.eval(f, l)?;
                let r = self.eval(f, r)?;
                binary(*op, l, r)?
            }
            TExprKind::Builtin(func, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(f, a)?);
                }
                call_builtin(*func, vals, &e.ty, self.now)?
            }
            TExprKind::Call { function, args } => {
                let pou = self.prog.pou(function).expect("resolved function").clone();
                let mut vals = Vec::with_capacity(args.len());
                for (i, a) in args {
                    vals.push((*i, self.eval(f, a)?));
                }
                let mut inst = self.new_instance(&pou).map_err(Fault::Located)?;
                for (i, v) in vals {
                    inst.vars[i] = Slot::Value(v.coerce(&pou.vars[i].ty));
                }
                self.call_instance(&mut inst)?;
                scalar(&inst.vars[pou.return_slot.expect("function result slot")])
            }
        })
    }
}
