//! Brute-force re-simulation of boolean-input corpus blocks by walking the
//! parsed tree directly. Shares nothing with the interpreter beyond the
//! parser: values, timers, edge detectors and site counting live here.

use std::collections::BTreeMap;

use plctest_core::corpus::CorpusEntry;
use plctest_core::coverage::CoverageMap;
use plctest_core::frontend::ast::{
    statement_sites, ArgDirection, BinaryOp, CallArg, Expr, ExprKind, Initializer, Literal, PouDecl, Stmt, StmtKind, TypeRef, UnaryOp,
    VarSection,
};
use plctest_core::frontend::lexer::tokenize;
use plctest_core::frontend::parser::parse;
use plctest_core::frontend::source::SourceUnit;
use plctest_core::runtime::{execute_cycle, instantiate, SimClock};
use plctest_core::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V {
    B(bool),
    I(i64),
    /// Milliseconds.
    T(i64),
}

impl V {
    fn b(self) -> bool {
        match self {
            V::B(b) => b,
            other => panic!("expected BOOL, got {other:?}"),
        }
    }

    fn n(self) -> i64 {
        match self {
            V::I(n) | V::T(n) => n,
            other => panic!("expected a number, got {other:?}"),
        }
    }

    fn from_value(v: &Value) -> V {
        match v {
            Value::Bool(b) => V::B(*b),
            Value::Time(t) => V::T(*t),
            other => V::I(other.as_i64().unwrap_or_else(|| panic!("unsupported value {other:?}"))),
        }
    }
}

/// Standard blocks the walker knows, written from their textbook
/// definitions.
#[derive(Debug, Clone)]
enum Std {
    /// Start time while IN stays high.
    Ton {
        inp: bool,
        pt: i64,
        q: bool,
        et: i64,
        start: Option<i64>,
    },
    RTrig {
        clk: bool,
        q: bool,
        mem: bool,
    },
}

impl Std {
    fn new(ty: &str) -> Option<Std> {
        match ty {
            "TON" => Some(Std::Ton { inp: false, pt: 0, q: false, et: 0, start: None }),
            "R_TRIG" => Some(Std::RTrig { clk: false, q: false, mem: false }),
            _ => None,
        }
    }

    fn set(&mut self, name: &str, v: V) {
        match (self, name) {
            (Std::Ton { inp, .. }, "IN") => *inp = v.b(),
            (Std::Ton { pt, .. }, "PT") => *pt = v.n(),
            (Std::RTrig { clk, .. }, "CLK") => *clk = v.b(),
            (s, n) => panic!("{s:?} has no input {n}"),
        }
    }

    fn get(&self, name: &str) -> V {
        match (self, name) {
            (Std::Ton { inp, .. }, "IN") => V::B(*inp),
            (Std::Ton { pt, .. }, "PT") => V::T(*pt),
            (Std::Ton { q, .. }, "Q") => V::B(*q),
            (Std::Ton { et, .. }, "ET") => V::T(*et),
            (Std::RTrig { clk, .. }, "CLK") => V::B(*clk),
            (Std::RTrig { q, .. }, "Q") => V::B(*q),
            (s, n) => panic!("{s:?} has no member {n}"),
        }
    }

    fn run(&mut self, now: i64) {
        match self {
            Std::Ton { inp, pt, q, et, start } => {
                if *inp {
                    let s = *start.get_or_insert(now);
                    *et = (now - s).min(*pt);
                    *q = *et >= *pt;
                } else {
                    *start = None;
                    *et = 0;
                    *q = false;
                }
            }
            Std::RTrig { clk, q, mem } => {
                *q = *clk && !*mem;
                *mem = *clk;
            }
        }
    }
}

enum Flow {
    Next,
    Return,
}

pub struct Walker {
    pou: PouDecl,
    vars: BTreeMap<String, V>,
    blocks: BTreeMap<String, Std>,
    hits: BTreeMap<u32, u64>,
    now: i64,
}

fn default_for(ty: &TypeRef) -> V {
    match ty {
        TypeRef::Named(id) => match id.name.as_str() {
            "BOOL" => V::B(false),
            "TIME" => V::T(0),
            "INT" | "DINT" => V::I(0),
            other => panic!("walker does not model {other}"),
        },
        other => panic!("walker does not model {other:?}"),
    }
}

impl Walker {
    pub fn new(source: &str, name: &str) -> Walker {
        let unit = parse(&tokenize(&SourceUnit::new("oracle", source)).unwrap()).unwrap();
        let pou = unit.pous.into_iter().find(|p| p.name.name == name).expect("block in source");
        let mut w = Walker {
            hits: statement_sites(&pou.body).iter().map(|s| (s.id.0, 0)).collect(),
            vars: BTreeMap::new(),
            blocks: BTreeMap::new(),
            now: 0,
            pou: pou.clone(),
        };
        for block in &pou.var_blocks {
            for d in &block.decls {
                for n in &d.names {
                    let ty_name = match &d.ty {
                        TypeRef::Named(id) => id.name.as_str(),
                        _ => "",
                    };
                    if let Some(fb) = Std::new(ty_name) {
                        w.blocks.insert(n.name.clone(), fb);
                        continue;
                    }
                    let v = match &d.init {
                        Some(Initializer::Expr(e)) => w.eval(e),
                        Some(other) => panic!("walker does not model {other:?}"),
                        None => default_for(&d.ty),
                    };
                    w.vars.insert(n.name.clone(), v);
                }
            }
        }
        w
    }

    pub fn outputs(&self) -> BTreeMap<String, V> {
        self.pou
            .var_blocks
            .iter()
            .filter(|b| b.section == VarSection::Output)
            .flat_map(|b| &b.decls)
            .flat_map(|d| &d.names)
            .map(|n| (n.name.clone(), self.vars[&n.name]))
            .collect()
    }

    pub fn hits(&self) -> &BTreeMap<u32, u64> {
        &self.hits
    }

    pub fn scan(&mut self, inputs: &BTreeMap<String, V>, now: i64) {
        self.now = now;
        self.vars.extend(inputs.iter().map(|(k, v)| (k.clone(), *v)));
        let body = self.pou.body.clone();
        self.block(&body);
    }

    fn hit(&mut self, id: u32) {
        *self.hits.get_mut(&id).expect("known site") += 1;
    }

    fn block(&mut self, body: &[Stmt]) -> Flow {
        for s in body {
            if let Flow::Return = self.stmt(s) {
                return Flow::Return;
            }
        }
        Flow::Next
    }

    fn stmt(&mut self, s: &Stmt) -> Flow {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                self.hit(s.id.0);
                let v = self.eval(value);
                let ExprKind::Var(id) = &target.kind else { panic!("walker assigns plain variables only") };
                self.vars.insert(id.name.clone(), v);
                Flow::Next
            }
            StmtKind::Call { callee, args } => {
                self.hit(s.id.0);
                let ExprKind::Var(id) = &callee.kind else { panic!("walker calls instances only") };
                self.call(&id.name, args);
                Flow::Next
            }
            StmtKind::If { branches, else_body } => {
                for b in branches {
                    self.hit(b.guard_id.0);
                    if self.eval(&b.cond).b() {
                        return self.block(&b.body);
                    }
                }
                match else_body {
                    Some(body) => self.block(body),
                    None => Flow::Next,
                }
            }
            StmtKind::Case { selector, arms, else_body } => {
                self.hit(s.id.0);
                let k = self.eval(selector).n();
                for arm in arms {
                    if arm.labels.iter().any(|l| l.lo <= k && k <= l.hi) {
                        return self.block(&arm.body);
                    }
                }
                match else_body {
                    Some(body) => self.block(body),
                    None => Flow::Next,
                }
            }
            StmtKind::Return => {
                self.hit(s.id.0);
                Flow::Return
            }
            other => panic!("walker does not model {other:?}"),
        }
    }

    fn call(&mut self, instance: &str, args: &[CallArg]) {
        let values: Vec<(String, ArgDirection, Option<V>)> = args
            .iter()
            .map(|a| {
                let name = a.name.as_ref().expect("named arguments").name.clone();
                let v = (a.direction == ArgDirection::In).then(|| self.eval(&a.value));
                (name, a.direction, v)
            })
            .collect();
        let now = self.now;
        let fb = self.blocks.get_mut(instance).expect("declared instance");
        for (name, _, v) in &values {
            if let Some(v) = v {
                fb.set(name, *v);
            }
        }
        fb.run(now);
        let outs: Vec<(String, V)> = args
            .iter()
            .zip(&values)
            .filter(|(_, (_, d, _))| *d == ArgDirection::Out)
            .map(|(a, (name, _, _))| {
                let ExprKind::Var(target) = &a.value.kind else { panic!("output to plain variable") };
                (target.name.clone(), fb.get(name))
            })
            .collect();
        self.vars.extend(outs);
    }

    fn eval(&self, e: &Expr) -> V {
        match &e.kind {
            ExprKind::Literal(Literal::Bool(b)) => V::B(*b),
            ExprKind::Literal(Literal::Int { value, .. }) => V::I(*value),
            ExprKind::Literal(Literal::Time(ms)) => V::T(*ms),
            ExprKind::Var(id) => *self.vars.get(&id.name).unwrap_or_else(|| panic!("unknown {}", id.name)),
            ExprKind::Member(base, field) => {
                let ExprKind::Var(id) = &base.kind else { panic!("nested member access") };
                self.blocks[&id.name].get(&field.name)
            }
            ExprKind::Unary(UnaryOp::Not, a) => V::B(!self.eval(a).b()),
            ExprKind::Unary(UnaryOp::Neg, a) => V::I(-self.eval(a).n()),
            ExprKind::Binary(op, a, b) => {
                let (x, y) = (self.eval(a), self.eval(b));
                match op {
                    BinaryOp::And => V::B(x.b() && y.b()),
                    BinaryOp::Or => V::B(x.b() || y.b()),
                    BinaryOp::Xor => V::B(x.b() != y.b()),
                    BinaryOp::Eq => V::B(x == y),
                    BinaryOp::Ne => V::B(x != y),
                    BinaryOp::Lt => V::B(x.n() < y.n()),
                    BinaryOp::Le => V::B(x.n() <= y.n()),
                    BinaryOp::Gt => V::B(x.n() > y.n()),
                    BinaryOp::Ge => V::B(x.n() >= y.n()),
                    BinaryOp::Add => V::I(x.n() + y.n()),
                    BinaryOp::Sub => V::I(x.n() - y.n()),
                    BinaryOp::Mul => V::I(x.n() * y.n()),
                    other => panic!("walker does not model {other:?}"),
                }
            }
            other => panic!("walker does not model {other:?}"),
        }
    }
}

/// Blocks whose inputs are all BOOL and few enough to enumerate.
pub const TARGETS: [&str; 5] = ["VOTE_2OO3", "COUNTER", "TRAFFIC_CTRL", "START_DELAY", "BLINK"];

pub const MAX_CONFIGS: usize = 12;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub configs: usize,
    pub sequences: usize,
    pub scans: usize,
}

/// Every ordered pair of input configurations, each held `hold` scans, and
/// every triple held one scan. Outputs are compared after every scan and
/// site counts at the end of every sequence.
pub fn check_exhaustively(entry: &CorpusEntry, cycle_ms: u32, hold: usize) -> Result<Tally, String> {
    let (prog, _) = entry.compile().map_err(|e| e.render())?;
    let pou = prog.pou(entry.name).ok_or("block missing")?;
    let names: Vec<String> = pou.inputs().map(|v| v.name.clone()).collect();
    let configs: Vec<BTreeMap<String, bool>> =
        (0..1usize << names.len()).map(|bits| names.iter().enumerate().map(|(i, n)| (n.clone(), bits >> i & 1 == 1)).collect()).collect();
    if configs.len() > MAX_CONFIGS {
        return Err(format!("{} has {} configurations", entry.name, configs.len()));
    }
    let mut sequences: Vec<Vec<usize>> = Vec::new();
    for a in 0..configs.len() {
        for b in 0..configs.len() {
            sequences.push([vec![a; hold], vec![b; hold]].concat());
            for c in 0..configs.len() {
                sequences.push(vec![a, b, c]);
            }
        }
    }
    let mut tally = Tally { configs: configs.len(), ..Tally::default() };
    for seq in &sequences {
        let mut walker = Walker::new(entry.source, entry.name);
        let mut inst = instantiate(&prog, entry.name).map_err(|e| e.to_string())?;
        let mut clock = SimClock::new(cycle_ms);
        let mut coverage = CoverageMap::new();
        coverage.add_pou(pou);
        for (k, &c) in seq.iter().enumerate() {
            let now = clock.now_ms();
            let ins: BTreeMap<String, Value> = configs[c].iter().map(|(n, b)| (n.clone(), Value::Bool(*b))).collect();
            let out = execute_cycle(&prog, &mut inst, &ins, &mut clock).map_err(|e| e.to_string())?;
            coverage.accumulate(&out.trace).map_err(|e| e.to_string())?;
            walker.scan(&ins.iter().map(|(n, v)| (n.clone(), V::from_value(v))).collect(), now);
            let got: BTreeMap<String, V> = out.outputs.iter().map(|(n, v)| (n.clone(), V::from_value(v))).collect();
            if got != walker.outputs() {
                return Err(format!("{} {seq:?} scan {k}: interpreter {got:?}, walker {:?}", entry.name, walker.outputs()));
            }
            tally.scans += 1;
        }
        let counts: BTreeMap<u32, u64> = coverage.pou(&pou.name).ok_or("no coverage")?.iter().map(|(id, n)| (id.0, *n)).collect();
        if &counts != walker.hits() {
            return Err(format!("{} {seq:?}: interpreter sites {counts:?}, walker {:?}", entry.name, walker.hits()));
        }
        tally.sequences += 1;
    }
    Ok(tally)
}
