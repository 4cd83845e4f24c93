//! Cyclic scan interpreter with a simulated clock.
//!
//! One scan writes the inputs, runs the POU body once and then advances the
//! clock by one cycle. Every statement and guard site reached during a scan
//! is appended to that scan's [`ExecTrace`].

mod exec;
pub mod ops;
mod stdfb;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::coverage::CoverageMap;
use crate::frontend::ast::{PouKind, StmtId, VarSection};
use crate::frontend::ir::{TypedPou, TypedProgram};
use crate::frontend::source::Span;
use crate::value::Value;

use exec::Exec;

/// Loop iterations allowed in one scan before the scan faults.
pub const MAX_LOOP_ITERATIONS: u64 = 1_000_000;
/// Nesting limit for FB and function calls.
pub const MAX_CALL_DEPTH: u32 = 64;

/// Simulated time. `now_ms` only changes between scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    now_ms: i64,
    cycle_time_ms: i64,
}

impl SimClock {
    /// Starts at 0 ms. Panics if `cycle_time_ms` is 0.
    pub fn new(cycle_time_ms: u32) -> SimClock {
        assert!(cycle_time_ms > 0, "cycle time must be at least 1 ms");
        SimClock { now_ms: 0, cycle_time_ms: cycle_time_ms as i64 }
    }

    pub fn now_ms(&self) -> i64 {
        self.now_ms
    }

    pub fn cycle_time_ms(&self) -> i64 {
        self.cycle_time_ms
    }

    pub fn advance(&mut self) {
        self.now_ms += self.cycle_time_ms;
    }
}

/// Storage for one declared variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    Value(Value),
    /// Elements in index order; nested for multi-dimensional arrays.
    Array(Vec<Slot>),
    Fb(Box<FbInstance>),
}

impl Slot {
    pub fn as_value(&self) -> Option<&Value> {
        match self {
            Slot::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_instance(&self) -> Option<&FbInstance> {
        match self {
            Slot::Fb(i) => Some(i),
            _ => None,
        }
    }
}

/// State of one function block or program instance. Slots parallel the
/// POU's variable table, so the store covers exactly the declared set.
#[derive(Debug, Clone, PartialEq)]
pub struct FbInstance {
    pou: Arc<TypedPou>,
    vars: Vec<Slot>,
}

impl FbInstance {
    pub fn pou(&self) -> &Arc<TypedPou> {
        &self.pou
    }

    pub fn type_name(&self) -> &str {
        &self.pou.name
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.pou.var(name).map(|(i, _)| &self.vars[i])
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.slot(name).and_then(Slot::as_value)
    }

    pub fn child(&self, name: &str) -> Option<&FbInstance> {
        self.slot(name).and_then(Slot::as_instance)
    }

    /// Follows a dotted path through nested instances, e.g. `T1.Q`.
    pub fn lookup(&self, path: &str) -> Option<&Slot> {
        let mut parts = path.split('.');
        let mut slot = self.slot(parts.next()?)?;
        for p in parts {
            slot = slot.as_instance()?.slot(p)?;
        }
        Some(slot)
    }

    pub fn variables(&self) -> impl Iterator<Item = (&str, &Slot)> {
        self.pou.vars.iter().map(|v| v.name.as_str()).zip(&self.vars)
    }

    /// Scalar VAR_OUTPUT values by name.
    pub fn outputs(&self) -> BTreeMap<String, Value> {
        self.pou
            .vars
            .iter()
            .zip(&self.vars)
            .filter(|(v, _)| v.section == VarSection::Output)
            .filter_map(|(v, s)| Some((v.name.clone(), s.as_value()?.clone())))
            .collect()
    }

    /// Writes a VAR_INPUT, widening along the promotion lattice.
    pub fn set_input(&mut self, name: &str, value: Value) -> Result<(), RuntimeError> {
        let Some((i, var)) = self.pou.var(name).filter(|(_, v)| v.section == VarSection::Input) else {
            return Err(RuntimeError::UnknownInput { fb: self.pou.name.clone(), name: name.to_string() });
        };
        let found = value.elementary().to_type();
        let ok = found.widens_to(&var.ty) || (found.is_string() && var.ty.is_string());
        if !ok {
            return Err(RuntimeError::InputType {
                fb: self.pou.name.clone(),
                name: var.name.clone(),
                expected: var.ty.to_string(),
                found: found.to_string(),
            });
        }
        self.vars[i] = Slot::Value(value.coerce(&var.ty));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub pou: Arc<str>,
    pub id: StmtId,
}

/// Statement and guard sites reached in one scan, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecTrace {
    pub entries: Vec<TraceEntry>,
}

impl ExecTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ids reached in `pou`, in order.
    pub fn ids_for(&self, pou: &str) -> Vec<StmtId> {
        self.entries.iter().filter(|e| &*e.pou == pou).map(|e| e.id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultKind {
    #[error("integer division by zero")]
    DivisionByZero,
    #[error("index {index} outside array bounds {lo}..{hi}")]
    IndexOutOfBounds { index: i64, lo: i64, hi: i64 },
    #[error("string bounds: {0}")]
    StringBounds(String),
    #[error("conversion overflow: {0}")]
    Conversion(String),
    #[error("more than {MAX_LOOP_ITERATIONS} loop iterations in one scan")]
    LoopBudget,
    #[error("call nesting deeper than {MAX_CALL_DEPTH}")]
    CallDepth,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} in {pou}{}{}", site(stmt, span), cycle.map(|c| format!(" (cycle {c})")).unwrap_or_default())]
pub struct RuntimeFault {
    pub kind: FaultKind,
    pub pou: String,
    /// `None` when raised while initializing variables.
    pub stmt: Option<StmtId>,
    pub span: Span,
    /// Scan index, set by [`run_program`].
    pub cycle: Option<u64>,
}

fn site(stmt: &Option<StmtId>, span: &Span) -> String {
    match stmt {
        Some(id) => format!(" at statement {} ({span})", id.0),
        None => " during initialization".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("unknown POU {0}")]
    UnknownPou(String),
    #[error("{name} is a {found}, expected a {expected}")]
    WrongPouKind { name: String, found: &'static str, expected: &'static str },
    #[error("{fb} has no input {name}")]
    UnknownInput { fb: String, name: String },
    #[error("input {name} of {fb} expects {expected}, got {found}")]
    InputType { fb: String, name: String, expected: String, found: String },
    #[error(transparent)]
    Fault(#[from] RuntimeFault),
}

fn find_pou(prog: &TypedProgram, name: &str, kind: PouKind) -> Result<Arc<TypedPou>, RuntimeError> {
    let pou = prog.pou(name).ok_or_else(|| RuntimeError::UnknownPou(name.to_string()))?;
    if pou.kind != kind {
        return Err(RuntimeError::WrongPouKind { name: pou.name.clone(), found: pou.kind.keyword(), expected: kind.keyword() });
    }
    Ok(pou.clone())
}

/// Fresh instance of function block `fb_name` with declared initial values
/// or type defaults; nested instances are created recursively.
pub fn instantiate(prog: &TypedProgram, fb_name: &str) -> Result<FbInstance, RuntimeError> {
    let pou = find_pou(prog, fb_name, PouKind::FunctionBlock)?;
    Ok(Exec::new(prog, 0).new_instance(&pou)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutput {
    pub outputs: BTreeMap<String, Value>,
    pub trace: ExecTrace,
}

/// One scan of `inst`: write `inputs`, run the body, snapshot the outputs,
/// then advance `clock`. The clock advances even when the scan faults.
pub fn execute_cycle(
    prog: &TypedProgram,
    inst: &mut FbInstance,
    inputs: &BTreeMap<String, Value>,
    clock: &mut SimClock,
) -> Result<CycleOutput, RuntimeError> {
    for (name, v) in inputs {
        inst.set_input(name, v.clone())?;
    }
    let mut ex = Exec::new(prog, clock.now_ms());
    let result = ex.call_top(inst);
    clock.advance();
    result?;
    Ok(CycleOutput { outputs: inst.outputs(), trace: ExecTrace { entries: ex.trace } })
}

/// One monitoring line: `cycle=<n> t=<ms> events=[<e1>;<e2>]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanRecord {
    /// 1-based scan index.
    pub cycle: u64,
    /// Simulated time at the start of the scan.
    pub t_ms: i64,
    pub events: Vec<String>,
}

impl fmt::Display for ScanRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycle={} t={} events=[{}]", self.cycle, self.t_ms, self.events.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed monitor record: {0:?}")]
pub struct RecordParseError(pub String);

impl FromStr for ScanRecord {
    type Err = RecordParseError;

    fn from_str(line: &str) -> Result<ScanRecord, RecordParseError> {
        let bad = || RecordParseError(line.to_string());
        let rest = line.strip_prefix("cycle=").ok_or_else(bad)?;
        let (cycle, rest) = rest.split_once(" t=").ok_or_else(bad)?;
        let (t, rest) = rest.split_once(" events=[").ok_or_else(bad)?;
        let events = rest.strip_suffix(']').ok_or_else(bad)?;
        Ok(ScanRecord {
            cycle: cycle.parse().map_err(|_| bad())?,
            t_ms: t.parse().map_err(|_| bad())?,
            events: events.split(';').filter(|e| !e.is_empty()).map(str::to_string).collect(),
        })
    }
}

/// Receives one record per scan; `Break` stops the run after that scan.
pub trait Monitor {
    fn on_scan(&mut self, record: &ScanRecord, trace: &ExecTrace, program: &FbInstance) -> ControlFlow<()>;
}

impl<F> Monitor for F
where
    F: FnMut(&ScanRecord, &ExecTrace, &FbInstance) -> ControlFlow<()>,
{
    fn on_scan(&mut self, record: &ScanRecord, trace: &ExecTrace, program: &FbInstance) -> ControlFlow<()> {
        self(record, trace, program)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// A fault in a top-level FB call disables that instance for the rest
    /// of the run instead of aborting it.
    pub isolate_faults: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolatedFault {
    pub instance: String,
    pub fault: RuntimeFault,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramRun {
    pub program: FbInstance,
    pub cycles: u64,
    pub isolated: Vec<IsolatedFault>,
    /// All scans' traces merged.
    pub coverage: CoverageMap,
}

/// Event text published by program variables named `*_EVT`.
pub const EVENT_SUFFIX: &str = "_EVT";

/// Runs PROGRAM `program_name` for up to `cycles` scans.
///
/// After each scan the monitor receives the scan's events: the `;`-separated
/// contents of every STRING program variable ending in `_EVT`, in declaration
/// order, then `FAULT/<instance>` for instances isolated during that scan.
pub fn run_program(
    prog: &TypedProgram,
    program_name: &str,
    cycles: u64,
    clock: &mut SimClock,
    options: RunOptions,
    monitor: &mut dyn Monitor,
) -> Result<ProgramRun, RuntimeError> {
    let pou = find_pou(prog, program_name, PouKind::Program)?;
    let mut ex = Exec::new(prog, clock.now_ms());
    let mut program = ex.new_instance(&pou)?;
    let mut coverage = CoverageMap::for_program(prog);
    let mut quarantined = BTreeSet::new();
    let mut isolated = Vec::new();
    let event_slots: Vec<usize> =
        pou.vars.iter().enumerate().filter(|(_, v)| v.name.ends_with(EVENT_SUFFIX) && v.ty.is_string()).map(|(i, _)| i).collect();
    let mut executed = 0;
    for cycle in 1..=cycles {
        let t_ms = clock.now_ms();
        ex.begin_scan(t_ms);
        let scan = ex.program_scan(&mut program, &mut quarantined, options.isolate_faults);
        clock.advance();
        executed = cycle;
        let new_faults = scan.map_err(|mut f| {
            f.cycle = Some(cycle);
            RuntimeError::Fault(f)
        })?;
        let mut events: Vec<String> = event_slots
            .iter()
            .filter_map(|&i| program.vars[i].as_value().and_then(Value::as_str))
            .flat_map(|s| s.split(';'))
            .filter(|e| !e.is_empty())
            .map(str::to_string)
            .collect();
        for (root, mut fault) in new_faults {
            fault.cycle = Some(cycle);
            let instance = pou.vars[root].name.clone();
            events.push(format!("FAULT/{instance}"));
            isolated.push(IsolatedFault { instance, fault });
        }
        let trace = ExecTrace { entries: std::mem::take(&mut ex.trace) };
        coverage.accumulate(&trace).expect("trace sites belong to the program");
        let record = ScanRecord { cycle, t_ms, events };
        if monitor.on_scan(&record, &trace, &program).is_break() {
            break;
        }
    }
    Ok(ProgramRun { program, cycles: executed, isolated, coverage })
}
