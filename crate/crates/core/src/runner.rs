//! Runs a checked suite end to end: harness generation, assembly, scan
//! execution with fault isolation, verdicts and coverage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::coverage::{self, CoverageError, CoverageMap, CoverageSummary, Percent};
use crate::frontend::ir::TypedProgram;
use crate::frontend::source::SourceUnit;
use crate::frontend::{compile, FrontendErrors};
use crate::harness::{self, AssembleError, AssertionEvent, CollisionError, HarnessTemplate, Tolerance};
use crate::runtime::{run_program, ExecTrace, FbInstance, RunOptions, RuntimeError, ScanRecord, SimClock};
use crate::testspec::CheckedSuite;
use crate::value::Value;

pub const REPORT_SCHEMA: u32 = 1;
pub const DEFAULT_CYCLE_TIME_MS: u32 = 10;
pub const DEFAULT_MAX_CYCLES: u64 = 100_000;

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Scan interval, used unless the template's task sets one.
    pub cycle_time_ms: u32,
    pub tolerance: Tolerance,
    /// Hard cap on scans, whatever the suite asks for.
    pub max_cycles: u64,
    pub template: HarnessTemplate,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cycle_time_ms: DEFAULT_CYCLE_TIME_MS,
            tolerance: Tolerance::default(),
            max_cycles: DEFAULT_MAX_CYCLES,
            template: HarnessTemplate::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Generate,
    Assemble,
    Execute,
    Report,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Generate => "generate",
            Phase::Assemble => "assemble",
            Phase::Execute => "execute",
            Phase::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("generate: {0}")]
    Generate(#[from] CollisionError),
    #[error("assemble: {0}")]
    Assemble(#[from] AssembleError),
    #[error("assemble: unit does not compile:\n{}", .0.render())]
    Unit(FrontendErrors),
    #[error("execute: {0}")]
    Execute(#[from] RuntimeError),
    #[error("report: {0}")]
    Report(#[from] CoverageError),
}

impl RunError {
    pub fn phase(&self) -> Phase {
        match self {
            RunError::Generate(_) => Phase::Generate,
            RunError::Assemble(_) | RunError::Unit(_) => Phase::Assemble,
            RunError::Execute(_) => Phase::Execute,
            RunError::Report(_) => Phase::Report,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot compare {expected} with {actual}")]
pub struct TypeMismatch {
    pub expected: &'static str,
    pub actual: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub passed: bool,
    /// Both values rendered as ST literals.
    pub detail: String,
}

#[derive(PartialEq)]
enum Family {
    Bool,
    Integer,
    Real,
    Time,
    String,
}

fn family(v: &Value) -> (Family, &'static str) {
    match v {
        Value::Bool(_) => (Family::Bool, "BOOL"),
        Value::Int(_) | Value::Dint(_) | Value::Byte(_) | Value::Word(_) => (Family::Integer, "integer"),
        Value::Real(_) | Value::Lreal(_) => (Family::Real, "real"),
        Value::Time(_) => (Family::Time, "TIME"),
        Value::String(_) => (Family::String, "STRING"),
    }
}

/// Exact for discrete values; REAL and LREAL use `tol` around `expected`.
pub fn compare(expected: &Value, actual: &Value, tol: Tolerance) -> Result<Comparison, TypeMismatch> {
    let ((fe, ne), (fa, na)) = (family(expected), family(actual));
    if fe != fa {
        return Err(TypeMismatch { expected: ne, actual: na });
    }
    let passed = match fe {
        Family::Integer => expected.as_i64() == actual.as_i64(),
        Family::Real => {
            let (e, a) = (expected.as_f64().expect("real"), actual.as_f64().expect("real"));
            (a - e).abs() <= tol.bound(e)
        }
        _ => expected == actual,
    };
    Ok(Comparison { passed, detail: format!("expected {}, actual {}", expected.to_st_literal(), actual.to_st_literal()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Fault,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Fault => "fault",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedAssertion {
    /// 1-based state index.
    pub state: usize,
    pub variable: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub verdict: Verdict,
    pub assertions_total: usize,
    pub assertions_passed: usize,
    pub failures: Vec<FailedAssertion>,
    /// Set when the case's block faulted.
    pub fault: Option<String>,
    /// Set when the scan budget ran out before the case finished.
    pub unfinished: bool,
}

/// A percentage that is undefined for an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptionalPercent(pub Option<Percent>);

impl OptionalPercent {
    pub fn of(part: u64, whole: u64) -> OptionalPercent {
        OptionalPercent((whole > 0).then(|| Percent::of(part, whole)))
    }
}

impl fmt::Display for OptionalPercent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(p) => p.fmt(f),
            None => f.write_str("n/a"),
        }
    }
}

impl Serialize for OptionalPercent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub cases_total: usize,
    pub assertions_total: usize,
    pub assertions_passed: usize,
    pub assertion_success_pct: OptionalPercent,
    pub statement_coverage_pct: Percent,
}

/// Paths of rendered coverage files, relative to the run directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Artifacts {
    pub annotated: Option<String>,
    pub lcov: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunMetadata {
    /// Prompt mode, when the suite came from a provider.
    pub mode: Option<String>,
    pub provider: Option<String>,
    pub cycle_time_ms: u32,
    pub cycles_executed: u64,
    /// Omitted in fixed-clock mode so reports compare byte for byte.
    pub started_at: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TestReport {
    pub schema: u32,
    pub unit: String,
    pub cases: Vec<CaseReport>,
    pub metrics: Metrics,
    pub coverage: CoverageSummary,
    pub artifacts: Artifacts,
    pub metadata: RunMetadata,
}

/// Everything a run produces besides the report.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub report: TestReport,
    pub harness: SourceUnit,
    pub unit_program: TypedProgram,
    /// Coverage on the unit's own statement numbering.
    pub coverage: CoverageMap,
    /// One [`ScanRecord`] line per scan.
    pub monitor_log: String,
}

struct Watch<'a> {
    done: Vec<String>,
    /// Upper-cased instance name → case position.
    instances: BTreeMap<String, usize>,
    faulted: BTreeSet<usize>,
    events: Vec<Vec<AssertionEvent>>,
    log: &'a mut String,
}

impl Watch<'_> {
    fn scan(&mut self, record: &ScanRecord, program: &FbInstance) -> ControlFlow<()> {
        let _ = writeln!(self.log, "{record}");
        for e in &record.events {
            if let Some(a) = AssertionEvent::parse(e) {
                if let Some(list) = a.case_index.checked_sub(1).and_then(|i| self.events.get_mut(i)) {
                    list.push(a);
                }
            } else if let Some(i) = e.strip_prefix("FAULT/").and_then(|n| self.instances.get(n)) {
                self.faulted.insert(*i);
            }
        }
        let finished = self.done.iter().enumerate().all(|(i, d)| self.faulted.contains(&i) || program.get(d) == Some(&Value::Bool(true)));
        if finished {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }
}

/// Generates, assembles and executes the harness for `suite`, then scores it.
pub fn run_suite(unit: &SourceUnit, libraries: &[SourceUnit], suite: &CheckedSuite, cfg: &RunConfig) -> Result<SuiteRun, RunError> {
    let mut libs = Vec::with_capacity(libraries.len());
    for l in libraries {
        libs.push(compile(l, &libs).map_err(RunError::Unit)?);
    }
    let unit_program = compile(unit, &libs).map_err(RunError::Unit)?;
    let mut linked = libs.clone();
    linked.push(unit_program.clone());
    // the unit plus everything it may reference, for collision checks
    let everything = compile(&SourceUnit::new(unit.origin(), ""), &linked).map_err(RunError::Unit)?;

    let bundle = harness::generate_bundle(suite, &everything, cfg.tolerance)?;
    let harness = harness::assemble_program(&bundle, &cfg.template, unit, libraries, cfg.cycle_time_ms)?;
    let program = compile(&harness, &[]).map_err(|errors| RunError::Assemble(AssembleError { part: harness::Part::Program, errors }))?;

    let config = program.configurations.first();
    let cycle_time_ms = config
        .and_then(|c| c.task.as_ref())
        .and_then(|t| t.interval_ms)
        .and_then(|ms| u32::try_from(ms).ok())
        .filter(|ms| *ms > 0)
        .unwrap_or(cfg.cycle_time_ms);
    let program_name = config.and_then(|c| c.programs.first()).map_or(harness::PROGRAM_NAME.to_string(), |p| p.program_type.clone());
    let budget =
        suite.cases.iter().map(|c| c.states.iter().map(|s| s.dwell_cycles as u64).sum::<u64>() + 2).max().unwrap_or(2).min(cfg.max_cycles);

    let mut log = String::new();
    let mut watch = Watch {
        done: bundle.cases.iter().map(|c| c.hooks.done.to_ascii_uppercase()).collect(),
        instances: bundle.cases.iter().enumerate().map(|(i, c)| (c.hooks.instance.to_ascii_uppercase(), i)).collect(),
        faulted: BTreeSet::new(),
        events: vec![Vec::new(); bundle.cases.len()],
        log: &mut log,
    };
    let mut clock = SimClock::new(cycle_time_ms);
    let mut monitor = |r: &ScanRecord, _: &ExecTrace, p: &FbInstance| watch.scan(r, p);
    let run = run_program(&program, &program_name, budget, &mut clock, RunOptions { isolate_faults: true }, &mut monitor)?;
    let Watch { events, faulted, .. } = watch;

    let mut cases = Vec::with_capacity(suite.cases.len());
    for (i, (case, generated)) in suite.cases.iter().zip(&bundle.cases).enumerate() {
        let hooks = &generated.hooks;
        let instance = run.program.child(&hooks.instance);
        let total: usize = case.states.iter().map(|s| s.expected.len()).sum();
        let mut passed = 0;
        let mut failures = Vec::new();
        for e in &events[i] {
            if e.passed {
                passed += 1;
                continue;
            }
            let expected = &case.states[e.state - 1].expected[&e.var];
            let actual = instance
                .and_then(|inst| inst.get(&harness::actual_var(e.state, &e.var)))
                .map_or_else(|| "?".to_string(), Value::to_st_literal);
            failures.push(FailedAssertion { state: e.state, variable: e.var.clone(), expected: expected.to_st_literal(), actual });
        }
        let fault = run.isolated.iter().find(|f| f.instance.eq_ignore_ascii_case(&hooks.instance)).map(|f| f.fault.to_string());
        let done = run.program.get(&hooks.done) == Some(&Value::Bool(true));
        let verdict = if fault.is_some() || faulted.contains(&i) {
            Verdict::Fault
        } else if done && failures.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        cases.push(CaseReport {
            name: case.name.clone(),
            verdict,
            assertions_total: total,
            assertions_passed: passed,
            failures,
            fault,
            unfinished: !done && verdict != Verdict::Fault,
        });
    }

    let coverage = run.coverage.rebase(&program, &unit_program);
    let summary = coverage::summarize(&coverage, &unit_program, &suite.fb_under_test)?;
    let assertions_total: usize = cases.iter().map(|c| c.assertions_total).sum();
    let assertions_passed: usize = cases.iter().map(|c| c.assertions_passed).sum();
    let report = TestReport {
        schema: REPORT_SCHEMA,
        unit: suite.fb_under_test.clone(),
        metrics: Metrics {
            cases_total: cases.len(),
            assertions_total,
            assertions_passed,
            assertion_success_pct: OptionalPercent::of(assertions_passed as u64, assertions_total as u64),
            statement_coverage_pct: summary.unit.percentage,
        },
        cases,
        coverage: summary,
        artifacts: Artifacts::default(),
        metadata: RunMetadata { cycle_time_ms, cycles_executed: run.cycles, ..RunMetadata::default() },
    };
    Ok(SuiteRun { report, harness, unit_program, coverage, monitor_log: log })
}

impl TestReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.verdict == Verdict::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn render_report(report: &TestReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(report),
    }
}

fn render_text(r: &TestReport) -> String {
    let width = r.cases.iter().map(|c| c.name.chars().count()).max().unwrap_or(0).max(4);
    let mut s = String::new();
    let _ = writeln!(s, "unit: {}", r.unit);
    let _ = writeln!(s, "{:<width$}  {:<7}  {:>10}  detail", "case", "verdict", "assertions");
    for c in &r.cases {
        let detail = match (&c.fault, c.failures.first()) {
            (Some(f), _) => f.clone(),
            (None, Some(f)) => {
                let more = if c.failures.len() > 1 { format!(" (+{} more)", c.failures.len() - 1) } else { String::new() };
                format!("state {} {}: expected {}, actual {}{more}", f.state, f.variable, f.expected, f.actual)
            }
            (None, None) if c.unfinished => "did not finish within the scan budget".to_string(),
            (None, None) => String::new(),
        };
        let counts = format!("{}/{}", c.assertions_passed, c.assertions_total);
        let _ = writeln!(s, "{:<width$}  {:<7}  {:>10}  {detail}", c.name, c.verdict.to_string(), counts);
    }
    let m = &r.metrics;
    let _ = writeln!(s, "cases: {}", m.cases_total);
    let pct = match m.assertion_success_pct.0 {
        Some(p) => format!("{p}%"),
        None => "n/a".to_string(),
    };
    let _ = writeln!(s, "assertions passed: {}/{} ({pct})", m.assertions_passed, m.assertions_total);
    let u = &r.coverage.unit;
    let _ = writeln!(s, "statement coverage: {}% ({}/{})", m.statement_coverage_pct, u.statements_hit, u.statements_total);
    let _ = writeln!(s, "cycle time: {} ms, scans: {}", r.metadata.cycle_time_ms, r.metadata.cycles_executed);
    for w in &r.metadata.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}
