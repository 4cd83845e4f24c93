//! Executable ST harnesses for checked suites.
//!
//! Each case becomes a function block `TEST_CASE_<n>` owning its own
//! instance of the unit. Per scan it first checks the previous state's
//! expectations if that state's dwell is complete, advances, then calls
//! the unit with the current state's inputs. So state k's outputs are
//! checked one scan after its last call. A case with total dwell D takes
//! D + 1 scans to raise DONE.
//!
//! Verdicts leave the block through outputs, which the test program binds
//! to `TC_<n>_*` variables. `EVT` carries one `TC_<n>/S<k>/<VAR>=PASS;` or
//! `=FAIL;` entry per check made in that scan.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::frontend::ast::PouKind;
use crate::frontend::ir::{TypedPou, TypedProgram};
use crate::frontend::source::SourceUnit;
use crate::frontend::types::Type;
use crate::frontend::{compile, FrontendErrors};
use crate::testspec::{CheckedCase, CheckedSuite};
use crate::value::Value;

pub const CASE_FB_PREFIX: &str = "TEST_CASE_";
pub const PROGRAM_NAME: &str = "TEST_MAIN";
const UUT: &str = "H_UUT";
const STEP: &str = "H_STEP";
const TICKS: &str = "H_TICKS";
/// Names the default template declares besides the placeholders.
const TEMPLATE_NAMES: &[&str] = &[PROGRAM_NAME, "TEST_CONFIG", "TEST_RESOURCE", "TEST_TASK", "TEST_RUN"];

/// REAL and LREAL checks pass when |actual − expected| ≤ atol + rtol·|expected|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { atol: 1e-6, rtol: 1e-6 }
    }
}

impl Tolerance {
    pub fn bound(&self, expected: f64) -> f64 {
        self.atol + self.rtol * expected.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("generated name {name} clashes with a declaration of the same name")]
pub struct CollisionError {
    pub name: String,
}

/// Variables through which one case reports, all in the test program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseHooks {
    /// 1-based position in the suite.
    pub index: usize,
    pub case: String,
    pub fb_name: String,
    pub instance: String,
    pub done: String,
    pub pass: String,
    pub fails: String,
    pub events: String,
    pub events_capacity: u32,
}

impl CaseHooks {
    fn new(index: usize, case: &str, events_capacity: u32) -> CaseHooks {
        CaseHooks {
            index,
            case: case.to_string(),
            fb_name: format!("{CASE_FB_PREFIX}{index}"),
            instance: format!("TC_{index}"),
            done: format!("TC_{index}_DONE"),
            pass: format!("TC_{index}_PASS"),
            fails: format!("TC_{index}_FAILS"),
            events: format!("TC_{index}_EVT"),
            events_capacity,
        }
    }
}

/// Local of a case block holding the value checked for `var` in `state`.
pub fn actual_var(state: usize, var: &str) -> String {
    format!("H_A{state}_{var}")
}

fn io_var(var: &str) -> String {
    format!("H_IO_{var}")
}

/// One check outcome decoded from an `EVT` entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionEvent {
    pub case_index: usize,
    pub state: usize,
    pub var: String,
    pub passed: bool,
}

impl AssertionEvent {
    fn text(case_index: usize, state: usize, var: &str, passed: bool) -> String {
        format!("TC_{case_index}/S{state}/{var}={};", if passed { "PASS" } else { "FAIL" })
    }

    /// Parses one event without its trailing `;`.
    pub fn parse(event: &str) -> Option<AssertionEvent> {
        let rest = event.strip_prefix("TC_")?;
        let (case, rest) = rest.split_once("/S")?;
        let (state, rest) = rest.split_once('/')?;
        let (var, verdict) = rest.split_once('=')?;
        Some(AssertionEvent {
            case_index: case.parse().ok()?,
            state: state.parse().ok()?,
            var: var.to_string(),
            passed: match verdict {
                "PASS" => true,
                "FAIL" => false,
                _ => return None,
            },
        })
    }
}

/// ST condition true when `actual` (a variable) matches `expected`.
fn match_condition(actual: &str, expected: &Value, tol: Tolerance) -> String {
    match expected {
        Value::Real(e) => {
            let e = *e as f64;
            format!("ABS(REAL_TO_LREAL({actual}) - {}) <= {}", Value::Lreal(e).to_st_literal(), Value::Lreal(tol.bound(e)).to_st_literal())
        }
        Value::Lreal(e) => format!("ABS({actual} - {}) <= {}", expected.to_st_literal(), Value::Lreal(tol.bound(*e)).to_st_literal()),
        _ => format!("{actual} = {}", expected.to_st_literal()),
    }
}

fn events_capacity(case: &CheckedCase, index: usize) -> u32 {
    let longest = case
        .states
        .iter()
        .enumerate()
        .map(|(k, s)| s.expected.keys().map(|v| AssertionEvent::text(index, k + 1, v, false).len()).sum::<usize>())
        .max()
        .unwrap_or(0);
    longest.clamp(16, u16::MAX as usize) as u32
}

/// Source of the test block for `case`, the `index`-th of its suite.
pub fn generate_case_fb(case: &CheckedCase, fb: &TypedPou, index: usize, tol: Tolerance) -> Result<String, CollisionError> {
    let hooks = CaseHooks::new(index, &case.name, events_capacity(case, index));
    if fb.name.eq_ignore_ascii_case(&hooks.fb_name) || fb.name.eq_ignore_ascii_case(PROGRAM_NAME) {
        return Err(CollisionError { name: fb.name.clone() });
    }
    let n = case.states.len();
    let mut s = String::new();
    let w = &mut s;
    // writing to a String cannot fail
    let _ = writeln!(w, "FUNCTION_BLOCK {}", hooks.fb_name);
    let _ = writeln!(
        w,
        "VAR_OUTPUT\n    DONE : BOOL;\n    PASS : BOOL;\n    FAILS : INT;\n    EVT : STRING({});\nEND_VAR",
        hooks.events_capacity
    );
    let _ = writeln!(w, "VAR\n    {UUT} : {};\n    {STEP} : INT;\n    {TICKS} : DINT;", fb.name);
    let in_outs: Vec<_> = fb.section_vars(crate::frontend::ast::VarSection::InOut).collect();
    for v in &in_outs {
        let _ = writeln!(w, "    {} : {};", io_var(&v.name), v.ty);
    }
    for (k, state) in case.states.iter().enumerate() {
        for var in state.expected.keys() {
            let ty = fb.var(var).map_or(Type::Bool, |(_, v)| v.ty.clone());
            let _ = writeln!(w, "    {} : {ty};", actual_var(k + 1, var));
        }
    }
    let _ = writeln!(w, "END_VAR");

    let _ = writeln!(w, "EVT := '';");
    let _ = writeln!(w, "IF NOT DONE THEN");
    let _ = writeln!(w, "    CASE {STEP} OF");
    let _ = writeln!(w, "    0:\n        {STEP} := 1;\n        {TICKS} := 0;");
    for (k, state) in case.states.iter().enumerate() {
        let k = k + 1;
        let _ = writeln!(w, "    {k}:");
        let _ = writeln!(w, "        IF {TICKS} >= {} THEN", state.dwell_cycles);
        for (var, expected) in &state.expected {
            let actual = actual_var(k, var);
            let _ = writeln!(w, "            {actual} := {UUT}.{var};");
            let _ = writeln!(w, "            IF {} THEN", match_condition(&actual, expected, tol));
            let _ = writeln!(w, "                EVT := CONCAT(EVT, '{}');", AssertionEvent::text(index, k, var, true));
            let _ = writeln!(w, "            ELSE");
            let _ = writeln!(w, "                FAILS := FAILS + 1;");
            let _ = writeln!(w, "                EVT := CONCAT(EVT, '{}');", AssertionEvent::text(index, k, var, false));
            let _ = writeln!(w, "            END_IF;");
        }
        let _ = writeln!(w, "            {STEP} := {};\n            {TICKS} := 0;", k + 1);
        let _ = writeln!(w, "        END_IF;");
    }
    let _ = writeln!(w, "    END_CASE;");
    let _ = writeln!(w, "    IF {STEP} > {n} THEN\n        DONE := TRUE;\n        PASS := FAILS = 0;\n    ELSE");
    let _ = writeln!(w, "        CASE {STEP} OF");
    for (k, state) in case.states.iter().enumerate() {
        let args: Vec<String> = state
            .inputs
            .iter()
            .map(|(var, v)| format!("{var} := {}", v.to_st_literal()))
            .chain(in_outs.iter().map(|v| format!("{} := {}", v.name, io_var(&v.name))))
            .collect();
        let _ = writeln!(w, "        {}:\n            {UUT}({});", k + 1, args.join(", "));
    }
    let _ = writeln!(w, "        END_CASE;");
    let _ = writeln!(w, "        {TICKS} := {TICKS} + 1;");
    let _ = writeln!(w, "    END_IF;");
    let _ = writeln!(w, "END_IF;");
    let _ = writeln!(w, "END_FUNCTION_BLOCK");
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCase {
    pub hooks: CaseHooks,
    pub source: String,
}

/// Test blocks for a whole suite plus the pieces of the test program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarnessBundle {
    pub fb_under_test: String,
    pub cases: Vec<GeneratedCase>,
}

impl HarnessBundle {
    /// Case name → generated block name.
    pub fn fb_names(&self) -> BTreeMap<&str, &str> {
        self.cases.iter().map(|c| (c.hooks.case.as_str(), c.hooks.fb_name.as_str())).collect()
    }

    pub fn instance_decls(&self) -> String {
        let mut s = String::new();
        for c in &self.cases {
            let h = &c.hooks;
            let _ = writeln!(s, "    {} : {};", h.instance, h.fb_name);
            let _ = writeln!(s, "    {} : BOOL;\n    {} : BOOL;\n    {} : INT;", h.done, h.pass, h.fails);
            let _ = writeln!(s, "    {} : STRING({});", h.events, h.events_capacity);
        }
        s.truncate(s.trim_end().len());
        s
    }

    /// Calls in declaration order. The event variable is cleared first so
    /// a case that faults leaves no stale events behind.
    pub fn calls(&self) -> String {
        let mut s = String::new();
        for c in &self.cases {
            let h = &c.hooks;
            let _ = writeln!(s, "{} := '';", h.events);
            let _ = writeln!(s, "{}(DONE => {}, PASS => {}, FAILS => {}, EVT => {});", h.instance, h.done, h.pass, h.fails, h.events);
        }
        s.truncate(s.trim_end().len());
        s
    }
}

/// Generates every case block, refusing names already declared by `prog`
/// (the unit and its libraries).
pub fn generate_bundle(suite: &CheckedSuite, prog: &TypedProgram, tol: Tolerance) -> Result<HarnessBundle, CollisionError> {
    let fb = prog.pou(&suite.fb_under_test).filter(|p| p.kind == PouKind::FunctionBlock).expect("suite validated against prog");
    let declared: BTreeSet<String> = prog.pous.iter().map(|p| p.name.to_ascii_uppercase()).collect();
    let mut cases = Vec::with_capacity(suite.cases.len());
    for (i, case) in suite.cases.iter().enumerate() {
        let index = i + 1;
        let source = generate_case_fb(case, fb, index, tol)?;
        let hooks = CaseHooks::new(index, &case.name, events_capacity(case, index));
        let mut generated = vec![
            hooks.fb_name.clone(),
            hooks.instance.clone(),
            hooks.done.clone(),
            hooks.pass.clone(),
            hooks.fails.clone(),
            hooks.events.clone(),
            UUT.to_string(),
            STEP.to_string(),
            TICKS.to_string(),
        ];
        generated.extend(case.states.iter().enumerate().flat_map(|(k, s)| s.expected.keys().map(move |v| actual_var(k + 1, v))));
        generated.extend(fb.section_vars(crate::frontend::ast::VarSection::InOut).map(|v| io_var(&v.name)));
        generated.extend(TEMPLATE_NAMES.iter().map(|n| n.to_string()));
        if let Some(name) = generated.into_iter().find(|g| declared.contains(&g.to_ascii_uppercase())) {
            return Err(CollisionError { name });
        }
        cases.push(GeneratedCase { hooks, source });
    }
    Ok(HarnessBundle { fb_under_test: fb.name.clone(), cases })
}

pub const PLACEHOLDERS: [&str; 4] = ["{UNIT_DECLS}", "{TEST_INSTANCE_DECLS}", "{TEST_CALLS}", "{CYCLE_TIME_MS}"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("harness template lacks the placeholder {0}")]
pub struct TemplateError(pub &'static str);

/// Program skeleton with the four brace placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarnessTemplate {
    text: String,
}

impl Default for HarnessTemplate {
    fn default() -> Self {
        HarnessTemplate { text: include_str!("../templates/harness.st").to_string() }
    }
}

impl HarnessTemplate {
    pub fn new(text: impl Into<String>) -> Result<HarnessTemplate, TemplateError> {
        let text = text.into();
        match PLACEHOLDERS.iter().find(|p| !text.contains(*p)) {
            Some(missing) => Err(TemplateError(missing)),
            None => Ok(HarnessTemplate { text }),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn render(&self, unit_decls: &str, instance_decls: &str, calls: &str, cycle_time_ms: u32) -> String {
        self.text
            .replace("{UNIT_DECLS}", unit_decls)
            .replace("{TEST_INSTANCE_DECLS}", instance_decls)
            .replace("{TEST_CALLS}", calls)
            .replace("{CYCLE_TIME_MS}", &cycle_time_ms.to_string())
    }
}

/// Which input of [`assemble_program`] failed to compile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Library(String),
    Unit(String),
    TestCase(String),
    /// The fully assembled program, i.e. the template's own text.
    Program,
}

impl std::fmt::Display for Part {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Part::Library(o) => write!(f, "library {o}"),
            Part::Unit(o) => write!(f, "unit {o}"),
            Part::TestCase(c) => write!(f, "test case {c}"),
            Part::Program => f.write_str("assembled program"),
        }
    }
}

#[derive(Debug, Clone, Error)]
#[error("{part} does not compile:\n{}", .errors.render())]
pub struct AssembleError {
    pub part: Part,
    pub errors: FrontendErrors,
}

/// Name under which assembled harnesses are reported.
pub const HARNESS_ORIGIN: &str = "harness.st";

/// One self-contained unit: libraries in the given order, the unit, the
/// case blocks, then the template's program. Every part is compiled on its
/// own first so a failure names its source.
pub fn assemble_program(
    bundle: &HarnessBundle,
    template: &HarnessTemplate,
    unit: &SourceUnit,
    libraries: &[SourceUnit],
    cycle_time_ms: u32,
) -> Result<SourceUnit, AssembleError> {
    let mut compiled = Vec::with_capacity(libraries.len() + 1);
    for lib in libraries {
        let p = compile(lib, &compiled).map_err(|errors| AssembleError { part: Part::Library(lib.origin().to_string()), errors })?;
        compiled.push(p);
    }
    let unit_prog = compile(unit, &compiled).map_err(|errors| AssembleError { part: Part::Unit(unit.origin().to_string()), errors })?;
    compiled.push(unit_prog);
    for c in &bundle.cases {
        compile(&SourceUnit::new(c.hooks.fb_name.clone(), c.source.clone()), &compiled)
            .map_err(|errors| AssembleError { part: Part::TestCase(c.hooks.case.clone()), errors })?;
    }

    let mut decls = String::new();
    for src in libraries.iter().chain(std::iter::once(unit)) {
        let _ = writeln!(decls, "(* from {} *)\n{}", src.origin(), src.text().trim_end());
        decls.push('\n');
    }
    for c in &bundle.cases {
        let _ = writeln!(decls, "(* case {} *)\n{}", comment_safe(&c.hooks.case), c.source);
    }
    let text = template.render(decls.trim_end(), &bundle.instance_decls(), &bundle.calls(), cycle_time_ms);
    let assembled = SourceUnit::new(HARNESS_ORIGIN, text);
    compile(&assembled, &[]).map_err(|errors| AssembleError { part: Part::Program, errors })?;
    Ok(assembled)
}

/// Case names are free text; keep them from closing the comment.
fn comment_safe(s: &str) -> String {
    s.replace("*)", "* )").replace("(*", "( *")
}
