//! The CSV test-suite format: one row per (case, state).
//!
//! ```text
//! test_name,state,<input>...,expect_<output>...[,dwell_cycles]
//! ```
//!
//! `state` is 1-based and consecutive within a case. Empty input cells hold
//! the previous value; empty `expect_` cells are not checked.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::frontend::ast::PouKind;
use crate::frontend::ir::{TypedPou, TypedProgram, VarInfo};
use crate::frontend::types::Type;
use crate::value::Value;

pub const NAME_COLUMN: &str = "test_name";
pub const STATE_COLUMN: &str = "state";
pub const DWELL_COLUMN: &str = "dwell_cycles";
pub const EXPECT_PREFIX: &str = "expect_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", match .column {
    Some(c) => format!("row {}, column {c}: {}", .row, .message),
    None => format!("row {}: {}", .row, .message),
})]
pub struct CsvError {
    /// 1-based line of the record; the header is row 1.
    pub row: usize,
    /// Header name of the offending cell, when there is one.
    pub column: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSuite {
    pub fb_under_test: String,
    /// Input column names in header order.
    pub inputs: Vec<String>,
    /// Output names in header order, without the `expect_` prefix.
    pub outputs: Vec<String>,
    /// Whether the header carries a `dwell_cycles` column.
    pub dwell_column: bool,
    pub cases: Vec<TestCase>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub name: String,
    pub states: Vec<TestState>,
}

/// Untyped cells of one state. Only non-empty cells are present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestState {
    pub inputs: BTreeMap<String, String>,
    pub expected: BTreeMap<String, String>,
    pub dwell_cycles: u32,
}

impl TestSuite {
    /// Non-empty expected cells over every state.
    pub fn assertion_count(&self) -> usize {
        self.cases.iter().flat_map(|c| &c.states).map(|s| s.expected.len()).sum()
    }
}

fn csv_err(row: usize, column: Option<&str>, message: impl Into<String>) -> CsvError {
    CsvError { row, column: column.map(str::to_string), message: message.into() }
}

enum Col {
    Name,
    State,
    Dwell,
    Input(String),
    Expect(String),
}

/// Parses suite CSV. Cell literals stay untyped until [`validate`].
///
/// Rows of one case may be interleaved with other cases; cases keep the
/// order of their first row.
pub fn parse_suite(csv_text: &str, fb_under_test: &str) -> Result<TestSuite, CsvError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(csv_text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(csv_err(1, None, e.to_string())),
        None => return Err(csv_err(1, None, "missing header")),
    };
    let mut cols = Vec::with_capacity(header.len());
    let mut seen = BTreeSet::new();
    for name in header.iter() {
        let lower = name.to_ascii_lowercase();
        if name.is_empty() {
            return Err(csv_err(1, None, format!("empty header name in column {}", cols.len() + 1)));
        }
        if !seen.insert(lower.clone()) {
            return Err(csv_err(1, Some(name), "duplicate column"));
        }
        cols.push(match lower.as_str() {
            NAME_COLUMN => Col::Name,
            STATE_COLUMN => Col::State,
            DWELL_COLUMN => Col::Dwell,
            _ => match lower.strip_prefix(EXPECT_PREFIX) {
                Some("") => return Err(csv_err(1, Some(name), "expect_ column without a variable name")),
                Some(_) => Col::Expect(name[EXPECT_PREFIX.len()..].to_string()),
                None => Col::Input(name.to_string()),
            },
        });
    }
    if !matches!(cols.as_slice(), [Col::Name, Col::State, ..]) {
        return Err(csv_err(1, None, format!("header must start with `{NAME_COLUMN},{STATE_COLUMN}`")));
    }

    let mut suite = TestSuite {
        fb_under_test: fb_under_test.to_string(),
        inputs: cols
            .iter()
            .filter_map(|c| match c {
                Col::Input(n) => Some(n.clone()),
                _ => None,
            })
            .collect(),
        outputs: cols
            .iter()
            .filter_map(|c| match c {
                Col::Expect(n) => Some(n.clone()),
                _ => None,
            })
            .collect(),
        dwell_column: cols.iter().any(|c| matches!(c, Col::Dwell)),
        cases: Vec::new(),
    };
    let mut case_index: BTreeMap<String, usize> = BTreeMap::new();
    for record in records {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            csv_err(row, None, e.to_string())
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != cols.len() {
            return Err(csv_err(row, None, format!("expected {} fields, found {}", cols.len(), record.len())));
        }
        let mut name = "";
        let mut index = 0u32;
        let mut state = TestState { inputs: BTreeMap::new(), expected: BTreeMap::new(), dwell_cycles: 1 };
        for ((col, cell), head) in cols.iter().zip(record.iter()).zip(header.iter()) {
            match col {
                Col::Name if cell.is_empty() => return Err(csv_err(row, Some(head), "empty test name")),
                Col::Name => name = cell,
                Col::State => {
                    index = cell
                        .parse()
                        .ok()
                        .filter(|i| *i >= 1)
                        .ok_or_else(|| csv_err(row, Some(head), format!("state index {cell:?} is not a positive integer")))?;
                }
                Col::Dwell if cell.is_empty() => {}
                Col::Dwell => {
                    state.dwell_cycles = cell
                        .parse()
                        .ok()
                        .filter(|d| *d >= 1)
                        .ok_or_else(|| csv_err(row, Some(head), format!("dwell {cell:?} is not a positive integer")))?;
                }
                _ if cell.is_empty() => {}
                Col::Input(n) => {
                    state.inputs.insert(n.clone(), cell.to_string());
                }
                Col::Expect(n) => {
                    state.expected.insert(n.clone(), cell.to_string());
                }
            }
        }
        let k = *case_index.entry(name.to_string()).or_insert_with(|| {
            suite.cases.push(TestCase { name: name.to_string(), states: Vec::new() });
            suite.cases.len() - 1
        });
        let case = &mut suite.cases[k];
        let next = case.states.len() as u32 + 1;
        if index < next {
            return Err(csv_err(row, Some(STATE_COLUMN), format!("duplicate state {index} of case {name}")));
        }
        if index > next {
            return Err(csv_err(row, Some(STATE_COLUMN), format!("case {name} expects state {next} here, found {index}")));
        }
        case.states.push(state);
    }
    if suite.cases.is_empty() {
        return Err(csv_err(1, None, "suite has no test cases"));
    }
    Ok(suite)
}

/// Renders a suite in the canonical layout: cases grouped, columns in
/// suite order, values that need it quoted.
pub fn serialize_suite(suite: &TestSuite) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec![NAME_COLUMN.to_string(), STATE_COLUMN.to_string()];
    header.extend(suite.inputs.iter().cloned());
    header.extend(suite.outputs.iter().map(|o| format!("{EXPECT_PREFIX}{o}")));
    if suite.dwell_column {
        header.push(DWELL_COLUMN.to_string());
    }
    w.write_record(&header).expect("writing to memory");
    for case in &suite.cases {
        for (i, s) in case.states.iter().enumerate() {
            let mut row = vec![case.name.clone(), (i + 1).to_string()];
            row.extend(suite.inputs.iter().map(|n| s.inputs.get(n).cloned().unwrap_or_default()));
            row.extend(suite.outputs.iter().map(|n| s.expected.get(n).cloned().unwrap_or_default()));
            if suite.dwell_column {
                row.push(s.dwell_cycles.to_string());
            }
            w.write_record(&row).expect("writing to memory");
        }
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv of utf-8 input")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("{0} is not a function block of the program")]
    UnknownFb(String),
    #[error("column {column}: {fb} has no {section} named {name}", section = if *.expected { "VAR_OUTPUT" } else { "VAR_INPUT" })]
    UnknownColumn { fb: String, column: String, name: String, expected: bool },
    #[error("column {column}: {ty} is not an elementary type")]
    UnsupportedType { column: String, ty: String },
    #[error("case {case}, state {state}, column {column}: {message}")]
    BadLiteral { case: String, state: usize, column: String, message: String },
    #[error("case {0} has no expected values to check")]
    NoAssertions(String),
}

impl ValidationError {
    /// Whether lenient validation may drop the offending part and continue.
    pub fn is_tolerable(&self) -> bool {
        matches!(self, ValidationError::UnknownColumn { .. } | ValidationError::NoAssertions(_))
    }
}

/// A declared variable bound by a suite column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    /// Name as declared by the function block.
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedState {
    pub inputs: BTreeMap<String, Value>,
    pub expected: BTreeMap<String, Value>,
    pub dwell_cycles: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedCase {
    pub name: String,
    pub states: Vec<CheckedState>,
}

/// A suite whose columns and literals agree with the unit's declarations.
/// Maps are keyed by declared variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedSuite {
    pub fb_under_test: String,
    pub inputs: Vec<Column>,
    pub outputs: Vec<Column>,
    pub cases: Vec<CheckedCase>,
}

impl CheckedSuite {
    pub fn assertion_count(&self) -> usize {
        self.cases.iter().flat_map(|c| &c.states).map(|s| s.expected.len()).sum()
    }

    pub fn output_type(&self, name: &str) -> Option<&Type> {
        self.outputs.iter().find(|c| c.name == name).map(|c| &c.ty)
    }

    /// Back to untyped cells, rendering each value as an ST literal.
    pub fn to_suite(&self) -> TestSuite {
        let cells = |m: &BTreeMap<String, Value>| m.iter().map(|(k, v)| (k.clone(), v.to_st_literal())).collect();
        TestSuite {
            fb_under_test: self.fb_under_test.clone(),
            inputs: self.inputs.iter().map(|c| c.name.clone()).collect(),
            outputs: self.outputs.iter().map(|c| c.name.clone()).collect(),
            dwell_column: self.cases.iter().flat_map(|c| &c.states).any(|s| s.dwell_cycles != 1),
            cases: self
                .cases
                .iter()
                .map(|c| TestCase {
                    name: c.name.clone(),
                    states: c
                        .states
                        .iter()
                        .map(|s| TestState { inputs: cells(&s.inputs), expected: cells(&s.expected), dwell_cycles: s.dwell_cycles })
                        .collect(),
                })
                .collect(),
        }
    }
}

fn fb_of<'p>(prog: &'p TypedProgram, name: &str) -> Option<&'p TypedPou> {
    prog.pou(name).map(|p| &**p).filter(|p| p.kind == PouKind::FunctionBlock)
}

/// Checks `suite` against the declarations of its function block.
pub fn validate(suite: &TestSuite, prog: &TypedProgram) -> Result<CheckedSuite, Vec<ValidationError>> {
    let (checked, errors) = check(suite, prog)?;
    if errors.is_empty() {
        Ok(checked)
    } else {
        Err(errors)
    }
}

/// Like [`validate`], but unknown columns are dropped and cases without
/// assertions are kept; both come back as warnings.
pub fn validate_lenient(suite: &TestSuite, prog: &TypedProgram) -> Result<(CheckedSuite, Vec<ValidationError>), Vec<ValidationError>> {
    let (checked, errors) = check(suite, prog)?;
    if errors.iter().all(ValidationError::is_tolerable) {
        Ok((checked, errors))
    } else {
        Err(errors.into_iter().filter(|e| !e.is_tolerable()).collect())
    }
}

fn column<'a>(fb: &'a TypedPou, column: &str, name: &str, expected: bool, errors: &mut Vec<ValidationError>) -> Option<&'a VarInfo> {
    let found = if expected {
        fb.outputs().find(|v| v.name.eq_ignore_ascii_case(name))
    } else {
        fb.inputs().find(|v| v.name.eq_ignore_ascii_case(name))
    };
    match found {
        None => {
            errors.push(ValidationError::UnknownColumn {
                fb: fb.name.clone(),
                column: column.to_string(),
                name: name.to_string(),
                expected,
            });
            None
        }
        Some(v) if v.ty.elementary().is_none() => {
            errors.push(ValidationError::UnsupportedType { column: column.to_string(), ty: v.ty.to_string() });
            None
        }
        Some(v) => Some(v),
    }
}

/// Checked suite with unknown columns dropped, plus every problem found.
fn check(suite: &TestSuite, prog: &TypedProgram) -> Result<(CheckedSuite, Vec<ValidationError>), Vec<ValidationError>> {
    let fb = fb_of(prog, &suite.fb_under_test).ok_or_else(|| vec![ValidationError::UnknownFb(suite.fb_under_test.clone())])?;
    let mut errors = Vec::new();
    // column text → declared variable
    let inputs: Vec<(&str, &VarInfo)> =
        suite.inputs.iter().filter_map(|n| column(fb, n, n, false, &mut errors).map(|v| (n.as_str(), v))).collect();
    let outputs: Vec<(&str, &VarInfo)> = suite
        .outputs
        .iter()
        .filter_map(|n| column(fb, &format!("{EXPECT_PREFIX}{n}"), n, true, &mut errors).map(|v| (n.as_str(), v)))
        .collect();

    let mut cases = Vec::with_capacity(suite.cases.len());
    for case in &suite.cases {
        let mut states = Vec::with_capacity(case.states.len());
        for (i, state) in case.states.iter().enumerate() {
            let mut typed = |cells: &BTreeMap<String, String>, cols: &[(&str, &VarInfo)], prefix: &str| {
                let mut out = BTreeMap::new();
                for (col, var) in cols {
                    let Some(text) = cells.get(*col) else { continue };
                    match Value::parse_literal(text, &var.ty) {
                        Ok(v) => {
                            out.insert(var.name.clone(), v);
                        }
                        Err(e) => errors.push(ValidationError::BadLiteral {
                            case: case.name.clone(),
                            state: i + 1,
                            column: format!("{prefix}{col}"),
                            message: e.message,
                        }),
                    }
                }
                out
            };
            let inputs = typed(&state.inputs, &inputs, "");
            let expected = typed(&state.expected, &outputs, EXPECT_PREFIX);
            states.push(CheckedState { inputs, expected, dwell_cycles: state.dwell_cycles });
        }
        if states.iter().all(|s| s.expected.is_empty()) {
            errors.push(ValidationError::NoAssertions(case.name.clone()));
        }
        cases.push(CheckedCase { name: case.name.clone(), states });
    }
    let columns = |cols: &[(&str, &VarInfo)]| cols.iter().map(|(_, v)| Column { name: v.name.clone(), ty: v.ty.clone() }).collect();
    Ok((CheckedSuite { fb_under_test: fb.name.clone(), inputs: columns(&inputs), outputs: columns(&outputs), cases }, errors))
}
