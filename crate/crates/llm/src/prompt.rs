use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use plctest_core::frontend::ast::PouKind;
use plctest_core::frontend::ir::{TypedPou, TypedProgram, VarInfo};
use plctest_core::testspec::{DWELL_COLUMN, EXPECT_PREFIX, NAME_COLUMN, STATE_COLUMN};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simple,
    Enhanced,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Simple => "simple",
            Mode::Enhanced => "enhanced",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(Mode::Simple),
            "enhanced" => Ok(Mode::Enhanced),
            _ => Err(format!("unknown prompt mode `{s}` (expected simple or enhanced)")),
        }
    }
}

/// Headings of the instruction groups only the enhanced prompt carries.
pub const ENHANCED_GROUPS: [&str; 3] = ["Statement coverage.", "Boundary values.", "Reference functions."];

/// Column-relevant view of a function block's interface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceSummary {
    pub fb_name: String,
    /// (name, type) of each VAR_INPUT with an elementary type, in declaration order.
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
    /// Scan interval the suite will run at, quoted so timers get enough dwell.
    pub cycle_time_ms: u64,
}

impl InterfaceSummary {
    pub fn from_pou(pou: &TypedPou, cycle_time_ms: u64) -> Self {
        InterfaceSummary { fb_name: pou.name.clone(), inputs: columns(pou.inputs()), outputs: columns(pou.outputs()), cycle_time_ms }
    }

    /// Summary of the function block `fb_name` declared in `prog`.
    pub fn of(prog: &TypedProgram, fb_name: &str, cycle_time_ms: u64) -> Option<Self> {
        prog.pou(fb_name).filter(|p| p.kind == PouKind::FunctionBlock && p.builtin.is_none()).map(|p| Self::from_pou(p, cycle_time_ms))
    }

    /// The exact CSV header a suite for this block uses.
    pub fn header(&self) -> String {
        let mut cols = vec![NAME_COLUMN.to_string(), STATE_COLUMN.to_string()];
        cols.extend(self.inputs.iter().map(|(n, _)| n.clone()));
        cols.extend(self.outputs.iter().map(|(n, _)| format!("{EXPECT_PREFIX}{n}")));
        cols.push(DWELL_COLUMN.to_string());
        cols.join(",")
    }

    fn example_row(&self) -> String {
        let mut cells = vec!["*** case name ***".to_string(), "1".to_string()];
        cells.extend(self.inputs.iter().map(|(n, _)| format!("*** value of {n} ***")));
        cells.extend(self.outputs.iter().map(|(n, _)| format!("*** expected {n} ***")));
        cells.push("1".to_string());
        cells.join(",")
    }
}

fn columns<'a>(vars: impl Iterator<Item = &'a VarInfo>) -> Vec<(String, String)> {
    vars.filter(|v| v.ty.elementary().is_some()).map(|v| (v.name.clone(), v.ty.to_string())).collect()
}

/// Instruction and format-spec texts with `{PLACEHOLDER}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub simple: String,
    pub enhanced: String,
    pub format_spec: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            simple: include_str!("../templates/instructions_simple.txt").to_string(),
            enhanced: include_str!("../templates/instructions_enhanced.txt").to_string(),
            format_spec: include_str!("../templates/format_spec.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    pub const FILES: [&'static str; 3] = ["instructions_simple.txt", "instructions_enhanced.txt", "format_spec.txt"];

    /// Defaults, replaced file by file with whatever `dir` contains.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let mut t = Self::default();
        for (file, slot) in Self::FILES.into_iter().zip([&mut t.simple, &mut t.enhanced, &mut t.format_spec]) {
            match std::fs::read_to_string(dir.join(file)) {
                Ok(text) => *slot = text,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub mode: Mode,
    pub instructions: String,
    pub format_spec: String,
    pub code: String,
}

impl PromptBundle {
    pub fn text(&self) -> String {
        format!("{}\n{}\n{}", self.instructions, self.format_spec, self.code)
    }
}

pub fn build_prompt(fb_source: &str, summary: &InterfaceSummary, mode: Mode) -> PromptBundle {
    build_prompt_with(&PromptTemplates::default(), fb_source, summary, mode)
}

pub fn build_prompt_with(templates: &PromptTemplates, fb_source: &str, summary: &InterfaceSummary, mode: Mode) -> PromptBundle {
    let lines = |vars: &[(String, String)], prefix: &str, what: &str| {
        vars.iter().map(|(n, ty)| format!("- {prefix}{n}: {what} {n} ({ty}).")).collect::<Vec<_>>().join("\n")
    };
    let fill = |t: &str| {
        t.replace("{FB_NAME}", &summary.fb_name)
            .replace("{HEADER}", &summary.header())
            .replace("{INPUT_LINES}", &lines(&summary.inputs, "", "value written to input"))
            .replace("{OUTPUT_LINES}", &lines(&summary.outputs, EXPECT_PREFIX, "expected value of output"))
            .replace("{CYCLE_TIME_MS}", &summary.cycle_time_ms.to_string())
            .replace("{EXAMPLE_ROW}", &summary.example_row())
    };
    let instructions = match mode {
        Mode::Simple => &templates.simple,
        Mode::Enhanced => &templates.enhanced,
    };
    let mut code = fb_source.trim_end().to_string();
    code.push('\n');
    PromptBundle { mode, instructions: fill(instructions), format_spec: fill(&templates.format_spec), code }
}
