//! The generate and run halves of the pipeline, each writing into a run directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use anyhow::{anyhow, bail, Context, Result};
use plctest_core::coverage::{render_annotated, render_lcov};
use plctest_core::frontend::ast::PouKind;
use plctest_core::frontend::compile;
use plctest_core::frontend::ir::TypedProgram;
use plctest_core::frontend::source::SourceUnit;
use plctest_core::harness::HarnessTemplate;
use plctest_core::runner::{render_report, run_suite, ReportFormat, RunConfig, TestReport};
use plctest_core::testspec::{parse_suite, validate_lenient, CheckedSuite, TestSuite};
use plctest_llm::prompt::build_prompt_with;
use plctest_llm::{extract_csv, query, ExchangeLog, InterfaceSummary, LlmError, PromptTemplates, ProviderKind};
use serde::{Deserialize, Serialize};

use crate::config::Settings;

pub const SUITE_FILE: &str = "suite.csv";
/// Provenance written by `generate` next to the suite it produced.
pub const GENERATION_FILE: &str = "generation.json";

/// A unit compiled against its libraries, with the block under test chosen.
pub struct Unit {
    pub source: SourceUnit,
    pub libs: Vec<SourceUnit>,
    pub program: TypedProgram,
    pub fb: String,
}

impl Unit {
    pub fn load(path: &Path, settings: &Settings) -> Result<Unit> {
        let read = |p: &Path| -> Result<SourceUnit> {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(SourceUnit::new(p.display().to_string(), text))
        };
        let libs = settings.libs.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
        let mut compiled = Vec::with_capacity(libs.len());
        for l in &libs {
            compiled.push(compile(l, &compiled).map_err(|e| anyhow!("library {} does not compile:\n{}", l.origin(), e.render()))?);
        }
        let source = read(path)?;
        let program = compile(&source, &compiled).map_err(|e| anyhow!("{} does not compile:\n{}", path.display(), e.render()))?;
        let blocks: Vec<&str> = program.local_pous().iter().filter(|p| p.kind == PouKind::FunctionBlock).map(|p| p.name.as_str()).collect();
        let fb = match (&settings.fb, blocks.as_slice()) {
            (Some(want), _) => match blocks.iter().find(|b| b.eq_ignore_ascii_case(want)) {
                Some(b) => b.to_string(),
                None => bail!("{} declares no function block {want}; it declares: {}", path.display(), blocks.join(", ")),
            },
            (None, [only]) => only.to_string(),
            (None, []) => bail!("{} declares no function block to test", path.display()),
            (None, many) => bail!("{} declares several function blocks ({}); pick one with --fb", path.display(), many.join(", ")),
        };
        Ok(Unit { source, libs, program, fb })
    }

    /// `--out`, else `runs/<fb>[-<label>]`.
    pub fn run_dir(&self, settings: &Settings) -> PathBuf {
        settings.out.clone().unwrap_or_else(|| {
            let mut name = self.fb.to_ascii_lowercase();
            if let Some(l) = &settings.label {
                name = format!("{name}-{l}");
            }
            Path::new("runs").join(name)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub provider: String,
    pub model: String,
    pub mode: String,
    pub exchange: String,
    pub cases: usize,
    pub warnings: Vec<String>,
}

/// Prompts the provider, then writes the extracted suite and its provenance into `dir`.
pub fn generate(unit: &Unit, settings: &Settings, dir: &Path) -> Result<Generation> {
    let templates = match &settings.prompt_templates {
        Some(d) => PromptTemplates::from_dir(d).with_context(|| format!("reading prompt templates from {}", d.display()))?,
        None => PromptTemplates::default(),
    };
    let pou = unit.program.pou(&unit.fb).expect("Unit::load checked the block");
    let summary = InterfaceSummary::from_pou(pou, settings.cycle_time_ms.into());
    let bundle = build_prompt_with(&templates, unit.source.text(), &summary, settings.mode);

    let mut cfg = settings.provider.clone();
    if cfg.kind == ProviderKind::Mock {
        if let Some(f) = cfg.fixture.as_mut().filter(|f| f.is_dir()) {
            *f = f.join(format!("{}.txt", unit.fb.to_ascii_lowercase()));
        }
    }
    let provider = cfg.build().map_err(|e| with_hint(e, &cfg.api_key_env))?;
    let mut exchange = query(provider.as_ref(), &bundle).map_err(|e| with_hint(e, &cfg.api_key_env))?;
    if settings.fixed_clock {
        exchange.latency_ms = 0;
    }
    let log = ExchangeLog::new(dir).with_context(|| format!("creating {}", dir.display()))?;
    let exchange_path = log.persist(&exchange).context("writing the exchange")?;
    let shown = exchange_path.display();

    let csv = extract_csv(&exchange.response).map_err(|e| anyhow!("{e}; the raw reply is in {shown}"))?;
    let suite = parse_suite(&csv, &unit.fb).map_err(|e| anyhow!("the generated suite is malformed: {e}; the raw reply is in {shown}"))?;
    let (checked, warnings) = checked(&suite, &unit.program).map_err(|e| anyhow!("{e}; the raw reply is in {shown}"))?;
    fs::write(dir.join(SUITE_FILE), &csv)?;
    let generation = Generation {
        provider: exchange.provider.clone(),
        model: exchange.model.clone(),
        mode: exchange.mode.to_string(),
        exchange: exchange_path.file_name().unwrap().to_string_lossy().into_owned(),
        cases: checked.cases.len(),
        warnings,
    };
    write_json(&dir.join(GENERATION_FILE), &generation)?;
    Ok(generation)
}

fn with_hint(e: LlmError, key_env: &Option<String>) -> anyhow::Error {
    let hint = match (&e, key_env) {
        (LlmError::Auth(_), Some(var)) => format!("; export {var} or choose another --provider"),
        (LlmError::RateLimit { .. } | LlmError::Timeout { .. }, _) => "; retry later or raise timeout_ms in the provider table".into(),
        (LlmError::Config(_), _) => "; check the [providers] table of the config file".into(),
        _ => String::new(),
    };
    anyhow!("{e}{hint}")
}

/// Lenient validation: tolerable problems come back as warning lines.
fn checked(suite: &TestSuite, prog: &TypedProgram) -> Result<(CheckedSuite, Vec<String>)> {
    match validate_lenient(suite, prog) {
        Ok((c, warnings)) => Ok((c, warnings.iter().map(ToString::to_string).collect())),
        Err(errors) => {
            let lines: Vec<_> = errors.iter().map(|e| format!("  {e}")).collect();
            bail!("the suite does not fit {}:\n{}", suite.fb_under_test, lines.join("\n"))
        }
    }
}

/// Runs the suite at `suite_path` and writes every report artifact into `dir`.
pub fn run(unit: &Unit, settings: &Settings, suite_path: &Path, dir: &Path) -> Result<TestReport> {
    let csv = fs::read_to_string(suite_path).with_context(|| format!("reading suite {}", suite_path.display()))?;
    let suite = parse_suite(&csv, &unit.fb).map_err(|e| anyhow!("{}: {e}", suite_path.display()))?;
    let (checked, warnings) = checked(&suite, &unit.program)?;
    let provenance = suite_path
        .parent()
        .map(|p| p.join(GENERATION_FILE))
        .and_then(|p| fs::read_to_string(p).ok())
        .and_then(|t| serde_json::from_str::<Generation>(&t).ok());

    let template = match &settings.harness_template {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading harness template {}", p.display()))?;
            HarnessTemplate::new(text).with_context(|| format!("harness template {}", p.display()))?
        }
        None => HarnessTemplate::default(),
    };
    let cfg = RunConfig { cycle_time_ms: settings.cycle_time_ms, tolerance: settings.tolerance, max_cycles: settings.max_cycles, template };
    let sr = run_suite(&unit.source, &unit.libs, &checked, &cfg).map_err(|e| anyhow!("{} phase failed: {e}", e.phase()))?;

    let mut report = sr.report;
    report.metadata.warnings = warnings;
    if let Some(g) = provenance {
        report.metadata.mode = Some(g.mode);
        report.metadata.provider = Some(g.provider);
    }
    if !settings.fixed_clock {
        report.metadata.started_at = Some(humantime::format_rfc3339_seconds(SystemTime::now()).to_string());
    }
    report.artifacts.annotated = Some("coverage.annotated.txt".into());
    report.artifacts.lcov = Some("coverage.lcov".into());

    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let suite_copy = dir.join(SUITE_FILE);
    if !same_file(suite_path, &suite_copy) {
        fs::write(&suite_copy, &csv)?;
    }
    let files = [
        ("harness.st", sr.harness.text().to_string()),
        ("monitor.log", sr.monitor_log),
        ("coverage.lcov", render_lcov(&sr.coverage, &sr.unit_program, &unit.source)),
        ("coverage.annotated.txt", render_annotated(&sr.coverage, &sr.unit_program, &unit.source)),
        ("report.json", render_report(&report, ReportFormat::Json)),
        ("report.txt", render_report(&report, ReportFormat::Text)),
    ];
    for (name, text) in files {
        fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    }
    Ok(report)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
