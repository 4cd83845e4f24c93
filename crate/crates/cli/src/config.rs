//! Run settings merged from defaults, an optional TOML file and flags, in that order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plctest_core::harness::Tolerance;
use plctest_core::runner::{DEFAULT_CYCLE_TIME_MS, DEFAULT_MAX_CYCLES};
use plctest_llm::{Mode, ProviderConfig};
use serde::Deserialize;

/// Picked up from the working directory when `--config` is absent.
pub const DEFAULT_CONFIG_FILE: &str = "plctest.toml";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: FileRun,
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRun {
    pub mode: Option<Mode>,
    pub provider: Option<String>,
    pub fixture: Option<PathBuf>,
    pub lib: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub label: Option<String>,
    pub cycle_time_ms: Option<u32>,
    pub atol: Option<f64>,
    pub rtol: Option<f64>,
    pub max_cycles: Option<u64>,
    pub jobs: Option<usize>,
    pub fixed_clock: Option<bool>,
    pub harness_template: Option<PathBuf>,
    pub prompt_templates: Option<PathBuf>,
}

impl FileConfig {
    /// Reads `path`, or the default file if it exists; relative paths inside resolve against the file's directory.
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None if Path::new(DEFAULT_CONFIG_FILE).is_file() => PathBuf::from(DEFAULT_CONFIG_FILE),
            None => return Ok(FileConfig::default()),
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let r = &mut cfg.run;
        for p in [&mut r.fixture, &mut r.out, &mut r.harness_template, &mut r.prompt_templates].into_iter().flatten() {
            rebase(p);
        }
        r.lib.iter_mut().flatten().for_each(rebase);
        for p in cfg.providers.values_mut().filter_map(|p| p.fixture.as_mut()) {
            rebase(p);
        }
        Ok(cfg)
    }
}

/// Flags shared by every pipeline command; `None` defers to the file.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Overrides {
    /// Library source compiled before the unit (repeatable, in dependency order).
    #[arg(long = "lib", value_name = "FILE")]
    pub libs: Vec<PathBuf>,
    /// Function block under test, when the unit declares several.
    #[arg(long, value_name = "NAME")]
    pub fb: Option<String>,
    /// Run directory for artifacts.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Suffix for the default run directory name.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, value_name = "N")]
    pub cycle_time_ms: Option<u32>,
    /// Absolute tolerance for REAL comparisons.
    #[arg(long)]
    pub atol: Option<f64>,
    /// Relative tolerance for REAL comparisons.
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Independent units processed in parallel.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Omit timestamps and latencies so repeated runs are byte-identical.
    #[arg(long)]
    pub fixed_clock: bool,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, clap::Args)]
pub struct GenFlags {
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Provider name: a `[providers.<name>]` table, `openai` or `mock`.
    #[arg(long, value_name = "NAME")]
    pub provider: Option<String>,
    /// Reply file, or directory of `<fb>.txt` replies, for the mock provider.
    #[arg(long, value_name = "PATH")]
    pub fixture: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub libs: Vec<PathBuf>,
    pub fb: Option<String>,
    pub out: Option<PathBuf>,
    pub label: Option<String>,
    pub cycle_time_ms: u32,
    pub tolerance: Tolerance,
    pub max_cycles: u64,
    pub jobs: usize,
    pub fixed_clock: bool,
    pub harness_template: Option<PathBuf>,
    pub prompt_templates: Option<PathBuf>,
    pub mode: Mode,
    pub provider: ProviderConfig,
}

impl Settings {
    pub fn resolve(flags: &Overrides, gen: &GenFlags) -> Result<Settings> {
        let file = FileConfig::load(flags.config.as_deref())?;
        let r = file.run;
        let defaults = Tolerance::default();
        let s = Settings {
            libs: if flags.libs.is_empty() { r.lib.unwrap_or_default() } else { flags.libs.clone() },
            fb: flags.fb.clone(),
            out: flags.out.clone().or(r.out),
            label: flags.label.clone().or(r.label),
            cycle_time_ms: flags.cycle_time_ms.or(r.cycle_time_ms).unwrap_or(DEFAULT_CYCLE_TIME_MS),
            tolerance: Tolerance {
                atol: flags.atol.or(r.atol).unwrap_or(defaults.atol),
                rtol: flags.rtol.or(r.rtol).unwrap_or(defaults.rtol),
            },
            max_cycles: r.max_cycles.unwrap_or(DEFAULT_MAX_CYCLES),
            jobs: flags.jobs.or(r.jobs).unwrap_or(1),
            fixed_clock: flags.fixed_clock || r.fixed_clock.unwrap_or(false),
            harness_template: r.harness_template,
            prompt_templates: r.prompt_templates,
            mode: gen.mode.or(r.mode).unwrap_or(Mode::Enhanced),
            provider: provider(&file.providers, gen.provider.as_deref().or(r.provider.as_deref()), gen.fixture.clone().or(r.fixture))?,
        };
        if s.cycle_time_ms == 0 {
            bail!("cycle time must be at least 1 ms");
        }
        if s.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        if !(s.tolerance.atol >= 0.0 && s.tolerance.rtol >= 0.0) {
            bail!("tolerances must be non-negative numbers");
        }
        Ok(s)
    }
}

fn provider(table: &BTreeMap<String, ProviderConfig>, name: Option<&str>, fixture: Option<PathBuf>) -> Result<ProviderConfig> {
    let name = name.unwrap_or("openai");
    let mut cfg = match (table.get(name), name) {
        (Some(c), _) => ProviderConfig { id: name.to_string(), ..c.clone() },
        (None, "openai") => ProviderConfig::default(),
        (None, "mock") => ProviderConfig::mock(PathBuf::new()),
        (None, other) => {
            let known: Vec<_> = table.keys().map(String::as_str).chain(["openai", "mock"]).collect();
            bail!("unknown provider `{other}`; known providers: {}", known.join(", "))
        }
    };
    if let Some(f) = fixture {
        cfg.fixture = Some(f);
    }
    if cfg.fixture.as_deref() == Some(Path::new("")) {
        cfg.fixture = None;
    }
    Ok(cfg)
}
