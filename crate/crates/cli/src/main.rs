mod config;
mod pipeline;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::{fs, thread};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use plctest_core::corpus;
use plctest_core::runner::{render_report, ReportFormat, TestReport};

use config::{GenFlags, Overrides, Settings};
use pipeline::{Unit, SUITE_FILE};

/// Generate IEC 61131-3 Structured Text test suites with an LLM, run them on a
/// simulated PLC and report assertions and statement coverage.
///
/// Exit status: 0 when every assertion passed, 1 on failed assertions or
/// faults, 2 when the pipeline itself could not complete.
#[derive(Parser)]
#[command(name = "plctest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prompt a provider for a suite and store it as suite.csv.
    Generate {
        /// Structured Text unit declaring the function block under test (repeatable).
        #[arg(long = "unit", value_name = "FILE", required = true)]
        units: Vec<PathBuf>,
        #[command(flatten)]
        gen: GenFlags,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Run an existing suite and write the report.
    Run {
        #[arg(long, value_name = "FILE")]
        unit: PathBuf,
        #[arg(long, value_name = "CSV")]
        suite: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Generate a suite, then run it, in one run directory.
    Pipeline {
        #[arg(long = "unit", value_name = "FILE", required = true)]
        units: Vec<PathBuf>,
        #[command(flatten)]
        gen: GenFlags,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Bundled example blocks.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// List the bundled blocks with their test challenges.
    List,
    /// Write blocks, libraries, reference suites and mock replies under DIR.
    Export { dir: PathBuf },
}

/// What a finished command says about the code under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Outcome {
    Passed,
    Failed,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Generate { units, gen, flags } => {
            let settings = Settings::resolve(&flags, &gen)?;
            for_each_unit(&units, &settings, |unit, dir, out| {
                let g = pipeline::generate(unit, &settings, dir)?;
                let _ = writeln!(out, "{}: {} case(s) written to {}", unit.fb, g.cases, dir.join(SUITE_FILE).display());
                for w in &g.warnings {
                    let _ = writeln!(out, "warning: {w}");
                }
                Ok(Outcome::Passed)
            })
        }
        Command::Run { unit, suite, flags } => {
            let settings = Settings::resolve(&flags, &GenFlags::default())?;
            let loaded = Unit::load(&unit, &settings)?;
            let dir = loaded.run_dir(&settings);
            let report = pipeline::run(&loaded, &settings, &suite, &dir)?;
            print!("{}", summary(&report, &dir));
            Ok(outcome(&report))
        }
        Command::Pipeline { units, gen, flags } => {
            let settings = Settings::resolve(&flags, &gen)?;
            for_each_unit(&units, &settings, |unit, dir, out| {
                pipeline::generate(unit, &settings, dir)?;
                let report = pipeline::run(unit, &settings, &dir.join(SUITE_FILE), dir)?;
                out.push_str(&summary(&report, dir));
                Ok(outcome(&report))
            })
        }
        Command::Corpus(CorpusCommand::List) => {
            print!("{}", corpus_table());
            Ok(Outcome::Passed)
        }
        Command::Corpus(CorpusCommand::Export { dir }) => {
            export_corpus(&dir)?;
            println!("{} blocks written to {}", corpus::ENTRIES.len(), dir.display());
            Ok(Outcome::Passed)
        }
    }
}

fn outcome(report: &TestReport) -> Outcome {
    if report.all_passed() {
        Outcome::Passed
    } else {
        Outcome::Failed
    }
}

fn summary(report: &TestReport, dir: &Path) -> String {
    format!("{}artifacts: {}\n", render_report(report, ReportFormat::Text), dir.display())
}

/// Runs `job` for every unit on up to `jobs` threads, printing results in
/// unit order. Several units get one subdirectory each under the run directory.
fn for_each_unit<F>(paths: &[PathBuf], settings: &Settings, job: F) -> Result<Outcome>
where
    F: Fn(&Unit, &Path, &mut String) -> Result<Outcome> + Sync,
{
    // per unit: console text and result, filled by whichever worker took it
    type Slot = Mutex<Option<(String, Result<Outcome>)>>;
    let results: Vec<Slot> = paths.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(path) = paths.get(i) else { break };
        let mut out = String::new();
        let result = Unit::load(path, settings).and_then(|unit| {
            let mut dir = unit.run_dir(settings);
            if paths.len() > 1 {
                dir = dir.join(unit.fb.to_ascii_lowercase());
            }
            job(&unit, &dir, &mut out)
        });
        *results[i].lock().unwrap() = Some((out, result));
    };
    thread::scope(|s| {
        for _ in 0..settings.jobs.min(paths.len()) {
            s.spawn(work);
        }
    });

    let mut worst = Outcome::Passed;
    let mut errors = Vec::new();
    for (path, slot) in paths.iter().zip(results) {
        let (out, result) = slot.into_inner().unwrap().expect("every unit is processed");
        print!("{out}");
        match result {
            Ok(o) => worst = worst.max(o),
            Err(e) if paths.len() == 1 => return Err(e),
            Err(e) => errors.push(format!("{}: {e:#}", path.display())),
        }
    }
    if !errors.is_empty() {
        bail!("{} of {} units failed:\n{}", errors.len(), paths.len(), errors.join("\n"));
    }
    Ok(worst)
}

fn corpus_table() -> String {
    let rows: Vec<[&str; 4]> = corpus::ENTRIES.iter().map(|e| [e.name, e.category, e.challenge, e.path]).collect();
    let header = ["NAME", "CATEGORY", "CHALLENGE", "PATH"];
    let widths: Vec<usize> = (0..4).map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap()).collect();
    let line = |r: [&str; 4]| {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("{}\n", cells.join("  ").trim_end())
    };
    std::iter::once(header).chain(rows).map(line).collect()
}

fn export_corpus(dir: &Path) -> Result<()> {
    let write = |rel: String, text: &str| -> Result<()> {
        let path = dir.join(rel);
        fs::create_dir_all(path.parent().unwrap())?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    for e in corpus::ENTRIES {
        let stem = e.name.to_ascii_lowercase();
        write(e.path.to_string(), e.source)?;
        write(format!("suites/{stem}.csv"), e.suite)?;
        write(format!("fixtures/{stem}.txt"), e.fixture)?;
        for l in e.libraries {
            write(l.path.to_string(), l.source)?;
        }
    }
    Ok(())
}
