//! Bundled example blocks with reference suites and canned LLM responses.
//!
//! Paths are relative to the crate's `corpus/` directory; the text is
//! embedded so the binary needs no data files at run time.

use crate::frontend::ir::TypedProgram;
use crate::frontend::source::SourceUnit;
use crate::frontend::{compile, FrontendErrors};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Library {
    pub path: &'static str,
    pub source: &'static str,
}

pub const CLAMP: Library = Library { path: "lib/clamp.st", source: include_str!("../corpus/lib/clamp.st") };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusEntry {
    /// Function block name.
    pub name: &'static str,
    pub category: &'static str,
    /// What makes the block hard to test.
    pub challenge: &'static str,
    pub path: &'static str,
    pub source: &'static str,
    pub libraries: &'static [Library],
    /// Hand-written suite with expected values from an independent oracle.
    pub suite: &'static str,
    /// Canned provider response for the mock provider.
    pub fixture: &'static str,
}

macro_rules! entry {
    ($name:literal, $file:literal, $category:literal, $challenge:literal, $libs:expr) => {
        CorpusEntry {
            name: $name,
            category: $category,
            challenge: $challenge,
            path: concat!("blocks/", $file, ".st"),
            source: include_str!(concat!("../corpus/blocks/", $file, ".st")),
            libraries: $libs,
            suite: include_str!(concat!("../corpus/suites/", $file, ".csv")),
            fixture: include_str!(concat!("../corpus/fixtures/", $file, ".txt")),
        }
    };
}

pub const ENTRIES: &[CorpusEntry] = &[
    entry!("DEC_TO_HEX", "dec_to_hex", "conversion", "strings, boundary values, negative inputs", &[]),
    entry!("GEN_SIN", "gen_sin", "signal generation", "REAL outputs over simulated time", &[]),
    entry!("TRAFFIC_CTRL", "traffic_ctrl", "state machine", "state, timers, latched requests", &[]),
    entry!("COUNTER", "counter", "counter", "state, edge detection, saturation", &[]),
    entry!("PI_CTRL", "pi_ctrl", "closed-loop control", "state, REAL tolerance, library function", &[CLAMP]),
    entry!("START_DELAY", "start_delay", "timing", "timer expiry", &[]),
    entry!("VOTE_2OO3", "vote_2oo3", "safety logic", "boolean combinations", &[]),
    entry!("BLINK", "blink", "timing", "free-running timers, early RETURN", &[]),
];

pub fn find(name: &str) -> Option<&'static CorpusEntry> {
    ENTRIES.iter().find(|e| e.name.eq_ignore_ascii_case(name))
}

impl CorpusEntry {
    pub fn unit(&self) -> SourceUnit {
        SourceUnit::new(self.path, self.source)
    }

    /// Compiles the libraries, then the block against them.
    pub fn compile(&self) -> Result<(TypedProgram, Vec<TypedProgram>), FrontendErrors> {
        let libs = self.libraries.iter().map(|l| compile(&SourceUnit::new(l.path, l.source), &[])).collect::<Result<Vec<_>, _>>()?;
        Ok((compile(&self.unit(), &libs)?, libs))
    }
}
