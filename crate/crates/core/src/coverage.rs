//! Statement coverage: hit counts per statement site, summaries and
//! line-oriented renderings.
//!
//! The map is keyed by POU name and [`StmtId`]. Line renderings collapse
//! sites sharing a start line to the maximum count on that line.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::frontend::ast::StmtId;
use crate::frontend::ir::{TypedPou, TypedProgram};
use crate::frontend::source::SourceUnit;
use crate::runtime::ExecTrace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("statement {id} of {pou} is outside the coverage domain", id = id.0)]
    ForeignStatement { pou: String, id: StmtId },
    #[error("unknown POU {0}")]
    UnknownPou(String),
}

/// Hit counts with every site of every covered POU present, zero or not.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageMap {
    pous: BTreeMap<String, BTreeMap<StmtId, u64>>,
}

impl CoverageMap {
    pub fn new() -> CoverageMap {
        CoverageMap::default()
    }

    /// Zero counts for every POU of `prog` that has statements.
    pub fn for_program(prog: &TypedProgram) -> CoverageMap {
        let mut m = CoverageMap::new();
        for p in &prog.pous {
            m.add_pou(p);
        }
        m
    }

    pub fn add_pou(&mut self, pou: &TypedPou) {
        if pou.builtin.is_some() {
            return;
        }
        let entry = self.pous.entry(pou.name.clone()).or_default();
        for s in &pou.sites {
            entry.entry(s.id).or_insert(0);
        }
    }

    pub fn pou(&self, name: &str) -> Option<&BTreeMap<StmtId, u64>> {
        self.pous.get(name)
    }

    pub fn pous(&self) -> impl Iterator<Item = (&str, &BTreeMap<StmtId, u64>)> {
        self.pous.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Adds each traced site's occurrences. The map is unchanged on error.
    pub fn accumulate(&mut self, trace: &ExecTrace) -> Result<(), CoverageError> {
        for e in &trace.entries {
            if !self.pous.get(&*e.pou).is_some_and(|m| m.contains_key(&e.id)) {
                return Err(CoverageError::ForeignStatement { pou: e.pou.to_string(), id: e.id });
            }
        }
        let mut last: Option<(&str, &mut BTreeMap<StmtId, u64>)> = None;
        for e in &trace.entries {
            let counts = match &mut last {
                Some((name, m)) if *name == &*e.pou => m,
                _ => {
                    let m = self.pous.get_mut(&*e.pou).expect("checked above");
                    last = Some((&e.pou, m));
                    &mut last.as_mut().expect("just set").1
                }
            };
            *counts.get_mut(&e.id).expect("checked above") += 1;
        }
        Ok(())
    }

    /// Adds another map's counts; POUs unknown here are added.
    pub fn merge(&mut self, other: &CoverageMap) {
        for (pou, counts) in &other.pous {
            let mine = self.pous.entry(pou.clone()).or_default();
            for (id, n) in counts {
                *mine.entry(*id).or_insert(0) += n;
            }
        }
    }

    /// Transfers counts onto `to`'s local POUs, pairing sites of same-named
    /// POUs by position. Used when the executed program embeds the unit
    /// under a different numbering.
    pub fn rebase(&self, from: &TypedProgram, to: &TypedProgram) -> CoverageMap {
        let mut out = CoverageMap::new();
        for p in to.local_pous() {
            out.add_pou(p);
            let (Some(src), Some(counts)) = (from.pou(&p.name), self.pous.get(&p.name)) else {
                continue;
            };
            let dst = out.pous.get_mut(&p.name).expect("just added");
            for (a, b) in src.sites.iter().zip(&p.sites) {
                if let Some(n) = counts.get(&a.id) {
                    dst.insert(b.id, *n);
                }
            }
        }
        out
    }
}

/// Functional form of [`CoverageMap::accumulate`].
pub fn accumulate(map: &CoverageMap, trace: &ExecTrace) -> Result<CoverageMap, CoverageError> {
    let mut m = map.clone();
    m.accumulate(trace)?;
    Ok(m)
}

/// A percentage with two decimals, stored in hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub u32);

impl Percent {
    /// `round(100 × part / whole, 2)` rounding half up; 0.00 when `whole` is 0.
    pub fn of(part: u64, whole: u64) -> Percent {
        if whole == 0 {
            return Percent(0);
        }
        Percent(((20_000 * part as u128 + whole as u128) / (2 * whole as u128)) as u32)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PouCoverage {
    pub pou: String,
    pub statements_total: u64,
    pub statements_hit: u64,
    pub percentage: Percent,
}

impl PouCoverage {
    fn from_counts(pou: &str, counts: &BTreeMap<StmtId, u64>) -> PouCoverage {
        let total = counts.len() as u64;
        let hit = counts.values().filter(|n| **n > 0).count() as u64;
        PouCoverage { pou: pou.to_string(), statements_total: total, statements_hit: hit, percentage: Percent::of(hit, total) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageSummary {
    /// Every POU in the map, by name.
    pub pous: Vec<PouCoverage>,
    /// Headline figure: the unit under test alone.
    pub unit: PouCoverage,
}

pub fn summarize(map: &CoverageMap, prog: &TypedProgram, unit_under_test: &str) -> Result<CoverageSummary, CoverageError> {
    let pou =
        prog.pou(unit_under_test).filter(|p| p.builtin.is_none()).ok_or_else(|| CoverageError::UnknownPou(unit_under_test.to_string()))?;
    let mut domain = CoverageMap::new();
    domain.add_pou(pou);
    domain.merge(map);
    let unit = PouCoverage::from_counts(&pou.name, &domain.pous[&pou.name]);
    Ok(CoverageSummary { pous: map.pous().map(|(n, c)| PouCoverage::from_counts(n, c)).collect(), unit })
}

/// Max hit count per executable line of `prog`'s local POUs.
fn line_counts(map: &CoverageMap, prog: &TypedProgram) -> BTreeMap<u32, u64> {
    let mut lines = BTreeMap::new();
    for p in prog.local_pous() {
        let counts = map.pou(&p.name);
        for s in &p.sites {
            let n = counts.and_then(|c| c.get(&s.id)).copied().unwrap_or(0);
            let e = lines.entry(s.span.start_pos.line).or_insert(0);
            *e = (*e).max(n);
        }
    }
    lines
}

/// Source listing in the style `count:line:text`. Uncovered executable
/// lines show `#####`, lines without statements show `-`.
pub fn render_annotated(map: &CoverageMap, prog: &TypedProgram, src: &SourceUnit) -> String {
    let lines = line_counts(map, prog);
    let mut out = format!("{:>9}:{:>5}:Source:{}\n", "-", 0, src.origin());
    for (n, text) in src.lines() {
        let mark = match lines.get(&(n as u32)) {
            None => "-".to_string(),
            Some(0) => "#####".to_string(),
            Some(c) => c.to_string(),
        };
        out.push_str(&format!("{mark:>9}:{n:>5}:{text}\n"));
    }
    out
}

/// LCOV tracefile with one record for `src`.
pub fn render_lcov(map: &CoverageMap, prog: &TypedProgram, src: &SourceUnit) -> String {
    let lines = line_counts(map, prog);
    let mut out = format!("SF:{}\n", src.origin());
    for (line, n) in &lines {
        out.push_str(&format!("DA:{line},{n}\n"));
    }
    let hit = lines.values().filter(|n| **n > 0).count();
    out.push_str(&format!("LF:{}\nLH:{hit}\nend_of_record\n", lines.len()));
    out
}
