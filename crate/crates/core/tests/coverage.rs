use std::collections::BTreeMap;
use std::sync::Arc;

use plctest_core::coverage::*;
use plctest_core::frontend::ast::StmtId;
use plctest_core::frontend::compile;
use plctest_core::frontend::ir::TypedProgram;
use plctest_core::frontend::source::SourceUnit;
use plctest_core::runtime::{execute_cycle, instantiate, ExecTrace, SimClock, TraceEntry};
use plctest_core::value::Value;
use proptest::prelude::*;

const TEN: &str = "FUNCTION_BLOCK TEN
VAR_INPUT A : INT; END_VAR
VAR_OUTPUT Q : INT; END_VAR
Q := 0;
IF A > 0 THEN
  Q := 1;
  Q := Q + 1;
ELSIF A < 0 THEN
  Q := -1;
END_IF;
Q := Q * 2;
Q := Q + 3;
Q := Q - 1;
Q := ABS(Q);
END_FUNCTION_BLOCK
";

fn compiled(src: &SourceUnit) -> TypedProgram {
    compile(src, &[]).unwrap_or_else(|e| panic!("{}", e.render()))
}

fn trace(pou: &str, ids: &[u32]) -> ExecTrace {
    let pou: Arc<str> = pou.into();
    ExecTrace { entries: ids.iter().map(|&i| TraceEntry { pou: pou.clone(), id: StmtId(i) }).collect() }
}

fn run(prog: &TypedProgram, fb: &str, scans: &[BTreeMap<String, Value>]) -> CoverageMap {
    let mut inst = instantiate(prog, fb).unwrap();
    let mut clock = SimClock::new(10);
    let mut map = CoverageMap::for_program(prog);
    for ins in scans {
        map.accumulate(&execute_cycle(prog, &mut inst, ins, &mut clock).unwrap().trace).unwrap();
    }
    map
}

fn a(v: i16) -> BTreeMap<String, Value> {
    BTreeMap::from([("A".to_string(), Value::Int(v))])
}

#[test]
fn empty_trace_leaves_map_unchanged() {
    let prog = compiled(&SourceUnit::new("ten.st", TEN));
    let mut map = CoverageMap::for_program(&prog);
    let before = map.clone();
    map.accumulate(&ExecTrace::default()).unwrap();
    assert_eq!(map, before);
}

#[test]
fn trace_counts_occurrences() {
    let prog = compiled(&SourceUnit::new("ten.st", TEN));
    let map = accumulate(&CoverageMap::for_program(&prog), &trace("TEN", &[0, 1, 1])).unwrap();
    let counts = map.pou("TEN").unwrap();
    assert_eq!(counts[&StmtId(0)], 1);
    assert_eq!(counts[&StmtId(1)], 2);
    assert!(counts.iter().filter(|(id, _)| id.0 > 1).all(|(_, n)| *n == 0));
    assert_eq!(counts.len(), 10);
}

#[test]
fn foreign_statement_is_rejected() {
    let prog = compiled(&SourceUnit::new("ten.st", TEN));
    let mut map = CoverageMap::for_program(&prog);
    let before = map.clone();
    let err = map.accumulate(&trace("TEN", &[0, 99])).unwrap_err();
    assert_eq!(err, CoverageError::ForeignStatement { pou: "TEN".into(), id: StmtId(99) });
    assert_eq!(map, before);
    assert!(map.accumulate(&trace("OTHER", &[0])).is_err());
}

#[test]
fn seven_of_ten_is_seventy_percent() {
    let prog = compiled(&SourceUnit::new("ten.st", TEN));
    // A = 1 skips the ELSIF guard and its body
    let map = run(&prog, "TEN", &[a(1)]);
    let s = summarize(&map, &prog, "TEN").unwrap();
    assert_eq!((s.unit.statements_total, s.unit.statements_hit), (10, 8));
    let map = run(&prog, "TEN", &[a(0)]);
    let s = summarize(&map, &prog, "TEN").unwrap();
    // both guards evaluate, neither body runs
    assert_eq!(s.unit.statements_hit, 7);

    let mut hand = CoverageMap::for_program(&prog);
    hand.accumulate(&trace("TEN", &[0, 1, 2, 3, 4, 5, 6])).unwrap();
    let s = summarize(&hand, &prog, "TEN").unwrap();
    assert_eq!(s.unit.percentage.to_string(), "70.00");
    assert_eq!(serde_json::to_value(s.unit.percentage).unwrap(), serde_json::json!("70.00"));
}

#[test]
fn all_branches_give_full_coverage() {
    let prog = compiled(&SourceUnit::new("ten.st", TEN));
    let map = run(&prog, "TEN", &[a(1), a(-1)]);
    assert_eq!(summarize(&map, &prog, "TEN").unwrap().unit.percentage.to_string(), "100.00");
}

#[test]
fn no_scans_is_zero_percent() {
    let prog = compiled(&SourceUnit::new("ten.st", TEN));
    let s = summarize(&CoverageMap::for_program(&prog), &prog, "TEN").unwrap();
    assert_eq!(s.unit.percentage, Percent(0));
    assert_eq!(s.unit.percentage.to_string(), "0.00");
}

#[test]
fn unknown_unit_is_an_error() {
    let prog = compiled(&SourceUnit::new("ten.st", TEN));
    let map = CoverageMap::for_program(&prog);
    assert_eq!(summarize(&map, &prog, "NOPE"), Err(CoverageError::UnknownPou("NOPE".into())));
    assert!(summarize(&map, &prog, "TON").is_err());
}

#[test]
fn headline_excludes_other_pous() {
    let src = SourceUnit::new(
        "h.st",
        "FUNCTION_BLOCK U VAR_OUTPUT Q : INT; END_VAR Q := 1; END_FUNCTION_BLOCK
         FUNCTION_BLOCK H VAR u : U; X : INT; END_VAR u(); X := 1; IF X = 2 THEN X := 3; END_IF; END_FUNCTION_BLOCK",
    );
    let prog = compiled(&src);
    let map = run(&prog, "H", &[BTreeMap::new()]);
    let s = summarize(&map, &prog, "U").unwrap();
    assert_eq!(s.unit.percentage.to_string(), "100.00");
    let h = s.pous.iter().find(|p| p.pou == "H").unwrap();
    assert_eq!((h.statements_total, h.statements_hit), (4, 3));
}

#[test]
fn annotated_marks_uncovered_branch() {
    let src = SourceUnit::new("ten.st", TEN);
    let prog = compiled(&src);
    let map = run(&prog, "TEN", &[a(1), a(1)]);
    let text = render_annotated(&map, &prog, &src);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "        -:    0:Source:ten.st");
    assert_eq!(lines[1], "        -:    1:FUNCTION_BLOCK TEN");
    assert_eq!(lines[4], "        2:    4:Q := 0;");
    assert_eq!(lines[8], "    #####:    8:ELSIF A < 0 THEN");
    assert_eq!(lines[9], "    #####:    9:  Q := -1;");
    assert_eq!(lines[10], "        -:   10:END_IF;");
    assert_eq!(text.matches("#####").count(), 2);

    let full = run(&prog, "TEN", &[a(1), a(-1)]);
    assert!(!render_annotated(&full, &prog, &src).contains("#####"));
}

#[test]
fn lcov_uses_max_count_per_line() {
    let src = SourceUnit::new(
        "l.st",
        "FUNCTION_BLOCK L VAR_OUTPUT Q : INT; END_VAR VAR I : INT; END_VAR\nQ := 0;\nFOR I := 1 TO 2 DO Q := Q + 1; END_FOR;\nIF Q > 5 THEN\nQ := 0;\nEND_IF;\nEND_FUNCTION_BLOCK\n",
    );
    let prog = compiled(&src);
    let map = run(&prog, "L", &[BTreeMap::new()]);
    // line 3: FOR checked 3 times, body twice → 3
    assert_eq!(render_lcov(&map, &prog, &src), "SF:l.st\nDA:2,1\nDA:3,3\nDA:4,1\nDA:5,0\nLF:4\nLH:3\nend_of_record\n");
}

#[test]
fn lcov_full_coverage_counts_lines() {
    let src = SourceUnit::new(
        "f.st",
        "FUNCTION_BLOCK F VAR_OUTPUT Q : INT; END_VAR\nQ := 1;\nQ := 2;\nQ := 3;\nQ := 4;\nQ := 5;\nEND_FUNCTION_BLOCK\n",
    );
    let prog = compiled(&src);
    let lcov = render_lcov(&run(&prog, "F", &[BTreeMap::new()]), &prog, &src);
    assert!(lcov.contains("LF:5\nLH:5\n"));
}

#[test]
fn rebase_pairs_sites_by_position() {
    let unit = SourceUnit::new("ten.st", TEN);
    let standalone = compiled(&unit);
    let bigger = SourceUnit::new("all.st", format!("FUNCTION_BLOCK PRE VAR X : INT; END_VAR X := 1; X := 2; END_FUNCTION_BLOCK\n{TEN}"));
    let embedded = compiled(&bigger);
    let map = run(&embedded, "TEN", &[a(1)]);
    let rebased = map.rebase(&embedded, &standalone);
    assert_eq!(rebased, run(&standalone, "TEN", &[a(1)]));
}

proptest! {
    #[test]
    fn accumulation_is_commutative_and_monotone(t1 in proptest::collection::vec(0u32..10, 0..30), t2 in proptest::collection::vec(0u32..10, 0..30)) {
        let prog = compiled(&SourceUnit::new("ten.st", TEN));
        let m = CoverageMap::for_program(&prog);
        let (t1, t2) = (trace("TEN", &t1), trace("TEN", &t2));
        let ab = accumulate(&accumulate(&m, &t1).unwrap(), &t2).unwrap();
        let ba = accumulate(&accumulate(&m, &t2).unwrap(), &t1).unwrap();
        prop_assert_eq!(&ab, &ba);
        let a1 = accumulate(&m, &t1).unwrap();
        let before = a1.pou("TEN").unwrap();
        let after = ab.pou("TEN").unwrap();
        prop_assert!(before.iter().all(|(id, n)| after[id] >= *n));
        let p1 = summarize(&a1, &prog, "TEN").unwrap();
        let p2 = summarize(&ab, &prog, "TEN").unwrap();
        prop_assert!(p2.unit.percentage >= p1.unit.percentage);
        prop_assert_eq!(p2.unit.statements_hit, after.values().filter(|n| **n > 0).count() as u64);
        prop_assert!(p2.unit.statements_hit <= p2.unit.statements_total);
    }

    #[test]
    fn percent_is_nearest_hundredth(part in 0u64..5000, extra in 0u64..5000) {
        let whole = part + extra;
        prop_assume!(whole > 0);
        let p = Percent::of(part, whole).0 as i128;
        // in units of 1/(2*whole) hundredths: exact value is 20000*part
        let twice_exact = 20_000 * part as i128;
        let twice_p = 2 * p * whole as i128;
        prop_assert!((twice_exact - twice_p).abs() <= whole as i128);
        if (twice_exact - twice_p).abs() == whole as i128 {
            prop_assert!(twice_p > twice_exact, "halves round up");
        }
    }
}
