use plctest_core::corpus::{self, CorpusEntry};
use plctest_core::frontend::source::SourceUnit;
use plctest_core::harness::Tolerance;
use plctest_core::runner::*;
use plctest_core::testspec::{parse_suite, validate, CheckedSuite};
use plctest_core::value::Value;

fn checked(entry: &CorpusEntry, csv: &str) -> CheckedSuite {
    let (prog, _) = entry.compile().unwrap();
    let suite = parse_suite(csv, entry.name).unwrap();
    validate(&suite, &prog).unwrap_or_else(|e| panic!("{e:?}"))
}

fn libs(entry: &CorpusEntry) -> Vec<SourceUnit> {
    entry.libraries.iter().map(|l| SourceUnit::new(l.path, l.source)).collect()
}

fn run_at(entry: &CorpusEntry, csv: &str, cycle_time_ms: u32) -> SuiteRun {
    let cfg = RunConfig { cycle_time_ms, ..RunConfig::default() };
    run_suite(&entry.unit(), &libs(entry), &checked(entry, csv), &cfg).unwrap_or_else(|e| panic!("{e}"))
}

fn run(entry: &CorpusEntry, csv: &str) -> SuiteRun {
    run_at(entry, csv, DEFAULT_CYCLE_TIME_MS)
}

#[test]
fn reference_suites_pass_and_cover_their_blocks() {
    for entry in corpus::ENTRIES {
        let r = run(entry, entry.suite).report;
        let failing: Vec<_> = r.cases.iter().filter(|c| c.verdict != Verdict::Pass).map(|c| c.name.as_str()).collect();
        if entry.name == "DEC_TO_HEX" {
            assert_eq!(failing, ["negative_one"], "{}", render_report(&r, ReportFormat::Text));
        } else {
            assert!(failing.is_empty(), "{}", render_report(&r, ReportFormat::Text));
        }
        assert_eq!(r.metrics.statement_coverage_pct.to_string(), "100.00", "{}", render_report(&r, ReportFormat::Text));
    }
}

#[test]
fn dec_to_hex_negative_bug_is_reported_with_actual_value() {
    let entry = corpus::find("DEC_TO_HEX").unwrap();
    let r = run(entry, entry.suite).report;
    assert_eq!(r.metrics.assertions_total, 6);
    assert_eq!(r.metrics.assertions_passed, 5);
    assert_eq!(r.metrics.assertion_success_pct.to_string(), "83.33");
    let neg = r.cases.iter().find(|c| c.name == "negative_one").unwrap();
    assert_eq!(
        neg.failures,
        vec![FailedAssertion { state: 1, variable: "HEX".into(), expected: "'FFFFFFFF'".into(), actual: "'1'".into() }]
    );
    assert!(!r.all_passed());
}

#[test]
fn correct_dec_to_hex_suite_scores_full_marks() {
    let entry = corpus::find("DEC_TO_HEX").unwrap();
    let csv =
        "test_name,state,DE,expect_HEX\nz,1,0,0\nm,1,255,FF\np,1,4096,1000\nhi,1,32767,7FFF\nhi1,1,32768,8000\nbig,1,305419896,12345678\n";
    let r = run(entry, csv).report;
    assert_eq!(r.metrics.statement_coverage_pct.to_string(), "100.00");
    assert_eq!(r.metrics.assertion_success_pct.to_string(), "100.00");
    assert!(r.all_passed());
}

#[test]
fn corrupting_one_expectation_costs_one_assertion() {
    let entry = corpus::find("COUNTER").unwrap();
    let good = run(entry, entry.suite).report;
    let bad = run(entry, &entry.suite.replace("saturate,9,TRUE,,,5,TRUE", "saturate,9,TRUE,,,4,TRUE")).report;
    assert_eq!(good.metrics.assertions_passed, bad.metrics.assertions_passed + 1);
    let failing: Vec<_> = bad.cases.iter().filter(|c| c.verdict == Verdict::Fail).collect();
    assert_eq!(failing.len(), 1);
    assert_eq!(failing[0].name, "saturate");
    assert_eq!(failing[0].failures[0].state, 9);
}

#[test]
fn faulting_case_is_isolated() {
    let src = SourceUnit::new(
        "ratio.st",
        "FUNCTION_BLOCK RATIO VAR_INPUT A : INT; B : INT; END_VAR VAR_OUTPUT Q : INT; END_VAR Q := A / B; END_FUNCTION_BLOCK",
    );
    let prog = plctest_core::frontend::compile(&src, &[]).unwrap();
    let csv = "test_name,state,A,B,expect_Q\nok,1,6,3,2\nboom,1,1,0,0\nok2,1,9,3,3\n";
    let suite = validate(&parse_suite(csv, "RATIO").unwrap(), &prog).unwrap();
    let r = run_suite(&src, &[], &suite, &RunConfig::default()).unwrap().report;
    let verdicts: Vec<_> = r.cases.iter().map(|c| c.verdict).collect();
    assert_eq!(verdicts, [Verdict::Pass, Verdict::Fault, Verdict::Pass]);
    assert!(r.cases[1].fault.as_deref().unwrap().contains("division by zero"));
    assert_eq!(r.metrics.assertions_total, 3);
    assert_eq!(r.metrics.assertions_passed, 2);
}

#[test]
fn timer_dwell_decides_expiry() {
    let entry = corpus::find("START_DELAY").unwrap();
    let csv = |dwell: u32| format!("test_name,state,START,expect_RUN,dwell_cycles\nrun,1,TRUE,TRUE,{dwell}\n");
    let verdict = |dwell| run_at(entry, &csv(dwell), 50).report.cases[0].verdict;
    assert_eq!(verdict(10), Verdict::Pass);
    assert_eq!(verdict(5), Verdict::Fail);
    // at 50 ms, 8 calls reach t = 350 ms and 9 reach 400 ms
    assert_eq!(verdict(8), Verdict::Fail);
    assert_eq!(verdict(9), Verdict::Pass);
}

#[test]
fn scans_stop_once_every_case_is_done() {
    let entry = corpus::find("START_DELAY").unwrap();
    let r = run(entry, entry.suite).report;
    // longest case dwells 45 scans, checked on the 46th
    assert_eq!(r.metadata.cycles_executed, 46);
    assert_eq!(r.metadata.cycle_time_ms, 10);
}

#[test]
fn compare_policy() {
    let tol = Tolerance { atol: 1e-3, rtol: 0.0 };
    let w = lambert_w1();
    assert!((w - 0.567_143_290_409_783_8).abs() < 1e-12);
    assert!(compare(&Value::Real(0.5671), &Value::Real(w as f32), tol).unwrap().passed);
    assert!(!compare(&Value::Real(0.5671), &Value::Real(w as f32), Tolerance::default()).unwrap().passed);
    let s = |t: &str| Value::String(t.into());
    let c = compare(&s("8000"), &s("8000"), tol).unwrap();
    assert!(c.passed);
    assert_eq!(c.detail, "expected '8000', actual '8000'");
    assert!(compare(&Value::Bool(true), &Value::Int(1), tol).is_err());
    assert!(compare(&Value::Int(7), &Value::Dint(7), tol).unwrap().passed);
}

/// W(1) by Newton iteration on w·e^w − 1.
fn lambert_w1() -> f64 {
    let mut w = 0.5f64;
    for _ in 0..50 {
        let f = w * w.exp() - 1.0;
        w -= f / (w.exp() * (w + 1.0));
    }
    w
}

#[test]
fn reports_render_in_both_formats() {
    let entry = corpus::find("COUNTER").unwrap();
    let r = run(entry, entry.suite).report;
    let text = render_report(&r, ReportFormat::Text);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2 + r.cases.len() + 4);
    assert!(lines[1].starts_with("case "));
    assert!(text.contains("statement coverage: 100.00%"));
    let json: serde_json::Value = serde_json::from_str(&render_report(&r, ReportFormat::Json)).unwrap();
    assert_eq!(json["schema"], 1);
    assert_eq!(json["metrics"]["cases_total"], 6);
    assert_eq!(json["metrics"]["assertion_success_pct"], "100.00");
    let again = serde_json::to_string_pretty(&json).unwrap();
    assert_eq!(serde_json::from_str::<serde_json::Value>(&again).unwrap(), json);
}

#[test]
fn suite_without_expectations_reports_na() {
    let entry = corpus::find("VOTE_2OO3").unwrap();
    let (prog, _) = entry.compile().unwrap();
    let suite = parse_suite("test_name,state,A,expect_Q\nonly_inputs,1,TRUE,\n", "VOTE_2OO3").unwrap();
    let (checked, warnings) = plctest_core::testspec::validate_lenient(&suite, &prog).unwrap();
    assert_eq!(warnings.len(), 1);
    let r = run_suite(&entry.unit(), &[], &checked, &RunConfig::default()).unwrap().report;
    assert_eq!(r.metrics.assertion_success_pct.to_string(), "n/a");
    assert!(render_report(&r, ReportFormat::Text).contains("assertions passed: 0/0 (n/a)\n"));
    assert_eq!(r.cases[0].verdict, Verdict::Pass);
}
