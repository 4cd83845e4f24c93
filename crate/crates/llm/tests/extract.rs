use plctest_core::corpus;
use plctest_core::testspec::{parse_suite, serialize_suite};
use plctest_llm::{extract_csv, NoCsvFound};
use proptest::prelude::*;

#[test]
fn fenced_block_is_returned() {
    let raw = "Sure!\n\n```csv\ntest_name,state,DE,expect_HEX\nzero,1,0,0\n```\nHope this helps, good luck.\n";
    assert_eq!(extract_csv(raw).unwrap(), "test_name,state,DE,expect_HEX\nzero,1,0,0\n");
}

#[test]
fn bare_csv_after_a_sentence_is_cut_out() {
    let raw = "Here are the tests, as requested:\ntest_name,state,DE,expect_HEX\r\nzero,1,0,0\r\nmax,1,32767,7FFF\r\n\r\nThese cover the edges, mostly.";
    assert_eq!(extract_csv(raw).unwrap(), "test_name,state,DE,expect_HEX\nzero,1,0,0\nmax,1,32767,7FFF\n");
}

#[test]
fn prose_apology_has_no_csv() {
    let raw = "I'm sorry, but I cannot produce tests for this block without more context.";
    assert_eq!(extract_csv(raw), Err(NoCsvFound));
    assert_eq!(extract_csv(""), Err(NoCsvFound));
}

#[test]
fn fence_without_header_is_skipped() {
    let raw = "```st\nX := 1;\n```\n```\nTEST_NAME,State,A,expect_Q\nt,1,1,2\n```\n";
    assert_eq!(extract_csv(raw).unwrap(), "TEST_NAME,State,A,expect_Q\nt,1,1,2\n");
}

#[test]
fn first_fence_wins_over_a_longer_bare_run() {
    let raw = "test_name,state,A\na,1,1\nb,1,2\nc,1,3\n\n```csv\ntest_name,state,A\nz,1,9\n```\n";
    assert_eq!(extract_csv(raw).unwrap(), "test_name,state,A\nz,1,9\n");
}

#[test]
fn longest_bare_run_wins() {
    let raw = "test_name,state,A\na,1,1\nthen\ntest_name,state,A\nb,1,1\nb,2,2\n";
    assert_eq!(extract_csv(raw).unwrap(), "test_name,state,A\nb,1,1\nb,2,2\n");
}

#[test]
fn blank_lines_between_cases_are_dropped() {
    let raw = "```csv\ntest_name,state,A,expect_Q\na,1,1,\na,2,,3\n\nb,1,5,5\n```";
    assert_eq!(extract_csv(raw).unwrap(), "test_name,state,A,expect_Q\na,1,1,\na,2,,3\nb,1,5,5\n");
}

#[test]
fn unterminated_fence_runs_to_the_end() {
    let raw = "```csv\ntest_name,state,A\na,1,1";
    assert_eq!(extract_csv(raw).unwrap(), "test_name,state,A\na,1,1\n");
}

#[test]
fn quoted_cells_with_commas_stay_rows() {
    let raw = "test_name,state,S,expect_Q\nc,1,\"'x,y'\",TRUE\nNote, that was all.";
    assert_eq!(extract_csv(raw).unwrap(), "test_name,state,S,expect_Q\nc,1,\"'x,y'\",TRUE\n");
}

#[test]
fn corpus_fixtures_yield_their_suites() {
    for e in corpus::ENTRIES {
        let csv = extract_csv(e.fixture).unwrap_or_else(|_| panic!("{}", e.name));
        let got = parse_suite(&csv, e.name).unwrap();
        let want = parse_suite(e.suite, e.name).unwrap();
        assert_eq!(serialize_suite(&got), serialize_suite(&want), "{}", e.name);
    }
}

fn line() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("test_name,state,A,expect_Q".to_string()),
        Just("```csv".to_string()),
        Just("```".to_string()),
        Just(String::new()),
        "[a-z]{1,6},[0-9]{1,2},[0-9-]{0,3},[A-Z]{0,3}",
        "[a-zA-Z ,.'\"]{0,30}",
        "[a-z]{1,4},\"[a-z ,]{0,6}\",[0-9]",
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn extraction_is_idempotent(lines in prop::collection::vec(line(), 0..16), crlf: bool) {
        let raw = lines.join(if crlf { "\r\n" } else { "\n" });
        if let Ok(once) = extract_csv(&raw) {
            prop_assert_eq!(extract_csv(&once).unwrap(), once.clone());
            prop_assert!(once.ends_with('\n'));
            prop_assert!(!once.contains("```"));
        }
    }
}
