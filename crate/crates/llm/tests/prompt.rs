use plctest_core::corpus;
use plctest_core::testspec::parse_suite;
use plctest_llm::prompt::{build_prompt_with, PromptTemplates, ENHANCED_GROUPS};
use plctest_llm::{build_prompt, InterfaceSummary, Mode};
use proptest::prelude::*;

fn summary(name: &str) -> (InterfaceSummary, &'static str) {
    let e = corpus::find(name).unwrap();
    let (prog, _) = e.compile().unwrap();
    (InterfaceSummary::of(&prog, e.name, 10).unwrap(), e.source)
}

#[test]
fn simple_prompt_has_no_enhanced_groups() {
    let (s, src) = summary("DEC_TO_HEX");
    let b = build_prompt(src, &s, Mode::Simple);
    for g in ENHANCED_GROUPS {
        assert!(!b.text().contains(g), "{g}");
    }
    assert!(b.instructions.to_lowercase().contains("generate test cases"));
    assert!(b.format_spec.contains("test_name,state,DE,expect_HEX,dwell_cycles"));
}

#[test]
fn enhanced_prompt_lists_the_interface_columns() {
    let (s, src) = summary("DEC_TO_HEX");
    assert_eq!(s.inputs, [("DE".to_string(), "DINT".to_string())]);
    assert_eq!(s.outputs.len(), 1);
    assert_eq!(s.outputs[0].0, "HEX");
    assert!(s.outputs[0].1.starts_with("STRING"));
    let b = build_prompt(src, &s, Mode::Enhanced);
    for g in ENHANCED_GROUPS {
        assert!(b.instructions.contains(g), "{g}");
    }
    assert!(b.format_spec.contains("\n- DE: "));
    assert!(b.format_spec.contains("\n- expect_HEX: "));
}

#[test]
fn enhanced_prompt_asks_for_multi_state_cases() {
    let (s, src) = summary("PI_CTRL");
    let b = build_prompt(src, &s, Mode::Enhanced);
    assert!(b.text().contains("several states"));
    assert!(b.format_spec.contains("\n- state: "));
    assert!(b.format_spec.contains("One scan lasts 10 ms"));
}

#[test]
fn modes_differ_by_exactly_the_three_groups() {
    for e in corpus::ENTRIES {
        let (s, src) = summary(e.name);
        let simple = build_prompt(src, &s, Mode::Simple).text();
        let enhanced = build_prompt(src, &s, Mode::Enhanced).text();
        let paragraphs = |t: &str| t.split("\n\n").map(str::to_string).collect::<Vec<_>>();
        let (simple, enhanced) = (paragraphs(&simple), paragraphs(&enhanced));
        let extra: Vec<_> = enhanced.iter().filter(|p| !simple.contains(p)).collect();
        assert_eq!(extra.len(), 3, "{}", e.name);
        for (p, g) in extra.iter().zip(ENHANCED_GROUPS) {
            assert!(p[3..].starts_with(g), "{p}");
        }
        let rest: Vec<_> = enhanced.iter().filter(|p| simple.contains(p)).cloned().collect();
        assert_eq!(rest, simple);
    }
}

#[test]
fn parts_are_concatenated_in_order() {
    let (s, src) = summary("COUNTER");
    let b = build_prompt(src, &s, Mode::Enhanced);
    let text = b.text();
    let i = text.find(&b.instructions).unwrap();
    let f = text.find(&b.format_spec).unwrap();
    let c = text.rfind(&b.code).unwrap();
    assert!(i < f && f < c);
    assert!(text.ends_with("END_FUNCTION_BLOCK\n"));
}

#[test]
fn format_header_is_what_the_parser_accepts() {
    for e in corpus::ENTRIES {
        let (s, _) = summary(e.name);
        let blanks = ",".repeat(s.inputs.len() + s.outputs.len());
        let suite = parse_suite(&format!("{}\nt,1{blanks},1\n", s.header()), e.name).unwrap();
        assert_eq!(suite.inputs.len(), s.inputs.len());
        assert_eq!(suite.outputs.len(), s.outputs.len());
        assert!(suite.dwell_column);
    }
}

#[test]
fn templates_can_be_overridden_per_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("instructions_simple.txt"), "Test {FB_NAME} please.\n").unwrap();
    let t = PromptTemplates::from_dir(dir.path()).unwrap();
    assert_eq!(t.enhanced, PromptTemplates::default().enhanced);
    let (s, src) = summary("BLINK");
    let b = build_prompt_with(&t, src, &s, Mode::Simple);
    assert_eq!(b.instructions, "Test BLINK please.\n");
}

proptest! {
    #[test]
    fn prompts_are_deterministic(i in 0..corpus::ENTRIES.len(), enhanced: bool, cycle in 1u64..1000) {
        let e = &corpus::ENTRIES[i];
        let mode = if enhanced { Mode::Enhanced } else { Mode::Simple };
        let (prog, _) = e.compile().unwrap();
        let a = build_prompt(e.source, &InterfaceSummary::of(&prog, e.name, cycle).unwrap(), mode);
        let (prog, _) = e.compile().unwrap();
        let b = build_prompt(e.source, &InterfaceSummary::of(&prog, e.name, cycle).unwrap(), mode);
        prop_assert_eq!(a.text(), b.text());
        for slot in ["{FB_NAME}", "{HEADER}", "{INPUT_LINES}", "{OUTPUT_LINES}", "{CYCLE_TIME_MS}", "{EXAMPLE_ROW}"] {
            prop_assert!(!a.text().contains(slot), "{} left in prompt", slot);
        }
    }
}
