use std::collections::BTreeMap;
use std::ops::ControlFlow;

use plctest_core::frontend::ast::StmtId;
use plctest_core::frontend::compile;
use plctest_core::frontend::ir::TypedProgram;
use plctest_core::frontend::source::SourceUnit;
use plctest_core::runtime::*;
use plctest_core::value::Value;
use proptest::prelude::*;

fn program(src: &str) -> TypedProgram {
    compile(&SourceUnit::new("t.st", src), &[]).unwrap_or_else(|e| panic!("{}", e.render()))
}

fn inputs(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

const TIMER_FB: &str = "
FUNCTION_BLOCK TIMED
VAR_INPUT IN : BOOL; PT : TIME; END_VAR
VAR_OUTPUT Q : BOOL; ET : TIME; END_VAR
VAR t : TON; END_VAR
t(IN := IN, PT := PT);
Q := t.Q;
ET := t.ET;
END_FUNCTION_BLOCK
FUNCTION_BLOCK OFFD
VAR_INPUT IN : BOOL; PT : TIME; END_VAR
VAR_OUTPUT Q : BOOL; END_VAR
VAR t : TOF; END_VAR
t(IN := IN, PT := PT, Q => Q);
END_FUNCTION_BLOCK
";

/// Reference on-delay timer written from the standard's definition: a row
/// per scan of (now, IN, start, ET, Q).
fn ton_reference(pt: i64, cycle: i64, ins: &[bool]) -> Vec<(i64, bool, Option<i64>, i64, bool)> {
    let mut start: Option<i64> = None;
    let mut rows = Vec::new();
    for (k, &input) in ins.iter().enumerate() {
        let now = k as i64 * cycle;
        if !input {
            start = None;
            rows.push((now, input, None, 0, false));
            continue;
        }
        let s = *start.get_or_insert(now);
        let et = (now - s).min(pt);
        rows.push((now, input, Some(s), et, et == pt));
    }
    rows
}

#[test]
fn ton_reference_table_for_100ms_at_50ms() {
    let table = ton_reference(100, 50, &[true, true, true, true]);
    assert_eq!(
        table,
        vec![
            (0, true, Some(0), 0, false),
            (50, true, Some(0), 50, false),
            (100, true, Some(0), 100, true),
            (150, true, Some(0), 100, true),
        ]
    );
}

#[test]
fn ton_q_rises_on_third_scan() {
    let prog = program(TIMER_FB);
    let mut inst = instantiate(&prog, "TIMED").unwrap();
    let mut clock = SimClock::new(50);
    let ins = inputs(&[("IN", Value::Bool(true)), ("PT", Value::Time(100))]);
    let qs: Vec<Value> = (0..3).map(|_| execute_cycle(&prog, &mut inst, &ins, &mut clock).unwrap().outputs["Q"].clone()).collect();
    assert_eq!(qs, vec![Value::Bool(false), Value::Bool(false), Value::Bool(true)]);
}

#[test]
fn instantiate_applies_initializers_and_defaults() {
    let prog = program(
        "FUNCTION_BLOCK CNT VAR_INPUT UP : BOOL; END_VAR VAR_OUTPUT C : DINT; END_VAR VAR N : DINT := 5; S : STRING; R : REAL; END_VAR C := C + N; END_FUNCTION_BLOCK",
    );
    let inst = instantiate(&prog, "CNT").unwrap();
    assert_eq!(inst.get("N"), Some(&Value::Dint(5)));
    assert_eq!(inst.get("C"), Some(&Value::Dint(0)));
    assert_eq!(inst.get("UP"), Some(&Value::Bool(false)));
    assert_eq!(inst.get("S"), Some(&Value::String(String::new())));
    assert_eq!(inst.get("R"), Some(&Value::Real(0.0)));
    assert_eq!(inst.variables().count(), 5);
}

#[test]
fn nested_timer_starts_idle() {
    let prog = program(TIMER_FB);
    let inst = instantiate(&prog, "TIMED").unwrap();
    let t = inst.child("T").unwrap();
    assert_eq!(t.type_name(), "TON");
    assert_eq!(t.get("IN"), Some(&Value::Bool(false)));
    assert_eq!(t.get("Q"), Some(&Value::Bool(false)));
    assert_eq!(t.get("ET"), Some(&Value::Time(0)));
    assert_eq!(inst.lookup("T.ET").and_then(Slot::as_value), Some(&Value::Time(0)));
}

#[test]
fn unknown_pou_is_reported() {
    let prog = program(TIMER_FB);
    assert_eq!(instantiate(&prog, "NOPE"), Err(RuntimeError::UnknownPou("NOPE".into())));
}

#[test]
fn accumulator_retains_state() {
    let prog = program("FUNCTION_BLOCK ACC VAR_INPUT X : INT; END_VAR VAR_OUTPUT SUM : INT; END_VAR SUM := SUM + X; END_FUNCTION_BLOCK");
    let mut inst = instantiate(&prog, "ACC").unwrap();
    let mut clock = SimClock::new(10);
    let a = execute_cycle(&prog, &mut inst, &inputs(&[("X", Value::Int(3))]), &mut clock).unwrap();
    let b = execute_cycle(&prog, &mut inst, &inputs(&[("X", Value::Int(4))]), &mut clock).unwrap();
    assert_eq!(a.outputs["SUM"], Value::Int(3));
    assert_eq!(b.outputs["SUM"], Value::Int(7));
    assert_eq!(clock.now_ms(), 20);
}

#[test]
fn integer_division_by_zero_faults_at_statement() {
    let prog = program("FUNCTION_BLOCK DIV VAR_INPUT D : INT; END_VAR VAR_OUTPUT Q : INT; END_VAR Q := 1;\nQ := 1 / D; END_FUNCTION_BLOCK");
    let mut inst = instantiate(&prog, "DIV").unwrap();
    let err = execute_cycle(&prog, &mut inst, &inputs(&[("D", Value::Int(0))]), &mut SimClock::new(10)).unwrap_err();
    let RuntimeError::Fault(f) = err else { panic!("{err}") };
    assert_eq!(f.kind, FaultKind::DivisionByZero);
    assert_eq!(f.stmt, Some(StmtId(1)));
    assert_eq!(f.span.start_pos.line, 2);
}

#[test]
fn case_without_match_is_a_no_op() {
    let prog = program(
        "FUNCTION_BLOCK C VAR_INPUT S : INT; END_VAR VAR_OUTPUT Q : INT; END_VAR CASE S OF 1: Q := 10; 2..4: Q := 20; END_CASE; END_FUNCTION_BLOCK",
    );
    let mut inst = instantiate(&prog, "C").unwrap();
    let mut clock = SimClock::new(10);
    let out = |inst: &mut FbInstance, clock: &mut SimClock, s| {
        execute_cycle(&prog, inst, &inputs(&[("S", Value::Int(s))]), clock).unwrap().outputs["Q"].clone()
    };
    assert_eq!(out(&mut inst, &mut clock, 9), Value::Int(0));
    assert_eq!(out(&mut inst, &mut clock, 3), Value::Int(20));
}

#[test]
fn array_bounds_fault() {
    let prog = program(
        "FUNCTION_BLOCK A VAR_INPUT I : INT; END_VAR VAR_OUTPUT Q : INT; END_VAR VAR T : ARRAY[1..3] OF INT := [10, 20, 30]; END_VAR Q := T[I]; END_FUNCTION_BLOCK",
    );
    let mut inst = instantiate(&prog, "A").unwrap();
    let mut clock = SimClock::new(10);
    let ok = execute_cycle(&prog, &mut inst, &inputs(&[("I", Value::Int(2))]), &mut clock).unwrap();
    assert_eq!(ok.outputs["Q"], Value::Int(20));
    let err = execute_cycle(&prog, &mut inst, &inputs(&[("I", Value::Int(4))]), &mut clock).unwrap_err();
    assert!(matches!(err, RuntimeError::Fault(RuntimeFault { kind: FaultKind::IndexOutOfBounds { index: 4, .. }, .. })));
}

#[test]
fn explicit_conversion_overflow_faults() {
    let prog = program("FUNCTION_BLOCK K VAR_INPUT D : DINT; END_VAR VAR_OUTPUT Q : INT; END_VAR Q := DINT_TO_INT(D); END_FUNCTION_BLOCK");
    let mut inst = instantiate(&prog, "K").unwrap();
    let mut clock = SimClock::new(10);
    assert!(execute_cycle(&prog, &mut inst, &inputs(&[("D", Value::Dint(40000))]), &mut clock).is_err());
}

#[test]
fn trace_records_guards_and_loops() {
    let prog = program(
        "FUNCTION_BLOCK T VAR_INPUT A : BOOL; END_VAR VAR_OUTPUT N : INT; END_VAR VAR I : INT; END_VAR
         IF A THEN N := 1; ELSIF NOT A THEN N := 2; END_IF;
         FOR I := 1 TO 2 DO N := N + I; END_FOR;
         END_FUNCTION_BLOCK",
    );
    let mut inst = instantiate(&prog, "T").unwrap();
    let out = execute_cycle(&prog, &mut inst, &inputs(&[("A", Value::Bool(false))]), &mut SimClock::new(10)).unwrap();
    // ids: 0 guard A, 1 N:=1, 2 guard NOT A, 3 N:=2, 4 FOR, 5 N:=N+I
    let ids: Vec<u32> = out.trace.ids_for("T").iter().map(|i| i.0).collect();
    assert_eq!(ids, vec![0, 2, 3, 4, 5, 4, 5, 4]);
    assert_eq!(out.outputs["N"], Value::Int(5));
}

#[test]
fn functions_are_called_with_fresh_locals() {
    let prog = program(
        "FUNCTION TWICE : INT VAR_INPUT X : INT; END_VAR VAR K : INT := 2; END_VAR TWICE := X * K; K := 0; END_FUNCTION
         FUNCTION_BLOCK F VAR_OUTPUT A : INT; B : INT; END_VAR A := TWICE(3); B := TWICE(X := 4); END_FUNCTION_BLOCK",
    );
    let mut inst = instantiate(&prog, "F").unwrap();
    let out = execute_cycle(&prog, &mut inst, &BTreeMap::new(), &mut SimClock::new(10)).unwrap();
    assert_eq!(out.outputs["A"], Value::Int(6));
    assert_eq!(out.outputs["B"], Value::Int(8));
}

#[test]
fn in_out_parameters_copy_back() {
    let prog = program(
        "FUNCTION_BLOCK INC VAR_IN_OUT V : INT; END_VAR V := V + 1; END_FUNCTION_BLOCK
         FUNCTION_BLOCK F VAR_OUTPUT N : INT; END_VAR VAR i : INC; END_VAR i(V := N); i(V := N); END_FUNCTION_BLOCK",
    );
    let mut inst = instantiate(&prog, "F").unwrap();
    let out = execute_cycle(&prog, &mut inst, &BTreeMap::new(), &mut SimClock::new(10)).unwrap();
    assert_eq!(out.outputs["N"], Value::Int(2));
}

#[test]
fn input_type_must_follow_lattice() {
    let prog = program(TIMER_FB);
    let mut inst = instantiate(&prog, "TIMED").unwrap();
    assert!(matches!(inst.set_input("PT", Value::Int(4)), Err(RuntimeError::InputType { .. })));
    assert!(matches!(inst.set_input("NOPE", Value::Bool(true)), Err(RuntimeError::UnknownInput { .. })));
    assert!(matches!(inst.set_input("Q", Value::Bool(true)), Err(RuntimeError::UnknownInput { .. })));
}

#[test]
fn empty_program_runs_ten_cycles() {
    let prog = program("PROGRAM P END_PROGRAM");
    let mut clock = SimClock::new(10);
    let mut lines = Vec::new();
    let mut monitor = |r: &ScanRecord, _: &ExecTrace, _: &FbInstance| {
        lines.push(r.to_string());
        ControlFlow::Continue(())
    };
    let run = run_program(&prog, "P", 10, &mut clock, RunOptions::default(), &mut monitor).unwrap();
    assert_eq!(run.cycles, 10);
    assert_eq!(clock.now_ms(), 100);
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[0], "cycle=1 t=0 events=[]");
    assert_eq!(lines[9], "cycle=10 t=90 events=[]");
}

#[test]
fn program_fault_carries_cycle() {
    let prog = program("PROGRAM P VAR N : INT; Z : INT; END_VAR N := N + 1; IF N = 3 THEN N := N / Z; END_IF; END_PROGRAM");
    let mut monitor = |_: &ScanRecord, _: &ExecTrace, _: &FbInstance| ControlFlow::Continue(());
    let err = run_program(&prog, "P", 10, &mut SimClock::new(10), RunOptions::default(), &mut monitor).unwrap_err();
    let RuntimeError::Fault(f) = err else { panic!("{err}") };
    assert_eq!(f.cycle, Some(3));
    assert_eq!(f.kind, FaultKind::DivisionByZero);
}

#[test]
fn isolated_fault_spares_other_instances() {
    let prog = program(
        "FUNCTION_BLOCK W VAR_INPUT D : INT; END_VAR VAR_OUTPUT N : INT; END_VAR N := N + 10 / D; END_FUNCTION_BLOCK
         PROGRAM P VAR a : W; b : W; NA : INT; NB : INT; END_VAR a(D := 0, N => NA); b(D := 5, N => NB); END_PROGRAM",
    );
    let mut monitor = |_: &ScanRecord, _: &ExecTrace, _: &FbInstance| ControlFlow::Continue(());
    let options = RunOptions { isolate_faults: true };
    let run = run_program(&prog, "P", 4, &mut SimClock::new(10), options, &mut monitor).unwrap();
    assert_eq!(run.isolated.len(), 1);
    assert_eq!(run.isolated[0].instance, "A");
    assert_eq!(run.isolated[0].fault.cycle, Some(1));
    assert_eq!(run.program.get("NB"), Some(&Value::Int(8)));
}

#[test]
fn events_come_from_evt_variables() {
    let prog = program(
        "PROGRAM P VAR N : INT; TC_1_EVT : STRING; END_VAR N := N + 1; TC_1_EVT := ''; IF N = 2 THEN TC_1_EVT := 'A=PASS;B=FAIL'; END_IF; END_PROGRAM",
    );
    let mut events = Vec::new();
    let mut monitor = |r: &ScanRecord, _: &ExecTrace, _: &FbInstance| {
        events.push(r.events.clone());
        ControlFlow::Continue(())
    };
    run_program(&prog, "P", 3, &mut SimClock::new(10), RunOptions::default(), &mut monitor).unwrap();
    assert_eq!(events[0], Vec::<String>::new());
    assert_eq!(events[1], vec!["A=PASS".to_string(), "B=FAIL".to_string()]);
}

#[test]
fn loop_budget_stops_runaway_loops() {
    let prog = program("FUNCTION_BLOCK L VAR X : BOOL; END_VAR WHILE NOT X DO X := FALSE; END_WHILE; END_FUNCTION_BLOCK");
    let mut inst = instantiate(&prog, "L").unwrap();
    let err = execute_cycle(&prog, &mut inst, &BTreeMap::new(), &mut SimClock::new(10)).unwrap_err();
    assert!(matches!(err, RuntimeError::Fault(RuntimeFault { kind: FaultKind::LoopBudget, .. })));
}

#[test]
fn triggers_and_counters() {
    let prog = program(
        "FUNCTION_BLOCK E VAR_INPUT C : BOOL; END_VAR VAR_OUTPUT R : BOOL; F : BOOL; CV : INT; END_VAR
         VAR rt : R_TRIG; ft : F_TRIG; cu : CTU; END_VAR
         rt(CLK := C, Q => R); ft(CLK := C, Q => F); cu(CU := C, R := FALSE, PV := 10, CV => CV);
         END_FUNCTION_BLOCK",
    );
    let mut inst = instantiate(&prog, "E").unwrap();
    let mut clock = SimClock::new(10);
    let mut seq = Vec::new();
    for c in [false, true, true, false, true] {
        let o = execute_cycle(&prog, &mut inst, &inputs(&[("C", Value::Bool(c))]), &mut clock).unwrap().outputs;
        seq.push((o["R"].clone(), o["F"].clone(), o["CV"].clone()));
    }
    let b = Value::Bool;
    assert_eq!(
        seq,
        vec![
            (b(false), b(false), Value::Int(0)),
            (b(true), b(false), Value::Int(1)),
            (b(false), b(false), Value::Int(1)),
            (b(false), b(true), Value::Int(1)),
            (b(true), b(false), Value::Int(2)),
        ]
    );
}

#[test]
fn tp_emits_a_fixed_pulse() {
    let prog = program(
        "FUNCTION_BLOCK P VAR_INPUT IN : BOOL; END_VAR VAR_OUTPUT Q : BOOL; END_VAR VAR t : TP; END_VAR t(IN := IN, PT := T#30ms, Q => Q); END_FUNCTION_BLOCK",
    );
    let mut inst = instantiate(&prog, "P").unwrap();
    let mut clock = SimClock::new(10);
    let qs: Vec<bool> = [true, false, true, false, false, true]
        .into_iter()
        .map(|i| {
            let o = execute_cycle(&prog, &mut inst, &inputs(&[("IN", Value::Bool(i))]), &mut clock).unwrap();
            o.outputs["Q"] == Value::Bool(true)
        })
        .collect();
    // retrigger at scan 3 is ignored; the pulse ends at 30 ms
    assert_eq!(qs, vec![true, true, true, false, false, true]);
}

proptest! {
    #[test]
    fn ton_matches_reference(pt in 0i64..500, cycle in 1u32..120, ins in proptest::collection::vec(any::<bool>(), 1..40)) {
        let prog = program(TIMER_FB);
        let mut inst = instantiate(&prog, "TIMED").unwrap();
        let mut clock = SimClock::new(cycle);
        let reference = ton_reference(pt, cycle as i64, &ins);
        for (k, &i) in ins.iter().enumerate() {
            let o = execute_cycle(&prog, &mut inst, &inputs(&[("IN", Value::Bool(i)), ("PT", Value::Time(pt))]), &mut clock).unwrap().outputs;
            prop_assert_eq!(&o["ET"], &Value::Time(reference[k].3));
            prop_assert_eq!(&o["Q"], &Value::Bool(reference[k].4));
        }
    }

    #[test]
    fn ton_et_is_monotone_and_saturates(pt in 0i64..1000, cycle in 1u32..100, scans in 1usize..60) {
        let prog = program(TIMER_FB);
        let mut inst = instantiate(&prog, "TIMED").unwrap();
        let mut clock = SimClock::new(cycle);
        let ins = inputs(&[("IN", Value::Bool(true)), ("PT", Value::Time(pt))]);
        let mut last = 0;
        for _ in 0..scans {
            let o = execute_cycle(&prog, &mut inst, &ins, &mut clock).unwrap().outputs;
            let Value::Time(et) = o["ET"] else { unreachable!() };
            prop_assert!(et >= last && et <= pt);
            prop_assert_eq!(o["Q"].clone(), Value::Bool(et == pt));
            last = et;
        }
    }

    #[test]
    fn tof_holds_for_ceil_pt_over_cycle(pt in 0i64..1000, cycle in 1u32..200) {
        let prog = program(TIMER_FB);
        let mut inst = instantiate(&prog, "OFFD").unwrap();
        let mut clock = SimClock::new(cycle);
        let set = |v| inputs(&[("IN", Value::Bool(v)), ("PT", Value::Time(pt))]);
        execute_cycle(&prog, &mut inst, &set(true), &mut clock).unwrap();
        let mut held = 0;
        for _ in 0..(pt / cycle as i64 + 3) {
            let o = execute_cycle(&prog, &mut inst, &set(false), &mut clock).unwrap().outputs;
            if o["Q"] == Value::Bool(true) { held += 1 } else { break }
        }
        let expected = (pt + cycle as i64 - 1) / cycle as i64;
        prop_assert_eq!(held, expected);
    }

    #[test]
    fn instances_do_not_share_state(calls in proptest::collection::vec((any::<bool>(), -100i16..100), 1..30)) {
        let prog = program(
            "FUNCTION_BLOCK ACC VAR_INPUT X : INT; END_VAR VAR_OUTPUT SUM : INT; END_VAR SUM := SUM + X; END_FUNCTION_BLOCK",
        );
        let mut a = instantiate(&prog, "ACC").unwrap();
        let mut b = instantiate(&prog, "ACC").unwrap();
        let mut alone_a = instantiate(&prog, "ACC").unwrap();
        let mut alone_b = instantiate(&prog, "ACC").unwrap();
        let mut clock = SimClock::new(10);
        for (pick_a, x) in calls {
            let ins = inputs(&[("X", Value::Int(x))]);
            let (shared, alone) = if pick_a { (&mut a, &mut alone_a) } else { (&mut b, &mut alone_b) };
            let o1 = execute_cycle(&prog, shared, &ins, &mut clock).unwrap();
            let o2 = execute_cycle(&prog, alone, &ins, &mut SimClock::new(10)).unwrap();
            prop_assert_eq!(o1.outputs, o2.outputs);
        }
    }

    #[test]
    fn execution_is_deterministic(xs in proptest::collection::vec(any::<bool>(), 1..30)) {
        let prog = program(TIMER_FB);
        let run = || {
            let mut inst = instantiate(&prog, "TIMED").unwrap();
            let mut clock = SimClock::new(20);
            xs.iter()
                .map(|&i| execute_cycle(&prog, &mut inst, &inputs(&[("IN", Value::Bool(i)), ("PT", Value::Time(60))]), &mut clock).unwrap())
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
