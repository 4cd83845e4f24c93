//! Random checked suites over the corpus blocks.

use plctest_core::corpus::{self, CorpusEntry};
use plctest_core::frontend::ir::{TypedPou, VarInfo};
use plctest_core::frontend::types::Type;
use plctest_core::testspec::{CheckedCase, CheckedState, CheckedSuite, Column};
use plctest_core::value::Value;
use proptest::prelude::*;

pub fn value_for(ty: &Type) -> BoxedStrategy<Value> {
    match ty {
        Type::Bool => any::<bool>().prop_map(Value::Bool).boxed(),
        Type::Int => any::<i16>().prop_map(Value::Int).boxed(),
        Type::Dint => prop_oneof![any::<i32>(), -300i32..300].prop_map(Value::Dint).boxed(),
        Type::Byte => any::<u8>().prop_map(Value::Byte).boxed(),
        Type::Word => any::<u16>().prop_map(Value::Word).boxed(),
        Type::Real => prop_oneof![-1e3f32..1e3, prop::num::f32::NORMAL].prop_map(Value::Real).boxed(),
        Type::Lreal => (-1e6f64..1e6).prop_map(Value::Lreal).boxed(),
        Type::Time => prop_oneof![0i64..1000, 0i64..10_000_000].prop_map(Value::Time).boxed(),
        Type::String(cap) => {
            prop::string::string_regex(&format!("[A-Fa-z0-9 $']{{0,{}}}", (*cap).min(8))).unwrap().prop_map(Value::String).boxed()
        }
        other => panic!("no literal for {other}"),
    }
}

fn columns<'a>(vars: impl Iterator<Item = &'a VarInfo>) -> Vec<Column> {
    vars.map(|v| Column { name: v.name.clone(), ty: v.ty.clone() }).collect()
}

fn state_for(inputs: &[Column], outputs: &[Column]) -> impl Strategy<Value = CheckedState> {
    let ins: Vec<_> = inputs
        .iter()
        .map(|c| {
            prop::option::of(value_for(&c.ty)).prop_map({
                let n = c.name.clone();
                move |v| (n.clone(), v)
            })
        })
        .collect();
    let outs: Vec<_> = outputs
        .iter()
        .map(|c| {
            prop::option::of(value_for(&c.ty)).prop_map({
                let n = c.name.clone();
                move |v| (n.clone(), v)
            })
        })
        .collect();
    (ins, outs, 1u32..4).prop_map(|(ins, outs, dwell_cycles)| CheckedState {
        inputs: ins.into_iter().filter_map(|(n, v)| v.map(|v| (n, v))).collect(),
        expected: outs.into_iter().filter_map(|(n, v)| v.map(|v| (n, v))).collect(),
        dwell_cycles,
    })
}

pub fn suite_for(fb: &TypedPou) -> impl Strategy<Value = CheckedSuite> {
    let inputs = columns(fb.inputs());
    let outputs = columns(fb.outputs());
    let name = fb.name.clone();
    let case = prop::collection::vec(state_for(&inputs, &outputs), 1..4);
    prop::collection::vec(case, 1..6).prop_map(move |cases| CheckedSuite {
        fb_under_test: name.clone(),
        inputs: inputs.clone(),
        outputs: outputs.clone(),
        cases: cases.into_iter().enumerate().map(|(i, states)| CheckedCase { name: format!("case_{i}"), states }).collect(),
    })
}

pub fn arb_corpus_suite() -> impl Strategy<Value = (&'static CorpusEntry, CheckedSuite)> {
    (0..corpus::ENTRIES.len()).prop_flat_map(|i| {
        let entry = &corpus::ENTRIES[i];
        let (prog, _) = entry.compile().unwrap();
        suite_for(prog.pou(entry.name).unwrap()).prop_map(move |s| (entry, s))
    })
}
