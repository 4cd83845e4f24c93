//! Standard function blocks. Timers read the scan's `now`, so every timer
//! in one scan sees the same instant.

use super::Slot;
use crate::frontend::builtins::{slot::*, BuiltinFb};
use crate::value::Value;

fn get_bool(vars: &[Slot], i: usize) -> bool {
    matches!(vars[i], Slot::Value(Value::Bool(true)))
}

fn get_i64(vars: &[Slot], i: usize) -> i64 {
    match &vars[i] {
        Slot::Value(v) => v.as_i64().unwrap_or(0),
        _ => 0,
    }
}

fn set(vars: &mut [Slot], i: usize, v: Value) {
    vars[i] = Slot::Value(v);
}

pub(crate) fn step(fb: BuiltinFb, vars: &mut [Slot], now: i64) {
    match fb {
        BuiltinFb::Ton => ton(vars, now),
        BuiltinFb::Tof => tof(vars, now),
        BuiltinFb::Tp => tp(vars, now),
        BuiltinFb::RTrig => {
            let clk = get_bool(vars, TRIG_CLK);
            let m = get_bool(vars, TRIG_M);
            set(vars, TRIG_Q, Value::Bool(clk && !m));
            set(vars, TRIG_M, Value::Bool(clk));
        }
        BuiltinFb::FTrig => {
            // M holds the previous CLK, so a block first called with CLK = FALSE sees no edge
            let clk = get_bool(vars, TRIG_CLK);
            let m = get_bool(vars, TRIG_M);
            set(vars, TRIG_Q, Value::Bool(!clk && m));
            set(vars, TRIG_M, Value::Bool(clk));
        }
        BuiltinFb::Ctu => {
            let pulse = get_bool(vars, CNT_PULSE);
            let edge = pulse && !get_bool(vars, CNT_M);
            let pv = get_i64(vars, CNT_PV);
            let mut cv = get_i64(vars, CNT_CV);
            if get_bool(vars, CNT_RESET) {
                cv = 0;
            } else if edge && cv < i16::MAX as i64 {
                cv += 1;
            }
            set(vars, CNT_CV, Value::Int(cv as i16));
            set(vars, CNT_Q, Value::Bool(cv >= pv));
            set(vars, CNT_M, Value::Bool(pulse));
        }
        BuiltinFb::Ctd => {
            let pulse = get_bool(vars, CNT_PULSE);
            let edge = pulse && !get_bool(vars, CNT_M);
            let pv = get_i64(vars, CNT_PV);
            let mut cv = get_i64(vars, CNT_CV);
            if get_bool(vars, CNT_RESET) {
                cv = pv;
            } else if edge && cv > i16::MIN as i64 {
                cv -= 1;
            }
            set(vars, CNT_CV, Value::Int(cv as i16));
            set(vars, CNT_Q, Value::Bool(cv <= 0));
            set(vars, CNT_M, Value::Bool(pulse));
        }
    }
}

/// On-delay: ET = min(now − start, PT) while IN, Q ⇔ ET ≥ PT.
fn ton(vars: &mut [Slot], now: i64) {
    let input = get_bool(vars, TIMER_IN);
    let pt = get_i64(vars, TIMER_PT);
    if !input {
        set(vars, TIMER_RUNNING, Value::Bool(false));
        set(vars, TIMER_Q, Value::Bool(false));
        set(vars, TIMER_ET, Value::Time(0));
    } else {
        if !get_bool(vars, TIMER_RUNNING) {
            set(vars, TIMER_RUNNING, Value::Bool(true));
            set(vars, TIMER_START, Value::Time(now));
        }
        let et = (now - get_i64(vars, TIMER_START)).min(pt).max(0);
        set(vars, TIMER_ET, Value::Time(et));
        set(vars, TIMER_Q, Value::Bool(et >= pt));
    }
    set(vars, TIMER_PREV_IN, Value::Bool(input));
}

/// Off-delay: Q follows IN up and drops PT after the falling edge.
fn tof(vars: &mut [Slot], now: i64) {
    let input = get_bool(vars, TIMER_IN);
    let pt = get_i64(vars, TIMER_PT);
    if input {
        set(vars, TIMER_RUNNING, Value::Bool(false));
        set(vars, TIMER_Q, Value::Bool(true));
        set(vars, TIMER_ET, Value::Time(0));
    } else {
        if get_bool(vars, TIMER_PREV_IN) {
            set(vars, TIMER_RUNNING, Value::Bool(true));
            set(vars, TIMER_START, Value::Time(now));
        }
        if get_bool(vars, TIMER_RUNNING) {
            let et = (now - get_i64(vars, TIMER_START)).min(pt).max(0);
            set(vars, TIMER_ET, Value::Time(et));
            if et >= pt {
                set(vars, TIMER_RUNNING, Value::Bool(false));
                set(vars, TIMER_Q, Value::Bool(false));
            }
        }
    }
    set(vars, TIMER_PREV_IN, Value::Bool(input));
}

/// Pulse: Q for PT after a rising edge; retriggering is ignored while running.
fn tp(vars: &mut [Slot], now: i64) {
    let input = get_bool(vars, TIMER_IN);
    let pt = get_i64(vars, TIMER_PT);
    if !get_bool(vars, TIMER_RUNNING) && input && !get_bool(vars, TIMER_PREV_IN) {
        set(vars, TIMER_RUNNING, Value::Bool(true));
        set(vars, TIMER_START, Value::Time(now));
    }
    if get_bool(vars, TIMER_RUNNING) {
        let elapsed = (now - get_i64(vars, TIMER_START)).max(0);
        set(vars, TIMER_ET, Value::Time(elapsed.min(pt)));
        if elapsed >= pt {
            set(vars, TIMER_RUNNING, Value::Bool(false));
            set(vars, TIMER_Q, Value::Bool(false));
        } else {
            set(vars, TIMER_Q, Value::Bool(true));
        }
    } else {
        set(vars, TIMER_Q, Value::Bool(false));
        if !input {
            set(vars, TIMER_ET, Value::Time(0));
        }
    }
    set(vars, TIMER_PREV_IN, Value::Bool(input));
}
