//! Operator and standard-function semantics on [`Value`]s.
//!
//! Operands arrive already widened to a common type by the resolver, so
//! mixed-variant pairs only occur for TIME scaling and `**`.

use std::cmp::Ordering;

use super::FaultKind;
use crate::frontend::ast::{BinaryOp, UnaryOp};
use crate::frontend::builtins::BuiltinFn;
use crate::frontend::types::Type;
use crate::value::{round_half_away, Value};

pub(crate) fn unary(op: UnaryOp, v: Value) -> Value {
    use Value::*;
    match (op, v) {
        (UnaryOp::Neg, Int(a)) => Int(a.wrapping_neg()),
        (UnaryOp::Neg, Dint(a)) => Dint(a.wrapping_neg()),
        (UnaryOp::Neg, Real(a)) => Real(-a),
        (UnaryOp::Neg, Lreal(a)) => Lreal(-a),
        (UnaryOp::Neg, Time(a)) => Time(a.wrapping_neg()),
        (UnaryOp::Not, Bool(b)) => Bool(!b),
        (UnaryOp::Not, Byte(a)) => Byte(!a),
        (UnaryOp::Not, Word(a)) => Word(!a),
        (UnaryOp::Not, Int(a)) => Int(!a),
        (UnaryOp::Not, Dint(a)) => Dint(!a),
        (_, v) => v,
    }
}

/// Ordering of two values of the same variant; `None` for NaN or mixed variants.
pub fn compare(l: &Value, r: &Value) -> Option<Ordering> {
    use Value::*;
    match (l, r) {
        (Bool(a), Bool(b)) => Some(a.cmp(b)),
        (Int(a), Int(b)) => Some(a.cmp(b)),
        (Dint(a), Dint(b)) => Some(a.cmp(b)),
        (Byte(a), Byte(b)) => Some(a.cmp(b)),
        (Word(a), Word(b)) => Some(a.cmp(b)),
        (Real(a), Real(b)) => a.partial_cmp(b),
        (Lreal(a), Lreal(b)) => a.partial_cmp(b),
        (Time(a), Time(b)) => Some(a.cmp(b)),
        (String(a), String(b)) => Some(a.cmp(b)),
        _ => None,
    }
}

fn comparison(op: BinaryOp, l: &Value, r: &Value) -> Value {
    let ord = compare(l, r);
    Value::Bool(match op {
        BinaryOp::Eq => ord == Some(Ordering::Equal),
        BinaryOp::Ne => ord != Some(Ordering::Equal),
        BinaryOp::Lt => ord == Some(Ordering::Less),
        BinaryOp::Le => matches!(ord, Some(Ordering::Less | Ordering::Equal)),
        BinaryOp::Gt => ord == Some(Ordering::Greater),
        BinaryOp::Ge => matches!(ord, Some(Ordering::Greater | Ordering::Equal)),
        _ => unreachable!("not a comparison"),
    })
}

macro_rules! int_op {
    ($ctor:path, $a:expr, $b:expr, $op:expr) => {{
        let (a, b) = ($a, $b);
        Ok(match $op {
            BinaryOp::Add => $ctor(a.wrapping_add(b)),
            BinaryOp::Sub => $ctor(a.wrapping_sub(b)),
            BinaryOp::Mul => $ctor(a.wrapping_mul(b)),
            BinaryOp::Div if b == 0 => return Err(FaultKind::DivisionByZero),
            BinaryOp::Div => $ctor(a.wrapping_div(b)),
            BinaryOp::Mod if b == 0 => return Err(FaultKind::DivisionByZero),
            BinaryOp::Mod => $ctor(a.wrapping_rem(b)),
            BinaryOp::And => $ctor(a & b),
            BinaryOp::Or => $ctor(a | b),
            BinaryOp::Xor => $ctor(a ^ b),
            other => unreachable!("{other:?} on integers"),
        })
    }};
}

macro_rules! real_op {
    ($ctor:path, $a:expr, $b:expr, $op:expr) => {{
        let (a, b) = ($a, $b);
        Ok(match $op {
            BinaryOp::Add => $ctor(a + b),
            BinaryOp::Sub => $ctor(a - b),
            BinaryOp::Mul => $ctor(a * b),
            BinaryOp::Div => $ctor(a / b),
            other => unreachable!("{other:?} on reals"),
        })
    }};
}

pub(crate) fn binary(op: BinaryOp, l: Value, r: Value) -> Result<Value, FaultKind> {
    use Value::*;
    if op.is_comparison() {
        return Ok(comparison(op, &l, &r));
    }
    if op == BinaryOp::Pow {
        let e = r.as_f64().unwrap_or(f64::NAN);
        return Ok(match l {
            Real(b) => Real((b as f64).powf(e) as f32),
            other => Lreal(other.as_f64().unwrap_or(f64::NAN).powf(e)),
        });
    }
    match (l, r) {
        (Bool(a), Bool(b)) => Ok(Bool(match op {
            BinaryOp::And => a && b,
            BinaryOp::Or => a || b,
            BinaryOp::Xor => a ^ b,
            other => unreachable!("{other:?} on BOOL"),
        })),
        (Int(a), Int(b)) => int_op!(Int, a, b, op),
        (Dint(a), Dint(b)) => int_op!(Dint, a, b, op),
        (Byte(a), Byte(b)) => int_op!(Byte, a, b, op),
        (Word(a), Word(b)) => int_op!(Word, a, b, op),
        (Real(a), Real(b)) => real_op!(Real, a, b, op),
        (Lreal(a), Lreal(b)) => real_op!(Lreal, a, b, op),
        (Time(a), Time(b)) => match op {
            BinaryOp::Add => Ok(Time(a.wrapping_add(b))),
            BinaryOp::Sub => Ok(Time(a.wrapping_sub(b))),
            other => unreachable!("{other:?} on TIME"),
        },
        (Time(t), n) => scale_time(op, t, &n),
        (n, Time(t)) => scale_time(op, t, &n),
        (l, r) => unreachable!("{op:?} on {l:?} and {r:?}"),
    }
}

fn scale_time(op: BinaryOp, t: i64, n: &Value) -> Result<Value, FaultKind> {
    if let Some(i) = n.as_i64() {
        return match op {
            BinaryOp::Mul => Ok(Value::Time(t.wrapping_mul(i))),
            BinaryOp::Div if i == 0 => Err(FaultKind::DivisionByZero),
            BinaryOp::Div => Ok(Value::Time(t.wrapping_div(i))),
            other => unreachable!("{other:?} scaling TIME"),
        };
    }
    let f = n.as_f64().unwrap_or(f64::NAN);
    let ms = match op {
        BinaryOp::Mul => t as f64 * f,
        BinaryOp::Div if f == 0.0 => return Err(FaultKind::DivisionByZero),
        BinaryOp::Div => t as f64 / f,
        other => unreachable!("{other:?} scaling TIME"),
    };
    Ok(Value::Time(round_half_away(ms) as i64))
}

fn bits(v: &Value) -> Option<(u64, u32)> {
    Some(match v {
        Value::Byte(x) => (*x as u64, 8),
        Value::Word(x) => (*x as u64, 16),
        Value::Int(x) => (*x as u16 as u64, 16),
        Value::Dint(x) => (*x as u32 as u64, 32),
        _ => return None,
    })
}

fn from_bits(template: &Value, b: u64) -> Value {
    match template {
        Value::Byte(_) => Value::Byte(b as u8),
        Value::Word(_) => Value::Word(b as u16),
        Value::Int(_) => Value::Int(b as u16 as i16),
        _ => Value::Dint(b as u32 as i32),
    }
}

fn shift(f: BuiltinFn, v: &Value, n: i64) -> Value {
    let Some((b, width)) = bits(v) else { return v.clone() };
    let mask = (1u64 << width) - 1;
    let n = n.clamp(0, u32::MAX as i64) as u32;
    let out = match f {
        BuiltinFn::Shl if n >= width => 0,
        BuiltinFn::Shl => (b << n) & mask,
        BuiltinFn::Shr if n >= width => 0,
        BuiltinFn::Shr => b >> n,
        BuiltinFn::Rol => {
            let n = n % width;
            ((b << n) | (b >> (width - n))) & mask
        }
        _ => {
            let n = n % width;
            ((b >> n) | (b << (width - n))) & mask
        }
    };
    from_bits(v, out)
}

fn pick(l: Value, r: Value, want: Ordering) -> Value {
    if compare(&r, &l) == Some(want) {
        r
    } else {
        l
    }
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

fn string_len_arg(v: &Value, what: &str) -> Result<usize, FaultKind> {
    let n = v.as_i64().unwrap_or(0);
    usize::try_from(n).map_err(|_| FaultKind::StringBounds(format!("{what} {n} is negative")))
}

/// Evaluates a standard function on already-evaluated arguments.
pub(crate) fn call_builtin(f: BuiltinFn, mut args: Vec<Value>, ret: &Type, now: i64) -> Result<Value, FaultKind> {
    use Value::*;
    let real = |x: f64| Value::from_f64(x, ret);
    let unary_real = |args: &[Value], g: fn(f64) -> f64| real(g(args[0].as_f64().unwrap_or(f64::NAN)));
    Ok(match f {
        BuiltinFn::Abs => match args.swap_remove(0) {
            Int(a) => Int(a.wrapping_abs()),
            Dint(a) => Dint(a.wrapping_abs()),
            Real(a) => Real(a.abs()),
            Lreal(a) => Lreal(a.abs()),
            other => other,
        },
        BuiltinFn::Min => args.into_iter().reduce(|l, r| pick(l, r, Ordering::Less)).expect("arity"),
        BuiltinFn::Max => args.into_iter().reduce(|l, r| pick(l, r, Ordering::Greater)).expect("arity"),
        BuiltinFn::Limit => {
            let mx = args.pop().expect("arity");
            let x = args.pop().expect("arity");
            let mn = args.pop().expect("arity");
            pick(pick(x, mn, Ordering::Greater), mx, Ordering::Less)
        }
        BuiltinFn::Sel => {
            let in1 = args.pop().expect("arity");
            let in0 = args.pop().expect("arity");
            if args[0].as_bool().unwrap_or(false) {
                in1
            } else {
                in0
            }
        }
        BuiltinFn::Sin => unary_real(&args, f64::sin),
        BuiltinFn::Cos => unary_real(&args, f64::cos),
        BuiltinFn::Tan => unary_real(&args, f64::tan),
        BuiltinFn::Asin => unary_real(&args, f64::asin),
        BuiltinFn::Acos => unary_real(&args, f64::acos),
        BuiltinFn::Atan => unary_real(&args, f64::atan),
        BuiltinFn::Exp => unary_real(&args, f64::exp),
        BuiltinFn::Ln => unary_real(&args, f64::ln),
        BuiltinFn::Log => unary_real(&args, f64::log10),
        BuiltinFn::Sqrt => unary_real(&args, f64::sqrt),
        BuiltinFn::Trunc => {
            let x = args[0].as_f64().unwrap_or(f64::NAN).trunc();
            if !(i32::MIN as f64..=i32::MAX as f64).contains(&x) {
                return Err(FaultKind::Conversion(format!("TRUNC of {} exceeds DINT", args[0])));
            }
            Dint(x as i32)
        }
        BuiltinFn::Expt => {
            let e = args[1].as_f64().unwrap_or(f64::NAN);
            real(args[0].as_f64().unwrap_or(f64::NAN).powf(e))
        }
        BuiltinFn::Shl | BuiltinFn::Shr | BuiltinFn::Rol | BuiltinFn::Ror => shift(f, &args[0], args[1].as_i64().unwrap_or(0)),
        BuiltinFn::Concat => String(args.iter().filter_map(Value::as_str).collect()),
        BuiltinFn::Len => Int(args[0].as_str().unwrap_or("").chars().count().min(i16::MAX as usize) as i16),
        BuiltinFn::Left | BuiltinFn::Right => {
            let s = chars(args[0].as_str().unwrap_or(""));
            let l = string_len_arg(&args[1], "length")?.min(s.len());
            let part = if f == BuiltinFn::Left { &s[..l] } else { &s[s.len() - l..] };
            String(part.iter().collect())
        }
        BuiltinFn::Mid => {
            let s = chars(args[0].as_str().unwrap_or(""));
            let l = string_len_arg(&args[1], "length")?;
            let p = args[2].as_i64().unwrap_or(0);
            if p < 1 || p as usize > s.len() + 1 {
                return Err(FaultKind::StringBounds(format!("MID position {p} outside 1..{}", s.len() + 1)));
            }
            let start = p as usize - 1;
            let end = (start + l).min(s.len());
            String(s[start..end].iter().collect())
        }
        BuiltinFn::Find => {
            let hay = args[0].as_str().unwrap_or("");
            let needle = args[1].as_str().unwrap_or("");
            let pos = if needle.is_empty() { 0 } else { hay.find(needle).map(|b| hay[..b].chars().count() + 1).unwrap_or(0) };
            Int(pos.min(i16::MAX as usize) as i16)
        }
        BuiltinFn::Convert(_, to) => args[0].convert(to).map_err(|e| FaultKind::Conversion(e.to_string()))?,
        BuiltinFn::TPlcMs => Time(now),
    })
}
