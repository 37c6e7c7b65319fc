//! Output formatting: JSON documents and CSV cells with 15 significant digits.

use serde::Serialize;
use serde_json::{Number, Value};

/// `x` rounded to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// CSV/text cell: 15 significant digits, `.` separator, `inf`/`nan` spelled out.
pub fn fmt_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x != 0.0 && !(1e-5..1e16).contains(&x.abs()) {
        format!("{:e}", round15(x))
    } else {
        format!("{}", round15(x))
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = Number::from_f64(round15(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes `value` with every float rounded to 15 significant digits.
/// Non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("report types serialize");
    round_value(&mut v);
    v
}

pub fn to_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(&to_json(value)).expect("values print")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round15(1.0 / 3.0), 0.333333333333333);
        assert_eq!(round15(2.0), 2.0);
        assert_eq!(fmt_number(0.1 + 0.2), "0.3");
        assert_eq!(fmt_number(f64::INFINITY), "inf");
        assert_eq!(fmt_number(1e-300 / 3.0), "3.33333333333333e-301");
    }

    #[test]
    fn json_rounds_nested_floats() {
        let v = to_json(&serde_json::json!({"a": [1.0 / 3.0, 2], "b": {"c": f64::INFINITY}}));
        assert_eq!(v["a"][0].as_f64(), Some(0.333333333333333));
        assert_eq!(v["a"][1].as_u64(), Some(2));
        assert!(v["b"]["c"].is_null());
    }
}
