//! Fixed-precision real formatting for line-oriented text artifacts.
//!
//! Reals are written with 17 significant digits in exponent form, which is
//! enough for every `f64` to parse back to the identical bit pattern. The
//! output is valid JSON number syntax.

/// One real, e.g. `-1.2500000000000000e-1`.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// A JSON array of reals.
pub fn reals(vs: &[f64]) -> String {
    let mut out = String::with_capacity(vs.len() * 24 + 2);
    out.push('[');
    for (i, v) in vs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&real(*v));
    }
    out.push(']');
    out
}

/// Compact JSON where every non-integer number is written with [`real`].
pub fn json(value: &serde_json::Value) -> String {
    let mut out = String::new();
    write_json(value, &mut out);
    out
}

/// [`json`] applied to any serializable value.
pub fn to_json<T: serde::Serialize>(value: &T) -> crate::Result<String> {
    Ok(json(&serde_json::to_value(value)?))
}

fn write_json(value: &serde_json::Value, out: &mut String) {
    use serde_json::Value;
    match value {
        Value::Number(n) if n.is_f64() => out.push_str(&real(n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(v, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_json(v, out);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(reals(&[1.0, -2.5]), "[1.0000000000000000e0,-2.5000000000000000e0]");
    }

    #[test]
    fn json_writes_full_precision_reals() {
        let v = serde_json::json!({"b": [0.1, 2], "a": "x\"y", "c": null});
        assert_eq!(json(&v), r#"{"a":"x\"y","b":[1.0000000000000001e-1,2],"c":null}"#);
    }

    proptest! {
        #[test]
        fn parses_back_bit_exact(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back: f64 = real(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
            let json: Vec<f64> = serde_json::from_str(&reals(&[v])).unwrap();
            prop_assert_eq!(json[0].to_bits(), v.to_bits());
        }
    }
}
