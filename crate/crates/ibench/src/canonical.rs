//! Canonical JSON: sorted keys and fixed 17-significant-digit float
//! formatting so equal runs serialize byte-for-byte identically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Render a float with 17 significant digits, the round-trip-exact width
/// for f64.
pub fn format_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // keep integral values readable and stable
        format!("{:.1}", v)
    } else {
        format!("{:.16e}", v)
    }
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let _ = write!(out, "{}", format_float(n.as_f64().expect("finite float")));
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", serde_json::to_string(s).expect("string encodes"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's default map is sorted; sort again defensively
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", serde_json::to_string(key).expect("key encodes"));
                out.push(':');
                write_value(out, &map[key]);
            }
            out.push('}');
        }
    }
}

/// Serialize any value to its canonical JSON text.
pub fn to_canonical_string<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &tree);
    out.push('\n');
    Ok(out)
}

/// Write canonical JSON atomically (temp file + rename).
pub fn write_canonical<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = to_canonical_string(value)?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, &text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Hex SHA-256 of a value's canonical form, used as the config hash.
pub fn canonical_hash<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let text = to_canonical_string(value)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_and_floats_fixed_width() {
        let v = json!({"b": 1, "a": 0.1, "c": [1.5, null, "x"]});
        let s = to_canonical_string(&v).unwrap();
        assert_eq!(
            s,
            "{\"a\":1.0000000000000001e-1,\"b\":1,\"c\":[1.5000000000000000e0,null,\"x\"]}\n"
        );
    }

    #[test]
    fn canonical_form_is_stable() {
        let v = json!({"x": 2.0_f64.sqrt(), "y": vec![1, 2, 3]});
        assert_eq!(
            to_canonical_string(&v).unwrap(),
            to_canonical_string(&v).unwrap()
        );
        assert_eq!(canonical_hash(&v).unwrap().len(), 64);
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 2.0_f64.sqrt(), 1.0 / 3.0, 13.52, -0.000123456789] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }
}
