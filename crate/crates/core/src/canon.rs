//! Canonical JSON serialization and content digests.
//!
//! Every JSON artifact this toolkit writes (graph files, label manifests,
//! batch manifests, reports) goes through [`to_canonical_json`]: keys sorted,
//! two-space indentation, and floats printed with 17 significant digits so
//! parsing recovers the exact bit pattern. Identical values always produce
//! identical bytes, which makes golden-file diffs and content digests stable.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Serialize any value to canonical JSON text (trailing newline included).
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)
        .map_err(|e| Error::InvalidInput(format!("not serializable: {e}")))?;
    let mut out = String::new();
    write_value(&tree, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

/// Write canonical JSON to a file.
pub fn write_canonical_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_canonical_json(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Hex SHA-256 of a value's canonical JSON bytes.
pub fn digest_of<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(to_canonical_json(value)?.as_bytes()))
}

/// First 8 hex characters of a digest, used in bundle ids.
pub fn short_digest(full: &str) -> &str {
    &full[..full.len().min(8)]
}

fn write_value(value: &Value, indent: usize, out: &mut String) -> Result<()> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out)?,
        Value::String(s) => write_escaped(s, out),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline_indent(indent + 1, out);
                    write_value(item, indent + 1, out)?;
                }
                newline_indent(indent, out);
                out.push(']');
            }
        }
        Value::Object(map) => {
            // serde_json's map is BTreeMap-backed, so iteration is key-sorted.
            if map.is_empty() {
                out.push_str("{}");
            } else {
                out.push('{');
                for (i, (key, item)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline_indent(indent + 1, out);
                    write_escaped(key, out);
                    out.push_str(": ");
                    write_value(item, indent + 1, out)?;
                }
                newline_indent(indent, out);
                out.push('}');
            }
        }
    }
    Ok(())
}

fn write_number(n: &serde_json::Number, out: &mut String) -> Result<()> {
    if let Some(u) = n.as_u64() {
        let _ = write!(out, "{u}");
    } else if let Some(i) = n.as_i64() {
        let _ = write!(out, "{i}");
    } else if let Some(f) = n.as_f64() {
        if !f.is_finite() {
            return Err(Error::InvalidInput("non-finite float in JSON output".into()));
        }
        // 17 significant digits round-trips every finite f64 exactly.
        let _ = write!(out, "{f:.16e}");
    } else {
        return Err(Error::InvalidInput(format!("unsupported JSON number {n}")));
    }
    Ok(())
}

fn write_escaped(s: &str, out: &mut String) {
    // Reuse serde_json's string escaping rules.
    out.push_str(&Value::String(s.to_owned()).to_string());
}

fn newline_indent(indent: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn floats_round_trip_exactly() {
        let values = [
            0.1_f64,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            1.7976931348623157e308,
            -0.0,
            12.75,
            2.0_f64.powi(-52),
        ];
        for v in values {
            let text = to_canonical_json(&v).unwrap();
            let back: f64 = serde_json::from_str(text.trim()).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{text}");
        }
    }

    #[test]
    fn keys_sorted_and_stable() {
        let mut map = BTreeMap::new();
        map.insert("zebra", 1u32);
        map.insert("apple", 2u32);
        let a = to_canonical_json(&map).unwrap();
        assert!(a.find("apple").unwrap() < a.find("zebra").unwrap());
        assert_eq!(a, to_canonical_json(&map).unwrap());
    }

    #[test]
    fn integers_stay_plain() {
        let text = to_canonical_json(&vec![0u64, 800, u64::MAX]).unwrap();
        assert!(text.contains("800"));
        assert!(!text.contains("8.0"));
    }
}
