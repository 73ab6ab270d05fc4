//! Canonical JSON emission.
//!
//! Reports must serialize byte-identically across runs, so rather than rely
//! on map iteration order this module builds an explicit ordered tree and
//! prints floats with a fixed 17-significant-digit scientific format (enough
//! to round-trip every f64).

use std::fmt::Write as _;

/// Ordered JSON value; object keys keep insertion order.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn object() -> Json {
        Json::Object(Vec::new())
    }

    /// Appends a field; panics on duplicate keys (schema bug, not data).
    pub fn push(&mut self, key: &str, value: Json) -> &mut Json {
        match self {
            Json::Object(fields) => {
                assert!(
                    fields.iter().all(|(k, _)| k != key),
                    "duplicate JSON key '{key}'"
                );
                fields.push((key.to_string(), value));
                self
            }
            _ => panic!("push on non-object"),
        }
    }

    pub fn floats(values: &[f64]) -> Json {
        Json::Array(values.iter().map(|&v| Json::Float(v)).collect())
    }

    /// Canonical text: two-space indent, `\n` separators, fixed float format.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        self.write_indented(&mut out, 0);
        out.push('\n');
        out
    }

    fn write_indented(&self, out: &mut String, level: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::Float(v) => out.push_str(&format_float(*v)),
            Json::Str(s) => write_escaped(out, s),
            Json::Array(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    indent(out, level + 1);
                    item.write_indented(out, level + 1);
                }
                out.push('\n');
                indent(out, level);
                out.push(']');
            }
            Json::Object(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (key, value)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    indent(out, level + 1);
                    write_escaped(out, key);
                    out.push_str(": ");
                    value.write_indented(out, level + 1);
                }
                out.push('\n');
                indent(out, level);
                out.push('}');
            }
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Fixed-width scientific notation with 16 fractional digits (17 significant
/// digits total), which round-trips any finite f64.  Non-finite values map to
/// JSON null.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return "null".to_string();
    }
    if v == 0.0 {
        // Normalize -0.0 so a sign bit cannot break byte-identity.
        return "0.0e0".to_string();
    }
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for &v in &[
            0.1,
            -3.5e-12,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.02e23,
            f64::MIN_POSITIVE,
        ] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "lost bits for {v} via {s}");
        }
        assert_eq!(format_float(0.0), "0.0e0");
        assert_eq!(format_float(-0.0), "0.0e0");
        assert_eq!(format_float(f64::NAN), "null");
    }

    #[test]
    fn canonical_output_is_stable_and_ordered() {
        let mut obj = Json::object();
        obj.push("zeta", Json::Int(1));
        obj.push("alpha", Json::floats(&[1.5, 2.5]));
        obj.push("name", Json::Str("he\"llo".to_string()));
        let text = obj.to_canonical_string();
        let expected = "{\n  \"zeta\": 1,\n  \"alpha\": [\n    1.5000000000000000e0,\n    2.5000000000000000e0\n  ],\n  \"name\": \"he\\\"llo\"\n}\n";
        assert_eq!(text, expected);
        // Re-emission is byte-identical.
        assert_eq!(text, obj.to_canonical_string());
    }

    #[test]
    #[should_panic(expected = "duplicate JSON key")]
    fn duplicate_keys_panic() {
        let mut obj = Json::object();
        obj.push("k", Json::Int(1));
        obj.push("k", Json::Int(2));
    }
}
