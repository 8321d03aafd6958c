//! Canonical JSON encoding of state points and the derived job id.
//!
//! The canonical form is compact JSON with object keys sorted by code point
//! at every level. Integers render as plain digits, floats as the shortest
//! decimal that round-trips to the same binary64 value (always carrying a
//! `.` or exponent, so `1` and `1.0` stay distinct). Negative zero is
//! rendered as `0.0` because it compares equal to positive zero.

use std::fmt;

use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use crate::id::JobId;
use crate::statepoint::{StatePoint, Violation};

/// UTF-8 bytes of the canonical encoding. Used for hashing only.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CanonicalForm(Vec<u8>);

impl CanonicalForm {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        // built exclusively from &str pieces
        std::str::from_utf8(&self.0).expect("canonical form is UTF-8")
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl fmt::Debug for CanonicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("CanonicalForm").field(&self.as_str()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid state point: {}", join_violations(.0))]
pub struct InvalidStatePoint(pub Vec<Violation>);

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Canonical bytes of a state point. Non-finite floats cannot occur: the
/// value model has no representation for them.
pub fn canonicalize(sp: &StatePoint) -> Result<CanonicalForm, InvalidStatePoint> {
    sp.validate().map_err(InvalidStatePoint)?;
    let mut out = String::with_capacity(64);
    write_object(sp.as_map(), &mut out);
    Ok(CanonicalForm(out.into_bytes()))
}

/// Canonical text of any JSON value, without key validation.
pub fn canonical_value_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

/// First 128 bits of SHA-256 over the canonical form, lowercase hex.
pub fn compute_id(sp: &StatePoint) -> Result<JobId, InvalidStatePoint> {
    let canonical = canonicalize(sp)?;
    Ok(id_of_canonical(&canonical))
}

pub(crate) fn id_of_canonical(canonical: &CanonicalForm) -> JobId {
    let digest = Sha256::digest(canonical.as_bytes());
    JobId::from_digest_prefix(&digest[..16])
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(true) => out.push_str("true"),
        Value::Bool(false) => out.push_str("false"),
        Value::Number(n) => write_number(n, out),
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => write_object(map, out),
    }
}

fn write_object(map: &Map<String, Value>, out: &mut String) {
    let mut entries: Vec<(&String, &Value)> = map.iter().collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
    out.push('{');
    for (i, (key, value)) in entries.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_string(key, out);
        out.push(':');
        write_value(value, out);
    }
    out.push('}');
}

pub(crate) fn write_number(n: &Number, out: &mut String) {
    if let Some(i) = n.as_i64() {
        out.push_str(&i.to_string());
    } else if let Some(u) = n.as_u64() {
        out.push_str(&u.to_string());
    } else {
        let f = n.as_f64().expect("serde_json numbers are i64, u64 or finite f64");
        let f = if f == 0.0 { 0.0 } else { f };
        let mut buf = ryu::Buffer::new();
        out.push_str(buf.format_finite(f));
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}
