//! State points: the parameter metadata that addresses one job.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Nested mapping of parameter metadata.
///
/// Keys keep their insertion order in memory and on disk; identity is
/// derived from the canonical form, so order never affects the id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatePoint(Map<String, Value>);

impl StatePoint {
    pub fn new() -> Self {
        Self(Map::new())
    }

    pub fn from_map(map: Map<String, Value>) -> Self {
        Self(map)
    }

    /// Parses JSON text; the top level must be an object.
    pub fn from_json_str(text: &str) -> Result<Self, StatePointParseError> {
        match serde_json::from_str::<Value>(text)? {
            Value::Object(map) => Ok(Self(map)),
            other => Err(StatePointParseError::NotAnObject(kind_name(&other))),
        }
    }

    /// Inserts a float, rejecting NaN and infinities.
    pub fn insert_f64(&mut self, key: impl Into<String>, value: f64) -> Result<(), NonFiniteFloat> {
        let key = key.into();
        let number = serde_json::Number::from_f64(value).ok_or(NonFiniteFloat { key: key.clone() })?;
        self.0.insert(key, Value::Number(number));
        Ok(())
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<Value>) -> Option<Value> {
        self.0.insert(key.into(), value.into())
    }

    pub fn as_map(&self) -> &Map<String, Value> {
        &self.0
    }

    pub fn into_map(self) -> Map<String, Value> {
        self.0
    }

    /// Checks every key at every nesting level, arrays included.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let violations = validate_keys(&self.0);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}

impl Deref for StatePoint {
    type Target = Map<String, Value>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl From<Map<String, Value>> for StatePoint {
    fn from(map: Map<String, Value>) -> Self {
        Self(map)
    }
}

impl TryFrom<Value> for StatePoint {
    type Error = StatePointParseError;

    fn try_from(value: Value) -> Result<Self, Self::Error> {
        match value {
            Value::Object(map) => Ok(Self(map)),
            other => Err(StatePointParseError::NotAnObject(kind_name(&other))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StatePointParseError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected a JSON object, found {0}")]
    NotAnObject(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("non-finite float for key {key:?}")]
pub struct NonFiniteFloat {
    pub key: String,
}

/// A single key that breaks the state point rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Location of the offending key; array positions appear as `[i]`.
    pub path: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    EmptyKey,
    DotInKey,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::EmptyKey => write!(f, "empty key at {:?}", self.path),
            ViolationKind::DotInKey => write!(f, "key {:?} contains '.'", self.path),
        }
    }
}

/// Same key rules as [`StatePoint::validate`], for any JSON object
/// (job documents share them).
pub fn validate_keys(map: &Map<String, Value>) -> Vec<Violation> {
    let mut out = Vec::new();
    walk_object(map, "", &mut out);
    out
}

fn walk_object(map: &Map<String, Value>, prefix: &str, out: &mut Vec<Violation>) {
    for (key, value) in map {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        if key.is_empty() {
            out.push(Violation {
                path: path.clone(),
                kind: ViolationKind::EmptyKey,
            });
        } else if key.contains('.') {
            out.push(Violation {
                path: path.clone(),
                kind: ViolationKind::DotInKey,
            });
        }
        walk_value(value, &path, out);
    }
}

fn walk_value(value: &Value, path: &str, out: &mut Vec<Violation>) {
    match value {
        Value::Object(inner) => walk_object(inner, path, out),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                walk_value(item, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

pub(crate) fn kind_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
