use std::fmt;

use serde_json::{Map, Value};

use super::QueryError;

/// Parsed filter expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Filter {
    Cmp(Comparison),
    /// Non-empty.
    And(Vec<Filter>),
    /// Non-empty.
    Or(Vec<Filter>),
    Not(Box<Filter>),
}

/// A single path/operator/operand test.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Dotted key path.
    pub path: String,
    pub op: Op,
}

/// Comparison operator together with its operand. Operand shapes are
/// enforced by construction: `In`/`Nin` carry lists, `Exists` a flag, the
/// ordering operators a scalar.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Eq(Value),
    Ne(Value),
    Gt(Value),
    Gte(Value),
    Lt(Value),
    Lte(Value),
    In(Vec<Value>),
    Nin(Vec<Value>),
    Exists(bool),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Eq(_) => "$eq",
            Op::Ne(_) => "$ne",
            Op::Gt(_) => "$gt",
            Op::Gte(_) => "$gte",
            Op::Lt(_) => "$lt",
            Op::Lte(_) => "$lte",
            Op::In(_) => "$in",
            Op::Nin(_) => "$nin",
            Op::Exists(_) => "$exists",
        }
    }

    fn operand_json(&self) -> Value {
        match self {
            Op::Eq(v) | Op::Ne(v) | Op::Gt(v) | Op::Gte(v) | Op::Lt(v) | Op::Lte(v) => v.clone(),
            Op::In(vs) | Op::Nin(vs) => Value::Array(vs.clone()),
            Op::Exists(b) => Value::Bool(*b),
        }
    }
}

impl Filter {
    pub fn cmp(path: impl Into<String>, op: Op) -> Self {
        Filter::Cmp(Comparison { path: path.into(), op })
    }

    /// Conjunction that collapses a single member.
    pub fn and(mut members: Vec<Filter>) -> Self {
        assert!(!members.is_empty(), "And requires at least one member");
        if members.len() == 1 {
            members.pop().unwrap()
        } else {
            Filter::And(members)
        }
    }

    /// Canonical JSON form; [`parse_filter`] reads it back to an equal
    /// expression.
    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        match self {
            Filter::Cmp(c) => {
                let mut ops = Map::new();
                ops.insert(c.op.name().to_owned(), c.op.operand_json());
                out.insert(c.path.clone(), Value::Object(ops));
            }
            Filter::And(fs) => {
                out.insert("$and".into(), Value::Array(fs.iter().map(Filter::to_json).collect()));
            }
            Filter::Or(fs) => {
                out.insert("$or".into(), Value::Array(fs.iter().map(Filter::to_json).collect()));
            }
            Filter::Not(f) => {
                out.insert("$not".into(), f.to_json());
            }
        }
        Value::Object(out)
    }

    /// Every dotted path the filter inspects.
    pub fn paths(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_paths(&mut out);
        out
    }

    fn collect_paths<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Filter::Cmp(c) => out.push(&c.path),
            Filter::And(fs) | Filter::Or(fs) => fs.iter().for_each(|f| f.collect_paths(out)),
            Filter::Not(f) => f.collect_paths(out),
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Parses a filter document. An empty document yields `None`, which
/// selects everything.
pub fn parse_filter(doc: &Map<String, Value>) -> Result<Option<Filter>, QueryError> {
    let conj = parse_object(doc, "")?;
    Ok(if conj.is_empty() { None } else { Some(Filter::and(conj)) })
}

/// Parses any JSON value as a filter document.
pub fn parse_filter_value(value: &Value) -> Result<Option<Filter>, QueryError> {
    match value {
        Value::Object(map) => parse_filter(map),
        other => Err(QueryError::parse(
            "",
            format!("filter must be an object, found {other}"),
        )),
    }
}

fn join(at: &str, key: &str) -> String {
    if at.is_empty() {
        key.to_owned()
    } else {
        format!("{at}/{key}")
    }
}

fn parse_object(doc: &Map<String, Value>, at: &str) -> Result<Vec<Filter>, QueryError> {
    doc.iter().map(|(key, value)| parse_entry(key, value, at)).collect()
}

pub(super) fn parse_entry(key: &str, value: &Value, at: &str) -> Result<Filter, QueryError> {
    let here = join(at, key);
    if let Some(op) = key.strip_prefix('$') {
        return match op {
            "and" | "or" => {
                let items = value
                    .as_array()
                    .ok_or_else(|| QueryError::parse(&here, "expected an array of filters"))?;
                if items.is_empty() {
                    return Err(QueryError::parse(&here, "must not be empty"));
                }
                let members = items
                    .iter()
                    .enumerate()
                    .map(|(i, item)| nested_filter(item, &format!("{here}[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(if op == "and" {
                    Filter::And(members)
                } else {
                    Filter::Or(members)
                })
            }
            "not" => Ok(Filter::Not(Box::new(nested_filter(value, &here)?))),
            _ => Err(QueryError::parse(&here, format!("unknown operator {key}"))),
        };
    }

    let segments: Vec<&str> = key.split('.').collect();
    let (path_segments, suffix_op) = match segments.split_last() {
        Some((last, rest)) if last.starts_with('$') => (rest, Some(*last)),
        _ => (&segments[..], None),
    };
    if path_segments.is_empty() {
        return Err(QueryError::parse(&here, "missing key path"));
    }
    for seg in path_segments {
        if seg.is_empty() {
            return Err(QueryError::parse(&here, "empty path segment"));
        }
        if seg.starts_with('$') {
            return Err(QueryError::parse(
                &here,
                format!("operator {seg} must be the last segment"),
            ));
        }
    }
    let path = path_segments.join(".");

    match suffix_op {
        Some(op) => field_operator(&path, op, value, &here),
        None => match value {
            Value::Object(ops) if !ops.is_empty() && ops.keys().any(|k| k.starts_with('$')) => {
                if !ops.keys().all(|k| k.starts_with('$')) {
                    return Err(QueryError::parse(&here, "cannot mix operators and plain keys"));
                }
                let members = ops
                    .iter()
                    .map(|(op, operand)| field_operator(&path, op, operand, &join(&here, op)))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Filter::and(members))
            }
            _ => Ok(Filter::cmp(path, Op::Eq(value.clone()))),
        },
    }
}

fn nested_filter(value: &Value, at: &str) -> Result<Filter, QueryError> {
    let map = value
        .as_object()
        .ok_or_else(|| QueryError::parse(at, "expected a filter object"))?;
    let conj = parse_object(map, at)?;
    if conj.is_empty() {
        return Err(QueryError::parse(at, "empty filter"));
    }
    Ok(Filter::and(conj))
}

fn field_operator(path: &str, op: &str, operand: &Value, at: &str) -> Result<Filter, QueryError> {
    let scalar = || -> Result<Value, QueryError> {
        match operand {
            Value::Array(_) | Value::Object(_) => Err(QueryError::parse(at, format!("{op} requires a scalar operand"))),
            v => Ok(v.clone()),
        }
    };
    let list = || -> Result<Vec<Value>, QueryError> {
        operand
            .as_array()
            .cloned()
            .ok_or_else(|| QueryError::parse(at, format!("{op} requires an array operand")))
    };
    let op = match op {
        "$eq" => Op::Eq(operand.clone()),
        "$ne" => Op::Ne(operand.clone()),
        "$gt" => Op::Gt(scalar()?),
        "$gte" => Op::Gte(scalar()?),
        "$lt" => Op::Lt(scalar()?),
        "$lte" => Op::Lte(scalar()?),
        "$in" => Op::In(list()?),
        "$nin" => Op::Nin(list()?),
        "$exists" => Op::Exists(
            operand
                .as_bool()
                .ok_or_else(|| QueryError::parse(at, "$exists requires a boolean operand"))?,
        ),
        "$not" => {
            // field-level negation: {"p": {"$not": {"$gt": 1}}}
            let ops = operand
                .as_object()
                .filter(|m| !m.is_empty() && m.keys().all(|k| k.starts_with('$')))
                .ok_or_else(|| QueryError::parse(at, "$not requires an operator object"))?;
            let members = ops
                .iter()
                .map(|(o, v)| field_operator(path, o, v, &join(at, o)))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Filter::Not(Box::new(Filter::and(members))));
        }
        other => return Err(QueryError::parse(at, format!("unknown operator {other}"))),
    };
    Ok(Filter::cmp(path, op))
}
