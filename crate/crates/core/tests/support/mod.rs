//! Random fixtures and a reference filter evaluator shared by the
//! integration and acceptance tests.
//!
//! The evaluator works on raw JSON filter documents, not on parsed
//! filters, and follows the documented matching rules step by step.

#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::{json, Map, Number, Value};

const TOP_KEYS: &[&str] = &["a", "b", "c", "s"];
const PATHS: &[&str] = &["a", "b", "c", "s", "n.x", "n.y", "n.z.w", "missing", "n.missing"];
const STRINGS: &[&str] = &["x", "y", "z", "", "Zed"];

pub fn random_scalar<R: Rng>(rng: &mut R) -> Value {
    match rng.random_range(0..10) {
        0..=2 => json!(rng.random_range(-3i64..=3)),
        3..=4 => json!(f64::from(rng.random_range(-6i32..=6)) / 2.0),
        5..=6 => json!(*STRINGS.choose(rng).unwrap()),
        7 => json!(rng.random_bool(0.5)),
        8 => Value::Null,
        _ => json!(rng.random_range(0..3) as f64),
    }
}

pub fn random_value<R: Rng>(rng: &mut R) -> Value {
    match rng.random_range(0..10) {
        0 => Value::Array((0..rng.random_range(0..3)).map(|_| random_scalar(rng)).collect()),
        1 => json!({"x": random_scalar(rng)}),
        _ => random_scalar(rng),
    }
}

/// Flat keys plus an optional nested object `n`.
pub fn random_doc<R: Rng>(rng: &mut R) -> Map<String, Value> {
    let mut doc = Map::new();
    for key in TOP_KEYS {
        if rng.random_bool(0.8) {
            doc.insert((*key).into(), random_value(rng));
        }
    }
    match rng.random_range(0..4) {
        0 => {}
        1 => {
            doc.insert("n".into(), random_scalar(rng));
        }
        _ => {
            let mut n = Map::new();
            for key in ["x", "y"] {
                if rng.random_bool(0.7) {
                    n.insert(key.into(), random_value(rng));
                }
            }
            if rng.random_bool(0.5) {
                n.insert("z".into(), json!({"w": random_scalar(rng)}));
            }
            doc.insert("n".into(), Value::Object(n));
        }
    }
    doc
}

fn random_operator<R: Rng>(rng: &mut R) -> (&'static str, Value) {
    const OPS: &[&str] = &["$eq", "$ne", "$gt", "$gte", "$lt", "$lte", "$in", "$nin", "$exists"];
    let op = *OPS.choose(rng).unwrap();
    let operand = match op {
        "$eq" | "$ne" => random_value(rng),
        "$in" | "$nin" => Value::Array((0..rng.random_range(0..4)).map(|_| random_value(rng)).collect()),
        "$exists" => json!(rng.random_bool(0.5)),
        _ => random_scalar(rng),
    };
    (op, operand)
}

fn operator_object<R: Rng>(rng: &mut R) -> Map<String, Value> {
    let mut ops = Map::new();
    for _ in 0..rng.random_range(1..=2) {
        let (op, operand) = random_operator(rng);
        ops.insert(op.into(), operand);
    }
    ops
}

/// One `key: value` entry of a filter document.
fn random_entry<R: Rng>(rng: &mut R, depth: u32) -> (String, Value) {
    let path = (*PATHS.choose(rng).unwrap()).to_owned();
    let logical = if depth > 0 { rng.random_range(0..10) } else { 10 };
    match logical {
        0 | 1 => {
            let op = if logical == 0 { "$and" } else { "$or" };
            let items = (0..rng.random_range(1..=3))
                .map(|_| random_filter_at(rng, depth - 1))
                .collect();
            (op.into(), Value::Array(items))
        }
        2 => ("$not".into(), random_filter_at(rng, depth - 1)),
        _ => match rng.random_range(0..5) {
            0 => (path, random_value(rng)),
            1 => {
                let (op, operand) = random_operator(rng);
                (format!("{path}.{op}"), operand)
            }
            2 | 3 => (path, Value::Object(operator_object(rng))),
            _ => (path, json!({"$not": operator_object(rng)})),
        },
    }
}

fn random_filter_at<R: Rng>(rng: &mut R, depth: u32) -> Value {
    let mut filter = Map::new();
    for _ in 0..rng.random_range(1..=2) {
        let (k, v) = random_entry(rng, depth);
        filter.insert(k, v);
    }
    Value::Object(filter)
}

/// A valid filter document of nesting depth at most 3.
pub fn random_filter<R: Rng>(rng: &mut R) -> Value {
    random_filter_at(rng, 3)
}

/// Rebuilds every object with its keys in a random order.
pub fn shuffle_keys<R: Rng>(value: &Value, rng: &mut R) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.shuffle(rng);
            Value::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k.clone(), shuffle_keys(v, rng)))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.iter().map(|v| shuffle_keys(v, rng)).collect()),
        other => other.clone(),
    }
}

/// A random state point with nested objects, arrays, ints and floats.
pub fn random_statepoint<R: Rng>(rng: &mut R) -> Map<String, Value> {
    fn leaf<R: Rng>(rng: &mut R) -> Value {
        match rng.random_range(0..5) {
            0 => json!(rng.random_range(-1_000_000i64..1_000_000)),
            1 => json!(rng.random::<f64>() * 1e3),
            2 => json!(format!("s{}", rng.random_range(0..1_000_000u32))),
            3 => json!(rng.random_bool(0.5)),
            _ => Value::Null,
        }
    }
    fn node<R: Rng>(rng: &mut R, depth: u32) -> Value {
        match if depth == 0 { 0 } else { rng.random_range(0..6) } {
            0..=3 => leaf(rng),
            4 => Value::Array((0..rng.random_range(0..4)).map(|_| node(rng, depth - 1)).collect()),
            _ => Value::Object(object(rng, depth - 1)),
        }
    }
    fn object<R: Rng>(rng: &mut R, depth: u32) -> Map<String, Value> {
        (0..rng.random_range(1..6))
            .map(|_| (format!("k{}", rng.random_range(0..40u32)), node(rng, depth)))
            .collect()
    }
    object(rng, 3)
}

// ---------------------------------------------------------------------
// Reference evaluator
// ---------------------------------------------------------------------

fn get<'a>(doc: &'a Map<String, Value>, path: &str) -> Option<&'a Value> {
    let mut parts = path.split('.');
    let mut current = doc.get(parts.next()?)?;
    for part in parts {
        current = match current {
            Value::Object(m) => m.get(part)?,
            _ => return None,
        };
    }
    Some(current)
}

fn integer(n: &Number) -> Option<i128> {
    n.as_i64().map(i128::from).or_else(|| n.as_u64().map(i128::from))
}

fn numbers_equal(x: &Number, y: &Number) -> bool {
    match (integer(x), integer(y)) {
        (Some(a), Some(b)) => a == b,
        _ => x.as_f64() == y.as_f64(),
    }
}

/// Structural equality where 1 and 1.0 are the same number.
pub fn loose_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => numbers_equal(x, y),
        (Value::Array(xs), Value::Array(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| loose_eq(x, y)),
        (Value::Object(xm), Value::Object(ym)) => {
            xm.len() == ym.len() && xm.iter().all(|(k, x)| ym.get(k).is_some_and(|y| loose_eq(x, y)))
        }
        _ => a == b,
    }
}

fn less(a: &Value, b: &Value) -> Option<bool> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => Some(match (integer(x), integer(y)) {
            (Some(i), Some(j)) => i < j,
            _ => x.as_f64().unwrap() < y.as_f64().unwrap(),
        }),
        (Value::String(x), Value::String(y)) => Some(x < y),
        _ => None,
    }
}

fn apply(op: &str, value: Option<&Value>, operand: &Value) -> bool {
    match op {
        "$exists" => value.is_some() == operand.as_bool().unwrap(),
        "$eq" => value.is_some_and(|v| loose_eq(v, operand)),
        "$ne" => !apply("$eq", value, operand),
        "$in" => value.is_some_and(|v| operand.as_array().unwrap().iter().any(|o| loose_eq(v, o))),
        "$nin" => !apply("$in", value, operand),
        "$lt" => value.and_then(|v| less(v, operand)).unwrap_or(false),
        "$gt" => value.and_then(|v| less(operand, v)).unwrap_or(false),
        "$lte" => {
            apply("$lt", value, operand) || (apply("$eq", value, operand) && less(value.unwrap(), operand).is_some())
        }
        "$gte" => {
            apply("$gt", value, operand) || (apply("$eq", value, operand) && less(value.unwrap(), operand).is_some())
        }
        "$not" => !operand.as_object().unwrap().iter().all(|(o, x)| apply(o, value, x)),
        other => panic!("generator produced unknown operator {other}"),
    }
}

/// Whether `doc` satisfies the raw filter document `filter`.
pub fn reference_matches(filter: &Value, doc: &Map<String, Value>) -> bool {
    filter
        .as_object()
        .unwrap()
        .iter()
        .all(|(key, value)| match key.as_str() {
            "$and" => value.as_array().unwrap().iter().all(|f| reference_matches(f, doc)),
            "$or" => value.as_array().unwrap().iter().any(|f| reference_matches(f, doc)),
            "$not" => !reference_matches(value, doc),
            _ => {
                if let Some((path, op)) = key.rsplit_once('.').filter(|(_, op)| op.starts_with('$')) {
                    return apply(op, get(doc, path), value);
                }
                let target = get(doc, key);
                match value {
                    Value::Object(ops) if !ops.is_empty() && ops.keys().all(|k| k.starts_with('$')) => {
                        ops.iter().all(|(op, operand)| apply(op, target, operand))
                    }
                    _ => apply("$eq", target, value),
                }
            }
        })
}
