use std::cmp::Ordering;

use serde_json::{Map, Number, Value};

use super::filter::{Comparison, Filter, Op};

/// Anything a filter can be evaluated against.
pub trait Lookup {
    fn lookup(&self, path: &str) -> Option<&Value>;
}

impl Lookup for Map<String, Value> {
    fn lookup(&self, path: &str) -> Option<&Value> {
        lookup_path(self, path)
    }
}

impl<T: Lookup + ?Sized> Lookup for &T {
    fn lookup(&self, path: &str) -> Option<&Value> {
        (**self).lookup(path)
    }
}

/// Resolves a dotted path through nested objects. Arrays are not indexed.
pub fn lookup_path<'a>(doc: &'a Map<String, Value>, path: &str) -> Option<&'a Value> {
    let mut segments = path.split('.');
    let mut current = doc.get(segments.next()?)?;
    for seg in segments {
        current = current.as_object()?.get(seg)?;
    }
    Some(current)
}

pub fn matches<L: Lookup + ?Sized>(filter: &Filter, doc: &L) -> bool {
    match filter {
        Filter::Cmp(c) => matches_comparison(c, doc),
        Filter::And(fs) => fs.iter().all(|f| matches(f, doc)),
        Filter::Or(fs) => fs.iter().any(|f| matches(f, doc)),
        Filter::Not(f) => !matches(f, doc),
    }
}

impl Filter {
    pub fn matches<L: Lookup + ?Sized>(&self, doc: &L) -> bool {
        matches(self, doc)
    }
}

fn matches_comparison<L: Lookup + ?Sized>(c: &Comparison, doc: &L) -> bool {
    let found = doc.lookup(&c.path);
    match (&c.op, found) {
        (Op::Exists(want), v) => v.is_some() == *want,
        (Op::Eq(x), Some(v)) => values_equal(v, x),
        (Op::Eq(_), None) => false,
        (Op::Ne(x), Some(v)) => !values_equal(v, x),
        (Op::Ne(_), None) => true,
        (Op::In(xs), Some(v)) => xs.iter().any(|x| values_equal(v, x)),
        (Op::In(_), None) => false,
        (Op::Nin(xs), Some(v)) => !xs.iter().any(|x| values_equal(v, x)),
        (Op::Nin(_), None) => true,
        (Op::Gt(x), Some(v)) => order(v, x) == Some(Ordering::Greater),
        (Op::Gte(x), Some(v)) => matches!(order(v, x), Some(Ordering::Greater | Ordering::Equal)),
        (Op::Lt(x), Some(v)) => order(v, x) == Some(Ordering::Less),
        (Op::Lte(x), Some(v)) => matches!(order(v, x), Some(Ordering::Less | Ordering::Equal)),
        (Op::Gt(_) | Op::Gte(_) | Op::Lt(_) | Op::Lte(_), None) => false,
    }
}

/// Structural equality where integers and floats of equal value compare
/// equal, recursively through arrays and objects.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => compare_numbers(x, y) == Ordering::Equal,
        (Value::Array(xs), Value::Array(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| values_equal(x, y))
        }
        (Value::Object(xm), Value::Object(ym)) => {
            xm.len() == ym.len() && xm.iter().all(|(k, x)| ym.get(k).is_some_and(|y| values_equal(x, y)))
        }
        _ => a == b,
    }
}

/// Ordering for number/number and string/string pairs only.
fn order(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => Some(compare_numbers(x, y)),
        (Value::String(x), Value::String(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

fn as_int(n: &Number) -> Option<i128> {
    n.as_i64().map(i128::from).or_else(|| n.as_u64().map(i128::from))
}

/// Exact for integer pairs; integer/float pairs compare through f64.
pub(crate) fn compare_numbers(a: &Number, b: &Number) -> Ordering {
    match (as_int(a), as_int(b)) {
        (Some(x), Some(y)) => x.cmp(&y),
        _ => {
            let x = a.as_f64().expect("finite");
            let y = b.as_f64().expect("finite");
            x.partial_cmp(&y).expect("JSON numbers are finite")
        }
    }
}
