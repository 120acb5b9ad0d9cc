//! Result comparison and digests.
//!
//! Results of a lowered program arrive as `Single<Vec<T>>` where the
//! high-level program returns a Bag or Seq; [`rows`] reads both the same
//! way. Comparisons tolerate Bag reordering and a relative error on floats.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::ir::{CollectionKind, Value};

pub const DEFAULT_REL_TOL: f64 = 1e-9;

pub fn floats_close(a: f64, b: f64, rel: f64) -> bool {
    if a == b || (a.is_nan() && b.is_nan()) {
        return true;
    }
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= rel * scale
}

/// Rows of a result: the elements of a collection, or of the vector inside
/// a `Single<Vec<T>>`. The flag says whether their order is meaningful.
pub fn rows(v: &Value) -> Option<(Vec<Value>, bool)> {
    let c = v.as_collection()?;
    if c.kind() == CollectionKind::Single {
        if let Some(inner) = c.elements()[0]
            .as_collection()
            .filter(|i| i.kind() == CollectionKind::Vec)
        {
            return Some((inner.elements().to_vec(), false));
        }
    }
    let ordered = matches!(
        c.kind(),
        CollectionKind::Seq | CollectionKind::KDSeq(_) | CollectionKind::Single
    );
    Some((c.elements().to_vec(), ordered))
}

/// Deep equality with float tolerance; unordered collections are compared
/// as sorted multisets.
pub fn approx_eq(a: &Value, b: &Value, rel: f64) -> bool {
    match (a, b) {
        (Value::Float64(x), Value::Float64(y)) => floats_close(*x, *y, rel),
        (Value::Tuple(x), Value::Tuple(y)) => {
            x.names() == y.names()
                && x.values()
                    .iter()
                    .zip(y.values())
                    .all(|(p, q)| approx_eq(p, q, rel))
        }
        (Value::Collection(x), Value::Collection(y)) => {
            if x.kind() != y.kind() || x.elem_type() != y.elem_type() || x.extents() != y.extents()
            {
                return false;
            }
            let ordered = !x.kind().is_unordered();
            elements_approx_eq(x.elements(), y.elements(), ordered, rel)
        }
        _ => a == b,
    }
}

fn elements_approx_eq(a: &[Value], b: &[Value], ordered: bool, rel: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    if ordered {
        return a.iter().zip(b).all(|(p, q)| approx_eq(p, q, rel));
    }
    let mut x: Vec<&Value> = a.iter().collect();
    let mut y: Vec<&Value> = b.iter().collect();
    x.sort();
    y.sort();
    x.into_iter().zip(y).all(|(p, q)| approx_eq(p, q, rel))
}

/// Compares results across the abstract and physical views.
pub fn same_rows(expected: &Value, got: &Value, rel: f64) -> bool {
    match (rows(expected), rows(got)) {
        (Some((a, ao)), Some((b, bo))) => elements_approx_eq(&a, &b, ao && bo, rel),
        _ => approx_eq(expected, got, rel),
    }
}

fn canonical(v: &Value, out: &mut String) {
    match v {
        Value::Bool(b) => write!(out, "{b}").unwrap(),
        Value::Int64(i) => write!(out, "{i}").unwrap(),
        Value::Date(d) => write!(out, "d{d}").unwrap(),
        Value::Float64(f) => write!(out, "{f:.9e}").unwrap(),
        Value::Text(t) => write!(out, "{t:?}").unwrap(),
        Value::Tuple(t) => {
            out.push('(');
            for (i, (n, x)) in t.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{n}=").unwrap();
                canonical(x, out);
            }
            out.push(')');
        }
        Value::Collection(_) => {
            let (elems, ordered) = rows(v).expect("collection");
            let mut parts: Vec<String> = elems
                .iter()
                .map(|e| {
                    let mut s = String::new();
                    canonical(e, &mut s);
                    s
                })
                .collect();
            if !ordered {
                parts.sort();
            }
            out.push('[');
            out.push_str(&parts.join(","));
            out.push(']');
        }
    }
}

/// SHA-256 over a canonical rendering of the results. Bags and vectors are
/// rendered as sorted multisets and floats with ten significant digits, so
/// equal results from either backend or either view hash the same.
pub fn digest(values: &[Value]) -> String {
    let mut text = String::new();
    for v in values {
        canonical(v, &mut text);
        text.push('\n');
    }
    hex::encode(Sha256::digest(text.as_bytes()))
}
