//! Data-level semantics of the built-in instructions, shared by both
//! backends and by fused pipelines.

use std::collections::HashSet;
use std::ops::Range;
use std::sync::Arc;

use crate::expr::{AggFunction, AggregateSpec, BoundExpr};
use crate::ir::{CollectionKind, CollectionValue, ItemType, Name, Value};

use super::ExecError;

pub(crate) fn runtime(msg: impl Into<String>) -> ExecError {
    ExecError::RuntimeType(msg.into())
}

pub(crate) fn collection(v: &Value) -> Result<&CollectionValue, ExecError> {
    v.as_collection()
        .ok_or_else(|| runtime(format!("expected a collection, found {}", v.shallow_type())))
}

/// `(kind, elem)` of a collection type computed by the typechecker.
pub(crate) fn out_parts(ty: &ItemType) -> (CollectionKind, &ItemType) {
    ty.as_collection().expect("typechecked collection output")
}

/// Builds a collection of type `out`, enforcing the invariants the
/// operation itself cannot guarantee (Set uniqueness, HTab grouping).
pub(crate) fn make(out: &ItemType, elements: Vec<Value>) -> Result<Value, ExecError> {
    let (kind, elem) = out_parts(out);
    Ok(match kind {
        CollectionKind::Set => {
            let mut seen = HashSet::with_capacity(elements.len());
            let unique = elements
                .into_iter()
                .filter(|v| seen.insert(v.clone()))
                .collect();
            Value::collection_raw(kind, elem.clone(), unique, None)
        }
        CollectionKind::HTab => {
            Value::collection(kind, elem.clone(), elements).map_err(|e| runtime(e.to_string()))?
        }
        _ => Value::collection_raw(kind, elem.clone(), elements, None),
    })
}

/// Field positions of `names` in a tuple type.
pub(crate) fn field_indices(elem: &ItemType, names: &[Name]) -> Result<Vec<usize>, ExecError> {
    let fields = elem
        .as_tuple()
        .ok_or_else(|| runtime(format!("expected tuples, found {elem}")))?;
    names
        .iter()
        .map(|n| {
            fields
                .iter()
                .position(|f| &f.name == n)
                .ok_or_else(|| runtime(format!("no field `{n}` in {elem}")))
        })
        .collect()
}

/// Projection of one tuple onto precomputed field positions.
pub(crate) struct Projector {
    names: Arc<[Name]>,
    idx: Vec<usize>,
}

impl Projector {
    pub(crate) fn new(elem: &ItemType, names: Vec<Name>) -> Result<Self, ExecError> {
        let idx = field_indices(elem, &names)?;
        Ok(Self {
            names: names.into(),
            idx,
        })
    }

    pub(crate) fn apply(&self, v: &Value) -> Result<Value, ExecError> {
        let t = v
            .as_tuple()
            .ok_or_else(|| runtime("Proj over a non-tuple item"))?;
        let values: Box<[Value]> = self.idx.iter().map(|&i| t.values()[i].clone()).collect();
        Ok(Value::tuple_from_parts(self.names.clone(), values))
    }
}

pub(crate) fn proj(
    input: &CollectionValue,
    names: Vec<Name>,
    out: &ItemType,
) -> Result<Value, ExecError> {
    let p = Projector::new(input.elem_type(), names)?;
    let rows = input
        .elements()
        .iter()
        .map(|v| p.apply(v))
        .collect::<Result<_, _>>()?;
    make(out, rows)
}

pub(crate) fn map(
    input: &CollectionValue,
    f: &BoundExpr,
    out: &ItemType,
) -> Result<Value, ExecError> {
    let rows = input
        .elements()
        .iter()
        .map(|v| f.eval(v).map_err(ExecError::from))
        .collect::<Result<_, _>>()?;
    make(out, rows)
}

pub(crate) fn select(
    input: &CollectionValue,
    p: &BoundExpr,
    out: &ItemType,
) -> Result<Value, ExecError> {
    let mut rows = Vec::new();
    for v in input.elements() {
        if p.test(v)? {
            rows.push(v.clone());
        }
    }
    make(out, rows)
}

enum Acc {
    Int(i64),
    Float(f64),
    Count(i64),
    Best(Option<Value>),
}

/// Streaming scalar aggregation over tuples.
pub(crate) struct Aggregator {
    names: Arc<[Name]>,
    cols: Vec<(Option<usize>, AggFunction)>,
    accs: Vec<Acc>,
    rows: u64,
}

impl Aggregator {
    pub(crate) fn new(specs: &[AggregateSpec], elem: &ItemType) -> Result<Self, ExecError> {
        let fields = elem
            .as_tuple()
            .ok_or_else(|| runtime(format!("Aggr over non-tuples {elem}")))?;
        let mut cols = Vec::with_capacity(specs.len());
        let mut accs = Vec::with_capacity(specs.len());
        for s in specs {
            let idx = fields.iter().position(|f| f.name == s.input);
            let acc = match s.function {
                AggFunction::Count => Acc::Count(0),
                AggFunction::Min | AggFunction::Max => Acc::Best(None),
                AggFunction::Sum => match idx.map(|i| &fields[i].ty) {
                    Some(t) if *t == ItemType::int64() => Acc::Int(0),
                    Some(t) if *t == ItemType::float64() => Acc::Float(0.0),
                    _ => return Err(runtime(format!("sum over field `{}` of {elem}", s.input))),
                },
            };
            if idx.is_none() && s.function != AggFunction::Count {
                return Err(runtime(format!("no field `{}` in {elem}", s.input)));
            }
            cols.push((idx, s.function));
            accs.push(acc);
        }
        Ok(Self {
            names: specs.iter().map(|s| s.output.clone()).collect(),
            cols,
            accs,
            rows: 0,
        })
    }

    pub(crate) fn push(&mut self, row: &Value) -> Result<(), ExecError> {
        self.rows += 1;
        let t = row
            .as_tuple()
            .ok_or_else(|| runtime("Aggr over a non-tuple item"))?;
        for ((idx, f), acc) in self.cols.iter().zip(self.accs.iter_mut()) {
            let v = idx.map(|i| &t.values()[i]);
            match acc {
                Acc::Count(c) => *c += 1,
                Acc::Int(s) => match v {
                    Some(Value::Int64(x)) => {
                        *s = s.checked_add(*x).ok_or(ExecError::ArithmeticOverflow)?
                    }
                    _ => return Err(runtime("sum expects Int64")),
                },
                Acc::Float(s) => match v {
                    Some(Value::Float64(x)) => *s += *x,
                    _ => return Err(runtime("sum expects Float64")),
                },
                Acc::Best(best) => {
                    let v = v.expect("checked in new");
                    let better = match best {
                        None => true,
                        Some(b) if *f == AggFunction::Min => v < b,
                        Some(b) => v > b,
                    };
                    if better {
                        *best = Some(v.clone());
                    }
                }
            }
        }
        Ok(())
    }

    /// The one-row result; `None` for an empty input when `partial`.
    pub(crate) fn finish(self, partial: bool) -> Result<Option<Value>, ExecError> {
        if partial && self.rows == 0 {
            return Ok(None);
        }
        let mut values = Vec::with_capacity(self.accs.len());
        for (acc, name) in self.accs.into_iter().zip(self.names.iter()) {
            values.push(match acc {
                Acc::Int(s) => Value::Int64(s),
                Acc::Float(s) => Value::Float64(s),
                Acc::Count(c) => Value::Int64(c),
                Acc::Best(Some(v)) => v,
                Acc::Best(None) => return Err(ExecError::EmptyAggregate(name.clone())),
            });
        }
        Ok(Some(Value::tuple_from_parts(self.names, values.into())))
    }
}

pub(crate) fn aggr(
    input: &CollectionValue,
    specs: &[AggregateSpec],
    partial: bool,
    out: &ItemType,
) -> Result<Value, ExecError> {
    let mut agg = Aggregator::new(specs, input.elem_type())?;
    for v in input.elements() {
        agg.push(v)?;
    }
    make(out, agg.finish(partial)?.into_iter().collect())
}

/// `n` contiguous chunk ranges over `m` items; the first `m % n` chunks
/// hold one extra item.
pub fn chunk_ranges(m: usize, n: usize) -> Vec<Range<usize>> {
    let (base, extra) = (m / n, m % n);
    let mut start = 0;
    (0..n)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn split_items(
    items: &[Value],
    n: usize,
    chunk_kind: CollectionKind,
    elem: &ItemType,
) -> Vec<Value> {
    chunk_ranges(items.len(), n)
        .into_iter()
        .map(|r| Value::collection_raw(chunk_kind, elem.clone(), items[r].to_vec(), None))
        .collect()
}

pub(crate) fn split(input: &CollectionValue, n: usize, out: &ItemType) -> Result<Value, ExecError> {
    let (_, chunk) = out_parts(out);
    let (chunk_kind, elem) = out_parts(chunk);
    make(out, split_items(input.elements(), n, chunk_kind, elem))
}

/// Concatenation of the inner collections in outer order.
pub(crate) fn scan(input: &CollectionValue, out: &ItemType) -> Result<Value, ExecError> {
    let mut rows = Vec::new();
    for inner in input.elements() {
        rows.extend_from_slice(collection(inner)?.elements());
    }
    make(out, rows)
}

pub(crate) fn split_vec(
    input: &CollectionValue,
    n: usize,
    out: &ItemType,
) -> Result<Value, ExecError> {
    let mut items = Vec::new();
    for inner in input.elements() {
        items.extend_from_slice(collection(inner)?.elements());
    }
    let (_, chunk) = out_parts(out);
    let (chunk_kind, elem) = out_parts(chunk);
    make(out, split_items(&items, n, chunk_kind, elem))
}

pub(crate) fn mat_vec(input: &CollectionValue, out: &ItemType) -> Value {
    let (_, vec_ty) = out_parts(out);
    let (_, elem) = out_parts(vec_ty);
    let v = Value::collection_raw(
        CollectionKind::Vec,
        elem.clone(),
        input.elements().to_vec(),
        None,
    );
    Value::single(vec_ty.clone(), v)
}

pub(crate) fn wrap(input: &Value) -> Value {
    Value::single(input.shallow_type(), input.clone())
}

pub(crate) fn build_htable(input: &CollectionValue, out: &ItemType) -> Result<Value, ExecError> {
    let (_, ht) = out_parts(out);
    let table = make(ht, input.elements().to_vec())?;
    Ok(Value::single(ht.clone(), table))
}

fn key_val(v: &Value) -> Result<(&Value, &Value), ExecError> {
    match (v.field("key"), v.field("val")) {
        (Some(k), Some(x)) => Ok((k, x)),
        _ => Err(runtime("join input without `key`/`val` fields")),
    }
}

pub(crate) fn join_names() -> Arc<[Name]> {
    ["key", "lval", "rval"]
        .into_iter()
        .map(Name::from)
        .collect()
}

/// Rows produced by probing one tuple against a built table.
pub(crate) fn probe_one(
    row: &Value,
    table: &CollectionValue,
    names: &Arc<[Name]>,
    out: &mut Vec<Value>,
) -> Result<(), ExecError> {
    let (k, lval) = key_val(row)?;
    for hit in &table.elements()[table.htab_lookup(k)] {
        let (_, rval) = key_val(hit)?;
        out.push(Value::tuple_from_parts(
            names.clone(),
            vec![k.clone(), lval.clone(), rval.clone()].into(),
        ));
    }
    Ok(())
}

/// The HTab inside a `Single<HTab<T>>`.
pub(crate) fn htable_of(v: &Value) -> Result<&CollectionValue, ExecError> {
    let single = collection(v)?;
    let inner = single
        .elements()
        .first()
        .ok_or_else(|| runtime("empty Single"))?;
    let t = collection(inner)?;
    if t.kind() != CollectionKind::HTab {
        return Err(runtime(format!("expected an HTab, found {}", t.kind())));
    }
    Ok(t)
}

pub(crate) fn probe(
    probe: &CollectionValue,
    table: &CollectionValue,
    out: &ItemType,
) -> Result<Value, ExecError> {
    let names = join_names();
    let mut rows = Vec::new();
    for row in probe.elements() {
        probe_one(row, table, &names, &mut rows)?;
    }
    make(out, rows)
}

/// Equi-join on `key` via a transient hash table.
pub(crate) fn join(
    left: &CollectionValue,
    right: &CollectionValue,
    out: &ItemType,
) -> Result<Value, ExecError> {
    let ht = ItemType::collection(CollectionKind::HTab, right.elem_type().clone());
    let table = make(&ht, right.elements().to_vec())?;
    probe(left, table.as_collection().expect("collection"), out)
}

fn matrix_dims(c: &CollectionValue) -> Result<(usize, usize), ExecError> {
    match (c.kind(), c.extents()) {
        (CollectionKind::KDSeq(2), Some(&[r, k])) => Ok((r, k)),
        _ => Err(runtime(
            "MMMult expects 2DSeq operands with recorded extents",
        )),
    }
}

pub(crate) fn mmmult(a: &CollectionValue, b: &CollectionValue) -> Result<Value, ExecError> {
    let (n, k) = matrix_dims(a)?;
    let (k2, m) = matrix_dims(b)?;
    if k != k2 {
        return Err(ExecError::DimensionMismatch {
            left: vec![n, k],
            right: vec![k2, m],
        });
    }
    let (x, y) = (a.elements(), b.elements());
    let mut data = Vec::with_capacity(n * m);
    if *a.elem_type() == ItemType::int64() {
        for i in 0..n {
            for j in 0..m {
                let mut s: i64 = 0;
                for l in 0..k {
                    let p = x[i * k + l]
                        .as_i64()
                        .zip(y[l * m + j].as_i64())
                        .ok_or_else(|| runtime("MMMult over mixed domains"))?;
                    s =
                        p.0.checked_mul(p.1)
                            .and_then(|t| s.checked_add(t))
                            .ok_or(ExecError::ArithmeticOverflow)?;
                }
                data.push(Value::Int64(s));
            }
        }
    } else {
        let xf: Vec<f64> = x.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect();
        let yf: Vec<f64> = y.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect();
        for i in 0..n {
            for j in 0..m {
                let mut s = 0.0;
                for l in 0..k {
                    s += xf[i * k + l] * yf[l * m + j];
                }
                data.push(Value::Float64(s));
            }
        }
    }
    Ok(Value::collection_raw(
        CollectionKind::KDSeq(2),
        a.elem_type().clone(),
        data,
        Some(vec![n, m]),
    ))
}

/// A Bool flag: an atom or a one-element collection of Bool.
pub(crate) fn flag(v: &Value) -> Result<bool, ExecError> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Collection(c) => match c.elements() {
            [Value::Bool(b)] => Ok(*b),
            other => Err(runtime(format!(
                "flag collection must hold exactly one Bool, holds {} item(s)",
                other.len()
            ))),
        },
        other => Err(runtime(format!(
            "expected a Bool flag, found {}",
            other.shallow_type()
        ))),
    }
}
