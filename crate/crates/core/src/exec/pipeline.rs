//! Fused execution of pipeline regions as pull-based iterator chains.
//!
//! Operators inside a region stream tuples to their consumer; the only
//! collection built is the region's result. Operators without a streaming
//! form fall back to materialization, which the intermediate counter
//! records.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::Ordering;
use std::sync::Arc;

use crate::expr::BoundExpr;
use crate::flavors::{highlevel, lowlevel, TypeEnv, TypeError};
use crate::ir::{CollectionKind, CollectionValue, ItemType, Program, RegId, Value};

use super::ops::{self, runtime};
use super::{ExecError, Machine};

type Stream<'s> = Box<dyn Iterator<Item = Result<Value, ExecError>> + 's>;

/// Iterates a shared collection without copying it.
struct Elements {
    c: Arc<CollectionValue>,
    i: usize,
}

impl Iterator for Elements {
    type Item = Result<Value, ExecError>;
    fn next(&mut self) -> Option<Self::Item> {
        let v = self.c.elements().get(self.i)?.clone();
        self.i += 1;
        Some(Ok(v))
    }
}

fn elements(v: &Value) -> Result<Elements, ExecError> {
    match v {
        Value::Collection(c) => Ok(Elements { c: c.clone(), i: 0 }),
        other => Err(runtime(format!(
            "expected a collection, found {}",
            other.shallow_type()
        ))),
    }
}

struct Region<'m, 'a, 'r> {
    m: &'m Machine<'a, 'r>,
    body: &'m Program,
    env: Arc<TypeEnv>,
    values: HashMap<RegId, Value>,
    producer: HashMap<RegId, usize>,
}

pub(super) fn run_fused(
    m: &Machine<'_, '_>,
    body: &Program,
    inputs: Vec<Value>,
) -> Result<Vec<Value>, ExecError> {
    let env = m.types(body)?;
    for _ in &body.body {
        m.tick()?;
    }
    let values = body
        .params
        .iter()
        .map(|r| r.id.clone())
        .zip(inputs)
        .collect();
    let producer = body
        .body
        .iter()
        .enumerate()
        .flat_map(|(i, instr)| instr.outputs.iter().map(move |o| (o.clone(), i)))
        .collect();
    let region = Region {
        m,
        body,
        env,
        values,
        producer,
    };
    let results = body
        .results()
        .ok_or_else(|| runtime("pipeline without Return"))?;
    let out = results
        .iter()
        .map(|r| region.result(r))
        .collect::<Result<Vec<_>, _>>()?;
    m.shared
        .counters
        .terminal
        .fetch_add(out.len() as u64, Ordering::Relaxed);
    Ok(out)
}

impl<'m, 'a, 'r> Region<'m, 'a, 'r> {
    fn elem_type(&self, reg: &RegId) -> Result<&ItemType, ExecError> {
        self.env[reg]
            .as_collection()
            .map(|(_, e)| e)
            .ok_or_else(|| runtime(format!("register `{reg}` is not a collection")))
    }

    fn count_intermediate(&self) {
        self.m
            .shared
            .counters
            .intermediate
            .fetch_add(1, Ordering::Relaxed);
    }

    /// The region's result: drains the stream of `reg` into its type.
    fn result(&self, reg: &RegId) -> Result<Value, ExecError> {
        if let Some(v) = self.values.get(reg) {
            return Ok(v.clone());
        }
        let instr = &self.body.body[self.producer[reg]];
        let out_ty = &self.env[reg];
        if instr.is(lowlevel::NAME, lowlevel::MAT_VEC) {
            let rows = self
                .stream(&instr.inputs[0])?
                .collect::<Result<Vec<_>, _>>()?;
            let (_, vec_ty) = ops::out_parts(out_ty);
            let (_, elem) = ops::out_parts(vec_ty);
            let v = Value::collection_unchecked(CollectionKind::Vec, elem.clone(), rows);
            return Ok(Value::single(vec_ty.clone(), v));
        }
        let rows = self.stream(reg)?.collect::<Result<Vec<_>, _>>()?;
        ops::make(out_ty, rows)
    }

    fn stream<'s>(&'s self, reg: &RegId) -> Result<Stream<'s>, ExecError> {
        if let Some(v) = self.values.get(reg) {
            return Ok(Box::new(elements(v)?));
        }
        let instr = &self.body.body[self.producer[reg]];
        let input = |k: usize| &instr.inputs[k];
        let bound = || -> Result<BoundExpr, ExecError> {
            let e = instr.params[0].as_expr().expect("typechecked");
            Ok(BoundExpr::bind(e, self.elem_type(input(0))?).map_err(TypeError::from)?)
        };
        let (flavor, op) = (&*instr.flavor, &*instr.opcode);
        Ok(match (flavor, op) {
            (lowlevel::NAME, lowlevel::SCAN_VEC) => {
                let upstream = self.stream(input(0))?;
                Box::new(upstream.flat_map(|inner| -> Stream<'s> {
                    match inner.and_then(|v| elements(&v)) {
                        Ok(it) => Box::new(it),
                        Err(e) => Box::new(std::iter::once(Err(e))),
                    }
                }))
            }
            (highlevel::NAME, highlevel::SELECT) => {
                let p = bound()?;
                Box::new(self.stream(input(0))?.filter_map(move |row| match row {
                    Ok(v) => match p.test(&v) {
                        Ok(true) => Some(Ok(v)),
                        Ok(false) => None,
                        Err(e) => Some(Err(e.into())),
                    },
                    Err(e) => Some(Err(e)),
                }))
            }
            (highlevel::NAME, highlevel::EXPROJ | highlevel::MAP) => {
                let f = bound()?;
                Box::new(
                    self.stream(input(0))?
                        .map(move |row| row.and_then(|v| f.eval(&v).map_err(ExecError::from))),
                )
            }
            (highlevel::NAME, highlevel::PROJ) => {
                let names = highlevel::proj_fields(&instr.params)?;
                let p = ops::Projector::new(self.elem_type(input(0))?, names)?;
                let projected = self
                    .stream(input(0))?
                    .map(move |row| row.and_then(|v| p.apply(&v)));
                if self.env[reg].as_collection().map(|(k, _)| k) == Some(CollectionKind::Set) {
                    let mut seen = HashSet::new();
                    Box::new(projected.filter(move |row| match row {
                        Ok(v) => seen.insert(v.clone()),
                        Err(_) => true,
                    }))
                } else {
                    Box::new(projected)
                }
            }
            (lowlevel::NAME, lowlevel::PROBE_HTABLE) => {
                let table_value = self.values.get(input(1)).ok_or_else(|| {
                    runtime("ProbeHTable inside a pipeline needs a materialized table")
                })?;
                let table = ops::htable_of(table_value)?;
                let names = ops::join_names();
                Box::new(self.stream(input(0))?.flat_map(move |row| -> Stream<'s> {
                    let mut hits = Vec::new();
                    match row.and_then(|v| ops::probe_one(&v, table, &names, &mut hits)) {
                        Ok(()) => Box::new(hits.into_iter().map(Ok)),
                        Err(e) => Box::new(std::iter::once(Err(e))),
                    }
                }))
            }
            (highlevel::NAME, highlevel::AGGR | highlevel::PRE_AGGR) => {
                // Drains the input on first pull and yields the single row
                // (or nothing, for an empty partial aggregate).
                let partial = op == highlevel::PRE_AGGR;
                let specs = instr.params[0].as_aggs().expect("typechecked");
                let mut agg = Some(ops::Aggregator::new(specs, self.elem_type(input(0))?)?);
                let mut upstream = Some(self.stream(input(0))?);
                Box::new(std::iter::from_fn(move || {
                    let (mut a, up) = (agg.take()?, upstream.take()?);
                    for row in up {
                        if let Err(e) = row.and_then(|r| a.push(&r)) {
                            return Some(Err(e));
                        }
                    }
                    a.finish(partial).transpose()
                }))
            }
            _ => {
                let v = self.materialize(instr, reg)?;
                self.count_intermediate();
                Box::new(elements(&v)?)
            }
        })
    }

    fn materialize(&self, instr: &crate::ir::Instruction, reg: &RegId) -> Result<Value, ExecError> {
        let mut inputs = Vec::with_capacity(instr.inputs.len());
        for r in &instr.inputs {
            inputs.push(self.result(r)?);
        }
        let out_types: Vec<&ItemType> = instr.outputs.iter().map(|r| &self.env[r]).collect();
        let outs = self.m.step(instr, inputs, &out_types)?;
        let pos = instr
            .outputs
            .iter()
            .position(|o| o == reg)
            .expect("producer");
        Ok(outs.into_iter().nth(pos).expect("output count"))
    }
}
