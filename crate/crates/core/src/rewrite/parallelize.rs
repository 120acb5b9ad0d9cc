//! Generic data-parallelization.
//!
//! For each Bag or Seq parameter, the run of elementwise instructions that
//! consumes it is moved into the body of a ConcurExecute placed between a
//! Split and a Scan. A decomposable aggregate ending the run is split into a
//! per-partition aggregate inside and a merge aggregate outside. Anything
//! else ends the run and stays where it is.

use crate::expr::{decompose_aggregate, AggFunction, AggregateSpec};
use crate::flavors::{control, highlevel, typecheck_program, FlavorRegistry};
use crate::ir::{CollectionKind, Instruction, ItemType, Param, Program, RegId, Register};

use super::RewriteError;

const ELEMENTWISE: [&str; 4] = [
    highlevel::SELECT,
    highlevel::EXPROJ,
    highlevel::MAP,
    highlevel::PROJ,
];

pub fn parallelize(
    registry: &FlavorRegistry,
    program: &Program,
    n: usize,
) -> Result<Program, RewriteError> {
    if n == 0 {
        return Err(RewriteError::PassFailed {
            pass: "parallelize".into(),
            reason: "parallelism degree must be positive".into(),
        });
    }
    typecheck_program(registry, program)?;
    let mut p = program.clone();
    for src in program.params.iter() {
        if matches!(
            src.ty.as_collection(),
            Some((CollectionKind::Bag | CollectionKind::Seq, _))
        ) {
            p = parallelize_source(p, src, n);
        }
    }
    Ok(p)
}

struct Chain {
    /// Indices of the moved elementwise instructions, in order.
    moved: Vec<usize>,
    /// A trailing aggregate: its index and the (partial, merge) specs.
    aggr: Option<(usize, Vec<AggregateSpec>, Vec<AggregateSpec>)>,
}

fn find_chain(p: &Program, src: &RegId) -> Chain {
    let uses = p.use_counts();
    let mut chain = Chain {
        moved: Vec::new(),
        aggr: None,
    };
    let mut cur = src.clone();
    while uses.get(&cur) == Some(&1) {
        let Some((idx, instr)) = p
            .body
            .iter()
            .enumerate()
            .find(|(_, i)| i.inputs.contains(&cur))
        else {
            break;
        };
        if &*instr.flavor != highlevel::NAME || instr.inputs.len() != 1 || instr.outputs.len() != 1
        {
            break;
        }
        if ELEMENTWISE.contains(&&*instr.opcode) {
            chain.moved.push(idx);
            cur = instr.outputs[0].clone();
            continue;
        }
        if &*instr.opcode == highlevel::AGGR {
            let specs = instr.params[0].as_aggs().unwrap_or(&[]);
            let split: Result<Vec<_>, _> = specs.iter().map(decompose_aggregate).collect();
            if let Ok(pairs) = split {
                let (pre, merge) = pairs.into_iter().unzip();
                chain.aggr = Some((idx, pre, merge));
            }
        }
        break;
    }
    chain
}

fn parallelize_source(p: Program, src: &Register, n: usize) -> Program {
    let chain = find_chain(&p, &src.id);
    if chain.moved.is_empty() && chain.aggr.is_none() {
        return p;
    }
    let (_, elem) = src.ty.as_collection().expect("collection source");

    // Worker body: re-create the source from the partition, then the moved
    // instructions under their original register names.
    let mut inner_body: Vec<Instruction> = Vec::new();
    let mut names: Vec<&str> = vec![&src.id];
    for &i in &chain.moved {
        inner_body.push(p.body[i].clone());
        names.push(&p.body[i].outputs[0]);
    }
    let mut last: RegId = names.last().copied().expect("non-empty").into();
    let mut merge = None;
    if let Some((i, pre, m)) = &chain.aggr {
        let original = &p.body[*i];
        // min/max have no value for an empty partition, so those
        // partitions must contribute no row at all.
        let partial_op = if pre
            .iter()
            .any(|s| matches!(s.function, AggFunction::Min | AggFunction::Max))
        {
            highlevel::PRE_AGGR
        } else {
            highlevel::AGGR
        };
        inner_body.push(
            Instruction::new(highlevel::NAME, partial_op)
                .param(Param::Aggs(pre.clone()))
                .inputs([&*last])
                .outputs([&*original.outputs[0]]),
        );
        last = original.outputs[0].clone();
        merge = Some((*i, m.clone(), original.outputs[0].clone()));
    }
    let scratch = Program::new(vec![src.clone()], inner_body.clone());
    let part = scratch.fresh_register("part");
    let wrapped = scratch.fresh_register("part_result");
    let mut body = vec![highlevel::scan(&part, &src.id)];
    body.extend(inner_body);
    body.push(highlevel::wrap(&last, &wrapped));
    body.push(Instruction::ret([&*wrapped]));
    let worker = Program::new(
        vec![Register::new(
            &part,
            ItemType::single(ItemType::seq(elem.clone())),
        )],
        body,
    );

    // Outer program: the triple replaces the chain at the position of its
    // last instruction.
    let anchor = merge
        .as_ref()
        .map(|m| m.0)
        .unwrap_or_else(|| *chain.moved.last().expect("non-empty"));
    let outer_out: RegId = merge
        .as_ref()
        .map(|m| m.2.clone())
        .unwrap_or_else(|| last.clone());
    let parts = p.fresh_register("parts");
    let results = p.fresh_register("part_results");
    let unnested = if merge.is_some() {
        p.fresh_register("unnested")
    } else {
        outer_out.clone()
    };
    let mut replacement = vec![
        highlevel::split(n as i64, &src.id, &parts),
        control::concur_execute(worker, &parts, &results),
        highlevel::scan(&results, &unnested),
    ];
    if let Some((_, specs, out)) = merge {
        replacement.push(highlevel::aggr(specs, &unnested, &out));
    }

    let removed: Vec<usize> = chain
        .moved
        .iter()
        .copied()
        .chain(chain.aggr.map(|a| a.0))
        .collect();
    let mut out = Vec::with_capacity(p.body.len() + replacement.len());
    for (i, instr) in p.body.into_iter().enumerate() {
        if i == anchor {
            out.append(&mut replacement);
        } else if !removed.contains(&i) {
            out.push(instr);
        }
    }
    Program {
        params: p.params,
        body: out,
        pipeline: p.pipeline,
    }
}
