//! Pipeline extraction.
//!
//! A region is a chain of pipelineable instructions linked through their
//! first input, where every link register has exactly one use. Each region
//! is moved into a `Call` of a program marked as a pipeline, placed where
//! the region's last instruction was. MatVec may only end a region.

use std::collections::{HashMap, HashSet};

use crate::flavors::{
    control, highlevel, lowlevel, typecheck_program, typecheck_scope, FlavorRegistry,
};
use crate::ir::{Instruction, Param, Program, RegId, Register};

use super::RewriteError;

/// `(flavor, opcode)` pairs that execute as streaming stages.
pub const PIPELINEABLE: [(&str, &str); 9] = [
    (lowlevel::NAME, lowlevel::SCAN_VEC),
    (highlevel::NAME, highlevel::SELECT),
    (highlevel::NAME, highlevel::EXPROJ),
    (highlevel::NAME, highlevel::MAP),
    (highlevel::NAME, highlevel::PROJ),
    (lowlevel::NAME, lowlevel::PROBE_HTABLE),
    (highlevel::NAME, highlevel::AGGR),
    (highlevel::NAME, highlevel::PRE_AGGR),
    (lowlevel::NAME, lowlevel::MAT_VEC),
];

fn pipelineable(i: &Instruction) -> bool {
    i.outputs.len() == 1 && PIPELINEABLE.iter().any(|(f, o)| i.is(f, o))
}

pub fn extract_pipelines(
    registry: &FlavorRegistry,
    program: &Program,
) -> Result<Program, RewriteError> {
    typecheck_program(registry, program)?;
    extract(registry, program, false)
}

fn extract(
    registry: &FlavorRegistry,
    program: &Program,
    in_concurrent: bool,
) -> Result<Program, RewriteError> {
    if program.pipeline {
        return Ok(program.clone());
    }
    let (env, _) = typecheck_scope(registry, program, in_concurrent)?;
    let uses = program.use_counts();
    let producer: HashMap<&RegId, usize> = program
        .body
        .iter()
        .enumerate()
        .flat_map(|(i, instr)| instr.outputs.iter().map(move |o| (o, i)))
        .collect();

    // region id of each instruction, and the members of each region
    let mut member_of: HashMap<usize, usize> = HashMap::new();
    let mut regions: Vec<Vec<usize>> = Vec::new();
    for root in (0..program.body.len()).rev() {
        if member_of.contains_key(&root) || !pipelineable(&program.body[root]) {
            continue;
        }
        let mut members = vec![root];
        let mut cur = root;
        loop {
            let Some(link) = program.body[cur].inputs.first() else {
                break;
            };
            let Some(&prev) = producer.get(link) else {
                break;
            };
            let p = &program.body[prev];
            if uses.get(link) != Some(&1)
                || member_of.contains_key(&prev)
                || !pipelineable(p)
                || p.is(lowlevel::NAME, lowlevel::MAT_VEC)
            {
                break;
            }
            members.push(prev);
            cur = prev;
        }
        members.reverse();
        for &m in &members {
            member_of.insert(m, regions.len());
        }
        regions.push(members);
    }

    let mut body = Vec::with_capacity(program.body.len());
    for (idx, instr) in program.body.iter().enumerate() {
        match member_of.get(&idx) {
            Some(&r) if *regions[r].last().expect("non-empty") == idx => {
                body.push(region_call(program, &regions[r], &env));
            }
            Some(_) => {}
            None => body.push(recurse(registry, instr, in_concurrent)?),
        }
    }
    Ok(Program {
        params: program.params.clone(),
        body,
        pipeline: false,
    })
}

fn recurse(
    registry: &FlavorRegistry,
    instr: &Instruction,
    in_concurrent: bool,
) -> Result<Instruction, RewriteError> {
    if instr.nested_programs().next().is_none() {
        return Ok(instr.clone());
    }
    let inner_concurrent = in_concurrent || instr.is(control::NAME, control::CONCUR_EXECUTE);
    let mut out = instr.clone();
    for p in out.params.iter_mut() {
        if let Param::Program(body) = p {
            *body = extract(registry, body, inner_concurrent)?;
        }
    }
    Ok(out)
}

fn region_call(program: &Program, members: &[usize], env: &crate::flavors::TypeEnv) -> Instruction {
    let internal: HashSet<&RegId> = members
        .iter()
        .flat_map(|&m| program.body[m].outputs.iter())
        .collect();
    let mut free: Vec<RegId> = Vec::new();
    for &m in members {
        for r in &program.body[m].inputs {
            if !internal.contains(r) && !free.contains(r) {
                free.push(r.clone());
            }
        }
    }
    let root_out = program.body[*members.last().expect("non-empty")].outputs[0].clone();
    let mut body: Vec<Instruction> = members.iter().map(|&m| program.body[m].clone()).collect();
    body.push(Instruction::ret([&*root_out]));
    let params = free
        .iter()
        .map(|r| Register::new(r, env[r].clone()))
        .collect();
    let mut region = Program::new(params, body);
    region.pipeline = true;
    let free: Vec<&str> = free.iter().map(|r| &**r).collect();
    control::call(region, &free, &[&root_out])
}
