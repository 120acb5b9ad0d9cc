//! Lowering of abstract collections to physical vectors.
//!
//! Top-level Bag/Seq parameters become `Single<Vec<T>>`; every abstract
//! consumer reads them through its own ScanVec. Split, Scan, Wrap and Join
//! get their physical counterparts, ConcurExecute bodies are lowered against
//! their new parameter types, and Bag/Seq top-level results are
//! materialized with MatVec. Running the pass twice changes nothing.

use std::collections::HashSet;

use crate::flavors::{
    control, highlevel, lowlevel, typecheck_program, typecheck_scope, FlavorRegistry, TypeEnv,
};
use crate::ir::{CollectionKind, Instruction, ItemType, Param, Program, RegId, Register};

use super::RewriteError;

pub fn lower(registry: &FlavorRegistry, program: &Program) -> Result<Program, RewriteError> {
    typecheck_program(registry, program)?;
    let params = program
        .params
        .iter()
        .map(|r| match r.ty.as_collection() {
            Some((_, elem)) if bag_or_seq(&r.ty) => {
                Register::new(&r.id, ItemType::single(ItemType::vec(elem.clone())))
            }
            _ => r.clone(),
        })
        .collect();
    Scope::new(registry, program, params, false)?.lower(true)
}

/// Sets keep their abstract form: a vector would drop the uniqueness
/// guarantee.
fn bag_or_seq(ty: &ItemType) -> bool {
    matches!(
        ty.as_collection(),
        Some((CollectionKind::Bag | CollectionKind::Seq, _))
    )
}

fn is_abstract(ty: &ItemType) -> bool {
    matches!(
        ty.as_collection(),
        Some((
            CollectionKind::Set | CollectionKind::Bag | CollectionKind::Seq,
            _
        ))
    )
}

fn holds_vecs(ty: &ItemType) -> bool {
    matches!(ty.as_collection(), Some((_, inner)) if matches!(inner.as_collection(), Some((CollectionKind::Vec, _))))
}

fn unsupported(instr: &Instruction) -> RewriteError {
    RewriteError::LoweringUnsupported(format!("{}.{}", instr.flavor, instr.opcode))
}

struct Scope<'a> {
    registry: &'a FlavorRegistry,
    source: &'a Program,
    in_concurrent: bool,
    /// Types in the source program.
    before: TypeEnv,
    /// Types in the program being built.
    after: TypeEnv,
    params: Vec<Register>,
    /// Parameters retyped from an abstract collection to `Single<Vec<T>>`.
    vectorized: HashSet<RegId>,
    taken: HashSet<RegId>,
    body: Vec<Instruction>,
}

impl<'a> Scope<'a> {
    fn new(
        registry: &'a FlavorRegistry,
        source: &'a Program,
        params: Vec<Register>,
        in_concurrent: bool,
    ) -> Result<Self, RewriteError> {
        let (before, _) = typecheck_scope(registry, source, in_concurrent)?;
        let vectorized = source
            .params
            .iter()
            .zip(&params)
            .filter(|(old, new)| is_abstract(&old.ty) && !is_abstract(&new.ty))
            .map(|(old, _)| old.id.clone())
            .collect();
        Ok(Self {
            registry,
            source,
            in_concurrent,
            before,
            after: params
                .iter()
                .map(|r| (r.id.clone(), r.ty.clone()))
                .collect(),
            params,
            vectorized,
            taken: source.defined_registers().cloned().collect(),
            body: Vec::new(),
        })
    }

    fn fresh(&mut self, base: &str) -> RegId {
        let id: RegId = std::iter::once(base.to_string())
            .chain((1..).map(|i| format!("{base}_{i}")))
            .find(|c| !self.taken.contains(c.as_str()))
            .expect("unbounded")
            .into();
        self.taken.insert(id.clone());
        id
    }

    fn emit(&mut self, instr: Instruction) -> Result<(), RewriteError> {
        let inputs: Vec<ItemType> = instr.inputs.iter().map(|r| self.after[r].clone()).collect();
        let outs = self.registry.infer(&instr, &inputs, self.in_concurrent)?;
        for (r, t) in instr.outputs.iter().zip(outs) {
            self.after.insert(r.clone(), t);
        }
        self.body.push(instr);
        Ok(())
    }

    /// `reg` as an abstract collection: vectorized parameters get a fresh
    /// ScanVec per use.
    fn rows(&mut self, reg: &RegId) -> Result<RegId, RewriteError> {
        if !self.vectorized.contains(reg) {
            return Ok(reg.clone());
        }
        let out = self.fresh(&format!("{reg}_rows"));
        self.emit(lowlevel::scan_vec(reg, &out))?;
        Ok(out)
    }

    /// `reg` as `Single<Vec<T>>`.
    fn vector(&mut self, reg: &RegId) -> Result<RegId, RewriteError> {
        if self.vectorized.contains(reg) || !is_abstract(&self.after[reg]) {
            return Ok(reg.clone());
        }
        let out = self.fresh(&format!("{reg}_vec"));
        self.emit(lowlevel::mat_vec(reg, &out))?;
        Ok(out)
    }

    fn all_rows(&mut self, instr: &Instruction) -> Result<Instruction, RewriteError> {
        let mut out = instr.clone();
        for r in out.inputs.iter_mut() {
            *r = self.rows(r)?;
        }
        Ok(out)
    }

    fn lower(mut self, top_level: bool) -> Result<Program, RewriteError> {
        let source = self.source;
        for instr in &source.body {
            if instr.is_return() {
                let mut ret = instr.clone();
                if top_level {
                    for r in ret.inputs.iter_mut() {
                        if bag_or_seq(&self.after[r]) {
                            *r = self.vector(r)?;
                        }
                    }
                }
                self.body.push(ret);
                break;
            }
            self.lower_instruction(instr)?;
        }
        Ok(Program {
            params: self.params,
            body: self.body,
            pipeline: source.pipeline,
        })
    }

    fn lower_instruction(&mut self, instr: &Instruction) -> Result<(), RewriteError> {
        let out = |k: usize| &*instr.outputs[k];
        match (&*instr.flavor, &*instr.opcode) {
            (highlevel::NAME, highlevel::SPLIT) => {
                let n = instr.params[0]
                    .as_const()
                    .and_then(|v| v.as_i64())
                    .unwrap_or(1);
                let v = self.vector(&instr.inputs[0])?;
                self.emit(lowlevel::split_vec(n, &v, out(0)))
            }
            (highlevel::NAME, highlevel::SCAN) if holds_vecs(&self.after[&instr.inputs[0]]) => {
                self.emit(lowlevel::scan_vec(&instr.inputs[0], out(0)))
            }
            (highlevel::NAME, highlevel::WRAP) if is_abstract(&self.after[&instr.inputs[0]]) => {
                self.emit(lowlevel::mat_vec(&instr.inputs[0], out(0)))
            }
            (highlevel::NAME, highlevel::JOIN) => {
                let probe = self.rows(&instr.inputs[0])?;
                let build = self.rows(&instr.inputs[1])?;
                let table = self.fresh(&format!("{}_table", instr.outputs[0]));
                self.emit(lowlevel::build_htable(&build, &table))?;
                self.emit(lowlevel::probe_htable(&probe, &table, out(0)))
            }
            (highlevel::NAME, highlevel::MMMULT) => Err(unsupported(instr)),
            (highlevel::NAME, _) => {
                let i = self.all_rows(instr)?;
                self.emit(i)
            }
            (lowlevel::NAME, _) => self.emit(instr.clone()),
            (control::NAME, control::CONCUR_EXECUTE) => {
                let input = &instr.inputs[0];
                let body = instr.params[0].as_program().expect("typechecked");
                let elem = match self.after[input].as_collection() {
                    Some((_, e)) => e.clone(),
                    None => return Err(unsupported(instr)),
                };
                let params = vec![Register::new(&body.params[0].id, ItemType::single(elem))];
                let lowered = Scope::new(self.registry, body, params, true)?.lower(false)?;
                let mut i = instr.clone();
                i.params = vec![Param::Program(lowered)];
                self.emit(i)
            }
            (control::NAME, control::EXCHANGE | control::WORKER_ID) => {
                let i = self.all_rows(instr)?;
                self.emit(i)
            }
            (control::NAME, _) => {
                let unchanged = instr.inputs.iter().all(|r| {
                    !self.vectorized.contains(r) && self.before.get(r) == self.after.get(r)
                });
                if !unchanged {
                    return Err(unsupported(instr));
                }
                self.emit(instr.clone())
            }
            _ => Err(unsupported(instr)),
        }
    }
}
