//! Rewrite passes and the pass manager.

mod lower;
mod parallelize;
mod pipelines;

use std::collections::HashMap;
use std::fmt;

use crate::flavors::{typecheck_program, FlavorRegistry, TypeError};
use crate::ir::{Instruction, Param, Program, RegId};

pub use lower::lower;
pub use parallelize::parallelize;
pub use pipelines::{extract_pipelines, PIPELINEABLE};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RewriteError {
    #[error("pass `{pass}` failed: {reason}")]
    PassFailed { pass: String, reason: String },
    #[error("no lowering rule for `{0}`")]
    LoweringUnsupported(String),
    #[error("input program is ill-typed: {0}")]
    InvalidInput(#[from] TypeError),
    #[error("invalid pass list: {0}")]
    BadPassList(String),
}

/// One configured pass, e.g. `parallelize:4`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassSpec {
    pub name: String,
    pub arg: Option<String>,
}

impl fmt::Display for PassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.arg {
            Some(a) => write!(f, "{}:{a}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PassPipeline(pub Vec<PassSpec>);

impl PassPipeline {
    /// Parses `parallelize:4,lower,extract_pipelines`. Only the syntax is
    /// checked here; unknown names fail when the pipeline runs.
    pub fn parse(text: &str) -> Result<Self, RewriteError> {
        let mut specs = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, arg) = match item.split_once(':') {
                Some((n, a)) => (n.trim(), Some(a.trim().to_string())),
                None => (item, None),
            };
            if name.is_empty() {
                return Err(RewriteError::BadPassList(format!(
                    "empty pass name in `{item}`"
                )));
            }
            specs.push(PassSpec {
                name: name.to_string(),
                arg,
            });
        }
        Ok(Self(specs))
    }
}

/// The final program plus the program after each pass.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub program: Program,
    pub stages: Vec<(PassSpec, Program)>,
}

fn failed(spec: &PassSpec, reason: impl ToString) -> RewriteError {
    RewriteError::PassFailed {
        pass: spec.to_string(),
        reason: reason.to_string(),
    }
}

fn apply(
    registry: &FlavorRegistry,
    spec: &PassSpec,
    program: &Program,
) -> Result<Program, RewriteError> {
    let no_arg = || match &spec.arg {
        Some(a) => Err(failed(spec, format!("takes no argument, given `{a}`"))),
        None => Ok(()),
    };
    match spec.name.as_str() {
        "parallelize" => {
            let n = spec
                .arg
                .as_deref()
                .and_then(|a| a.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .ok_or_else(|| {
                    failed(
                        spec,
                        "needs a positive parallelism degree, e.g. parallelize:4",
                    )
                })?;
            parallelize(registry, program, n)
        }
        "lower" => {
            no_arg()?;
            lower(registry, program)
        }
        "extract_pipelines" => {
            no_arg()?;
            extract_pipelines(registry, program)
        }
        other => Err(failed(spec, format!("unknown pass `{other}`"))),
    }
}

/// Applies the passes in order, re-validating and re-typechecking after
/// each one.
pub fn run_pipeline(
    registry: &FlavorRegistry,
    pipeline: &PassPipeline,
    program: &Program,
) -> Result<PipelineRun, RewriteError> {
    typecheck_program(registry, program)?;
    let mut current = program.clone();
    let mut stages = Vec::with_capacity(pipeline.0.len());
    for spec in &pipeline.0 {
        let next = apply(registry, spec, &current).map_err(|e| match e {
            e @ RewriteError::PassFailed { .. } => e,
            other => failed(spec, other),
        })?;
        typecheck_program(registry, &next)
            .map_err(|e| failed(spec, format!("produced an ill-typed program: {e}")))?;
        stages.push((spec.clone(), next.clone()));
        current = next;
    }
    Ok(PipelineRun {
        program: current,
        stages,
    })
}

/// Equality up to a consistent, bijective renaming of registers, scope by
/// scope.
pub fn structural_equal(a: &Program, b: &Program) -> bool {
    let mut fwd: HashMap<&RegId, &RegId> = HashMap::new();
    let mut bwd: HashMap<&RegId, &RegId> = HashMap::new();
    if a.pipeline != b.pipeline || a.params.len() != b.params.len() || a.body.len() != b.body.len()
    {
        return false;
    }
    for (x, y) in a.params.iter().zip(&b.params) {
        if x.ty != y.ty || !define(&mut fwd, &mut bwd, &x.id, &y.id) {
            return false;
        }
    }
    for (x, y) in a.body.iter().zip(&b.body) {
        if !same_instruction_shape(x, y) {
            return false;
        }
        for (i, j) in x.inputs.iter().zip(&y.inputs) {
            if fwd.get(i) != Some(&j) {
                return false;
            }
        }
        for (i, j) in x.outputs.iter().zip(&y.outputs) {
            if !define(&mut fwd, &mut bwd, i, j) {
                return false;
            }
        }
    }
    true
}

fn define<'p>(
    fwd: &mut HashMap<&'p RegId, &'p RegId>,
    bwd: &mut HashMap<&'p RegId, &'p RegId>,
    x: &'p RegId,
    y: &'p RegId,
) -> bool {
    if fwd.contains_key(x) || bwd.contains_key(y) {
        return false;
    }
    fwd.insert(x, y);
    bwd.insert(y, x);
    true
}

fn same_instruction_shape(x: &Instruction, y: &Instruction) -> bool {
    x.flavor == y.flavor
        && x.opcode == y.opcode
        && x.inputs.len() == y.inputs.len()
        && x.outputs.len() == y.outputs.len()
        && x.params.len() == y.params.len()
        && x.params.iter().zip(&y.params).all(|(p, q)| match (p, q) {
            (Param::Program(p), Param::Program(q)) => structural_equal(p, q),
            (p, q) => p == q,
        })
}
