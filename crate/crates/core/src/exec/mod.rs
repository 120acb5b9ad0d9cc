//! Program execution.
//!
//! [`run_reference`] is the single-threaded, deterministic ground truth.
//! [`run_parallel`] runs ConcurExecute workers concurrently and executes
//! pipeline Calls as fused pull-based iterator chains.

mod concur;
pub mod ops;
mod pipeline;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::expr::{BoundExpr, EvalError};
use crate::flavors::{
    control, highlevel, lowlevel, typecheck_program, typecheck_scope, FlavorRegistry, TypeEnv,
    TypeError,
};
use crate::ir::{Instruction, ItemType, Name, Program, RegId, Value};

use ops::{collection, runtime};

pub const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("runtime type error: {0}")]
    RuntimeType(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    ArithmeticOverflow,
    #[error("min/max over empty input for `{0}`")]
    EmptyAggregate(Name),
    #[error("step budget exhausted")]
    BudgetExhausted,
    #[error("deadlock: every live worker is blocked on receive")]
    DeadlockDetected,
    #[error("exchange destination {dst} outside 0..{workers}")]
    InvalidDestination { dst: i64, workers: usize },
    #[error("matrix dimensions {left:?} and {right:?} do not conform")]
    DimensionMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("{opcode}: {message}")]
    Custom { opcode: Name, message: String },
    #[error("input #{index}: expected {expected}, found {found}")]
    InputMismatch {
        index: usize,
        expected: ItemType,
        found: ItemType,
    },
    #[error("program takes {expected} input(s), given {found}")]
    InputCount { expected: usize, found: usize },
    #[error(transparent)]
    Type(#[from] TypeError),
}

impl From<EvalError> for ExecError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::DivisionByZero => ExecError::DivisionByZero,
            EvalError::ArithmeticOverflow => ExecError::ArithmeticOverflow,
            EvalError::RuntimeType(m) => ExecError::RuntimeType(m),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Reference,
    Parallel { worker_cap: usize },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub backend: Backend,
    /// Maximum instruction evaluations for the whole run.
    pub step_budget: u64,
}

impl RunConfig {
    pub fn reference() -> Self {
        Self {
            backend: Backend::Reference,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }

    pub fn parallel(worker_cap: usize) -> Self {
        Self {
            backend: Backend::Parallel {
                worker_cap: worker_cap.max(1),
            },
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }

    pub fn with_budget(mut self, steps: u64) -> Self {
        self.step_budget = steps;
        self
    }
}

/// Execution counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExecStats {
    pub steps: u64,
    pub pipelines: u64,
    /// Collections materialized as the result of a pipeline.
    pub terminal_materializations: u64,
    /// Collections materialized between operators inside a pipeline.
    pub intermediate_materializations: u64,
}

#[derive(Default)]
struct Counters {
    steps: AtomicU64,
    pipelines: AtomicU64,
    terminal: AtomicU64,
    intermediate: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> ExecStats {
        ExecStats {
            steps: self.steps.load(Ordering::Relaxed),
            pipelines: self.pipelines.load(Ordering::Relaxed),
            terminal_materializations: self.terminal.load(Ordering::Relaxed),
            intermediate_materializations: self.intermediate.load(Ordering::Relaxed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub values: Vec<Value>,
    pub stats: ExecStats,
}

pub fn run_reference(
    registry: &FlavorRegistry,
    program: &Program,
    inputs: Vec<Value>,
) -> Result<Vec<Value>, ExecError> {
    Ok(run(registry, program, inputs, &RunConfig::reference())?.values)
}

pub fn run_parallel(
    registry: &FlavorRegistry,
    program: &Program,
    inputs: Vec<Value>,
    worker_cap: usize,
) -> Result<Vec<Value>, ExecError> {
    Ok(run(registry, program, inputs, &RunConfig::parallel(worker_cap))?.values)
}

pub fn run(
    registry: &FlavorRegistry,
    program: &Program,
    inputs: Vec<Value>,
    config: &RunConfig,
) -> Result<RunOutput, ExecError> {
    typecheck_program(registry, program)?;
    check_inputs(program, &inputs)?;
    let shared = Shared {
        registry,
        backend: config.backend,
        budget: config.step_budget,
        counters: Counters::default(),
        types: Mutex::new(HashMap::new()),
    };
    let machine = Machine {
        shared: &shared,
        worker: None,
    };
    let values = machine.execute(program, inputs)?;
    Ok(RunOutput {
        values,
        stats: shared.counters.snapshot(),
    })
}

fn check_inputs(program: &Program, inputs: &[Value]) -> Result<(), ExecError> {
    if program.params.len() != inputs.len() {
        return Err(ExecError::InputCount {
            expected: program.params.len(),
            found: inputs.len(),
        });
    }
    for (index, (reg, v)) in program.params.iter().zip(inputs).enumerate() {
        if !v.conforms(&reg.ty) {
            return Err(ExecError::InputMismatch {
                index,
                expected: reg.ty.clone(),
                found: v.shallow_type(),
            });
        }
    }
    Ok(())
}

struct Shared<'r> {
    registry: &'r FlavorRegistry,
    backend: Backend,
    budget: u64,
    counters: Counters,
    /// Register types per program scope, keyed by address; programs are
    /// immutable for the duration of a run.
    types: Mutex<HashMap<usize, Arc<TypeEnv>>>,
}

/// Collective exchange between the workers of one ConcurExecute.
pub(crate) trait Fabric {
    /// Sends `batches[d]` to every worker `d` (including this one) and
    /// returns the batches received from every source, in source order.
    fn exchange(&self, batches: Vec<Vec<Value>>) -> Result<Vec<Vec<Value>>, ExecError>;
}

#[derive(Clone, Copy)]
struct Worker<'a> {
    index: usize,
    count: usize,
    fabric: Option<&'a dyn Fabric>,
}

#[derive(Clone, Copy)]
struct Machine<'a, 'r> {
    shared: &'a Shared<'r>,
    worker: Option<Worker<'a>>,
}

impl<'a, 'r> Machine<'a, 'r> {
    fn tick(&self) -> Result<(), ExecError> {
        let used = self.shared.counters.steps.fetch_add(1, Ordering::Relaxed);
        if used >= self.shared.budget {
            return Err(ExecError::BudgetExhausted);
        }
        Ok(())
    }

    fn types(&self, program: &Program) -> Result<Arc<TypeEnv>, ExecError> {
        let key = program as *const Program as usize;
        if let Some(env) = self.shared.types.lock().expect("types lock").get(&key) {
            return Ok(env.clone());
        }
        let (env, _) = typecheck_scope(self.shared.registry, program, self.worker.is_some())?;
        let env = Arc::new(env);
        self.shared
            .types
            .lock()
            .expect("types lock")
            .insert(key, env.clone());
        Ok(env)
    }

    fn is_parallel(&self) -> bool {
        matches!(self.shared.backend, Backend::Parallel { .. })
    }

    /// Runs `program` on `args` and returns the values of its Return.
    fn execute(&self, program: &Program, args: Vec<Value>) -> Result<Vec<Value>, ExecError> {
        let env = self.types(program)?;
        let mut regs: HashMap<RegId, Value> =
            HashMap::with_capacity(program.params.len() + program.body.len());
        for (reg, v) in program.params.iter().zip(args) {
            regs.insert(reg.id.clone(), v);
        }
        for instr in &program.body {
            self.tick()?;
            let inputs: Vec<Value> = instr
                .inputs
                .iter()
                .map(|r| {
                    regs.get(r)
                        .cloned()
                        .ok_or_else(|| runtime(format!("register `{r}` unset")))
                })
                .collect::<Result<_, _>>()?;
            if instr.is_return() {
                return Ok(inputs);
            }
            let out_types: Vec<&ItemType> = instr.outputs.iter().map(|r| &env[r]).collect();
            let outs = self.step(instr, inputs, &out_types)?;
            for (r, v) in instr.outputs.iter().zip(outs) {
                regs.insert(r.clone(), v);
            }
        }
        Err(runtime("program has no Return"))
    }

    fn step(
        &self,
        instr: &Instruction,
        inputs: Vec<Value>,
        out: &[&ItemType],
    ) -> Result<Vec<Value>, ExecError> {
        let one = |v: Value| Ok(vec![v]);
        let c0 = || collection(&inputs[0]);
        let expr = || -> Result<BoundExpr, ExecError> {
            let e = instr.params[0].as_expr().expect("typechecked");
            Ok(BoundExpr::bind(e, c0()?.elem_type()).map_err(TypeError::from)?)
        };
        let int0 = || {
            instr.params[0]
                .as_const()
                .and_then(Value::as_i64)
                .expect("typechecked")
        };
        let nested = |i: usize| instr.params[i].as_program().expect("typechecked");
        match (&*instr.flavor, &*instr.opcode) {
            (highlevel::NAME, op) => match op {
                highlevel::PROJ => {
                    let names = highlevel::proj_fields(&instr.params)?;
                    one(ops::proj(c0()?, names, out[0])?)
                }
                highlevel::EXPROJ | highlevel::MAP => one(ops::map(c0()?, &expr()?, out[0])?),
                highlevel::SELECT => one(ops::select(c0()?, &expr()?, out[0])?),
                highlevel::AGGR | highlevel::PRE_AGGR => {
                    let specs = instr.params[0].as_aggs().expect("typechecked");
                    one(ops::aggr(c0()?, specs, op == highlevel::PRE_AGGR, out[0])?)
                }
                highlevel::SPLIT => one(ops::split(c0()?, int0() as usize, out[0])?),
                highlevel::SCAN => one(ops::scan(c0()?, out[0])?),
                highlevel::MMMULT => one(ops::mmmult(c0()?, collection(&inputs[1])?)?),
                highlevel::WRAP => one(ops::wrap(&inputs[0])),
                highlevel::JOIN => one(ops::join(c0()?, collection(&inputs[1])?, out[0])?),
                _ => self.custom(instr, inputs),
            },
            (control::NAME, op) => match op {
                control::LOOP => {
                    let mut state = inputs;
                    for _ in 0..int0() {
                        state = self.execute(nested(1), state)?;
                    }
                    Ok(state)
                }
                control::WHILE => {
                    let mut state = inputs;
                    loop {
                        let mut res = self.execute(nested(0), state)?;
                        let go = ops::flag(&res[0])?;
                        state = res.split_off(1);
                        if !go {
                            return Ok(state);
                        }
                    }
                }
                control::COND => {
                    let mut res = self.execute(nested(0), inputs)?;
                    let pick = ops::flag(&res[0])?;
                    let l = (res.len() - 1) / 2;
                    let mut branches = res.split_off(1);
                    let otherwise = branches.split_off(l);
                    Ok(if pick { branches } else { otherwise })
                }
                control::CALL => {
                    let body = nested(0);
                    if body.pipeline {
                        self.shared
                            .counters
                            .pipelines
                            .fetch_add(1, Ordering::Relaxed);
                        if self.is_parallel() {
                            return pipeline::run_fused(self, body, inputs);
                        }
                        return self.execute_unfused_pipeline(body, inputs);
                    }
                    self.execute(body, inputs)
                }
                control::CONCUR_EXECUTE => one(self.concur_execute(nested(0), c0()?, out[0])?),
                control::WORKER_ID => {
                    let w = self
                        .worker
                        .ok_or_else(|| runtime("WorkerId outside ConcurExecute"))?;
                    one(Value::single(
                        ItemType::int64(),
                        Value::Int64(w.index as i64),
                    ))
                }
                control::EXCHANGE => one(self.exchange(c0()?, &expr()?, out[0])?),
                _ => self.custom(instr, inputs),
            },
            (lowlevel::NAME, op) => match op {
                lowlevel::SCAN_VEC => one(ops::scan(c0()?, out[0])?),
                lowlevel::MAT_VEC => one(ops::mat_vec(c0()?, out[0])),
                lowlevel::SPLIT_VEC => one(ops::split_vec(c0()?, int0() as usize, out[0])?),
                lowlevel::BUILD_HTABLE => one(ops::build_htable(c0()?, out[0])?),
                lowlevel::PROBE_HTABLE => {
                    one(ops::probe(c0()?, ops::htable_of(&inputs[1])?, out[0])?)
                }
                _ => self.custom(instr, inputs),
            },
            _ => self.custom(instr, inputs),
        }
    }

    fn custom(&self, instr: &Instruction, inputs: Vec<Value>) -> Result<Vec<Value>, ExecError> {
        let sig = self
            .shared
            .registry
            .lookup(&instr.flavor, &instr.opcode)
            .map_err(|_| {
                runtime(format!(
                    "unknown opcode `{}.{}`",
                    instr.flavor, instr.opcode
                ))
            })?;
        let hook = sig.exec.as_ref().ok_or_else(|| ExecError::Custom {
            opcode: instr.opcode.clone(),
            message: "opcode has no execution semantics".into(),
        })?;
        hook(&instr.params, &inputs).map_err(|message| ExecError::Custom {
            opcode: instr.opcode.clone(),
            message,
        })
    }

    /// A pipeline region run instruction by instruction; every operator
    /// output except the region's result is an intermediate collection.
    fn execute_unfused_pipeline(
        &self,
        body: &Program,
        inputs: Vec<Value>,
    ) -> Result<Vec<Value>, ExecError> {
        let c = &self.shared.counters;
        let ops_count = body.body.iter().filter(|i| !i.is_return()).count() as u64;
        c.intermediate
            .fetch_add(ops_count.saturating_sub(1), Ordering::Relaxed);
        c.terminal.fetch_add(1, Ordering::Relaxed);
        self.execute(body, inputs)
    }

    fn exchange(
        &self,
        input: &crate::ir::CollectionValue,
        dst: &BoundExpr,
        out: &ItemType,
    ) -> Result<Value, ExecError> {
        let w = self
            .worker
            .ok_or_else(|| runtime("Exchange outside ConcurExecute"))?;
        let fabric = w
            .fabric
            .ok_or_else(|| runtime("Exchange in a worker without an exchange fabric"))?;
        let mut batches = vec![Vec::new(); w.count];
        for v in input.elements() {
            let d = match dst.eval(v)? {
                Value::Int64(d) => d,
                other => return Err(runtime(format!("destination {other} is not Int64"))),
            };
            if d < 0 || d as usize >= w.count {
                return Err(ExecError::InvalidDestination {
                    dst: d,
                    workers: w.count,
                });
            }
            batches[d as usize].push(v.clone());
        }
        let received = fabric.exchange(batches)?;
        ops::make(out, received.into_iter().flatten().collect())
    }
}
