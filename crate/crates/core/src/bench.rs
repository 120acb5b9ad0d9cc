//! Timed Q6 runs.

use std::time::Instant;

use serde::Serialize;

use crate::datagen::{gen_lineitem, DatasetSpec};
use crate::exec::{run, ExecError, RunConfig};
use crate::flavors::FlavorRegistry;
use crate::ir::Program;
use crate::rewrite::{run_pipeline, PassPipeline, RewriteError};

pub const MIN_REPS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchBackend {
    Ref,
    Mt,
}

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub rows: usize,
    pub workers: usize,
    pub seed: u64,
    pub reps: usize,
    pub backend: BenchBackend,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub program: String,
    pub backend: BenchBackend,
    pub workers: usize,
    pub rows: usize,
    pub seed: u64,
    /// Every repetition, warm-up included.
    pub wall_ms: Vec<f64>,
    /// Mean over the repetitions after the first.
    pub mean_ms: f64,
    pub digest: String,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("at least {MIN_REPS} repetitions are required, got {0}")]
    TooFewReps(usize),
    #[error("worker count must be positive")]
    NoWorkers,
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// The program a bench run executes: the bundled Q6 as-is on the
/// reference backend, parallelized, lowered and fused on the parallel one.
pub fn q6_program(
    registry: &FlavorRegistry,
    backend: BenchBackend,
    workers: usize,
) -> Result<Program, RewriteError> {
    let q6 = crate::programs::tpch_q6();
    match backend {
        BenchBackend::Ref => Ok(q6),
        BenchBackend::Mt => {
            let passes =
                PassPipeline::parse(&format!("parallelize:{workers},lower,extract_pipelines"))?;
            Ok(run_pipeline(registry, &passes, &q6)?.program)
        }
    }
}

pub fn bench_q6(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if cfg.reps < MIN_REPS {
        return Err(BenchError::TooFewReps(cfg.reps));
    }
    if cfg.workers == 0 {
        return Err(BenchError::NoWorkers);
    }
    let registry = FlavorRegistry::builtin();
    let program = q6_program(&registry, cfg.backend, cfg.workers)?;
    let data = gen_lineitem(DatasetSpec {
        rows: cfg.rows,
        seed: cfg.seed,
    });
    let (input, run_cfg) = match cfg.backend {
        BenchBackend::Ref => (data.bag, RunConfig::reference()),
        BenchBackend::Mt => (data.physical, RunConfig::parallel(cfg.workers)),
    };
    let mut wall_ms = Vec::with_capacity(cfg.reps);
    let mut digest = String::new();
    for _ in 0..cfg.reps {
        let start = Instant::now();
        let out = run(&registry, &program, vec![input.clone()], &run_cfg)?;
        wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        digest = crate::compare::digest(&out.values);
    }
    let measured = &wall_ms[1..];
    Ok(BenchReport {
        program: "tpch_q6".into(),
        backend: cfg.backend,
        workers: cfg.workers,
        rows: cfg.rows,
        seed: cfg.seed,
        mean_ms: measured.iter().sum::<f64>() / measured.len() as f64,
        wall_ms,
        digest,
    })
}
