//! `cvm`: check, rewrite, run and benchmark IR documents.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cvm_core::bench::{bench_q6, BenchBackend, BenchConfig, BenchError};
use cvm_core::datagen::{gen_lineitem, DatasetSpec};
use cvm_core::exec::{run, ExecError, RunConfig};
use cvm_core::flavors::{typecheck_program, FlavorRegistry};
use cvm_core::format::{self, FormatError};
use cvm_core::ir::{CollectionKind, Program, Value};
use cvm_core::rewrite::{run_pipeline, PassPipeline};

const WORKERS_ENV: &str = "CVM_WORKERS";

#[derive(Parser)]
#[command(name = "cvm", version, about = "Collection IR driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and typecheck a document.
    Check { file: PathBuf },
    /// Apply a list of passes, e.g. `parallelize:4,lower,extract_pipelines`.
    Rewrite {
        file: PathBuf,
        #[arg(long)]
        passes: String,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        /// Write the program after each pass to this directory.
        #[arg(long)]
        dump_dir: Option<PathBuf>,
    },
    /// Execute a document.
    Run(RunArgs),
    /// Generate a lineitem table as a data file.
    Gen {
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Emit `Single<Vec<..>>` (for lowered programs) instead of a Bag.
        #[arg(long)]
        physical: bool,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Time a bundled workload.
    Bench {
        #[arg(value_enum)]
        workload: Workload,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = BackendArg::Mt)]
        backend: BackendArg,
    },
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    backend: BackendArg,
    #[arg(long)]
    workers: Option<usize>,
    /// Data file: one value, or an array with one value per parameter.
    #[arg(
        long,
        required_unless_present = "gen_rows",
        conflicts_with = "gen_rows"
    )]
    input: Option<PathBuf>,
    /// Feed a generated lineitem table instead of a data file.
    #[arg(long)]
    gen_rows: Option<usize>,
    #[arg(long, default_value_t = 1, requires = "gen_rows")]
    gen_seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    step_budget: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Ref,
    Mt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Workload {
    Q6,
}

/// A failure with its exit code and a machine-readable kind.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self {
            code: 3,
            kind: "usage",
            message: message.to_string(),
        }
    }
    fn invalid(kind: &'static str, message: impl ToString) -> Self {
        Self {
            code: 1,
            kind,
            message: message.to_string(),
        }
    }
    fn runtime(message: impl ToString) -> Self {
        Self {
            code: 2,
            kind: "runtime",
            message: message.to_string(),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::invalid("parse", e)
    }
}

impl From<ExecError> for Failure {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::Type(_) => Failure::invalid("typecheck", e),
            ExecError::InputMismatch { .. } | ExecError::InputCount { .. } => {
                Failure::invalid("input", e)
            }
            other => Failure::runtime(other),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n"))
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(Failure::runtime)
        }
    }
}

fn load(path: &Path) -> Result<Program, Failure> {
    Ok(format::deserialize(&read(path)?)?)
}

fn workers(flag: Option<usize>) -> Result<usize, Failure> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                Failure::usage(format!(
                    "{WORKERS_ENV} must be a positive integer, got `{v}`"
                ))
            })?,
            Err(_) => std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(Failure::usage("worker count must be positive"));
    }
    Ok(n)
}

fn check(file: &Path) -> Result<(), Failure> {
    let program = load(file)?;
    typecheck_program(&FlavorRegistry::builtin(), &program)
        .map_err(|e| Failure::invalid("typecheck", e))?;
    write_out(
        None,
        &json!({"status": "ok", "flavors": format::flavors_used(&program)}).to_string(),
    )
}

fn rewrite(
    file: &Path,
    passes: &str,
    output: Option<&Path>,
    dump_dir: Option<&Path>,
) -> Result<(), Failure> {
    let program = load(file)?;
    let pipeline = PassPipeline::parse(passes).map_err(Failure::usage)?;
    let registry = FlavorRegistry::builtin();
    typecheck_program(&registry, &program).map_err(|e| Failure::invalid("typecheck", e))?;
    let done =
        run_pipeline(&registry, &pipeline, &program).map_err(|e| Failure::invalid("rewrite", e))?;
    if let Some(dir) = dump_dir {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
        for (i, (spec, stage)) in done.stages.iter().enumerate() {
            let name = format!("{:02}-{}.json", i + 1, spec.to_string().replace(':', "_"));
            write_out(Some(&dir.join(name)), &format::serialize(stage))?;
        }
    }
    write_out(output, &format::serialize(&done.program))
}

/// Picks the generated table's view from the program's parameter type.
fn generated_input(program: &Program, rows: usize, seed: u64) -> Vec<Value> {
    let data = gen_lineitem(DatasetSpec { rows, seed });
    let physical = program
        .params
        .first()
        .and_then(|p| p.ty.as_collection())
        .is_some_and(|(k, _)| k == CollectionKind::Single);
    vec![if physical { data.physical } else { data.bag }]
}

fn run_cmd(args: &RunArgs) -> Result<(), Failure> {
    let program = load(&args.file)?;
    let inputs = match (&args.input, args.gen_rows) {
        (Some(path), _) => format::inputs_from_json(&read(path)?)?,
        (None, Some(rows)) => generated_input(&program, rows, args.gen_seed),
        (None, None) => return Err(Failure::usage("either --input or --gen-rows is required")),
    };
    let mut config = match args.backend {
        BackendArg::Ref => RunConfig::reference(),
        BackendArg::Mt => RunConfig::parallel(workers(args.workers)?),
    };
    if let Some(b) = args.step_budget {
        config = config.with_budget(b);
    }
    let out = run(&FlavorRegistry::builtin(), &program, inputs, &config)?;
    let doc = json!({
        "digest": cvm_core::compare::digest(&out.values),
        "results": out.values,
    });
    write_out(args.output.as_deref(), &doc.to_string())
}

fn gen(rows: usize, seed: u64, physical: bool, output: Option<&Path>) -> Result<(), Failure> {
    let data = gen_lineitem(DatasetSpec { rows, seed });
    let v = if physical { data.physical } else { data.bag };
    write_out(output, &format::value_to_json(&v))
}

fn bench(
    rows: usize,
    workers_flag: Option<usize>,
    seed: u64,
    reps: usize,
    backend: BackendArg,
) -> Result<(), Failure> {
    let cfg = BenchConfig {
        rows,
        workers: workers(workers_flag)?,
        seed,
        reps,
        backend: match backend {
            BackendArg::Ref => BenchBackend::Ref,
            BackendArg::Mt => BenchBackend::Mt,
        },
    };
    let report = bench_q6(&cfg).map_err(|e| match e {
        BenchError::TooFewReps(_) | BenchError::NoWorkers => Failure::usage(e),
        BenchError::Rewrite(e) => Failure::invalid("rewrite", e),
        BenchError::Exec(e) => Failure::from(e),
    })?;
    write_out(
        None,
        &serde_json::to_string(&report).expect("report serializes"),
    )
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check { file } => check(&file),
        Command::Rewrite {
            file,
            passes,
            output,
            dump_dir,
        } => rewrite(&file, &passes, output.as_deref(), dump_dir.as_deref()),
        Command::Run(args) => run_cmd(&args),
        Command::Gen {
            rows,
            seed,
            physical,
            output,
        } => gen(rows, seed, physical, output.as_deref()),
        Command::Bench {
            workload: Workload::Q6,
            rows,
            workers,
            seed,
            reps,
            backend,
        } => bench(rows, workers, seed, reps, backend),
    }
}

fn report(f: &Failure) -> ExitCode {
    let err = json!({"error": {"kind": f.kind, "message": f.message, "exit_code": f.code}});
    eprintln!("{err}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&Failure::usage(e.render().to_string().trim_end())),
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
