//! Command line: `gen`, `solve` and `report`.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::config::{ConfigError, Settings, Task};
use crate::runner::{self, RunOptions, Workload};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    #[value(alias = "gen")]
    Generate,
    Solve,
    Report,
}

#[derive(Debug, Parser)]
#[command(name = "drnet", version = crate::version(), about = "Differentiable constraint reasoning benchmarks")]
pub struct Args {
    /// What to do; may also be given with --mode.
    #[arg(value_enum)]
    pub command: Option<Mode>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    /// Input file or directory.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; required for generate and solve.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<u32>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write a per-iteration JSONL trace for every instance.
    #[arg(long)]
    pub trace: bool,
    /// SAT variable count for generate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of instances for generate.
    #[arg(long)]
    pub count: Option<usize>,
    /// Extra `key=value` config overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Parses `argv` (including the program name), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn settings(args: &Args, task: Task) -> Result<Settings, Failure> {
    let mut s = Settings::defaults(task);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        s.apply_text(&text)?;
    }
    let mut pairs = Vec::new();
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(r) = args.restarts {
        pairs.push(("restart_limit".into(), r.to_string()));
    }
    if let Some(m) = args.max_iters {
        pairs.push(("max_iterations".into(), m.to_string()));
    }
    if let Some(c) = args.count {
        pairs.push(("count".into(), c.to_string()));
    }
    if let Some(n) = args.n {
        if task != Task::Sat {
            return Err(Failure::Usage("--n applies to --task sat only".into()));
        }
        pairs.push(("n".into(), n.to_string()));
    }
    s.set_all(pairs)?;
    Ok(s)
}

fn execute(args: &Args) -> Result<(), Failure> {
    let mode = match (args.command, args.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(Failure::Usage("positional mode and --mode disagree".into()));
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(Failure::Usage("missing mode: generate, solve or report".into())),
    };
    if mode == Mode::Report {
        let dir = args.input.clone().unwrap_or_else(|| PathBuf::from("."));
        let summaries = runner::collect_summaries(&dir)?;
        let table = runner::report_table(&summaries);
        print!("{table}");
        if let Some(out) = &args.out {
            crate::formats::write_text(&out.join("report.txt"), &table)?;
        }
        return Ok(());
    }

    let task = args.task.ok_or_else(|| Failure::Usage("--task is required".into()))?;
    let seed = args
        .seed
        .ok_or_else(|| Failure::Usage("--seed is required for generate and solve".into()))?;
    let settings = settings(args, task)?;
    if mode == Mode::Generate {
        let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let files = runner::generate(&settings, seed, &out)?;
        println!("wrote {} files under {}", files.len(), out.display());
        return Ok(());
    }

    if args.parallelism == 0 {
        return Err(Failure::Usage("--parallelism must be positive".into()));
    }
    let input = args
        .input
        .clone()
        .ok_or_else(|| Failure::Usage("--in is required for solve".into()))?;
    let workload = Workload::load(task, &input)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(task.name()));
    let opts = RunOptions {
        master_seed: seed,
        parallelism: args.parallelism,
        out: out.clone(),
        trace: args.trace,
        input: input.display().to_string(),
    };
    let summary = runner::run_solve(&settings, &workload, &opts)?;
    println!(
        "{}: solved {}/{} ({:.1}%), mean iterations {:.0}, mean restarts {:.2}, {:.1} s -> {}",
        summary.task,
        summary.solved,
        summary.instances,
        100.0 * summary.solve_rate,
        summary.mean_iterations,
        summary.mean_restarts,
        summary.wall_time_ms / 1e3,
        out.display()
    );
    if summary.unsound > 0 {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} instances reported solved failed verification",
            summary.unsound
        )));
    }
    Ok(())
}
