//! Benchmark generation and parallel solving.
//!
//! Instances are solved on a work-stealing pool; each instance is seeded by
//! `instance_seed(master, id)` so results do not depend on scheduling. A
//! single writer thread owns every output file and emits rows in input
//! order, flushing after each row.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use drnet_core::demix::{
    evaluate, noise_floor, synthesize_dataset, BasisLibrary, CompositionGraph, DemixDataset, DemixDriver,
    DemixMetrics,
};
use drnet_core::optimizer::{solve_with_restarts, SolveConfig, SolveResult, SolveStatus, TraceRecord};
use drnet_core::relaxations::SparsityThreshold;
use drnet_core::rng::{instance_seed, rng_from_seed};
use drnet_core::sat::{generate_random_3sat, CnfFormula, SatDriver};
use drnet_core::sudoku::overlap::{OverlapDriver, OverlapInstance, PrototypeDecoder};
use drnet_core::sudoku::{generate_puzzle, Grid, SudokuDriver, SudokuPuzzle};

use crate::config::{Settings, Task};
use crate::formats::{self, ResultRow, TimingRow};

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRACE_DIR: &str = "trace";

/// Writes a benchmark under `out` and returns the files created.
pub fn generate(settings: &Settings, master_seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let p = &settings.params;
    let rng_for = |id: &str| rng_from_seed(instance_seed(master_seed, id));
    let mut written = Vec::new();
    match settings.task {
        Task::Sat => {
            let dir = out.join("sat").join(format!("n{}", p.sat_n));
            for k in 0..p.count {
                let id = format!("sat/n{}/seed{k}", p.sat_n);
                let f = generate_random_3sat(p.sat_n, p.sat_ratio, &mut rng_for(&id))?;
                let path = dir.join(format!("seed{k}.cnf"));
                formats::write_cnf(&path, &f)?;
                written.push(path);
            }
        }
        Task::Sudoku => {
            let dir = out.join("sudoku");
            let (mut puzzles, mut solutions) = (Vec::new(), Vec::new());
            for k in 0..p.count {
                let mut rng = rng_for(&format!("sudoku/{k}"));
                let clues = rng.random_range(p.clues_min..=p.clues_max);
                let (puzzle, solution) = generate_puzzle(Grid::Nine, clues, &mut rng);
                solutions.push(SudokuPuzzle::new(Grid::Nine, solution)?);
                puzzles.push(puzzle);
            }
            for (name, list) in [(formats::PUZZLES_FILE, &puzzles), ("solutions.txt", &solutions)] {
                let path = dir.join(name);
                formats::write_text(&path, &formats::puzzle_lines(list))?;
                written.push(path);
            }
        }
        Task::Sudoku4Demix => {
            let dir = out.join("sudoku4-demix");
            let decoder = PrototypeDecoder::generate(
                &mut rng_for("decoder"),
                drnet_core::sudoku::overlap::PROTOTYPE_DIM,
                p.toy_separation,
                p.toy_mixing,
            );
            let instances: Vec<OverlapInstance> = (0..p.count)
                .map(|k| OverlapInstance::generate(&mut rng_for(&format!("instance{k}")), &decoder, p.toy_noise))
                .collect();
            let path = dir.join(formats::DECODER_FILE);
            formats::write_text(&path, &formats::decoder_to_json(&decoder)?)?;
            written.push(path);
            let path = dir.join(formats::INSTANCES_FILE);
            formats::write_text(&path, &formats::instances_to_json(&instances)?)?;
            written.push(path);
        }
        Task::Demix => {
            let dir = out.join("demix");
            let (library, dataset) = demix_benchmark(settings, master_seed)?;
            let path = dir.join(formats::LIBRARY_FILE);
            formats::write_text(&path, &formats::library_to_json(&library)?)?;
            written.push(path);
            let path = dir.join(formats::DATASET_FILE);
            formats::write_text(&path, &formats::dataset_to_json(&dataset)?)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Library and dataset for the de-mixing benchmark described by `settings`.
pub fn demix_benchmark(settings: &Settings, master_seed: u64) -> Result<(BasisLibrary, DemixDataset)> {
    let p = &settings.params;
    let mut rng = rng_from_seed(instance_seed(master_seed, "demix"));
    let graph = if p.demix_cols == 0 {
        CompositionGraph::Chain(p.demix_points)
    } else {
        if !p.demix_points.is_multiple_of(p.demix_cols) {
            bail!("points must be a multiple of cols for a lattice");
        }
        CompositionGraph::Triangular {
            rows: p.demix_points / p.demix_cols,
            cols: p.demix_cols,
        }
    };
    let library = BasisLibrary::generate(p.demix_phases, p.demix_dim, &mut rng)?;
    let dataset = synthesize_dataset(&library, graph, p.demix_k, p.demix_noise, &mut rng)?;
    Ok((library, dataset))
}

/// Instances to solve, loaded from disk.
#[derive(Debug, Clone)]
pub enum Workload {
    Sat(Vec<(String, CnfFormula)>),
    Sudoku(Vec<(String, SudokuPuzzle)>),
    Toy {
        decoder: PrototypeDecoder,
        instances: Vec<(String, OverlapInstance)>,
    },
    Demix {
        library: BasisLibrary,
        dataset: DemixDataset,
    },
}

impl Workload {
    /// Reads a file or a directory in the layout written by [`generate`].
    pub fn load(task: Task, input: &Path) -> Result<Self> {
        let in_dir = |name: &str| {
            if input.is_dir() {
                input.join(name)
            } else {
                input.to_path_buf()
            }
        };
        let sibling = |name: &str| {
            if input.is_dir() {
                input.join(name)
            } else {
                input.parent().unwrap_or(Path::new(".")).join(name)
            }
        };
        Ok(match task {
            Task::Sat => {
                let files = if input.is_dir() {
                    formats::list_cnf(input)?
                } else {
                    vec![input.to_path_buf()]
                };
                if files.is_empty() {
                    bail!("no .cnf files in {}", input.display());
                }
                let items = files
                    .iter()
                    .map(|f| {
                        let id = f.file_name().map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into());
                        formats::read_cnf(f).map(|c| (id, c))
                    })
                    .collect::<Result<_>>()?;
                Workload::Sat(items)
            }
            Task::Sudoku => {
                let path = in_dir(formats::PUZZLES_FILE);
                let text = formats::read_text(&path)?;
                let items = formats::parse_puzzle_lines(&text).with_context(|| format!("parsing {}", path.display()))?;
                Workload::Sudoku(items.into_iter().map(|(line, p)| (format!("line{line}"), p)).collect())
            }
            Task::Sudoku4Demix => {
                let decoder = formats::decoder_from_json(&formats::read_text(&sibling(formats::DECODER_FILE))?)?;
                let text = formats::read_text(&in_dir(formats::INSTANCES_FILE))?;
                let instances = formats::instances_from_json(&text, decoder.dim())?;
                Workload::Toy {
                    decoder,
                    instances: instances.into_iter().enumerate().map(|(i, x)| (format!("instance{i}"), x)).collect(),
                }
            }
            Task::Demix => Workload::Demix {
                library: formats::library_from_json(&formats::read_text(&sibling(formats::LIBRARY_FILE))?)?,
                dataset: formats::dataset_from_json(&formats::read_text(&in_dir(formats::DATASET_FILE))?)?,
            },
        })
    }

    pub fn task(&self) -> Task {
        match self {
            Workload::Sat(_) => Task::Sat,
            Workload::Sudoku(_) => Task::Sudoku,
            Workload::Toy { .. } => Task::Sudoku4Demix,
            Workload::Demix { .. } => Task::Demix,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Workload::Sat(v) => v.len(),
            Workload::Sudoku(v) => v.len(),
            Workload::Toy { instances, .. } => instances.len(),
            Workload::Demix { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn id(&self, i: usize) -> &str {
        match self {
            Workload::Sat(v) => &v[i].0,
            Workload::Sudoku(v) => &v[i].0,
            Workload::Toy { instances, .. } => &instances[i].0,
            Workload::Demix { .. } => "dataset",
        }
    }
}

/// Task-specific measurements of one solved instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Detail {
    None,
    Sudoku { clues: usize },
    Toy { correct_digits: usize },
    Demix { metrics: DemixMetrics, noise_floor: f64, active: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub row: ResultRow,
    pub wall_time_ms: f64,
    pub detail: Detail,
    pub trace: Vec<TraceRecord>,
}

fn finish<A>(id: &str, result: SolveResult<A>, verified: bool, detail: Detail, start: Instant) -> Outcome {
    Outcome {
        row: ResultRow {
            id: id.to_string(),
            status: result.status.as_str().to_string(),
            iterations: result.iterations,
            total_iterations: result.total_iterations,
            restarts: result.restarts,
            verified,
        },
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        detail,
        trace: result.trace,
    }
}

/// Solves instance `i` with its own seed.
pub fn solve_one(settings: &Settings, workload: &Workload, i: usize, master_seed: u64, trace: bool) -> Result<Outcome> {
    let start = Instant::now();
    let id = workload.id(i);
    let config = SolveConfig {
        seed: instance_seed(master_seed, id),
        trace,
        ..settings.solve.clone()
    };
    let p = &settings.params;
    Ok(match workload {
        Workload::Sat(items) => {
            let formula = &items[i].1;
            let mut driver = SatDriver::new(formula.clone(), p.encoder)?;
            driver.satisfaction = p.sat_satisfaction;
            let r = solve_with_restarts(&driver, &config)?;
            let ok = formula.verify(&r.assignment);
            finish(id, r, ok, Detail::None, start)
        }
        Workload::Sudoku(items) => {
            let puzzle = &items[i].1;
            let driver = SudokuDriver::new(puzzle.clone(), p.encoder)?;
            let r = solve_with_restarts(&driver, &config)?;
            let ok = puzzle.accepts(&r.assignment);
            let detail = Detail::Sudoku {
                clues: puzzle.clue_count(),
            };
            finish(id, r, ok, detail, start)
        }
        Workload::Toy { decoder, instances } => {
            let inst = &instances[i].1;
            let driver = OverlapDriver::new(inst.clone(), decoder.clone(), p.encoder, p.residual_tol)?;
            let r = solve_with_restarts(&driver, &config)?;
            let high: Vec<u8> = r.assignment.high.iter().map(|d| d.wrapping_sub(4)).collect();
            let ok = Grid::Four.is_valid_solution(&r.assignment.low) && Grid::Four.is_valid_solution(&high);
            let detail = Detail::Toy {
                correct_digits: r.assignment.correct_digits(inst),
            };
            finish(id, r, ok, detail, start)
        }
        Workload::Demix { library, dataset } => {
            let threshold = SparsityThreshold::default_for(dataset.k)?;
            let mut driver = DemixDriver::new(dataset.clone(), library.clone(), threshold, p.encoder, p.residual_tol)?;
            driver.edge_weight = p.demix_edge_weight;
            let r = solve_with_restarts(&driver, &config)?;
            let metrics = evaluate(&r.assignment, dataset, library);
            let active: Vec<usize> = (0..dataset.signals.len()).map(|v| r.assignment.active(v).len()).collect();
            let ok = active.iter().all(|&a| a <= dataset.k) && metrics.l1.iter().all(|&l| l <= p.residual_tol);
            let detail = Detail::Demix {
                metrics,
                noise_floor: noise_floor(dataset, library),
                active,
            };
            finish(id, r, ok, detail, start)
        }
    })
}

/// Aggregate report of one solve run.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub task: String,
    pub version: String,
    pub input: String,
    pub seed: u64,
    pub parallelism: usize,
    pub instances: usize,
    pub solved: usize,
    pub solve_rate: f64,
    /// Mean iterations over all attempts, per instance.
    pub mean_iterations: f64,
    pub mean_restarts: f64,
    /// Solved rows whose independent verification failed.
    pub unsound: usize,
    pub wall_time_ms: f64,
    pub config: BTreeMap<String, String>,
    pub extra: Value,
}

/// How a solve run is executed and where it writes.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub master_seed: u64,
    pub parallelism: usize,
    pub out: PathBuf,
    pub trace: bool,
    pub input: String,
}

struct Sinks {
    results: csv::Writer<fs::File>,
    timings: csv::Writer<fs::File>,
    trace_dir: Option<PathBuf>,
}

impl Sinks {
    fn write(&mut self, o: &Outcome) -> Result<()> {
        self.results.serialize(&o.row)?;
        self.results.flush()?;
        self.timings.serialize(TimingRow {
            id: o.row.id.clone(),
            wall_time_ms: o.wall_time_ms,
        })?;
        self.timings.flush()?;
        if let Some(dir) = &self.trace_dir {
            let name: String = o
                .row
                .id
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                .collect();
            let mut w = BufWriter::new(fs::File::create(dir.join(format!("{name}.jsonl")))?);
            for t in &o.trace {
                let globals: Vec<Value> = t
                    .globals
                    .iter()
                    .map(|&(id, value, weight)| json!({"id": id, "value": value, "weight": weight}))
                    .collect();
                let line = json!({
                    "attempt": t.attempt,
                    "iteration": t.iteration,
                    "objective": t.objective,
                    "local_weight": t.local_weight,
                    "local_mean": t.local_mean,
                    "globals": globals,
                });
                writeln!(w, "{line}")?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// Solves every instance and writes results, timings, summary and, when
/// tracing, one JSONL trace per instance. Rows already solved are flushed
/// even if a later instance fails.
pub fn run_solve(settings: &Settings, workload: &Workload, opts: &RunOptions) -> Result<Summary> {
    if workload.task() != settings.task {
        bail!("workload task {} does not match settings task {}", workload.task(), settings.task);
    }
    if opts.parallelism == 0 {
        bail!("parallelism must be positive");
    }
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let trace_dir = opts.trace.then(|| opts.out.join(TRACE_DIR));
    if let Some(d) = &trace_dir {
        fs::create_dir_all(d)?;
    }
    let mut sinks = Sinks {
        results: csv::Writer::from_path(opts.out.join(RESULTS_FILE))?,
        timings: csv::Writer::from_path(opts.out.join(TIMINGS_FILE))?,
        trace_dir,
    };
    let start = Instant::now();
    let n = workload.len();
    let (tx, rx) = mpsc::channel::<(usize, Result<Outcome>)>();

    let writer = std::thread::spawn(move || -> (Vec<Outcome>, Option<anyhow::Error>) {
        let mut pending = BTreeMap::new();
        let mut done = Vec::new();
        let mut error = None;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&done.len()) {
                match r.and_then(|o| sinks.write(&o).map(|_| o)) {
                    Ok(o) => done.push(o),
                    Err(e) => {
                        error.get_or_insert(e);
                        return (done, error);
                    }
                }
            }
        }
        (done, error)
    });

    let work = |i: usize| solve_one(settings, workload, i, opts.master_seed, opts.trace);
    if opts.parallelism == 1 {
        for i in 0..n {
            if tx.send((i, work(i))).is_err() {
                break;
            }
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.parallelism).build()?;
        pool.install(|| {
            (0..n).into_par_iter().for_each_with(tx.clone(), |tx, i| {
                let _ = tx.send((i, work(i)));
            })
        });
    }
    drop(tx);
    let (outcomes, error) = writer.join().expect("writer thread panicked");
    if let Some(e) = error {
        return Err(e.context(format!("{} of {n} instances written", outcomes.len())));
    }

    let summary = summarize(settings, opts, &outcomes, start.elapsed().as_secs_f64() * 1e3);
    formats::write_text(&opts.out.join(SUMMARY_FILE), &serde_json::to_string_pretty(&summary)?)?;
    if let [Outcome {
        detail: Detail::Demix { metrics, active, .. },
        ..
    }] = outcomes.as_slice()
    {
        let mut w = csv::Writer::from_path(opts.out.join(METRICS_FILE))?;
        w.write_record(["point", "l1", "l2", "active"])?;
        for (v, ((l1, l2), a)) in metrics.l1.iter().zip(&metrics.l2).zip(active).enumerate() {
            w.write_record([v.to_string(), l1.to_string(), l2.to_string(), a.to_string()])?;
        }
        w.flush()?;
    }
    Ok(summary)
}

fn summarize(settings: &Settings, opts: &RunOptions, outcomes: &[Outcome], wall_ms: f64) -> Summary {
    let n = outcomes.len();
    let mean = |f: &dyn Fn(&Outcome) -> f64| {
        if n == 0 {
            0.0
        } else {
            outcomes.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let is_solved = |o: &Outcome| o.row.status == SolveStatus::Solved.as_str();
    let solved = outcomes.iter().filter(|o| is_solved(o)).count();
    let unsound = outcomes.iter().filter(|o| is_solved(o) && !o.row.verified).count();
    let mut config = settings.entries().clone();
    config.insert("seed".into(), opts.master_seed.to_string());
    Summary {
        task: settings.task.name().into(),
        version: crate::version().into(),
        input: opts.input.clone(),
        seed: opts.master_seed,
        parallelism: opts.parallelism,
        instances: n,
        solved,
        solve_rate: if n == 0 { 0.0 } else { solved as f64 / n as f64 },
        mean_iterations: mean(&|o| o.row.total_iterations as f64),
        mean_restarts: mean(&|o| o.row.restarts as f64),
        unsound,
        wall_time_ms: wall_ms,
        config,
        extra: extra(outcomes),
    }
}

fn extra(outcomes: &[Outcome]) -> Value {
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let (mut digits, mut exact, mut toy) = (0usize, 0usize, 0usize);
    let mut demix = None;
    for o in outcomes {
        match &o.detail {
            Detail::None => {}
            Detail::Sudoku { clues } => *histogram.entry(*clues).or_default() += 1,
            Detail::Toy { correct_digits } => {
                toy += 1;
                digits += correct_digits;
                exact += usize::from(*correct_digits == 32);
            }
            Detail::Demix {
                metrics, noise_floor, ..
            } => {
                demix = Some(json!({
                    "mean_l1": metrics.mean_l1(),
                    "mean_l2": metrics.mean_l2(),
                    "noise_floor": noise_floor,
                    "l1_over_floor": metrics.mean_l1() / noise_floor,
                    "precision": metrics.precision,
                    "recall": metrics.recall,
                    "f1": metrics.f1,
                }))
            }
        }
    }
    let mut m = serde_json::Map::new();
    if !histogram.is_empty() {
        let h: serde_json::Map<String, Value> = histogram.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        m.insert("clue_histogram".into(), Value::Object(h));
    }
    if toy > 0 {
        m.insert("digit_accuracy".into(), json!(digits as f64 / (32 * toy) as f64));
        m.insert("instance_accuracy".into(), json!(exact as f64 / toy as f64));
    }
    if let Some(d) = demix {
        m.insert("demix".into(), d);
    }
    Value::Object(m)
}

/// Reads every `summary.json` under `dir`, sorted by path.
pub fn collect_summaries(dir: &Path) -> Result<Vec<(PathBuf, Value)>> {
    let paths: BTreeSet<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() == SUMMARY_FILE)
        .map(|e| e.into_path())
        .collect();
    paths
        .into_iter()
        .map(|p| {
            let v: Value = serde_json::from_str(&formats::read_text(&p)?).with_context(|| format!("parsing {}", p.display()))?;
            Ok((p, v))
        })
        .collect()
}

/// Plain-text table of summaries.
pub fn report_table(summaries: &[(PathBuf, Value)]) -> String {
    let mut out = format!(
        "{:<40} {:<14} {:>9} {:>10} {:>10} {:>9} {:>8} {:>12}\n",
        "run", "task", "instances", "solve-rate", "mean-iters", "restarts", "unsound", "wall-time-s"
    );
    for (path, v) in summaries {
        let run = path.parent().map_or_else(String::new, |p| p.display().to_string());
        out += &format!(
            "{:<40} {:<14} {:>9} {:>9.1}% {:>10.0} {:>9.2} {:>8} {:>12.1}\n",
            run,
            v["task"].as_str().unwrap_or("?"),
            v["instances"].as_u64().unwrap_or(0),
            100.0 * v["solve_rate"].as_f64().unwrap_or(0.0),
            v["mean_iterations"].as_f64().unwrap_or(0.0),
            v["mean_restarts"].as_f64().unwrap_or(0.0),
            v["unsound"].as_u64().unwrap_or(0),
            v["wall_time_ms"].as_f64().unwrap_or(0.0) / 1e3,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_demix_matches_settings() {
        let mut s = Settings::defaults(Task::Demix);
        s.set_all([("points".to_string(), "12".to_string()), ("cols".to_string(), "4".to_string())])
            .unwrap();
        let (lib, ds) = demix_benchmark(&s, 3).unwrap();
        assert_eq!(lib.len(), 20);
        assert_eq!(ds.signals.len(), 12);
        assert!(ds.edges.len() > 11);
        s.set("cols", "5").unwrap();
        assert!(demix_benchmark(&s, 3).is_err());
    }

    #[test]
    fn sat_generation_is_seeded() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Settings::defaults(Task::Sat);
        s.set_all([("n".to_string(), "10".to_string()), ("count".to_string(), "3".to_string())])
            .unwrap();
        let a = generate(&s, 5, dir.path()).unwrap();
        let texts: Vec<String> = a.iter().map(|p| fs::read_to_string(p).unwrap()).collect();
        let b = generate(&s, 5, dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(texts, b.iter().map(|p| fs::read_to_string(p).unwrap()).collect::<Vec<_>>());
        assert!(a[0].ends_with("sat/n10/seed0.cnf"));
        assert_ne!(texts[0], texts[1]);
    }
}
