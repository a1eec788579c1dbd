//! Flat `key = value` run configuration.
//!
//! Every key starts from the task default, may be overridden by a config
//! file and then by command-line flags, and the fully resolved map is
//! embedded in each run summary.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use drnet_core::encoder::EncoderMode;
use drnet_core::graph::BatchMode;
use drnet_core::optimizer::{LocalReduction, LocalWeightRule, SolveConfig, UpdateRule};
use drnet_core::sat::ClauseSatisfaction;
use drnet_core::sudoku::overlap::Mixing;
use drnet_core::{demix, sat, sudoku};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Task {
    Sudoku,
    #[value(name = "sudoku4-demix")]
    Sudoku4Demix,
    Sat,
    Demix,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Sudoku => "sudoku",
            Task::Sudoku4Demix => "sudoku4-demix",
            Task::Sat => "sat",
            Task::Demix => "demix",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error in a key, a value or a config file line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Task parameters that are not solver hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskParams {
    pub encoder: EncoderMode,
    /// Instances produced by `gen`.
    pub count: usize,
    pub sat_n: usize,
    pub sat_ratio: f64,
    pub sat_satisfaction: ClauseSatisfaction,
    pub clues_min: usize,
    pub clues_max: usize,
    pub toy_noise: f64,
    pub toy_separation: f64,
    pub toy_mixing: Mixing,
    pub residual_tol: f64,
    pub demix_points: usize,
    /// Lattice width; zero selects a chain.
    pub demix_cols: usize,
    pub demix_phases: usize,
    pub demix_dim: usize,
    pub demix_k: usize,
    pub demix_noise: f64,
    pub demix_edge_weight: f64,
}

/// Resolved solver and task settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub task: Task,
    pub solve: SolveConfig,
    pub params: TaskParams,
    entries: BTreeMap<String, String>,
}

fn task_defaults(task: Task) -> SolveConfig {
    match task {
        Task::Sudoku => sudoku::default_config(),
        Task::Sudoku4Demix => sudoku::overlap::default_config(),
        Task::Sat => sat::default_config(),
        Task::Demix => demix::default_config(),
    }
}

fn default_entries(task: Task) -> BTreeMap<String, String> {
    let c = task_defaults(task);
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("learning_rate", c.learning_rate.to_string());
    put("lr_decay", c.lr_decay.to_string());
    match c.update {
        UpdateRule::Momentum { momentum } => {
            put("update", "momentum".into());
            put("momentum", momentum.to_string());
            let UpdateRule::Adam { beta1, beta2, eps } = UpdateRule::adam() else { unreachable!() };
            put("beta1", beta1.to_string());
            put("beta2", beta2.to_string());
            put("adam_eps", eps.to_string());
        }
        UpdateRule::Adam { beta1, beta2, eps } => {
            put("update", "adam".into());
            let UpdateRule::Momentum { momentum } = UpdateRule::momentum() else { unreachable!() };
            put("momentum", momentum.to_string());
            put("beta1", beta1.to_string());
            put("beta2", beta2.to_string());
            put("adam_eps", eps.to_string());
        }
    }
    put("max_iterations", c.max_iterations.to_string());
    put("batch_budget", if c.batch_budget == usize::MAX { "all".into() } else { c.batch_budget.to_string() });
    put(
        "batch_mode",
        match c.batch_mode {
            BatchMode::Component => "component",
            BatchMode::Subpath => "subpath",
        }
        .into(),
    );
    put("eta", c.eta.to_string());
    put("ema_decay", c.ema_decay.to_string());
    put("decode_interval", c.decode_interval.to_string());
    put("convergence_window", c.convergence_window.to_string());
    put("convergence_tol", c.convergence_tol.to_string());
    put("restart_limit", c.restart_limit.to_string());
    put("weight_init", c.weight_init.to_string());
    put("weight_min", c.weight_bounds.0.to_string());
    put("weight_max", c.weight_bounds.1.to_string());
    put("entropy_threshold", c.entropy_threshold.to_string());
    put("local_weight_init", c.local_weight_init.to_string());
    let (rule, factor, every) = match c.local_weight_rule {
        LocalWeightRule::Adaptive => ("adaptive", 1.0, 50),
        LocalWeightRule::Annealed { factor, every } => ("annealed", factor, every),
        LocalWeightRule::Fixed => ("fixed", 1.0, 50),
    };
    put("local_weight_rule", rule.into());
    put("local_weight_factor", factor.to_string());
    put("local_weight_every", every.to_string());
    put(
        "local_reduction",
        match c.local_reduction {
            LocalReduction::Mean => "mean",
            LocalReduction::Sum => "sum",
        }
        .into(),
    );
    put("param_bound", c.param_bound.map_or("none".into(), |b| b.to_string()));
    put("seed", "0".into());
    put("encoder", "free".into());
    put("hidden", "32".into());

    match task {
        Task::Sat => {
            put("count", "100".into());
            put("n", "30".into());
            put("ratio", sat::HARD_RATIO.to_string());
            put("satisfaction", "relaxed".into());
        }
        Task::Sudoku => {
            put("count", "100".into());
            put("clues_min", "28".into());
            put("clues_max", "32".into());
        }
        Task::Sudoku4Demix => {
            put("count", "500".into());
            put("noise", "0.05".into());
            put("separation", "4".into());
            put("mixing", "max".into());
            put("residual_tol", "0.1".into());
        }
        Task::Demix => {
            put("count", "1".into());
            put("points", "60".into());
            put("cols", "0".into());
            put("phases", "20".into());
            put("dim", "64".into());
            put("k", "3".into());
            put("noise", "0.02".into());
            put("edge_weight", "0.005".into());
            put("residual_tol", "0.05".into());
        }
    }
    m
}

fn parse<T: FromStr>(entries: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = &entries[key];
    raw.parse()
        .map_err(|_| ConfigError(format!("invalid value {raw:?} for key {key}")))
}

fn choice<'a>(entries: &'a BTreeMap<String, String>, key: &str, allowed: &[&str]) -> Result<&'a str> {
    let raw = entries[key].as_str();
    if allowed.contains(&raw) {
        Ok(raw)
    } else {
        Err(ConfigError(format!("invalid value {raw:?} for key {key}; expected one of {allowed:?}")))
    }
}

impl Settings {
    pub fn defaults(task: Task) -> Self {
        Self::resolve(task, default_entries(task)).expect("task defaults resolve")
    }

    fn resolve(task: Task, entries: BTreeMap<String, String>) -> Result<Self> {
        let e = &entries;
        let update = match choice(e, "update", &["adam", "momentum"])? {
            "adam" => UpdateRule::Adam {
                beta1: parse(e, "beta1")?,
                beta2: parse(e, "beta2")?,
                eps: parse(e, "adam_eps")?,
            },
            _ => UpdateRule::Momentum {
                momentum: parse(e, "momentum")?,
            },
        };
        let local_weight_rule = match choice(e, "local_weight_rule", &["adaptive", "annealed", "fixed"])? {
            "adaptive" => LocalWeightRule::Adaptive,
            "annealed" => LocalWeightRule::Annealed {
                factor: parse(e, "local_weight_factor")?,
                every: parse(e, "local_weight_every")?,
            },
            _ => LocalWeightRule::Fixed,
        };
        let solve = SolveConfig {
            learning_rate: parse(e, "learning_rate")?,
            lr_decay: parse(e, "lr_decay")?,
            update,
            max_iterations: parse(e, "max_iterations")?,
            batch_budget: match e["batch_budget"].as_str() {
                "all" => usize::MAX,
                _ => parse(e, "batch_budget")?,
            },
            batch_mode: match choice(e, "batch_mode", &["component", "subpath"])? {
                "component" => BatchMode::Component,
                _ => BatchMode::Subpath,
            },
            eta: parse(e, "eta")?,
            ema_decay: parse(e, "ema_decay")?,
            decode_interval: parse(e, "decode_interval")?,
            convergence_window: parse(e, "convergence_window")?,
            convergence_tol: parse(e, "convergence_tol")?,
            restart_limit: parse(e, "restart_limit")?,
            seed: parse(e, "seed")?,
            weight_init: parse(e, "weight_init")?,
            weight_bounds: (parse(e, "weight_min")?, parse(e, "weight_max")?),
            entropy_threshold: parse(e, "entropy_threshold")?,
            local_weight_init: parse(e, "local_weight_init")?,
            local_weight_rule,
            local_reduction: match choice(e, "local_reduction", &["mean", "sum"])? {
                "mean" => LocalReduction::Mean,
                _ => LocalReduction::Sum,
            },
            param_bound: match e["param_bound"].as_str() {
                "none" => None,
                _ => Some(parse(e, "param_bound")?),
            },
            trace: false,
        };
        solve.validate().map_err(|err| ConfigError(err.to_string()))?;

        let get = |k: &str| e.get(k).map(String::as_str);
        let num = |k: &str, d: f64| -> Result<f64> { get(k).map_or(Ok(d), |_| parse(e, k)) };
        let int = |k: &str, d: usize| -> Result<usize> { get(k).map_or(Ok(d), |_| parse(e, k)) };
        let params = TaskParams {
            encoder: match choice(e, "encoder", &["free", "mlp"])? {
                "free" => EncoderMode::FreeLogits,
                _ => EncoderMode::Mlp {
                    hidden: parse(e, "hidden")?,
                },
            },
            count: parse(e, "count")?,
            sat_n: int("n", 30)?,
            sat_ratio: num("ratio", sat::HARD_RATIO)?,
            sat_satisfaction: match get("satisfaction") {
                Some(_) => match choice(e, "satisfaction", &["relaxed", "rounded"])? {
                    "relaxed" => ClauseSatisfaction::Relaxed,
                    _ => ClauseSatisfaction::Rounded,
                },
                None => ClauseSatisfaction::default(),
            },
            clues_min: int("clues_min", 28)?,
            clues_max: int("clues_max", 32)?,
            toy_noise: num("noise", 0.05)?,
            toy_separation: num("separation", 4.0)?,
            toy_mixing: match get("mixing") {
                Some(_) => match choice(e, "mixing", &["max", "additive"])? {
                    "max" => Mixing::Max,
                    _ => Mixing::Additive,
                },
                None => Mixing::Max,
            },
            residual_tol: num("residual_tol", 0.1)?,
            demix_points: int("points", 60)?,
            demix_cols: int("cols", 0)?,
            demix_phases: int("phases", 20)?,
            demix_dim: int("dim", 64)?,
            demix_k: int("k", 3)?,
            demix_noise: num("noise", 0.02)?,
            demix_edge_weight: num("edge_weight", 0.005)?,
        };
        if params.clues_min > params.clues_max {
            return Err(ConfigError("clues_min exceeds clues_max".into()));
        }
        Ok(Self {
            task,
            solve,
            params,
            entries,
        })
    }

    /// Applies one override; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_all([(key.to_string(), value.to_string())])
    }

    /// Applies overrides atomically: either all take effect or none.
    pub fn set_all<I: IntoIterator<Item = (String, String)>>(&mut self, pairs: I) -> Result<()> {
        let mut entries = self.entries.clone();
        for (k, v) in pairs {
            match entries.get_mut(&k) {
                Some(slot) => *slot = v,
                None => {
                    return Err(ConfigError(format!("unknown key {k:?} for task {}", self.task)));
                }
            }
        }
        *self = Self::resolve(self.task, entries)?;
        Ok(())
    }

    /// Applies a config file's `key = value` lines.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        self.set_all(parse_pairs(text)?)
    }

    pub fn apply_file(&mut self, path: &Path) -> std::result::Result<(), anyhow::Error> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)?;
        Ok(())
    }

    /// The resolved configuration, sorted by key.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// The resolved configuration as a config file.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key = value", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError(format!("line {}: empty key or value", no + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}
