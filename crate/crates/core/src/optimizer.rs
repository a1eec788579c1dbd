//! Constraint-aware stochastic gradient descent.
//!
//! Each iteration samples a batch from the constraint graph, lets the task
//! driver record its reconstruction loss and penalty terms on a fresh tape,
//! adjusts the penalty weights from the current penalty values (outside the
//! tape), and takes one gradient step on the assembled objective
//!
//! ```text
//! mean(recon) + w_local * reduce(local) + sum_j w_j * global_j
//! ```
//!
//! A hard assignment is decoded periodically and checked by the driver's
//! exact verifier; only a verified assignment is ever reported as solved.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Tape, TensorValue, Var};
use crate::graph::{Batch, BatchMode, ConstraintGraph, GlobalConstraint};
use crate::rng::{attempt_seed, rng_from_seed, SolverRng};
use crate::{Error, Result};

/// Per-constraint penalty weight with satisfaction threshold and history.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyState {
    pub weight: f64,
    pub threshold: f64,
    /// Exponential moving average of the satisfied indicator.
    pub satisfaction: f64,
    pub min: f64,
    pub max: f64,
}

impl PenaltyState {
    pub fn new(weight: f64, threshold: f64, bounds: (f64, f64)) -> Self {
        Self {
            weight: weight.clamp(bounds.0, bounds.1),
            threshold,
            satisfaction: 0.0,
            min: bounds.0,
            max: bounds.1,
        }
    }

    /// Multiplicative update: shrink when `value <= threshold`, grow otherwise.
    pub fn adjust(&mut self, value: f64, eta: f64, decay: f64) {
        let satisfied = value <= self.threshold;
        self.weight = if satisfied {
            (self.weight / (1.0 + eta)).max(self.min)
        } else {
            (self.weight * (1.0 + eta)).min(self.max)
        };
        let hit = if satisfied { 1.0 } else { 0.0 };
        self.satisfaction = decay * self.satisfaction + (1.0 - decay) * hit;
    }
}

/// Applies [`PenaltyState::adjust`] pairwise.
pub fn adjust_weights(states: &mut [PenaltyState], values: &[f64], eta: f64, decay: f64) -> Result<()> {
    if states.len() != values.len() {
        return Err(Error::ShapeMismatch {
            op: "adjust_weights",
            left: vec![states.len()],
            right: vec![values.len()],
        });
    }
    for (s, &v) in states.iter_mut().zip(values) {
        s.adjust(v, eta, decay);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    Momentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl UpdateRule {
    pub const fn momentum() -> Self {
        UpdateRule::Momentum { momentum: 0.9 }
    }

    pub const fn adam() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// How the per-point local penalties of a batch are reduced before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalReduction {
    Mean,
    Sum,
}

/// Policy for the shared local-penalty weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalWeightRule {
    /// Adjusted by satisfaction like a global weight, using the largest local value.
    Adaptive,
    /// Multiplied by `factor` every `every` iterations, within the weight bounds.
    Annealed { factor: f64, every: usize },
    /// Held at `local_weight_init`.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied every iteration.
    pub lr_decay: f64,
    pub update: UpdateRule,
    pub max_iterations: usize,
    pub batch_budget: usize,
    pub batch_mode: BatchMode,
    /// Weight-adjust factor `eta`.
    pub eta: f64,
    pub ema_decay: f64,
    pub decode_interval: usize,
    /// Stop early when the objective moved less than `convergence_tol`
    /// (relative) over this many iterations. Zero disables the check.
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub restart_limit: u32,
    pub seed: u64,
    pub weight_init: f64,
    pub weight_bounds: (f64, f64),
    /// Satisfaction threshold for entropy-type terms, in nats.
    pub entropy_threshold: f64,
    pub local_weight_init: f64,
    pub local_weight_rule: LocalWeightRule,
    pub local_reduction: LocalReduction,
    /// Parameters are clamped to `[-b, b]` after every step when set.
    pub param_bound: Option<f64>,
    pub trace: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            lr_decay: 1.0,
            update: UpdateRule::momentum(),
            max_iterations: 2000,
            batch_budget: usize::MAX,
            batch_mode: BatchMode::Component,
            eta: 0.05,
            ema_decay: 0.9,
            decode_interval: 20,
            convergence_window: 0,
            convergence_tol: 1e-9,
            restart_limit: 0,
            seed: 0,
            weight_init: 1.0,
            weight_bounds: (1e-3, 1e3),
            entropy_threshold: 0.01,
            local_weight_init: 1.0,
            local_weight_rule: LocalWeightRule::Adaptive,
            local_reduction: LocalReduction::Mean,
            param_bound: None,
            trace: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("lr_decay", self.lr_decay),
            ("eta", self.eta),
            ("ema_decay", self.ema_decay),
            ("weight_init", self.weight_init),
            ("local_weight_init", self.local_weight_init),
            ("weight_min", self.weight_bounds.0),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        if matches!(self.param_bound, Some(b) if !(b > 0.0)) {
            return Err(Error::InvalidArgument("param_bound must be positive".into()));
        }
        if self.weight_bounds.0 > self.weight_bounds.1 {
            return Err(Error::InvalidArgument("weight bounds inverted".into()));
        }
        if self.max_iterations == 0 || self.batch_budget == 0 || self.decode_interval == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations, batch_budget and decode_interval must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    /// Converged (objective stalled) without a verified assignment.
    Unsolved,
    BudgetExhausted,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::Unsolved => "unsolved",
            SolveStatus::BudgetExhausted => "budget-exhausted",
        }
    }
}

/// One line of the optional per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub attempt: u32,
    pub iteration: usize,
    pub objective: f64,
    pub local_weight: f64,
    pub local_mean: f64,
    /// `(constraint id, penalty value, weight after adjustment)` for the batch.
    pub globals: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SolveResult<A> {
    pub status: SolveStatus,
    pub assignment: A,
    /// Iterations of the final attempt.
    pub iterations: usize,
    /// Iterations summed over all attempts.
    pub total_iterations: usize,
    pub restarts: u32,
    pub objective: f64,
    pub params: Vec<TensorValue>,
    pub trace: Vec<TraceRecord>,
}

impl<A> SolveResult<A> {
    pub fn solved(&self) -> bool {
        self.status == SolveStatus::Solved
    }
}

/// Terms recorded by a driver for one batch.
#[derive(Debug, Clone, Default)]
pub struct ObjectiveTerms {
    /// Per-point reconstruction losses, `[m]`.
    pub reconstruction: Option<Var>,
    /// Per-point local penalties, `[m]`.
    pub local: Option<Var>,
    /// Global penalties in `batch.constraints` order, `[batch.constraints.len()]`.
    pub global: Option<Var>,
    /// Values compared against each global threshold when adjusting weights.
    /// Defaults to the global penalty values.
    pub global_violation: Option<Vec<f64>>,
}

/// A task plugged into the solver: parameters, penalty terms, decoding and
/// an exact verifier that does not look at penalty values.
pub trait Driver {
    type Assignment: Clone;

    fn vertex_count(&self) -> usize;
    fn constraints(&self) -> &[GlobalConstraint];
    fn init_params(&self, rng: &mut SolverRng) -> Vec<TensorValue>;
    fn build(&self, tape: &mut Tape, params: &[Var], batch: &Batch, iteration: usize) -> Result<ObjectiveTerms>;
    fn decode(&self, params: &[TensorValue]) -> Result<Self::Assignment>;
    fn verify(&self, assignment: &Self::Assignment) -> bool;

    /// Satisfaction threshold for a global constraint.
    fn global_threshold(&self, _constraint: &GlobalConstraint, config: &SolveConfig) -> f64 {
        config.entropy_threshold
    }

    /// Whether the weight of a global constraint follows its satisfaction.
    /// Fixed weights stay at `weight_init`.
    fn weight_is_adaptive(&self, _constraint: &GlobalConstraint) -> bool {
        true
    }

    /// Whether a verified decode ends the solve early.
    fn stop_when_verified(&self) -> bool {
        true
    }
}

/// `mean(recon) + local_weight * reduce(local) + sum_j weights_j * global_j`.
pub fn assemble_objective(
    tape: &mut Tape,
    batch_len: usize,
    terms: &ObjectiveTerms,
    local_weight: f64,
    global_weights: &[f64],
    reduction: LocalReduction,
) -> Result<Var> {
    if batch_len == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut total = tape.scalar(0.0);
    if let Some(r) = terms.reconstruction {
        let m = tape.mean(r)?;
        total = tape.add(total, m)?;
    }
    if let Some(l) = terms.local {
        let reduced = match reduction {
            LocalReduction::Mean => tape.mean(l)?,
            LocalReduction::Sum => tape.sum(l)?,
        };
        let weighted = tape.scale(reduced, local_weight)?;
        total = tape.add(total, weighted)?;
    }
    if let Some(g) = terms.global {
        if tape.value(g).len() != global_weights.len() {
            return Err(Error::ShapeMismatch {
                op: "assemble_objective",
                left: tape.value(g).shape().to_vec(),
                right: vec![global_weights.len()],
            });
        }
        if !global_weights.is_empty() {
            let w = tape.leaf(TensorValue::vector(global_weights.to_vec()));
            let wg = tape.mul(g, w)?;
            let s = tape.sum(wg)?;
            total = tape.add(total, s)?;
        }
    }
    Ok(total)
}

struct Stepper {
    rule: UpdateRule,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: i32,
}

impl Stepper {
    fn new(rule: UpdateRule, params: &[TensorValue]) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            rule,
            second: zeros.clone(),
            first: zeros,
            steps: 0,
        }
    }

    fn step(&mut self, params: &mut [TensorValue], grads: &[Vec<f64>], lr: f64) {
        self.steps += 1;
        match self.rule {
            UpdateRule::Momentum { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.first) {
                    for ((x, &gi), vi) in p.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                        *vi = momentum * *vi + gi;
                        *x -= lr * *vi;
                    }
                }
            }
            UpdateRule::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - libm::pow(beta1, self.steps as f64);
                let c2 = 1.0 - libm::pow(beta2, self.steps as f64);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    for (((x, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *x -= lr * mhat / (libm::sqrt(vhat) + eps);
                    }
                }
            }
        }
    }
}

/// Runs one constraint-aware SGD attempt from a fresh initialization.
pub fn solve<D: Driver>(driver: &D, config: &SolveConfig) -> Result<SolveResult<D::Assignment>> {
    let graph = ConstraintGraph::build(driver.vertex_count(), driver.constraints())?;
    solve_on_graph(driver, &graph, config, config.seed, 0)
}

/// Up to `restart_limit + 1` attempts with fresh parameters and RNG streams.
/// Attempt 0 uses `config.seed` directly, so a zero limit equals [`solve`].
pub fn solve_with_restarts<D: Driver>(driver: &D, config: &SolveConfig) -> Result<SolveResult<D::Assignment>> {
    let graph = ConstraintGraph::build(driver.vertex_count(), driver.constraints())?;
    let mut total = 0;
    let mut trace = Vec::new();
    let mut attempt = 0;
    loop {
        let seed = if attempt == 0 {
            config.seed
        } else {
            attempt_seed(config.seed, attempt)
        };
        let mut result = solve_on_graph(driver, &graph, config, seed, attempt)?;
        total += result.iterations;
        trace.append(&mut result.trace);
        if result.solved() || attempt >= config.restart_limit {
            result.restarts = attempt;
            result.total_iterations = total;
            result.trace = trace;
            return Ok(result);
        }
        attempt += 1;
    }
}

fn solve_on_graph<D: Driver>(
    driver: &D,
    graph: &ConstraintGraph,
    config: &SolveConfig,
    seed: u64,
    attempt: u32,
) -> Result<SolveResult<D::Assignment>> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut params = driver.init_params(&mut rng);
    let constraints = driver.constraints();
    let mut states: Vec<PenaltyState> = constraints
        .iter()
        .map(|c| PenaltyState::new(config.weight_init, driver.global_threshold(c, config), config.weight_bounds))
        .collect();
    let adaptive: Vec<bool> = constraints.iter().map(|c| driver.weight_is_adaptive(c)).collect();
    let mut local = PenaltyState::new(config.local_weight_init, config.entropy_threshold, config.weight_bounds);
    let mut stepper = Stepper::new(config.update, &params);
    let whole = graph.components().len() == 1 && config.batch_budget >= graph.vertex_count();
    let full = graph.full_batch();
    let mut trace = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut lr = config.learning_rate;
    let mut objective = f64::NAN;

    let finish = |status: SolveStatus, assignment, iterations, objective, params, trace| SolveResult {
        status,
        assignment,
        iterations,
        total_iterations: iterations,
        restarts: 0,
        objective,
        params,
        trace,
    };

    for it in 0..config.max_iterations {
        if it % config.decode_interval == 0 && driver.stop_when_verified() {
            let a = driver.decode(&params)?;
            if driver.verify(&a) {
                return Ok(finish(SolveStatus::Solved, a, it, objective, params, trace));
            }
        }

        let sampled;
        let batch = if whole {
            &full
        } else {
            sampled = graph.sample_batch(&mut rng, config.batch_budget, config.batch_mode);
            &sampled
        };

        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let terms = driver.build(&mut tape, &vars, batch, it)?;

        // weights are constants on the tape; adjust them from this forward pass
        let global_values: Vec<f64> = terms
            .global
            .map(|g| tape.value(g).data().to_vec())
            .unwrap_or_default();
        if global_values.len() != batch.constraints.len() {
            return Err(Error::ShapeMismatch {
                op: "driver.build",
                left: vec![global_values.len()],
                right: vec![batch.constraints.len()],
            });
        }
        let violation = terms.global_violation.as_deref().unwrap_or(&global_values);
        for (&c, &v) in batch.constraints.iter().zip(violation) {
            if adaptive[c] {
                states[c].adjust(v, config.eta, config.ema_decay);
            }
        }
        let local_values: Vec<f64> = terms.local.map(|l| tape.value(l).data().to_vec()).unwrap_or_default();
        match config.local_weight_rule {
            LocalWeightRule::Adaptive => {
                if !local_values.is_empty() {
                    let worst = local_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    local.adjust(worst, config.eta, config.ema_decay);
                }
            }
            LocalWeightRule::Annealed { factor, every } => {
                if every > 0 && it > 0 && it % every == 0 {
                    local.weight = (local.weight * factor).clamp(local.min, local.max);
                }
            }
            LocalWeightRule::Fixed => {}
        }
        let weights: Vec<f64> = batch.constraints.iter().map(|&c| states[c].weight).collect();

        let root = assemble_objective(
            &mut tape,
            batch.vertices.len(),
            &terms,
            local.weight,
            &weights,
            config.local_reduction,
        )?;
        objective = tape.value(root).item();
        if !objective.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "objective became non-finite at iteration {it}"
            )));
        }
        tape.backward(root)?;
        let grads: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();
        stepper.step(&mut params, &grads, lr);
        if let Some(b) = config.param_bound {
            for p in params.iter_mut() {
                p.data_mut().iter_mut().for_each(|x| *x = x.clamp(-b, b));
            }
        }
        lr *= config.lr_decay;

        if config.trace {
            let local_mean = if local_values.is_empty() {
                0.0
            } else {
                local_values.iter().sum::<f64>() / local_values.len() as f64
            };
            trace.push(TraceRecord {
                attempt,
                iteration: it,
                objective,
                local_weight: local.weight,
                local_mean,
                globals: batch
                    .constraints
                    .iter()
                    .zip(&global_values)
                    .map(|(&c, &v)| (c, v, states[c].weight))
                    .collect(),
            });
        }

        if config.convergence_window > 0 {
            history.push(objective);
            let w = config.convergence_window;
            if history.len() > w {
                let old = history[history.len() - 1 - w];
                if (old - objective).abs() <= config.convergence_tol * (1.0 + objective.abs()) {
                    let a = driver.decode(&params)?;
                    let status = if driver.verify(&a) {
                        SolveStatus::Solved
                    } else {
                        SolveStatus::Unsolved
                    };
                    return Ok(finish(status, a, it + 1, objective, params, trace));
                }
            }
        }
    }

    let a = driver.decode(&params)?;
    let status = if driver.verify(&a) {
        SolveStatus::Solved
    } else {
        SolveStatus::BudgetExhausted
    };
    Ok(finish(status, a, config.max_iterations, objective, params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxations::TermKind;

    #[test]
    fn satisfied_weight_shrinks() {
        let mut s = PenaltyState::new(1.0, 0.01, (1e-3, 1e3));
        s.adjust(0.0, 0.05, 0.9);
        // 1 / 1.05
        assert!((s.weight - 0.952_380_952_380_952_4).abs() < 1e-12);
    }

    #[test]
    fn violated_weight_clamps_at_max() {
        let mut s = PenaltyState::new(1e3, 0.01, (1e-3, 1e3));
        s.adjust(2.0, 0.05, 0.9);
        assert_eq!(s.weight, 1e3);
        let mut s = PenaltyState::new(1e-3, 0.01, (1e-3, 1e3));
        s.adjust(0.0, 0.05, 0.9);
        assert_eq!(s.weight, 1e-3);
    }

    #[test]
    fn alternating_satisfaction_oscillates() {
        let mut s = PenaltyState::new(1.0, 0.01, (1e-3, 1e3));
        let mut ema_sum = 0.0;
        let n = 2000;
        for i in 0..n {
            s.adjust(if i % 2 == 0 { 0.0 } else { 1.0 }, 0.05, 0.9);
            assert!(s.weight >= 1e-3 && s.weight <= 1e3);
            assert!(s.weight > 0.9 && s.weight < 1.1);
            if i >= n - 100 {
                ema_sum += s.satisfaction;
            }
        }
        // the ema itself alternates around 0.5 (about 0.474 / 0.526)
        assert!((ema_sum / 100.0 - 0.5).abs() < 1e-3);
    }

    #[test]
    fn adjust_weights_checks_lengths() {
        let mut states = vec![PenaltyState::new(1.0, 0.0, (0.5, 2.0)); 2];
        assert!(adjust_weights(&mut states, &[0.0], 0.1, 0.9).is_err());
        adjust_weights(&mut states, &[0.0, 1.0], 0.1, 0.9).unwrap();
        assert!(states[0].weight < 1.0 && states[1].weight > 1.0);
    }

    #[test]
    fn assemble_with_weights() {
        let mut t = Tape::new();
        let r = t.leaf(TensorValue::vector(vec![1.0, 3.0]));
        let l = t.leaf(TensorValue::vector(vec![0.5, 0.5]));
        let g = t.leaf(TensorValue::vector(vec![2.0, 4.0, 1.0]));
        let terms = ObjectiveTerms {
            reconstruction: Some(r),
            local: Some(l),
            global: Some(g),
            global_violation: None,
        };
        let o = assemble_objective(&mut t, 2, &terms, 2.0, &[1.0, 0.5, 3.0], LocalReduction::Mean).unwrap();
        assert!((t.value(o).item() - (2.0 + 1.0 + 2.0 + 2.0 + 3.0)).abs() < 1e-12);
        let o = assemble_objective(&mut t, 2, &terms, 2.0, &[1.0, 0.5, 3.0], LocalReduction::Sum).unwrap();
        assert!((t.value(o).item() - (2.0 + 2.0 + 7.0)).abs() < 1e-12);
        assert!(matches!(
            assemble_objective(&mut t, 0, &terms, 1.0, &[1.0; 3], LocalReduction::Mean),
            Err(Error::EmptyBatch)
        ));
        assert!(assemble_objective(&mut t, 2, &terms, 1.0, &[1.0; 2], LocalReduction::Mean).is_err());
    }

    /// Minimal driver: one Bernoulli variable pushed towards `target` by a
    /// unit clause, used to exercise the loop without a real task.
    struct OneVar {
        constraints: Vec<GlobalConstraint>,
        satisfiable: bool,
    }

    impl Driver for OneVar {
        type Assignment = bool;
        fn vertex_count(&self) -> usize {
            1
        }
        fn constraints(&self) -> &[GlobalConstraint] {
            &self.constraints
        }
        fn init_params(&self, rng: &mut SolverRng) -> Vec<TensorValue> {
            use rand::Rng;
            vec![TensorValue::vector(vec![rng.random_range(-0.1..0.1)])]
        }
        fn build(&self, tape: &mut Tape, params: &[Var], batch: &Batch, _it: usize) -> Result<ObjectiveTerms> {
            let p = tape.sigmoid(params[0])?;
            let clauses: Vec<Vec<i32>> = if self.satisfiable {
                vec![vec![1]]
            } else {
                vec![vec![1], vec![-1]]
            };
            let chosen: Vec<Vec<i32>> = batch.constraints.iter().map(|&c| clauses[c].clone()).collect();
            let g = crate::relaxations::clause_penalties(tape, p, &chosen, 0.01)?;
            let l = crate::relaxations::bernoulli_entropy(tape, p)?;
            Ok(ObjectiveTerms {
                reconstruction: None,
                local: Some(l),
                global: Some(g),
                global_violation: None,
            })
        }
        fn decode(&self, params: &[TensorValue]) -> Result<bool> {
            Ok(params[0].item() > 0.0)
        }
        fn verify(&self, a: &bool) -> bool {
            self.satisfiable && *a
        }
    }

    fn one_var(satisfiable: bool) -> OneVar {
        let n = if satisfiable { 1 } else { 2 };
        OneVar {
            constraints: (0..n)
                .map(|i| GlobalConstraint::new(i, vec![0], TermKind::SatClause { slope: 0.01 }))
                .collect(),
            satisfiable,
        }
    }

    #[test]
    fn unit_clause_is_solved() {
        let cfg = SolveConfig {
            max_iterations: 200,
            ..SolveConfig::default()
        };
        let r = solve(&one_var(true), &cfg).unwrap();
        assert!(r.solved());
        assert!(r.assignment);
    }

    #[test]
    fn contradiction_is_never_solved() {
        let cfg = SolveConfig {
            max_iterations: 300,
            restart_limit: 2,
            trace: true,
            ..SolveConfig::default()
        };
        let r = solve_with_restarts(&one_var(false), &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::BudgetExhausted);
        assert_eq!(r.restarts, 2);
        assert_eq!(r.total_iterations, 900);
        for rec in &r.trace {
            assert!(rec.objective.is_finite());
            for &(_, _, w) in &rec.globals {
                assert!((1e-3..=1e3).contains(&w));
            }
        }
    }

    #[test]
    fn zero_restarts_equals_solve() {
        let cfg = SolveConfig {
            max_iterations: 50,
            seed: 9,
            ..SolveConfig::default()
        };
        let a = solve(&one_var(false), &cfg).unwrap();
        let b = solve_with_restarts(&one_var(false), &cfg).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.params, b.params);
        assert_eq!(b.restarts, 0);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SolveConfig {
            learning_rate: 0.0,
            ..SolveConfig::default()
        };
        assert!(solve(&one_var(true), &cfg).is_err());
    }
}
