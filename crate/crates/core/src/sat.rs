//! Random 3-SAT: CNF formulas, DIMACS IO, a DPLL oracle and the relaxed driver.
//!
//! Each variable is a Bernoulli with a sigmoid logit. Literal entropies are
//! the local terms and each clause is one global constraint whose penalty
//! pushes the sum of its literal probabilities to one.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;

use crate::autodiff::{Tape, TensorValue, Var};
use crate::encoder::{Encoder, EncoderMode, LatentLayout};
use crate::graph::{Batch, GlobalConstraint};
use crate::math;
use crate::optimizer::{Driver, LocalReduction, LocalWeightRule, ObjectiveTerms, SolveConfig, UpdateRule};
use crate::relaxations::{bernoulli_entropy, clause_penalties, TermKind, CLAUSE_SLOPE};
use crate::rng::SolverRng;
use crate::{Error, Result};

/// Clause-to-variable ratio of the hardest random 3-SAT instances.
pub const HARD_RATIO: f64 = 4.3;

/// A normalized CNF formula: no empty clause, no tautology, no repeated literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    vars: usize,
    clauses: Vec<Vec<i32>>,
    /// Input positions of clauses dropped as tautologies.
    dropped: Vec<usize>,
}

impl CnfFormula {
    /// Normalizes `clauses` (signed 1-based literals).
    pub fn new(vars: usize, clauses: Vec<Vec<i32>>) -> Result<Self> {
        let mut out = Vec::with_capacity(clauses.len());
        let mut dropped = Vec::new();
        for (i, clause) in clauses.into_iter().enumerate() {
            if clause.is_empty() {
                return Err(Error::EmptyClause);
            }
            let mut seen = BTreeSet::new();
            let mut lits = Vec::with_capacity(clause.len());
            for lit in clause {
                let v = lit.unsigned_abs() as usize;
                if lit == 0 || v > vars {
                    return Err(Error::IndexOutOfRange { index: v, len: vars });
                }
                if seen.insert(lit) {
                    lits.push(lit);
                }
            }
            if lits.iter().any(|&l| seen.contains(&-l)) {
                dropped.push(i);
            } else {
                out.push(lits);
            }
        }
        Ok(Self {
            vars,
            clauses: out,
            dropped,
        })
    }

    pub fn var_count(&self) -> usize {
        self.vars
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// Input positions of clauses removed as tautologies during normalization.
    pub fn dropped_tautologies(&self) -> &[usize] {
        &self.dropped
    }

    /// Whether every clause has a true literal.
    pub fn verify(&self, assignment: &[bool]) -> bool {
        assignment.len() == self.vars && self.clauses.iter().all(|c| c.iter().any(|&l| literal_true(l, assignment)))
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "p cnf {} {}", self.vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(s, "{l} ");
            }
            s.push_str("0\n");
        }
        s
    }
}

fn literal_true(lit: i32, assignment: &[bool]) -> bool {
    let v = assignment[lit.unsigned_abs() as usize - 1];
    if lit > 0 {
        v
    } else {
        !v
    }
}

/// Parses DIMACS CNF. Comment lines start with `c`; clauses may span lines
/// and end with `0`; a trailing `%` line is ignored.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') {
            continue;
        }
        if t.starts_with('%') {
            break;
        }
        if t.starts_with('p') {
            if header.is_some() {
                return Err(Error::Dimacs {
                    line: line_no,
                    msg: "duplicate header".into(),
                });
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            let bad = || Error::Dimacs {
                line: line_no,
                msg: "expected `p cnf <vars> <clauses>`".into(),
            };
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(bad());
            }
            let n = parts[2].parse().map_err(|_| bad())?;
            let m = parts[3].parse().map_err(|_| bad())?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| Error::Dimacs {
            line: line_no,
            msg: "clause before header".into(),
        })?;
        for tok in t.split_whitespace() {
            let lit: i32 = tok.parse().map_err(|_| Error::Dimacs {
                line: line_no,
                msg: alloc::format!("bad literal `{tok}`"),
            })?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(Error::EmptyClause);
                }
                clauses.push(core::mem::take(&mut current));
            } else {
                if lit.unsigned_abs() as usize > n {
                    return Err(Error::Dimacs {
                        line: line_no,
                        msg: alloc::format!("literal {lit} out of range 1..={n}"),
                    });
                }
                current.push(lit);
            }
        }
    }
    let (n, _) = header.ok_or(Error::Dimacs {
        line: 0,
        msg: "missing header".into(),
    })?;
    if !current.is_empty() {
        clauses.push(current);
    }
    CnfFormula::new(n, clauses)
}

/// Uniform random 3-SAT with `round(ratio * n)` clauses, resampled until
/// the DPLL oracle finds a model.
pub fn generate_random_3sat<R: Rng + ?Sized>(n: usize, ratio: f64, rng: &mut R) -> Result<CnfFormula> {
    if n < 3 {
        return Err(Error::InvalidArgument(alloc::format!("3-SAT needs n >= 3, got {n}")));
    }
    let m = math::round(ratio * n as f64) as usize;
    loop {
        let clauses = (0..m)
            .map(|_| {
                let vars = rand::seq::index::sample(rng, n, 3);
                vars.iter()
                    .map(|v| {
                        let lit = v as i32 + 1;
                        if rng.random_bool(0.5) {
                            lit
                        } else {
                            -lit
                        }
                    })
                    .collect()
            })
            .collect();
        let f = CnfFormula::new(n, clauses)?;
        if dpll_solve(&f).is_some() {
            return Ok(f);
        }
    }
}

/// Complete DPLL search with unit propagation. Returns a model or `None`.
pub fn dpll_solve(formula: &CnfFormula) -> Option<Vec<bool>> {
    let mut values: Vec<Option<bool>> = vec![None; formula.vars];
    if dpll(formula, &mut values) {
        Some(values.into_iter().map(|v| v.unwrap_or(false)).collect())
    } else {
        None
    }
}

fn dpll(f: &CnfFormula, values: &mut Vec<Option<bool>>) -> bool {
    let mut trail = Vec::new();
    // unit propagation to a fixed point
    loop {
        let mut unit = None;
        for c in &f.clauses {
            let mut free = None;
            let mut free_count = 0;
            let mut sat = false;
            for &l in c {
                match values[l.unsigned_abs() as usize - 1] {
                    Some(v) if v == (l > 0) => {
                        sat = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        free_count += 1;
                        free = Some(l);
                    }
                }
            }
            if sat {
                continue;
            }
            match free_count {
                0 => {
                    undo(values, &trail);
                    return false;
                }
                1 => {
                    unit = free;
                    break;
                }
                _ => {}
            }
        }
        match unit {
            Some(l) => {
                let v = l.unsigned_abs() as usize - 1;
                values[v] = Some(l > 0);
                trail.push(v);
            }
            None => break,
        }
    }
    // branch on the unassigned variable occurring most in open clauses
    let mut counts = vec![0usize; f.vars];
    for c in &f.clauses {
        if c.iter().any(|&l| values[l.unsigned_abs() as usize - 1] == Some(l > 0)) {
            continue;
        }
        for &l in c {
            let v = l.unsigned_abs() as usize - 1;
            if values[v].is_none() {
                counts[v] += 1;
            }
        }
    }
    let pick = (0..f.vars).filter(|&v| values[v].is_none()).max_by_key(|&v| (counts[v], core::cmp::Reverse(v)));
    let Some(v) = pick else {
        return true;
    };
    if counts[v] == 0 {
        // every clause is satisfied
        return true;
    }
    for choice in [true, false] {
        values[v] = Some(choice);
        if dpll(f, values) {
            return true;
        }
    }
    values[v] = None;
    undo(values, &trail);
    false
}

fn undo(values: &mut [Option<bool>], trail: &[usize]) {
    for &v in trail {
        values[v] = None;
    }
}

/// `p > 0.5` decodes to true; ties decode to false.
pub fn decode_probs(probs: &[f64]) -> Vec<bool> {
    probs.iter().map(|&p| p > 0.5).collect()
}

/// How clause satisfaction is judged when adjusting clause weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClauseSatisfaction {
    /// The relaxed penalty has reached its hinge (sum of literal probabilities ≥ 1).
    #[default]
    Relaxed,
    /// The clause holds under the current rounded assignment.
    Rounded,
}

/// Default settings for random 3-SAT: entropy weight 0.2 raised by 2% every
/// 50 iterations and summed over variables; clause weights never drop below
/// their initial value; logits stay within ±4 so sigmoids do not saturate.
pub fn default_config() -> SolveConfig {
    SolveConfig {
        learning_rate: 1.0,
        update: UpdateRule::adam(),
        max_iterations: 5000,
        decode_interval: 20,
        eta: 0.1,
        weight_bounds: (1.0, 1e3),
        param_bound: Some(4.0),
        local_weight_init: 0.2,
        local_weight_rule: LocalWeightRule::Annealed { factor: 1.02, every: 50 },
        local_reduction: LocalReduction::Sum,
        ..SolveConfig::default()
    }
}

/// Relaxed driver for one CNF formula.
#[derive(Debug, Clone)]
pub struct SatDriver {
    formula: CnfFormula,
    encoder: Encoder,
    constraints: Vec<GlobalConstraint>,
    pub slope: f64,
    pub satisfaction: ClauseSatisfaction,
}

impl SatDriver {
    pub fn new(formula: CnfFormula, mode: EncoderMode) -> Result<Self> {
        let layout = LatentLayout::new(&[("value", 1)]);
        let encoder = Encoder::with_mode(mode, formula.vars, layout, || occurrence_features(&formula))?;
        let constraints = formula
            .clauses
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut members: Vec<usize> = c.iter().map(|l| l.unsigned_abs() as usize - 1).collect();
                members.sort_unstable();
                GlobalConstraint::new(j, members, TermKind::SatClause { slope: CLAUSE_SLOPE })
            })
            .collect();
        Ok(Self {
            formula,
            encoder,
            constraints,
            slope: CLAUSE_SLOPE,
            satisfaction: ClauseSatisfaction::default(),
        })
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }

    /// `[n]` truth probabilities on the tape.
    pub fn probabilities(&self, tape: &mut Tape, params: &[Var]) -> Result<Var> {
        let all: Vec<usize> = (0..self.formula.vars).collect();
        let out = self.encoder.encode(tape, params, &all)?;
        let flat = tape.reshape(out, &[self.formula.vars])?;
        tape.sigmoid(flat)
    }

    /// Truth probabilities outside of optimization.
    pub fn probability_values(&self, params: &[TensorValue]) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..self.formula.vars).collect();
        let out = self.encoder.evaluate(params, &all)?;
        Ok(out.data().iter().map(|&x| math::sigmoid(x)).collect())
    }
}

/// Per-variable counts of positive and negative occurrences.
fn occurrence_features(f: &CnfFormula) -> TensorValue {
    let mut data = vec![0.0; f.vars * 2];
    for c in &f.clauses {
        for &l in c {
            let v = l.unsigned_abs() as usize - 1;
            data[v * 2 + usize::from(l < 0)] += 1.0;
        }
    }
    TensorValue::matrix(f.vars, 2, data).expect("feature shape")
}

impl Driver for SatDriver {
    type Assignment = Vec<bool>;

    fn vertex_count(&self) -> usize {
        self.formula.vars
    }

    fn constraints(&self) -> &[GlobalConstraint] {
        &self.constraints
    }

    fn init_params(&self, rng: &mut SolverRng) -> Vec<TensorValue> {
        self.encoder.init(rng)
    }

    fn build(&self, tape: &mut Tape, params: &[Var], batch: &Batch, _iteration: usize) -> Result<ObjectiveTerms> {
        let probs = self.probabilities(tape, params)?;
        let batch_probs = tape.gather_rows(probs, &batch.vertices)?;
        let local = bernoulli_entropy(tape, batch_probs)?;
        let clauses: Vec<Vec<i32>> = batch.constraints.iter().map(|&j| self.formula.clauses[j].clone()).collect();
        let global = if clauses.is_empty() {
            tape.leaf(TensorValue::vector(Vec::new()))
        } else {
            clause_penalties(tape, probs, &clauses, self.slope)?
        };
        let global_violation = match self.satisfaction {
            ClauseSatisfaction::Relaxed => None,
            ClauseSatisfaction::Rounded => {
                let assignment = decode_probs(tape.value(probs).data());
                Some(
                    clauses
                        .iter()
                        .map(|c| if c.iter().any(|&l| literal_true(l, &assignment)) { 0.0 } else { 1.0 })
                        .collect(),
                )
            }
        };
        Ok(ObjectiveTerms {
            reconstruction: None,
            local: Some(local),
            global: Some(global),
            global_violation,
        })
    }

    fn decode(&self, params: &[TensorValue]) -> Result<Vec<bool>> {
        Ok(decode_probs(&self.probability_values(params)?))
    }

    fn verify(&self, assignment: &Vec<bool>) -> bool {
        self.formula.verify(assignment)
    }

    fn global_threshold(&self, c: &GlobalConstraint, config: &SolveConfig) -> f64 {
        match self.satisfaction {
            ClauseSatisfaction::Rounded => config.entropy_threshold,
            // the penalty is at most slope * (K - 1) once the hinge is reached
            ClauseSatisfaction::Relaxed => self.slope * (c.members.len() as f64 - 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ConstraintGraph;
    use crate::optimizer::{assemble_objective, solve, solve_with_restarts, SolveStatus};
    use crate::relaxations::clause_penalty_value;
    use crate::rng::rng_from_seed;

    fn brute_force(f: &CnfFormula) -> Option<Vec<bool>> {
        (0u32..1 << f.var_count()).find_map(|mask| {
            let a: Vec<bool> = (0..f.var_count()).map(|i| mask >> i & 1 == 1).collect();
            f.verify(&a).then_some(a)
        })
    }

    fn random_formula(rng: &mut SolverRng, n: usize, m: usize) -> CnfFormula {
        let clauses = (0..m)
            .map(|_| {
                let k = rng.random_range(1..=3usize.min(n));
                rand::seq::index::sample(rng, n, k)
                    .iter()
                    .map(|v| if rng.random_bool(0.5) { v as i32 + 1 } else { -(v as i32 + 1) })
                    .collect()
            })
            .collect();
        CnfFormula::new(n, clauses).unwrap()
    }

    #[test]
    fn parse_minimal() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        assert_eq!(f.var_count(), 1);
        assert_eq!(f.clause_count(), 1);
    }

    #[test]
    fn tautology_dropped() {
        let f = parse_dimacs("c comment\np cnf 2 2\n1 -1 0\n2 2 -1 0\n").unwrap();
        assert_eq!(f.clause_count(), 1);
        assert_eq!(f.dropped_tautologies(), &[0]);
        assert_eq!(f.clauses()[0], vec![2, -1]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_dimacs("p cnf 2 1\n0\n"), Err(Error::EmptyClause)));
        assert!(matches!(parse_dimacs("p cnf 2 1\n3 0\n"), Err(Error::Dimacs { line: 2, .. })));
        assert!(matches!(parse_dimacs("p dnf 2 1\n1 0\n"), Err(Error::Dimacs { line: 1, .. })));
        assert!(matches!(parse_dimacs("1 0\n"), Err(Error::Dimacs { .. })));
        assert!(matches!(parse_dimacs("p cnf 2 1\n1 x 0\n"), Err(Error::Dimacs { .. })));
    }

    #[test]
    fn dimacs_round_trip() {
        let f = generate_random_3sat(10, HARD_RATIO, &mut rng_from_seed(1)).unwrap();
        assert_eq!(parse_dimacs(&f.to_dimacs()).unwrap(), f);
    }

    #[test]
    fn clause_counts_at_hard_ratio() {
        let mut rng = rng_from_seed(2);
        for (n, m) in [(30, 129), (50, 215), (100, 430)] {
            let f = generate_random_3sat(n, HARD_RATIO, &mut rng).unwrap();
            assert_eq!(f.clause_count(), m);
            assert!(f.clauses().iter().all(|c| c.len() == 3));
            assert!(f.verify(&dpll_solve(&f).unwrap()));
        }
    }

    #[test]
    fn generator_marginals() {
        let mut rng = rng_from_seed(3);
        let n = 30;
        let mut occ = vec![0usize; n];
        let (mut pos, mut total) = (0usize, 0usize);
        let mut clauses = 0;
        while clauses < 10_000 {
            let f = generate_random_3sat(n, HARD_RATIO, &mut rng).unwrap();
            for c in f.clauses() {
                for &l in c {
                    occ[l.unsigned_abs() as usize - 1] += 1;
                    pos += usize::from(l > 0);
                    total += 1;
                }
            }
            clauses += f.clause_count();
        }
        let expect = 3.0 * clauses as f64 / n as f64;
        for &o in &occ {
            assert!((o as f64 - expect).abs() <= 0.1 * expect, "{o} vs {expect}");
        }
        let frac = pos as f64 / total as f64;
        assert!((frac - 0.5).abs() <= 0.05, "{frac}");
    }

    #[test]
    fn contradiction_is_unsat() {
        let f = CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap();
        assert!(dpll_solve(&f).is_none());
    }

    #[test]
    fn dpll_and_verify_agree_with_enumeration() {
        let mut rng = rng_from_seed(4);
        for i in 0..200 {
            let n = 3 + i % 10;
            let m = rng.random_range(1..=6 * n);
            let f = random_formula(&mut rng, n, m);
            let brute = brute_force(&f);
            let dp = dpll_solve(&f);
            assert_eq!(brute.is_some(), dp.is_some(), "formula {i}");
            if let Some(a) = dp {
                assert!(f.verify(&a));
            }
            // verify against a clause-by-clause check of a random assignment
            let a: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let manual = f
                .clauses()
                .iter()
                .all(|c| c.iter().any(|&l| if l > 0 { a[l as usize - 1] } else { !a[(-l) as usize - 1] }));
            assert_eq!(f.verify(&a), manual);
        }
    }

    #[test]
    fn decode_ties_false() {
        assert_eq!(decode_probs(&[0.5, 0.51, 0.49]), vec![false, true, false]);
        let f = CnfFormula::new(3, vec![vec![1, 2], vec![2, 3], vec![1, 3]]).unwrap();
        assert!(f.verify(&decode_probs(&[0.99; 3])));
    }

    #[test]
    fn zero_penalty_at_hard_assignments_iff_satisfied() {
        let mut rng = rng_from_seed(5);
        for _ in 0..100 {
            let n = 12;
            let f = random_formula(&mut rng, n, 40);
            let a: Vec<bool> = match dpll_solve(&f) {
                Some(m) if rng.random_bool(0.5) => m,
                _ => (0..n).map(|_| rng.random_bool(0.5)).collect(),
            };
            let hinge: f64 = f
                .clauses()
                .iter()
                .map(|c| {
                    let s: f64 = c.iter().map(|&l| if literal_true(l, &a) { 1.0 } else { 0.0 }).sum();
                    clause_penalty_value(s, CLAUSE_SLOPE).max(0.0)
                })
                .sum();
            assert_eq!(hinge == 0.0, f.verify(&a));
        }
    }

    fn objective(f: CnfFormula, probs: &[f64]) -> f64 {
        let d = SatDriver::new(f, EncoderMode::FreeLogits).unwrap();
        let g = ConstraintGraph::build(d.vertex_count(), d.constraints()).unwrap();
        let logits: Vec<f64> = probs.iter().map(|&p| math::ln(p / (1.0 - p))).collect();
        let mut tape = Tape::new();
        let x = tape.leaf(TensorValue::matrix(probs.len(), 1, logits).unwrap());
        let batch = g.full_batch();
        let t = d.build(&mut tape, &[x], &batch, 0).unwrap();
        let w = vec![1.0; batch.constraints.len()];
        let o = assemble_objective(&mut tape, batch.vertices.len(), &t, 0.2, &w, LocalReduction::Sum).unwrap();
        tape.value(o).item()
    }

    #[test]
    fn unit_clause_optimum() {
        let f = CnfFormula::new(1, vec![vec![1]]).unwrap();
        assert!(objective(f.clone(), &[1.0 - 1e-12]).abs() < 1e-9);
        assert!(objective(f, &[0.6]) > 0.0);
        let d = SatDriver::new(CnfFormula::new(1, vec![vec![1]]).unwrap(), EncoderMode::FreeLogits).unwrap();
        let r = solve(&d, &default_config()).unwrap();
        assert!(r.solved());
        assert_eq!(r.assignment, vec![true]);
    }

    #[test]
    fn two_clause_optimum_sets_y() {
        // {x ∨ y}, {¬x ∨ y}: the best hard assignments all have y = true
        let f = CnfFormula::new(2, vec![vec![1, 2], vec![-1, 2]]).unwrap();
        let best = [[0.0, 1.0], [1.0, 1.0], [0.0, 0.0], [1.0, 0.0]]
            .iter()
            .map(|p| {
                let p: Vec<f64> = p.iter().map(|&x: &f64| x.clamp(1e-12, 1.0 - 1e-12)).collect();
                (objective(f.clone(), &p), p[1] > 0.5)
            })
            .fold((f64::INFINITY, false), |a, b| if b.0 < a.0 { b } else { a });
        assert!(best.1);
        let d = SatDriver::new(f, EncoderMode::FreeLogits).unwrap();
        let r = solve(&d, &default_config()).unwrap();
        assert!(r.solved() && r.assignment[1]);
    }

    #[test]
    fn random_instance_forms_one_component() {
        let f = generate_random_3sat(30, HARD_RATIO, &mut rng_from_seed(6)).unwrap();
        let d = SatDriver::new(f, EncoderMode::FreeLogits).unwrap();
        let g = ConstraintGraph::build(30, d.constraints()).unwrap();
        assert_eq!(g.components().len(), 1);
    }

    #[test]
    fn contradiction_exhausts_budget() {
        let f = CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap();
        let d = SatDriver::new(f, EncoderMode::FreeLogits).unwrap();
        let cfg = SolveConfig {
            max_iterations: 200,
            restart_limit: 2,
            ..default_config()
        };
        let r = solve_with_restarts(&d, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::BudgetExhausted);
    }

    #[test]
    fn solves_a_small_random_instance() {
        let f = generate_random_3sat(20, HARD_RATIO, &mut rng_from_seed(7)).unwrap();
        let d = SatDriver::new(f, EncoderMode::FreeLogits).unwrap();
        let cfg = SolveConfig {
            restart_limit: 10,
            ..default_config()
        };
        let r = solve_with_restarts(&d, &cfg).unwrap();
        assert!(r.solved());
        assert!(d.formula().verify(&r.assignment));
    }

    #[test]
    fn mlp_mode_runs() {
        let f = generate_random_3sat(10, HARD_RATIO, &mut rng_from_seed(8)).unwrap();
        let d = SatDriver::new(f, EncoderMode::Mlp { hidden: 8 }).unwrap();
        let cfg = SolveConfig {
            max_iterations: 200,
            learning_rate: 0.01,
            ..default_config()
        };
        let r = solve(&d, &cfg).unwrap();
        assert!(r.objective.is_finite() || r.iterations == 0);
        if r.solved() {
            assert!(d.verify(&r.assignment));
        }
    }
}
