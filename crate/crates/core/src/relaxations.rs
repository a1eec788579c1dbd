//! Entropy-based continuous relaxations of discrete constraints.
//!
//! Every function records its penalty on a [`Tape`] so it can be
//! differentiated. All penalties use the same sign convention: they are
//! minimized, and they are zero (or at their lower bound) exactly when the
//! discrete constraint holds at a hard assignment.
//!
//! | constraint     | penalty                                  |
//! |----------------|------------------------------------------|
//! | cardinality    | `H(P)`                                   |
//! | all-different  | `ln |S| - H(mean_{i in S} P_i)`          |
//! | k-sparsity     | `max(0, H(P) - c)`, `0 <= c < ln k`      |
//! | CNF clause     | `max(1 - s, slope * (s - 1))`            |
//! | literal        | `-p ln p - (1-p) ln(1-p)`                |

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Tape, TensorValue, Var};
use crate::math;
use crate::{Error, Result};

/// Default slope for the over-satisfied side of a clause penalty.
pub const CLAUSE_SLOPE: f64 = 0.01;

/// Softmax-parameterized distribution over `k` discrete values.
#[derive(Debug, Clone, Copy)]
pub struct Categorical {
    pub logits: Option<Var>,
    pub probs: Var,
}

impl Categorical {
    pub fn from_logits(tape: &mut Tape, logits: Var) -> Result<Self> {
        let probs = tape.softmax(logits)?;
        Ok(Self {
            logits: Some(logits),
            probs,
        })
    }

    /// Fixed distribution, e.g. a one-hot clue.
    pub fn constant(tape: &mut Tape, probs: Vec<f64>) -> Self {
        let probs = tape.leaf(TensorValue::vector(probs));
        Self { logits: None, probs }
    }

    pub fn support(&self, tape: &Tape) -> usize {
        tape.value(self.probs).len()
    }
}

/// Indices of the cells/data points a global constraint ranges over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedSet {
    members: Vec<usize>,
}

impl ConstrainedSet {
    pub fn new(members: Vec<usize>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::InvalidSet(format!("arity {} < 2", members.len())));
        }
        for (i, m) in members.iter().enumerate() {
            if members[..i].contains(m) {
                return Err(Error::InvalidSet(format!("duplicate member {m}")));
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn arity(&self) -> usize {
        self.members.len()
    }
}

/// Kind of a relaxation term together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TermKind {
    Cardinality,
    AllDifferent,
    Sparsity { threshold: f64 },
    SatClause { slope: f64 },
    /// Pairwise coupling between neighbouring data points supplied by a driver.
    CustomEdge,
}

impl TermKind {
    /// Smallest value the penalty can take.
    pub fn lower_bound(&self) -> f64 {
        match self {
            TermKind::SatClause { .. } => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }
}

/// A penalty term bound to the data points it constrains and to the
/// penalty-weight state that scales it.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationTerm {
    pub kind: TermKind,
    pub members: Vec<usize>,
    pub penalty_id: usize,
}

/// Shannon entropy `-sum p ln p` of a probability vector, as a scalar.
pub fn entropy(tape: &mut Tape, probs: Var) -> Result<Var> {
    let lp = tape.log(probs)?;
    let plp = tape.mul(probs, lp)?;
    let s = tape.sum(plp)?;
    tape.scale(s, -1.0)
}

/// Entropy of every row of a `[n, k]` probability matrix, as a `[n]` vector.
pub fn row_entropies(tape: &mut Tape, probs: Var) -> Result<Var> {
    let lp = tape.log(probs)?;
    let plp = tape.mul(probs, lp)?;
    let s = tape.row_sum(plp)?;
    tape.scale(s, -1.0)
}

/// Exactly-one relaxation: minimizing the entropy collapses `P` to one value.
pub fn cardinality_penalty(tape: &mut Tape, p: &Categorical) -> Result<Var> {
    entropy(tape, p.probs)
}

/// `ln |S| - H(P_bar)` where `P_bar` is the mean of the member distributions.
///
/// Zero iff the averaged distribution is uniform. Together with zero
/// cardinality penalties this holds iff the members form a permutation.
pub fn all_different_penalty(tape: &mut Tape, members: &[Categorical]) -> Result<Var> {
    let arity = members.len();
    if arity < 2 {
        return Err(Error::InvalidSet(format!("arity {arity} < 2")));
    }
    for m in members {
        let k = m.support(tape);
        if k != arity {
            return Err(Error::SupportMismatch {
                expected: arity,
                got: k,
            });
        }
    }
    let probs: Vec<Var> = members.iter().map(|m| m.probs).collect();
    let stacked = tape.concat_rows(&probs)?;
    let stacked = tape.reshape(stacked, &[arity, arity])?;
    let total = tape.segment_sum(stacked, &[arity])?;
    let total = tape.reshape(total, &[arity])?;
    let mean = tape.scale(total, 1.0 / arity as f64)?;
    let h = entropy(tape, mean)?;
    tape.affine(h, -1.0, math::ln(arity as f64))
}

/// Batched all-different penalties over rows of a `[n, k]` probability
/// matrix. Every set must have arity `k`. Returns a `[sets.len()]` vector.
pub fn all_different_penalties(
    tape: &mut Tape,
    probs: Var,
    sets: &[ConstrainedSet],
) -> Result<Var> {
    let k = tape.value(probs).cols();
    let mut idx = Vec::new();
    let mut lengths = Vec::with_capacity(sets.len());
    for s in sets {
        if s.arity() != k {
            return Err(Error::SupportMismatch {
                expected: s.arity(),
                got: k,
            });
        }
        idx.extend_from_slice(s.members());
        lengths.push(s.arity());
    }
    let rows = tape.gather_rows(probs, &idx)?;
    let totals = tape.segment_sum(rows, &lengths)?;
    let means = tape.scale(totals, 1.0 / k as f64)?;
    let h = row_entropies(tape, means)?;
    tape.affine(h, -1.0, math::ln(k as f64))
}

/// Entropy threshold for a k-sparsity constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityThreshold {
    pub cap: usize,
    pub c: f64,
}

impl SparsityThreshold {
    /// `c` must satisfy `0 <= c < ln cap`; the cap is the maximum number of
    /// active components, not the support size.
    pub fn new(cap: usize, c: f64) -> Result<Self> {
        if cap < 2 {
            return Err(Error::InvalidArgument(format!(
                "sparsity cap {cap} admits no threshold below ln k"
            )));
        }
        let bound = math::ln(cap as f64);
        if !(0.0..bound).contains(&c) {
            return Err(Error::InvalidArgument(format!(
                "threshold {c} outside [0, ln {cap} = {bound})"
            )));
        }
        Ok(Self { cap, c })
    }

    /// `c = 0.75 ln k`.
    pub fn default_for(cap: usize) -> Result<Self> {
        Self::new(cap, 0.75 * math::ln(cap as f64))
    }
}

/// Hinge `max(0, H(P) - c)` on a probability vector.
pub fn sparsity_penalty(tape: &mut Tape, probs: Var, threshold: SparsityThreshold) -> Result<Var> {
    let h = entropy(tape, probs)?;
    let excess = tape.affine(h, 1.0, -threshold.c)?;
    tape.relu(excess)
}

/// Row-wise sparsity hinges of a `[n, M]` probability matrix.
pub fn sparsity_penalties(
    tape: &mut Tape,
    probs: Var,
    threshold: SparsityThreshold,
) -> Result<Var> {
    let h = row_entropies(tape, probs)?;
    let excess = tape.affine(h, 1.0, -threshold.c)?;
    tape.relu(excess)
}

fn clause_hinge(tape: &mut Tape, sums: Var, slope: f64) -> Result<Var> {
    // max(1 - s, a(s - 1)) = a(s - 1) + max(0, (1 + a)(1 - s))
    let over = tape.affine(sums, slope, -slope)?;
    let under = tape.affine(sums, -(1.0 + slope), 1.0 + slope)?;
    let under = tape.relu(under)?;
    tape.add(over, under)
}

/// Clause penalty from the literal contributions of one clause (`p` for a
/// positive literal, `1 - p` for a negated one).
pub fn sat_clause_penalty(tape: &mut Tape, contributions: Var, slope: f64) -> Result<Var> {
    if tape.value(contributions).is_empty() {
        return Err(Error::EmptyClause);
    }
    let s = tape.sum(contributions)?;
    clause_hinge(tape, s, slope)
}

/// Batched clause penalties. `probs` is the `[n]` vector of literal
/// probabilities and each clause lists signed 1-based variable indices.
/// Returns the `[clauses.len()]` penalty vector.
pub fn clause_penalties(
    tape: &mut Tape,
    probs: Var,
    clauses: &[Vec<i32>],
    slope: f64,
) -> Result<Var> {
    let n = tape.value(probs).len();
    let mut idx = Vec::new();
    let mut sign = Vec::new();
    let mut offset = Vec::new();
    let mut lengths = Vec::with_capacity(clauses.len());
    for c in clauses {
        if c.is_empty() {
            return Err(Error::EmptyClause);
        }
        for &lit in c {
            let v = lit.unsigned_abs() as usize;
            if v == 0 || v > n {
                return Err(Error::IndexOutOfRange { index: v, len: n });
            }
            idx.push(v - 1);
            if lit > 0 {
                sign.push(1.0);
                offset.push(0.0);
            } else {
                sign.push(-1.0);
                offset.push(1.0);
            }
        }
        lengths.push(c.len());
    }
    let gathered = tape.gather_rows(probs, &idx)?;
    let sign = tape.leaf(TensorValue::vector(sign));
    let offset = tape.leaf(TensorValue::vector(offset));
    let signed = tape.mul(gathered, sign)?;
    let contrib = tape.add(signed, offset)?;
    let sums = tape.segment_sum(contrib, &lengths)?;
    clause_hinge(tape, sums, slope)
}

/// Elementwise Bernoulli entropy `-p ln p - (1-p) ln(1-p)`.
pub fn bernoulli_entropy(tape: &mut Tape, p: Var) -> Result<Var> {
    let q = tape.affine(p, -1.0, 1.0)?;
    let lp = tape.log(p)?;
    let lq = tape.log(q)?;
    let a = tape.mul(p, lp)?;
    let b = tape.mul(q, lq)?;
    let s = tape.add(a, b)?;
    tape.scale(s, -1.0)
}

/// Plain evaluation of `-sum p ln p` with the same log floor as the tape.
pub fn entropy_value(p: &[f64]) -> f64 {
    -p.iter()
        .map(|&x| x * math::ln(x.max(crate::autodiff::LOG_EPS)))
        .sum::<f64>()
}

/// Plain evaluation of the clause penalty for a given contribution sum.
pub fn clause_penalty_value(sum: f64, slope: f64) -> f64 {
    (1.0 - sum).max(slope * (sum - 1.0))
}

/// One-hot vector of length `k`.
pub fn one_hot(k: usize, hot: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[hot] = 1.0;
    v
}
