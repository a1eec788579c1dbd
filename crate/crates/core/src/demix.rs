//! Sparse Gaussian-mixture de-mixing on a composition graph.
//!
//! Every observed signal is a nonnegative mix of at most `k` rendered basis
//! patterns. A basis pattern is a list of sticks (location, amplitude) drawn
//! as Gaussian peaks, with a per-point multiplicative shift, a peak width and
//! a scale. The driver recovers a phase distribution and those per-phase
//! parameters for every point.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Tape, TensorValue, Var};
use crate::encoder::{Encoder, EncoderMode, LatentLayout};
use crate::graph::{Batch, BatchMode, GlobalConstraint};
use crate::math;
use crate::optimizer::{Driver, LocalWeightRule, ObjectiveTerms, SolveConfig, UpdateRule};
use crate::relaxations::{sparsity_penalties, SparsityThreshold, TermKind};
use crate::rng::SolverRng;
use crate::{Error, Result};

/// Largest relative peak shift.
pub const SHIFT_MAX: f64 = 0.02;
/// A phase counts as present when its probability exceeds this.
pub const ACTIVATION_THRESHOLD: f64 = 0.05;

/// Peak locations in `(0, 1)`, strictly increasing; amplitudes scaled to max 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StickPattern {
    sticks: Vec<(f64, f64)>,
}

impl StickPattern {
    pub fn new(mut sticks: Vec<(f64, f64)>) -> Result<Self> {
        if sticks.is_empty() {
            return Err(Error::InvalidArgument("stick pattern needs at least one stick".into()));
        }
        sticks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max = sticks.iter().map(|s| s.1).fold(0.0, f64::max);
        for w in sticks.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::InvalidArgument("stick locations must be distinct".into()));
            }
        }
        if sticks.iter().any(|&(mu, a)| !(mu > 0.0 && mu < 1.0) || !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument(
                "stick locations must lie in (0, 1) with positive amplitudes".into(),
            ));
        }
        for s in sticks.iter_mut() {
            s.1 /= max;
        }
        Ok(Self { sticks })
    }

    pub fn sticks(&self) -> &[(f64, f64)] {
        &self.sticks
    }
}

/// Per-phase rendering parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    /// Relative shift: peaks move to `mu * (1 + shift)`.
    pub shift: f64,
    pub width: f64,
    pub scale: f64,
}

/// Bin centers `(b + 0.5) / d`.
pub fn bin_centers(d: usize) -> Vec<f64> {
    (0..d).map(|b| (b as f64 + 0.5) / d as f64).collect()
}

/// Smallest peak width for resolution `d`.
pub fn width_min(d: usize) -> f64 {
    0.5 / d as f64
}

/// `scale * sum_s a_s exp(-(x_b - mu_s (1 + shift))^2 / (2 width^2))`.
pub fn render(pattern: &StickPattern, z: PhaseParams, d: usize) -> Vec<f64> {
    let inv = 1.0 / (2.0 * z.width * z.width);
    bin_centers(d)
        .into_iter()
        .map(|x| {
            z.scale
                * pattern
                    .sticks
                    .iter()
                    .map(|&(mu, a)| {
                        let t = x - mu * (1.0 + z.shift);
                        a * math::exp(-t * t * inv)
                    })
                    .sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisLibrary {
    pub patterns: Vec<StickPattern>,
    /// Signal resolution (bins over `[0, 1)`).
    pub dim: usize,
}

impl BasisLibrary {
    pub fn new(patterns: Vec<StickPattern>, dim: usize) -> Result<Self> {
        if patterns.len() < 2 || dim == 0 {
            return Err(Error::InvalidArgument("library needs at least two patterns and dim > 0".into()));
        }
        for i in 0..patterns.len() {
            for j in i + 1..patterns.len() {
                if patterns[i] == patterns[j] {
                    return Err(Error::InvalidArgument(alloc::format!("patterns {i} and {j} are identical")));
                }
            }
        }
        Ok(Self { patterns, dim })
    }

    /// `m` random patterns of 3 to 6 sticks with locations in `(0.1, 0.9)`.
    pub fn generate<R: Rng + ?Sized>(m: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let patterns = (0..m)
            .map(|_| {
                let count = rng.random_range(3..=6);
                let sticks = (0..count)
                    .map(|_| (rng.random_range(0.1..0.9), rng.random_range(0.2..1.0)))
                    .collect();
                StickPattern::new(sticks)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(patterns, dim)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// One observed signal with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSignal {
    pub y: Vec<f64>,
    pub vertex: usize,
    /// `(phase, params)` of the active phases (evaluation only).
    pub truth: Vec<(usize, PhaseParams)>,
}

/// Composition graph layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionGraph {
    Chain(usize),
    /// Triangular lattice of `rows x cols` points.
    Triangular { rows: usize, cols: usize },
}

impl CompositionGraph {
    pub fn vertex_count(self) -> usize {
        match self {
            CompositionGraph::Chain(n) => n,
            CompositionGraph::Triangular { rows, cols } => rows * cols,
        }
    }

    /// Undirected edges `(u, v)` with `u < v`.
    pub fn edges(self) -> Vec<(usize, usize)> {
        match self {
            CompositionGraph::Chain(n) => (1..n).map(|v| (v - 1, v)).collect(),
            CompositionGraph::Triangular { rows, cols } => {
                let id = |r: usize, c: usize| r * cols + c;
                let mut e = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        if c + 1 < cols {
                            e.push((id(r, c), id(r, c + 1)));
                        }
                        if r + 1 < rows {
                            e.push((id(r, c), id(r + 1, c)));
                            if c + 1 < cols {
                                e.push((id(r, c), id(r + 1, c + 1)));
                            }
                        }
                    }
                }
                e
            }
        }
    }

    /// Position along which the active set varies; neighbors differ by at most one.
    fn stage(self, v: usize) -> usize {
        match self {
            CompositionGraph::Chain(_) => v,
            CompositionGraph::Triangular { cols, .. } => v % cols,
        }
    }

    fn stages(self) -> usize {
        match self {
            CompositionGraph::Chain(n) => n,
            CompositionGraph::Triangular { cols, .. } => cols,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemixDataset {
    pub signals: Vec<MixtureSignal>,
    pub edges: Vec<(usize, usize)>,
    pub k: usize,
    pub noise: f64,
}

/// Active sets vary by one phase per stage; weights, shifts and widths are
/// drawn per point; noise is `|N(0, noise)|` per bin.
pub fn synthesize_dataset<R: Rng + ?Sized>(
    library: &BasisLibrary,
    graph: CompositionGraph,
    k: usize,
    noise: f64,
    rng: &mut R,
) -> Result<DemixDataset> {
    if k == 0 || k > library.len() || !(noise >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "need 1 <= k <= {} and noise >= 0",
            library.len()
        )));
    }
    let m = library.len();
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(graph.stages());
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut current: Vec<usize> = order[..rng.random_range(1..=k)].to_vec();
    for s in 0..graph.stages() {
        if s > 0 && rng.random_bool(0.3) {
            let outside: Vec<usize> = (0..m).filter(|p| !current.contains(p)).collect();
            let add = current.len() < k && (current.len() == 1 || rng.random_bool(0.5));
            if add {
                current.push(outside[rng.random_range(0..outside.len())]);
            } else if current.len() > 1 && rng.random_bool(0.5) {
                current.remove(rng.random_range(0..current.len()));
            } else {
                let i = rng.random_range(0..current.len());
                current[i] = outside[rng.random_range(0..outside.len())];
            }
        }
        let mut sorted = current.clone();
        sorted.sort_unstable();
        sets.push(sorted);
    }

    let d = library.dim;
    let wmin = width_min(d);
    let normal = (noise > 0.0).then(|| Normal::new(0.0, noise).expect("noise std"));
    let signals = (0..graph.vertex_count())
        .map(|v| {
            let truth: Vec<(usize, PhaseParams)> = sets[graph.stage(v)]
                .iter()
                .map(|&p| {
                    let z = PhaseParams {
                        shift: rng.random_range(-0.5 * SHIFT_MAX..0.5 * SHIFT_MAX),
                        width: rng.random_range(1.5 * wmin..3.0 * wmin),
                        scale: rng.random_range(0.4..1.0),
                    };
                    (p, z)
                })
                .collect();
            let mut y = vec![0.0; d];
            for &(p, z) in &truth {
                for (yi, r) in y.iter_mut().zip(render(&library.patterns[p], z, d)) {
                    *yi += r;
                }
            }
            if let Some(n) = &normal {
                for yi in y.iter_mut() {
                    *yi += n.sample(rng).abs();
                }
            }
            MixtureSignal { y, vertex: v, truth }
        })
        .collect();
    Ok(DemixDataset {
        signals,
        edges: graph.edges(),
        k,
        noise,
    })
}

/// Decoded latents for every point.
#[derive(Debug, Clone, PartialEq)]
pub struct DemixEstimate {
    /// `[points][phases]` phase probabilities.
    pub probs: Vec<Vec<f64>>,
    pub params: Vec<Vec<PhaseParams>>,
}

impl DemixEstimate {
    /// Ground truth written as an estimate: `P_j` proportional to the true
    /// scales and a common scale equal to their sum.
    pub fn from_truth(dataset: &DemixDataset, m: usize) -> Self {
        let mut probs = Vec::new();
        let mut params = Vec::new();
        for s in &dataset.signals {
            let total: f64 = s.truth.iter().map(|t| t.1.scale).sum();
            let mut p = vec![0.0; m];
            let mut z = vec![
                PhaseParams {
                    shift: 0.0,
                    width: 1.0,
                    scale: 0.0
                };
                m
            ];
            for &(j, t) in &s.truth {
                p[j] = t.scale / total;
                z[j] = PhaseParams { scale: total, ..t };
            }
            probs.push(p);
            params.push(z);
        }
        Self { probs, params }
    }

    /// `sum_j P_j render(pattern_j, z_j)` for point `i`.
    pub fn reconstruct(&self, library: &BasisLibrary, i: usize) -> Vec<f64> {
        let mut y = vec![0.0; library.dim];
        for (j, (&p, &z)) in self.probs[i].iter().zip(&self.params[i]).enumerate() {
            if p == 0.0 || z.scale == 0.0 {
                continue;
            }
            for (yi, r) in y.iter_mut().zip(render(&library.patterns[j], z, library.dim)) {
                *yi += p * r;
            }
        }
        y
    }

    /// Phases with `P_j > ACTIVATION_THRESHOLD`.
    pub fn active(&self, i: usize) -> Vec<usize> {
        (0..self.probs[i].len())
            .filter(|&j| self.probs[i][j] > ACTIVATION_THRESHOLD)
            .collect()
    }

    /// `P_j * c_j` per point and phase.
    pub fn concentrations(&self) -> Vec<Vec<f64>> {
        self.probs
            .iter()
            .zip(&self.params)
            .map(|(p, z)| p.iter().zip(z).map(|(p, z)| p * z.scale).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemixMetrics {
    /// Mean absolute residual per bin, per point.
    pub l1: Vec<f64>,
    /// Root-mean-square residual per bin, per point.
    pub l2: Vec<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl DemixMetrics {
    pub fn mean_l1(&self) -> f64 {
        mean(&self.l1)
    }

    pub fn mean_l2(&self) -> f64 {
        mean(&self.l2)
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn residuals(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len().max(1) as f64;
    let l1 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    let l2 = math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n);
    (l1, l2)
}

/// Reconstruction residuals and activation-support precision, recall and F1.
pub fn evaluate(estimate: &DemixEstimate, dataset: &DemixDataset, library: &BasisLibrary) -> DemixMetrics {
    let (mut l1, mut l2) = (Vec::new(), Vec::new());
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (i, s) in dataset.signals.iter().enumerate() {
        let (a, b) = residuals(&estimate.reconstruct(library, i), &s.y);
        l1.push(a);
        l2.push(b);
        let predicted = estimate.active(i);
        let truth: Vec<usize> = s.truth.iter().map(|t| t.0).collect();
        let hit = predicted.iter().filter(|p| truth.contains(p)).count();
        tp += hit;
        fp += predicted.len() - hit;
        fn_ += truth.len() - hit;
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    let precision = ratio(tp, fp);
    let recall = ratio(tp, fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    DemixMetrics {
        l1,
        l2,
        precision,
        recall,
        f1,
    }
}

/// Mean L1 residual of the noiseless ground truth: the best achievable fit.
pub fn noise_floor(dataset: &DemixDataset, library: &BasisLibrary) -> f64 {
    let truth = DemixEstimate::from_truth(dataset, library.len());
    evaluate(&truth, dataset, library).mean_l1()
}

/// Latent rows of the two endpoints of each edge in a batch.
#[derive(Debug, Clone, Copy)]
pub struct EdgeLatents {
    /// `[edges, M]` phase probabilities at the first endpoint.
    pub probs_u: Var,
    pub probs_v: Var,
    /// `[edges, 4M]` raw encoder output at each endpoint.
    pub raw_u: Var,
    pub raw_v: Var,
}

/// Edge penalty: any differentiable function of two neighboring latents,
/// returning one value per edge.
pub type EdgePenalty = fn(&mut Tape, &EdgeLatents) -> Result<Var>;

/// Default edge penalty: L1 distance between neighboring phase distributions.
pub fn l1_edge_penalty(tape: &mut Tape, e: &EdgeLatents) -> Result<Var> {
    let d = tape.sub(e.probs_u, e.probs_v)?;
    let a = tape.abs(d)?;
    tape.row_sum(a)
}

pub fn default_config() -> SolveConfig {
    SolveConfig {
        learning_rate: 0.15,
        lr_decay: 0.999,
        update: UpdateRule::adam(),
        max_iterations: 2000,
        batch_budget: 10,
        batch_mode: BatchMode::Subpath,
        local_weight_init: 0.03,
        local_weight_rule: LocalWeightRule::Fixed,
        ..SolveConfig::default()
    }
}

/// Relaxed de-mixing of a whole dataset.
#[derive(Debug, Clone)]
pub struct DemixDriver {
    dataset: DemixDataset,
    library: BasisLibrary,
    encoder: Encoder,
    threshold: SparsityThreshold,
    constraints: Vec<GlobalConstraint>,
    pub edge_penalty: EdgePenalty,
    /// Fixed weight of every edge term.
    pub edge_weight: f64,
    /// Largest mean absolute residual per bin accepted by `verify`.
    pub residual_tol: f64,
    bins: Vec<f64>,
}

impl DemixDriver {
    pub fn new(
        dataset: DemixDataset,
        library: BasisLibrary,
        threshold: SparsityThreshold,
        mode: EncoderMode,
        residual_tol: f64,
    ) -> Result<Self> {
        if threshold.cap != dataset.k {
            return Err(Error::InvalidArgument(alloc::format!(
                "sparsity cap {} does not match k = {}",
                threshold.cap,
                dataset.k
            )));
        }
        if dataset.signals.iter().any(|s| s.y.len() != library.dim) {
            return Err(Error::InvalidArgument("signal length differs from library dim".into()));
        }
        let m = library.len();
        let layout = LatentLayout::new(&[("probs", m), ("shift", m), ("width", m), ("scale", m)]);
        let n = dataset.signals.len();
        let encoder = Encoder::with_mode(mode, n, layout, || {
            let data: Vec<f64> = dataset.signals.iter().flat_map(|s| s.y.iter().copied()).collect();
            TensorValue::matrix(n, library.dim, data).expect("signal shape")
        })?;
        let constraints = dataset
            .edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| GlobalConstraint::new(i, vec![u, v], TermKind::CustomEdge))
            .collect();
        Ok(Self {
            bins: bin_centers(library.dim),
            dataset,
            library,
            encoder,
            threshold,
            constraints,
            edge_penalty: l1_edge_penalty,
            edge_weight: 0.005,
            residual_tol,
        })
    }

    pub fn dataset(&self) -> &DemixDataset {
        &self.dataset
    }

    pub fn library(&self) -> &BasisLibrary {
        &self.library
    }

    /// Phase probabilities and bounded parameters from raw latent rows.
    fn latents(&self, tape: &mut Tape, raw: Var) -> Result<(Var, Var, Var, Var)> {
        let layout = self.encoder.layout();
        let logits = layout.slot(tape, raw, "probs")?;
        let probs = tape.softmax(logits)?;
        let s = layout.slot(tape, raw, "shift")?;
        let s = tape.sigmoid(s)?;
        let shift = tape.affine(s, 2.0 * SHIFT_MAX, -SHIFT_MAX)?;
        let w = layout.slot(tape, raw, "width")?;
        let w = tape.softplus(w)?;
        let wmin = width_min(self.library.dim);
        let width = tape.affine(w, wmin, wmin)?;
        let c = layout.slot(tape, raw, "scale")?;
        let scale = tape.softplus(c)?;
        Ok((probs, shift, width, scale))
    }

    /// `[points, D]` rendered mixtures for the rows of `raw`.
    fn render_batch(&self, tape: &mut Tape, raw: Var) -> Result<(Var, Var)> {
        let rows = tape.value(raw).rows();
        let m = self.library.len();
        let d = self.library.dim;
        let (probs, shift, width, scale) = self.latents(tape, raw)?;
        let weight = tape.mul(probs, scale)?;
        let flat = |tape: &mut Tape, x: Var| tape.reshape(x, &[rows * m]);
        let (shift, width, weight) = (flat(tape, shift)?, flat(tape, width)?, flat(tape, weight)?);

        let mut idx = Vec::new();
        let mut mu = Vec::new();
        let mut amp = Vec::new();
        let mut lengths = Vec::with_capacity(rows);
        for r in 0..rows {
            let mut len = 0;
            for (j, p) in self.library.patterns.iter().enumerate() {
                for &(loc, a) in p.sticks() {
                    idx.push(r * m + j);
                    mu.push(loc);
                    amp.push(a);
                    len += 1;
                }
            }
            lengths.push(len);
        }
        let total = idx.len();
        let ones = tape.leaf(TensorValue::filled(&[1, d], 1.0));
        let spread = |tape: &mut Tape, v: Var| -> Result<Var> {
            let col = tape.reshape(v, &[total, 1])?;
            tape.matmul(col, ones)
        };

        let sg = tape.gather_rows(shift, &idx)?;
        let mu = tape.leaf(TensorValue::vector(mu));
        let moved = tape.mul(sg, mu)?;
        let center = tape.add(moved, mu)?;
        let center = spread(tape, center)?;
        let x: Vec<f64> = (0..total).flat_map(|_| self.bins.iter().copied()).collect();
        let x = tape.leaf(TensorValue::matrix(total, d, x)?);
        let diff = tape.sub(x, center)?;
        let sq = tape.square(diff)?;

        let wg = tape.gather_rows(width, &idx)?;
        let w2 = tape.square(wg)?;
        let w2 = tape.scale(w2, -2.0)?;
        let one = tape.scalar(1.0);
        let inv = tape.div(one, w2)?;
        let inv = spread(tape, inv)?;
        let expo = tape.mul(sq, inv)?;
        let peaks = tape.exp(expo)?;

        let cg = tape.gather_rows(weight, &idx)?;
        let amp = tape.leaf(TensorValue::vector(amp));
        let coef = tape.mul(cg, amp)?;
        let coef = spread(tape, coef)?;
        let scaled = tape.mul(peaks, coef)?;
        let mixed = tape.segment_sum(scaled, &lengths)?;
        Ok((mixed, probs))
    }
}

impl Driver for DemixDriver {
    type Assignment = DemixEstimate;

    fn vertex_count(&self) -> usize {
        self.dataset.signals.len()
    }

    fn constraints(&self) -> &[GlobalConstraint] {
        &self.constraints
    }

    fn init_params(&self, rng: &mut SolverRng) -> Vec<TensorValue> {
        self.encoder.init(rng)
    }

    fn build(&self, tape: &mut Tape, params: &[Var], batch: &Batch, _iteration: usize) -> Result<ObjectiveTerms> {
        let raw = self.encoder.encode(tape, params, &batch.vertices)?;
        let (mixed, probs) = self.render_batch(tape, raw)?;
        let d = self.library.dim;
        let obs: Vec<f64> = batch
            .vertices
            .iter()
            .flat_map(|&v| self.dataset.signals[v].y.iter().copied())
            .collect();
        let obs = tape.leaf(TensorValue::matrix(batch.vertices.len(), d, obs)?);
        let r = tape.sub(mixed, obs)?;
        let r = tape.abs(r)?;
        let r = tape.row_sum(r)?;
        let reconstruction = tape.scale(r, 1.0 / d as f64)?;
        let local = sparsity_penalties(tape, probs, self.threshold)?;

        let global = if batch.constraints.is_empty() {
            tape.leaf(TensorValue::vector(Vec::new()))
        } else {
            let pos = |v: usize| batch.vertices.binary_search(&v).expect("edge inside batch");
            let (us, vs): (Vec<usize>, Vec<usize>) = batch
                .constraints
                .iter()
                .map(|&c| {
                    let (u, v) = self.dataset.edges[c];
                    (pos(u), pos(v))
                })
                .unzip();
            let e = EdgeLatents {
                probs_u: tape.gather_rows(probs, &us)?,
                probs_v: tape.gather_rows(probs, &vs)?,
                raw_u: tape.gather_rows(raw, &us)?,
                raw_v: tape.gather_rows(raw, &vs)?,
            };
            let p = (self.edge_penalty)(tape, &e)?;
            tape.scale(p, self.edge_weight)?
        };
        Ok(ObjectiveTerms {
            reconstruction: Some(reconstruction),
            local: Some(local),
            global: Some(global),
            global_violation: None,
        })
    }

    fn decode(&self, params: &[TensorValue]) -> Result<DemixEstimate> {
        let all: Vec<usize> = (0..self.vertex_count()).collect();
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let raw = self.encoder.encode(&mut tape, &vars, &all)?;
        let (probs, shift, width, scale) = self.latents(&mut tape, raw)?;
        let m = self.library.len();
        let (p, s, w, c) = (
            tape.value(probs).data(),
            tape.value(shift).data(),
            tape.value(width).data(),
            tape.value(scale).data(),
        );
        let probs = p.chunks(m).map(|r| r.to_vec()).collect();
        let params = (0..all.len())
            .map(|i| {
                (0..m)
                    .map(|j| PhaseParams {
                        shift: s[i * m + j],
                        width: w[i * m + j],
                        scale: c[i * m + j],
                    })
                    .collect()
            })
            .collect();
        Ok(DemixEstimate { probs, params })
    }

    /// At most `k` active phases per point and every residual within tolerance.
    fn verify(&self, e: &DemixEstimate) -> bool {
        (0..self.vertex_count()).all(|i| {
            let (l1, _) = residuals(&e.reconstruct(&self.library, i), &self.dataset.signals[i].y);
            e.active(i).len() <= self.dataset.k && l1 <= self.residual_tol
        })
    }

    fn weight_is_adaptive(&self, _c: &GlobalConstraint) -> bool {
        false
    }

    fn stop_when_verified(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::graph::ConstraintGraph;
    use crate::rng::rng_from_seed;

    fn small() -> (BasisLibrary, DemixDataset) {
        let mut rng = rng_from_seed(1);
        let lib = BasisLibrary::generate(20, 64, &mut rng).unwrap();
        let ds = synthesize_dataset(&lib, CompositionGraph::Chain(60), 3, 0.0, &mut rng).unwrap();
        (lib, ds)
    }

    fn zero_shift(width: f64) -> PhaseParams {
        PhaseParams {
            shift: 0.0,
            width,
            scale: 1.0,
        }
    }

    #[test]
    fn single_stick_peaks_at_center() {
        let p = StickPattern::new(vec![(0.5, 1.0)]).unwrap();
        let y = render(&p, zero_shift(0.02), 100);
        let best = crate::encoder::argmax(&y);
        // bins 49 and 50 straddle 0.5 symmetrically
        assert!(best == 49 || best == 50);
        assert!((y[49] - y[50]).abs() < 1e-12);
    }

    #[test]
    fn shift_is_multiplicative() {
        let p = StickPattern::new(vec![(0.3, 1.0), (0.6, 0.5)]).unwrap();
        let d = 10_000;
        let y = render(
            &p,
            PhaseParams {
                shift: 0.01,
                width: 0.002,
                scale: 1.0,
            },
            d,
        );
        let peak_near = |x: f64| {
            let lo = ((x - 0.01) * d as f64) as usize;
            let hi = ((x + 0.01) * d as f64) as usize;
            (lo..hi).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap()
        };
        for (mu, _) in p.sticks() {
            let b = peak_near(mu * 1.01);
            assert!(((b as f64 + 0.5) / d as f64 - mu * 1.01).abs() <= 1.0 / d as f64);
        }
    }

    #[test]
    fn zero_scale_is_zero_and_scale_is_linear() {
        let p = StickPattern::new(vec![(0.2, 2.0), (0.7, 1.0)]).unwrap();
        let z = PhaseParams {
            scale: 0.0,
            ..zero_shift(0.03)
        };
        assert!(render(&p, z, 50).iter().all(|&v| v == 0.0));
        let one = render(&p, zero_shift(0.03), 50);
        let three = render(&p, PhaseParams { scale: 3.0, ..zero_shift(0.03) }, 50);
        for (a, b) in one.iter().zip(&three) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stick_pattern_normalizes_and_validates() {
        let p = StickPattern::new(vec![(0.6, 4.0), (0.2, 2.0)]).unwrap();
        assert_eq!(p.sticks(), &[(0.2, 0.5), (0.6, 1.0)]);
        assert!(StickPattern::new(vec![(0.2, 1.0), (0.2, 1.0)]).is_err());
        assert!(StickPattern::new(vec![(1.2, 1.0)]).is_err());
        assert!(StickPattern::new(vec![]).is_err());
    }

    #[test]
    fn dataset_active_sets_are_sparse_and_smooth() {
        let (_, ds) = small();
        for s in &ds.signals {
            assert!((1..=3).contains(&s.truth.len()));
        }
        for &(u, v) in &ds.edges {
            let a: Vec<usize> = ds.signals[u].truth.iter().map(|t| t.0).collect();
            let b: Vec<usize> = ds.signals[v].truth.iter().map(|t| t.0).collect();
            let shared = a.iter().filter(|p| b.contains(p)).count();
            assert!(shared + 1 >= a.len().max(b.len()), "{a:?} {b:?}");
        }
    }

    #[test]
    fn lattice_neighbors_share_phases() {
        let mut rng = rng_from_seed(2);
        let lib = BasisLibrary::generate(10, 32, &mut rng).unwrap();
        let g = CompositionGraph::Triangular { rows: 4, cols: 5 };
        let ds = synthesize_dataset(&lib, g, 2, 0.01, &mut rng).unwrap();
        assert_eq!(ds.edges.len(), 4 * 4 + 3 * 5 + 3 * 4);
        for &(u, v) in &ds.edges {
            let a: Vec<usize> = ds.signals[u].truth.iter().map(|t| t.0).collect();
            let b: Vec<usize> = ds.signals[v].truth.iter().map(|t| t.0).collect();
            let shared = a.iter().filter(|p| b.contains(p)).count();
            assert!(shared + 1 >= a.len().max(b.len()));
        }
    }

    #[test]
    fn noiseless_single_phase_signal_is_one_pattern() {
        let mut rng = rng_from_seed(3);
        let lib = BasisLibrary::generate(5, 40, &mut rng).unwrap();
        let ds = synthesize_dataset(&lib, CompositionGraph::Chain(10), 1, 0.0, &mut rng).unwrap();
        for s in &ds.signals {
            let (p, z) = s.truth[0];
            assert_eq!(s.y, render(&lib.patterns[p], z, 40));
        }
    }

    #[test]
    fn truth_reconstructs_noiseless_data() {
        let (lib, ds) = small();
        let m = evaluate(&DemixEstimate::from_truth(&ds, lib.len()), &ds, &lib);
        assert!(m.mean_l1() < 1e-9);
        assert_eq!(m.f1, 1.0);
    }

    #[test]
    fn all_zero_prediction_has_zero_recall() {
        let (lib, ds) = small();
        let mut e = DemixEstimate::from_truth(&ds, lib.len());
        for p in e.probs.iter_mut() {
            p.iter_mut().for_each(|x| *x = 0.0);
        }
        assert_eq!(evaluate(&e, &ds, &lib).recall, 0.0);
    }

    #[test]
    fn random_probabilities_match_chance_f1() {
        let (lib, ds) = small();
        let mut rng = rng_from_seed(4);
        let mut total = 0.0;
        let trials = 50;
        for _ in 0..trials {
            let mut e = DemixEstimate::from_truth(&ds, lib.len());
            for p in e.probs.iter_mut() {
                p.iter_mut().for_each(|x| *x = rng.random_range(0.0..0.1));
            }
            total += evaluate(&e, &ds, &lib).f1;
        }
        // half the phases pass the threshold at random: precision is the
        // active fraction, recall about one half
        let active: usize = ds.signals.iter().map(|s| s.truth.len()).sum();
        let frac = active as f64 / (ds.signals.len() * lib.len()) as f64;
        let chance = 2.0 * frac * 0.5 / (frac + 0.5);
        assert!((total / trials as f64 - chance).abs() < 0.03, "{} vs {chance}", total / trials as f64);
    }

    #[test]
    fn sparsity_penalty_of_uniform_phases() {
        let mut tape = Tape::new();
        let p = tape.leaf(TensorValue::matrix(1, 20, vec![0.05; 20]).unwrap());
        let t = SparsityThreshold::default_for(3).unwrap();
        let v = sparsity_penalties(&mut tape, p, t).unwrap();
        let expect = math::ln(20.0) - 0.75 * math::ln(3.0);
        assert!((tape.value(v).data()[0] - expect).abs() < 1e-12);
        assert!((expect - 2.17).abs() < 0.01);
    }

    fn driver(lib: BasisLibrary, ds: DemixDataset) -> DemixDriver {
        let k = ds.k;
        DemixDriver::new(ds, lib, SparsityThreshold::default_for(k).unwrap(), EncoderMode::FreeLogits, 0.1).unwrap()
    }

    #[test]
    fn chain_is_one_component_with_subpath_batches() {
        let (lib, ds) = small();
        let d = driver(lib, ds);
        let g = ConstraintGraph::build(60, d.constraints()).unwrap();
        assert_eq!(g.components().len(), 1);
        let b = g.sample_batch(&mut rng_from_seed(1), 10, BatchMode::Subpath);
        assert!(b.vertices.len() <= 10);
        assert_eq!(b.constraints.len(), b.vertices.len() - 1);
    }

    #[test]
    fn build_matches_plain_render() {
        let mut rng = rng_from_seed(5);
        let lib = BasisLibrary::generate(4, 24, &mut rng).unwrap();
        let ds = synthesize_dataset(&lib, CompositionGraph::Chain(5), 2, 0.02, &mut rng).unwrap();
        let d = driver(lib, ds);
        let params = d.init_params(&mut rng);
        let est = d.decode(&params).unwrap();
        let g = ConstraintGraph::build(5, d.constraints()).unwrap();
        let mut tape = Tape::new();
        let x = tape.leaf(params[0].clone());
        let t = d.build(&mut tape, &[x], &g.full_batch(), 0).unwrap();
        let recon = tape.value(t.reconstruction.unwrap()).data().to_vec();
        let m = evaluate(&est, d.dataset(), d.library());
        for (a, b) in recon.iter().zip(&m.l1) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(tape.value(t.global.unwrap()).len(), 4);
    }

    #[test]
    fn objective_gradients_match_finite_differences() {
        let mut rng = rng_from_seed(6);
        let lib = BasisLibrary::generate(3, 16, &mut rng).unwrap();
        let ds = synthesize_dataset(&lib, CompositionGraph::Chain(3), 2, 0.02, &mut rng).unwrap();
        let d = driver(lib, ds);
        let g = ConstraintGraph::build(3, d.constraints()).unwrap();
        let batch = g.full_batch();
        for _ in 0..20 {
            let point = d.init_params(&mut rng).remove(0);
            let d = d.clone();
            let batch = batch.clone();
            let err = grad_check(
                move |t, x| {
                    let terms = d.build(t, &[x], &batch, 0)?;
                    let w = vec![1.0; batch.constraints.len()];
                    crate::optimizer::assemble_objective(
                        t,
                        batch.vertices.len(),
                        &terms,
                        1.0,
                        &w,
                        crate::optimizer::LocalReduction::Mean,
                    )
                },
                &point,
            )
            .unwrap();
            assert!(err < 1e-4, "{err}");
        }
    }
}
