//! Two overlapping 4x4 Sudokus observed through a fixed prototype decoder.
//!
//! Every cell shows the mixture of one prototype from classes 1..=4 and one
//! from classes 5..=8. The driver recovers both digits per cell from the
//! observations alone, using reconstruction through the decoder plus the
//! cardinality and all-different relaxations of both grids.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{random_solution, Grid};
use crate::autodiff::{Tape, TensorValue, Var};
use crate::encoder::{argmax, Encoder, EncoderMode, LatentLayout};
use crate::graph::{Batch, GlobalConstraint};
use crate::optimizer::{Driver, ObjectiveTerms, SolveConfig, UpdateRule};
use crate::relaxations::{all_different_penalties, row_entropies, ConstrainedSet, TermKind};
use crate::rng::SolverRng;
use crate::{Error, Result};

pub const PROTOTYPE_DIM: usize = 32;
const CELLS: usize = 16;

/// How the two digit images of a cell combine into one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mixing {
    /// Elementwise maximum (overlapping ink).
    Max,
    Additive,
}

impl Mixing {
    pub fn mix(self, a: f64, b: f64) -> f64 {
        match self {
            Mixing::Max => a.max(b),
            Mixing::Additive => a + b,
        }
    }
}

/// Eight fixed prototype vectors: indices 0..4 are digits 1..=4, 4..8 are 5..=8.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeDecoder {
    pub prototypes: Vec<Vec<f64>>,
    pub mixing: Mixing,
}

impl PrototypeDecoder {
    /// Sparse stroke-like prototypes with entries in `[0, 1]`, resampled
    /// until every pair is at least `min_l1` apart.
    pub fn generate<R: Rng + ?Sized>(rng: &mut R, dim: usize, min_l1: f64, mixing: Mixing) -> Self {
        loop {
            let prototypes: Vec<Vec<f64>> = (0..8)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            if rng.random_bool(0.35) {
                                rng.random_range(0.5..1.0)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            let d = Self { prototypes, mixing };
            if d.min_separation() >= min_l1 {
                return d;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].len()
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..8 {
            for j in i + 1..8 {
                let d: f64 = self.prototypes[i]
                    .iter()
                    .zip(&self.prototypes[j])
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                best = best.min(d);
            }
        }
        best
    }

    /// Noise-free observation of digits `low` in 1..=4 and `high` in 5..=8.
    pub fn render(&self, low: u8, high: u8) -> Vec<f64> {
        let a = &self.prototypes[low as usize - 1];
        let b = &self.prototypes[high as usize - 1];
        a.iter().zip(b).map(|(&x, &y)| self.mixing.mix(x, y)).collect()
    }

    fn matrix(&self, range: core::ops::Range<usize>) -> TensorValue {
        let data: Vec<f64> = self.prototypes[range].iter().flatten().copied().collect();
        TensorValue::matrix(4, self.dim(), data).expect("prototype shape")
    }
}

/// One overlapping pair of 4x4 Sudokus.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapInstance {
    /// `16` observation vectors, one per cell.
    pub observations: Vec<Vec<f64>>,
    /// Ground-truth digits 1..=4 per cell (evaluation only).
    pub low: Vec<u8>,
    /// Ground-truth digits 5..=8 per cell (evaluation only).
    pub high: Vec<u8>,
}

impl OverlapInstance {
    /// Two independent random valid grids, mixed and perturbed by Gaussian noise.
    pub fn generate<R: Rng + ?Sized>(rng: &mut R, decoder: &PrototypeDecoder, noise: f64) -> Self {
        let low = random_solution(Grid::Four, rng);
        let high: Vec<u8> = random_solution(Grid::Four, rng).into_iter().map(|d| d + 4).collect();
        let normal = (noise > 0.0).then(|| Normal::new(0.0, noise).expect("noise std"));
        let observations = low
            .iter()
            .zip(&high)
            .map(|(&a, &b)| {
                let mut v = decoder.render(a, b);
                if let Some(n) = &normal {
                    for x in v.iter_mut() {
                        *x += n.sample(rng);
                    }
                }
                v
            })
            .collect();
        Self {
            observations,
            low,
            high,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.observations.len() != CELLS || self.observations.iter().any(|o| o.len() != dim) {
            return Err(Error::InvalidArgument(alloc::format!(
                "overlap instance needs {CELLS} observations of length {dim}"
            )));
        }
        if !Grid::Four.is_valid_solution(&self.low)
            || !Grid::Four.is_valid_solution(&self.high.iter().map(|d| d.wrapping_sub(4)).collect::<Vec<_>>())
        {
            return Err(Error::InvalidArgument("ground truth is not a pair of valid grids".into()));
        }
        Ok(())
    }
}

/// Decoded digits of both grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapAssignment {
    pub low: Vec<u8>,
    pub high: Vec<u8>,
}

impl OverlapAssignment {
    pub fn correct_digits(&self, truth: &OverlapInstance) -> usize {
        self.low.iter().zip(&truth.low).filter(|(a, b)| a == b).count()
            + self.high.iter().zip(&truth.high).filter(|(a, b)| a == b).count()
    }
}

pub fn default_config() -> SolveConfig {
    SolveConfig {
        learning_rate: 0.3,
        update: UpdateRule::adam(),
        max_iterations: 1500,
        decode_interval: 20,
        ..SolveConfig::default()
    }
}

/// Relaxed de-mixing of one overlap instance.
#[derive(Debug, Clone)]
pub struct OverlapDriver {
    instance: OverlapInstance,
    decoder: PrototypeDecoder,
    encoder: Encoder,
    /// Largest tolerated mean absolute residual per cell of a hard decode.
    pub residual_tol: f64,
    sets: Vec<ConstrainedSet>,
    constraints: Vec<GlobalConstraint>,
}

impl OverlapDriver {
    pub fn new(instance: OverlapInstance, decoder: PrototypeDecoder, mode: EncoderMode, residual_tol: f64) -> Result<Self> {
        instance.validate(decoder.dim())?;
        let layout = LatentLayout::new(&[("low", 4), ("high", 4)]);
        let feats = || {
            let data: Vec<f64> = instance.observations.iter().flatten().copied().collect();
            TensorValue::matrix(CELLS, decoder.dim(), data).expect("observation shape")
        };
        let encoder = Encoder::with_mode(mode, CELLS, layout, feats)?;
        let units = Grid::Four.units();
        let sets = units
            .iter()
            .map(|u| ConstrainedSet::new(u.clone()))
            .collect::<Result<Vec<_>>>()?;
        // ids 0..12 constrain the low grid, 12..24 the high grid
        let constraints = units
            .iter()
            .chain(units.iter())
            .enumerate()
            .map(|(i, u)| GlobalConstraint::new(i, u.clone(), TermKind::AllDifferent))
            .collect();
        Ok(Self {
            instance,
            decoder,
            encoder,
            residual_tol,
            sets,
            constraints,
        })
    }

    pub fn instance(&self) -> &OverlapInstance {
        &self.instance
    }

    /// Mean absolute residual per cell of the hard reconstruction.
    pub fn residuals(&self, a: &OverlapAssignment) -> Vec<f64> {
        (0..CELLS)
            .map(|c| {
                let r = self.decoder.render(a.low[c], a.high[c]);
                r.iter()
                    .zip(&self.instance.observations[c])
                    .map(|(x, y)| (x - y).abs())
                    .sum::<f64>()
                    / r.len() as f64
            })
            .collect()
    }
}

impl Driver for OverlapDriver {
    type Assignment = OverlapAssignment;

    fn vertex_count(&self) -> usize {
        CELLS
    }

    fn constraints(&self) -> &[GlobalConstraint] {
        &self.constraints
    }

    fn init_params(&self, rng: &mut SolverRng) -> Vec<TensorValue> {
        self.encoder.init(rng)
    }

    fn build(&self, tape: &mut Tape, params: &[Var], batch: &Batch, _iteration: usize) -> Result<ObjectiveTerms> {
        let all: Vec<usize> = (0..CELLS).collect();
        let out = self.encoder.encode(tape, params, &all)?;
        let layout = self.encoder.layout();
        let low_logits = layout.slot(tape, out, "low")?;
        let high_logits = layout.slot(tape, out, "high")?;
        let low = tape.softmax(low_logits)?;
        let high = tape.softmax(high_logits)?;

        // expected digit images, then the mixture
        let proto_low = tape.leaf(self.decoder.matrix(0..4));
        let proto_high = tape.leaf(self.decoder.matrix(4..8));
        let bl = tape.gather_rows(low, &batch.vertices)?;
        let bh = tape.gather_rows(high, &batch.vertices)?;
        let img_low = tape.matmul(bl, proto_low)?;
        let img_high = tape.matmul(bh, proto_high)?;
        let mixed = match self.decoder.mixing {
            Mixing::Max => tape.maximum(img_low, img_high)?,
            Mixing::Additive => tape.add(img_low, img_high)?,
        };
        let obs: Vec<f64> = batch
            .vertices
            .iter()
            .flat_map(|&v| self.instance.observations[v].iter().copied())
            .collect();
        let obs = tape.leaf(TensorValue::matrix(batch.vertices.len(), self.decoder.dim(), obs)?);
        let diff = tape.sub(mixed, obs)?;
        let diff = tape.abs(diff)?;
        let reconstruction = tape.row_sum(diff)?;

        let hl = row_entropies(tape, bl)?;
        let hh = row_entropies(tape, bh)?;
        let local = tape.add(hl, hh)?;

        let (low_sets, high_sets): (Vec<usize>, Vec<usize>) = batch.constraints.iter().partition(|&&c| c < 12);
        let mut parts = Vec::new();
        if !low_sets.is_empty() {
            let s: Vec<ConstrainedSet> = low_sets.iter().map(|&c| self.sets[c].clone()).collect();
            parts.push(all_different_penalties(tape, low, &s)?);
        }
        if !high_sets.is_empty() {
            let s: Vec<ConstrainedSet> = high_sets.iter().map(|&c| self.sets[c - 12].clone()).collect();
            parts.push(all_different_penalties(tape, high, &s)?);
        }
        let global = if parts.is_empty() {
            tape.leaf(TensorValue::vector(vec![]))
        } else {
            tape.concat_rows(&parts)?
        };
        Ok(ObjectiveTerms {
            reconstruction: Some(reconstruction),
            local: Some(local),
            global: Some(global),
            global_violation: None,
        })
    }

    fn decode(&self, params: &[TensorValue]) -> Result<OverlapAssignment> {
        let all: Vec<usize> = (0..CELLS).collect();
        let out = self.encoder.evaluate(params, &all)?;
        let mut low = Vec::with_capacity(CELLS);
        let mut high = Vec::with_capacity(CELLS);
        for r in 0..CELLS {
            let row = out.row(r);
            low.push(argmax(&row[0..4]) as u8 + 1);
            high.push(argmax(&row[4..8]) as u8 + 5);
        }
        Ok(OverlapAssignment { low, high })
    }

    /// Both grids valid and every cell explained by the decoder within tolerance.
    fn verify(&self, a: &OverlapAssignment) -> bool {
        let high: Vec<u8> = a.high.iter().map(|d| d - 4).collect();
        Grid::Four.is_valid_solution(&a.low)
            && Grid::Four.is_valid_solution(&high)
            && self.residuals(a).iter().all(|&r| r <= self.residual_tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ConstraintGraph;
    use crate::rng::rng_from_seed;

    fn decoder() -> PrototypeDecoder {
        PrototypeDecoder::generate(&mut rng_from_seed(1), PROTOTYPE_DIM, 4.0, Mixing::Max)
    }

    #[test]
    fn prototypes_are_separated_and_bounded() {
        let d = decoder();
        assert!(d.min_separation() >= 4.0);
        assert!(d.prototypes.iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn generated_truth_is_valid() {
        let d = decoder();
        let inst = OverlapInstance::generate(&mut rng_from_seed(2), &d, 0.05);
        inst.validate(PROTOTYPE_DIM).unwrap();
        assert!(inst.high.iter().all(|&h| (5..=8).contains(&h)));
    }

    fn terms_at(driver: &OverlapDriver, logits: TensorValue) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = ConstraintGraph::build(16, driver.constraints()).unwrap();
        let mut tape = Tape::new();
        let p = tape.leaf(logits);
        let t = driver.build(&mut tape, &[p], &g.full_batch(), 0).unwrap();
        (
            tape.value(t.reconstruction.unwrap()).data().to_vec(),
            tape.value(t.local.unwrap()).data().to_vec(),
            tape.value(t.global.unwrap()).data().to_vec(),
        )
    }

    #[test]
    fn collapsed_truth_reconstructs_noiseless_observation() {
        let d = decoder();
        let inst = OverlapInstance::generate(&mut rng_from_seed(3), &d, 0.0);
        let mut logits = TensorValue::zeros(&[16, 8]);
        for c in 0..16 {
            logits.data_mut()[c * 8 + inst.low[c] as usize - 1] = 60.0;
            logits.data_mut()[c * 8 + inst.high[c] as usize - 1] = 60.0;
        }
        let driver = OverlapDriver::new(inst, d, EncoderMode::FreeLogits, 0.1).unwrap();
        let (recon, local, global) = terms_at(&driver, logits.clone());
        assert!(recon.iter().all(|&r| r < 1e-9));
        assert!(local.iter().all(|&r| r < 1e-9));
        assert_eq!(global.len(), 24);
        assert!(global.iter().all(|&r| r.abs() < 1e-9));
        let a = driver.decode(&[logits]).unwrap();
        assert!(driver.verify(&a));
        assert_eq!(a.correct_digits(driver.instance()), 32);
    }

    #[test]
    fn uniform_probs_reconstruct_average_mix() {
        let d = decoder();
        let inst = OverlapInstance::generate(&mut rng_from_seed(4), &d, 0.0);
        let driver = OverlapDriver::new(inst.clone(), d.clone(), EncoderMode::FreeLogits, 0.1).unwrap();
        let (recon, _, _) = terms_at(&driver, TensorValue::zeros(&[16, 8]));
        let avg = |r: core::ops::Range<usize>| -> Vec<f64> {
            (0..PROTOTYPE_DIM)
                .map(|j| d.prototypes[r.clone()].iter().map(|p| p[j]).sum::<f64>() / 4.0)
                .collect()
        };
        let (a, b) = (avg(0..4), avg(4..8));
        for c in 0..16 {
            let expect: f64 = (0..PROTOTYPE_DIM)
                .map(|j| (a[j].max(b[j]) - inst.observations[c][j]).abs())
                .sum();
            assert!((recon[c] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn solves_a_noisy_instance() {
        let d = decoder();
        let inst = OverlapInstance::generate(&mut rng_from_seed(5), &d, 0.05);
        let driver = OverlapDriver::new(inst, d, EncoderMode::FreeLogits, 0.1).unwrap();
        let cfg = SolveConfig {
            restart_limit: 10,
            ..default_config()
        };
        let r = crate::optimizer::solve_with_restarts(&driver, &cfg).unwrap();
        assert!(r.solved());
        assert_eq!(r.assignment.correct_digits(driver.instance()), 32);
    }
}
