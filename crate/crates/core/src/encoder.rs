//! Latent encoders: free per-point logits or a 3-layer fully-connected network.
//!
//! Both produce a `[points, width]` matrix of raw latent values whose columns
//! are partitioned into named slots (see [`LatentLayout`]).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Tape, TensorValue, Var, LEAKY_SLOPE};
use crate::math;
use crate::rng::SolverRng;
use crate::{Error, Result};

/// Standard deviation of freshly initialized free logits.
pub const FREE_LOGIT_STD: f64 = 0.5;

/// Named column ranges of the encoder output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentLayout {
    slots: Vec<(&'static str, usize, usize)>,
    width: usize,
}

impl LatentLayout {
    pub fn new(slots: &[(&'static str, usize)]) -> Self {
        let mut out = Vec::with_capacity(slots.len());
        let mut start = 0;
        for &(name, w) in slots {
            out.push((name, start, w));
            start += w;
        }
        Self {
            slots: out,
            width: start,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(start, width)` of a slot.
    pub fn range(&self, name: &str) -> Option<(usize, usize)> {
        self.slots
            .iter()
            .find(|(n, _, _)| *n == name)
            .map(|&(_, s, w)| (s, w))
    }

    /// Columns of `output` belonging to `name`.
    pub fn slot(&self, tape: &mut Tape, output: Var, name: &str) -> Result<Var> {
        let (s, w) = self
            .range(name)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown latent slot {name}")))?;
        tape.slice_cols(output, s, w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderMode {
    #[default]
    FreeLogits,
    Mlp { hidden: usize },
}


/// Default hidden width of the fully-connected encoder.
pub const MLP_HIDDEN: usize = 64;

#[derive(Debug, Clone)]
pub struct Encoder {
    mode: EncoderMode,
    points: usize,
    layout: LatentLayout,
    features: Option<TensorValue>,
}

impl Encoder {
    /// One trainable logit row per point.
    pub fn free(points: usize, layout: LatentLayout) -> Self {
        Self {
            mode: EncoderMode::FreeLogits,
            points,
            layout,
            features: None,
        }
    }

    /// Fully-connected encoder over a `[points, f]` feature matrix.
    pub fn mlp(features: TensorValue, layout: LatentLayout, hidden: usize) -> Result<Self> {
        if features.shape().len() != 2 || hidden == 0 {
            return Err(Error::ShapeMismatch {
                op: "mlp_encoder",
                left: features.shape().to_vec(),
                right: vec![hidden],
            });
        }
        Ok(Self {
            mode: EncoderMode::Mlp { hidden },
            points: features.rows(),
            layout,
            features: Some(features),
        })
    }

    /// Picks the mode; `features` is only evaluated for the MLP mode.
    pub fn with_mode(
        mode: EncoderMode,
        points: usize,
        layout: LatentLayout,
        features: impl FnOnce() -> TensorValue,
    ) -> Result<Self> {
        match mode {
            EncoderMode::FreeLogits => Ok(Self::free(points, layout)),
            EncoderMode::Mlp { hidden } => Self::mlp(features(), layout, hidden),
        }
    }

    pub fn mode(&self) -> EncoderMode {
        self.mode
    }

    pub fn layout(&self) -> &LatentLayout {
        &self.layout
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Parameter shapes in the order `init` returns them.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let w = self.layout.width();
        match self.mode {
            EncoderMode::FreeLogits => vec![vec![self.points, w]],
            EncoderMode::Mlp { hidden } => {
                let f = self.features.as_ref().map(|x| x.cols()).unwrap_or(0);
                vec![
                    vec![f, hidden],
                    vec![1, hidden],
                    vec![hidden, hidden],
                    vec![1, hidden],
                    vec![hidden, w],
                    vec![1, w],
                ]
            }
        }
    }

    /// Normal(0, 0.5) free logits, or fan-in scaled uniform weights with zero biases.
    pub fn init(&self, rng: &mut SolverRng) -> Vec<TensorValue> {
        match self.mode {
            EncoderMode::FreeLogits => {
                let normal = Normal::new(0.0, FREE_LOGIT_STD).expect("valid std");
                let shape = &self.param_shapes()[0];
                let n = shape[0] * shape[1];
                let data = (0..n).map(|_| normal.sample(rng)).collect();
                vec![TensorValue::new(shape.clone(), data).expect("shape")]
            }
            EncoderMode::Mlp { .. } => self
                .param_shapes()
                .into_iter()
                .enumerate()
                .map(|(i, shape)| {
                    if i % 2 == 1 {
                        TensorValue::zeros(&shape)
                    } else {
                        let bound = 1.0 / math::sqrt(shape[0].max(1) as f64);
                        let n = shape[0] * shape[1];
                        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
                        TensorValue::new(shape, data).expect("shape")
                    }
                })
                .collect(),
        }
    }

    /// Encoder output for `points` (rows in that order), `[points.len(), width]`.
    pub fn encode(&self, tape: &mut Tape, params: &[Var], points: &[usize]) -> Result<Var> {
        match self.mode {
            EncoderMode::FreeLogits => {
                let table = *params.first().ok_or(Error::EmptyBatch)?;
                tape.gather_rows(table, points)
            }
            EncoderMode::Mlp { .. } => {
                if params.len() != 6 {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "mlp expects 6 parameter tensors, got {}",
                        params.len()
                    )));
                }
                let feats = self.features.as_ref().expect("mlp has features");
                let mut x = Vec::with_capacity(points.len() * feats.cols());
                for &p in points {
                    if p >= feats.rows() {
                        return Err(Error::IndexOutOfRange {
                            index: p,
                            len: feats.rows(),
                        });
                    }
                    x.extend_from_slice(feats.row(p));
                }
                let x = tape.leaf(TensorValue::matrix(points.len(), feats.cols(), x)?);
                let ones = tape.leaf(TensorValue::filled(&[points.len(), 1], 1.0));
                let h1 = dense(tape, x, params[0], params[1], ones)?;
                let h1 = tape.leaky_relu(h1, LEAKY_SLOPE)?;
                let h2 = dense(tape, h1, params[2], params[3], ones)?;
                let h2 = tape.leaky_relu(h2, LEAKY_SLOPE)?;
                dense(tape, h2, params[4], params[5], ones)
            }
        }
    }

    /// Forward pass outside of any optimization, for decoding.
    pub fn evaluate(&self, params: &[TensorValue], points: &[usize]) -> Result<TensorValue> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = self.encode(&mut tape, &vars, points)?;
        Ok(tape.value(out).clone())
    }
}

fn dense(tape: &mut Tape, x: Var, w: Var, b: Var, ones: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let bias = tape.matmul(ones, b)?;
    tape.add(xw, bias)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::rng::rng_from_seed;

    fn layout() -> LatentLayout {
        LatentLayout::new(&[("p", 4), ("q", 4)])
    }

    #[test]
    fn layout_slots() {
        let l = LatentLayout::new(&[("probs", 20), ("shift", 20), ("width", 20)]);
        assert_eq!(l.width(), 60);
        assert_eq!(l.range("shift"), Some((20, 20)));
        assert_eq!(l.range("nope"), None);
    }

    #[test]
    fn free_logits_are_identity() {
        let enc = Encoder::free(5, layout());
        let params = enc.init(&mut rng_from_seed(1));
        let out = enc.evaluate(&params, &[3]).unwrap();
        assert_eq!(out.data(), params[0].row(3));
    }

    #[test]
    fn zero_weight_mlp_outputs_bias() {
        let feats = TensorValue::matrix(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let enc = Encoder::mlp(feats, layout(), 7).unwrap();
        let mut params: Vec<TensorValue> = enc.param_shapes().iter().map(|s| TensorValue::zeros(s)).collect();
        params[5] = TensorValue::matrix(1, 8, (0..8).map(|i| i as f64).collect()).unwrap();
        let out = enc.evaluate(&params, &[0, 1, 2]).unwrap();
        for r in 0..3 {
            assert_eq!(out.row(r), params[5].data());
        }
    }

    #[test]
    fn same_seed_same_params_different_seed_differs() {
        let enc = Encoder::free(10, layout());
        assert_eq!(enc.init(&mut rng_from_seed(4)), enc.init(&mut rng_from_seed(4)));
        assert_ne!(enc.init(&mut rng_from_seed(4)), enc.init(&mut rng_from_seed(5)));
        let feats = TensorValue::matrix(2, 3, vec![0.0; 6]).unwrap();
        let mlp = Encoder::mlp(feats, layout(), 4).unwrap();
        assert_eq!(mlp.init(&mut rng_from_seed(4)), mlp.init(&mut rng_from_seed(4)));
    }

    #[test]
    fn free_logit_variance() {
        let enc = Encoder::free(12_500, layout());
        let p = enc.init(&mut rng_from_seed(9));
        let d = p[0].data();
        assert_eq!(d.len(), 100_000);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d.len() as f64;
        assert!((var - 0.25).abs() <= 0.025, "{var}");
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = rng_from_seed(13);
        let feats = TensorValue::matrix(4, 3, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let enc = Encoder::mlp(feats, layout(), 5).unwrap();
        let params = enc.init(&mut rng);
        for which in 0..6 {
            let others = params.clone();
            let enc = enc.clone();
            let err = grad_check(
                move |t, x| {
                    let vars: Vec<Var> = (0..6)
                        .map(|i| if i == which { x } else { t.leaf(others[i].clone()) })
                        .collect();
                    let out = enc.encode(t, &vars, &[0, 2, 3])?;
                    let p = enc.layout().slot(t, out, "q")?;
                    let sm = t.softmax(p)?;
                    let l = t.log(sm)?;
                    let s = t.square(l)?;
                    t.sum(s)
                },
                &params[which],
            )
            .unwrap();
            assert!(err < 1e-4, "param {which}: {err}");
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn mlp_rejects_bad_point() {
        let feats = TensorValue::matrix(2, 3, vec![0.0; 6]).unwrap();
        let enc = Encoder::mlp(feats, layout(), 4).unwrap();
        let params = enc.init(&mut rng_from_seed(1));
        assert!(enc.evaluate(&params, &[2]).is_err());
    }
}
