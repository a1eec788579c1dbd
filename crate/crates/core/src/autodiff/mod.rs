//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! Only scalar broadcasting is supported for elementwise ops. Every other
//! shape combination is rejected with [`Error::ShapeMismatch`](crate::Error).

mod tape;
mod tensor;

pub use tape::{Tape, Var, LEAKY_SLOPE, LOG_EPS};
pub use tensor::TensorValue;

use crate::Result;

/// Central-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;

/// Compares the tape gradient of `builder` at `point` with central finite
/// differences and returns `max_i |analytic_i - numeric_i| / max(1, |numeric_i|)`.
///
/// `builder` receives a fresh tape and the parameter leaf and must return a
/// scalar. It is called `2 * point.len() + 1` times and must be deterministic.
pub fn grad_check<F>(builder: F, point: &TensorValue) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |p: TensorValue| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(p);
        let y = builder(&mut tape, x)?;
        Ok(tape.value(y).item())
    };

    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let y = builder(&mut tape, x)?;
    tape.backward(y)?;
    let analytic = tape.grad(x);

    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += FD_STEP;
        let mut minus = point.clone();
        minus.data_mut()[i] -= FD_STEP;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * FD_STEP);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
