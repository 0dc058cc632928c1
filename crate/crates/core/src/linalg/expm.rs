use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Scaled norm target before the Taylor series is summed.
const SCALED_NORM: f64 = 0.5;
/// Series terms are summed until their norm drops below this fraction of the partial sum.
const TERM_TOL: f64 = 1e-18;
const MAX_TERMS: usize = 64;

/// Matrix exponential `e^{tA}` by scaling and squaring.
///
/// `tA` is scaled by `2^-s` so that its 1-norm is at most 0.5, the Taylor
/// series is summed until the next term is negligible, and the result is
/// squared `s` times.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            context: "mat_exp",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("mat_exp: t = {t} is not finite")));
    }
    let n = a.rows();
    let x = a.scale(t);
    let norm = x.norm_one();
    if !norm.is_finite() {
        return Err(Error::NonFinite("mat_exp"));
    }
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let x = x.scale(2f64.powi(-squarings));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=MAX_TERMS {
        term = term.matmul(&x).scale(1.0 / k as f64);
        sum = sum.add(&term);
        if term.norm_one() <= TERM_TOL * sum.norm_one() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    if !sum.is_finite() {
        return Err(Error::NonFinite("mat_exp"));
    }
    Ok(sum)
}
