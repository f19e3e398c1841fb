//! Reconstruction error between an original matrix and its dequantized copy.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// Mean of `|x - x'|`.
    pub mae: f64,
    /// Mean of `|x - x'| / x`; `None` when some original element is exactly zero.
    pub mre: Option<f64>,
    /// Mean of `(x - x')^2`.
    pub mse: f64,
    pub n: usize,
    pub d: usize,
}

pub fn compute_errors<T: Scalar>(
    original: &DenseMatrix<T>,
    reconstructed: &DenseMatrix<T>,
) -> Result<ErrorReport> {
    if original.shape() != reconstructed.shape() {
        return Err(Error::Shape(format!(
            "original is {:?}, reconstruction is {:?}",
            original.shape(),
            reconstructed.shape()
        )));
    }
    let (mut abs, mut rel, mut sq) = (0.0f64, 0.0f64, 0.0f64);
    let mut rel_defined = true;
    for (&x, &y) in original.data().iter().zip(reconstructed.data()) {
        let (x, y) = (x.to_f64_lossless(), y.to_f64_lossless());
        let e = (x - y).abs();
        abs += e;
        sq += e * e;
        if x == 0.0 {
            rel_defined = false;
        } else {
            rel += e / x;
        }
    }
    let count = original.data().len() as f64;
    Ok(ErrorReport {
        mae: abs / count,
        mre: rel_defined.then_some(rel / count),
        mse: sq / count,
        n: original.rows(),
        d: original.cols(),
    })
}
