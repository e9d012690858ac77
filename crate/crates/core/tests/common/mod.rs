//! Dense oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use paramtrack::linalg::Matrix;

pub fn true_spectral_radius(m: &Matrix<f64>) -> f64 {
    let n = m.rows();
    let dense = DMatrix::from_row_slice(n, n, m.as_slice());
    dense.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

// W = (AᵀA + βI)⁻¹Aᵀy through the thin SVD of A: w = V diag(s/(s²+β)) Uᵀy.
pub fn svd_ridge(a: &DMatrix<f64>, y: &DVector<f64>, beta: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let uty = u.transpose() * y;
    let scaled = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values.iter().zip(uty.iter()).map(|(&s, &c)| s * c / (s * s + beta)),
    );
    vt.transpose() * scaled
}

/// Augmented design matrix (states after washout, then a bias column).
pub fn design(data: &[f64], rows: usize, units: usize, washout: usize) -> DMatrix<f64> {
    let kept = rows - washout;
    let mut a = DMatrix::from_element(kept, units + 1, 1.0);
    for r in 0..kept {
        for c in 0..units {
            a[(r, c)] = data[(r + washout) * units + c];
        }
    }
    a
}
