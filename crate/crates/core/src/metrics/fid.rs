//! Fréchet distance between Gaussian fits of two feature sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::features::FeatureSet;
use crate::{Error, Result};

pub fn mean_and_covariance(set: &FeatureSet) -> (DVector<f64>, DMatrix<f64>) {
    let x = &set.features;
    let n = x.nrows() as f64;
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n - 1.0);
    (mean, cov)
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μA − μB‖² + Tr(ΣA + ΣB − 2(ΣA ΣB)^{1/2})`.
///
/// The trace of the matrix square root is taken from the eigenvalues of the
/// symmetric product `ΣA^{1/2} ΣB ΣA^{1/2}`; eigenvalues below
/// `-1e-10·trace` are reported before being clipped to zero.
pub fn fid(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("FID needs at least two samples per set"));
    }
    let (mu_a, cov_a) = mean_and_covariance(a);
    let (mu_b, cov_b) = mean_and_covariance(b);
    let root_a = symmetric_sqrt(&cov_a);
    let product = &root_a * &cov_b * &root_a;
    let product = (&product + product.transpose()) * 0.5;
    let eigenvalues = SymmetricEigen::new(product.clone()).eigenvalues;
    let eps = 1e-10 * product.trace().abs();
    let mut trace_root = 0.0;
    for &l in eigenvalues.iter() {
        if l < -eps {
            log::warn!("clipping negative eigenvalue {l:e} in FID matrix square root");
        }
        trace_root += l.max(0.0).sqrt();
    }
    let diff = mu_a - mu_b;
    let value = diff.dot(&diff) + cov_a.trace() + cov_b.trace() - 2.0 * trace_root;
    Ok(value.max(0.0))
}
