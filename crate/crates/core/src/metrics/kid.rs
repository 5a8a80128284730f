//! Unbiased squared MMD with the cubic polynomial kernel `(xᵀy/d + 1)³`.

use rayon::prelude::*;

use super::features::FeatureSet;
use crate::{Error, Result};

pub fn polynomial_kernel(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot / d + 1.0).powi(3)
}

fn rows(set: &FeatureSet) -> Vec<Vec<f64>> {
    set.features.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Sum of `k(x_i, y_j)`, skipping `i == j` when `same` is set. Row sums are
/// computed in parallel and added in row order.
fn kernel_sum(x: &[Vec<f64>], y: &[Vec<f64>], same: bool) -> f64 {
    let per_row: Vec<f64> = x
        .par_iter()
        .enumerate()
        .map(|(i, xi)| {
            y.iter()
                .enumerate()
                .filter(|(j, _)| !same || *j != i)
                .map(|(_, yj)| polynomial_kernel(xi, yj))
                .sum()
        })
        .collect();
    per_row.iter().sum()
}

pub fn kid(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("KID needs at least two samples per set"));
    }
    let (x, y) = (rows(a), rows(b));
    let (m, n) = (x.len() as f64, y.len() as f64);
    let kxx = kernel_sum(&x, &x, true) / (m * (m - 1.0));
    let kyy = kernel_sum(&y, &y, true) / (n * (n - 1.0));
    let kxy = kernel_sum(&x, &y, false) / (m * n);
    let kyx = kernel_sum(&y, &x, false) / (m * n);
    // Averaging both cross orders keeps kid(A, B) == kid(B, A) bitwise.
    Ok(kxx + kyy - (kxy + kyx))
}
