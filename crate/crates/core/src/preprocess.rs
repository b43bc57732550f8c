//! Standardization followed by projection onto leading principal components.
//!
//! Fitted on training data only; the same affine map is then applied to
//! every split.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

pub const DEFAULT_CONTRIBUTION_THRESHOLD: f64 = 0.8;

const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessModel {
    pub input_dim: usize,
    pub output_dim: usize,
    pub mean: Vec<f64>,
    /// Constant components get 1 here.
    pub stddev: Vec<f64>,
    /// `output_dim` rows of length `input_dim`, orthonormal.
    pub projection: Vec<Vec<f64>>,
    /// All covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub contribution_threshold: f64,
}

impl PreprocessModel {
    /// Identity map on `dim` components.
    pub fn identity(dim: usize) -> Self {
        PreprocessModel {
            input_dim: dim,
            output_dim: dim,
            mean: vec![0.0; dim],
            stddev: vec![1.0; dim],
            projection: (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            eigenvalues: Vec::new(),
            contribution_threshold: 1.0,
        }
    }

    /// `projection · ((x − mean) / stddev)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let z: Vec<f64> = x
            .iter()
            .zip(&self.mean)
            .zip(&self.stddev)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        Ok(self
            .projection
            .iter()
            .map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn apply_dataset(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        data.map_vectors(self.output_dim, |v| self.apply(v))
    }

    /// Fraction of total variance kept by the first `k` components.
    pub fn cumulative_contribution(&self, k: usize) -> f64 {
        cumulative_fraction(&self.eigenvalues, k)
    }
}

fn cumulative_fraction(eigenvalues: &[f64], k: usize) -> f64 {
    let total: f64 = eigenvalues.iter().sum();
    let kept: f64 = eigenvalues[..k].iter().sum();
    kept / total
}

/// Fits mean/stddev on `train`, then keeps the smallest number of leading
/// eigenvectors of the standardized covariance whose eigenvalues reach
/// `contribution_threshold` of the total.
pub fn fit_preprocess(train: &LabeledDataset, contribution_threshold: f64) -> Result<PreprocessModel> {
    if !(contribution_threshold > 0.0 && contribution_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contribution threshold must be in (0, 1], got {contribution_threshold}"
        )));
    }
    let n = train.len();
    if n < 2 {
        return Err(Error::Preprocess(format!("need at least 2 records, got {n}")));
    }
    let dim = train.dim();
    let nf = n as f64;

    let mut mean = vec![0.0; dim];
    for v in train.vectors() {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= nf);

    let mut stddev = vec![0.0; dim];
    for v in train.vectors() {
        for ((s, x), m) in stddev.iter_mut().zip(v).zip(&mean) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut stddev {
        *s = (*s / (nf - 1.0)).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }

    let z = DMatrix::from_fn(n, dim, |r, c| (train.vector(r)[c] - mean[c]) / stddev[c]);
    let cov = (z.transpose() * &z) / (nf - 1.0);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let (a, b) = (cov[(i, j)], cov[(j, i)]);
            if (a - b).abs() > SYMMETRY_TOLERANCE * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::Preprocess(format!(
                    "covariance not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    // Stable sort: equal eigenvalues keep the solver's order.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Preprocess("training data has no variance".into()));
    }

    let mut k = dim;
    let mut kept = 0.0;
    for (i, ev) in eigenvalues.iter().enumerate() {
        kept += ev;
        if kept / total >= contribution_threshold {
            k = i + 1;
            break;
        }
    }

    let projection = order[..k]
        .iter()
        .map(|&col| {
            let mut row: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            row.iter_mut().for_each(|x| *x /= norm);
            let mut lead = 0;
            for (i, x) in row.iter().enumerate() {
                if x.abs() > row[lead].abs() {
                    lead = i;
                }
            }
            if row[lead] < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            row
        })
        .collect();

    Ok(PreprocessModel {
        input_dim: dim,
        output_dim: k,
        mean,
        stddev,
        projection,
        eigenvalues,
        contribution_threshold,
    })
}
