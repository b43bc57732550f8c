//! Synthetic datasets. Generation order is record-major, component-minor.

use rand::Rng;
use rand_distr::{Normal, StandardNormal};

use crate::data::{LabelSet, LabeledDataset};
use crate::error::{Error, Result};
use crate::seed::{RngSeed, Stream};

/// `n` draws from the 3-D standard normal, labelled `pos` when the first
/// component is positive and `neg` otherwise.
pub fn generate_gaussian_sign_dataset(n: usize, seed: RngSeed) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 records, got {n}")));
    }
    let mut rng = seed.stream_rng(Stream::Synthetic, 0, 0);
    let records = (0..n).map(|_| {
        let v: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let label = if v[0] > 0.0 { "pos" } else { "neg" };
        (v, LabelSet::single(label))
    });
    LabeledDataset::new(3, records.collect::<Vec<_>>())
}

/// `per_cluster` isotropic Gaussian draws with standard deviation `spread`
/// around each center; cluster `i` gets `labels[i]`.
pub fn generate_clusters(
    centers: &[Vec<f64>],
    spread: f64,
    per_cluster: usize,
    labels: &[LabelSet],
    seed: RngSeed,
) -> Result<LabeledDataset> {
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidParameter(format!("spread must be positive, got {spread}")));
    }
    if centers.is_empty() {
        return Err(Error::InvalidParameter("at least one center is required".into()));
    }
    if centers.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} centers but {} label sets",
            centers.len(),
            labels.len()
        )));
    }
    let dim = centers[0].len();
    if let Some(c) = centers.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: c.len(),
        });
    }
    let noise = Normal::new(0.0, spread).expect("spread validated");
    let mut rng = seed.stream_rng(Stream::Synthetic, 1, 0);
    let mut records = Vec::with_capacity(centers.len() * per_cluster);
    for (center, label) in centers.iter().zip(labels) {
        for _ in 0..per_cluster {
            let v: Vec<f64> = center.iter().map(|c| c + rng.sample(noise)).collect();
            records.push((v, label.clone()));
        }
    }
    LabeledDataset::new(dim, records)
}

/// `classes` centers drawn from `N(0, center_scale² I)` in `dim` dimensions.
pub fn random_centers(classes: usize, dim: usize, center_scale: f64, seed: RngSeed) -> Vec<Vec<f64>> {
    let mut rng = seed.stream_rng(Stream::Synthetic, 2, 0);
    (0..classes)
        .map(|_| {
            (0..dim)
                .map(|_| center_scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_sign_dataset() {
        let d = generate_gaussian_sign_dataset(300, RngSeed(1)).unwrap();
        assert_eq!(d.len(), 300);
        assert_eq!(d.dim(), 3);
        for (v, l) in d.records() {
            let want = if v[0] > 0.0 { "pos" } else { "neg" };
            assert_eq!(l, &LabelSet::single(want));
        }
        let bound = 4.0 / 300f64.sqrt();
        for c in 0..3 {
            let mean = d.vectors().map(|v| v[c]).sum::<f64>() / 300.0;
            assert!(mean.abs() < bound);
        }
        let again = generate_gaussian_sign_dataset(300, RngSeed(1)).unwrap();
        assert_eq!(d.values(), again.values());
        assert!(generate_gaussian_sign_dataset(1, RngSeed(1)).is_err());
    }

    #[test]
    fn clusters() {
        let centers = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        let labels = vec![LabelSet::single("a"), LabelSet::new(["a", "b"])];
        let d = generate_clusters(&centers, 0.01, 10, &labels, RngSeed(3)).unwrap();
        assert_eq!(d.len(), 20);
        assert!(d.vectors().take(10).all(|v| (v[0] + 1.0).abs() < 0.1));
        assert!(d.share_label(0, 15));
        let again = generate_clusters(&centers, 0.01, 10, &labels, RngSeed(3)).unwrap();
        assert_eq!(d.values(), again.values());
        assert!(generate_clusters(&centers, 0.0, 10, &labels, RngSeed(3)).is_err());
        assert!(generate_clusters(&centers, 1.0, 10, &labels[..1], RngSeed(3)).is_err());
    }

    #[test]
    fn tight_clusters_nearmiss_straddles_midplane() {
        use crate::pairs::{NegativeMethod, PairSampler};
        let centers = vec![vec![-0.5, 0.0], vec![0.5, 0.0]];
        let labels = vec![LabelSet::single("l"), LabelSet::single("r")];
        let d = generate_clusters(&centers, 0.01, 15, &labels, RngSeed(8)).unwrap();
        let s = PairSampler::new(&d);
        let mut rng = RngSeed(0).rng();
        for _ in 0..50 {
            let p = s.sample_negative(NegativeMethod::Nearmiss, &mut rng).unwrap();
            assert!(d.vector(p.a)[0] * d.vector(p.b)[0] < 0.0);
        }
    }
}
