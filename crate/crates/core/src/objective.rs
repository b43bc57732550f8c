//! Scoring a single hyperplane normal against a set of labeled pairs.
//!
//! A positive pair scores when both vectors fall strictly on the same side
//! of the hyperplane, a negative pair when they fall strictly on opposite
//! sides. A vector lying exactly on the hyperplane makes its pair score in
//! neither set. The walker's target density is `U = exp(x / T)`; only
//! `log U = x / T` is ever materialized.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::pairs::{Pair, PairSet};
use crate::vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `#PP₊ + #NP₋`
    Count,
    /// `#PP₊/#PP + #NP₋/#NP`
    Ratio,
    /// `Σ_PP |cos θ₁ + cos θ₂| + Σ_NP |cos θ₁ − cos θ₂|`
    Cosine,
    /// The two cosine sums, each divided by its pair count.
    CosineRatio,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveKind::Count => "count",
            ObjectiveKind::Ratio => "ratio",
            ObjectiveKind::Cosine => "cosine",
            ObjectiveKind::CosineRatio => "cosine_ratio",
        })
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "count" => Ok(ObjectiveKind::Count),
            "ratio" => Ok(ObjectiveKind::Ratio),
            "cosine" => Ok(ObjectiveKind::Cosine),
            "cosine_ratio" => Ok(ObjectiveKind::CosineRatio),
            _ => Err(Error::InvalidParameter(format!(
                "unknown objective {s:?}; expected count, ratio, cosine or cosine_ratio"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    pub temperature: f64,
}

impl ObjectiveConfig {
    pub fn new(kind: ObjectiveKind, temperature: f64) -> Result<Self> {
        let cfg = ObjectiveConfig { kind, temperature };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature > 0.0 && self.temperature.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )))
        }
    }
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            kind: ObjectiveKind::Count,
            temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// The enumerated value.
    pub x: f64,
    /// `x / T`.
    pub log_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    SameSide,
    Opposite,
    /// At least one vector lies exactly on the hyperplane.
    Neither,
}

#[inline]
fn side_of(d1: f64, d2: f64) -> Side {
    if (d1 > 0.0 && d2 > 0.0) || (d1 < 0.0 && d2 < 0.0) {
        Side::SameSide
    } else if (d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0) {
        Side::Opposite
    } else {
        Side::Neither
    }
}

pub fn classify_pair(normal: &[f64], pair: &Pair, data: &LabeledDataset) -> Side {
    side_of(
        vector::dot(normal, data.vector(pair.a)),
        vector::dot(normal, data.vector(pair.b)),
    )
}

/// Pair vectors copied into contiguous storage with their inverse norms, so
/// that repeated evaluation during a walk touches no indirection.
#[derive(Debug, Clone)]
pub struct PreparedPairs {
    dim: usize,
    // Per pair: first vector then second vector.
    positives: Vec<f64>,
    negatives: Vec<f64>,
    positive_inv_norms: Vec<f64>,
    negative_inv_norms: Vec<f64>,
}

impl PreparedPairs {
    /// Fails if a referenced vector has zero norm.
    pub fn new(data: &LabeledDataset, pairs: &PairSet) -> Result<Self> {
        let pack = |list: &[Pair]| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut values = Vec::with_capacity(list.len() * 2 * data.dim());
            let mut inv = Vec::with_capacity(list.len() * 2);
            for p in list {
                for idx in [p.a, p.b] {
                    if idx >= data.len() {
                        return Err(Error::InvalidParameter(format!(
                            "pair references record {idx} of {}",
                            data.len()
                        )));
                    }
                    let v = data.vector(idx);
                    let n = vector::norm(v);
                    if n == 0.0 {
                        return Err(Error::InvalidRecord {
                            index: idx,
                            reason: "zero-norm feature vector".into(),
                        });
                    }
                    values.extend_from_slice(v);
                    inv.push(1.0 / n);
                }
            }
            Ok((values, inv))
        };
        let (positives, positive_inv_norms) = pack(&pairs.positives)?;
        let (negatives, negative_inv_norms) = pack(&pairs.negatives)?;
        Ok(PreparedPairs {
            dim: data.dim(),
            positives,
            negatives,
            positive_inv_norms,
            negative_inv_norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positive_count(&self) -> usize {
        self.positive_inv_norms.len() / 2
    }

    pub fn negative_count(&self) -> usize {
        self.negative_inv_norms.len() / 2
    }

    /// Scores `normal`, which must be a unit vector of matching dimension.
    pub fn evaluate(&self, normal: &[f64], cfg: &ObjectiveConfig) -> Result<ObjectiveValue> {
        if normal.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: normal.len(),
            });
        }
        let (np, nn) = (self.positive_count(), self.negative_count());
        let x = match cfg.kind {
            ObjectiveKind::Count => (self.count_same(normal) + self.count_opposite(normal)) as f64,
            ObjectiveKind::Ratio => {
                check_ratio(np, nn)?;
                self.count_same(normal) as f64 / np as f64 + self.count_opposite(normal) as f64 / nn as f64
            }
            ObjectiveKind::Cosine => self.cosine_sum_positive(normal) + self.cosine_sum_negative(normal),
            ObjectiveKind::CosineRatio => {
                check_ratio(np, nn)?;
                self.cosine_sum_positive(normal) / np as f64 + self.cosine_sum_negative(normal) / nn as f64
            }
        };
        Ok(ObjectiveValue {
            x,
            log_u: x / cfg.temperature,
        })
    }

    fn dots<'a>(&'a self, values: &'a [f64], normal: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
        values.chunks_exact(2 * self.dim).map(move |pair| {
            let (v1, v2) = pair.split_at(self.dim);
            (vector::dot(normal, v1), vector::dot(normal, v2))
        })
    }

    fn count_same(&self, normal: &[f64]) -> usize {
        self.dots(&self.positives, normal)
            .filter(|&(d1, d2)| side_of(d1, d2) == Side::SameSide)
            .count()
    }

    fn count_opposite(&self, normal: &[f64]) -> usize {
        self.dots(&self.negatives, normal)
            .filter(|&(d1, d2)| side_of(d1, d2) == Side::Opposite)
            .count()
    }

    fn cosine_sum_positive(&self, normal: &[f64]) -> f64 {
        self.dots(&self.positives, normal)
            .zip(self.positive_inv_norms.chunks_exact(2))
            .map(|((d1, d2), inv)| (d1 * inv[0] + d2 * inv[1]).abs())
            .sum()
    }

    fn cosine_sum_negative(&self, normal: &[f64]) -> f64 {
        self.dots(&self.negatives, normal)
            .zip(self.negative_inv_norms.chunks_exact(2))
            .map(|((d1, d2), inv)| (d1 * inv[0] - d2 * inv[1]).abs())
            .sum()
    }
}

fn check_ratio(np: usize, nn: usize) -> Result<()> {
    if np == 0 {
        Err(Error::UndefinedRatio("positive"))
    } else if nn == 0 {
        Err(Error::UndefinedRatio("negative"))
    } else {
        Ok(())
    }
}

/// Scores `normal` against `pairs` drawn from `data`.
pub fn evaluate(
    normal: &[f64],
    pairs: &PairSet,
    cfg: &ObjectiveConfig,
    data: &LabeledDataset,
) -> Result<ObjectiveValue> {
    cfg.validate()?;
    PreparedPairs::new(data, pairs)?.evaluate(normal, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelSet;

    fn data(vs: &[&[f64]]) -> LabeledDataset {
        LabeledDataset::new(
            vs[0].len(),
            vs.iter().map(|v| (v.to_vec(), LabelSet::single("x"))),
        )
        .unwrap()
    }

    fn cfg(kind: ObjectiveKind) -> ObjectiveConfig {
        ObjectiveConfig { kind, temperature: 1.0 }
    }

    #[test]
    fn classify_examples() {
        let d = data(&[&[1.0, 1.0], &[1.0, -1.0], &[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0]]);
        let n = [1.0, 0.0];
        let p = |a, b| Pair { a, b, kind: crate::pairs::PairKind::Positive };
        assert_eq!(classify_pair(&n, &p(0, 1), &d), Side::SameSide);
        assert_eq!(classify_pair(&n, &p(2, 3), &d), Side::Opposite);
        assert_eq!(classify_pair(&n, &p(4, 0), &d), Side::Neither);
        assert_eq!(classify_pair(&n, &p(4, 3), &d), Side::Neither);
    }

    #[test]
    fn count_and_ratio_examples() {
        let d = data(&[&[1.0, 1.0], &[1.0, -1.0], &[1.0, 0.0], &[-1.0, 0.0]]);
        let pairs = PairSet::from_indices(&[(0, 1)], &[(2, 3)]);
        let n = [1.0, 0.0];
        let v = evaluate(&n, &pairs, &cfg(ObjectiveKind::Count), &d).unwrap();
        assert_eq!((v.x, v.log_u), (2.0, 2.0));
        let v = evaluate(&n, &pairs, &cfg(ObjectiveKind::Ratio), &d).unwrap();
        assert_eq!(v.x, 2.0);
    }

    #[test]
    fn cosine_example() {
        let d = data(&[&[1.0, 0.0], &[1.0, 0.0], &[-1.0, 0.0]]);
        let pairs = PairSet::from_indices(&[(0, 1)], &[(0, 2)]);
        let v = evaluate(&[1.0, 0.0], &pairs, &cfg(ObjectiveKind::Cosine), &d).unwrap();
        assert_eq!(v.x, 4.0);
        let v = evaluate(&[1.0, 0.0], &pairs, &cfg(ObjectiveKind::CosineRatio), &d).unwrap();
        assert_eq!(v.x, 4.0);
    }

    #[test]
    fn on_plane_vectors_count_nowhere() {
        let d = data(&[&[0.0, 1.0], &[1.0, 0.0], &[-1.0, 0.0]]);
        let pairs = PairSet::from_indices(&[(0, 1)], &[(0, 2)]);
        let v = evaluate(&[1.0, 0.0], &pairs, &cfg(ObjectiveKind::Count), &d).unwrap();
        assert_eq!(v.x, 0.0);
    }

    #[test]
    fn temperature_scales_log_u() {
        let d = data(&[&[1.0, 1.0], &[1.0, -1.0], &[1.0, 0.0], &[-1.0, 0.0]]);
        let pairs = PairSet::from_indices(&[(0, 1)], &[(2, 3)]);
        let c = ObjectiveConfig::new(ObjectiveKind::Count, 0.25).unwrap();
        let v = evaluate(&[1.0, 0.0], &pairs, &c, &d).unwrap();
        assert_eq!((v.x, v.log_u), (2.0, 8.0));
        assert!(ObjectiveConfig::new(ObjectiveKind::Count, 0.0).is_err());
        assert!(ObjectiveConfig::new(ObjectiveKind::Count, f64::NAN).is_err());
    }

    #[test]
    fn ratio_kinds_need_both_sets() {
        let d = data(&[&[1.0, 1.0], &[1.0, -1.0]]);
        let only_pos = PairSet::from_indices(&[(0, 1)], &[]);
        let only_neg = PairSet::from_indices(&[], &[(0, 1)]);
        for kind in [ObjectiveKind::Ratio, ObjectiveKind::CosineRatio] {
            assert!(matches!(
                evaluate(&[1.0, 0.0], &only_pos, &cfg(kind), &d),
                Err(Error::UndefinedRatio("negative"))
            ));
            assert!(matches!(
                evaluate(&[1.0, 0.0], &only_neg, &cfg(kind), &d),
                Err(Error::UndefinedRatio("positive"))
            ));
        }
        let empty = PairSet::default();
        assert_eq!(evaluate(&[1.0, 0.0], &empty, &cfg(ObjectiveKind::Count), &d).unwrap().x, 0.0);
        assert_eq!(evaluate(&[1.0, 0.0], &empty, &cfg(ObjectiveKind::Cosine), &d).unwrap().x, 0.0);
    }

    #[test]
    fn zero_vectors_rejected() {
        let d = data(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let pairs = PairSet::from_indices(&[(0, 1)], &[]);
        assert!(matches!(
            evaluate(&[1.0, 0.0], &pairs, &cfg(ObjectiveKind::Count), &d),
            Err(Error::InvalidRecord { index: 0, .. })
        ));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("cosine-ratio".parse::<ObjectiveKind>().unwrap(), ObjectiveKind::CosineRatio);
        assert_eq!("COUNT".parse::<ObjectiveKind>().unwrap(), ObjectiveKind::Count);
        assert!("energy".parse::<ObjectiveKind>().is_err());
    }

    mod props {
        use super::*;
        use crate::hashing::random_unit_vector;
        use proptest::prelude::*;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        fn instance() -> impl Strategy<Value = (LabeledDataset, PairSet, u64)> {
            (
                proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 4..12),
                any::<u64>(),
            )
                .prop_flat_map(|(vs, seed)| {
                    let n = vs.len();
                    let idx = proptest::collection::vec((0..n, 0..n), 1..20);
                    (Just(vs), idx.clone(), idx, Just(seed))
                })
                .prop_filter_map("zero vector", |(vs, pos, neg, seed)| {
                    if vs.iter().any(|v| vector::norm(v) == 0.0) {
                        return None;
                    }
                    let d = LabeledDataset::new(3, vs.into_iter().map(|v| (v, LabelSet::single("x")))).ok()?;
                    Some((d, PairSet::from_indices(&pos, &neg), seed))
                })
        }

        proptest! {
            #[test]
            fn count_is_invariant_under_negation((d, pairs, seed) in instance()) {
                let n = random_unit_vector(3, &mut ChaCha8Rng::seed_from_u64(seed));
                let neg: Vec<f64> = n.iter().map(|x| -x).collect();
                let c = cfg(ObjectiveKind::Count);
                prop_assert_eq!(evaluate(&n, &pairs, &c, &d).unwrap().x, evaluate(&neg, &pairs, &c, &d).unwrap().x);
            }

            #[test]
            fn count_maximum_iff_all_pairs_agree((d, pairs, seed) in instance()) {
                let n = random_unit_vector(3, &mut ChaCha8Rng::seed_from_u64(seed));
                let x = evaluate(&n, &pairs, &cfg(ObjectiveKind::Count), &d).unwrap().x;
                let all = pairs.positives.iter().all(|p| classify_pair(&n, p, &d) == Side::SameSide)
                    && pairs.negatives.iter().all(|p| classify_pair(&n, p, &d) == Side::Opposite);
                prop_assert_eq!(x == pairs.len() as f64, all);
                prop_assert!(x <= pairs.len() as f64);
            }

            #[test]
            fn cosine_kinds_are_scale_free((d, pairs, seed) in instance(), alpha in 0.01f64..100.0) {
                let n = random_unit_vector(3, &mut ChaCha8Rng::seed_from_u64(seed));
                let scaled = d.map_vectors(3, |v| Ok(v.iter().map(|x| x * alpha).collect())).unwrap();
                for kind in [ObjectiveKind::Cosine, ObjectiveKind::CosineRatio] {
                    let a = evaluate(&n, &pairs, &cfg(kind), &d).unwrap().x;
                    let b = evaluate(&n, &pairs, &cfg(kind), &scaled).unwrap().x;
                    prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
                }
            }

            #[test]
            fn values_stay_in_range((d, pairs, seed) in instance()) {
                let n = random_unit_vector(3, &mut ChaCha8Rng::seed_from_u64(seed));
                let r = evaluate(&n, &pairs, &cfg(ObjectiveKind::Ratio), &d).unwrap();
                prop_assert!((0.0..=2.0).contains(&r.x));
                let cr = evaluate(&n, &pairs, &cfg(ObjectiveKind::CosineRatio), &d).unwrap();
                prop_assert!(cr.x >= 0.0 && cr.x <= 4.0 + 1e-12);
                for kind in [ObjectiveKind::Count, ObjectiveKind::Cosine] {
                    prop_assert!(evaluate(&n, &pairs, &cfg(kind), &d).unwrap().log_u.is_finite());
                }
            }
        }
    }
}
