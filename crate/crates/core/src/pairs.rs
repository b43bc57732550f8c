//! Positive/negative training pair sampling.
//!
//! Every strategy first draws an anchor `a` uniformly from the dataset.
//! `L_a` is the set of records sharing a label with `a`; its complement
//! holds the records sharing none. Distances are Euclidean, argmin/argmax
//! never return the anchor itself, and ties go to the lowest index.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::{RngSeed, Stream};
use crate::vector::squared_distance;

/// Anchor redraws before giving up on a dataset.
pub const MAX_ANCHOR_DRAWS: usize = 100;

/// Rejection attempts for uniform complement draws before falling back to an
/// explicit scan.
const COMPLEMENT_REJECTION_TRIES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
    pub kind: PairKind,
}

impl Pair {
    /// Checks the pair against `data`: distinct indices, and label overlap
    /// consistent with the kind.
    pub fn is_valid_for(&self, data: &LabeledDataset) -> bool {
        self.a != self.b
            && self.a < data.len()
            && self.b < data.len()
            && match self.kind {
                PairKind::Positive => data.share_label(self.a, self.b),
                PairKind::Negative => !data.share_label(self.a, self.b),
            }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet {
    pub positives: Vec<Pair>,
    pub negatives: Vec<Pair>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }

    pub fn from_indices(positives: &[(usize, usize)], negatives: &[(usize, usize)]) -> Self {
        let mk = |kind| move |&(a, b): &(usize, usize)| Pair { a, b, kind };
        PairSet {
            positives: positives.iter().map(mk(PairKind::Positive)).collect(),
            negatives: negatives.iter().map(mk(PairKind::Negative)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositiveMethod {
    Randomhit,
    Nearhit,
    Farhit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeMethod {
    Randommiss,
    Nearmiss,
    Boundarymiss,
}

impl fmt::Display for PositiveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PositiveMethod::Randomhit => "randomhit",
            PositiveMethod::Nearhit => "nearhit",
            PositiveMethod::Farhit => "farhit",
        })
    }
}

impl fmt::Display for NegativeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeMethod::Randommiss => "randommiss",
            NegativeMethod::Nearmiss => "nearmiss",
            NegativeMethod::Boundarymiss => "boundarymiss",
        })
    }
}

/// A positive/negative method combination. Only the named presets are
/// accepted by [`FromStr`]; any combination can be built directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplingMethods {
    pub positive: PositiveMethod,
    pub negative: NegativeMethod,
}

impl SamplingMethods {
    pub const PRESETS: [SamplingMethods; 5] = [
        SamplingMethods::new(PositiveMethod::Randomhit, NegativeMethod::Randommiss),
        SamplingMethods::new(PositiveMethod::Randomhit, NegativeMethod::Nearmiss),
        SamplingMethods::new(PositiveMethod::Nearhit, NegativeMethod::Nearmiss),
        SamplingMethods::new(PositiveMethod::Farhit, NegativeMethod::Nearmiss),
        SamplingMethods::new(PositiveMethod::Randomhit, NegativeMethod::Boundarymiss),
    ];

    pub const fn new(positive: PositiveMethod, negative: NegativeMethod) -> Self {
        SamplingMethods { positive, negative }
    }
}

impl fmt::Display for SamplingMethods {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.positive, self.negative)
    }
}

impl FromStr for SamplingMethods {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.to_ascii_lowercase();
        Self::PRESETS
            .iter()
            .find(|m| m.to_string() == wanted)
            .copied()
            .ok_or_else(|| {
                let names: Vec<String> = Self::PRESETS.iter().map(ToString::to_string).collect();
                Error::InvalidParameter(format!(
                    "unknown sampling preset {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub methods: SamplingMethods,
    pub positive_count: usize,
    pub negative_count: usize,
}

impl SamplingConfig {
    /// Splits `total` pairs evenly, giving any odd pair to the negatives.
    pub fn balanced(methods: SamplingMethods, total: usize) -> Self {
        SamplingConfig {
            methods,
            positive_count: total / 2,
            negative_count: total - total / 2,
        }
    }
}

/// Draws pairs from a borrowed dataset.
#[derive(Debug, Clone, Copy)]
pub struct PairSampler<'a> {
    data: &'a LabeledDataset,
}

impl<'a> PairSampler<'a> {
    pub fn new(data: &'a LabeledDataset) -> Self {
        PairSampler { data }
    }

    fn dist2(&self, i: usize, j: usize) -> f64 {
        squared_distance(self.data.vector(i), self.data.vector(j))
    }

    fn draw_anchor<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.data.is_empty() {
            None
        } else {
            Some(rng.random_range(0..self.data.len()))
        }
    }

    pub fn sample_positive<R: Rng + ?Sized>(&self, method: PositiveMethod, rng: &mut R) -> Result<Pair> {
        for _ in 0..MAX_ANCHOR_DRAWS {
            let a = self.draw_anchor(rng).ok_or(Error::NoPositivePair)?;
            if let Some(b) = self.positive_partner(a, method, rng) {
                return Ok(Pair {
                    a,
                    b,
                    kind: PairKind::Positive,
                });
            }
        }
        Err(Error::NoPositivePair)
    }

    /// Partner of anchor `a` by `method`, or `None` when `a` has no other
    /// record sharing a label.
    pub fn positive_partner<R: Rng + ?Sized>(
        &self,
        a: usize,
        method: PositiveMethod,
        rng: &mut R,
    ) -> Option<usize> {
        let mut candidates = self.data.same_label_records(a);
        candidates.retain(|&c| c != a);
        if candidates.is_empty() {
            return None;
        }
        Some(match method {
            PositiveMethod::Randomhit => candidates[rng.random_range(0..candidates.len())],
            PositiveMethod::Nearhit => self.arg_extreme(a, candidates.iter().copied(), false)?,
            PositiveMethod::Farhit => self.arg_extreme(a, candidates.iter().copied(), true)?,
        })
    }

    pub fn sample_negative<R: Rng + ?Sized>(&self, method: NegativeMethod, rng: &mut R) -> Result<Pair> {
        for _ in 0..MAX_ANCHOR_DRAWS {
            let a = self.draw_anchor(rng).ok_or(Error::NoNegativePair)?;
            if let Some((a2, b)) = self.negative_partner(a, method, rng) {
                return Ok(Pair {
                    a: a2,
                    b,
                    kind: PairKind::Negative,
                });
            }
        }
        Err(Error::NoNegativePair)
    }

    /// Negative pair built from anchor `a`, or `None` when every record
    /// shares a label with `a`. For Boundarymiss the first element is the
    /// replacement anchor.
    pub fn negative_partner<R: Rng + ?Sized>(
        &self,
        a: usize,
        method: NegativeMethod,
        rng: &mut R,
    ) -> Option<(usize, usize)> {
        match method {
            NegativeMethod::Randommiss => self.random_miss(a, rng).map(|b| (a, b)),
            NegativeMethod::Nearmiss => self.near_miss(a).map(|b| (a, b)),
            NegativeMethod::Boundarymiss => {
                let b = self.near_miss(a)?;
                // Records sharing a label with `a` but none with `b`. Never
                // empty since `a` itself qualifies; kept total anyway.
                let candidates = self
                    .data
                    .same_label_records(a)
                    .into_iter()
                    .filter(|&c| !self.data.share_label(c, b));
                match self.arg_extreme(b, candidates, false) {
                    Some(a2) => Some((a2, b)),
                    None => Some((a, b)),
                }
            }
        }
    }

    fn random_miss<R: Rng + ?Sized>(&self, a: usize, rng: &mut R) -> Option<usize> {
        let n = self.data.len();
        for _ in 0..COMPLEMENT_REJECTION_TRIES {
            let b = rng.random_range(0..n);
            if !self.data.share_label(a, b) {
                return Some(b);
            }
        }
        let complement: Vec<usize> = (0..n).filter(|&c| !self.data.share_label(a, c)).collect();
        if complement.is_empty() {
            None
        } else {
            Some(complement[rng.random_range(0..complement.len())])
        }
    }

    fn near_miss(&self, a: usize) -> Option<usize> {
        let candidates = (0..self.data.len()).filter(|&c| !self.data.share_label(a, c));
        self.arg_extreme(a, candidates, false)
    }

    /// Nearest (or farthest) candidate to `from`, excluding `from`; ties go
    /// to the first candidate in iteration order, which is ascending index.
    fn arg_extreme(&self, from: usize, candidates: impl Iterator<Item = usize>, farthest: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in candidates {
            if c == from {
                continue;
            }
            let d = self.dist2(from, c);
            let better = match best {
                None => true,
                Some((_, bd)) if farthest => d > bd,
                Some((_, bd)) => d < bd,
            };
            if better {
                best = Some((c, d));
            }
        }
        best.map(|(c, _)| c)
    }

    /// Draws `positive_count` positives then `negative_count` negatives,
    /// independently and with replacement, from one stream.
    pub fn sample_pair_set<R: Rng + ?Sized>(&self, cfg: &SamplingConfig, rng: &mut R) -> Result<PairSet> {
        let positives = (0..cfg.positive_count)
            .map(|_| self.sample_positive(cfg.methods.positive, rng))
            .collect::<Result<Vec<_>>>()?;
        let negatives = (0..cfg.negative_count)
            .map(|_| self.sample_negative(cfg.methods.negative, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(PairSet { positives, negatives })
    }
}

/// Samples a pair set from a stream derived from `seed`.
pub fn sample_pair_set(data: &LabeledDataset, cfg: &SamplingConfig, seed: RngSeed) -> Result<PairSet> {
    let mut rng = seed.stream_rng(Stream::Sampling, 0, 0);
    PairSampler::new(data).sample_pair_set(cfg, &mut rng)
}
