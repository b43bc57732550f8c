//! Sign hashing against an arrangement of hyperplanes through the origin.
//!
//! Bit `i` of a code is 1 iff the vector has a strictly positive dot product
//! with normal `i`. Codes are packed little-endian into `u64` words: bit `i`
//! lives in word `i / 64` at position `i % 64`, and padding bits are zero.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{RngSeed, Stream};
use crate::vector;

/// Tolerance on `| ‖n‖ − 1 |` for every stored normal.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// `B` unit normal vectors in `N` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArrangementRepr", into = "ArrangementRepr")]
pub struct HyperplaneArrangement {
    dim: usize,
    normals: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ArrangementRepr {
    dim: usize,
    bits: usize,
    normals: Vec<Vec<f64>>,
}

impl TryFrom<ArrangementRepr> for HyperplaneArrangement {
    type Error = Error;

    fn try_from(r: ArrangementRepr) -> Result<Self> {
        if r.normals.len() != r.bits {
            return Err(Error::Format(format!(
                "arrangement declares {} bits but lists {} normals",
                r.bits,
                r.normals.len()
            )));
        }
        let arr = HyperplaneArrangement::from_normals(r.normals)?;
        if arr.dim != r.dim {
            return Err(Error::DimensionMismatch {
                expected: r.dim,
                found: arr.dim,
            });
        }
        Ok(arr)
    }
}

impl From<HyperplaneArrangement> for ArrangementRepr {
    fn from(a: HyperplaneArrangement) -> Self {
        ArrangementRepr {
            dim: a.dim,
            bits: a.bits(),
            normals: a.normals().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl HyperplaneArrangement {
    /// Validates that every normal has unit length and a common dimension
    /// of at least 2.
    pub fn from_normals(normals: Vec<Vec<f64>>) -> Result<Self> {
        let dim = normals.first().map(Vec::len).unwrap_or(0);
        if normals.is_empty() {
            return Err(Error::InvalidParameter("an arrangement needs at least one hyperplane".into()));
        }
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "hyperplane dimension must be at least 2, got {dim}"
            )));
        }
        let mut flat = Vec::with_capacity(dim * normals.len());
        for (i, n) in normals.iter().enumerate() {
            if n.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: n.len(),
                });
            }
            let len = vector::norm(n);
            if !len.is_finite() || (len - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidParameter(format!(
                    "normal {i} has norm {len}, expected 1"
                )));
            }
            flat.extend_from_slice(n);
        }
        Ok(HyperplaneArrangement { dim, normals: flat })
    }

    pub(crate) fn from_flat_unchecked(dim: usize, normals: Vec<f64>) -> Self {
        debug_assert!(dim >= 2 && !normals.is_empty() && normals.len().is_multiple_of(dim));
        HyperplaneArrangement { dim, normals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> usize {
        self.normals.len() / self.dim
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    pub fn normals(&self) -> impl Iterator<Item = &[f64]> {
        self.normals.chunks_exact(self.dim)
    }

    pub fn encode(&self, x: &[f64]) -> Result<BitCode> {
        encode(self, x)
    }
}

/// Hashes `x` into a `B`-bit code; bit `i` is set iff `⟨nᵢ, x⟩ > 0`.
pub fn encode(arr: &HyperplaneArrangement, x: &[f64]) -> Result<BitCode> {
    if x.len() != arr.dim {
        return Err(Error::DimensionMismatch {
            expected: arr.dim,
            found: x.len(),
        });
    }
    let bits = arr.bits();
    let mut words = vec![0u64; words_for(bits)];
    for (w, chunk) in words.iter_mut().zip(arr.normals.chunks(64 * arr.dim)) {
        for (j, n) in chunk.chunks_exact(arr.dim).enumerate() {
            if vector::dot(n, x) > 0.0 {
                *w |= 1u64 << j;
            }
        }
    }
    Ok(BitCode { bits, words })
}

/// Draws `bits` normals uniformly from the unit sphere in `dim` dimensions.
///
/// Normal `i` comes from its own stream derived from `(seed, i)`, the same
/// stream the trainer uses for its initial positions, so a trained model and
/// this baseline start from identical hyperplanes.
pub fn random_arrangement(dim: usize, bits: usize, seed: RngSeed) -> Result<HyperplaneArrangement> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "hyperplane dimension must be at least 2, got {dim}"
        )));
    }
    if bits == 0 {
        return Err(Error::InvalidParameter("bits must be at least 1".into()));
    }
    let mut normals = Vec::with_capacity(dim * bits);
    for i in 0..bits {
        let mut rng = seed.stream_rng(Stream::Initialization, i as u64, 0);
        normals.extend(random_unit_vector(dim, &mut rng));
    }
    Ok(HyperplaneArrangement { dim, normals })
}

/// Uniform draw from `S^(dim-1)`: normalized standard normal components.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if vector::normalize(&mut v) > 1e-12 {
            return v;
        }
    }
}

/// `|cos|` between every pair of normals; the diagonal is zero.
pub fn pairwise_cosine_matrix(arr: &HyperplaneArrangement) -> Vec<Vec<f64>> {
    let b = arr.bits();
    let mut m = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in (i + 1)..b {
            let c = vector::dot(arr.normal(i), arr.normal(j)).abs();
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    m
}

/// Mean of the off-diagonal entries of [`pairwise_cosine_matrix`].
pub fn mean_off_diagonal_cosine(arr: &HyperplaneArrangement) -> f64 {
    let b = arr.bits();
    if b < 2 {
        return 0.0;
    }
    let m = pairwise_cosine_matrix(arr);
    let total: f64 = m.iter().flatten().sum();
    total / (b * (b - 1)) as f64
}

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// A packed binary code of fixed length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitCode {
    bits: usize,
    words: Vec<u64>,
}

impl BitCode {
    pub fn zeros(bits: usize) -> Self {
        BitCode {
            bits,
            words: vec![0; words_for(bits)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut code = BitCode::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                code.set(i);
            }
        }
        code
    }

    /// Builds a code from packed words, rejecting non-zero padding.
    pub fn from_words(bits: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(bits) {
            return Err(Error::Format(format!(
                "{bits}-bit code needs {} words, got {}",
                words_for(bits),
                words.len()
            )));
        }
        let rem = bits % 64;
        if rem != 0 && words[words.len() - 1] >> rem != 0 {
            return Err(Error::Format("padding bits must be zero".into()));
        }
        Ok(BitCode { bits, words })
    }

    pub fn len(&self) -> usize {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.bits, "bit {i} out of range for {}-bit code", self.bits);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.bits, "bit {i} out of range for {}-bit code", self.bits);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

/// Number of differing bits, by XOR and popcount over packed words.
pub fn hamming(a: &BitCode, b: &BitCode) -> Result<u32> {
    if a.bits != b.bits {
        return Err(Error::CodeLengthMismatch {
            left: a.bits,
            right: b.bits,
        });
    }
    Ok(hamming_words(&a.words, &b.words))
}

#[inline]
pub(crate) fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}
