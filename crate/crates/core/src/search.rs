//! Exhaustive linear-scan search and recall/precision evaluation.
//!
//! Results are ordered by ascending distance with ties broken by ascending
//! record index. A query retrieves `k = ceil(rate × searched)` records;
//! a retrieved record is relevant when it shares a label with the query.
//! Per-query precision and recall are macro-averaged, skipping queries with
//! no relevant record in the searched set.

use std::io::Write;

use rayon::prelude::*;

use crate::data::{LabelSet, LabeledDataset};
use crate::error::{Error, Result};
use crate::hashing::{hamming_words, words_for, BitCode, HyperplaneArrangement};
use crate::vector::squared_distance;

/// Codes for every record of a searched dataset, packed contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTable {
    bits: usize,
    stride: usize,
    words: Vec<u64>,
}

impl CodeTable {
    pub fn new(bits: usize) -> Self {
        CodeTable {
            bits,
            stride: words_for(bits),
            words: Vec::new(),
        }
    }

    pub fn from_codes(bits: usize, codes: &[BitCode]) -> Result<Self> {
        let mut t = CodeTable::new(bits);
        for c in codes {
            t.push(c)?;
        }
        Ok(t)
    }

    /// Encodes every record of `data`, in order.
    pub fn encode_dataset(arr: &HyperplaneArrangement, data: &LabeledDataset) -> Result<Self> {
        if data.dim() != arr.dim() {
            return Err(Error::DimensionMismatch {
                expected: arr.dim(),
                found: data.dim(),
            });
        }
        let codes: Vec<BitCode> = data
            .vectors()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|v| arr.encode(v))
            .collect::<Result<_>>()?;
        Self::from_codes(arr.bits(), &codes)
    }

    pub fn push(&mut self, code: &BitCode) -> Result<()> {
        if code.len() != self.bits {
            return Err(Error::CodeLengthMismatch {
                left: self.bits,
                right: code.len(),
            });
        }
        self.words.extend_from_slice(code.words());
        Ok(())
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.words.len().checked_div(self.stride).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self, i: usize) -> &[u64] {
        &self.words[i * self.stride..(i + 1) * self.stride]
    }

    pub fn code(&self, i: usize) -> BitCode {
        BitCode::from_words(self.bits, self.words(i).to_vec()).expect("table holds valid codes")
    }

    fn check_query(&self, query: &BitCode) -> Result<()> {
        if query.len() != self.bits {
            return Err(Error::CodeLengthMismatch {
                left: self.bits,
                right: query.len(),
            });
        }
        Ok(())
    }

    fn distances(&self, query: &[u64]) -> Vec<u32> {
        self.words
            .chunks_exact(self.stride.max(1))
            .map(|w| hamming_words(w, query))
            .collect()
    }
}

fn check_k(k: usize, len: usize) -> Result<()> {
    if k == 0 || k > len {
        Err(Error::KOutOfRange { k, len })
    } else {
        Ok(())
    }
}

/// The `k` smallest keys, ordered by key then index.
fn smallest_k<K: Copy, F: Fn(&K, &K) -> std::cmp::Ordering>(keys: &[K], k: usize, cmp: F) -> Vec<usize> {
    let order = |a: &usize, b: &usize| cmp(&keys[*a], &keys[*b]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k, order);
        idx.truncate(k);
    }
    idx.sort_unstable_by(order);
    idx
}

pub fn top_k_by_hamming(table: &CodeTable, query: &BitCode, k: usize) -> Result<Vec<usize>> {
    table.check_query(query)?;
    check_k(k, table.len())?;
    Ok(smallest_k(&table.distances(query.words()), k, u32::cmp))
}

pub fn top_k_by_l2(data: &LabeledDataset, query: &[f64], k: usize) -> Result<Vec<usize>> {
    if query.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: query.len(),
        });
    }
    check_k(k, data.len())?;
    let keys: Vec<f64> = data.vectors().map(|v| squared_distance(v, query)).collect();
    Ok(smallest_k(&keys, k, f64::total_cmp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryMetrics {
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall of one result list, or `None` when no searched
/// record shares a label with the query.
pub fn evaluate_query(retrieved: &[usize], query_labels: &LabelSet, searched: &LabeledDataset) -> Option<QueryMetrics> {
    let relevant = searched.records_sharing(query_labels);
    if relevant.is_empty() || retrieved.is_empty() {
        return None;
    }
    let hits = retrieved
        .iter()
        .filter(|&&i| relevant.binary_search(&i).is_ok())
        .count() as f64;
    Some(QueryMetrics {
        precision: hits / retrieved.len() as f64,
        recall: hits / relevant.len() as f64,
    })
}

/// Number of records retrieved at acquisition `rate` out of `searched`.
pub fn retrieval_count(rate: f64, searched: usize) -> usize {
    let raw = rate * searched as f64;
    // 0.1 × 300 is 30.000000000000004 in binary floating point.
    let k = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, searched.max(1))
}

/// The default acquisition grid: 0.01..=0.1 in steps of 0.01, then
/// 0.2..=1.0 in steps of 0.1.
pub fn default_acquisition_grid() -> Vec<f64> {
    (1..=10)
        .map(|i| i as f64 / 100.0)
        .chain((2..=10).map(|i| i as f64 / 10.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub acquisition: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub points: Vec<EvalPoint>,
    pub evaluated_queries: usize,
    /// Queries with no relevant record in the searched set.
    pub excluded_queries: usize,
}

impl Curve {
    pub fn at(&self, acquisition: f64) -> Option<&EvalPoint> {
        self.points.iter().find(|p| (p.acquisition - acquisition).abs() < 1e-12)
    }
}

/// A way to rank the whole searched set for each query.
pub trait Ranker: Sync {
    fn searched_len(&self) -> usize;
    fn query_len(&self) -> usize;
    /// All searched indices in ascending distance, ties by index.
    fn rank(&self, query: usize) -> Vec<usize>;
}

pub struct HammingRanker<'a> {
    pub table: &'a CodeTable,
    pub queries: &'a CodeTable,
}

impl<'a> HammingRanker<'a> {
    pub fn new(table: &'a CodeTable, queries: &'a CodeTable) -> Result<Self> {
        if table.bits() != queries.bits() {
            return Err(Error::CodeLengthMismatch {
                left: table.bits(),
                right: queries.bits(),
            });
        }
        Ok(HammingRanker { table, queries })
    }
}

impl Ranker for HammingRanker<'_> {
    fn searched_len(&self) -> usize {
        self.table.len()
    }

    fn query_len(&self) -> usize {
        self.queries.len()
    }

    fn rank(&self, query: usize) -> Vec<usize> {
        let d = self.table.distances(self.queries.words(query));
        // Counting sort by distance keeps index order within each bucket.
        let mut buckets = vec![0usize; self.table.bits() + 2];
        for &x in &d {
            buckets[x as usize + 1] += 1;
        }
        for i in 1..buckets.len() {
            buckets[i] += buckets[i - 1];
        }
        let mut out = vec![0; d.len()];
        for (i, &x) in d.iter().enumerate() {
            out[buckets[x as usize]] = i;
            buckets[x as usize] += 1;
        }
        out
    }
}

pub struct L2Ranker<'a> {
    pub searched: &'a LabeledDataset,
    pub queries: &'a LabeledDataset,
}

impl<'a> L2Ranker<'a> {
    pub fn new(searched: &'a LabeledDataset, queries: &'a LabeledDataset) -> Result<Self> {
        if searched.dim() != queries.dim() {
            return Err(Error::DimensionMismatch {
                expected: searched.dim(),
                found: queries.dim(),
            });
        }
        Ok(L2Ranker { searched, queries })
    }
}

impl Ranker for L2Ranker<'_> {
    fn searched_len(&self) -> usize {
        self.searched.len()
    }

    fn query_len(&self) -> usize {
        self.queries.len()
    }

    fn rank(&self, query: usize) -> Vec<usize> {
        let q = self.queries.vector(query);
        let keys: Vec<f64> = self.searched.vectors().map(|v| squared_distance(v, q)).collect();
        let mut idx: Vec<usize> = (0..keys.len()).collect();
        idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
        idx
    }
}

/// Macro-averaged precision and recall at each acquisition rate.
///
/// `searched` and `queries` supply labels and must be index-aligned with the
/// ranker.
pub fn recall_precision_curve(
    ranker: &dyn Ranker,
    searched: &LabeledDataset,
    queries: &LabeledDataset,
    grid: &[f64],
) -> Result<Curve> {
    if queries.is_empty() || ranker.query_len() == 0 {
        return Err(Error::InvalidParameter("empty query set".into()));
    }
    if ranker.query_len() != queries.len() || ranker.searched_len() != searched.len() {
        return Err(Error::InvalidParameter("ranker and datasets are not aligned".into()));
    }
    if searched.is_empty() {
        return Err(Error::InvalidParameter("empty searched set".into()));
    }
    if let Some(r) = grid.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::InvalidParameter(format!("acquisition rate {r} not in (0, 1]")));
    }
    let n = searched.len();
    let ks: Vec<usize> = grid.iter().map(|&r| retrieval_count(r, n)).collect();

    // Per query: (precision, recall) at each grid point, or None if excluded.
    let per_query: Vec<Option<Vec<(f64, f64)>>> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let relevant = searched.records_sharing(queries.labels(q));
            if relevant.is_empty() {
                return None;
            }
            let mut is_rel = vec![false; n];
            relevant.iter().for_each(|&i| is_rel[i] = true);
            let ranking = ranker.rank(q);
            let mut prefix_hits = Vec::with_capacity(n + 1);
            prefix_hits.push(0usize);
            for &i in &ranking {
                prefix_hits.push(prefix_hits.last().unwrap() + is_rel[i] as usize);
            }
            Some(
                ks.iter()
                    .map(|&k| {
                        let hits = prefix_hits[k] as f64;
                        (hits / k as f64, hits / relevant.len() as f64)
                    })
                    .collect(),
            )
        })
        .collect();

    let evaluated: Vec<&Vec<(f64, f64)>> = per_query.iter().flatten().collect();
    let excluded = per_query.len() - evaluated.len();
    let m = evaluated.len().max(1) as f64;
    let points = grid
        .iter()
        .enumerate()
        .map(|(g, &acquisition)| EvalPoint {
            acquisition,
            precision: evaluated.iter().map(|v| v[g].0).sum::<f64>() / m,
            recall: evaluated.iter().map(|v| v[g].1).sum::<f64>() / m,
        })
        .collect();
    Ok(Curve {
        points,
        evaluated_queries: evaluated.len(),
        excluded_queries: excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPoint {
    pub acquisition: f64,
    /// `None` where the baseline precision is zero.
    pub precision_ratio: Option<f64>,
    pub recall_ratio: Option<f64>,
}

/// Elementwise `method / baseline` on aligned grids.
pub fn scaled_metrics(method: &[EvalPoint], baseline: &[EvalPoint]) -> Result<Vec<ScaledPoint>> {
    if method.len() != baseline.len() {
        return Err(Error::InvalidParameter(format!(
            "grids differ in length: {} vs {}",
            method.len(),
            baseline.len()
        )));
    }
    let ratio = |a: f64, b: f64| if b == 0.0 { None } else { Some(a / b) };
    method
        .iter()
        .zip(baseline)
        .map(|(m, b)| {
            if (m.acquisition - b.acquisition).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "acquisition grids differ: {} vs {}",
                    m.acquisition, b.acquisition
                )));
            }
            Ok(ScaledPoint {
                acquisition: m.acquisition,
                precision_ratio: ratio(m.precision, b.precision),
                recall_ratio: ratio(m.recall, b.recall),
            })
        })
        .collect()
}

/// `acquisition,precision,recall,method`
pub fn write_curves_csv<W: Write>(mut w: W, curves: &[(&str, &Curve)]) -> Result<()> {
    writeln!(w, "acquisition,precision,recall,method")?;
    for (id, c) in curves {
        for p in &c.points {
            writeln!(w, "{},{},{},{id}", p.acquisition, p.precision, p.recall)?;
        }
    }
    Ok(())
}

/// `acquisition,precision_ratio,recall_ratio,method`; undefined ratios are
/// written as `undefined`.
pub fn write_scaled_csv<W: Write>(mut w: W, rows: &[(&str, &[ScaledPoint])]) -> Result<()> {
    let cell = |r: Option<f64>| r.map_or_else(|| "undefined".to_string(), |x| x.to_string());
    writeln!(w, "acquisition,precision_ratio,recall_ratio,method")?;
    for (id, pts) in rows {
        for p in pts.iter() {
            writeln!(
                w,
                "{},{},{},{id}",
                p.acquisition,
                cell(p.precision_ratio),
                cell(p.recall_ratio)
            )?;
        }
    }
    Ok(())
}
