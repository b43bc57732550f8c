//! Labeled feature vectors.
//!
//! A record carries a dense feature vector and a non-empty set of opaque
//! labels. Two records are related ("share a label") when their label sets
//! intersect; whole-set equality is never used.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector;

/// Sorted, duplicate-free set of label identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LabelSet(Vec<String>);

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v: Vec<String> = labels.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        LabelSet(v)
    }

    pub fn single(label: impl Into<String>) -> Self {
        LabelSet(vec![label.into()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.binary_search_by(|l| l.as_str().cmp(label)).is_ok()
    }

    pub fn shares_label_with(&self, other: &LabelSet) -> bool {
        sorted_intersect(&self.0, &other.0)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(";"))
    }
}

/// True iff the two label sets intersect.
pub fn common_label(a: &LabelSet, b: &LabelSet) -> bool {
    a.shares_label_with(b)
}

fn sorted_intersect<T: Ord>(a: &[T], b: &[T]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// An ordered collection of `(vector, labels)` records of a common dimension.
///
/// Record index is the identity of a record and the tie-breaker for every
/// argmin/argmax in the crate. Labels are interned locally so that
/// same-label lookups do not touch strings.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<LabelSet>,
    label_ids: Vec<Vec<u32>>,
    members: Vec<Vec<usize>>,
    label_index: HashMap<String, u32>,
}

impl LabeledDataset {
    /// Builds a dataset, rejecting empty label sets, non-finite components
    /// and dimension mismatches.
    pub fn new<I>(dim: usize, records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<f64>, LabelSet)>,
    {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (index, (v, l)) in records.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::InvalidRecord {
                    index,
                    reason: format!("expected {dim} components, found {}", v.len()),
                });
            }
            if let Some(c) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidRecord {
                    index,
                    reason: format!("component {c} is not finite"),
                });
            }
            if l.is_empty() {
                return Err(Error::InvalidRecord {
                    index,
                    reason: "empty label set".into(),
                });
            }
            values.extend_from_slice(&v);
            labels.push(l);
        }
        Ok(Self::from_parts(dim, values, labels))
    }

    fn from_parts(dim: usize, values: Vec<f64>, labels: Vec<LabelSet>) -> Self {
        let mut label_index: HashMap<String, u32> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut label_ids = Vec::with_capacity(labels.len());
        for (i, set) in labels.iter().enumerate() {
            let mut ids: Vec<u32> = set
                .iter()
                .map(|name| {
                    let next = label_index.len() as u32;
                    let id = *label_index.entry(name.to_owned()).or_insert(next);
                    if id as usize == members.len() {
                        members.push(Vec::new());
                    }
                    members[id as usize].push(i);
                    id
                })
                .collect();
            ids.sort_unstable();
            label_ids.push(ids);
        }
        LabeledDataset {
            dim,
            values,
            labels,
            label_ids,
            members,
            label_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self, i: usize) -> &LabelSet {
        &self.labels[i]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Row-major `len × dim` storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn records(&self) -> impl Iterator<Item = (&[f64], &LabelSet)> {
        self.vectors().zip(self.labels.iter())
    }

    /// True iff records `i` and `j` share at least one label.
    pub fn share_label(&self, i: usize, j: usize) -> bool {
        sorted_intersect(&self.label_ids[i], &self.label_ids[j])
    }

    /// Indices of every record sharing a label with `i` (including `i`),
    /// ascending.
    pub fn same_label_records(&self, i: usize) -> Vec<usize> {
        self.records_matching_ids(&self.label_ids[i])
    }

    /// Indices of every record sharing a label with `labels`, ascending.
    /// Labels unknown to this dataset match nothing.
    pub fn records_sharing(&self, labels: &LabelSet) -> Vec<usize> {
        let ids: Vec<u32> = labels
            .iter()
            .filter_map(|l| self.label_index.get(l).copied())
            .collect();
        self.records_matching_ids(&ids)
    }

    fn records_matching_ids(&self, ids: &[u32]) -> Vec<usize> {
        match ids {
            [] => Vec::new(),
            [only] => self.members[*only as usize].clone(),
            _ => {
                let mut out: Vec<usize> = ids
                    .iter()
                    .flat_map(|&id| self.members[id as usize].iter().copied())
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            }
        }
    }

    /// Number of distinct labels in the dataset.
    pub fn label_count(&self) -> usize {
        self.members.len()
    }

    /// Applies `f` to every vector, keeping labels. `f` must return vectors
    /// of length `new_dim`.
    pub fn map_vectors<F>(&self, new_dim: usize, mut f: F) -> Result<LabeledDataset>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut values = Vec::with_capacity(self.len() * new_dim);
        for (index, v) in self.vectors().enumerate() {
            let out = f(v)?;
            if out.len() != new_dim {
                return Err(Error::InvalidRecord {
                    index,
                    reason: format!("mapped to {} components, expected {new_dim}", out.len()),
                });
            }
            values.extend_from_slice(&out);
        }
        Ok(Self::from_parts(new_dim, values, self.labels.clone()))
    }

    /// Fails if any record has a zero-norm vector, whose cosine with a
    /// normal would be undefined.
    pub fn ensure_nonzero_vectors(&self) -> Result<()> {
        match self.vectors().position(|v| vector::norm(v) == 0.0) {
            Some(index) => Err(Error::InvalidRecord {
                index,
                reason: "zero-norm feature vector".into(),
            }),
            None => Ok(()),
        }
    }
}
