//! Feature vectors, Jensen-Shannon divergence, centroids and distances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sax::MotifTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Whole-book SAX motif frequencies.
    SaxMotifs,
    /// The seven scalar dynamics.
    Scalars,
    /// Raw (not z-normalized) PAA vector.
    PaaVector,
    /// Motif frequencies aggregated over sliding windows.
    WindowMotifs,
    /// Scalars and PAA (standardized) concatenated with weighted motif frequencies.
    Combined,
    /// Mean and spread of per-window least-squares slopes.
    WindowSlopes,
}

impl FeatureKind {
    pub fn is_distribution(self) -> bool {
        matches!(self, FeatureKind::SaxMotifs | FeatureKind::WindowMotifs)
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureKind::SaxMotifs => "sax_motifs",
            FeatureKind::Scalars => "scalars",
            FeatureKind::PaaVector => "paa_vector",
            FeatureKind::WindowMotifs => "window_motifs",
            FeatureKind::Combined => "combined",
            FeatureKind::WindowSlopes => "window_slopes",
        }
    }
}

/// Probability distribution over motif indices, stored sparse and sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseDist {
    idx: Vec<u64>,
    p: Vec<f64>,
}

impl SparseDist {
    /// Normalize non-negative weights to sum 1. Zero entries are dropped.
    pub fn from_weights(mut pairs: Vec<(u64, f64)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let mut idx = Vec::with_capacity(pairs.len());
        let mut p: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Invalid(format!("negative or non-finite weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            if idx.last() == Some(&i) {
                *p.last_mut().unwrap() += w;
            } else {
                idx.push(i);
                p.push(w);
            }
        }
        let total: f64 = p.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Invalid("distribution sums to zero".into()));
        }
        p.iter_mut().for_each(|v| *v /= total);
        Ok(SparseDist { idx, p })
    }

    pub fn from_motifs(table: &MotifTable) -> Result<Self> {
        Self::from_weights(table.counts.iter().map(|(&i, &c)| (i, c as f64)).collect())
    }

    pub fn from_dense(p: &[f64]) -> Result<Self> {
        Self::from_weights(p.iter().enumerate().map(|(i, &v)| (i as u64, v)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.idx.iter().copied().zip(self.p.iter().copied())
    }

    pub fn support(&self) -> usize {
        self.idx.len()
    }

    pub fn get(&self, i: u64) -> f64 {
        self.idx.binary_search(&i).map_or(0.0, |k| self.p[k])
    }
}

/// `a log2(a / m)` with the `0 log 0 = 0` convention.
fn kl_term(a: f64, m: f64) -> f64 {
    if a > 0.0 {
        a * (a / m).log2()
    } else {
        0.0
    }
}

/// Base-2 Jensen-Shannon divergence, in `[0, 1]`.
pub fn jsd(p: &SparseDist, q: &SparseDist) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < p.idx.len() || j < q.idx.len() {
        let (a, b) = match (p.idx.get(i), q.idx.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
                (p.p[i - 1], q.p[j - 1])
            }
            (Some(x), Some(y)) if x < y => {
                i += 1;
                (p.p[i - 1], 0.0)
            }
            (Some(_), None) => {
                i += 1;
                (p.p[i - 1], 0.0)
            }
            _ => {
                j += 1;
                (0.0, q.p[j - 1])
            }
        };
        let m = 0.5 * (a + b);
        acc += kl_term(a, m) + kl_term(b, m);
    }
    (0.5 * acc).clamp(0.0, 1.0)
}

/// JSD of two dense non-negative vectors, each renormalized to sum 1.
pub fn jsd_dense(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Invalid("distributions differ in length".into()));
    }
    Ok(jsd(&SparseDist::from_dense(p)?, &SparseDist::from_dense(q)?))
}

/// One book's features in whatever form its kind uses.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureVector {
    Dist(SparseDist),
    Dense(Vec<f64>),
    Mixed { dense: Vec<f64>, dist: SparseDist },
}

fn mean_dist(items: &[&SparseDist]) -> Result<SparseDist> {
    let mut pairs: Vec<(u64, f64)> = Vec::with_capacity(items.iter().map(|d| d.support()).sum());
    for d in items {
        pairs.extend(d.iter());
    }
    // equal weights; renormalization inside from_weights divides by the count
    SparseDist::from_weights(pairs)
}

fn mean_dense(items: &[&[f64]]) -> Result<Vec<f64>> {
    let dim = items[0].len();
    if items.iter().any(|v| v.len() != dim) {
        return Err(Error::Invalid("dense vectors differ in length".into()));
    }
    let mut out = vec![0.0; dim];
    for v in items {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x;
        }
    }
    let n = items.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

/// Arithmetic mean; distributions come back normalized.
pub fn centroid(items: &[&FeatureVector]) -> Result<FeatureVector> {
    let first = items
        .first()
        .ok_or_else(|| Error::Invalid("centroid of an empty set".into()))?;
    match first {
        FeatureVector::Dist(_) => {
            let ds = items
                .iter()
                .map(|v| match v {
                    FeatureVector::Dist(d) => Ok(d),
                    _ => Err(kind_mismatch()),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FeatureVector::Dist(mean_dist(&ds)?))
        }
        FeatureVector::Dense(_) => {
            let vs = items
                .iter()
                .map(|v| match v {
                    FeatureVector::Dense(d) => Ok(d.as_slice()),
                    _ => Err(kind_mismatch()),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FeatureVector::Dense(mean_dense(&vs)?))
        }
        FeatureVector::Mixed { .. } => {
            let mut dense = Vec::with_capacity(items.len());
            let mut dists = Vec::with_capacity(items.len());
            for v in items {
                match v {
                    FeatureVector::Mixed { dense: d, dist } => {
                        dense.push(d.as_slice());
                        dists.push(dist);
                    }
                    _ => return Err(kind_mismatch()),
                }
            }
            Ok(FeatureVector::Mixed {
                dense: mean_dense(&dense)?,
                dist: mean_dist(&dists)?,
            })
        }
    }
}

fn kind_mismatch() -> Error {
    Error::Invalid("feature kind mismatch".into())
}

fn sq_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn sq_euclid_sparse(p: &SparseDist, q: &SparseDist) -> f64 {
    let mut all: BTreeMap<u64, f64> = p.iter().collect();
    for (i, v) in q.iter() {
        *all.entry(i).or_default() -= v;
    }
    all.values().map(|d| d * d).sum()
}

/// Distance between two books or centroids: JSD for distributions,
/// Euclidean for (already standardized) dense vectors, and for mixed vectors
/// Euclidean over the dense part concatenated with `weight` times the
/// probabilities.
pub fn distance(a: &FeatureVector, b: &FeatureVector, weight: f64) -> Result<f64> {
    match (a, b) {
        (FeatureVector::Dist(p), FeatureVector::Dist(q)) => Ok(jsd(p, q)),
        (FeatureVector::Dense(x), FeatureVector::Dense(y)) if x.len() == y.len() => {
            Ok(sq_euclid(x, y).sqrt())
        }
        (
            FeatureVector::Mixed { dense: x, dist: p },
            FeatureVector::Mixed { dense: y, dist: q },
        ) if x.len() == y.len() => {
            Ok((sq_euclid(x, y) + weight * weight * sq_euclid_sparse(p, q)).sqrt())
        }
        _ => Err(kind_mismatch()),
    }
}

/// Per-dimension corpus mean and population std used to standardize dense
/// features. Constant dimensions get std 1 so they contribute nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Invalid("no rows to standardize".into()))?;
        let dim = first.len();
        if rows.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Invalid("ragged or non-finite dense features".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Ok(Standardization { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Raw per-book features before standardization.
#[derive(Debug, Clone)]
pub enum RawFeature {
    Motifs(MotifTable),
    Dense(Vec<f64>),
    Mixed { dense: Vec<f64>, motifs: MotifTable },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BookFeature {
    pub book_id: String,
    pub author_id: String,
    pub vector: FeatureVector,
}

/// Features of one kind for a set of books, sorted by `(author_id, book_id)`.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub kind: FeatureKind,
    books: Vec<BookFeature>,
    pub standardization: Option<Standardization>,
    pub combined_weight: f64,
}

impl FeatureSet {
    /// Build from `(book_id, author_id, features)`. Dense parts are
    /// standardized with corpus-wide parameters fitted here.
    pub fn build(
        kind: FeatureKind,
        items: Vec<(String, String, RawFeature)>,
        combined_weight: f64,
    ) -> Result<Self> {
        let mut items = items;
        items.sort_by(|a, b| (&a.1, &a.0).cmp(&(&b.1, &b.0)));
        if items.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Invalid("duplicate book in feature set".into()));
        }
        let dense_rows: Vec<Vec<f64>> = items
            .iter()
            .filter_map(|(_, _, f)| match f {
                RawFeature::Dense(d) | RawFeature::Mixed { dense: d, .. } => Some(d.clone()),
                RawFeature::Motifs(_) => None,
            })
            .collect();
        let standardization = if dense_rows.is_empty() {
            None
        } else {
            Some(Standardization::fit(&dense_rows)?)
        };
        let mut books = Vec::with_capacity(items.len());
        for (book_id, author_id, f) in items {
            let vector = match (f, &standardization) {
                (RawFeature::Motifs(t), _) => FeatureVector::Dist(SparseDist::from_motifs(&t)?),
                (RawFeature::Dense(d), Some(s)) => FeatureVector::Dense(s.apply(&d)),
                (RawFeature::Mixed { dense, motifs }, Some(s)) => FeatureVector::Mixed {
                    dense: s.apply(&dense),
                    dist: SparseDist::from_motifs(&motifs)?,
                },
                _ => unreachable!("standardization fitted whenever dense rows exist"),
            };
            books.push(BookFeature {
                book_id,
                author_id,
                vector,
            });
        }
        let first = books.first().map(|b| std::mem::discriminant(&b.vector));
        if books.iter().any(|b| Some(std::mem::discriminant(&b.vector)) != first) {
            return Err(kind_mismatch());
        }
        Ok(FeatureSet {
            kind,
            books,
            standardization,
            combined_weight,
        })
    }

    pub fn books(&self) -> &[BookFeature] {
        &self.books
    }

    pub fn len(&self) -> usize {
        self.books.len()
    }

    pub fn is_empty(&self) -> bool {
        self.books.is_empty()
    }

    /// Book indices per author, authors ascending.
    pub fn authors(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, b) in self.books.iter().enumerate() {
            map.entry(b.author_id.as_str()).or_default().push(i);
        }
        map
    }

    pub fn vector(&self, i: usize) -> &FeatureVector {
        &self.books[i].vector
    }

    pub fn centroid_of(&self, indices: &[usize]) -> Result<FeatureVector> {
        let vs: Vec<&FeatureVector> = indices.iter().map(|&i| &self.books[i].vector).collect();
        centroid(&vs)
    }

    pub fn distance(&self, a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
        distance(a, b, self.combined_weight)
    }

    /// A subset keeping the original standardization.
    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        FeatureSet {
            kind: self.kind,
            books: idx.into_iter().map(|i| self.books[i].clone()).collect(),
            standardization: self.standardization.clone(),
            combined_weight: self.combined_weight,
        }
    }
}
