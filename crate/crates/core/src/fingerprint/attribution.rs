//! Nearest-centroid attribution with the held-out book removed from its own
//! author's centroid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FeatureSet, FeatureVector};
use crate::error::{Error, Result};

pub const DEFAULT_TOPK: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookAttribution {
    pub book_id: String,
    pub author_id: String,
    /// 1-based rank of the true author among all candidate centroids.
    pub rank: usize,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub n_books: usize,
    pub n_authors: usize,
    pub k: usize,
    pub top1: f64,
    pub topk: f64,
    pub chance_level: f64,
    pub times_chance: f64,
    /// Authors left out of the candidate set because they have one book.
    pub excluded_authors: Vec<String>,
    pub books: Vec<BookAttribution>,
}

impl AttributionReport {
    /// Fraction of books whose true author ranks within the first `k`.
    pub fn accuracy_at(&self, k: usize) -> f64 {
        if self.books.is_empty() {
            return 0.0;
        }
        self.books.iter().filter(|b| b.rank <= k).count() as f64 / self.books.len() as f64
    }
}

/// Rank every book's true author among all author centroids.
///
/// Ties in distance are broken by ascending `author_id`.
pub fn attribute_all(set: &FeatureSet, topk: usize) -> Result<AttributionReport> {
    let authors = set.authors();
    let mut excluded = Vec::new();
    let mut candidates: Vec<(&str, &Vec<usize>)> = Vec::new();
    for (a, books) in &authors {
        if books.len() < 2 {
            log::warn!("author {a} has a single book; excluded from attribution");
            excluded.push(a.to_string());
        } else {
            candidates.push((a, books));
        }
    }
    if candidates.len() < 2 {
        return Err(Error::Invalid(format!(
            "attribution needs at least 2 authors with 2+ books, found {}",
            candidates.len()
        )));
    }
    if topk == 0 {
        return Err(Error::Config("top-k must be positive".into()));
    }
    let centroids: Vec<FeatureVector> = candidates
        .iter()
        .map(|(_, books)| set.centroid_of(books))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = candidates
        .iter()
        .enumerate()
        .flat_map(|(ai, (_, books))| books.iter().map(move |&b| (ai, b)))
        .collect();

    let books: Vec<BookAttribution> = jobs
        .par_iter()
        .map(|&(ai, b)| -> Result<BookAttribution> {
            let own_rest: Vec<usize> = candidates[ai].1.iter().copied().filter(|&x| x != b).collect();
            let own_centroid = set.centroid_of(&own_rest)?;
            let v = set.vector(b);
            let mut dists = Vec::with_capacity(candidates.len());
            for (ci, c) in centroids.iter().enumerate() {
                let target = if ci == ai { &own_centroid } else { c };
                dists.push(set.distance(v, target)?);
            }
            let own = dists[ai];
            // candidates are in ascending author order, so index order breaks ties
            let rank = 1 + dists
                .iter()
                .enumerate()
                .filter(|&(ci, &d)| d < own || (d == own && ci < ai))
                .count();
            let best = dists
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(&y.0)))
                .map(|(i, _)| i)
                .unwrap();
            Ok(BookAttribution {
                book_id: set.books()[b].book_id.clone(),
                author_id: candidates[ai].0.to_string(),
                rank,
                predicted: candidates[best].0.to_string(),
            })
        })
        .collect::<Result<_>>()?;

    let n_authors = candidates.len();
    let mut report = AttributionReport {
        n_books: books.len(),
        n_authors,
        k: topk,
        top1: 0.0,
        topk: 0.0,
        chance_level: 1.0 / n_authors as f64,
        times_chance: 0.0,
        excluded_authors: excluded,
        books,
    };
    report.top1 = report.accuracy_at(1);
    report.topk = report.accuracy_at(topk);
    report.times_chance = report.top1 * n_authors as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::features::{FeatureKind, RawFeature};

    fn dense_set(rows: &[(&str, &str, Vec<f64>)]) -> FeatureSet {
        let items = rows
            .iter()
            .map(|(b, a, v)| (b.to_string(), a.to_string(), RawFeature::Dense(v.clone())))
            .collect();
        FeatureSet::build(FeatureKind::Scalars, items, 1.0).unwrap()
    }

    #[test]
    fn perfect_separation() {
        let mut rows = Vec::new();
        for (a, x) in [("a", 0.0), ("b", 5.0), ("c", 10.0)] {
            for i in 0..3 {
                rows.push((format!("{a}{i}"), a.to_string(), vec![x, -x]));
            }
        }
        let rows: Vec<(&str, &str, Vec<f64>)> =
            rows.iter().map(|(b, a, v)| (b.as_str(), a.as_str(), v.clone())).collect();
        let r = attribute_all(&dense_set(&rows), 5).unwrap();
        assert_eq!(r.top1, 1.0);
        assert_eq!(r.n_authors, 3);
        assert!((r.times_chance - 3.0).abs() < 1e-12);
        assert_eq!(r.topk, 1.0);
    }

    #[test]
    fn ties_go_to_first_author() {
        let rows = vec![
            ("a0", "a", vec![1.0]),
            ("a1", "a", vec![1.0]),
            ("b0", "b", vec![1.0]),
            ("b1", "b", vec![1.0]),
            ("c0", "c", vec![1.0]),
            ("c1", "c", vec![1.0]),
        ];
        let r = attribute_all(&dense_set(&rows), 2).unwrap();
        assert!(r.books.iter().all(|b| b.predicted == "a"));
        assert!((r.top1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.topk - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.accuracy_at(3), 1.0);
    }

    #[test]
    fn single_book_author_is_excluded() {
        let rows = vec![
            ("a0", "a", vec![0.0]),
            ("a1", "a", vec![0.1]),
            ("b0", "b", vec![3.0]),
            ("b1", "b", vec![3.1]),
            ("s0", "solo", vec![9.0]),
        ];
        let r = attribute_all(&dense_set(&rows), 1).unwrap();
        assert_eq!(r.excluded_authors, vec!["solo".to_string()]);
        assert_eq!(r.n_books, 4);
        let rows = vec![("a0", "a", vec![0.0]), ("a1", "a", vec![0.1]), ("b0", "b", vec![3.0])];
        assert!(attribute_all(&dense_set(&rows), 1).is_err());
    }
}
