//! k-means over book profiles, silhouette-based choice of k, and
//! fingerprint tests repeated inside each cluster.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{
    fingerprint_authors, pct_significant, AuthorFingerprint, FeatureSet, FingerprintConfig,
};
use crate::seed;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_K_RANGE: std::ops::RangeInclusive<usize> = 2..=10;
pub const DEFAULT_WITHIN_MIN_BOOKS: usize = 3;
const FULL_SILHOUETTE_LIMIT: usize = 20_000;
const SILHOUETTE_SAMPLE: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index of each input vector, in input order.
    pub assignments: Vec<usize>,
    /// 0 when `k == 1`.
    pub silhouette: f64,
    pub per_cluster_counts: Vec<usize>,
    pub iterations: usize,
    /// Sum of squared distances to the assigned centroid after each
    /// assignment step.
    pub objective_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(v: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(v, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn distinct_count(vectors: &[Vec<f64>]) -> usize {
    vectors
        .iter()
        .map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

fn check_input(vectors: &[Vec<f64>]) -> Result<usize> {
    let dim = vectors.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::Invalid("clustering needs non-empty vectors".into()));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("clustering input".into()));
    }
    Ok(dim)
}

fn plus_plus_init<R: Rng>(vectors: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![vectors[rng.random_range(0..vectors.len())].clone()];
    let mut d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d2.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..vectors.len())
        };
        let c = vectors[pick].clone();
        for (d, v) in d2.iter_mut().zip(vectors) {
            *d = d.min(sq_dist(v, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's k-means with k-means++ seeding.
pub fn kmeans(
    vectors: &[Vec<f64>],
    k: usize,
    master_seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel> {
    let dim = check_input(vectors)?;
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let distinct = distinct_count(vectors);
    if distinct < k {
        return Err(Error::Invalid(format!("{distinct} distinct points for k = {k}")));
    }
    let mut rng = seed::stream(master_seed, &["kmeans++"]);
    let mut centroids = plus_plus_init(vectors, k, &mut rng);
    let mut assignments = vec![0; vectors.len()];
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let assigned: Vec<(usize, f64)> = vectors.par_iter().map(|v| nearest(v, &centroids)).collect();
        let objective: f64 = assigned.iter().map(|a| a.1).sum();
        if let Some(&prev) = history.last() {
            assert!(
                objective <= prev + 1e-9 * prev.abs().max(1.0),
                "k-means objective rose from {prev} to {objective}"
            );
        }
        history.push(objective);
        assignments = assigned.iter().map(|a| a.0).collect();

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assignments) {
            counts[a] += 1;
            sums[a].iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &n)| s.into_iter().map(|x| x / n.max(1) as f64).collect())
            .collect();
        for j in 0..k {
            if counts[j] == 0 {
                let far = assigned
                    .iter()
                    .enumerate()
                    .max_by(|x, y| x.1 .1.total_cmp(&y.1 .1).then(y.0.cmp(&x.0)))
                    .map(|(i, _)| i)
                    .unwrap();
                log::debug!("k-means: cluster {j} empty, re-seeded from point {far}");
                next[j] = vectors[far].clone();
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        let reseeded = counts.contains(&0);
        centroids = next;
        if shift < tol && !reseeded {
            break;
        }
    }
    // final assignment against the final centroids
    let assigned: Vec<(usize, f64)> = vectors.par_iter().map(|v| nearest(v, &centroids)).collect();
    let objective: f64 = assigned.iter().map(|a| a.1).sum();
    if let Some(&prev) = history.last() {
        assert!(objective <= prev + 1e-9 * prev.abs().max(1.0));
    }
    history.push(objective);
    assignments.iter_mut().zip(&assigned).for_each(|(a, n)| *a = n.0);

    let mut per_cluster_counts = vec![0; k];
    assignments.iter().for_each(|&a| per_cluster_counts[a] += 1);
    let silhouette = if k >= 2 && per_cluster_counts.iter().all(|&n| n > 0) {
        silhouette_score(vectors, &assignments, master_seed)?
    } else {
        0.0
    };
    Ok(ClusterModel {
        k,
        centroids,
        assignments,
        silhouette,
        per_cluster_counts,
        iterations,
        objective_history: history,
    })
}

/// Mean silhouette with Euclidean distance. Points alone in their cluster
/// score 0. Above 20,000 points a seeded sample of 2,000 is scored.
pub fn silhouette_score(vectors: &[Vec<f64>], assignments: &[usize], master_seed: u64) -> Result<f64> {
    if vectors.len() != assignments.len() {
        return Err(Error::Invalid("one assignment per vector required".into()));
    }
    check_input(vectors)?;
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    assignments.iter().for_each(|&a| sizes[a] += 1);
    if k < 2 || sizes.contains(&0) {
        return Err(Error::Invalid(
            "silhouette needs at least 2 clusters, none empty".into(),
        ));
    }
    let idx: Vec<usize> = if vectors.len() > FULL_SILHOUETTE_LIMIT {
        let mut rng = seed::stream(master_seed, &["silhouette"]);
        let mut s = index::sample(&mut rng, vectors.len(), SILHOUETTE_SAMPLE).into_vec();
        s.sort_unstable();
        s
    } else {
        (0..vectors.len()).collect()
    };
    let mut sizes = vec![0usize; k];
    idx.iter().for_each(|&i| sizes[assignments[i]] += 1);

    let scores: Vec<f64> = idx
        .par_iter()
        .map(|&i| {
            let own = assignments[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for &j in &idx {
                if j != i {
                    sums[assignments[j]] += sq_dist(&vectors[i], &vectors[j]).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Run k-means for every k in `k_range` that the data supports and keep the
/// best silhouette, preferring the smaller k on ties.
pub fn select_k(
    vectors: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    master_seed: u64,
) -> Result<ClusterModel> {
    check_input(vectors)?;
    if *k_range.start() < 2 || k_range.is_empty() {
        return Err(Error::Config(format!(
            "k range {}..={} must start at 2 or more",
            k_range.start(),
            k_range.end()
        )));
    }
    let distinct = distinct_count(vectors);
    let ks: Vec<usize> = k_range.filter(|&k| k <= distinct).collect();
    if ks.is_empty() {
        return Err(Error::Invalid(format!(
            "{distinct} distinct point(s); cannot form 2 clusters"
        )));
    }
    let models = ks
        .par_iter()
        .map(|&k| {
            let s = seed::derive(master_seed, &["select_k", &k.to_string()]);
            kmeans(vectors, k, s, DEFAULT_MAX_ITER, DEFAULT_TOL)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<ClusterModel> = None;
    for m in models {
        log::info!("k = {}: silhouette {:.4}", m.k, m.silhouette);
        if best.as_ref().is_none_or(|b| m.silhouette > b.silhouette) {
            best = Some(m);
        }
    }
    Ok(best.expect("at least one k scanned"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub index: usize,
    pub n_books: usize,
    pub n_qualifying_authors: usize,
    /// `None` when the cluster was skipped.
    pub pct_significant: Option<f64>,
    pub centroid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub authors: Vec<AuthorFingerprint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub silhouette: f64,
    pub clusters: Vec<ClusterSummary>,
    /// Share of significant tests over every tested (cluster, author) pair.
    pub pooled_pct_significant: f64,
    pub n_tested: usize,
}

/// Repeat the fingerprint test inside each cluster.
///
/// `book_ids[i]` is the book behind `model.assignments[i]`. Within a
/// cluster only authors with at least `config.min_books` books there are
/// tested, and null draws come only from other authors' books in the same
/// cluster. Clusters with fewer than two such authors are skipped.
pub fn within_cluster_fingerprints(
    model: &ClusterModel,
    book_ids: &[String],
    set: &FeatureSet,
    config: &FingerprintConfig,
    master_seed: u64,
) -> Result<ClusterReport> {
    if book_ids.len() != model.assignments.len() {
        return Err(Error::Invalid("one book id per assignment required".into()));
    }
    let cluster_of: std::collections::HashMap<&str, usize> = book_ids
        .iter()
        .map(String::as_str)
        .zip(model.assignments.iter().copied())
        .collect();
    let mut clusters = Vec::with_capacity(model.k);
    let mut all: Vec<AuthorFingerprint> = Vec::new();
    for c in 0..model.k {
        let members: Vec<usize> = (0..set.len())
            .filter(|&i| cluster_of.get(set.books()[i].book_id.as_str()) == Some(&c))
            .collect();
        let sub = set.subset(&members);
        let qualifying = sub
            .authors()
            .values()
            .filter(|b| b.len() >= config.min_books.max(2))
            .count();
        let mut summary = ClusterSummary {
            index: c,
            n_books: members.len(),
            n_qualifying_authors: qualifying,
            pct_significant: None,
            centroid: model.centroids[c].clone(),
            skipped: None,
            authors: Vec::new(),
        };
        if qualifying < 2 {
            let reason = format!("{qualifying} author(s) with >= {} books", config.min_books);
            log::warn!("cluster {c} skipped: {reason}");
            summary.skipped = Some(reason);
        } else {
            let label = c.to_string();
            let fps = fingerprint_authors(&sub, config, master_seed, &["within_cluster", &label])?;
            summary.pct_significant = Some(pct_significant(&fps));
            all.extend(fps.iter().cloned());
            summary.authors = fps;
        }
        clusters.push(summary);
    }
    Ok(ClusterReport {
        k: model.k,
        silhouette: model.silhouette,
        clusters,
        pooled_pct_significant: pct_significant(&all),
        n_tested: all.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(centres: &[Vec<f64>], per: usize, sd: f64, s: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seed::stream(s, &["blobs"]);
        let n = Normal::new(0.0, sd).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per {
                pts.push(centre.iter().map(|x| x + n.sample(&mut rng)).collect());
                truth.push(c);
            }
        }
        (pts, truth)
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        let pairs: HashSet<(usize, usize)> = a.iter().copied().zip(b.iter().copied()).collect();
        let left: HashSet<usize> = pairs.iter().map(|p| p.0).collect();
        let right: HashSet<usize> = pairs.iter().map(|p| p.1).collect();
        pairs.len() == left.len() && pairs.len() == right.len()
    }

    #[test]
    fn separates_two_clouds() {
        let (pts, truth) = blobs(&[vec![0.0, 0.0], vec![10.0, 0.0]], 30, 0.5, 1);
        let m = kmeans(&pts, 2, 3, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert!(same_partition(&m.assignments, &truth));
        assert!(m.silhouette > 0.9);
        assert!(m.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn single_cluster_is_global_mean() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]];
        let m = kmeans(&pts, 1, 0, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert_eq!(m.centroids, vec![vec![2.0, 1.0]]);
    }

    #[test]
    fn duplicates_do_not_count_as_distinct() {
        let pts = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]];
        assert!(matches!(kmeans(&pts, 3, 0, 10, 1e-6), Err(Error::Invalid(_))));
        let same = vec![vec![1.0, 1.0]; 10];
        assert!(select_k(&same, 2..=10, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (pts, _) = blobs(&[vec![0.0], vec![3.0], vec![6.0]], 20, 1.0, 2);
        let a = kmeans(&pts, 3, 11, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let b = kmeans(&pts, 3, 11, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn singleton_scores_zero() {
        let pts = vec![vec![0.0], vec![0.1], vec![5.0]];
        let s = silhouette_score(&pts, &[0, 0, 1], 0).unwrap();
        // the two clustered points score (b - a) / b each, the singleton 0
        let p0 = (5.0 - 0.1) / 5.0;
        let p1 = (4.9 - 0.1) / 4.9;
        assert!((s - (p0 + p1) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_points_score_near_zero() {
        for s in 0..5 {
            let mut rng = seed::stream(s, &["uniform"]);
            let pts: Vec<Vec<f64>> = (0..300)
                .map(|_| (0..16).map(|_| rng.random::<f64>()).collect())
                .collect();
            let m = kmeans(&pts, 2, s, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
            assert!(m.silhouette.abs() < 0.2, "{}", m.silhouette);
        }
    }

    #[test]
    fn selects_blob_count() {
        let five: Vec<Vec<f64>> = (0..5).map(|i| vec![(i * 10) as f64, ((i % 2) * 7) as f64]).collect();
        let (pts, _) = blobs(&five, 25, 0.6, 4);
        let m = select_k(&pts, 2..=10, 9).unwrap();
        assert_eq!(m.k, 5);
        let (pts, _) = blobs(&five[..2], 25, 0.6, 5);
        assert_eq!(select_k(&pts, 2..=10, 9).unwrap().k, 2);
    }

    #[test]
    fn select_k_never_beaten() {
        let (pts, _) = blobs(&[vec![0.0, 0.0], vec![4.0, 4.0], vec![0.0, 5.0]], 15, 1.5, 6);
        let best = select_k(&pts, 2..=6, 1).unwrap();
        for k in 2..=6 {
            let s = seed::derive(1, &["select_k", &k.to_string()]);
            let m = kmeans(&pts, k, s, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
            assert!(m.silhouette <= best.silhouette);
        }
    }
}
