//! Permutation tests of author consistency.
//!
//! Both tests compare an author's internal divergence with a null built from
//! random book sets of matching size drawn from other authors, report the
//! standardized effect `(μ_null − μ_intra) / σ_null` and an add-one p-value.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureSet;
use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
const MIN_NULL_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorFingerprint {
    pub author_id: String,
    pub n_books: usize,
    pub effect_size: f64,
    pub p_value: f64,
    pub intra_mean: f64,
    pub null_mean: f64,
    pub null_std: f64,
    pub significant: bool,
    /// `σ_null` was below 1e-12 so the effect size is reported as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate_null: bool,
}

impl AuthorFingerprint {
    fn from_stats(
        author_id: &str,
        n_books: usize,
        intra: f64,
        null_values: &[f64],
        null_stats: &[f64],
    ) -> Self {
        let n = null_values.len() as f64;
        let null_mean = null_values.iter().sum::<f64>() / n;
        let null_std =
            (null_values.iter().map(|v| (v - null_mean).powi(2)).sum::<f64>() / n).sqrt();
        let degenerate_null = null_std < MIN_NULL_STD;
        let effect_size = if degenerate_null {
            0.0
        } else {
            (null_mean - intra) / null_std
        };
        let hits = null_stats.iter().filter(|&&s| s <= intra).count();
        let p_value = (1 + hits) as f64 / (1 + null_stats.len()) as f64;
        AuthorFingerprint {
            author_id: author_id.to_string(),
            n_books,
            effect_size,
            p_value,
            intra_mean: intra,
            null_mean,
            null_std,
            significant: p_value < SIGNIFICANCE_LEVEL,
            degenerate_null,
        }
    }
}

fn sample_from<R: Rng>(rng: &mut R, pool: &[usize], amount: usize) -> Vec<usize> {
    index::sample(rng, pool.len(), amount)
        .into_iter()
        .map(|k| pool[k])
        .collect()
}

/// Leave-one-out consistency of one author.
///
/// `own` are the author's book indices in `set`; `pool` the books null sets
/// are drawn from (normally every book by another author). `μ_intra` is the
/// mean distance from each book to the centroid of the author's other books.
/// Each of the `n_null` draws takes `|own|` random pool books as a
/// pseudo-author and computes the same held-out distances for it. The
/// p-value compares each draw's mean with `μ_intra`; `μ_null` and `σ_null`
/// are taken over the individual held-out distances of all draws.
pub fn loo_fingerprint<R: Rng>(
    set: &FeatureSet,
    author_id: &str,
    own: &[usize],
    pool: &[usize],
    n_null: usize,
    rng: &mut R,
) -> Result<AuthorFingerprint> {
    let m = own.len();
    if m < 2 {
        return Err(Error::Invalid(format!(
            "author {author_id} has {m} book(s); leave-one-out needs 2"
        )));
    }
    if pool.len() < m {
        return Err(Error::Invalid(format!(
            "null pool of {} books is smaller than {m}",
            pool.len()
        )));
    }
    if n_null == 0 {
        return Err(Error::Config("n_null must be positive".into()));
    }

    let intra = mean(&held_out_distances(set, own)?);
    let mut values = Vec::with_capacity(n_null * m);
    let mut draw_means = Vec::with_capacity(n_null);
    for _ in 0..n_null {
        let pseudo = sample_from(rng, pool, m);
        let d = held_out_distances(set, &pseudo)?;
        draw_means.push(mean(&d));
        values.extend(d);
    }
    Ok(AuthorFingerprint::from_stats(author_id, m, intra, &values, &draw_means))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Distance from each book to the centroid of the other books.
fn held_out_distances(set: &FeatureSet, books: &[usize]) -> Result<Vec<f64>> {
    (0..books.len())
        .map(|i| {
            let rest: Vec<usize> = books
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &x)| x)
                .collect();
            let c = set.centroid_of(&rest)?;
            set.distance(set.vector(books[i]), &c)
        })
        .collect()
}

/// Divergence between the two halves of a random split. The first half gets
/// the extra book when the count is odd.
fn split_divergence<R: Rng>(set: &FeatureSet, books: &[usize], rng: &mut R) -> Result<f64> {
    let mut shuffled = books.to_vec();
    shuffled.shuffle(rng);
    let (first, second) = shuffled.split_at(books.len().div_ceil(2));
    let a = set.centroid_of(first)?;
    let b = set.centroid_of(second)?;
    set.distance(&a, &b)
}

/// Split-half consistency of one author.
///
/// The intra statistic is the mean divergence between random halves of the
/// author's books over `n_repeats` splits. Each of the `n_null` null draws
/// takes `|own|` random pool books and scores one random split of them.
pub fn split_half_fingerprint<R: Rng>(
    set: &FeatureSet,
    author_id: &str,
    own: &[usize],
    pool: &[usize],
    n_repeats: usize,
    n_null: usize,
    rng: &mut R,
) -> Result<AuthorFingerprint> {
    let m = own.len();
    if m < 4 {
        return Err(Error::Invalid(format!(
            "author {author_id} has {m} book(s); split-half needs 4"
        )));
    }
    if pool.len() < m {
        return Err(Error::Invalid(format!(
            "null pool of {} books is smaller than {m}",
            pool.len()
        )));
    }
    if n_null == 0 || n_repeats == 0 {
        return Err(Error::Config("n_null and n_repeats must be positive".into()));
    }
    let mut intra = 0.0;
    for _ in 0..n_repeats {
        intra += split_divergence(set, own, rng)?;
    }
    intra /= n_repeats as f64;

    let mut values = Vec::with_capacity(n_null);
    for _ in 0..n_null {
        let sample = sample_from(rng, pool, m);
        values.push(split_divergence(set, &sample, rng)?);
    }
    Ok(AuthorFingerprint::from_stats(author_id, m, intra, &values, &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::features::{FeatureKind, RawFeature};
    use crate::sax::MotifTable;
    use crate::seed;
    use std::collections::BTreeMap;

    fn motif_set(books: &[(&str, &str, &[(u64, u64)])]) -> FeatureSet {
        let items = books
            .iter()
            .map(|(b, a, counts)| {
                let counts: BTreeMap<u64, u64> = counts.iter().copied().collect();
                let total = counts.values().sum();
                (
                    b.to_string(),
                    a.to_string(),
                    RawFeature::Motifs(MotifTable { counts, total }),
                )
            })
            .collect();
        FeatureSet::build(FeatureKind::SaxMotifs, items, 1.0).unwrap()
    }

    #[test]
    fn identical_corpus_has_no_signal() {
        let books: Vec<(String, String)> = (0..12)
            .map(|i| (format!("b{i:02}"), format!("a{}", i / 4)))
            .collect();
        let spec: Vec<(&str, &str, &[(u64, u64)])> = books
            .iter()
            .map(|(b, a)| (b.as_str(), a.as_str(), &[(1u64, 3u64), (7, 1)][..]))
            .collect();
        let set = motif_set(&spec);
        let own = [0, 1, 2, 3];
        let pool: Vec<usize> = (4..12).collect();
        let fp = loo_fingerprint(&set, "a0", &own, &pool, 100, &mut seed::stream(1, &[])).unwrap();
        assert_eq!(fp.intra_mean, 0.0);
        assert_eq!(fp.null_mean, 0.0);
        assert!(fp.degenerate_null);
        assert_eq!(fp.effect_size, 0.0);
        assert_eq!(fp.p_value, 1.0);
        assert!(!fp.significant);

        let sh = split_half_fingerprint(&set, "a0", &own, &pool, 50, 100, &mut seed::stream(1, &[]))
            .unwrap();
        assert_eq!(sh.intra_mean, 0.0);
        assert_eq!(sh.p_value, 1.0);
    }

    #[test]
    fn effect_matches_formula() {
        let fp = AuthorFingerprint::from_stats("a", 5, 0.2, &[0.3, 0.5, 0.4, 0.6], &[0.4, 0.5]);
        let mean = 0.45;
        let std = (0.0125f64).sqrt();
        assert!((fp.effect_size - (mean - 0.2) / std).abs() < 1e-12);
        assert!((fp.p_value - 1.0 / 3.0).abs() < 1e-15);
        let fp = AuthorFingerprint::from_stats("a", 5, 0.45, &[0.3, 0.5, 0.4, 0.6], &[0.4, 0.5]);
        assert!(fp.effect_size.abs() < 1e-12);
    }

    #[test]
    fn disjoint_halves_diverge_fully() {
        // two books on motif 1, two on motif 2: any 2/2 split other than the
        // pure ones is mixed, but forcing the pure split gives JSD 1
        let set = motif_set(&[
            ("b0", "a", &[(1, 1)]),
            ("b1", "a", &[(1, 1)]),
            ("b2", "a", &[(2, 1)]),
            ("b3", "a", &[(2, 1)]),
        ]);
        let a = set.centroid_of(&[0, 1]).unwrap();
        let b = set.centroid_of(&[2, 3]).unwrap();
        assert_eq!(set.distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn too_few_books() {
        let set = motif_set(&[("b0", "a", &[(1, 1)]), ("b1", "x", &[(1, 1)])]);
        let mut rng = seed::stream(0, &[]);
        assert!(loo_fingerprint(&set, "a", &[0], &[1], 100, &mut rng).is_err());
        assert!(split_half_fingerprint(&set, "a", &[0, 1, 0], &[1], 5, 5, &mut rng).is_err());
    }
}
