//! Author fingerprint statistics: divergences and distances between feature
//! vectors, permutation-tested consistency, attribution, and Fisher ratios.

pub mod attribution;
pub mod features;
pub mod fisher;
pub mod permutation;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use attribution::{attribute_all, AttributionReport, BookAttribution, DEFAULT_TOPK};
pub use features::{
    centroid, distance, jsd, jsd_dense, BookFeature, FeatureKind, FeatureSet, FeatureVector,
    RawFeature, SparseDist, Standardization,
};
pub use fisher::{fisher_discriminant_ratios, FisherScore};
pub use permutation::{
    loo_fingerprint, split_half_fingerprint, AuthorFingerprint, SIGNIFICANCE_LEVEL,
};

use crate::error::Result;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    LeaveOneOut,
    SplitHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerprintConfig {
    pub test: TestKind,
    pub n_null: usize,
    pub n_repeats: usize,
    /// Authors with fewer books are not tested.
    pub min_books: usize,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        FingerprintConfig {
            test: TestKind::LeaveOneOut,
            n_null: 200,
            n_repeats: 50,
            min_books: 2,
        }
    }
}

/// Test every author of `set` that has at least `config.min_books` books.
///
/// Null draws come from every other author's books in `set`; pass a
/// [`FeatureSet::subset`] to restrict them. Each author draws from its own seed
/// stream keyed by `labels` and the author id, so results do not depend on
/// thread count or author order.
pub fn fingerprint_authors(
    set: &FeatureSet,
    config: &FingerprintConfig,
    master_seed: u64,
    labels: &[&str],
) -> Result<Vec<AuthorFingerprint>> {
    let authors: Vec<(&str, Vec<usize>)> = set
        .authors()
        .into_iter()
        .filter(|(_, b)| b.len() >= config.min_books.max(2))
        .collect();
    authors
        .par_iter()
        .map(|(author, own)| {
            let pool: Vec<usize> = (0..set.len())
                .filter(|&i| set.books()[i].author_id != *author)
                .collect();
            let mut key: Vec<&str> = labels.to_vec();
            key.push(author);
            let mut rng = seed::stream(master_seed, &key);
            match config.test {
                TestKind::LeaveOneOut => {
                    loo_fingerprint(set, author, own, &pool, config.n_null, &mut rng)
                }
                TestKind::SplitHalf => split_half_fingerprint(
                    set,
                    author,
                    own,
                    &pool,
                    config.n_repeats,
                    config.n_null,
                    &mut rng,
                ),
            }
        })
        .collect()
}

/// Percentage of authors with `p < 0.05`.
pub fn pct_significant(fps: &[AuthorFingerprint]) -> f64 {
    if fps.is_empty() {
        return 0.0;
    }
    100.0 * fps.iter().filter(|f| f.significant).count() as f64 / fps.len() as f64
}

pub fn mean_effect(fps: &[AuthorFingerprint]) -> f64 {
    if fps.is_empty() {
        return 0.0;
    }
    fps.iter().map(|f| f.effect_size).sum::<f64>() / fps.len() as f64
}
