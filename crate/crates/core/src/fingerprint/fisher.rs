//! Per-dimension Fisher discriminant ratios.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::features::{FeatureSet, FeatureVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherScore {
    pub dimension: String,
    /// Between-author variance of author means over mean within-author
    /// variance. `f64::MAX` when the within-author variance is zero.
    pub ratio: f64,
    pub zero_within: bool,
}

fn dense_rows(set: &FeatureSet) -> (Vec<String>, Vec<Vec<f64>>) {
    match set.books().first().map(|b| &b.vector) {
        Some(FeatureVector::Dist(_)) => {
            let support: BTreeSet<u64> = set
                .books()
                .iter()
                .flat_map(|b| match &b.vector {
                    FeatureVector::Dist(d) => d.iter().map(|(i, _)| i).collect::<Vec<_>>(),
                    _ => Vec::new(),
                })
                .collect();
            let names = support.iter().map(|i| format!("motif_{i}")).collect();
            let rows = set
                .books()
                .iter()
                .map(|b| match &b.vector {
                    FeatureVector::Dist(d) => support.iter().map(|&i| d.get(i)).collect(),
                    _ => Vec::new(),
                })
                .collect();
            (names, rows)
        }
        _ => {
            let rows: Vec<Vec<f64>> = set
                .books()
                .iter()
                .map(|b| match &b.vector {
                    FeatureVector::Dense(v) => v.clone(),
                    FeatureVector::Mixed { dense, .. } => dense.clone(),
                    FeatureVector::Dist(_) => Vec::new(),
                })
                .collect();
            let dim = rows.first().map_or(0, Vec::len);
            ((0..dim).map(|i| format!("dim_{i}")).collect(), rows)
        }
    }
}

/// Fisher ratios for every dimension of `set`. `names` overrides the default
/// dimension labels for dense kinds.
pub fn fisher_discriminant_ratios(set: &FeatureSet, names: Option<&[&str]>) -> Result<Vec<FisherScore>> {
    let groups: Vec<Vec<usize>> = set
        .authors()
        .into_values()
        .filter(|b| b.len() >= 2)
        .collect();
    if groups.len() < 2 {
        return Err(Error::Invalid(
            "Fisher ratios need at least 2 authors with 2+ books".into(),
        ));
    }
    let (mut labels, rows) = dense_rows(set);
    if let Some(n) = names {
        if n.len() == labels.len() {
            labels = n.iter().map(|s| s.to_string()).collect();
        }
    }
    let mut out = Vec::with_capacity(labels.len());
    for (d, label) in labels.into_iter().enumerate() {
        let mut means = Vec::with_capacity(groups.len());
        let mut within = 0.0;
        for g in &groups {
            let xs: Vec<f64> = g.iter().map(|&i| rows[i][d]).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            within += xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
            means.push(m);
        }
        within /= groups.len() as f64;
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        let between = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / means.len() as f64;
        let zero_within = within < 1e-15;
        out.push(FisherScore {
            dimension: label,
            ratio: if zero_within {
                if between > 0.0 {
                    f64::MAX
                } else {
                    0.0
                }
            } else {
                between / within
            },
            zero_within,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::features::{FeatureKind, RawFeature};
    use crate::seed;
    use rand::seq::SliceRandom;
    use rand_distr::{Distribution, StandardNormal};

    fn build(rows: Vec<(String, String, Vec<f64>)>) -> FeatureSet {
        let items = rows
            .into_iter()
            .map(|(b, a, v)| (b, a, RawFeature::Dense(v)))
            .collect();
        FeatureSet::build(FeatureKind::Scalars, items, 1.0).unwrap()
    }

    #[test]
    fn constant_within_author_is_flagged() {
        let mut rows = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                rows.push((format!("{a}-{b}"), format!("a{a}"), vec![a as f64, (a * 3 + b) as f64 * 0.7 % 2.0]));
            }
        }
        let s = fisher_discriminant_ratios(&build(rows), Some(&["level", "noise"])).unwrap();
        assert!(s[0].zero_within);
        assert_eq!(s[0].ratio, f64::MAX);
        assert_eq!(s[0].dimension, "level");
        assert!(!s[1].zero_within);
    }

    #[test]
    fn separating_dimension_ranks_first() {
        let mut rng = seed::stream(11, &["fdr"]);
        let mut rows = Vec::new();
        for a in 0..10 {
            for b in 0..5 {
                let noise: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                rows.push((
                    format!("{a}-{b}"),
                    format!("a{a:02}"),
                    vec![noise[0], a as f64 + 0.3 * noise[1], noise[2]],
                ));
            }
        }
        let s = fisher_discriminant_ratios(&build(rows), None).unwrap();
        assert!(s[1].ratio > s[0].ratio && s[1].ratio > s[2].ratio);
    }

    #[test]
    fn iid_dimension_matches_permutation_null() {
        let (n_authors, per) = (40, 5);
        let mut rng = seed::stream(5, &["fdr-iid"]);
        let values: Vec<f64> = (0..n_authors * per).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rows_for = |labels: &[usize]| -> FeatureSet {
            build(
                values
                    .iter()
                    .zip(labels)
                    .enumerate()
                    .map(|(i, (&v, &a))| (format!("b{i:04}"), format!("a{a:03}"), vec![v]))
                    .collect(),
            )
        };
        let mut labels: Vec<usize> = (0..n_authors * per).map(|i| i / per).collect();
        let observed = fisher_discriminant_ratios(&rows_for(&labels), None).unwrap()[0].ratio;
        let mut null = Vec::new();
        for _ in 0..200 {
            labels.shuffle(&mut rng);
            null.push(fisher_discriminant_ratios(&rows_for(&labels), None).unwrap()[0].ratio);
        }
        let mean = null.iter().sum::<f64>() / null.len() as f64;
        let sd = (null.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / null.len() as f64).sqrt();
        assert!((observed - mean).abs() < 3.0 * sd, "{observed} vs {mean} ± {sd}");
        // E[between] / E[within] = (1 / per) (A - 1) / A / ((per - 1) / per)
        let expected = (n_authors as f64 - 1.0) / n_authors as f64 / (per as f64 - 1.0);
        assert!((mean - expected).abs() < 0.1 * expected, "{mean} vs {expected}");
    }
}
