//! Behaviour of the permutation tests and attribution on constructed data.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use nfp_core::experiments::{build_features, run_single, FeatureSpec, RunSpec};
use nfp_core::fingerprint::{
    attribute_all, fingerprint_authors, loo_fingerprint, pct_significant, FeatureKind,
    FeatureSet, FingerprintConfig, RawFeature,
};
use nfp_core::sax::SaxConfig;
use nfp_core::seed;
use nfp_core::synth::{gen_corpus, Archetype, SynthConfig};

type Item = (String, String, RawFeature);

/// `authors` x `books` dense vectors of standard normals; `shape` rewrites
/// author 0's books.
fn dense_items(
    authors: usize,
    books: usize,
    dim: usize,
    seed_: u64,
    shape: impl Fn(usize, &mut Vec<f64>),
) -> Vec<Item> {
    let mut rng = seed::stream(seed_, &["items"]);
    let mut out = Vec::new();
    for a in 0..authors {
        for b in 0..books {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if a == 0 {
                shape(b, &mut v);
            }
            out.push((format!("a{a:03}/b{b}"), format!("a{a:03}"), RawFeature::Dense(v)));
        }
    }
    out
}

fn author0(set: &FeatureSet, n_null: usize, seed_: u64) -> nfp_core::fingerprint::AuthorFingerprint {
    let own: Vec<usize> = (0..set.len()).filter(|&i| set.books()[i].author_id == "a000").collect();
    let pool: Vec<usize> = (0..set.len()).filter(|&i| set.books()[i].author_id != "a000").collect();
    loo_fingerprint(set, "a000", &own, &pool, n_null, &mut seed::stream(seed_, &["loo"])).unwrap()
}

#[test]
fn planted_author_is_detected() {
    let mut hits = 0;
    let seeds = 40;
    for s in 0..seeds {
        // author 0's books sit near a common point
        let items = dense_items(20, 5, 6, s, |b, v| {
            for (j, x) in v.iter_mut().enumerate() {
                *x = 1.5 + 0.2 * *x + 0.01 * (b + j) as f64;
            }
        });
        let set = FeatureSet::build(FeatureKind::Scalars, items, 1.0).unwrap();
        let fp = author0(&set, 200, s);
        if fp.effect_size > 1.0 && fp.p_value < 0.05 {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.95 * seeds as f64, "{hits}/{seeds}");
}

#[test]
fn anti_fingerprint_has_negative_effect() {
    for s in 0..10 {
        // author 0's books are spread far apart, in opposite directions
        let items = dense_items(20, 4, 6, s, |b, v| {
            let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
            let axis = b / 2;
            v.iter_mut().for_each(|x| *x *= 0.1);
            v[axis] = 6.0 * sign;
        });
        let set = FeatureSet::build(FeatureKind::Scalars, items, 1.0).unwrap();
        let fp = author0(&set, 200, s);
        assert!(fp.effect_size < 0.0, "seed {s}: effect {}", fp.effect_size);
        assert!(!fp.significant);
    }
}

#[test]
fn input_order_does_not_matter() {
    let items = dense_items(12, 4, 5, 3, |_, _| {});
    let config = FingerprintConfig::default();
    let base = FeatureSet::build(FeatureKind::Scalars, items.clone(), 1.0).unwrap();
    let expected = fingerprint_authors(&base, &config, 9, &["order"]).unwrap();
    let expected_attr = attribute_all(&base, 3).unwrap();
    for s in 0..5 {
        let mut shuffled = items.clone();
        shuffled.shuffle(&mut seed::stream(s, &["shuffle"]));
        let set = FeatureSet::build(FeatureKind::Scalars, shuffled, 1.0).unwrap();
        assert_eq!(fingerprint_authors(&set, &config, 9, &["order"]).unwrap(), expected);
        assert_eq!(attribute_all(&set, 3).unwrap(), expected_attr);
    }
}

#[test]
fn exchangeable_null_p_values_are_valid() {
    // every author is drawn from the same distribution, so each p-value
    // should be (super-)uniform
    let mut ps = Vec::new();
    for s in 0..6 {
        let items = dense_items(60, 5, 4, 100 + s, |_, _| {});
        let set = FeatureSet::build(FeatureKind::Scalars, items, 1.0).unwrap();
        let config = FingerprintConfig {
            n_null: 99,
            ..FingerprintConfig::default()
        };
        ps.extend(fingerprint_authors(&set, &config, s, &["null"]).unwrap().into_iter().map(|f| f.p_value));
    }
    let n = ps.len() as f64;
    for alpha in [0.05, 0.1, 0.25, 0.5] {
        let rate = ps.iter().filter(|&&p| p <= alpha).count() as f64 / n;
        let sd = (alpha * (1.0 - alpha) / n).sqrt();
        assert!(rate <= alpha + 3.0 * sd, "P(p <= {alpha}) = {rate}");
        assert!(rate >= alpha - 3.0 * sd, "P(p <= {alpha}) = {rate}");
    }
}

#[test]
fn attribution_at_chance_on_iid_features() {
    let items = dense_items(100, 5, 7, 21, |_, _| {});
    let set = FeatureSet::build(FeatureKind::Scalars, items, 1.0).unwrap();
    let r = attribute_all(&set, 100).unwrap();
    let chance: f64 = 0.01;
    let sd = (chance * (1.0 - chance) / 500.0).sqrt();
    assert!((r.top1 - chance).abs() <= 3.0 * sd, "top-1 {}", r.top1);
    assert_eq!(r.accuracy_at(100), 1.0);
}

#[test]
fn power_grows_with_strength() {
    let mut rates = Vec::new();
    for strength in [0.0, 0.25, 0.5, 1.0] {
        let mut cfg = SynthConfig::new(40, 5, Archetype::Intensity, 17);
        cfg.strength = strength;
        cfg.paragraphs = (201, 261);
        let corpus = gen_corpus(&cfg).unwrap().corpus;
        let mut spec = RunSpec::new(FeatureSpec::new(FeatureKind::Scalars, SaxConfig::baseline()), 5);
        spec.fingerprint.n_null = 100;
        let r = run_single("strength", &corpus, &spec).unwrap();
        rates.push(r.result().unwrap().aggregate.pct_significant);
    }
    assert!(rates[0] <= 15.0, "{rates:?}");
    assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{rates:?}");
    assert!(rates[3] >= rates[0] + 40.0, "{rates:?}");
}

#[test]
fn rhythm_templates_are_attributable() {
    let mut cfg = SynthConfig::new(20, 5, Archetype::Rhythm, 2);
    cfg.paragraphs = (151, 201);
    let corpus = gen_corpus(&cfg).unwrap().corpus;
    let spec = FeatureSpec::new(FeatureKind::WindowMotifs, SaxConfig::windowed(20, 8, 5, 4));
    let motif = attribute_all(&build_features(&corpus, &spec).unwrap(), 5).unwrap();
    let mut null_cfg = cfg.clone();
    null_cfg.archetype = Archetype::Null;
    let null_corpus = gen_corpus(&null_cfg).unwrap().corpus;
    let null = attribute_all(&build_features(&null_corpus, &spec).unwrap(), 5).unwrap();
    assert!(motif.top1 > 0.5, "{}", motif.top1);
    assert!(null.top1 < 0.2, "{}", null.top1);
}

fn small_dense_set() -> impl Strategy<Value = Vec<Item>> {
    (2usize..7, 2usize..5, 1usize..4, any::<u64>()).prop_map(|(a, b, d, s)| dense_items(a, b, d, s, |_, _| {}))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn topk_is_monotone_and_complete(items in small_dense_set()) {
        let set = FeatureSet::build(FeatureKind::Scalars, items, 1.0).unwrap();
        let r = attribute_all(&set, 1).unwrap();
        let mut last = 0.0;
        for k in 1..=r.n_authors {
            let acc = r.accuracy_at(k);
            prop_assert!(acc >= last);
            last = acc;
        }
        prop_assert_eq!(r.accuracy_at(r.n_authors), 1.0);
        prop_assert!(r.books.iter().all(|b| b.rank >= 1 && b.rank <= r.n_authors));
    }

    #[test]
    fn fingerprint_fields_are_consistent(items in small_dense_set(), s in any::<u64>()) {
        let set = FeatureSet::build(FeatureKind::Scalars, items, 1.0).unwrap();
        let config = FingerprintConfig { n_null: 19, ..FingerprintConfig::default() };
        let fps = fingerprint_authors(&set, &config, s, &["prop"]).unwrap();
        prop_assert_eq!(fps.len(), set.authors().len());
        for f in &fps {
            prop_assert!(f.p_value >= 1.0 / 20.0 && f.p_value <= 1.0);
            prop_assert_eq!(f.significant, f.p_value < 0.05);
            prop_assert!(f.intra_mean >= 0.0 && f.null_mean >= 0.0 && f.null_std >= 0.0);
            if !f.degenerate_null {
                let d = (f.null_mean - f.intra_mean) / f.null_std;
                prop_assert!((d - f.effect_size).abs() < 1e-9);
            }
        }
        let pct = pct_significant(&fps);
        prop_assert!((0.0..=100.0).contains(&pct));
    }
}
