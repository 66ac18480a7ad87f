//! Curve corpora, feature extraction and the experiment runners that turn
//! them into results files.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{select_k, within_cluster_fingerprints, ClusterReport};
use crate::corpus::{CorpusLayout, CorpusManifest};
use crate::error::{Error, Result};
use crate::fingerprint::{
    attribute_all, fingerprint_authors, fisher_discriminant_ratios, mean_effect, pct_significant,
    AuthorFingerprint, FeatureKind, FeatureSet, FingerprintConfig, FisherScore, RawFeature,
    TestKind, DEFAULT_TOPK,
};
use crate::novelty::{scalar_dynamics_of, NoveltyCurve, SCALAR_NAMES};
use crate::sax::{paa, sax_string, sliding_window_profile, window_slopes, SaxConfig};
use crate::store::MatrixStore;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveBook {
    pub book_id: String,
    pub author_id: String,
    pub curve: NoveltyCurve,
}

/// Novelty curves of a corpus, sorted by `(author_id, book_id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveCorpus {
    books: Vec<CurveBook>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_books: usize,
    pub n_authors: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub mean_len: f64,
}

impl CurveCorpus {
    pub fn new(mut books: Vec<CurveBook>) -> Result<Self> {
        books.sort_by(|a, b| (&a.author_id, &a.book_id).cmp(&(&b.author_id, &b.book_id)));
        let mut seen = HashSet::new();
        for b in &books {
            if !seen.insert(b.book_id.as_str()) {
                return Err(Error::Invalid(format!("duplicate book_id {}", b.book_id)));
            }
        }
        Ok(CurveCorpus { books })
    }

    pub fn books(&self) -> &[CurveBook] {
        &self.books
    }

    pub fn len(&self) -> usize {
        self.books.len()
    }

    pub fn is_empty(&self) -> bool {
        self.books.is_empty()
    }

    pub fn n_authors(&self) -> usize {
        self.books.iter().map(|b| b.author_id.as_str()).collect::<HashSet<_>>().len()
    }

    pub fn summary(&self) -> CorpusSummary {
        let lens: Vec<usize> = self.books.iter().map(|b| b.curve.len()).collect();
        CorpusSummary {
            n_books: lens.len(),
            n_authors: self.n_authors(),
            min_len: lens.iter().copied().min().unwrap_or(0),
            max_len: lens.iter().copied().max().unwrap_or(0),
            mean_len: if lens.is_empty() {
                0.0
            } else {
                lens.iter().sum::<usize>() as f64 / lens.len() as f64
            },
        }
    }

    /// Keep curves of at least `min_len` points whose authors keep at least
    /// `min_books` of them, iterated to a fixed point.
    pub fn filter(&self, min_len: usize, min_books: usize) -> CurveCorpus {
        let mut books: Vec<CurveBook> =
            self.books.iter().filter(|b| b.curve.len() >= min_len).cloned().collect();
        loop {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for b in &books {
                *counts.entry(b.author_id.as_str()).or_default() += 1;
            }
            let keep: HashSet<String> = counts
                .into_iter()
                .filter(|&(_, n)| n >= min_books)
                .map(|(a, _)| a.to_string())
                .collect();
            let before = books.len();
            books.retain(|b| keep.contains(&b.author_id));
            if books.len() == before {
                break;
            }
        }
        CurveCorpus { books }
    }

    /// Write every curve to `layout.curves()`.
    pub fn save(&self, layout: &CorpusLayout) -> Result<()> {
        let mut store = MatrixStore::create(layout.curves())?;
        let written: Vec<(String, String)> = self
            .books
            .par_iter()
            .map(|b| Ok((b.book_id.clone(), store.write(&b.book_id, &b.curve.to_matrix())?)))
            .collect::<Result<_>>()?;
        for (id, rel) in written {
            store.register(&id, rel);
        }
        store.save_index()
    }

    /// Load the curves of every manifest book.
    pub fn load(layout: &CorpusLayout, manifest: &CorpusManifest) -> Result<Self> {
        let store = MatrixStore::open(layout.curves())?;
        let books = manifest
            .books
            .par_iter()
            .map(|e| {
                let m = store.get(&e.book_id)?;
                Ok(CurveBook {
                    book_id: e.book_id.clone(),
                    author_id: e.author_id.clone(),
                    curve: NoveltyCurve::from_matrix(e.book_id.clone(), &m)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CurveCorpus::new(books)
    }
}

/// What to extract from each curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    /// PAA segments, alphabet and motif length; window kinds also need a
    /// window size.
    pub sax: SaxConfig,
    pub combined_weight: f64,
    #[serde(default)]
    pub drop_degenerate: bool,
}

impl FeatureSpec {
    pub fn new(kind: FeatureKind, sax: SaxConfig) -> Self {
        FeatureSpec {
            kind,
            sax,
            combined_weight: 1.0,
            drop_degenerate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sax.validate()?;
        let windowed = matches!(self.kind, FeatureKind::WindowMotifs | FeatureKind::WindowSlopes);
        if windowed != self.sax.window_size.is_some() {
            return Err(Error::Config(format!(
                "feature kind {} {} a window size",
                self.kind.label(),
                if windowed { "needs" } else { "does not take" }
            )));
        }
        if !(self.combined_weight.is_finite() && self.combined_weight >= 0.0) {
            return Err(Error::Config("combined weight must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Short label used in file names and seed keys.
    pub fn label(&self) -> String {
        let s = &self.sax;
        let base = format!("{}_w{}_a{}_k{}", self.kind.label(), s.paa_segments, s.alphabet_size, s.motif_length);
        match (s.window_size, s.stride()) {
            (Some(win), Some(st)) => format!("{base}_W{win}_s{st}"),
            _ => base,
        }
    }

    /// Shortest curve these features can be extracted from.
    pub fn min_len(&self) -> usize {
        self.sax.window_size.unwrap_or(3).max(3)
    }
}

fn scalar_vector(book_id: &str, values: &[f64]) -> Result<Vec<f64>> {
    scalar_dynamics_of(values)
        .as_vector()
        .map(|v| v.to_vec())
        .ok_or_else(|| Error::Invalid(format!("book {book_id}: curve too short for scalar dynamics")))
}

/// Raw features of one curve.
pub fn extract(book_id: &str, values: &[f64], spec: &FeatureSpec) -> Result<RawFeature> {
    let motifs = |cfg: &SaxConfig| sax_string(book_id, values, cfg).map(|p| p.motifs);
    Ok(match spec.kind {
        FeatureKind::SaxMotifs => RawFeature::Motifs(motifs(&spec.sax)?),
        FeatureKind::Scalars => RawFeature::Dense(scalar_vector(book_id, values)?),
        FeatureKind::PaaVector => RawFeature::Dense(paa(values, spec.sax.paa_segments)?),
        FeatureKind::WindowMotifs => RawFeature::Motifs(
            sliding_window_profile(book_id, values, &spec.sax, spec.drop_degenerate)?.motifs,
        ),
        FeatureKind::Combined => {
            let mut dense = scalar_vector(book_id, values)?;
            dense.extend(paa(values, spec.sax.paa_segments)?);
            RawFeature::Mixed {
                dense,
                motifs: motifs(&spec.sax)?,
            }
        }
        FeatureKind::WindowSlopes => {
            let (win, stride) = (spec.sax.window_size, spec.sax.stride());
            let (Some(win), Some(stride)) = (win, stride) else {
                return Err(Error::Config("window slopes need a window size".into()));
            };
            let slopes = window_slopes(values, win, stride)?;
            let m = slopes.iter().sum::<f64>() / slopes.len() as f64;
            let sd = (slopes.iter().map(|s| (s - m).powi(2)).sum::<f64>() / slopes.len() as f64).sqrt();
            RawFeature::Dense(vec![m, sd])
        }
    })
}

/// Extract features for every book in parallel and standardize them.
pub fn build_features(corpus: &CurveCorpus, spec: &FeatureSpec) -> Result<FeatureSet> {
    spec.validate()?;
    let items = corpus
        .books()
        .par_iter()
        .map(|b| {
            let f = extract(&b.book_id, b.curve.values(), spec)?;
            Ok((b.book_id.clone(), b.author_id.clone(), f))
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::build(spec.kind, items, spec.combined_weight)
}

/// Everything that determines one results file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub features: FeatureSpec,
    pub fingerprint: FingerprintConfig,
    pub topk: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn new(features: FeatureSpec, seed: u64) -> Self {
        RunSpec {
            features,
            fingerprint: FingerprintConfig::default(),
            topk: DEFAULT_TOPK,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pct_significant: f64,
    pub mean_effect: f64,
    pub n_tested: usize,
    pub top1: f64,
    pub top5: f64,
    pub topk: f64,
    pub k: usize,
    pub times_chance: f64,
    pub chance_level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_scalar_top1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorRow {
    pub author_id: String,
    pub n_books: usize,
    pub effect: f64,
    pub p: f64,
    pub significant: bool,
    pub intra_mean: f64,
    pub null_mean: f64,
    pub null_std: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate_null: bool,
}

impl From<&AuthorFingerprint> for AuthorRow {
    fn from(f: &AuthorFingerprint) -> Self {
        AuthorRow {
            author_id: f.author_id.clone(),
            n_books: f.n_books,
            effect: f.effect_size,
            p: f.p_value,
            significant: f.significant,
            intra_mean: f.intra_mean,
            null_mean: f.null_mean,
            null_std: f.null_std,
            degenerate_null: f.degenerate_null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub config: RunSpec,
    pub corpus_summary: CorpusSummary,
    pub aggregate: Aggregate,
    pub authors: Vec<AuthorRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<Vec<FisherScore>>,
}

impl ExperimentResult {
    pub fn file_name(&self) -> String {
        format!("{}_{}.json", self.experiment, self.config.features.label())
    }
}

/// A configuration the corpus could not support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub experiment: String,
    pub config: RunSpec,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ran(Box<ExperimentResult>),
    Skipped(Skipped),
}

impl Outcome {
    pub fn result(&self) -> Option<&ExperimentResult> {
        match self {
            Outcome::Ran(r) => Some(r),
            Outcome::Skipped(_) => None,
        }
    }
}

/// Why `corpus` cannot support `spec`, if it cannot.
fn shortfall(corpus: &CurveCorpus, spec: &RunSpec) -> Option<String> {
    let need_books = match spec.fingerprint.test {
        TestKind::LeaveOneOut => spec.fingerprint.min_books.max(2),
        TestKind::SplitHalf => spec.fingerprint.min_books.max(4),
    };
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for b in corpus.books() {
        *counts.entry(b.author_id.as_str()).or_default() += 1;
    }
    let eligible = counts.values().filter(|&&n| n >= need_books).count();
    if eligible < 2 {
        return Some(format!(
            "{eligible} author(s) with >= {need_books} books; need at least 2"
        ));
    }
    let min_len = spec.features.min_len();
    if let Some(b) = corpus.books().iter().find(|b| b.curve.len() < min_len) {
        return Some(format!(
            "book {} has {} curve points; {} needs {min_len}",
            b.book_id,
            b.curve.len(),
            spec.features.label()
        ));
    }
    None
}

fn fingerprint_set(
    experiment: &str,
    set: &FeatureSet,
    spec: &RunSpec,
) -> Result<Vec<AuthorFingerprint>> {
    let label = spec.features.label();
    let mut fps = fingerprint_authors(set, &spec.fingerprint, spec.seed, &[experiment, &label])?;
    fps.sort_by(|a, b| a.author_id.cmp(&b.author_id));
    Ok(fps)
}

/// Fingerprint test plus attribution for one configuration.
pub fn run_single(experiment: &str, corpus: &CurveCorpus, spec: &RunSpec) -> Result<Outcome> {
    spec.features.validate()?;
    if spec.topk == 0 {
        return Err(Error::Config("top-k must be positive".into()));
    }
    if let Some(reason) = shortfall(corpus, spec) {
        log::warn!("skipping {experiment} {}: {reason}", spec.features.label());
        return Ok(Outcome::Skipped(Skipped {
            experiment: experiment.to_string(),
            config: *spec,
            reason,
        }));
    }
    let set = build_features(corpus, &spec.features)?;
    let fps = fingerprint_set(experiment, &set, spec)?;
    let attr = attribute_all(&set, spec.topk)?;
    let fisher = if spec.features.kind == FeatureKind::Scalars {
        Some(fisher_discriminant_ratios(&set, Some(&SCALAR_NAMES))?)
    } else {
        None
    };
    Ok(Outcome::Ran(Box::new(ExperimentResult {
        experiment: experiment.to_string(),
        config: *spec,
        corpus_summary: corpus.summary(),
        aggregate: Aggregate {
            pct_significant: pct_significant(&fps),
            mean_effect: mean_effect(&fps),
            n_tested: fps.len(),
            top1: attr.top1,
            top5: attr.accuracy_at(5),
            topk: attr.topk,
            k: attr.k,
            times_chance: attr.times_chance,
            chance_level: attr.chance_level,
            window_scalar_top1: None,
        },
        authors: fps.iter().map(AuthorRow::from).collect(),
        fisher,
    })))
}

/// Whole-book fingerprints with the configured feature kind.
pub fn run_baseline(corpus: &CurveCorpus, spec: &RunSpec) -> Result<Outcome> {
    run_single("baseline", corpus, spec)
}

/// `(PAA segments, alphabet)` pairs of the resolution sweep.
pub const RESOLUTION_GRID: [(usize, usize); 5] = [(16, 4), (32, 4), (64, 4), (64, 5), (64, 6)];

/// SAX-motif fingerprints over a grid of resolutions. Books shorter than the
/// largest segment count are dropped first so every configuration sees the
/// same books.
pub fn run_resolution_sweep(
    corpus: &CurveCorpus,
    base: &RunSpec,
    grid: &[(usize, usize)],
) -> Result<Vec<Outcome>> {
    let max_w = grid.iter().map(|g| g.0).max().unwrap_or(0);
    let corpus = corpus.filter(max_w, base.fingerprint.min_books.max(2));
    grid.iter()
        .map(|&(w, a)| {
            let mut spec = *base;
            spec.features = FeatureSpec {
                kind: FeatureKind::SaxMotifs,
                sax: SaxConfig::whole_book(w, a, base.features.sax.motif_length),
                ..base.features
            };
            run_single("resolution", &corpus, &spec)
        })
        .collect()
}

/// The four whole-book feature kinds compared side by side.
pub const MULTIFEATURE_KINDS: [FeatureKind; 4] = [
    FeatureKind::SaxMotifs,
    FeatureKind::Scalars,
    FeatureKind::PaaVector,
    FeatureKind::Combined,
];

pub fn run_multifeature(corpus: &CurveCorpus, base: &RunSpec) -> Result<Vec<Outcome>> {
    MULTIFEATURE_KINDS
        .iter()
        .map(|&kind| {
            let mut spec = *base;
            spec.features.kind = kind;
            spec.features.sax.window_size = None;
            spec.features.sax.window_stride = None;
            run_single("multifeature", corpus, &spec)
        })
        .collect()
}

pub const WINDOW_GRID: [usize; 3] = [20, 40, 80];

/// Split-half window-motif fingerprints and attribution per window size,
/// with the per-window slope baseline's top-1 alongside. Books shorter than
/// the largest window are dropped first.
pub fn run_windows(corpus: &CurveCorpus, base: &RunSpec, windows: &[usize]) -> Result<Vec<Outcome>> {
    let max_w = windows.iter().copied().max().unwrap_or(0);
    let corpus = corpus.filter(max_w, base.fingerprint.min_books.max(4));
    windows
        .iter()
        .map(|&win| {
            let mut spec = *base;
            spec.features.kind = FeatureKind::WindowMotifs;
            spec.features.sax.window_size = Some(win);
            spec.features.sax.window_stride = None;
            spec.fingerprint.test = TestKind::SplitHalf;
            spec.fingerprint.min_books = spec.fingerprint.min_books.max(4);
            let mut outcome = run_single("windows", &corpus, &spec)?;
            if let Outcome::Ran(r) = &mut outcome {
                let mut slopes = spec.features;
                slopes.kind = FeatureKind::WindowSlopes;
                let set = build_features(&corpus, &slopes)?;
                r.aggregate.window_scalar_top1 = Some(attribute_all(&set, spec.topk)?.top1);
            }
            Ok(outcome)
        })
        .collect()
}

/// Settings for clustering books and re-testing fingerprints per cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    /// PAA segments of the clustering profile.
    pub paa_segments: usize,
    pub k_min: usize,
    pub k_max: usize,
    /// Features and test used inside each cluster.
    pub run: RunSpec,
}

impl ClusterSpec {
    pub fn new(run: RunSpec) -> Self {
        let mut run = run;
        run.fingerprint.min_books = crate::cluster::DEFAULT_WITHIN_MIN_BOOKS;
        ClusterSpec {
            paa_segments: 16,
            k_min: *crate::cluster::DEFAULT_K_RANGE.start(),
            k_max: *crate::cluster::DEFAULT_K_RANGE.end(),
            run,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub experiment: String,
    pub config: ClusterSpec,
    pub corpus_summary: CorpusSummary,
    #[serde(flatten)]
    pub report: ClusterReport,
    pub assignments: BTreeMap<String, usize>,
}

/// Cluster books by raw PAA profile, pick k by silhouette, then repeat the
/// fingerprint test inside each cluster.
pub fn run_within_cluster(corpus: &CurveCorpus, spec: &ClusterSpec) -> Result<ClusterResult> {
    spec.run.features.validate()?;
    let profiles: Vec<Vec<f64>> = corpus
        .books()
        .par_iter()
        .map(|b| paa(b.curve.values(), spec.paa_segments))
        .collect::<Result<_>>()?;
    let seed = crate::seed::derive(spec.run.seed, &["cluster"]);
    let model = select_k(&profiles, spec.k_min..=spec.k_max, seed)?;
    let ids: Vec<String> = corpus.books().iter().map(|b| b.book_id.clone()).collect();
    let set = build_features(corpus, &spec.run.features)?;
    let report = within_cluster_fingerprints(&model, &ids, &set, &spec.run.fingerprint, spec.run.seed)?;
    Ok(ClusterResult {
        experiment: "cluster".into(),
        config: *spec,
        corpus_summary: corpus.summary(),
        report,
        assignments: ids.into_iter().zip(model.assignments.iter().copied()).collect(),
    })
}
