use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use nfp_core::corpus::{self, CorpusLayout, CorpusManifest, ManifestEntry};
use nfp_core::embed::{self, EmbeddingBackend, EmbeddingMatrix, HttpBackend, HttpConfig, PseudoEmbedder};
use nfp_core::experiments::{
    self, ClusterSpec, CurveBook, CurveCorpus, ExperimentResult, FeatureSpec, Outcome, RunSpec,
};
use nfp_core::fingerprint::{attribute_all, FeatureKind, RawFeature};
use nfp_core::novelty::novelty_curve;
use nfp_core::sax::{MotifTable, SaxConfig};
use nfp_core::store::{self, MatrixStore};
use nfp_core::synth::{self, SynthConfig};
use nfp_core::{report, Error};

use crate::args::*;
use crate::runlog::RunLog;

pub struct Ctx {
    pub seed: u64,
    pub threads: usize,
}

impl Ctx {
    fn log(&self, name: &'static str) -> RunLog {
        RunLog::new(name, self.seed, self.threads)
    }
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn require(path: &Path) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        }
        .into())
    }
}

fn sax_config(a: &SaxArgs, default: (usize, usize, usize)) -> SaxConfig {
    SaxConfig {
        paa_segments: a.paa.unwrap_or(default.0),
        alphabet_size: a.alphabet.unwrap_or(default.1),
        motif_length: a.kgram.unwrap_or(default.2),
        window_size: a.window,
        window_stride: a.stride,
    }
}

fn feature_spec(kind: KindArg, a: &SaxArgs, default: (usize, usize, usize)) -> anyhow::Result<FeatureSpec> {
    let mut spec = FeatureSpec::new(kind.into(), sax_config(a, default));
    spec.combined_weight = a.combined_weight;
    spec.drop_degenerate = a.drop_degenerate;
    spec.validate()?;
    Ok(spec)
}

fn run_spec(features: FeatureSpec, t: &TestArgs, seed: u64) -> anyhow::Result<RunSpec> {
    let mut spec = RunSpec::new(features, seed);
    spec.fingerprint.n_null = t.n_null;
    spec.fingerprint.n_repeats = t.n_repeats;
    spec.topk = t.topk;
    if let Some(m) = t.min_books {
        spec.fingerprint.min_books = m;
    }
    if t.n_null == 0 || t.n_repeats == 0 || t.topk == 0 {
        return Err(config_err("--n-null, --n-repeats and --topk must be positive"));
    }
    Ok(spec)
}

fn load_manifest(layout: &CorpusLayout, log: &mut RunLog) -> anyhow::Result<CorpusManifest> {
    let path = layout.manifest();
    require(&path)?;
    log.input(&path)?;
    Ok(CorpusManifest::load(&path)?)
}

fn load_curves(root: &Path, log: &mut RunLog) -> anyhow::Result<CurveCorpus> {
    let layout = CorpusLayout::new(root);
    let manifest = load_manifest(&layout, log)?;
    require(&layout.curves())?;
    log.input(&layout.curves())?;
    let corpus = CurveCorpus::load(&layout, &manifest)
        .with_context(|| format!("loading curves from {}", root.display()))?;
    let s = corpus.summary();
    log::info!(
        "loaded {} books by {} authors (curve length {}..{})",
        s.n_books,
        s.n_authors,
        s.min_len,
        s.max_len
    );
    Ok(corpus)
}

fn filtered(corpus: &CurveCorpus, t: &TestArgs, spec: &RunSpec) -> CurveCorpus {
    let min_len = t.min_paragraphs.saturating_sub(1).max(spec.features.min_len());
    let out = corpus.filter(min_len, spec.fingerprint.min_books.max(2));
    if out.len() < corpus.len() {
        log::info!("filters kept {} of {} books", out.len(), corpus.len());
    }
    out
}

fn write_outcomes(out: &Path, outcomes: &[Outcome], log: &mut RunLog) -> anyhow::Result<()> {
    for o in outcomes {
        let path = match o {
            Outcome::Ran(r) => {
                log::info!(
                    "{} {}: {:.1}% significant, top-1 {:.3} ({:.1}x chance)",
                    r.experiment,
                    r.config.features.label(),
                    r.aggregate.pct_significant,
                    r.aggregate.top1,
                    r.aggregate.times_chance
                );
                store::write_json(&out.join(r.file_name()), r)?;
                out.join(r.file_name())
            }
            Outcome::Skipped(s) => {
                let path = out.join(format!("{}_{}.skipped.json", s.experiment, s.config.features.label()));
                store::write_json(&path, s)?;
                path
            }
        };
        log.output(&path);
    }
    Ok(())
}

pub fn ingest(ctx: &Ctx, a: &IngestArgs) -> anyhow::Result<()> {
    let mut log = ctx.log("ingest");
    require(&a.corpus)?;
    log.input(&a.corpus)?;
    let ingested = corpus::ingest_dir(&a.corpus, a.min_chars)?;
    for r in &ingested.rejected {
        log::warn!("rejected {r}");
    }
    let entries: Vec<ManifestEntry> = ingested
        .books
        .iter()
        .map(|(b, p)| ManifestEntry::from_book(b, p.display().to_string()))
        .collect();
    let manifest = corpus::filter_corpus(&CorpusManifest::new(entries)?, a.min_books, a.min_paragraphs);
    if manifest.books.is_empty() {
        log::warn!("no books survived the filters");
    }
    let layout = CorpusLayout::new(&a.out);
    let keep: std::collections::HashSet<&str> = manifest.books.iter().map(|b| b.book_id.as_str()).collect();
    ingested
        .books
        .par_iter()
        .filter(|(b, _)| keep.contains(b.book_id.as_str()))
        .try_for_each(|(b, _)| corpus::write_paragraphs(&layout.paragraphs(), b))?;
    manifest.save(&layout.manifest())?;
    log::info!(
        "ingested {} books by {} authors ({} files rejected)",
        manifest.books.len(),
        manifest.n_authors(),
        ingested.rejected.len()
    );
    log.output(&layout.manifest());
    log.output(&layout.paragraphs());
    log.finish(&a.out, a)
}

pub fn embed(ctx: &Ctx, a: &EmbedArgs) -> anyhow::Result<()> {
    let mut log = ctx.log("embed");
    let layout = CorpusLayout::new(&a.corpus);
    let manifest = load_manifest(&layout, &mut log)?;
    require(&layout.paragraphs())?;
    log.input(&layout.paragraphs())?;
    let (backend, batch): (Box<dyn EmbeddingBackend>, usize) = match a.backend {
        BackendKind::Pseudo => {
            let dim = a.dim.unwrap_or(embed::DEFAULT_DIM);
            if dim < 2 {
                return Err(config_err("--dim must be >= 2"));
            }
            let batch = a.batch.unwrap_or(embed::DEFAULT_BATCH);
            (Box::new(PseudoEmbedder { dim, seed: ctx.seed }), batch)
        }
        BackendKind::Http => {
            let mut cfg = HttpConfig::from_lookup(|k| match (k, &a.endpoint) {
                ("EMBED_ENDPOINT", Some(e)) => Some(e.clone()),
                _ => std::env::var(k).ok(),
            })?;
            if let Some(d) = a.dim {
                cfg.dim = d;
            }
            if let Some(b) = a.batch {
                cfg.batch = b;
            }
            if cfg.batch == 0 || cfg.dim < 2 {
                return Err(config_err("batch must be > 0 and dim >= 2"));
            }
            let batch = cfg.batch;
            (Box::new(HttpBackend::new(cfg)?), batch)
        }
    };
    let mut store = MatrixStore::create(layout.embeddings())?;
    let written = manifest
        .books
        .par_iter()
        .map(|e| {
            let book = corpus::read_paragraphs(&layout.paragraphs(), &e.book_id)?;
            let m = embed::embed_book(&book, backend.as_ref(), batch)?;
            Ok((e.book_id.clone(), store.write(&e.book_id, m.rows())?))
        })
        .collect::<nfp_core::Result<Vec<_>>>()?;
    for (id, rel) in written {
        store.register(&id, rel);
    }
    store.save_index()?;
    log::info!("embedded {} books", manifest.books.len());
    log.output(&layout.embeddings());
    log.finish(&a.corpus, a)
}

pub fn novelty(ctx: &Ctx, a: &CorpusArgs) -> anyhow::Result<()> {
    let mut log = ctx.log("novelty");
    let layout = CorpusLayout::new(&a.corpus);
    let manifest = load_manifest(&layout, &mut log)?;
    require(&layout.embeddings())?;
    log.input(&layout.embeddings())?;
    let store = MatrixStore::open(layout.embeddings())?;
    let books = manifest
        .books
        .par_iter()
        .map(|e| {
            let m = EmbeddingMatrix::load(&store, &e.book_id)?;
            Ok(CurveBook {
                book_id: e.book_id.clone(),
                author_id: e.author_id.clone(),
                curve: novelty_curve(&m)?,
            })
        })
        .collect::<nfp_core::Result<Vec<_>>>()?;
    let corpus = CurveCorpus::new(books)?;
    corpus.save(&layout)?;
    let scalars = layout.root().join("scalars.csv");
    report::write_scalar_csv(&scalars, &corpus)?;
    log::info!("wrote {} novelty curves", corpus.len());
    log.output(&layout.curves());
    log.output(&scalars);
    log.finish(&a.corpus, a)
}

#[derive(Serialize)]
struct FeatureLine<'a> {
    book_id: &'a str,
    author_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dense: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    motifs: Option<&'a MotifTable>,
}

pub fn features(ctx: &Ctx, a: &FeaturesArgs) -> anyhow::Result<()> {
    let spec = feature_spec(a.feature_kind, &a.sax, (16, 5, 4))?;
    let mut log = ctx.log("features");
    let corpus = load_curves(&a.corpus, &mut log)?;
    let out = a.out.clone().unwrap_or_else(|| CorpusLayout::new(&a.corpus).features());
    let raw = corpus
        .books()
        .par_iter()
        .map(|b| experiments::extract(&b.book_id, b.curve.values(), &spec))
        .collect::<nfp_core::Result<Vec<_>>>()?;
    let mut text = String::new();
    for (b, f) in corpus.books().iter().zip(&raw) {
        let (dense, motifs) = match f {
            RawFeature::Motifs(m) => (None, Some(m)),
            RawFeature::Dense(d) => (Some(d.as_slice()), None),
            RawFeature::Mixed { dense, motifs } => (Some(dense.as_slice()), Some(motifs)),
        };
        let line = FeatureLine {
            book_id: &b.book_id,
            author_id: &b.author_id,
            dense,
            motifs,
        };
        text.push_str(&serde_json::to_string(&line)?);
        text.push('\n');
    }
    let path = out.join(format!("{}.jsonl", spec.label()));
    fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
    fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    log::info!("wrote features for {} books to {}", corpus.len(), path.display());
    log.output(&path);
    log.finish(&out, a)
}

pub fn fingerprint(ctx: &Ctx, a: &FingerprintArgs) -> anyhow::Result<()> {
    let features = feature_spec(a.feature_kind, &a.sax, (16, 5, 4))?;
    let spec = run_spec(features, &a.test, ctx.seed)?;
    if let ExperimentArg::Resolution = a.experiment {
        for &(w, _) in &experiments::RESOLUTION_GRID {
            if spec.features.sax.motif_length > w {
                return Err(config_err(format!(
                    "motif length {} exceeds {w} PAA segments",
                    spec.features.sax.motif_length
                )));
            }
        }
    }
    let mut log = ctx.log("fingerprint");
    let corpus = load_curves(&a.corpus, &mut log)?;
    let corpus = filtered(&corpus, &a.test, &spec);
    let outcomes = match a.experiment {
        ExperimentArg::Baseline => vec![experiments::run_baseline(&corpus, &spec)?],
        ExperimentArg::Resolution => {
            experiments::run_resolution_sweep(&corpus, &spec, &experiments::RESOLUTION_GRID)?
        }
        ExperimentArg::Multifeature => experiments::run_multifeature(&corpus, &spec)?,
    };
    write_outcomes(&a.out, &outcomes, &mut log)?;
    log.finish(&a.out, a)
}

pub fn attribute(ctx: &Ctx, a: &FingerprintArgs) -> anyhow::Result<()> {
    let features = feature_spec(a.feature_kind, &a.sax, (16, 5, 4))?;
    let spec = run_spec(features, &a.test, ctx.seed)?;
    let mut log = ctx.log("attribute");
    let corpus = load_curves(&a.corpus, &mut log)?;
    let corpus = filtered(&corpus, &a.test, &spec);
    let set = experiments::build_features(&corpus, &spec.features)?;
    let report = attribute_all(&set, spec.topk)?;
    log::info!(
        "top-1 {:.3}, top-{} {:.3}, {:.1}x chance over {} authors",
        report.top1,
        report.k,
        report.topk,
        report.times_chance,
        report.n_authors
    );
    let path = a.out.join(format!("attribution_{}.json", spec.features.label()));
    store::write_json(&path, &report)?;
    log.output(&path);
    log.finish(&a.out, a)
}

pub fn windows(ctx: &Ctx, a: &WindowsArgs) -> anyhow::Result<()> {
    if a.windows.is_empty() {
        return Err(config_err("--windows needs at least one size"));
    }
    let mut features = FeatureSpec::new(FeatureKind::WindowMotifs, sax_config(&a.sax, (8, 5, 4)));
    features.drop_degenerate = a.sax.drop_degenerate;
    for &w in &a.windows {
        let mut f = features;
        f.sax.window_size = Some(w);
        f.validate()?;
    }
    features.sax.window_size = a.windows.first().copied();
    let spec = run_spec(features, &a.test, ctx.seed)?;
    let mut log = ctx.log("windows");
    let corpus = load_curves(&a.corpus, &mut log)?;
    let corpus = filtered(&corpus, &a.test, &spec);
    let outcomes = experiments::run_windows(&corpus, &spec, &a.windows)?;
    write_outcomes(&a.out, &outcomes, &mut log)?;
    log.finish(&a.out, a)
}

pub fn cluster(ctx: &Ctx, a: &ClusterArgs) -> anyhow::Result<()> {
    let features = feature_spec(a.feature_kind, &a.sax, (16, 5, 4))?;
    let mut spec = ClusterSpec::new(run_spec(features, &a.test, ctx.seed)?);
    if let Some(m) = a.test.min_books {
        spec.run.fingerprint.min_books = m;
    }
    spec.paa_segments = a.cluster_paa;
    spec.k_min = a.k_min;
    spec.k_max = a.k_max;
    if a.k_min < 2 || a.k_max < a.k_min {
        return Err(config_err(format!("k range {}..={} is invalid", a.k_min, a.k_max)));
    }
    if a.cluster_paa < 2 {
        return Err(config_err("--cluster-paa must be >= 2"));
    }
    let mut log = ctx.log("cluster");
    let corpus = load_curves(&a.corpus, &mut log)?;
    let min_len = a.test.min_paragraphs.saturating_sub(1).max(a.cluster_paa).max(spec.run.features.min_len());
    let corpus = corpus.filter(min_len, 1);
    let result = experiments::run_within_cluster(&corpus, &spec)?;
    log::info!(
        "k = {} (silhouette {:.3}); pooled within-cluster significance {:.1}% over {} authors",
        result.report.k,
        result.report.silhouette,
        result.report.pooled_pct_significant,
        result.report.n_tested
    );
    let path = a.out.join(format!("cluster_{}.json", spec.run.features.label()));
    store::write_json(&path, &result)?;
    log.output(&path);
    log.finish(&a.out, a)
}

fn parse_range(s: &str) -> anyhow::Result<(usize, usize)> {
    let parsed = s
        .split_once(':')
        .and_then(|(lo, hi)| Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?)));
    parsed.ok_or_else(|| config_err(format!("--paragraphs expects min:max, got {s}")))
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> anyhow::Result<()> {
    let mut cfg = SynthConfig::new(a.authors, a.books, a.archetype.into(), ctx.seed);
    cfg.paragraphs = parse_range(&a.paragraphs)?;
    cfg.strength = a.strength;
    if !(a.strength.is_finite() && a.strength >= 0.0) {
        return Err(config_err("--strength must be finite and >= 0"));
    }
    let mut log = ctx.log("synth");
    let generated = synth::gen_corpus(&cfg)?;
    let layout = CorpusLayout::new(&a.out);
    generated.manifest.save(&layout.manifest())?;
    generated.corpus.save(&layout)?;
    let profiles = a.out.join("profiles.json");
    store::write_json(&profiles, &generated.profiles)?;
    log.output(&layout.manifest());
    log.output(&layout.curves());
    log.output(&profiles);
    if let Some(dir) = &a.text {
        synth::write_text_corpus(dir, &generated.manifest, ctx.seed)?;
        log.output(dir);
    }
    log::info!(
        "generated {} books by {} {:?} authors",
        generated.corpus.len(),
        cfg.n_authors,
        cfg.archetype
    );
    log.finish(&a.out, a)
}

fn result_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.ends_with(".json")
                && !name.ends_with(".run_config.json")
                && !name.ends_with(".run_manifest.json")
                && !name.ends_with(".skipped.json")
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn report(ctx: &Ctx, a: &ReportArgs) -> anyhow::Result<()> {
    let mut log = ctx.log("report");
    require(&a.results)?;
    let mut results: Vec<(String, ExperimentResult)> = Vec::new();
    for path in result_files(&a.results)? {
        match store::read_json::<ExperimentResult>(&path) {
            Ok(r) => {
                log.input(&path)?;
                let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                results.push((stem, r));
            }
            Err(Error::Json { .. }) => log::debug!("{} is not an experiment result", path.display()),
            Err(e) => return Err(e.into()),
        }
    }
    if results.is_empty() {
        log::warn!("no experiment results under {}", a.results.display());
    }
    let all: Vec<ExperimentResult> = results.iter().map(|(_, r)| r.clone()).collect();

    let aggregate = a.out.join("aggregate.csv");
    report::write_aggregate_csv(&aggregate, &all)?;
    log.output(&aggregate);
    for (stem, r) in &results {
        let csv = a.out.join(format!("authors_{stem}.csv"));
        report::write_author_csv(&csv, r)?;
        log.output(&csv);
        let svg = a.out.join(format!("effects_{stem}.svg"));
        report::write_svg(&svg, &report::effect_histogram_svg(r, a.bins))?;
        log.output(&svg);
    }
    let resolution: Vec<ExperimentResult> = all.iter().filter(|r| r.experiment == "resolution").cloned().collect();
    if !resolution.is_empty() {
        let svg = a.out.join("resolution.svg");
        report::write_svg(&svg, &report::resolution_lines_svg(&resolution))?;
        log.output(&svg);
    }
    let scales: Vec<ExperimentResult> = all
        .iter()
        .filter(|r| r.experiment == "windows" || r.experiment == "multifeature")
        .cloned()
        .collect();
    if !scales.is_empty() {
        let svg = a.out.join("multiscale.svg");
        report::write_svg(&svg, &report::multiscale_bars_svg(&scales))?;
        log.output(&svg);
    }
    if let Some(root) = &a.corpus {
        let corpus = load_curves(root, &mut log)?;
        let csv = a.out.join("scalars.csv");
        report::write_scalar_csv(&csv, &corpus)?;
        log.output(&csv);
    }
    log.finish(&a.out, a)
}
