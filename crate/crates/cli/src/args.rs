use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nfp_core::fingerprint::FeatureKind;
use nfp_core::synth::Archetype;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser, Serialize)]
#[command(name = "nfp", version, about = "Novelty-curve author fingerprints")]
pub struct Cli {
    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Segment `<corpus>/<author>/<title>.txt` files and write a manifest.
    Ingest(IngestArgs),
    /// Embed every paragraph of an ingested corpus.
    Embed(EmbedArgs),
    /// Novelty curves and scalar dynamics from embeddings.
    Novelty(CorpusArgs),
    /// Per-book feature files of one kind.
    Features(FeaturesArgs),
    /// Fingerprint experiments: baseline, resolution sweep, multi-feature.
    Fingerprint(FingerprintArgs),
    /// Nearest-centroid attribution only.
    Attribute(FingerprintArgs),
    /// Split-half window-motif fingerprints with the slope baseline.
    Windows(WindowsArgs),
    /// k-means on PAA profiles and within-cluster fingerprints.
    Cluster(ClusterArgs),
    /// Generate a synthetic curve corpus.
    Synth(SynthArgs),
    /// CSV tables and SVG plots from results files.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    /// Prepared corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Directory of `<author>/<title>.txt` files.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Prepared corpus directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = nfp_core::corpus::DEFAULT_MIN_PARAGRAPH_CHARS)]
    pub min_chars: usize,
    #[arg(long, default_value_t = 5)]
    pub min_books: usize,
    #[arg(long, default_value_t = 2)]
    pub min_paragraphs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Deterministic hash embeddings, for testing the plumbing.
    Pseudo,
    /// HTTP service configured by EMBED_* variables.
    Http,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendKind::Pseudo)]
    pub backend: BackendKind,
    /// Overrides EMBED_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Overrides EMBED_DIM (pseudo backend default 768).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Overrides EMBED_BATCH.
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Sax,
    Scalars,
    Paa,
    Windows,
    Combined,
    Slopes,
}

impl From<KindArg> for FeatureKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Sax => FeatureKind::SaxMotifs,
            KindArg::Scalars => FeatureKind::Scalars,
            KindArg::Paa => FeatureKind::PaaVector,
            KindArg::Windows => FeatureKind::WindowMotifs,
            KindArg::Combined => FeatureKind::Combined,
            KindArg::Slopes => FeatureKind::WindowSlopes,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SaxArgs {
    /// PAA segments.
    #[arg(long)]
    pub paa: Option<usize>,
    #[arg(long)]
    pub alphabet: Option<usize>,
    /// Motif length.
    #[arg(long)]
    pub kgram: Option<usize>,
    /// Sliding-window length in curve points.
    #[arg(long)]
    pub window: Option<usize>,
    /// Window stride; defaults to half the window.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Leave flat windows out of the motif counts.
    #[arg(long)]
    pub drop_degenerate: bool,
    /// Weight of motif frequencies in the combined kind.
    #[arg(long, default_value_t = 1.0)]
    pub combined_weight: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    #[arg(long, default_value_t = 200)]
    pub n_null: usize,
    #[arg(long, default_value_t = 50)]
    pub n_repeats: usize,
    #[arg(long, default_value_t = nfp_core::fingerprint::DEFAULT_TOPK)]
    pub topk: usize,
    /// Authors with fewer books are dropped.
    #[arg(long)]
    pub min_books: Option<usize>,
    /// Books with fewer paragraphs are dropped.
    #[arg(long, default_value_t = 2)]
    pub min_paragraphs: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Defaults to `<corpus>/features`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KindArg::Sax)]
    pub feature_kind: KindArg,
    #[command(flatten)]
    pub sax: SaxArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentArg {
    Baseline,
    Resolution,
    Multifeature,
}

#[derive(Debug, Args, Serialize)]
pub struct FingerprintArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ExperimentArg::Baseline)]
    pub experiment: ExperimentArg,
    #[arg(long, value_enum, default_value_t = KindArg::Sax)]
    pub feature_kind: KindArg,
    #[command(flatten)]
    pub sax: SaxArgs,
    #[command(flatten)]
    pub test: TestArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct WindowsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Window sizes, comma separated.
    #[arg(long = "windows", value_delimiter = ',', default_values_t = nfp_core::experiments::WINDOW_GRID)]
    pub windows: Vec<usize>,
    #[command(flatten)]
    pub sax: SaxArgs,
    #[command(flatten)]
    pub test: TestArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// PAA segments of the clustering profile.
    #[arg(long, default_value_t = 16)]
    pub cluster_paa: usize,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    /// Feature kind tested inside each cluster.
    #[arg(long, value_enum, default_value_t = KindArg::Sax)]
    pub feature_kind: KindArg,
    #[command(flatten)]
    pub sax: SaxArgs,
    #[command(flatten)]
    pub test: TestArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchetypeArg {
    Null,
    Intensity,
    Rhythm,
    Genre,
    GenreIntensity,
}

impl From<ArchetypeArg> for Archetype {
    fn from(a: ArchetypeArg) -> Self {
        match a {
            ArchetypeArg::Null => Archetype::Null,
            ArchetypeArg::Intensity => Archetype::Intensity,
            ArchetypeArg::Rhythm => Archetype::Rhythm,
            ArchetypeArg::Genre => Archetype::Genre,
            ArchetypeArg::GenreIntensity => Archetype::GenreIntensity,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ArchetypeArg::Null)]
    pub archetype: ArchetypeArg,
    #[arg(long, default_value_t = 50)]
    pub authors: usize,
    #[arg(long, default_value_t = 6)]
    pub books: usize,
    /// Paragraph counts as `min:max`.
    #[arg(long, default_value = "151:401")]
    pub paragraphs: String,
    #[arg(long, default_value_t = 1.0)]
    pub strength: f64,
    /// Also write random-word book texts under this directory.
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Directory of results JSON files.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Prepared corpus for the per-book scalar table.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}
