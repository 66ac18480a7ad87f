//! Synthetic corpora with planted author fingerprints.
//!
//! Curves follow an AR(1) process around a level with optional rhythm
//! templates added at jittered periodic offsets. Archetypes decide which
//! parameters differ between authors:
//!
//! | archetype         | varies per author            | shared                  |
//! |-------------------|------------------------------|-------------------------|
//! | `null`            | nothing                      | everything              |
//! | `intensity`       | level, innovation sd         | rhythm (none)           |
//! | `rhythm`          | rhythm template              | level, innovation sd    |
//! | `genre`           | nothing within a group       | group level, sd, template |
//! | `genre_intensity` | innovation sd, small level offset | group level        |
//!
//! `strength` blends each author-specific parameter with the background:
//! 0 gives the background profile, 1 the full author-specific value.

use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusManifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::experiments::{CurveBook, CurveCorpus};
use crate::novelty::NoveltyCurve;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Null,
    Intensity,
    Rhythm,
    Genre,
    GenreIntensity,
}

impl std::str::FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(Archetype::Null),
            "intensity" => Ok(Archetype::Intensity),
            "rhythm" => Ok(Archetype::Rhythm),
            "genre" => Ok(Archetype::Genre),
            "genre_intensity" | "genre-intensity" => Ok(Archetype::GenreIntensity),
            _ => Err(Error::Config(format!("unknown archetype {s:?}"))),
        }
    }
}

/// Generator parameters shared by all authors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub background_level: f64,
    pub background_sd: f64,
    pub background_phi: f64,
    /// Intensity: levels spread over `background_level ± level_spread`.
    pub level_spread: f64,
    /// Intensity: innovation sd spread over `background_sd × [1/r, r]`.
    pub sd_ratio: f64,
    /// Rhythm: template lengths, inclusive.
    pub template_len: (usize, usize),
    /// Rhythm: template standard deviation at strength 1.
    pub template_amplitude: f64,
    /// Rhythm: extra gap between template copies, drawn from `0..=jitter`.
    pub jitter: usize,
    pub genre_groups: usize,
    /// Genre: group levels spread over `background_level ± genre_level_spread`.
    pub genre_level_spread: f64,
    /// Genre-intensity: author level offsets within `± genre_author_level`.
    pub genre_author_level: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            background_level: 0.45,
            background_sd: 0.08,
            background_phi: 0.3,
            level_spread: 0.06,
            sd_ratio: 3.5,
            template_len: (6, 12),
            template_amplitude: 0.2,
            jitter: 2,
            genre_groups: 4,
            genre_level_spread: 0.3,
            genre_author_level: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorProfile {
    pub author_id: String,
    pub base_level: f64,
    pub level_sd: f64,
    pub ar_coefficient: f64,
    pub rhythm_template: Option<Vec<f64>>,
    pub jitter: usize,
    pub strength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
}

impl AuthorProfile {
    pub fn background(author_id: &str, params: &SynthParams) -> Self {
        AuthorProfile {
            author_id: author_id.to_string(),
            base_level: params.background_level,
            level_sd: params.background_sd,
            ar_coefficient: params.background_phi,
            rhythm_template: None,
            jitter: params.jitter,
            strength: 0.0,
            group: None,
        }
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Stratum centre in `[-1, 1]` for slot `k` of `n`, with a little jitter.
fn stratum<R: Rng>(k: usize, n: usize, rng: &mut R) -> f64 {
    let u = (k as f64 + 0.25 + 0.5 * rng.random::<f64>()) / n as f64;
    2.0 * u - 1.0
}

fn random_template<R: Rng>(len: usize, amplitude: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let mean = raw.iter().sum::<f64>() / len as f64;
    let sd = (raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / len as f64).sqrt();
    if sd < 1e-9 {
        return vec![0.0; len];
    }
    raw.iter().map(|x| amplitude * (x - mean) / sd).collect()
}

/// Profile for the `ordinal`-th of `n_authors` authors.
///
/// Intensity levels and sds are stratified over the authors (two independent
/// seeded permutations), so any two authors' levels differ by at least
/// `level_spread / n_authors` at strength 1.
pub fn gen_profile(
    author_id: &str,
    ordinal: usize,
    n_authors: usize,
    archetype: Archetype,
    strength: f64,
    master_seed: u64,
    params: &SynthParams,
) -> Result<AuthorProfile> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::Config(format!("strength {strength} outside [0, 1]")));
    }
    if ordinal >= n_authors {
        return Err(Error::Config("author ordinal out of range".into()));
    }
    let mut p = AuthorProfile::background(author_id, params);
    p.strength = strength;
    let mut rng = seed::stream(master_seed, &["profile", author_id]);
    let mut perm_rng = seed::stream(master_seed, &["strata"]);
    let mut level_perm: Vec<usize> = (0..n_authors).collect();
    let mut sd_perm: Vec<usize> = (0..n_authors).collect();
    level_perm.shuffle(&mut perm_rng);
    sd_perm.shuffle(&mut perm_rng);

    match archetype {
        Archetype::Null => {}
        Archetype::Intensity => {
            let l = stratum(level_perm[ordinal], n_authors, &mut rng);
            let s = stratum(sd_perm[ordinal], n_authors, &mut rng);
            p.base_level = lerp(p.base_level, params.background_level + l * params.level_spread, strength);
            p.level_sd = lerp(p.level_sd, params.background_sd * params.sd_ratio.powf(s), strength);
        }
        Archetype::Rhythm => {
            let (lo, hi) = params.template_len;
            let len = rng.random_range(lo..=hi.max(lo));
            let t = random_template(len, params.template_amplitude * strength, &mut rng);
            if strength > 0.0 {
                p.rhythm_template = Some(t);
            }
        }
        Archetype::Genre | Archetype::GenreIntensity => {
            let g = params.genre_groups.max(1);
            let group = ordinal % g;
            p.group = Some(group);
            let centre = if g == 1 {
                0.0
            } else {
                2.0 * group as f64 / (g - 1) as f64 - 1.0
            };
            let group_level = params.background_level + centre * params.genre_level_spread;
            p.base_level = lerp(p.base_level, group_level, strength);
            if archetype == Archetype::GenreIntensity {
                let l = stratum(level_perm[ordinal], n_authors, &mut rng);
                let s = stratum(sd_perm[ordinal], n_authors, &mut rng);
                p.base_level += strength * l * params.genre_author_level;
                p.level_sd = lerp(p.level_sd, params.background_sd * params.sd_ratio.powf(s), strength);
            }
        }
    }
    Ok(p)
}

/// AR(1) curve around the profile level plus template copies, clamped to
/// `[0, 2]`.
pub fn gen_curve(profile: &AuthorProfile, length: usize, curve_seed: u64) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(Error::TooShort { len: length, need: 2 });
    }
    let mut rng = seed::stream(curve_seed, &["curve"]);
    let (mu, phi, sd) = (profile.base_level, profile.ar_coefficient, profile.level_sd);
    let mut out = Vec::with_capacity(length);
    if sd > 0.0 {
        let eps = Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()))?;
        let stationary = sd / (1.0 - phi * phi).sqrt();
        let z: f64 = StandardNormal.sample(&mut rng);
        let mut x = mu + stationary * z;
        for _ in 0..length {
            out.push(x);
            x = mu + phi * (x - mu) + eps.sample(&mut rng);
        }
    } else {
        out.resize(length, mu);
    }
    if let Some(t) = profile.rhythm_template.as_ref().filter(|t| !t.is_empty()) {
        let mut pos = rng.random_range(0..t.len());
        while pos < length {
            for (k, v) in t.iter().enumerate() {
                if let Some(slot) = out.get_mut(pos + k) {
                    *slot += v;
                }
            }
            pos += t.len() + rng.random_range(0..=profile.jitter);
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 2.0));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_authors: usize,
    pub books_per_author: usize,
    /// Paragraph counts, inclusive; a curve has one value fewer.
    pub paragraphs: (usize, usize),
    pub archetype: Archetype,
    pub strength: f64,
    pub seed: u64,
    #[serde(default)]
    pub params: SynthParams,
}

impl SynthConfig {
    pub fn new(n_authors: usize, books_per_author: usize, archetype: Archetype, seed: u64) -> Self {
        SynthConfig {
            n_authors,
            books_per_author,
            paragraphs: (151, 401),
            archetype,
            strength: 1.0,
            seed,
            params: SynthParams::default(),
        }
    }
}

/// A generated corpus: manifest, curves and the profiles behind them.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub manifest: CorpusManifest,
    pub corpus: CurveCorpus,
    pub profiles: Vec<AuthorProfile>,
}

pub fn author_id(i: usize) -> String {
    format!("author_{i:04}")
}

pub fn gen_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    let (lo, hi) = cfg.paragraphs;
    if cfg.n_authors == 0 || cfg.books_per_author == 0 || lo < 3 || hi < lo {
        return Err(Error::Config(format!(
            "invalid corpus size: {} authors x {} books, paragraphs {lo}..={hi}",
            cfg.n_authors, cfg.books_per_author
        )));
    }
    let profiles = (0..cfg.n_authors)
        .map(|i| {
            gen_profile(
                &author_id(i),
                i,
                cfg.n_authors,
                cfg.archetype,
                cfg.strength,
                cfg.seed,
                &cfg.params,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::new();
    let mut books = Vec::new();
    for p in &profiles {
        for b in 0..cfg.books_per_author {
            let book_id = format!("{}/book_{b:02}", p.author_id);
            let mut rng = seed::stream(cfg.seed, &["length", &book_id]);
            let paragraphs = rng.random_range(lo..=hi);
            let values = gen_curve(p, paragraphs - 1, seed::derive(cfg.seed, &["curve", &book_id]))?;
            entries.push(ManifestEntry {
                book_id: book_id.clone(),
                author_id: p.author_id.clone(),
                title: format!("Synthetic book {b} by {}", p.author_id),
                paragraph_count: paragraphs,
                source_path: String::new(),
                synthetic: true,
            });
            books.push(CurveBook {
                book_id: book_id.clone(),
                author_id: p.author_id.clone(),
                curve: NoveltyCurve::new(book_id, values)?,
            });
        }
    }
    Ok(SynthCorpus {
        manifest: CorpusManifest::new(entries)?,
        corpus: CurveCorpus::new(books)?,
        profiles,
    })
}

const WORDS: &[&str] = &[
    "the", "river", "night", "letter", "garden", "captain", "silence", "window", "storm", "road",
    "memory", "lantern", "harbor", "promise", "shadow", "village", "winter", "stranger", "bell",
    "journey", "mirror", "orchard", "secret", "train", "morning", "field", "voice", "door",
];

/// Write a plain-text tree (`dir/<author>/<book>.txt`) with one random-word
/// paragraph per paragraph count in the manifest, for exercising ingestion
/// and embedding end to end. The texts do not reproduce the curves.
pub fn write_text_corpus(dir: &Path, manifest: &CorpusManifest, master_seed: u64) -> Result<()> {
    for e in &manifest.books {
        let mut rng = seed::stream(master_seed, &["text", &e.book_id]);
        let mut text = String::new();
        for _ in 0..e.paragraph_count {
            let n = rng.random_range(12..40);
            let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(&mut rng).unwrap()).collect();
            text.push_str(&words.join(" "));
            text.push_str(".\n\n");
        }
        let path = dir.join(format!("{}.txt", e.book_id));
        crate::store::ensure_parent(&path)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::jsd;
    use crate::fingerprint::SparseDist;
    use crate::sax::{sliding_window_profile, MotifTable, SaxConfig};

    fn params() -> SynthParams {
        SynthParams::default()
    }

    #[test]
    fn strength_zero_is_background() {
        let bg = AuthorProfile::background("a", &params());
        for arch in [
            Archetype::Null,
            Archetype::Intensity,
            Archetype::Rhythm,
            Archetype::Genre,
            Archetype::GenreIntensity,
        ] {
            let p = gen_profile("a", 1, 4, arch, 0.0, 9, &params()).unwrap();
            assert_eq!(p.base_level, bg.base_level, "{arch:?}");
            assert_eq!(p.level_sd, bg.level_sd);
            assert_eq!(p.ar_coefficient, bg.ar_coefficient);
            assert_eq!(p.rhythm_template, None);
        }
    }

    #[test]
    fn profiles_are_deterministic() {
        let a = gen_profile("x", 2, 5, Archetype::Rhythm, 1.0, 3, &params()).unwrap();
        let b = gen_profile("x", 2, 5, Archetype::Rhythm, 1.0, 3, &params()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn intensity_levels_are_separated() {
        let p = params();
        for s in 0..50 {
            let a = gen_profile("a", 0, 2, Archetype::Intensity, 1.0, s, &p).unwrap();
            let b = gen_profile("b", 1, 2, Archetype::Intensity, 1.0, s, &p).unwrap();
            assert!((a.base_level - b.base_level).abs() >= p.level_spread / 2.0);
        }
    }

    #[test]
    fn flat_profile_gives_constant_curve() {
        let mut p = AuthorProfile::background("a", &params());
        p.level_sd = 0.0;
        assert_eq!(gen_curve(&p, 10, 1).unwrap(), vec![p.base_level; 10]);
        assert!(gen_curve(&p, 1, 1).is_err());
    }

    #[test]
    fn sample_mean_matches_level() {
        let p = AuthorProfile::background("a", &params());
        let c = gen_curve(&p, 10_000, 77).unwrap();
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        // long-run sd of the mean for AR(1): sd / (1 - phi) / sqrt(n)
        let se = p.level_sd / (1.0 - p.ar_coefficient) / (c.len() as f64).sqrt();
        assert!((mean - p.base_level).abs() < 3.0 * se, "{mean} vs {}", p.base_level);
    }

    #[test]
    fn template_changes_window_motifs() {
        let mut with = AuthorProfile::background("a", &params());
        with.rhythm_template = Some(vec![0.5, -0.5, 0.5, -0.5]);
        let without = AuthorProfile::background("b", &params());
        let cfg = SaxConfig::windowed(20, 8, 5, 4);
        let pooled = |p: &AuthorProfile| {
            let mut t = MotifTable::default();
            for s in 0..30 {
                let c = gen_curve(p, 300, s).unwrap();
                t.add(&sliding_window_profile("x", &c, &cfg, false).unwrap().motifs);
            }
            SparseDist::from_motifs(&t).unwrap()
        };
        let d = jsd(&pooled(&with), &pooled(&without));
        assert!(d > 0.1, "jsd {d}");
    }

    #[test]
    fn corpus_shape() {
        let mut cfg = SynthConfig::new(3, 4, Archetype::Null, 1);
        cfg.paragraphs = (20, 30);
        let c = gen_corpus(&cfg).unwrap();
        assert_eq!(c.manifest.books.len(), 12);
        assert!(c.manifest.books.iter().all(|b| b.synthetic));
        for (e, b) in c.manifest.books.iter().zip(c.corpus.books()) {
            assert_eq!(b.curve.len() + 1, e.paragraph_count);
            assert!((20..=30).contains(&e.paragraph_count));
            assert!(b.curve.values().iter().all(|v| (0.0..=2.0).contains(v)));
        }
        let again = gen_corpus(&cfg).unwrap();
        assert_eq!(again.corpus, c.corpus);
    }
}
