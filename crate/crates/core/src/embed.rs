//! Paragraph embeddings behind a pluggable backend.
//!
//! [`HttpBackend`] talks to an embedding server over a minimal JSON protocol;
//! [`PseudoEmbedder`] is a deterministic stand-in for tests and synthetic runs.
//! Whatever the backend returns is re-normalized to unit length, so novelty
//! is just `1 - dot`.

use std::thread;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::BookRecord;
use crate::error::{Error, Result};
use crate::seed;
use crate::store::{F32Matrix, MatrixStore};

pub const DEFAULT_DIM: usize = 768;
pub const DEFAULT_BATCH: usize = 64;
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const LONG_PARAGRAPH_CHARS: usize = 8_192;
const UNIT_NORM_TOL: f64 = 1e-5;

pub trait EmbeddingBackend: Send + Sync {
    fn dim(&self) -> usize;

    /// One vector per input text, in input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;
}

/// Unit-normalized paragraph embeddings of one book.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub book_id: String,
    rows: F32Matrix,
}

impl EmbeddingMatrix {
    /// Wrap stored rows, checking that every row is finite and unit norm.
    pub fn new(book_id: impl Into<String>, rows: F32Matrix) -> Result<Self> {
        let book_id = book_id.into();
        for (i, row) in rows.row_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("book {book_id} embedding row {i}")));
            }
            let norm = row.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Invalid(format!(
                    "book {book_id} embedding row {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(EmbeddingMatrix { book_id, rows })
    }

    /// Normalize raw vectors and wrap them.
    pub fn from_raw(book_id: impl Into<String>, raw: &[Vec<f64>]) -> Result<Self> {
        let book_id = book_id.into();
        let dim = raw.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(raw.len() * dim);
        for (i, v) in raw.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            let unit = normalize(v).ok_or_else(|| {
                Error::NonFinite(format!("book {book_id} embedding row {i} (zero or NaN)"))
            })?;
            data.extend(unit.into_iter().map(|x| x as f32));
        }
        let rows = F32Matrix::new(raw.len(), dim, data)?;
        Self::new(book_id, rows)
    }

    pub fn rows(&self) -> &F32Matrix {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.dim()
    }

    pub fn save(&self, store: &mut MatrixStore) -> Result<()> {
        store.put(&self.book_id, &self.rows)
    }

    pub fn load(store: &MatrixStore, book_id: &str) -> Result<Self> {
        Self::new(book_id, store.get(book_id)?)
    }
}

/// Unit vector in the direction of `v`, or `None` for zero or non-finite input.
pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| x / norm).collect())
}

/// Embed every paragraph of `book`, `batch_size` paragraphs per request.
pub fn embed_book(
    book: &BookRecord,
    backend: &dyn EmbeddingBackend,
    batch_size: usize,
) -> Result<EmbeddingMatrix> {
    if book.paragraph_count() < 2 {
        return Err(Error::TooShort {
            len: book.paragraph_count(),
            need: 2,
        });
    }
    let dim = backend.dim();
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(book.paragraph_count());
    for (i, p) in book.paragraphs().iter().enumerate() {
        let n = p.chars().count();
        if n > LONG_PARAGRAPH_CHARS {
            log::warn!(
                "book {} paragraph {i} has {n} characters; the backend may truncate it",
                book.book_id
            );
        }
    }
    for chunk in book.paragraphs().chunks(batch_size.max(1)) {
        let texts: Vec<&str> = chunk.iter().map(String::as_str).collect();
        let vectors = backend.embed_batch(&texts)?;
        if vectors.len() != texts.len() {
            return Err(Error::Backend(format!(
                "{} vectors returned for {} texts",
                vectors.len(),
                texts.len()
            )));
        }
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding for book {}", book.book_id)));
            }
            raw.push(v);
        }
    }
    EmbeddingMatrix::from_raw(book.book_id.clone(), &raw)
}

/// Deterministic unit vector for `text`: `dim` standard normals from a
/// ChaCha stream keyed by a digest of the text and `seed`, normalized.
pub fn pseudo_embed(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 2, "pseudo_embed needs dim >= 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[text]));
    let draws: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    // A zero draw vector has probability zero; retrying the stream is not needed.
    normalize(&draws).expect("standard normal draws are finite and nonzero")
}

#[derive(Debug, Clone, Copy)]
pub struct PseudoEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl EmbeddingBackend for PseudoEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts
            .iter()
            .map(|t| pseudo_embed(t, self.dim, self.seed))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub batch: usize,
    pub timeout_ms: u64,
    pub dim: usize,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            batch: DEFAULT_BATCH,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            dim: DEFAULT_DIM,
            max_retries: 5,
            backoff_base_ms: 100,
        }
    }

    /// Read `EMBED_ENDPOINT`, `EMBED_BATCH`, `EMBED_TIMEOUT_MS`, `EMBED_DIM`.
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let endpoint = get("EMBED_ENDPOINT")
            .ok_or_else(|| Error::Config("EMBED_ENDPOINT is not set".into()))?;
        let mut cfg = HttpConfig::new(endpoint);
        let num = |key: &str, default: u64| -> Result<u64> {
            match get(key) {
                None => Ok(default),
                Some(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}={v} is not a number"))),
            }
        };
        cfg.batch = num("EMBED_BATCH", DEFAULT_BATCH as u64)? as usize;
        cfg.timeout_ms = num("EMBED_TIMEOUT_MS", DEFAULT_TIMEOUT_MS)?;
        cfg.dim = num("EMBED_DIM", DEFAULT_DIM as u64)? as usize;
        if cfg.batch == 0 || cfg.dim < 2 {
            return Err(Error::Config("EMBED_BATCH must be > 0 and EMBED_DIM >= 2".into()));
        }
        Ok(cfg)
    }

    /// Wait before retry number `attempt` (0-based): `2^attempt * base`.
    pub fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.backoff_base_ms.saturating_mul(1u64 << attempt.min(20)))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    // `null` entries decode as `None` and are reported as non-finite.
    embeddings: Vec<Vec<Option<f64>>>,
}

/// Client for an embedding server: `POST {"texts": [...]}` answered by
/// `{"embeddings": [[...], ...]}`. Non-200 replies and transport errors are
/// retried with exponential backoff.
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::Backend(e.to_string()))?;
        Ok(HttpBackend { config, client })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, texts: &[&str]) -> std::result::Result<EmbedResponse, String> {
        let resp = self
            .client
            .post(&self.config.endpoint)
            .json(&EmbedRequest { texts })
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        if status != reqwest::StatusCode::OK {
            return Err(format!("HTTP {status}"));
        }
        resp.json::<EmbedResponse>().map_err(|e| e.to_string())
    }
}

impl EmbeddingBackend for HttpBackend {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut attempt = 0;
        let resp = loop {
            match self.attempt(texts) {
                Ok(r) => break r,
                Err(msg) if attempt < self.config.max_retries => {
                    let wait = self.config.backoff(attempt);
                    log::warn!(
                        "embedding request failed ({msg}); retry {}/{} in {wait:?}",
                        attempt + 1,
                        self.config.max_retries
                    );
                    thread::sleep(wait);
                    attempt += 1;
                }
                Err(msg) => {
                    return Err(Error::Backend(format!(
                        "{} unreachable after {} attempts: {msg}",
                        self.config.endpoint,
                        attempt + 1
                    )))
                }
            }
        };
        resp.embeddings
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|v| v.ok_or_else(|| Error::NonFinite("embedding response".into())))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(paragraphs: &[&str]) -> BookRecord {
        BookRecord::new("b", "a", "t", paragraphs.iter().map(|s| s.to_string()).collect())
            .unwrap()
    }

    struct Fixed(Vec<Vec<f64>>);

    impl EmbeddingBackend for Fixed {
        fn dim(&self) -> usize {
            768
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
            Ok(self.0.iter().take(texts.len()).cloned().collect())
        }
    }

    #[test]
    fn pseudo_embed_is_deterministic_unit() {
        let a = pseudo_embed("It was a dark and stormy night.", 768, 42);
        let b = pseudo_embed("It was a dark and stormy night.", 768, 42);
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_ne!(a, pseudo_embed("It was a dark and stormy night.", 768, 43));
    }

    #[test]
    fn embed_book_shape_and_norm() {
        let backend = PseudoEmbedder { dim: 768, seed: 1 };
        let m = embed_book(&book(&["first", "second"]), &backend, 64).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.dim(), 768);
        for row in m.rows().row_iter() {
            let n: f64 = row.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_text_gives_identical_rows() {
        let backend = PseudoEmbedder { dim: 32, seed: 9 };
        let m = embed_book(&book(&["same", "same", "other"]), &backend, 2).unwrap();
        assert_eq!(m.rows().row(0), m.rows().row(1));
        assert_ne!(m.rows().row(0), m.rows().row(2));
    }

    #[test]
    fn batching_preserves_order() {
        let backend = PseudoEmbedder { dim: 16, seed: 5 };
        let texts = ["p0", "p1", "p2", "p3", "p4"];
        let one = embed_book(&book(&texts), &backend, 1).unwrap();
        let all = embed_book(&book(&texts), &backend, 64).unwrap();
        assert_eq!(one, all);
        let rev: Vec<&str> = texts.iter().rev().copied().collect();
        let r = embed_book(&book(&rev), &backend, 2).unwrap();
        for i in 0..texts.len() {
            assert_eq!(r.rows().row(i), all.rows().row(texts.len() - 1 - i));
        }
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let backend = Fixed(vec![vec![0.5; 512]; 2]);
        assert!(matches!(
            embed_book(&book(&["a", "b"]), &backend, 64),
            Err(Error::DimensionMismatch {
                expected: 768,
                found: 512
            })
        ));
    }

    #[test]
    fn nan_is_rejected() {
        let mut v = vec![vec![0.5; 768]; 2];
        v[1][3] = f64::NAN;
        assert!(matches!(
            embed_book(&book(&["a", "b"]), &Fixed(v), 64),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn env_config() {
        let cfg = HttpConfig::from_lookup(|k| match k {
            "EMBED_ENDPOINT" => Some("http://localhost:1/embed".into()),
            "EMBED_BATCH" => Some("8".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.batch, 8);
        assert_eq!(cfg.dim, 768);
        assert_eq!(cfg.timeout_ms, 30_000);
        assert_eq!(cfg.backoff(0), Duration::from_millis(100));
        assert_eq!(cfg.backoff(3), Duration::from_millis(800));
        assert!(HttpConfig::from_lookup(|_| None).is_err());
    }

    #[test]
    fn stored_matrix_must_be_unit_norm() {
        let rows = F32Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!(EmbeddingMatrix::new("b", rows).is_err());
    }
}
