//! On-disk artifact formats.
//!
//! Dense per-book arrays (embedding matrices, novelty curves) use one binary
//! layout:
//!
//! ```text
//! offset  size            field
//! 0       4               magic "NVFP"
//! 4       4               format version (u32 LE)
//! 8       4               row count (u32 LE)
//! 12      4               dim (u32 LE)
//! 16      4 * rows * dim  row-major f32 LE
//! end     8               checksum (u64 LE): first 8 bytes of SHA-256 over all preceding bytes
//! ```
//!
//! Curves are stored with `dim = 1`. A corpus-level JSON index maps each
//! `book_id` to its file, relative to the index.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::digest64;

pub const MAGIC: [u8; 4] = *b"NVFP";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;
const TRAILER_LEN: usize = 8;

/// Row-major `f32` matrix, the in-memory form of one binary artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct F32Matrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl F32Matrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Invalid(format!(
                "matrix data has {} values, expected {rows} x {dim}",
                data.len()
            )));
        }
        if rows > u32::MAX as usize || dim > u32::MAX as usize {
            return Err(Error::Invalid("matrix too large for u32 header".into()));
        }
        Ok(F32Matrix { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Invalid("ragged matrix rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    /// A single-column matrix holding a series.
    pub fn column(values: &[f64]) -> Self {
        F32Matrix {
            rows: values.len(),
            dim: 1,
            data: values.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

pub fn encode(m: &F32Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data.len() + TRAILER_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim as u32).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let sum = digest64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Decode a binary artifact. `path` is used only for diagnostics.
pub fn decode(bytes: &[u8], path: &Path) -> Result<F32Matrix> {
    let len = bytes.len();
    if len < HEADER_LEN + TRAILER_LEN {
        return Err(Error::Truncated {
            path: path.into(),
            len,
            expected: HEADER_LEN + TRAILER_LEN,
        });
    }
    let rows = u32_at(bytes, 8) as usize;
    let dim = u32_at(bytes, 12) as usize;
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN + TRAILER_LEN))
        .unwrap_or(usize::MAX);

    let (body, trailer) = bytes.split_at(len - TRAILER_LEN);
    let stored = u64::from_le_bytes(trailer.try_into().unwrap());
    if digest64(body) != stored {
        // A short file also fails the checksum; report what the header implies.
        if expected > len {
            return Err(Error::Truncated {
                path: path.into(),
                len,
                expected,
            });
        }
        return Err(Error::Checksum { path: path.into() });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            path: path.into(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if expected != len {
        return Err(Error::Truncated {
            path: path.into(),
            len,
            expected,
        });
    }
    let data = body[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(F32Matrix { rows, dim, data })
}

pub fn write_matrix(path: &Path, m: &F32Matrix) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, encode(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<F32Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// A file name for `book_id` that is safe on every platform.
///
/// Identifiers are caller supplied and may contain path separators, so the
/// name keeps a readable prefix and appends a digest to stay unique.
pub fn file_stem_for(book_id: &str) -> String {
    let readable: String = book_id
        .chars()
        .take(48)
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{readable}-{:016x}", digest64(book_id.as_bytes()))
}

/// A directory of per-book binary artifacts plus its `index.json`.
#[derive(Debug, Clone)]
pub struct MatrixStore {
    dir: PathBuf,
    index: BTreeMap<String, String>,
}

impl MatrixStore {
    pub const INDEX: &'static str = "index.json";

    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(MatrixStore {
            dir,
            index: BTreeMap::new(),
        })
    }

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let index = read_json(&dir.join(Self::INDEX))?;
        Ok(MatrixStore { dir, index })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn index(&self) -> &BTreeMap<String, String> {
        &self.index
    }

    pub fn contains(&self, book_id: &str) -> bool {
        self.index.contains_key(book_id)
    }

    /// Write one artifact. Safe to call for distinct books in parallel; call
    /// [`MatrixStore::register`] and [`MatrixStore::save_index`] afterwards
    /// from a single thread.
    pub fn write(&self, book_id: &str, m: &F32Matrix) -> Result<String> {
        let rel = format!("{}.nvfp", file_stem_for(book_id));
        write_matrix(&self.dir.join(&rel), m)?;
        Ok(rel)
    }

    pub fn register(&mut self, book_id: &str, rel: String) {
        self.index.insert(book_id.to_string(), rel);
    }

    pub fn put(&mut self, book_id: &str, m: &F32Matrix) -> Result<()> {
        let rel = self.write(book_id, m)?;
        self.register(book_id, rel);
        Ok(())
    }

    pub fn save_index(&self) -> Result<()> {
        write_json(&self.dir.join(Self::INDEX), &self.index)
    }

    pub fn get(&self, book_id: &str) -> Result<F32Matrix> {
        let rel = self
            .index
            .get(book_id)
            .ok_or_else(|| Error::Invalid(format!("no stored artifact for book {book_id}")))?;
        read_matrix(&self.dir.join(rel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> F32Matrix {
        F32Matrix::from_rows(&[vec![1.0, -2.5, f32::MIN_POSITIVE], vec![0.1, 3.0e-20, 7.0]])
            .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample();
        let back = decode(&encode(&m), Path::new("mem")).unwrap();
        assert_eq!(m.rows(), back.rows());
        assert_eq!(m.dim(), back.dim());
        let a: Vec<u32> = m.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn header_is_little_endian() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..4], b"NVFP");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[3, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 6 * 4 + 8);
    }

    #[test]
    fn corrupted_header_fails_checksum() {
        let mut bytes = encode(&sample());
        bytes[1] ^= 0x20;
        assert!(matches!(
            decode(&bytes, Path::new("x")),
            Err(Error::Checksum { .. })
        ));
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = encode(&sample());
        let err = decode(&bytes[..bytes.len() - 5], Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }), "{err}");
        let err = decode(&bytes[..10], Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }), "{err}");
    }

    #[test]
    fn foreign_version_is_rejected() {
        let mut bytes = encode(&sample());
        bytes[4] = 9;
        let n = bytes.len() - 8;
        let sum = digest64(&bytes[..n]);
        bytes[n..].copy_from_slice(&sum.to_le_bytes());
        assert!(matches!(
            decode(&bytes, Path::new("x")),
            Err(Error::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn store_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let mut store = MatrixStore::create(tmp.path().join("emb")).unwrap();
        store.put("author/book one", &sample()).unwrap();
        store.save_index().unwrap();
        let reopened = MatrixStore::open(tmp.path().join("emb")).unwrap();
        assert_eq!(reopened.get("author/book one").unwrap(), sample());
    }

    #[test]
    fn file_stems_are_distinct_and_safe() {
        let a = file_stem_for("a/b");
        let b = file_stem_for("a_b");
        assert_ne!(a, b);
        assert!(!a.contains('/'));
    }
}
