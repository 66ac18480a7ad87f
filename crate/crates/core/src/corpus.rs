//! Corpus ingestion: paragraph segmentation, book records, manifests and the
//! author/book filters.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{self, ensure_parent};

pub const DEFAULT_MIN_PARAGRAPH_CHARS: usize = 20;

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

/// Split raw text into paragraphs.
///
/// Paragraphs are separated by one or more blank (whitespace-only) lines and
/// trimmed. A block shorter than `min_chars` characters is merged into the
/// block that follows it; a short final block is merged into the one before.
pub fn segment_paragraphs(raw: &str, min_chars: usize) -> Result<Vec<String>> {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in raw.lines() {
        if is_blank(line) {
            if !current.is_empty() {
                blocks.push(current.join("\n").trim().to_string());
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n").trim().to_string());
    }

    let mut out: Vec<String> = Vec::with_capacity(blocks.len());
    let mut pending: Option<String> = None;
    for block in blocks {
        let merged = match pending.take() {
            Some(p) => format!("{p}\n\n{block}"),
            None => block,
        };
        if merged.chars().count() < min_chars {
            pending = Some(merged);
        } else {
            out.push(merged);
        }
    }
    if let Some(p) = pending {
        match out.last_mut() {
            Some(last) => {
                last.push_str("\n\n");
                last.push_str(&p);
            }
            None => out.push(p),
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid("text contains no paragraphs".into()));
    }
    Ok(out)
}

/// One book: identifiers plus its ordered paragraphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookRecord {
    pub book_id: String,
    pub author_id: String,
    pub title: String,
    paragraphs: Vec<String>,
}

impl BookRecord {
    pub fn new(
        book_id: impl Into<String>,
        author_id: impl Into<String>,
        title: impl Into<String>,
        paragraphs: Vec<String>,
    ) -> Result<Self> {
        let book_id = book_id.into();
        if paragraphs.iter().any(|p| p.trim().is_empty()) {
            return Err(Error::Invalid(format!("book {book_id}: empty paragraph")));
        }
        if paragraphs.len() < 2 {
            return Err(Error::Invalid(format!(
                "book {book_id}: {} paragraph(s), need at least 2",
                paragraphs.len()
            )));
        }
        Ok(BookRecord {
            book_id,
            author_id: author_id.into(),
            title: title.into(),
            paragraphs,
        })
    }

    pub fn from_text(
        book_id: impl Into<String>,
        author_id: impl Into<String>,
        title: impl Into<String>,
        raw: &str,
        min_chars: usize,
    ) -> Result<Self> {
        let book_id = book_id.into();
        let paragraphs = segment_paragraphs(raw, min_chars).map_err(|_| Error::EmptyBook {
            book_id: book_id.clone(),
        })?;
        Self::new(book_id, author_id, title, paragraphs)
    }

    pub fn paragraphs(&self) -> &[String] {
        &self.paragraphs
    }

    pub fn paragraph_count(&self) -> usize {
        self.paragraphs.len()
    }
}

/// Manifest line: book metadata without text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub book_id: String,
    pub author_id: String,
    pub title: String,
    pub paragraph_count: usize,
    pub source_path: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

impl ManifestEntry {
    pub fn from_book(book: &BookRecord, source_path: impl Into<String>) -> Self {
        ManifestEntry {
            book_id: book.book_id.clone(),
            author_id: book.author_id.clone(),
            title: book.title.clone(),
            paragraph_count: book.paragraph_count(),
            source_path: source_path.into(),
            synthetic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub min_books_per_author: usize,
    pub min_paragraphs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub books: Vec<ManifestEntry>,
    pub filters_applied: Option<FilterSpec>,
}

impl CorpusManifest {
    pub fn new(books: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for b in &books {
            if !seen.insert(b.book_id.as_str()) {
                return Err(Error::Invalid(format!("duplicate book_id {}", b.book_id)));
            }
        }
        Ok(CorpusManifest {
            books,
            filters_applied: None,
        })
    }

    /// Books grouped by author, authors in ascending id order.
    pub fn by_author(&self) -> BTreeMap<&str, Vec<&ManifestEntry>> {
        let mut map: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
        for b in &self.books {
            map.entry(b.author_id.as_str()).or_default().push(b);
        }
        map
    }

    pub fn n_authors(&self) -> usize {
        self.by_author().len()
    }

    /// Write as JSON Lines. Applied filters go to a `.filters.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        let mut text = String::new();
        for b in &self.books {
            text.push_str(&serde_json::to_string(b).map_err(|e| Error::json(path, e))?);
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
        let sidecar = filters_sidecar(path);
        match &self.filters_applied {
            Some(f) => store::write_json(&sidecar, f)?,
            None if sidecar.exists() => {
                fs::remove_file(&sidecar).map_err(|e| Error::io(&sidecar, e))?
            }
            None => {}
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let books = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::json(path, e)))
            .collect::<Result<Vec<ManifestEntry>>>()?;
        let mut m = CorpusManifest::new(books)?;
        let sidecar = filters_sidecar(path);
        if sidecar.exists() {
            m.filters_applied = Some(store::read_json(&sidecar)?);
        }
        Ok(m)
    }
}

fn filters_sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".filters.json");
    path.with_file_name(name)
}

/// Keep books with at least `min_paragraphs` paragraphs whose authors retain
/// at least `min_books` such books. Iterates to a fixed point; input order is
/// preserved.
pub fn filter_corpus(
    manifest: &CorpusManifest,
    min_books: usize,
    min_paragraphs: usize,
) -> CorpusManifest {
    let mut books: Vec<ManifestEntry> = manifest.books.clone();
    loop {
        let before = books.len();
        books.retain(|b| b.paragraph_count >= min_paragraphs);
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for b in &books {
            *counts.entry(b.author_id.as_str()).or_default() += 1;
        }
        let keep: HashSet<String> = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_books)
            .map(|(a, _)| a.to_string())
            .collect();
        books.retain(|b| keep.contains(&b.author_id));
        if books.len() == before {
            break;
        }
    }
    CorpusManifest {
        books,
        filters_applied: Some(FilterSpec {
            min_books_per_author: min_books,
            min_paragraphs,
        }),
    }
}

/// Directory layout of a prepared corpus.
#[derive(Debug, Clone)]
pub struct CorpusLayout {
    root: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CorpusLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.jsonl")
    }

    pub fn paragraphs(&self) -> PathBuf {
        self.root.join("paragraphs")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.root.join("embeddings")
    }

    pub fn curves(&self) -> PathBuf {
        self.root.join("curves")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features")
    }
}

pub fn write_paragraphs(dir: &Path, book: &BookRecord) -> Result<()> {
    let path = dir.join(format!("{}.json", store::file_stem_for(&book.book_id)));
    store::write_json(&path, book)
}

pub fn read_paragraphs(dir: &Path, book_id: &str) -> Result<BookRecord> {
    let path = dir.join(format!("{}.json", store::file_stem_for(book_id)));
    let book: BookRecord = store::read_json(&path)?;
    BookRecord::new(book.book_id, book.author_id, book.title, book.paragraphs)
}

/// Outcome of ingesting a directory tree of plain-text books.
#[derive(Debug, Default)]
pub struct Ingested {
    pub books: Vec<(BookRecord, PathBuf)>,
    pub rejected: Vec<String>,
}

/// Ingest `root/<author>/<title>.txt`.
///
/// `author_id` is the directory name, `book_id` is `<author>/<title>`.
/// Files are read and segmented in parallel; results come back sorted by
/// `book_id`.
pub fn ingest_dir(root: &Path, min_chars: usize) -> Result<Ingested> {
    let mut files = Vec::new();
    let authors = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for author in authors {
        let author = author.map_err(|e| Error::io(root, e))?;
        let apath = author.path();
        if !apath.is_dir() {
            continue;
        }
        let author_id = author.file_name().to_string_lossy().into_owned();
        for entry in fs::read_dir(&apath).map_err(|e| Error::io(&apath, e))? {
            let path = entry.map_err(|e| Error::io(&apath, e))?.path();
            if path.extension().is_some_and(|x| x == "txt") {
                files.push((author_id.clone(), path));
            }
        }
    }

    let results: Vec<(PathBuf, Result<BookRecord>)> = files
        .into_par_iter()
        .map(|(author_id, path)| {
            let title = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let book_id = format!("{author_id}/{title}");
            let rec = fs::read(&path)
                .map_err(|e| Error::io(&path, e))
                .and_then(|bytes| {
                    String::from_utf8(bytes)
                        .map_err(|_| Error::Invalid(format!("{}: not UTF-8", path.display())))
                })
                .and_then(|text| BookRecord::from_text(book_id, author_id, title, &text, min_chars));
            (path, rec)
        })
        .collect();

    let mut out = Ingested::default();
    for (path, rec) in results {
        match rec {
            Ok(book) => out.books.push((book, path)),
            Err(e) => out.rejected.push(format!("{}: {e}", path.display())),
        }
    }
    out.books.sort_by(|a, b| a.0.book_id.cmp(&b.0.book_id));
    out.rejected.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(book: &str, author: &str, paragraphs: usize) -> ManifestEntry {
        ManifestEntry {
            book_id: book.into(),
            author_id: author.into(),
            title: book.into(),
            paragraph_count: paragraphs,
            source_path: format!("{book}.txt"),
            synthetic: false,
        }
    }

    #[test]
    fn splits_on_blank_lines() {
        assert_eq!(segment_paragraphs("A.\n\nB.", 1).unwrap(), vec!["A.", "B."]);
        assert_eq!(segment_paragraphs("A.\nB.", 1).unwrap(), vec!["A.\nB."]);
        assert_eq!(
            segment_paragraphs("  A.  \n \t \n\n\nB.\n", 1).unwrap(),
            vec!["A.", "B."]
        );
    }

    #[test]
    fn short_block_merges_forward() {
        let text = "The first paragraph is long enough.\n\nIII.\n\nThe third paragraph is long as well.";
        let p = segment_paragraphs(text, 20).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[1], "III.\n\nThe third paragraph is long as well.");
    }

    #[test]
    fn short_tail_merges_backward() {
        let p = segment_paragraphs("A paragraph that is long enough.\n\nEnd.", 20).unwrap();
        assert_eq!(p, vec!["A paragraph that is long enough.\n\nEnd."]);
        assert_eq!(segment_paragraphs("tiny", 20).unwrap(), vec!["tiny"]);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(segment_paragraphs(" \n\n\t\n", 20).is_err());
        assert!(matches!(
            BookRecord::from_text("b", "a", "t", "", 20),
            Err(Error::EmptyBook { .. })
        ));
    }

    #[test]
    fn book_needs_two_paragraphs() {
        assert!(BookRecord::new("b", "a", "t", vec!["one".into()]).is_err());
        let b = BookRecord::new("b", "a", "t", vec!["one".into(), "two".into()]).unwrap();
        assert_eq!(b.paragraph_count(), 2);
    }

    #[test]
    fn filter_drops_author_below_floor() {
        let mut books: Vec<_> = (0..5).map(|i| entry(&format!("x{i}"), "x", 100)).collect();
        books[2].paragraph_count = 10;
        let m = CorpusManifest::new(books).unwrap();
        assert!(filter_corpus(&m, 5, 64).books.is_empty());
    }

    #[test]
    fn identity_filter() {
        let books: Vec<_> = (0..4).map(|i| entry(&format!("b{i}"), "a", 2 + i)).collect();
        let m = CorpusManifest::new(books).unwrap();
        assert_eq!(filter_corpus(&m, 1, 2).books, m.books);
    }

    #[test]
    fn filter_counts_authors() {
        let mut books = Vec::new();
        for (a, n) in [("a", 5), ("b", 5), ("c", 4)] {
            for i in 0..n {
                books.push(entry(&format!("{a}{i}"), a, 80));
            }
        }
        let m = CorpusManifest::new(books).unwrap();
        let f = filter_corpus(&m, 5, 2);
        assert_eq!(f.n_authors(), 2);
        assert_eq!(f.books.len(), 10);
        assert_eq!(filter_corpus(&f, 5, 2).books, f.books);
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(CorpusManifest::new(vec![entry("a", "x", 3), entry("a", "y", 3)]).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("manifest.jsonl");
        let mut m = CorpusManifest::new(vec![
            entry("b1", "a", 10),
            entry("b2", "a", 12),
            entry("b3", "c", 30),
        ])
        .unwrap();
        m.books[2].synthetic = true;
        m.save(&path).unwrap();
        assert_eq!(CorpusManifest::load(&path).unwrap(), m);
        let f = filter_corpus(&m, 1, 11);
        f.save(&path).unwrap();
        assert_eq!(CorpusManifest::load(&path).unwrap(), f);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().contains("\"source_path\""));
    }

    #[test]
    fn ingest_reads_author_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("austen");
        fs::create_dir_all(&dir).unwrap();
        fs::write(
            dir.join("emma.txt"),
            "Emma Woodhouse, handsome, clever, and rich.\n\nShe had lived nearly twenty-one years.",
        )
        .unwrap();
        fs::write(dir.join("empty.txt"), "\n\n").unwrap();
        let got = ingest_dir(tmp.path(), 20).unwrap();
        assert_eq!(got.books.len(), 1);
        assert_eq!(got.books[0].0.book_id, "austen/emma");
        assert_eq!(got.books[0].0.author_id, "austen");
        assert_eq!(got.rejected.len(), 1);
    }
}
