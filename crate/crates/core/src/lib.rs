//! Novelty-curve features and author fingerprint statistics for book corpora.
//!
//! A book is a sequence of paragraph embeddings. Consecutive cosine distances
//! form its *novelty curve*, from which this crate derives:
//!
//! - seven scalar dynamics (mean, speed, volume, circuitousness, reversals,
//!   standard deviation, trend-to-irregularity), see [`novelty`];
//! - PAA vectors, SAX strings and k-gram motif tables, whole-book or over
//!   sliding windows, see [`sax`];
//! - per-author fingerprint tests (leave-one-out and split-half permutation
//!   tests with effect sizes) and nearest-centroid attribution, see
//!   [`fingerprint`];
//! - k-means shape clusters with silhouette-selected `k`, see [`cluster`].
//!
//! [`synth`] generates corpora with planted fingerprints so the statistics can
//! be checked without real books, and [`experiments`] wires everything into
//! the standard experiment protocols that emit results JSON.

#![forbid(unsafe_code)]

pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod experiments;
pub mod fingerprint;
pub mod novelty;
pub mod report;
pub mod sax;
pub mod seed;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
