//! Novelty curves and their scalar dynamics.

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::store::F32Matrix;

const RANGE_SLACK: f64 = 1e-9;
const FLAT_NET_EPS: f64 = 1e-9;
const CIRCUITOUSNESS_CAP: f64 = 1e12;
const CONSTANT_STD_EPS: f64 = 1e-12;

/// Cosine distances between consecutive paragraphs, each in `[0, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyCurve {
    pub book_id: String,
    values: Vec<f64>,
}

impl NoveltyCurve {
    pub fn new(book_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let book_id = book_id.into();
        if values.is_empty() {
            return Err(Error::TooShort { len: 0, need: 1 });
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < -RANGE_SLACK || **v > 2.0 + RANGE_SLACK)
        {
            return Err(Error::Invalid(format!(
                "book {book_id}: novelty value {v} outside [0, 2]"
            )));
        }
        Ok(NoveltyCurve { book_id, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_matrix(&self) -> F32Matrix {
        F32Matrix::column(&self.values)
    }

    pub fn from_matrix(book_id: impl Into<String>, m: &F32Matrix) -> Result<Self> {
        if m.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: m.dim(),
            });
        }
        Self::new(book_id, m.to_f64())
    }
}

fn dot_norms(a: &[f32], b: &[f32]) -> (f64, f64, f64) {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    (ab, aa.sqrt(), bb.sqrt())
}

/// `n_i = 1 - cos(e_i, e_{i+1})`, clamped to `[0, 2]`.
pub fn novelty_curve(embeddings: &EmbeddingMatrix) -> Result<NoveltyCurve> {
    let values = novelty_values(embeddings.rows())?;
    NoveltyCurve::new(embeddings.book_id.clone(), values)
}

/// Novelty values of raw rows (normalization is implicit in the cosine).
pub fn novelty_values(rows: &F32Matrix) -> Result<Vec<f64>> {
    if rows.rows() < 2 {
        return Err(Error::TooShort {
            len: rows.rows(),
            need: 2,
        });
    }
    let mut out = Vec::with_capacity(rows.rows() - 1);
    for i in 0..rows.rows() - 1 {
        let (dot, na, nb) = dot_norms(rows.row(i), rows.row(i + 1));
        if !(na > 0.0 && nb > 0.0) || !dot.is_finite() {
            return Err(Error::NonFinite(format!("zero-norm embedding row near {i}")));
        }
        out.push((1.0 - dot / (na * nb)).clamp(0.0, 2.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateFlag {
    /// `|n_last - n_first|` below 1e-9; circuitousness is floored and capped.
    FlatNetDisplacement,
    /// Zero standard deviation; trend-to-irregularity set to 0.
    ConstantCurve,
    /// Fewer than 2 values: no speed, volume, circuitousness or TI.
    TooShortForDifferences,
    /// Fewer than 3 values: no reversal count.
    TooShortForReversals,
}

/// The seven scalar dynamics of one curve. Features that need more points
/// than the curve has are `None`, with a flag explaining why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarDynamics {
    pub mean_novelty: f64,
    pub speed: Option<f64>,
    pub volume: Option<f64>,
    pub circuitousness: Option<f64>,
    pub reversal_count: Option<u64>,
    pub novelty_std: f64,
    pub trend_irregularity: Option<f64>,
    pub degenerate_flags: Vec<DegenerateFlag>,
}

pub const SCALAR_NAMES: [&str; 7] = [
    "mean_novelty",
    "speed",
    "volume",
    "circuitousness",
    "reversal_count",
    "novelty_std",
    "trend_irregularity",
];

impl ScalarDynamics {
    /// The features in [`SCALAR_NAMES`] order, if all are present.
    pub fn as_vector(&self) -> Option<[f64; 7]> {
        Some([
            self.mean_novelty,
            self.speed?,
            self.volume?,
            self.circuitousness?,
            self.reversal_count? as f64,
            self.novelty_std,
            self.trend_irregularity?,
        ])
    }

    pub fn has_flag(&self, flag: DegenerateFlag) -> bool {
        self.degenerate_flags.contains(&flag)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub(crate) fn pop_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Sign changes between consecutive nonzero first differences.
pub fn reversal_count(values: &[f64]) -> u64 {
    let mut prev: Option<bool> = None;
    let mut count = 0;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        let up = d > 0.0;
        if prev.is_some_and(|p| p != up) {
            count += 1;
        }
        prev = Some(up);
    }
    count
}

pub fn scalar_dynamics(curve: &NoveltyCurve) -> ScalarDynamics {
    scalar_dynamics_of(curve.values())
}

pub fn scalar_dynamics_of(values: &[f64]) -> ScalarDynamics {
    let len = values.len();
    let mut flags = Vec::new();
    let mean_novelty = mean(values);
    let novelty_std = pop_std(values);

    let (speed, volume, circuitousness, trend_irregularity) = if len >= 2 {
        let volume: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let speed = volume / (len - 1) as f64;
        let net = (values[len - 1] - values[0]).abs();
        let circ = if net < FLAT_NET_EPS {
            flags.push(DegenerateFlag::FlatNetDisplacement);
            (volume / FLAT_NET_EPS).min(CIRCUITOUSNESS_CAP)
        } else {
            volume / net
        };
        let ti = if novelty_std < CONSTANT_STD_EPS {
            flags.push(DegenerateFlag::ConstantCurve);
            0.0
        } else {
            let (first, second) = values.split_at(len / 2);
            (mean(second) - mean(first)).abs() / novelty_std
        };
        (Some(speed), Some(volume), Some(circ), Some(ti))
    } else {
        flags.push(DegenerateFlag::TooShortForDifferences);
        (None, None, None, None)
    };

    let reversals = if len >= 3 {
        Some(reversal_count(values))
    } else {
        flags.push(DegenerateFlag::TooShortForReversals);
        None
    };

    flags.sort();
    ScalarDynamics {
        mean_novelty,
        speed,
        volume,
        circuitousness,
        reversal_count: reversals,
        novelty_std,
        trend_irregularity,
        degenerate_flags: flags,
    }
}
