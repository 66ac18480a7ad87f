//! Piecewise aggregate approximation, SAX discretization and k-gram motifs.
//!
//! The whole-book pipeline is `paa -> znorm -> discretize -> extract_motifs`.
//! Sliding-window profiles repeat it per window (each window normalized on
//! its own) and sum the motif tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ALPHABET: usize = 20;
const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaxConfig {
    pub paa_segments: usize,
    pub alphabet_size: usize,
    pub motif_length: usize,
    /// Window length in curve points; `None` for whole-book profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_size: Option<usize>,
    /// Defaults to half the window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_stride: Option<usize>,
}

impl SaxConfig {
    pub fn whole_book(paa_segments: usize, alphabet_size: usize, motif_length: usize) -> Self {
        SaxConfig {
            paa_segments,
            alphabet_size,
            motif_length,
            window_size: None,
            window_stride: None,
        }
    }

    pub fn windowed(window: usize, paa_segments: usize, alphabet_size: usize, motif_length: usize) -> Self {
        SaxConfig {
            window_size: Some(window),
            ..Self::whole_book(paa_segments, alphabet_size, motif_length)
        }
    }

    /// Whole-book baseline: 16 segments, 5 symbols, 4-grams.
    pub fn baseline() -> Self {
        Self::whole_book(16, 5, 4)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, a, k) = (self.paa_segments, self.alphabet_size, self.motif_length);
        if w < 2 {
            return Err(Error::Config(format!("PAA segments must be >= 2, got {w}")));
        }
        if !(2..=MAX_ALPHABET).contains(&a) {
            return Err(Error::Config(format!("alphabet size must be in [2, 20], got {a}")));
        }
        if k < 1 || k > w {
            return Err(Error::Config(format!(
                "motif length must be in [1, {w}] (PAA segments), got {k}"
            )));
        }
        if motif_space(a, k).is_none() {
            return Err(Error::Config(format!("{a}^{k} motifs do not fit a 64-bit index")));
        }
        if let Some(win) = self.window_size {
            if win < 2 {
                return Err(Error::Config(format!("window must be >= 2, got {win}")));
            }
            match self.window_stride {
                Some(0) => return Err(Error::Config("window stride must be > 0".into())),
                None if win % 2 != 0 => {
                    return Err(Error::Config(format!(
                        "window {win} is odd; give an explicit stride"
                    )))
                }
                _ => {}
            }
        } else if self.window_stride.is_some() {
            return Err(Error::Config("window stride given without a window".into()));
        }
        Ok(())
    }

    pub fn stride(&self) -> Option<usize> {
        self.window_size
            .map(|w| self.window_stride.unwrap_or(w / 2))
    }

    /// Number of possible motifs, `alphabet^k`.
    pub fn motif_space(&self) -> u64 {
        motif_space(self.alphabet_size, self.motif_length).unwrap_or(u64::MAX)
    }
}

pub fn motif_space(alphabet: usize, k: usize) -> Option<u64> {
    (alphabet as u64).checked_pow(u32::try_from(k).ok()?)
}

/// Fractional-weight PAA.
///
/// Segment `j` covers `[j L / w, (j + 1) L / w)` of the series domain and each
/// point contributes in proportion to its overlap. Scaling positions by `w`
/// makes every overlap an integer, so weights are exact.
pub fn paa(series: &[f64], w: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::TooShort { len: 0, need: 1 });
    }
    if w == 0 {
        return Err(Error::Config("PAA needs at least one segment".into()));
    }
    let (l, wu) = (series.len() as u64, w as u64);
    let mut out = vec![0.0; w];
    let mut j = 0usize;
    for (i, &x) in series.iter().enumerate() {
        let (mut lo, hi) = (i as u64 * wu, (i as u64 + 1) * wu);
        while lo < hi {
            let seg_end = (j as u64 + 1) * l;
            let end = hi.min(seg_end);
            out[j] += x * (end - lo) as f64;
            lo = end;
            if end == seg_end {
                j += 1;
            }
        }
    }
    let scale = l as f64;
    out.iter_mut().for_each(|v| *v /= scale);
    Ok(out)
}

/// Zero mean, unit population variance. Near-constant input gives zeros and
/// `true` for degenerate.
pub fn znorm(v: &[f64]) -> (Vec<f64>, bool) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(std >= DEGENERATE_STD) {
        return (vec![0.0; v.len()], true);
    }
    (v.iter().map(|x| (x - mean) / std).collect(), false)
}

fn horner(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Standard normal quantile (Wichura's AS241, about 1e-16 relative error).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        horner(&C, r) / horner(&D, r)
    } else {
        let r = r - 5.0;
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Equiprobable breakpoints under the standard normal: `Φ⁻¹(j / α)`, `j = 1..α`.
pub fn breakpoints(alphabet: usize) -> Result<Vec<f64>> {
    if !(2..=MAX_ALPHABET).contains(&alphabet) {
        return Err(Error::Config(format!(
            "alphabet size must be in [2, 20], got {alphabet}"
        )));
    }
    Ok((1..alphabet)
        .map(|j| {
            // exact zero at the median keeps the tie rule symmetric
            if 2 * j == alphabet {
                0.0
            } else {
                normal_quantile(j as f64 / alphabet as f64)
            }
        })
        .collect())
}

/// Symbol = number of breakpoints `<=` value; a value on a breakpoint goes up.
pub fn discretize_with(z: &[f64], cuts: &[f64]) -> Vec<u8> {
    z.iter()
        .map(|&v| cuts.partition_point(|&b| b <= v) as u8)
        .collect()
}

pub fn discretize(z: &[f64], alphabet: usize) -> Result<Vec<u8>> {
    Ok(discretize_with(z, &breakpoints(alphabet)?))
}

/// Letters `a`, `b`, ... for symbols 0, 1, ...
pub fn render(symbols: &[u8]) -> String {
    symbols.iter().map(|&s| (b'a' + s) as char).collect()
}

pub fn parse_symbols(text: &str, alphabet: usize) -> Result<Vec<u8>> {
    text.bytes()
        .map(|c| {
            let s = c.wrapping_sub(b'a');
            if (s as usize) < alphabet {
                Ok(s)
            } else {
                Err(Error::Invalid(format!("symbol {:?} outside alphabet", c as char)))
            }
        })
        .collect()
}

/// Sparse k-gram counts; a motif's index is its base-α encoding.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MotifTable {
    pub counts: BTreeMap<u64, u64>,
    pub total: u64,
}

impl MotifTable {
    pub fn add(&mut self, other: &MotifTable) {
        for (&idx, &c) in &other.counts {
            *self.counts.entry(idx).or_default() += c;
        }
        self.total += other.total;
    }

    /// Normalized frequencies as sorted `(index, probability)` pairs.
    pub fn distribution(&self) -> Vec<(u64, f64)> {
        let t = self.total as f64;
        self.counts.iter().map(|(&i, &c)| (i, c as f64 / t)).collect()
    }
}

pub fn motif_index(gram: &[u8], alphabet: usize) -> u64 {
    gram.iter().fold(0u64, |acc, &s| acc * alphabet as u64 + u64::from(s))
}

pub fn decode_motif(mut index: u64, alphabet: usize, k: usize) -> Vec<u8> {
    let mut out = vec![0u8; k];
    for slot in out.iter_mut().rev() {
        *slot = (index % alphabet as u64) as u8;
        index /= alphabet as u64;
    }
    out
}

/// Count every overlapping k-gram of `symbols`.
pub fn extract_motifs(symbols: &[u8], alphabet: usize, k: usize) -> Result<MotifTable> {
    if k == 0 || symbols.len() < k {
        return Err(Error::TooShort {
            len: symbols.len(),
            need: k.max(1),
        });
    }
    if motif_space(alphabet, k).is_none() {
        return Err(Error::Config(format!("{alphabet}^{k} motifs do not fit a 64-bit index")));
    }
    let mut table = MotifTable::default();
    for gram in symbols.windows(k) {
        *table.counts.entry(motif_index(gram, alphabet)).or_default() += 1;
    }
    table.total = (symbols.len() - k + 1) as u64;
    Ok(table)
}

/// PAA vector, SAX symbols and motif counts for one book.
///
/// Whole-book profiles carry the PAA vector and symbol string; windowed
/// profiles leave both empty and aggregate motifs over `window_count` windows.
#[derive(Debug, Clone, PartialEq)]
pub struct SaxProfile {
    pub book_id: String,
    pub config: SaxConfig,
    pub paa: Vec<f64>,
    pub sax: Vec<u8>,
    pub motifs: MotifTable,
    pub degenerate: bool,
    pub window_count: usize,
    pub degenerate_windows: usize,
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    book_id: String,
    config: SaxConfig,
    paa: Vec<f64>,
    sax: String,
    motifs: BTreeMap<u64, u64>,
    degenerate: bool,
    window_count: usize,
    #[serde(default)]
    degenerate_windows: usize,
}

impl Serialize for SaxProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProfileJson {
            book_id: self.book_id.clone(),
            config: self.config,
            paa: self.paa.clone(),
            sax: render(&self.sax),
            motifs: self.motifs.counts.clone(),
            degenerate: self.degenerate,
            window_count: self.window_count,
            degenerate_windows: self.degenerate_windows,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SaxProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ProfileJson::deserialize(d)?;
        let sax = parse_symbols(&j.sax, j.config.alphabet_size).map_err(serde::de::Error::custom)?;
        let total = j.motifs.values().sum();
        Ok(SaxProfile {
            book_id: j.book_id,
            config: j.config,
            paa: j.paa,
            sax,
            motifs: MotifTable {
                counts: j.motifs,
                total,
            },
            degenerate: j.degenerate,
            window_count: j.window_count,
            degenerate_windows: j.degenerate_windows,
        })
    }
}

struct Symbolized {
    paa: Vec<f64>,
    symbols: Vec<u8>,
    degenerate: bool,
}

fn symbolize(series: &[f64], w: usize, cuts: &[f64]) -> Result<Symbolized> {
    let paa = paa(series, w)?;
    let (z, degenerate) = znorm(&paa);
    let symbols = discretize_with(&z, cuts);
    Ok(Symbolized {
        paa,
        symbols,
        degenerate,
    })
}

/// Whole-book SAX profile of a curve.
pub fn sax_string(book_id: &str, series: &[f64], config: &SaxConfig) -> Result<SaxProfile> {
    config.validate()?;
    if series.len() < 2 {
        return Err(Error::TooShort {
            len: series.len(),
            need: 2,
        });
    }
    let cuts = breakpoints(config.alphabet_size)?;
    let s = symbolize(series, config.paa_segments, &cuts)?;
    let motifs = extract_motifs(&s.symbols, config.alphabet_size, config.motif_length)?;
    Ok(SaxProfile {
        book_id: book_id.to_string(),
        config: SaxConfig {
            window_size: None,
            window_stride: None,
            ..*config
        },
        paa: s.paa,
        sax: s.symbols,
        motifs,
        degenerate: s.degenerate,
        window_count: 1,
        degenerate_windows: usize::from(s.degenerate),
    })
}

/// Window start offsets: `0, stride, 2 stride, ...` while the window fits,
/// plus one window flush with the end if the last one stops short.
pub fn window_offsets(len: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window == 0 || stride == 0 {
        return Err(Error::Config("window and stride must be positive".into()));
    }
    if len < window {
        return Err(Error::TooShort { len, need: window });
    }
    let mut offsets: Vec<usize> = (0..=len - window).step_by(stride).collect();
    if offsets.last().is_some_and(|&o| o + window != len) {
        offsets.push(len - window);
    }
    Ok(offsets)
}

/// Motif counts summed over sliding windows, each window symbolized with its
/// own normalization. Degenerate (flat) windows contribute all-middle-symbol
/// motifs unless `drop_degenerate` is set; either way they are tallied.
pub fn sliding_window_profile(
    book_id: &str,
    series: &[f64],
    config: &SaxConfig,
    drop_degenerate: bool,
) -> Result<SaxProfile> {
    config.validate()?;
    let (window, stride) = match (config.window_size, config.stride()) {
        (Some(w), Some(s)) => (w, s),
        _ => return Err(Error::Config("sliding-window profile needs a window size".into())),
    };
    let cuts = breakpoints(config.alphabet_size)?;
    let offsets = window_offsets(series.len(), window, stride)?;
    let mut motifs = MotifTable::default();
    let mut degenerate_windows = 0;
    for &off in &offsets {
        let s = symbolize(&series[off..off + window], config.paa_segments, &cuts)?;
        if s.degenerate {
            degenerate_windows += 1;
            if drop_degenerate {
                continue;
            }
        }
        motifs.add(&extract_motifs(&s.symbols, config.alphabet_size, config.motif_length)?);
    }
    Ok(SaxProfile {
        book_id: book_id.to_string(),
        config: *config,
        paa: Vec::new(),
        sax: Vec::new(),
        motifs,
        degenerate: degenerate_windows == offsets.len(),
        window_count: offsets.len(),
        degenerate_windows,
    })
}

/// Least-squares slope of `y` against `0, 1, ..., n - 1`.
pub fn ls_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Per-window least-squares slopes over the same windows as
/// [`sliding_window_profile`].
pub fn window_slopes(series: &[f64], window: usize, stride: usize) -> Result<Vec<f64>> {
    Ok(window_offsets(series.len(), window, stride)?
        .into_iter()
        .map(|off| ls_slope(&series[off..off + window]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn paa_exact_halves() {
        assert_eq!(paa(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![1.5, 3.5]);
        assert_eq!(paa(&[1.0, 2.0, 3.0], 3).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn paa_fractional() {
        let p = paa(&[1.0, 2.0, 3.0], 2).unwrap();
        assert_abs_diff_eq!(p[0], 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 8.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn paa_upsamples() {
        assert_eq!(paa(&[1.0, 3.0], 4).unwrap(), vec![1.0, 1.0, 3.0, 3.0]);
        let p = paa(&[1.0, 4.0], 3).unwrap();
        assert_abs_diff_eq!(p[1], 2.5, epsilon = 1e-15);
        assert!(paa(&[], 3).is_err());
    }

    #[test]
    fn znorm_values() {
        let (z, d) = znorm(&[1.0, 2.0, 3.0]);
        assert!(!d);
        assert_abs_diff_eq!(z[0], -1.224744871391589, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[2], 1.224744871391589, epsilon = 1e-12);
        assert_eq!(znorm(&[5.0, 5.0, 5.0]), (vec![0.0; 3], true));
    }

    #[test]
    fn breakpoint_values() {
        let b = breakpoints(5).unwrap();
        for (x, want) in b.iter().zip([-0.8416, -0.2533, 0.2533, 0.8416]) {
            assert_abs_diff_eq!(*x, want, epsilon = 5e-5);
        }
        assert_eq!(breakpoints(2).unwrap(), vec![0.0]);
        let b = breakpoints(4).unwrap();
        assert_abs_diff_eq!(b[0], -0.6745, epsilon = 5e-5);
        assert_eq!(b[1], 0.0);
        assert!(breakpoints(1).is_err());
        assert!(breakpoints(21).is_err());
    }

    #[test]
    fn discretize_alphabet_five() {
        let s = discretize(&[-1.0, 0.0, 1.0], 5).unwrap();
        assert_eq!(s, vec![0, 2, 4]);
        assert_eq!(render(&s), "ace");
        let cuts = breakpoints(5).unwrap();
        assert_eq!(discretize_with(&[cuts[0]], &cuts), vec![1]);
        assert_eq!(discretize(&[0.0; 4], 5).unwrap(), vec![2; 4]);
    }

    #[test]
    fn ramp_is_monotone() {
        let ramp: Vec<f64> = (1..=16).map(f64::from).collect();
        let p = sax_string("b", &ramp, &SaxConfig::baseline()).unwrap();
        assert!(p.sax.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(p.sax[0], 0);
        assert_eq!(*p.sax.last().unwrap(), 4);
    }

    #[test]
    fn constant_series_is_middle_symbol() {
        let p = sax_string("b", &[0.3; 40], &SaxConfig::baseline()).unwrap();
        assert!(p.degenerate);
        assert_eq!(render(&p.sax), "c".repeat(16));
    }

    #[test]
    fn step_series() {
        let s = [0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0];
        let p = sax_string("b", &s, &SaxConfig::whole_book(4, 5, 2)).unwrap();
        assert_eq!(render(&p.sax), "aaee");
        assert_eq!(p.paa, vec![0.0, 0.0, 10.0, 10.0]);
    }

    #[test]
    fn motif_counts() {
        let t = extract_motifs(&[0, 1, 2, 3], 5, 4).unwrap();
        assert_eq!(t.counts.len(), 1);
        assert_eq!(t.counts[&motif_index(&[0, 1, 2, 3], 5)], 1);
        let t = extract_motifs(&[0, 0, 0, 0], 5, 2).unwrap();
        assert_eq!(t.counts, BTreeMap::from([(0, 3)]));
        assert_eq!(t.total, 3);
        assert!(extract_motifs(&[0, 1], 5, 3).is_err());
        assert_eq!(SaxConfig::baseline().motif_space(), 625);
        assert_eq!(decode_motif(motif_index(&[4, 0, 3, 1], 5), 5, 4), vec![4, 0, 3, 1]);
    }

    #[test]
    fn offsets() {
        assert_eq!(window_offsets(40, 20, 10).unwrap(), vec![0, 10, 20]);
        assert_eq!(window_offsets(45, 20, 10).unwrap(), vec![0, 10, 20, 25]);
        assert_eq!(window_offsets(20, 20, 10).unwrap(), vec![0]);
        assert!(window_offsets(19, 20, 10).is_err());
    }

    #[test]
    fn window_profile_sums_motifs() {
        let series: Vec<f64> = (0..45).map(|i| ((i * 7) % 11) as f64).collect();
        let cfg = SaxConfig::windowed(20, 8, 5, 4);
        let p = sliding_window_profile("b", &series, &cfg, false).unwrap();
        assert_eq!(p.window_count, 4);
        assert_eq!(p.motifs.total, 4 * 5);
        assert_eq!(p.motifs.counts.values().sum::<u64>(), p.motifs.total);
    }

    #[test]
    fn flat_windows_are_tallied() {
        let mut series = vec![0.5; 40];
        series.extend((0..20).map(|i| f64::from(i % 3)));
        let cfg = SaxConfig::windowed(20, 8, 5, 4);
        let kept = sliding_window_profile("b", &series, &cfg, false).unwrap();
        let dropped = sliding_window_profile("b", &series, &cfg, true).unwrap();
        assert_eq!(kept.window_count, 5);
        assert_eq!(kept.degenerate_windows, 3);
        assert_eq!(kept.motifs.total, 25);
        assert_eq!(dropped.motifs.total, 10);
        let middle = motif_index(&[2, 2, 2, 2], 5);
        assert_eq!(kept.motifs.counts[&middle], 15);
    }

    #[test]
    fn config_validation() {
        assert!(SaxConfig::whole_book(4, 5, 5).validate().is_err());
        assert!(SaxConfig::whole_book(16, 21, 4).validate().is_err());
        assert!(SaxConfig::windowed(21, 8, 5, 4).validate().is_err());
        let mut c = SaxConfig::windowed(21, 8, 5, 4);
        c.window_stride = Some(7);
        assert!(c.validate().is_ok());
        assert_eq!(SaxConfig::windowed(20, 8, 5, 4).stride(), Some(10));
    }

    #[test]
    fn profile_json_shape() {
        let s: Vec<f64> = (0..30).map(|i| f64::from(i % 4)).collect();
        let p = sax_string("x/y", &s, &SaxConfig::baseline()).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert!(v["sax"].as_str().unwrap().chars().all(|c| ('a'..='e').contains(&c)));
        assert!(v["motifs"].as_object().unwrap().keys().all(|k| k.parse::<u64>().is_ok()));
        let back: SaxProfile = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn slope() {
        assert_abs_diff_eq!(ls_slope(&[1.0, 3.0, 5.0, 7.0]), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ls_slope(&[2.0, 2.0, 2.0]), 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn paa_preserves_mean(v in prop::collection::vec(-10.0f64..10.0, 1..80), w in 1usize..40) {
            let p = paa(&v, w).unwrap();
            // every segment has equal coverage L / w
            let pm = p.iter().sum::<f64>() / w as f64;
            let vm = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!((pm - vm).abs() < 1e-9);
        }

        #[test]
        fn sax_affine_invariant(
            v in prop::collection::vec(-10.0f64..10.0, 16..64),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let cfg = SaxConfig::baseline();
            let t: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let p = sax_string("b", &v, &cfg).unwrap();
            let q = sax_string("b", &t, &cfg).unwrap();
            // values within rounding of a breakpoint may legitimately flip
            let cuts = breakpoints(5).unwrap();
            let (z, _) = znorm(&p.paa);
            prop_assume!(z.iter().all(|x| cuts.iter().all(|c| (x - c).abs() > 1e-9)));
            prop_assert_eq!(p.sax, q.sax);
        }

        #[test]
        fn monotone_input_monotone_symbols(mut v in prop::collection::vec(0.0f64..2.0, 2..100), w in 2usize..32) {
            v.sort_by(f64::total_cmp);
            let cfg = SaxConfig::whole_book(w, 7, 1);
            let p = sax_string("b", &v, &cfg).unwrap();
            prop_assert!(p.sax.windows(2).all(|s| s[0] <= s[1]));
        }

        #[test]
        fn motif_totals(s in prop::collection::vec(0u8..5, 4..50), k in 1usize..5) {
            let t = extract_motifs(&s, 5, k).unwrap();
            prop_assert_eq!(t.counts.values().sum::<u64>(), (s.len() - k + 1) as u64);
            prop_assert!(t.counts.keys().all(|&i| i < 5u64.pow(k as u32)));
        }
    }
}
