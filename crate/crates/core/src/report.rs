//! CSV tables and standalone SVG plots built from results files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{CurveCorpus, ExperimentResult};
use crate::novelty::{scalar_dynamics, SCALAR_NAMES};
use crate::store::ensure_parent;

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Invalid(format!("{}: csv: {other:?}", path.display())),
    }
}

/// One row per author: effect, p-value and significance.
pub fn write_author_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "author_id", "n_books", "effect", "p", "significant", "intra_mean", "null_mean", "null_std",
    ])
    .map_err(|e| csv_error(path, e))?;
    for a in &result.authors {
        w.write_record([
            a.author_id.clone(),
            a.n_books.to_string(),
            a.effect.to_string(),
            a.p.to_string(),
            a.significant.to_string(),
            a.intra_mean.to_string(),
            a.null_mean.to_string(),
            a.null_std.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per results file with its aggregate numbers.
pub fn write_aggregate_csv(path: &Path, results: &[ExperimentResult]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "experiment", "config", "n_tested", "pct_significant", "mean_effect", "top1", "top5",
        "times_chance", "window_scalar_top1",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in results {
        let a = &r.aggregate;
        w.write_record([
            r.experiment.clone(),
            r.config.features.label(),
            a.n_tested.to_string(),
            a.pct_significant.to_string(),
            a.mean_effect.to_string(),
            a.top1.to_string(),
            a.top5.to_string(),
            a.times_chance.to_string(),
            a.window_scalar_top1.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The seven scalar dynamics of every book. Missing features are left empty.
pub fn write_scalar_csv(path: &Path, corpus: &CurveCorpus) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["book_id", "author_id"];
    header.extend(SCALAR_NAMES);
    header.push("flags");
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for b in corpus.books() {
        let s = scalar_dynamics(&b.curve);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let flags: Vec<String> = s
            .degenerate_flags
            .iter()
            .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default())
            .collect();
        w.write_record([
            b.book_id.clone(),
            b.author_id.clone(),
            s.mean_novelty.to_string(),
            opt(s.speed),
            opt(s.volume),
            opt(s.circuitousness),
            s.reversal_count.map(|v| v.to_string()).unwrap_or_default(),
            s.novelty_std.to_string(),
            opt(s.trend_irregularity),
            flags.join(";"),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#3366aa", "#cc6633", "#449944", "#aa3377", "#777777", "#ccaa22"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Minimal SVG canvas with a linear data-to-pixel mapping.
struct Plot {
    body: String,
    x: (f64, f64),
    y: (f64, f64),
}

impl Plot {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut p = Plot {
            body: String::new(),
            x: widen(x),
            y: widen(y),
        };
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN / 2.0, MARGIN / 2.0, HEIGHT - MARGIN);
        let _ = write!(
            p.body,
            r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>
<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>
<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>
"##,
            WIDTH / 2.0,
            escape(title),
            (l + r) / 2.0,
            HEIGHT - 12.0,
            escape(xlabel),
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(ylabel)
        );
        for i in 0..=4 {
            let v = p.y.0 + (p.y.1 - p.y.0) * i as f64 / 4.0;
            let py = p.py(v);
            let _ = writeln!(
                p.body,
                r##"<text x="{}" y="{py:.1}" text-anchor="end" font-size="10">{}</text>"##,
                l - 4.0,
                tick(v)
            );
        }
        p
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 1.5 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 1.5 * MARGIN)
    }

    fn x_label(&mut self, v: f64, text: &str) {
        let _ = writeln!(
            self.body,
            r##"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{}</text>"##,
            self.px(v),
            HEIGHT - MARGIN + 14.0,
            escape(text)
        );
    }

    fn rect(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, fill: &str) {
        let (a, b) = (self.px(x0), self.px(x1));
        let (c, d) = (self.py(y1), self.py(y0));
        let _ = writeln!(
            self.body,
            r##"<rect x="{a:.1}" y="{c:.1}" width="{:.1}" height="{:.1}" fill="{fill}"/>"##,
            (b - a).max(0.0),
            (d - c).max(0.0)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            self.body,
            r##"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"##,
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                self.body,
                r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{stroke}"/>"##,
                self.px(x),
                self.py(y)
            );
        }
    }

    fn legend(&mut self, row: usize, text: &str, color: &str) {
        let y = MARGIN / 2.0 + 14.0 * row as f64 + 8.0;
        let x = WIDTH - MARGIN / 2.0 - 150.0;
        let _ = writeln!(
            self.body,
            r##"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-size="11">{}</text>"##,
            y - 9.0,
            x + 14.0,
            y,
            escape(text)
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n{}</svg>\n",
            self.body
        )
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Histogram of per-author effect sizes.
pub fn effect_histogram_svg(result: &ExperimentResult, bins: usize) -> String {
    let effects: Vec<f64> = result.authors.iter().map(|a| a.effect).filter(|v| v.is_finite()).collect();
    let (lo, hi) = widen(range(effects.iter().copied()));
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for e in &effects {
        let i = (((e - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut p = Plot::new(
        &format!("Effect sizes: {}", result.config.features.label()),
        "effect size",
        "authors",
        (lo, hi),
        (0.0, top),
    );
    for (i, &c) in counts.iter().enumerate() {
        let x0 = lo + width * i as f64;
        p.rect(x0 + width * 0.05, x0 + width * 0.95, 0.0, c as f64, PALETTE[0]);
    }
    for v in [lo, (lo + hi) / 2.0, hi] {
        p.x_label(v, &tick(v));
    }
    if lo < 0.0 && hi > 0.0 {
        let x = p.px(0.0);
        let _ = writeln!(
            p.body,
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black" stroke-dasharray="4 3"/>"##,
            MARGIN / 2.0,
            HEIGHT - MARGIN
        );
    }
    p.finish()
}

/// Percent significant against PAA segments, one line per alphabet size.
pub fn resolution_lines_svg(results: &[ExperimentResult]) -> String {
    let mut alphabets: Vec<usize> = results.iter().map(|r| r.config.features.sax.alphabet_size).collect();
    alphabets.sort_unstable();
    alphabets.dedup();
    let mut ws: Vec<usize> = results.iter().map(|r| r.config.features.sax.paa_segments).collect();
    ws.sort_unstable();
    ws.dedup();
    let xs = |w: usize| ws.iter().position(|&v| v == w).unwrap_or(0) as f64;
    let top = range(results.iter().map(|r| r.aggregate.pct_significant)).1.max(1.0);
    let mut p = Plot::new(
        "Fingerprint detection vs SAX resolution",
        "PAA segments",
        "% authors significant",
        (-0.25, ws.len().saturating_sub(1) as f64 + 0.25),
        (0.0, top),
    );
    for (i, &w) in ws.iter().enumerate() {
        p.x_label(i as f64, &w.to_string());
    }
    for (k, &a) in alphabets.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = results
            .iter()
            .filter(|r| r.config.features.sax.alphabet_size == a)
            .map(|r| (xs(r.config.features.sax.paa_segments), r.aggregate.pct_significant))
            .collect();
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let color = PALETTE[k % PALETTE.len()];
        p.polyline(&pts, color);
        p.legend(k, &format!("alphabet {a}"), color);
    }
    p.finish()
}

/// Top-1 accuracy as multiples of chance, one bar per results file, with
/// the window-slope baseline next to window results.
pub fn multiscale_bars_svg(results: &[ExperimentResult]) -> String {
    let mut bars: Vec<(String, f64, usize)> = Vec::new();
    for r in results {
        bars.push((r.config.features.label(), r.aggregate.times_chance, 0));
        if let Some(top1) = r.aggregate.window_scalar_top1 {
            let label = format!("slopes W{}", r.config.features.sax.window_size.unwrap_or(0));
            bars.push((label, top1 / r.aggregate.chance_level, 1));
        }
    }
    let top = range(bars.iter().map(|b| b.1)).1.max(1.0);
    let mut p = Plot::new(
        "Attribution by feature scale",
        "feature",
        "top-1 / chance",
        (0.0, bars.len().max(1) as f64),
        (0.0, top),
    );
    for (i, (label, v, series)) in bars.iter().enumerate() {
        p.rect(i as f64 + 0.1, i as f64 + 0.9, 0.0, *v, PALETTE[*series]);
        p.x_label(i as f64 + 0.5, label);
    }
    p.legend(0, "motif / whole-book", PALETTE[0]);
    if bars.iter().any(|b| b.2 == 1) {
        p.legend(1, "window slopes", PALETTE[1]);
    }
    p.finish()
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
