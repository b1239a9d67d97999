//! Image-quality and runtime measurements.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ComplexImage, SceneGrid};

pub const DB_FLOOR: f64 = -100.0;

/// `20 log10(|f| / max|f|)` clipped to `[-100, 0]`.
pub fn to_db(img: &ComplexImage) -> Result<Vec<f64>> {
    let peak = img.max_magnitude();
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::invalid("image", "decibel display needs a nonzero finite peak"));
    }
    Ok(img
        .values()
        .iter()
        .map(|v| {
            let db = 20.0 * (v.norm() / peak).log10();
            if db.is_nan() {
                DB_FLOOR
            } else {
                db.clamp(DB_FLOOR, 0.0)
            }
        })
        .collect())
}

/// Pixel rectangle `[x0, x0 + w) x [y0, y0 + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl RegionSpec {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    pub fn validate(&self, grid: &SceneGrid) -> Result<()> {
        if self.w * self.h < 2 {
            return Err(Error::invalid("region", format!("needs at least 2 pixels, got {}x{}", self.w, self.h)));
        }
        if self.x0 + self.w > grid.nx || self.y0 + self.h > grid.ny {
            return Err(Error::invalid(
                "region",
                format!(
                    "{}x{} at ({}, {}) exceeds the {}x{} grid",
                    self.w, self.h, self.x0, self.y0, grid.nx, grid.ny
                ),
            ));
        }
        Ok(())
    }

    pub fn indices<'a>(&'a self, grid: &'a SceneGrid) -> impl Iterator<Item = usize> + 'a {
        (self.y0..self.y0 + self.h).flat_map(move |iy| (self.x0..self.x0 + self.w).map(move |ix| grid.index(ix, iy)))
    }
}

/// Unbiased sample variance of `|f|` over the region.
pub fn region_variance(img: &ComplexImage, region: &RegionSpec) -> Result<f64> {
    region.validate(img.grid())?;
    let mags: Vec<f64> = region.indices(img.grid()).map(|i| img.values()[i].norm()).collect();
    Ok(sample_variance(&mags))
}

pub(crate) fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHistogram {
    /// `bins + 1` edges in log10 units.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Pixels of exactly zero modulus.
    pub underflow: usize,
}

impl LogHistogram {
    /// Centre of the most populated bin; `None` when every pixel underflowed.
    /// The underflow bin counts as lying below every regular bin.
    pub fn mode(&self) -> Option<f64> {
        let (i, c) = self.counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        if *c == 0 || self.underflow > *c {
            return if self.underflow > 0 { Some(f64::NEG_INFINITY) } else { None };
        }
        Some(0.5 * (self.edges[i] + self.edges[i + 1]))
    }
}

/// Histogram of `log10|f|` over `bins` equal bins spanning the nonzero
/// range, or `[lo, hi)` when given (values outside are clamped into the end
/// bins).
pub fn log_histogram(img: &ComplexImage, bins: usize, range: Option<(f64, f64)>) -> Result<LogHistogram> {
    if bins < 2 {
        return Err(Error::invalid("bins", format!("must be at least 2, got {bins}")));
    }
    let logs: Vec<f64> = img.values().iter().map(|v| v.norm()).filter(|m| *m > 0.0).map(f64::log10).collect();
    let underflow = img.values().len() - logs.len();
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid("range", format!("need finite lo < hi, got [{lo}, {hi})")));
            }
            (lo, hi)
        }
        None => {
            let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if logs.is_empty() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, lo + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for v in logs {
        let i = ((v - lo) / width).floor();
        let i = if i < 0.0 { 0 } else { (i as usize).min(bins - 1) };
        counts[i] += 1;
    }
    Ok(LogHistogram { edges, counts, underflow })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedRun {
    pub method: String,
    pub workers: usize,
    pub seconds: f64,
}

/// Run `f` and record its wall-clock time.
pub fn time_run<T>(method: &str, workers: usize, f: impl FnOnce() -> T) -> (T, TimedRun) {
    let start = Instant::now();
    let out = f();
    let run = TimedRun {
        method: method.to_string(),
        workers,
        seconds: start.elapsed().as_secs_f64(),
    };
    (out, run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    /// Fastest first.
    pub rows: Vec<TimedRun>,
}

impl TimingReport {
    /// Whether `methods` appear in strictly increasing runtime; methods
    /// missing from the report make the check fail.
    pub fn ordered(&self, methods: &[&str]) -> bool {
        let times: Option<Vec<f64>> = methods
            .iter()
            .map(|m| self.rows.iter().find(|r| r.method == *m).map(|r| r.seconds))
            .collect();
        match times {
            Some(t) => t.windows(2).all(|w| w[0] < w[1]),
            None => false,
        }
    }
}

pub fn timing_report(runs: &[TimedRun]) -> Result<TimingReport> {
    if runs.is_empty() {
        return Err(Error::invalid("runs", "at least one timed run is required"));
    }
    let mut rows = runs.to_vec();
    rows.sort_by(|a, b| a.seconds.total_cmp(&b.seconds));
    Ok(TimingReport { rows })
}
