//! Scene grids, phase histories, sub-aperture planning and spatial-frequency
//! geometry.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform Cartesian pixel grid over `[-U, U]^2`.
///
/// Pixel `(ix, iy)` sits at `x = (ix - nx/2) * pitch_x`, `y = (iy - ny/2) * pitch_y`
/// with `pitch = 2U / n`, so the pixel `(nx/2, ny/2)` is the scene center for
/// both odd and even sizes. Images are stored row-major (`iy * nx + ix`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGrid {
    pub nx: usize,
    pub ny: usize,
    pub extent: f64,
}

impl SceneGrid {
    pub fn new(nx: usize, ny: usize, extent: f64) -> Result<Self> {
        if nx == 0 {
            return Err(Error::invalid("nx", "must be at least 1"));
        }
        if ny == 0 {
            return Err(Error::invalid("ny", "must be at least 1"));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::invalid("extent", format!("must be finite and positive, got {extent}")));
        }
        Ok(Self { nx, ny, extent })
    }

    pub fn square(n: usize, extent: f64) -> Result<Self> {
        Self::new(n, n, extent)
    }

    /// Number of pixels `N`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pitch_x(&self) -> f64 {
        2.0 * self.extent / self.nx as f64
    }

    pub fn pitch_y(&self) -> f64 {
        2.0 * self.extent / self.ny as f64
    }

    /// Signed mode offsets of column `ix` and row `iy` relative to the center pixel.
    pub fn offsets(&self, ix: usize, iy: usize) -> (i64, i64) {
        (ix as i64 - (self.nx / 2) as i64, iy as i64 - (self.ny / 2) as i64)
    }

    pub fn position(&self, ix: usize, iy: usize) -> (f64, f64) {
        let (ox, oy) = self.offsets(ix, iy);
        (ox as f64 * self.pitch_x(), oy as f64 * self.pitch_y())
    }

    pub fn center(&self) -> (usize, usize) {
        (self.nx / 2, self.ny / 2)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Largest spatial frequency (rad/m) representable without aliasing along both axes.
    pub fn band_limit(&self) -> f64 {
        PI / self.pitch_x().max(self.pitch_y())
    }
}

/// Complex reflectivity image on a [`SceneGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    grid: SceneGrid,
    values: Vec<C64>,
}

impl ComplexImage {
    pub fn new(grid: SceneGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                what: "image values",
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("image values"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SceneGrid) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Unit impulse at pixel `(ix, iy)`.
    pub fn impulse(grid: SceneGrid, ix: usize, iy: usize) -> Self {
        let mut img = Self::zeros(grid);
        img.values[grid.index(ix, iy)] = C64::new(1.0, 0.0);
        img
    }

    pub fn grid(&self) -> &SceneGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> C64 {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Linear-FM chirp parameters from which spatial frequencies are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams {
    /// Carrier frequency (rad/s).
    pub carrier: f64,
    /// Chirp-rate constant; the instantaneous rate is twice this value.
    pub rate: f64,
    /// Round-trip delay to the scene center (s).
    pub tau0: f64,
    /// Propagation speed (m/s).
    pub speed: f64,
    /// Fast-time sample instants (s).
    pub times: Vec<f64>,
}

impl ChirpParams {
    pub fn spatial_frequencies(&self) -> Result<Vec<f64>> {
        compute_spatial_frequencies(&self.times, self.carrier, self.rate, self.tau0, self.speed)
    }
}

/// Spatial-frequency samples attached to a phase history.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencyAxis {
    /// One list shared by every pulse.
    Shared(Vec<f64>),
    /// Pulse-major list with `samples_per_pulse` entries per pulse.
    PerPulse(Vec<f64>),
}

/// Deramped frequency-domain pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHistory {
    azimuths: Vec<f64>,
    samples_per_pulse: usize,
    frequencies: FrequencyAxis,
    data: Vec<C64>,
    chirp: Option<ChirpParams>,
}

impl PhaseHistory {
    pub fn new(
        azimuths: Vec<f64>,
        frequencies: FrequencyAxis,
        data: Vec<C64>,
        chirp: Option<ChirpParams>,
    ) -> Result<Self> {
        if azimuths.is_empty() {
            return Err(Error::invalid("azimuths", "at least one pulse is required"));
        }
        for &a in &azimuths {
            if !(a.is_finite() && (0.0..TAU).contains(&a)) {
                return Err(Error::invalid("azimuths", format!("{a} is outside [0, 2pi)")));
            }
        }
        // Nondecreasing modulo 2pi: at most one wrap, and the tail may not pass the head.
        let descents = azimuths.windows(2).filter(|w| w[1] < w[0]).count();
        if descents > 1 || (descents == 1 && azimuths[azimuths.len() - 1] > azimuths[0]) {
            return Err(Error::invalid("azimuths", "must be nondecreasing modulo 2pi"));
        }
        let pulses = azimuths.len();
        let samples_per_pulse = match &frequencies {
            FrequencyAxis::Shared(k) => k.len(),
            FrequencyAxis::PerPulse(k) => {
                if k.len() % pulses != 0 {
                    return Err(Error::Dimension {
                        what: "per-pulse frequencies",
                        expected: pulses * (k.len() / pulses + 1),
                        found: k.len(),
                    });
                }
                k.len() / pulses
            }
        };
        if samples_per_pulse == 0 {
            return Err(Error::invalid("frequencies", "each pulse needs at least one sample"));
        }
        let ks = match &frequencies {
            FrequencyAxis::Shared(k) | FrequencyAxis::PerPulse(k) => k,
        };
        if let Some(bad) = ks.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::invalid("frequencies", format!("{bad} is not finite and positive")));
        }
        if data.len() != pulses * samples_per_pulse {
            return Err(Error::Dimension {
                what: "phase-history samples",
                expected: pulses * samples_per_pulse,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("phase-history samples"));
        }
        Ok(Self {
            azimuths,
            samples_per_pulse,
            frequencies,
            data,
            chirp,
        })
    }

    pub fn pulses(&self) -> usize {
        self.azimuths.len()
    }

    pub fn samples_per_pulse(&self) -> usize {
        self.samples_per_pulse
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    pub fn frequencies(&self) -> &FrequencyAxis {
        &self.frequencies
    }

    pub fn chirp(&self) -> Option<&ChirpParams> {
        self.chirp.as_ref()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn pulse_frequencies(&self, pulse: usize) -> &[f64] {
        let k = self.samples_per_pulse;
        match &self.frequencies {
            FrequencyAxis::Shared(v) => v,
            FrequencyAxis::PerPulse(v) => &v[pulse * k..(pulse + 1) * k],
        }
    }

    pub fn pulse_data(&self, pulse: usize) -> &[C64] {
        let k = self.samples_per_pulse;
        &self.data[pulse * k..(pulse + 1) * k]
    }

    /// Concatenated samples of the window's pulses, in pulse order.
    pub fn window_data(&self, window: &Window) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(window.pulses.len() * self.samples_per_pulse);
        for &p in &window.pulses {
            if p >= self.pulses() {
                return Err(Error::invalid("window pulses", format!("pulse index {p} out of range ({} pulses)", self.pulses())));
            }
            out.extend_from_slice(self.pulse_data(p));
        }
        Ok(out)
    }
}

/// One azimuth window of an [`AperturePlan`].
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub index: usize,
    /// Window start azimuth in radians, in `[0, 2pi)`.
    pub start: f64,
    pub center: f64,
    pub half_span: f64,
    pub pulses: Vec<usize>,
}

impl Window {
    /// Whether azimuth `theta` falls in `[start, start + 2 half_span)` modulo 2pi.
    pub fn contains_azimuth(&self, theta: f64) -> bool {
        let offset = (theta - self.start).rem_euclid(TAU);
        offset < 2.0 * self.half_span
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AperturePlan {
    pub windows: Vec<Window>,
    pub span_deg: f64,
    pub overlap_deg: f64,
    /// Pulses that no window captures.
    pub uncovered: Vec<usize>,
}

impl AperturePlan {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Offsets are compared in degrees after rounding to this resolution so that
/// pulses placed exactly on a boundary land deterministically.
const BOUNDARY_RESOLUTION_DEG: f64 = 1e-9;

fn snap(deg: f64) -> f64 {
    (deg / BOUNDARY_RESOLUTION_DEG).round() * BOUNDARY_RESOLUTION_DEG
}

/// Partition pulses into overlapping azimuth windows.
///
/// Windows advance by `span - overlap` degrees from the first pulse after the
/// largest angular gap in the data (the minimum azimuth for data that do not
/// wrap). Membership uses half-open intervals under modular arithmetic.
pub fn plan_subapertures(azimuths: &[f64], span_deg: f64, overlap_deg: f64) -> Result<AperturePlan> {
    if azimuths.is_empty() {
        return Err(Error::invalid("azimuths", "at least one pulse is required"));
    }
    if !(span_deg.is_finite() && span_deg > 0.0 && span_deg <= 360.0) {
        return Err(Error::invalid("span_deg", format!("must lie in (0, 360], got {span_deg}")));
    }
    if !(overlap_deg.is_finite() && overlap_deg >= 0.0) {
        return Err(Error::invalid("overlap_deg", format!("must be nonnegative, got {overlap_deg}")));
    }
    if overlap_deg >= span_deg {
        return Err(Error::invalid("overlap_deg", format!("{overlap_deg} must be smaller than the span {span_deg}")));
    }
    if let Some(bad) = azimuths.iter().find(|a| !a.is_finite()) {
        return Err(Error::invalid("azimuths", format!("{bad} is not finite")));
    }
    let step = span_deg - overlap_deg;

    let mut sorted: Vec<f64> = azimuths.iter().map(|a| a.rem_euclid(TAU).to_degrees()).collect();
    sorted.sort_by(f64::total_cmp);
    // Largest circular gap; ties resolve to the smallest starting azimuth.
    let n = sorted.len();
    let mut start = sorted[0];
    let mut widest = if n == 1 { 360.0 } else { sorted[0] + 360.0 - sorted[n - 1] };
    for i in 1..n {
        let gap = sorted[i] - sorted[i - 1];
        if gap > widest + BOUNDARY_RESOLUTION_DEG {
            widest = gap;
            start = sorted[i];
        }
    }
    let coverage = snap(360.0 - widest).max(0.0);

    let offsets: Vec<f64> = azimuths
        .iter()
        .map(|a| snap((a.to_degrees() - start).rem_euclid(360.0)) % 360.0)
        .collect();
    let inside = |offset: f64, lo: f64| -> bool {
        let hi = lo + span_deg;
        (offset >= lo && offset < hi) || (offset + 360.0 >= lo && offset + 360.0 < hi)
    };

    let mut count = ((coverage / step).ceil() as usize).max(1);
    // Exact multiples with zero overlap leave the final pulse on an open boundary.
    let last_offset = offsets.iter().cloned().fold(0.0, f64::max);
    if !(0..count).any(|l| inside(last_offset, l as f64 * step)) {
        count += 1;
    }

    let mut windows = Vec::with_capacity(count);
    for l in 0..count {
        let lo = l as f64 * step;
        let nominal_end = lo + span_deg;
        // Non-wrapping windows are truncated to the measured coverage.
        let end = if nominal_end <= 360.0 && nominal_end > coverage {
            coverage.max(lo)
        } else {
            nominal_end
        };
        let pulses: Vec<usize> = offsets
            .iter()
            .enumerate()
            .filter(|(_, &o)| inside(o, lo))
            .map(|(p, _)| p)
            .collect();
        if pulses.is_empty() {
            return Err(Error::EmptyWindow { window: l });
        }
        let start_rad = (start + lo).rem_euclid(360.0).to_radians();
        let half_span = (end - lo).max(0.0) / 2.0;
        windows.push(Window {
            index: l,
            start: start_rad,
            center: (start + lo + half_span).rem_euclid(360.0).to_radians(),
            half_span: half_span.to_radians(),
            pulses,
        });
    }
    let uncovered = (0..azimuths.len())
        .filter(|p| !windows.iter().any(|w| w.pulses.binary_search(p).is_ok()))
        .collect();
    Ok(AperturePlan {
        windows,
        span_deg,
        overlap_deg,
        uncovered,
    })
}

/// Deramped spatial frequencies `k_m = (2/c)(omega + 2 alpha (t_m - tau0))`.
pub fn compute_spatial_frequencies(times: &[f64], carrier: f64, rate: f64, tau0: f64, speed: f64) -> Result<Vec<f64>> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::invalid("speed", format!("must be finite and positive, got {speed}")));
    }
    if !(carrier.is_finite() && rate.is_finite() && tau0.is_finite()) {
        return Err(Error::NonFinite("chirp parameters"));
    }
    times
        .iter()
        .map(|&t| {
            let k = 2.0 / speed * (carrier + 2.0 * rate * (t - tau0));
            if k.is_finite() {
                Ok(k)
            } else {
                Err(Error::NonFinite("sample times"))
            }
        })
        .collect()
}

/// Two-dimensional frequency coordinates `(k cos theta, k sin theta)` of one window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FreqCoords {
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
}

impl FreqCoords {
    pub fn new(kx: Vec<f64>, ky: Vec<f64>) -> Result<Self> {
        if kx.len() != ky.len() {
            return Err(Error::Dimension {
                what: "frequency coordinates",
                expected: kx.len(),
                found: ky.len(),
            });
        }
        if kx.iter().chain(&ky).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frequency coordinates"));
        }
        Ok(Self { kx, ky })
    }

    /// Polar samples: every azimuth paired with every radial frequency.
    pub fn polar(azimuths: &[f64], k: &[f64]) -> Result<Self> {
        let mut kx = Vec::with_capacity(azimuths.len() * k.len());
        let mut ky = Vec::with_capacity(azimuths.len() * k.len());
        for &theta in azimuths {
            let (s, c) = theta.sin_cos();
            for &km in k {
                kx.push(km * c);
                ky.push(km * s);
            }
        }
        Self::new(kx, ky)
    }

    /// Every DFT frequency of an `oversample * nx` by `oversample * ny` uniform
    /// grid; for these samples the normal operator is exactly a multiple of the identity.
    pub fn uniform(grid: &SceneGrid, oversample: usize) -> Self {
        let (mx, my) = (grid.nx * oversample.max(1), grid.ny * oversample.max(1));
        let mut kx = Vec::with_capacity(mx * my);
        let mut ky = Vec::with_capacity(mx * my);
        for jy in 0..my {
            for jx in 0..mx {
                let wx = TAU * (jx as f64 - (mx / 2) as f64) / mx as f64;
                let wy = TAU * (jy as f64 - (my / 2) as f64) / my as f64;
                kx.push(wx / grid.pitch_x());
                ky.push(wy / grid.pitch_y());
            }
        }
        Self { kx, ky }
    }

    pub fn len(&self) -> usize {
        self.kx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kx.is_empty()
    }

    pub fn concat(parts: &[FreqCoords]) -> Self {
        let mut out = FreqCoords::default();
        for p in parts {
            out.kx.extend_from_slice(&p.kx);
            out.ky.extend_from_slice(&p.ky);
        }
        out
    }
}

/// Frequency coordinates of a window's samples, concatenated in pulse order.
pub fn freq_coords(window: &Window, ph: &PhaseHistory) -> Result<FreqCoords> {
    let k = ph.samples_per_pulse();
    let mut kx = Vec::with_capacity(window.pulses.len() * k);
    let mut ky = Vec::with_capacity(window.pulses.len() * k);
    for &p in &window.pulses {
        if p >= ph.pulses() {
            return Err(Error::invalid("window pulses", format!("pulse index {p} out of range ({} pulses)", ph.pulses())));
        }
        let (s, c) = ph.azimuths()[p].sin_cos();
        for &km in ph.pulse_frequencies(p) {
            kx.push(km * c);
            ky.push(km * s);
        }
    }
    FreqCoords::new(kx, ky)
}

/// Azimuths of `pulses` evenly spaced over `[start_deg, start_deg + coverage_deg)`.
pub fn uniform_azimuths(pulses: usize, start_deg: f64, coverage_deg: f64) -> Vec<f64> {
    let step = coverage_deg / pulses as f64;
    (0..pulses)
        .map(|p| (start_deg + step * p as f64).to_radians().rem_euclid(TAU))
        .collect()
}
