//! Synthetic scenes and phase histories with known ground truth.
//!
//! A scene is a speckle background plus point scatterers, each visible over
//! an azimuth interval. The background is drawn once per seed and shared by
//! every pulse; scatterer visibility is evaluated per pulse, so a window whose
//! span straddles an interval edge sees the scatterer on part of its pulses.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use crate::error::{Error, Result};
use crate::geometry::{ChirpParams, ComplexImage, FreqCoords, FrequencyAxis, PhaseHistory, SceneGrid, Window};
use crate::nufft::NufftOperator;

const NOISE_STREAM: u64 = 0x6E6F_6973_6500_0001;

/// Point scatterer at a pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub ix: usize,
    pub iy: usize,
    pub amplitude: C64,
    /// Visible azimuths `[from, to)` in degrees, modulo 360; `None` means
    /// visible from every direction.
    pub visible_deg: Option<(f64, f64)>,
}

impl Scatterer {
    pub fn isotropic(ix: usize, iy: usize, amplitude: C64) -> Self {
        Self { ix, iy, amplitude, visible_deg: None }
    }

    /// Start and angular width of the visibility interval in radians.
    fn interval(&self) -> Option<(f64, f64)> {
        self.visible_deg.map(|(a, b)| {
            let start = a.to_radians().rem_euclid(TAU);
            let width = (b - a).to_radians().rem_euclid(TAU);
            (start, if width == 0.0 { TAU } else { width })
        })
    }

    pub fn visible_at(&self, azimuth: f64) -> bool {
        match self.interval() {
            None => true,
            Some((start, width)) => (azimuth - start).rem_euclid(TAU) < width,
        }
    }

    /// Whether the visibility interval meets the window's span.
    pub fn visible_in(&self, window: &Window) -> bool {
        match self.interval() {
            None => true,
            Some((start, width)) => {
                let span = 2.0 * window.half_span;
                (start - window.start).rem_euclid(TAU) < span || (window.start - start).rem_euclid(TAU) < width
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub grid: SceneGrid,
    pub scatterers: Vec<Scatterer>,
    /// Background speckle precision; 0 disables the background.
    pub alpha_bg: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_bg.is_finite() && self.alpha_bg >= 0.0) {
            return Err(Error::invalid("alpha_bg", format!("must be finite and nonnegative, got {}", self.alpha_bg)));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if s.ix >= self.grid.nx || s.iy >= self.grid.ny {
                return Err(Error::invalid(
                    "scatterers",
                    format!("scatterer {i} at ({}, {}) is outside the {}x{} grid", s.ix, s.iy, self.grid.nx, self.grid.ny),
                ));
            }
            if !(s.amplitude.re.is_finite() && s.amplitude.im.is_finite()) {
                return Err(Error::NonFinite("scatterer amplitude"));
            }
            if let Some((a, b)) = s.visible_deg {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::NonFinite("scatterer visibility"));
                }
            }
        }
        Ok(())
    }

    /// Speckle background: real and imaginary parts independent with
    /// variance `1 / alpha_bg` each.
    pub fn background(&self) -> Vec<C64> {
        let n = self.grid.len();
        if self.alpha_bg == 0.0 {
            return vec![C64::new(0.0, 0.0); n];
        }
        let normal = Normal::new(0.0, (1.0 / self.alpha_bg).sqrt()).expect("finite positive deviation");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..n).map(|_| C64::new(normal.sample(&mut rng), normal.sample(&mut rng))).collect()
    }

    fn with_scatterers(&self, keep: impl Fn(usize, &Scatterer) -> bool) -> Result<ComplexImage> {
        self.validate()?;
        let mut values = self.background();
        for (_, s) in self.scatterers.iter().enumerate().filter(|(i, s)| keep(*i, s)) {
            values[self.grid.index(s.ix, s.iy)] += s.amplitude;
        }
        ComplexImage::new(self.grid, values)
    }
}

/// The scene as seen by `window` (every scatterer whose interval meets the
/// window's span), or by all azimuths when `window` is `None`.
pub fn make_scene(spec: &SceneSpec, window: Option<&Window>) -> Result<ComplexImage> {
    spec.with_scatterers(|_, s| window.map_or(true, |w| s.visible_in(w)))
}

/// The scene as seen from a single azimuth.
pub fn scene_at(spec: &SceneSpec, azimuth: f64) -> Result<ComplexImage> {
    spec.with_scatterers(|_, s| s.visible_at(azimuth))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSpec {
    /// Pulse azimuths in radians.
    pub azimuths: Vec<f64>,
    pub frequencies: FrequencyAxis,
    pub chirp: Option<ChirpParams>,
    /// Noise precision; `f64::INFINITY` gives noiseless data.
    pub noise_precision: f64,
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_precision > 0.0) {
            return Err(Error::invalid(
                "noise_precision",
                format!("must be positive, got {}", self.noise_precision),
            ));
        }
        Ok(())
    }
}

/// Circularly-symmetric complex Gaussian noise of total variance `1 / beta`.
pub fn complex_noise(len: usize, beta: f64, rng: &mut ChaCha8Rng) -> Vec<C64> {
    if beta.is_infinite() {
        return vec![C64::new(0.0, 0.0); len];
    }
    let normal = Normal::new(0.0, (0.5 / beta).sqrt()).expect("finite positive deviation");
    (0..len).map(|_| C64::new(normal.sample(rng), normal.sample(rng))).collect()
}

/// Add noise of precision `beta` drawn from the stream for `seed`.
pub fn add_noise(data: &mut [C64], beta: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_STREAM);
    let noise = complex_noise(data.len(), beta, &mut rng);
    for (d, n) in data.iter_mut().zip(noise) {
        *d += n;
    }
}

/// Phase history of the scene. Each pulse observes the scatterers visible
/// at its azimuth; pulses with the same visible set share one forward
/// transform.
pub fn synthesize(spec: &SceneSpec, acq: &AcquisitionSpec) -> Result<PhaseHistory> {
    spec.validate()?;
    acq.validate()?;
    // Validate the acquisition geometry before transforming.
    let samples = PhaseHistory::new(
        acq.azimuths.clone(),
        acq.frequencies.clone(),
        vec![C64::new(0.0, 0.0); acq.azimuths.len() * per_pulse(&acq.frequencies, acq.azimuths.len())],
        acq.chirp.clone(),
    )?;
    let k = samples.samples_per_pulse();
    let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for (p, &az) in acq.azimuths.iter().enumerate() {
        let key = spec.scatterers.iter().map(|s| s.visible_at(az)).collect();
        groups.entry(key).or_default().push(p);
    }
    let mut data = vec![C64::new(0.0, 0.0); acq.azimuths.len() * k];
    for (visible, pulses) in groups {
        let scene = spec.with_scatterers(|i, _| visible[i])?;
        let mut kx = Vec::with_capacity(pulses.len() * k);
        let mut ky = Vec::with_capacity(pulses.len() * k);
        for &p in &pulses {
            let (s, c) = acq.azimuths[p].sin_cos();
            for &km in samples.pulse_frequencies(p) {
                kx.push(km * c);
                ky.push(km * s);
            }
        }
        let op = NufftOperator::new(spec.grid, FreqCoords::new(kx, ky)?)?;
        let out = op.forward(&scene)?;
        for (chunk, &p) in out.chunks_exact(k).zip(&pulses) {
            data[p * k..(p + 1) * k].copy_from_slice(chunk);
        }
    }
    add_noise(&mut data, acq.noise_precision, spec.seed);
    PhaseHistory::new(acq.azimuths.clone(), acq.frequencies.clone(), data, acq.chirp.clone())
}

fn per_pulse(axis: &FrequencyAxis, pulses: usize) -> usize {
    match axis {
        FrequencyAxis::Shared(k) => k.len(),
        FrequencyAxis::PerPulse(k) => k.len() / pulses.max(1),
    }
}
