//! TOML run configuration shared by the simulator and image formation.
//!
//! ```toml
//! seed = 7
//! out = "run"
//!
//! [grid]
//! n = 64          # or nx / ny
//! extent = 32.0   # half-width of the scene
//!
//! [scene]
//! alpha_bg = 2.0e4
//! [[scene.scatterers]]
//! ix = 20
//! iy = 30
//! amplitude = [1.0, 0.0]
//! visible_deg = [0.0, 40.0]
//!
//! [acquisition]
//! pulses = 360
//! coverage_deg = 360.0
//! samples_per_pulse = 32
//! band = [0.3, 0.95]      # fraction of the grid band limit
//! noise_precision = 1.0e4
//!
//! [form]
//! method = "bcd"
//! span_deg = 40.0
//! overlap_deg = 10.0
//! ```

use serde::{Deserialize, Serialize};

use crate::baseline::AdmmConfig;
use crate::error::{Error, Result};
use crate::geometry::{compute_spatial_frequencies, uniform_azimuths, ChirpParams, FrequencyAxis, SceneGrid};
use crate::regularizers::RegularizerKind;
use crate::simulator::{AcquisitionSpec, Scatterer, SceneSpec};
use crate::solver::{GramMode, SolverConfig};

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory.
    pub out: Option<String>,
    pub grid: GridConfig,
    pub scene: SceneConfig,
    pub acquisition: AcquisitionConfig,
    pub form: FormConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: Option<usize>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub extent: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: Some(64),
            nx: None,
            ny: None,
            extent: 32.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub alpha_bg: f64,
    pub scatterers: Vec<ScattererConfig>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            alpha_bg: 2.0e4,
            scatterers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererConfig {
    pub ix: usize,
    pub iy: usize,
    /// `[re, im]`.
    pub amplitude: [f64; 2],
    pub visible_deg: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub pulses: usize,
    pub start_deg: f64,
    pub coverage_deg: f64,
    pub samples_per_pulse: usize,
    /// Radial band as fractions of the grid band limit; ignored when
    /// `k_min`/`k_max` or a chirp is given.
    pub band: [f64; 2],
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub chirp: Option<ChirpConfig>,
    /// Absent or infinite for noiseless data.
    pub noise_precision: Option<f64>,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            pulses: 360,
            start_deg: 0.0,
            coverage_deg: 360.0,
            samples_per_pulse: 32,
            band: [0.3, 0.95],
            k_min: None,
            k_max: None,
            chirp: None,
            noise_precision: None,
        }
    }
}

/// Linear-FM chirp sampled at `samples_per_pulse` instants from `t_start`
/// with spacing `t_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpConfig {
    pub carrier: f64,
    pub rate: f64,
    pub tau0: f64,
    pub speed: f64,
    pub t_start: f64,
    pub t_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nufft,
    L1,
    Bcd,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Nufft => "nufft",
            Method::L1 => "l1",
            Method::Bcd => "bcd",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nufft" => Ok(Method::Nufft),
            "l1" => Ok(Method::L1),
            "bcd" => Ok(Method::Bcd),
            other => Err(Error::invalid("method", format!("unknown method `{other}` (expected nufft, l1 or bcd)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormConfig {
    pub method: Method,
    pub regularizer: RegularizerKind,
    pub span_deg: f64,
    pub overlap_deg: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub gram: GramMode,
    /// 0 uses every available core.
    pub workers: usize,
    pub l1: AdmmConfig,
}

impl Default for FormConfig {
    fn default() -> Self {
        Self {
            method: Method::Bcd,
            regularizer: RegularizerKind::Identity,
            span_deg: 40.0,
            overlap_deg: 10.0,
            eps: 0.01,
            max_iters: 100,
            gram: GramMode::Surrogate,
            workers: 0,
            l1: AdmmConfig::default(),
        }
    }
}

impl FormConfig {
    pub fn solver(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            eps: self.eps,
            max_iters: self.max_iters,
            gram: self.gram,
            seed,
            ..SolverConfig::for_regularizer(self.regularizer)
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Check every section that image formation depends on.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        let f = &self.form;
        if !(f.span_deg.is_finite() && f.span_deg > 0.0 && f.span_deg <= 360.0) {
            return Err(Error::invalid("span_deg", format!("must be in (0, 360], got {}", f.span_deg)));
        }
        if !(f.overlap_deg.is_finite() && f.overlap_deg >= 0.0 && f.overlap_deg < f.span_deg) {
            return Err(Error::invalid("overlap_deg", format!("must be in [0, span), got {}", f.overlap_deg)));
        }
        f.solver(self.seed).validate()?;
        f.l1.validate()
    }

    pub fn grid(&self) -> Result<SceneGrid> {
        let g = &self.grid;
        let (nx, ny) = match (g.nx, g.ny) {
            (Some(nx), Some(ny)) => (nx, ny),
            (None, None) => {
                let n = g.n.ok_or_else(|| Error::invalid("grid", "set `n` or both `nx` and `ny`"))?;
                (n, n)
            }
            _ => return Err(Error::invalid("grid", "set both `nx` and `ny`")),
        };
        SceneGrid::new(nx, ny, g.extent)
    }

    pub fn scene(&self) -> Result<SceneSpec> {
        let spec = SceneSpec {
            grid: self.grid()?,
            scatterers: self
                .scene
                .scatterers
                .iter()
                .map(|s| Scatterer {
                    ix: s.ix,
                    iy: s.iy,
                    amplitude: C64::new(s.amplitude[0], s.amplitude[1]),
                    visible_deg: s.visible_deg.map(|[a, b]| (a, b)),
                })
                .collect(),
            alpha_bg: self.scene.alpha_bg,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn acquisition(&self) -> Result<AcquisitionSpec> {
        let a = &self.acquisition;
        if a.pulses == 0 {
            return Err(Error::invalid("pulses", "must be at least 1"));
        }
        if a.samples_per_pulse == 0 {
            return Err(Error::invalid("samples_per_pulse", "must be at least 1"));
        }
        if !(a.coverage_deg > 0.0 && a.coverage_deg <= 360.0) {
            return Err(Error::invalid("coverage_deg", format!("must be in (0, 360], got {}", a.coverage_deg)));
        }
        if !a.start_deg.is_finite() {
            return Err(Error::NonFinite("start_deg"));
        }
        let k = a.samples_per_pulse;
        let (ks, chirp) = match &a.chirp {
            Some(c) => {
                let times: Vec<f64> = (0..k).map(|i| c.t_start + c.t_step * i as f64).collect();
                let ks = compute_spatial_frequencies(&times, c.carrier, c.rate, c.tau0, c.speed)?;
                let params = ChirpParams {
                    carrier: c.carrier,
                    rate: c.rate,
                    tau0: c.tau0,
                    speed: c.speed,
                    times,
                };
                (ks, Some(params))
            }
            None => {
                let limit = self.grid()?.band_limit();
                let lo = a.k_min.unwrap_or(a.band[0] * limit);
                let hi = a.k_max.unwrap_or(a.band[1] * limit);
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(Error::invalid("band", format!("need 0 < k_min <= k_max, got [{lo}, {hi}]")));
                }
                let ks = if k == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
                };
                (ks, None)
            }
        };
        let noise_precision = a.noise_precision.unwrap_or(f64::INFINITY);
        let spec = AcquisitionSpec {
            azimuths: uniform_azimuths(a.pulses, a.start_deg, a.coverage_deg),
            frequencies: FrequencyAxis::Shared(ks),
            chirp,
            noise_precision,
        };
        spec.validate()?;
        Ok(spec)
    }
}
