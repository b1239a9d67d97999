//! File formats: phase histories, complex and real images, window
//! posteriors (all as a text header followed by a little-endian `f64`
//! payload) and 8-bit PGM previews.
//!
//! Header layout:
//!
//! ```text
//! subsar <kind>
//! version = 1
//! endianness = little
//! key = value
//! ...
//! end_header
//! ```
//!
//! Complex values are stored as consecutive `(re, im)` pairs.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::{ChirpParams, ComplexImage, FrequencyAxis, PhaseHistory, SceneGrid};
use crate::metrics::DB_FLOOR;
use crate::regularizers::{PhaseMatrix, RegularizerKind};
use crate::solver::{GramMode, IterationRecord, Precision, SubAperturePosterior};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "subsar";
const END: &str = "end_header";
/// Headers longer than this are rejected before any parsing.
pub const MAX_HEADER_BYTES: usize = 64 * 1024;

pub const KIND_PHASE_HISTORY: &str = "phase-history";
pub const KIND_IMAGE: &str = "image";
pub const KIND_REAL_IMAGE: &str = "real-image";
pub const KIND_POSTERIOR: &str = "posterior";

/// A parsed header and the raw payload that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct Container<'a> {
    pub kind: String,
    pub fields: BTreeMap<String, String>,
    /// Byte offset of the payload within the file.
    pub payload_offset: usize,
    pub payload: &'a [u8],
}

pub fn parse_container(bytes: &[u8]) -> Result<Container<'_>> {
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let Some(nl) = rest.iter().position(|b| *b == b'\n') else {
            return Err(Error::malformed("header", "missing `end_header` line"));
        };
        if pos + nl > MAX_HEADER_BYTES {
            return Err(Error::malformed("header", format!("longer than {MAX_HEADER_BYTES} bytes")));
        }
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| Error::malformed("header", format!("line {} is not UTF-8", lines.len() + 1)))?;
        let line = line.strip_suffix('\r').unwrap_or(line);
        pos += nl + 1;
        if line == END {
            break;
        }
        lines.push(line);
    }
    let mut it = lines.into_iter();
    let first = it.next().ok_or_else(|| Error::malformed("header", "empty header"))?;
    let kind = match first.split_once(' ') {
        Some((MAGIC, kind)) if !kind.trim().is_empty() => kind.trim().to_string(),
        _ => return Err(Error::malformed("magic", format!("expected `{MAGIC} <kind>`, found {first:?}"))),
    };
    let mut fields = BTreeMap::new();
    for (n, line) in it.enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::malformed("header", format!("line {} is not `key = value`: {trimmed:?}", n + 2)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::malformed("header", format!("line {} has an empty key", n + 2)));
        }
        if fields.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::malformed(key, "appears more than once"));
        }
    }
    let version = fields.get("version").ok_or_else(|| Error::malformed("version", "missing"))?;
    if version.parse::<u32>().ok() != Some(FORMAT_VERSION) {
        return Err(Error::Version {
            found: version.clone(),
            expected: FORMAT_VERSION,
        });
    }
    match fields.get("endianness").map(String::as_str) {
        Some("little") => {}
        Some(other) => return Err(Error::malformed("endianness", format!("only `little` is supported, found {other:?}"))),
        None => return Err(Error::malformed("endianness", "missing")),
    }
    Ok(Container {
        kind,
        fields,
        payload_offset: pos,
        payload: &bytes[pos..],
    })
}

impl Container<'_> {
    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::malformed("kind", format!("expected a {kind} file, found {}", self.kind)))
        }
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::malformed(key, "missing"))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(key)?;
        raw.parse().map_err(|e: T::Err| Error::malformed(key, format!("{raw:?}: {e}")))
    }

    fn grid(&self) -> Result<SceneGrid> {
        SceneGrid::new(self.parse("nx")?, self.parse("ny")?, self.parse("extent")?).map_err(|e| Error::malformed("grid", e.to_string()))
    }

    /// Check that the payload holds exactly `count` values of `f64`.
    fn expect_f64s(&self, count: Option<usize>) -> Result<()> {
        let expected = count
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::malformed("payload", "declared size overflows"))?;
        let found = self.payload.len();
        if found < expected {
            return Err(Error::Truncated {
                offset: (self.payload_offset + found) as u64,
                expected: (self.payload_offset as u64).saturating_add(expected as u64),
            });
        }
        if found > expected {
            return Err(Error::malformed("payload", format!("{} trailing bytes", found - expected)));
        }
        Ok(())
    }
}

/// Sequential reader over a length-checked payload.
struct Payload<'a> {
    bytes: &'a [u8],
}

impl Payload<'_> {
    fn f64s(&mut self, n: usize) -> Vec<f64> {
        let (head, tail) = self.bytes.split_at(n * 8);
        self.bytes = tail;
        head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect()
    }

    fn complex(&mut self, n: usize) -> Vec<C64> {
        self.f64s(2 * n).chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
    }
}

fn write_header<W: Write>(w: &mut W, kind: &str, fields: &[(&str, String)]) -> Result<()> {
    writeln!(w, "{MAGIC} {kind}")?;
    writeln!(w, "version = {FORMAT_VERSION}")?;
    writeln!(w, "endianness = little")?;
    for (k, v) in fields {
        writeln!(w, "{k} = {v}")?;
    }
    writeln!(w, "{END}")?;
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_complex<W: Write>(w: &mut W, values: &[C64]) -> Result<()> {
    write_f64s(w, values.iter().flat_map(|v| [v.re, v.im]))
}

fn grid_fields(grid: &SceneGrid) -> Vec<(&'static str, String)> {
    vec![
        ("nx", grid.nx.to_string()),
        ("ny", grid.ny.to_string()),
        ("extent", grid.extent.to_string()),
    ]
}

pub fn write_phase_history<W: Write>(w: &mut W, ph: &PhaseHistory) -> Result<()> {
    let mut fields = vec![
        ("pulses", ph.pulses().to_string()),
        ("samples_per_pulse", ph.samples_per_pulse().to_string()),
    ];
    let (layout, ks) = match ph.frequencies() {
        FrequencyAxis::Shared(k) => ("shared", k),
        FrequencyAxis::PerPulse(k) => ("per-pulse", k),
    };
    fields.push(("frequency_layout", layout.to_string()));
    match ph.chirp() {
        Some(c) => {
            fields.push(("chirp", "present".to_string()));
            fields.push(("chirp_carrier", c.carrier.to_string()));
            fields.push(("chirp_rate", c.rate.to_string()));
            fields.push(("chirp_tau0", c.tau0.to_string()));
            fields.push(("chirp_speed", c.speed.to_string()));
            fields.push(("chirp_times", c.times.len().to_string()));
        }
        None => fields.push(("chirp", "none".to_string())),
    }
    write_header(w, KIND_PHASE_HISTORY, &fields)?;
    write_f64s(w, ph.azimuths().iter().copied())?;
    write_f64s(w, ks.iter().copied())?;
    if let Some(c) = ph.chirp() {
        write_f64s(w, c.times.iter().copied())?;
    }
    write_complex(w, ph.data())
}

pub fn read_phase_history(bytes: &[u8]) -> Result<PhaseHistory> {
    let c = parse_container(bytes)?;
    c.expect_kind(KIND_PHASE_HISTORY)?;
    let pulses: usize = c.parse("pulses")?;
    let k: usize = c.parse("samples_per_pulse")?;
    let per_pulse = match c.str("frequency_layout")? {
        "shared" => false,
        "per-pulse" => true,
        other => return Err(Error::malformed("frequency_layout", format!("expected `shared` or `per-pulse`, found {other:?}"))),
    };
    let chirp_times = match c.str("chirp")? {
        "none" => None,
        "present" => Some(c.parse::<usize>("chirp_times")?),
        other => return Err(Error::malformed("chirp", format!("expected `none` or `present`, found {other:?}"))),
    };
    let samples = pulses.checked_mul(k);
    let freq_count = if per_pulse { samples } else { Some(k) };
    let total = samples
        .and_then(|s| s.checked_mul(2))
        .and_then(|d| d.checked_add(pulses))
        .and_then(|d| freq_count.and_then(|f| d.checked_add(f)))
        .and_then(|d| d.checked_add(chirp_times.unwrap_or(0)));
    c.expect_f64s(total)?;
    let mut p = Payload { bytes: c.payload };
    let azimuths = p.f64s(pulses);
    let ks = p.f64s(freq_count.expect("checked above"));
    let chirp = match chirp_times {
        Some(n) => Some(ChirpParams {
            carrier: c.parse("chirp_carrier")?,
            rate: c.parse("chirp_rate")?,
            tau0: c.parse("chirp_tau0")?,
            speed: c.parse("chirp_speed")?,
            times: p.f64s(n),
        }),
        None => None,
    };
    let data = p.complex(samples.expect("checked above"));
    let axis = if per_pulse { FrequencyAxis::PerPulse(ks) } else { FrequencyAxis::Shared(ks) };
    PhaseHistory::new(azimuths, axis, data, chirp).map_err(|e| Error::malformed("phase history", e.to_string()))
}

/// Complex image plus free-form metadata (method, window index, ...).
pub fn write_image<W: Write>(w: &mut W, img: &ComplexImage, meta: &[(&str, String)]) -> Result<()> {
    let mut fields = grid_fields(img.grid());
    fields.extend(meta.iter().cloned());
    write_header(w, KIND_IMAGE, &fields)?;
    write_complex(w, img.values())
}

pub fn read_image(bytes: &[u8]) -> Result<(ComplexImage, BTreeMap<String, String>)> {
    let c = parse_container(bytes)?;
    c.expect_kind(KIND_IMAGE)?;
    let grid = c.grid()?;
    c.expect_f64s(grid.len().checked_mul(2))?;
    let values = Payload { bytes: c.payload }.complex(grid.len());
    let img = ComplexImage::new(grid, values).map_err(|e| Error::malformed("image", e.to_string()))?;
    Ok((img, c.fields))
}

pub fn write_real_image<W: Write>(w: &mut W, grid: &SceneGrid, values: &[f64], meta: &[(&str, String)]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::Dimension {
            what: "real image",
            expected: grid.len(),
            found: values.len(),
        });
    }
    let mut fields = grid_fields(grid);
    fields.extend(meta.iter().cloned());
    write_header(w, KIND_REAL_IMAGE, &fields)?;
    write_f64s(w, values.iter().copied())
}

pub fn read_real_image(bytes: &[u8]) -> Result<(SceneGrid, Vec<f64>)> {
    let c = parse_container(bytes)?;
    c.expect_kind(KIND_REAL_IMAGE)?;
    let grid = c.grid()?;
    c.expect_f64s(Some(grid.len()))?;
    Ok((grid, Payload { bytes: c.payload }.f64s(grid.len())))
}

const TRACE_WIDTH: usize = 6;

pub fn write_posterior<W: Write>(w: &mut W, post: &SubAperturePosterior) -> Result<()> {
    let mut fields = grid_fields(post.mean.grid());
    let precision = match post.precision {
        Precision::Diagonal(_) => "diagonal",
        Precision::Operator { gram: GramMode::Surrogate } => "surrogate",
        Precision::Operator { gram: GramMode::Exact } => "exact",
    };
    fields.extend([
        ("window", post.window.to_string()),
        ("regularizer", post.regularizer.to_string()),
        ("precision", precision.to_string()),
        ("beta", post.beta.to_string()),
        ("rho", post.rho.to_string()),
        ("iterations", post.iterations.to_string()),
        ("converged", post.converged.to_string()),
        ("degenerate", post.degenerate.to_string()),
        ("alpha_len", post.alpha.len().to_string()),
        ("trace_len", post.trace.len().to_string()),
    ]);
    write_header(w, KIND_POSTERIOR, &fields)?;
    write_complex(w, post.mean.values())?;
    write_f64s(w, post.covariance_diagonal.iter().copied())?;
    write_f64s(w, post.alpha.iter().copied())?;
    for r in &post.trace {
        write_f64s(
            w,
            [
                r.relative_change,
                r.beta,
                r.mean_alpha,
                r.mean_abs_mu,
                r.cg_iterations as f64,
                if r.cg_converged { 1.0 } else { 0.0 },
            ],
        )?;
    }
    Ok(())
}

pub fn read_posterior(bytes: &[u8]) -> Result<SubAperturePosterior> {
    let c = parse_container(bytes)?;
    c.expect_kind(KIND_POSTERIOR)?;
    let grid = c.grid()?;
    let n = grid.len();
    let alpha_len: usize = c.parse("alpha_len")?;
    let trace_len: usize = c.parse("trace_len")?;
    let total = n
        .checked_mul(3)
        .and_then(|v| v.checked_add(alpha_len))
        .and_then(|v| trace_len.checked_mul(TRACE_WIDTH).and_then(|t| v.checked_add(t)));
    c.expect_f64s(total)?;
    let regularizer: RegularizerKind = c.parse("regularizer")?;
    let beta: f64 = c.parse("beta")?;
    let rho: f64 = c.parse("rho")?;
    let mut p = Payload { bytes: c.payload };
    let mean = p.complex(n);
    let covariance_diagonal = p.f64s(n);
    let alpha = p.f64s(alpha_len);
    let trace = p
        .f64s(trace_len * TRACE_WIDTH)
        .chunks_exact(TRACE_WIDTH)
        .map(|r| IterationRecord {
            relative_change: r[0],
            beta: r[1],
            mean_alpha: r[2],
            mean_abs_mu: r[3],
            cg_iterations: r[4] as usize,
            cg_converged: r[5] != 0.0,
        })
        .collect();
    let precision = match c.str("precision")? {
        "diagonal" => {
            if alpha_len != n {
                return Err(Error::malformed("alpha_len", format!("a diagonal precision needs {n} precisions, found {alpha_len}")));
            }
            Precision::Diagonal(alpha.iter().map(|a| beta * rho + a).collect())
        }
        "surrogate" => Precision::Operator { gram: GramMode::Surrogate },
        "exact" => Precision::Operator { gram: GramMode::Exact },
        other => return Err(Error::malformed("precision", format!("unknown representation {other:?}"))),
    };
    let theta = PhaseMatrix::from_values(&mean);
    Ok(SubAperturePosterior {
        window: c.parse("window")?,
        mean: ComplexImage::new(grid, mean).map_err(|e| Error::malformed("mean", e.to_string()))?,
        alpha,
        beta,
        theta,
        regularizer,
        rho,
        precision,
        covariance_diagonal,
        iterations: c.parse("iterations")?,
        converged: c.parse("converged")?,
        degenerate: c.parse("degenerate")?,
        trace,
    })
}

/// Map decibel values in `[-100, 0]` to gray levels `0..=255`.
pub fn db_to_gray(db: f64) -> u8 {
    let t = ((db - DB_FLOOR) / -DB_FLOOR).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

/// Binary 8-bit PGM of decibel values; the top row of the picture is the
/// grid's last row (largest `y`).
pub fn write_pgm<W: Write>(w: &mut W, grid: &SceneGrid, db: &[f64]) -> Result<()> {
    if db.len() != grid.len() {
        return Err(Error::Dimension {
            what: "decibel image",
            expected: grid.len(),
            found: db.len(),
        });
    }
    write!(w, "P5\n{} {}\n255\n", grid.nx, grid.ny)?;
    for row in db.chunks_exact(grid.nx).rev() {
        let bytes: Vec<u8> = row.iter().map(|v| db_to_gray(*v)).collect();
        w.write_all(&bytes)?;
    }
    Ok(())
}
