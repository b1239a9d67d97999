//! Gridding NUFFT for the sub-aperture forward model.
//!
//! `forward` evaluates the type-2 sum
//! `y_m = sum_j f_j exp(-i (kx_m x_j + ky_m y_j))` at nonuniform frequencies,
//! `adjoint` is its exact conjugate transpose (type-1 spreading). Both go
//! through an oversampled uniform grid, an FFT, and a separable
//! exponential-of-semicircle kernel; the kernel's Fourier transform is
//! divided out on the modes.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{ComplexImage, FreqCoords, SceneGrid};
use crate::operator::{check_len, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NufftParams {
    /// Fine-grid oversampling factor.
    pub oversampling: f64,
    /// Kernel width in fine-grid samples.
    pub width: usize,
}

impl Default for NufftParams {
    fn default() -> Self {
        Self {
            oversampling: 2.0,
            width: 12,
        }
    }
}

/// Exponential-of-semicircle kernel `exp(beta (sqrt(1 - (2z/w)^2) - 1))` on `|z| <= w/2`.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    half_width: f64,
    beta: f64,
}

impl Kernel {
    fn new(width: usize, oversampling: f64) -> Self {
        let beta = 0.97 * PI * (1.0 - 0.5 / oversampling) * width as f64;
        Self {
            half_width: width as f64 / 2.0,
            beta,
        }
    }

    fn eval(&self, z: f64) -> f64 {
        let u = z / self.half_width;
        let s = 1.0 - u * u;
        if s <= 0.0 {
            0.0
        } else {
            (self.beta * (s.sqrt() - 1.0)).exp()
        }
    }

    /// `int phi(z) cos(xi z) dz` by Gauss-Legendre quadrature on `[0, w/2]`.
    fn fourier(&self, xi: f64, nodes: &[(f64, f64)]) -> f64 {
        let h = self.half_width;
        nodes
            .iter()
            .map(|&(x, w)| {
                let z = 0.5 * h * (x + 1.0);
                w * self.eval(z) * (xi * z).cos()
            })
            .sum::<f64>()
            * h
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// One axis of the gridding scheme.
#[derive(Clone)]
struct Axis {
    modes: usize,
    fine: usize,
    /// `1 / phi_hat` per mode, indexed by pixel column/row.
    deconv: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Axis {
    fn new(modes: usize, params: &NufftParams, kernel: &Kernel, nodes: &[(f64, f64)], planner: &mut FftPlanner<f64>) -> Self {
        let mut fine = ((params.oversampling * modes as f64).ceil() as usize).max(2 * params.width);
        fine += fine % 2;
        let deconv = (0..modes)
            .map(|i| {
                let j = i as f64 - (modes / 2) as f64;
                1.0 / kernel.fourier(TAU * j / fine as f64, nodes)
            })
            .collect();
        Self {
            modes,
            fine,
            deconv,
            fwd: planner.plan_fft_forward(fine),
            inv: planner.plan_fft_inverse(fine),
        }
    }

    /// Fine-grid slot of the pixel with index `i` (signed mode `i - modes/2`).
    fn slot(&self, i: usize) -> usize {
        (i as i64 - (self.modes / 2) as i64).rem_euclid(self.fine as i64) as usize
    }
}

/// Type-2 forward operator for one window, with its adjoint.
#[derive(Clone)]
pub struct NufftOperator {
    grid: SceneGrid,
    coords: FreqCoords,
    params: NufftParams,
    x: Axis,
    y: Axis,
    /// Per-sample fine-grid indices (`width` each) and kernel weights.
    idx_x: Vec<u32>,
    idx_y: Vec<u32>,
    wt_x: Vec<f64>,
    wt_y: Vec<f64>,
    gram: f64,
}

impl std::fmt::Debug for NufftOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NufftOperator")
            .field("grid", &self.grid)
            .field("samples", &self.coords.len())
            .field("params", &self.params)
            .field("fine", &(self.x.fine, self.y.fine))
            .finish()
    }
}

impl NufftOperator {
    pub fn new(grid: SceneGrid, coords: FreqCoords) -> Result<Self> {
        Self::with_params(grid, coords, NufftParams::default())
    }

    pub fn with_params(grid: SceneGrid, coords: FreqCoords, params: NufftParams) -> Result<Self> {
        if !(params.oversampling.is_finite() && params.oversampling >= 1.25) {
            return Err(Error::invalid("oversampling", format!("must be at least 1.25, got {}", params.oversampling)));
        }
        if !(2..=16).contains(&params.width) {
            return Err(Error::invalid("width", format!("must lie in [2, 16], got {}", params.width)));
        }
        let kernel = Kernel::new(params.width, params.oversampling);
        let nodes = gauss_legendre(64);
        let mut planner = FftPlanner::new();
        let x = Axis::new(grid.nx, &params, &kernel, &nodes, &mut planner);
        let y = Axis::new(grid.ny, &params, &kernel, &nodes, &mut planner);

        let w = params.width;
        let m = coords.len();
        let mut idx_x = Vec::with_capacity(m * w);
        let mut idx_y = Vec::with_capacity(m * w);
        let mut wt_x = Vec::with_capacity(m * w);
        let mut wt_y = Vec::with_capacity(m * w);
        let (hx, hy) = (grid.pitch_x(), grid.pitch_y());
        for s in 0..m {
            for (axis, k, h, idx, wt, name) in [
                (&x, coords.kx[s], hx, &mut idx_x, &mut wt_x, 'x'),
                (&y, coords.ky[s], hy, &mut idx_y, &mut wt_y, 'y'),
            ] {
                let omega = k * h;
                if !(-PI..PI).contains(&omega) {
                    return Err(Error::OutOfBand {
                        sample: s,
                        axis: name,
                        value: omega,
                    });
                }
                let t = omega * axis.fine as f64 / TAU;
                let l0 = (t - kernel.half_width).ceil() as i64;
                for l in l0..l0 + w as i64 {
                    idx.push(l.rem_euclid(axis.fine as i64) as u32);
                    wt.push(kernel.eval(t - l as f64));
                }
            }
        }
        let mut op = Self {
            grid,
            coords,
            params,
            x,
            y,
            idx_x,
            idx_y,
            wt_x,
            wt_y,
            gram: 1.0,
        };
        let (cx, cy) = grid.center();
        op.gram = crate::operator::calibrate_gram(&op, grid.index(cx, cy));
        Ok(op)
    }

    pub fn grid(&self) -> &SceneGrid {
        &self.grid
    }

    pub fn coords(&self) -> &FreqCoords {
        &self.coords
    }

    pub fn params(&self) -> &NufftParams {
        &self.params
    }

    pub fn samples(&self) -> usize {
        self.coords.len()
    }

    pub fn forward(&self, img: &ComplexImage) -> Result<Vec<C64>> {
        if img.grid() != &self.grid {
            return Err(Error::Dimension {
                what: "image grid",
                expected: self.grid.len(),
                found: img.grid().len(),
            });
        }
        Ok(self.forward_values(img.values()))
    }

    pub fn adjoint(&self, samples: &[C64]) -> Result<ComplexImage> {
        check_len("samples", self.samples(), samples.len())?;
        ComplexImage::new(self.grid, self.adjoint_values(samples))
    }

    /// `F* data / M`: a unit point scatterer round-trips to unit magnitude.
    pub fn ml_estimate(&self, data: &[C64]) -> Result<ComplexImage> {
        check_len("samples", self.samples(), data.len())?;
        let scale = 1.0 / self.samples().max(1) as f64;
        let values = self.adjoint_values(data).into_iter().map(|v| v * scale).collect();
        ComplexImage::new(self.grid, values)
    }

    fn forward_values(&self, values: &[C64]) -> Vec<C64> {
        let (nf1, nf2) = (self.x.fine, self.y.fine);
        let mut fine = vec![C64::new(0.0, 0.0); nf1 * nf2];
        let mut rows = Vec::with_capacity(self.grid.ny);
        for iy in 0..self.grid.ny {
            let row = self.y.slot(iy);
            rows.push(row);
            let dy = self.y.deconv[iy];
            let dst = &mut fine[row * nf1..(row + 1) * nf1];
            for ix in 0..self.grid.nx {
                dst[self.x.slot(ix)] = values[self.grid.index(ix, iy)] * (dy * self.x.deconv[ix]);
            }
        }
        fft2(&mut fine, &self.x, &self.y, &rows, false);

        let w = self.params.width;
        let mut out = Vec::with_capacity(self.samples());
        for s in 0..self.samples() {
            let ix = &self.idx_x[s * w..(s + 1) * w];
            let iy = &self.idx_y[s * w..(s + 1) * w];
            let wx = &self.wt_x[s * w..(s + 1) * w];
            let wy = &self.wt_y[s * w..(s + 1) * w];
            let mut acc = C64::new(0.0, 0.0);
            for (&r, &wyr) in iy.iter().zip(wy) {
                let row = &fine[r as usize * nf1..(r as usize + 1) * nf1];
                let mut inner = C64::new(0.0, 0.0);
                for (&c, &wxc) in ix.iter().zip(wx) {
                    inner += row[c as usize] * wxc;
                }
                acc += inner * wyr;
            }
            out.push(acc);
        }
        out
    }

    fn adjoint_values(&self, samples: &[C64]) -> Vec<C64> {
        let (nf1, nf2) = (self.x.fine, self.y.fine);
        let mut fine = vec![C64::new(0.0, 0.0); nf1 * nf2];
        let w = self.params.width;
        for (s, &v) in samples.iter().enumerate() {
            let ix = &self.idx_x[s * w..(s + 1) * w];
            let iy = &self.idx_y[s * w..(s + 1) * w];
            let wx = &self.wt_x[s * w..(s + 1) * w];
            let wy = &self.wt_y[s * w..(s + 1) * w];
            for (&r, &wyr) in iy.iter().zip(wy) {
                let scaled = v * wyr;
                let row = &mut fine[r as usize * nf1..(r as usize + 1) * nf1];
                for (&c, &wxc) in ix.iter().zip(wx) {
                    row[c as usize] += scaled * wxc;
                }
            }
        }
        let rows: Vec<usize> = (0..self.grid.ny).map(|iy| self.y.slot(iy)).collect();
        fft2(&mut fine, &self.x, &self.y, &rows, true);

        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        for (iy, &row) in rows.iter().enumerate() {
            let dy = self.y.deconv[iy];
            let src = &fine[row * nf1..(row + 1) * nf1];
            for ix in 0..self.grid.nx {
                out[self.grid.index(ix, iy)] = src[self.x.slot(ix)] * (dy * self.x.deconv[ix]);
            }
        }
        out
    }
}

impl LinearOperator for NufftOperator {
    fn input_len(&self) -> usize {
        self.grid.len()
    }

    fn output_len(&self) -> usize {
        self.samples()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.forward_values(x)
    }

    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.adjoint_values(y)
    }

    fn gram_scale(&self) -> f64 {
        self.gram
    }
}

/// Unnormalized 2D FFT over a row-major `fine.y x fine.x` grid. Only `rows`
/// carry modes: they are the only rows transformed before the column pass
/// (forward) or after it (inverse).
fn fft2(data: &mut [C64], x: &Axis, y: &Axis, rows: &[usize], inverse: bool) {
    let (nf1, nf2) = (x.fine, y.fine);
    let row_fft = if inverse { &x.inv } else { &x.fwd };
    let col_fft = if inverse { &y.inv } else { &y.fwd };
    let mut scratch = vec![C64::new(0.0, 0.0); row_fft.get_inplace_scratch_len().max(col_fft.get_inplace_scratch_len())];

    let row_pass = |data: &mut [C64], scratch: &mut [C64]| {
        for &r in rows {
            row_fft.process_with_scratch(&mut data[r * nf1..(r + 1) * nf1], scratch);
        }
    };

    if !inverse {
        row_pass(data, &mut scratch);
    }
    let mut t = vec![C64::new(0.0, 0.0); nf1 * nf2];
    transpose(data, &mut t, nf1, nf2);
    col_fft.process_with_scratch(&mut t, &mut scratch);
    transpose(&t, data, nf2, nf1);
    if inverse {
        row_pass(data, &mut scratch);
    }
}

/// `dst[c * rows + r] = src[r * cols + c]` for a `rows x cols` source.
fn transpose(src: &[C64], dst: &mut [C64], cols: usize, rows: usize) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Limit on `M * N` for the exact sums.
pub const DIRECT_DFT_LIMIT: usize = 100_000_000;

fn direct_guard(grid: &SceneGrid, coords: &FreqCoords) -> Result<()> {
    let size = grid.len().saturating_mul(coords.len());
    if size > DIRECT_DFT_LIMIT {
        return Err(Error::SizeGuard {
            what: "direct DFT (M*N)",
            size,
            limit: DIRECT_DFT_LIMIT,
        });
    }
    Ok(())
}

/// Exact `O(MN)` evaluation of the forward sum.
pub fn direct_dft(grid: &SceneGrid, coords: &FreqCoords, img: &ComplexImage) -> Result<Vec<C64>> {
    direct_guard(grid, coords)?;
    check_len("image values", grid.len(), img.values().len())?;
    let values = img.values();
    Ok((0..coords.len())
        .map(|m| {
            let mut acc = C64::new(0.0, 0.0);
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    let (x, y) = grid.position(ix, iy);
                    let phase = -(coords.kx[m] * x + coords.ky[m] * y);
                    acc += values[grid.index(ix, iy)] * C64::from_polar(1.0, phase);
                }
            }
            acc
        })
        .collect())
}

/// Exact conjugate transpose of [`direct_dft`].
pub fn direct_dft_adjoint(grid: &SceneGrid, coords: &FreqCoords, samples: &[C64]) -> Result<ComplexImage> {
    direct_guard(grid, coords)?;
    check_len("samples", coords.len(), samples.len())?;
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = grid.position(ix, iy);
            out[grid.index(ix, iy)] = samples
                .iter()
                .enumerate()
                .map(|(m, v)| v * C64::from_polar(1.0, coords.kx[m] * x + coords.ky[m] * y))
                .sum();
        }
    }
    ComplexImage::new(*grid, out)
}

/// Dense matrix of the exact forward sums, row-major `M x N`.
pub fn direct_dft_matrix(grid: &SceneGrid, coords: &FreqCoords) -> Result<crate::operator::DenseOperator> {
    direct_guard(grid, coords)?;
    let mut entries = Vec::with_capacity(coords.len() * grid.len());
    for m in 0..coords.len() {
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let (x, y) = grid.position(ix, iy);
                entries.push(C64::from_polar(1.0, -(coords.kx[m] * x + coords.ky[m] * y)));
            }
        }
    }
    crate::operator::DenseOperator::new(coords.len(), grid.len(), entries)
}
