//! Reference reconstructions: the adjoint-based NUFFT estimate and
//! magnitude-sparse l1 reconstruction solved with ADMM.
//!
//! The l1 problem is
//! `min_f (beta / (2 rho_F)) ||d - F f||^2 + lambda ||T Theta* f||_1`
//! with `Theta` fixed to the phase of the NUFFT estimate and `rho_F` the
//! normal-operator scale of `F`, so `lambda` has the same meaning for any
//! data length.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cg;
use crate::error::{Error, Result};
use crate::geometry::{AperturePlan, ComplexImage, PhaseHistory, SceneGrid};
use crate::nufft::{NufftOperator, NufftParams};
use crate::operator::{check_len, LinearOperator};
use crate::regularizers::{PhaseMatrix, RegularizerKind, SparsifyingOperator};
use crate::solver::{map_windows, window_problem, GramMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmConfig {
    pub lambda: f64,
    pub beta: f64,
    /// Penalty parameter.
    pub rho: f64,
    pub iters: usize,
    pub gram: GramMode,
    pub cg_tol: f64,
    /// CG iterations per image update when `gram` is exact.
    pub cg_max_iters: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0 / 40.0,
            beta: 1.0,
            rho: 1.0,
            iters: 20,
            gram: GramMode::Exact,
            cg_tol: 1e-6,
            cg_max_iters: 5,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("lambda", self.lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and nonnegative, got {v}")));
            }
        }
        for (field, v) in [("beta", self.beta), ("rho", self.rho), ("cg_tol", self.cg_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be positive, got {v}")));
            }
        }
        if self.iters == 0 {
            return Err(Error::invalid("iters", "must be at least 1"));
        }
        if self.cg_max_iters == 0 {
            return Err(Error::invalid("cg_max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    pub image: ComplexImage,
    /// `||T Theta* f - z||` after each iteration.
    pub primal_residuals: Vec<f64>,
}

/// `F* d / M`.
pub fn nufft_baseline(data: &[C64], op: &NufftOperator) -> Result<ComplexImage> {
    op.ml_estimate(data)
}

/// Complex soft threshold: shrink the modulus by `tau`, keep the phase.
pub fn soft_threshold(v: C64, tau: f64) -> C64 {
    let m = v.norm();
    if m <= tau {
        C64::new(0.0, 0.0)
    } else {
        v * ((m - tau) / m)
    }
}

/// ADMM on the split `z = T Theta* f` with a scaled dual; `init` supplies the
/// starting image and the fixed phase.
pub fn l1_admm_with(
    data: &[C64],
    op: &dyn LinearOperator,
    grid: SceneGrid,
    t: &SparsifyingOperator,
    init: &[C64],
    config: &AdmmConfig,
) -> Result<AdmmResult> {
    config.validate()?;
    check_len("window data", op.output_len(), data.len())?;
    check_len("image grid", grid.len(), op.input_len())?;
    check_len("initial image", grid.len(), init.len())?;
    check_len("sparsifying operator columns", grid.len(), t.cols())?;
    if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("window data"));
    }
    let rho_f = op.gram_scale();
    if !(rho_f.is_finite() && rho_f > 0.0) {
        return Err(Error::invalid("forward operator", format!("normal-operator scale must be positive, got {rho_f}")));
    }
    let theta = PhaseMatrix::from_values(init);
    let w = config.beta / rho_f;
    let rho = config.rho;
    let tau = config.lambda / rho;

    let rhs_data: Vec<C64> = op.apply_adjoint(data).into_iter().map(|v| v * w).collect();
    let transform = |f: &[C64]| t.apply(&theta.apply_adjoint(f));
    let transform_adj = |c: &[C64]| theta.apply(&t.apply_adjoint(c));

    let mut f = init.to_vec();
    let mut z = transform(&f);
    let mut u = vec![C64::new(0.0, 0.0); z.len()];
    let ones = vec![1.0; t.rows()];
    let col_norms = t.weighted_column_norms(&ones);
    let inv_diag: Vec<f64> = col_norms.iter().map(|c| 1.0 / (w * rho_f + rho * c)).collect();
    let mut primal_residuals = Vec::with_capacity(config.iters);

    for _ in 0..config.iters {
        // image update: (w F*F + rho Tt T) f = w F* d + rho (T Theta*)* (z - u)
        let target: Vec<C64> = z.iter().zip(&u).map(|(a, b)| a - b).collect();
        let rhs: Vec<C64> = rhs_data.iter().zip(transform_adj(&target)).map(|(a, b)| a + b * rho).collect();
        let normal = |v: &[C64]| -> Vec<C64> {
            let prior = transform_adj(&transform(v));
            let data_term = match config.gram {
                GramMode::Exact => op.apply_gram(v),
                GramMode::Surrogate => v.iter().map(|x| x * rho_f).collect(),
            };
            data_term.into_iter().zip(prior).map(|(g, p)| g * w + p * rho).collect()
        };
        f = match (config.gram, t.kind()) {
            // (w rho_F + rho) I is diagonal
            (GramMode::Surrogate, RegularizerKind::Identity) => rhs.iter().map(|r| r / (w * rho_f + rho)).collect(),
            _ => cg::solve(normal, &rhs, f, &inv_diag, config.cg_tol, config.cg_max_iters).solution,
        };
        let tf = transform(&f);
        for ((zi, ui), ti) in z.iter_mut().zip(&u).zip(&tf) {
            *zi = soft_threshold(ti + ui, tau);
        }
        let mut residual = 0.0;
        for ((ui, ti), zi) in u.iter_mut().zip(&tf).zip(&z) {
            let r = ti - zi;
            *ui += r;
            residual += r.norm_sqr();
        }
        primal_residuals.push(residual.sqrt());
    }
    if f.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite("l1 reconstruction"));
    }
    Ok(AdmmResult {
        image: ComplexImage::new(grid, f)?,
        primal_residuals,
    })
}

/// l1 reconstruction of one window initialised from the NUFFT estimate.
pub fn l1_admm(data: &[C64], op: &NufftOperator, t: &SparsifyingOperator, config: &AdmmConfig) -> Result<AdmmResult> {
    let init = op.ml_estimate(data)?;
    l1_admm_with(data, op, *op.grid(), t, init.values(), config)
}

/// NUFFT estimate of every window.
pub fn nufft_all(ph: &PhaseHistory, plan: &AperturePlan, grid: SceneGrid, workers: usize) -> Result<Vec<ComplexImage>> {
    map_windows(plan, workers, |w| {
        let (op, data) = window_problem(ph, w, grid, NufftParams::default())?;
        nufft_baseline(&data, &op)
    })
}

/// l1 reconstruction of every window.
pub fn l1_all(
    ph: &PhaseHistory,
    plan: &AperturePlan,
    grid: SceneGrid,
    regularizer: RegularizerKind,
    config: &AdmmConfig,
    workers: usize,
) -> Result<Vec<ComplexImage>> {
    config.validate()?;
    let t = SparsifyingOperator::for_grid(regularizer, &grid);
    map_windows(plan, workers, |w| {
        let (op, data) = window_problem(ph, w, grid, NufftParams::default())?;
        Ok(l1_admm(&data, &op, &t, config)?.image)
    })
}
