//! Per-window Bayesian coordinate descent.
//!
//! Each window alternates closed-form updates of the speckle precisions
//! `alpha`, the noise precision `beta`, the conditional posterior mean `mu`
//! and the phase matrix `Theta`, until the relative change of `mu` drops below
//! the tolerance. The conditional posterior of the image is complex Gaussian
//! with precision `beta F*F + (T Theta*)* diag(alpha) (T Theta*)`.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cg;
use crate::error::{Error, Result};
use crate::geometry::{freq_coords, AperturePlan, ComplexImage, PhaseHistory, SceneGrid, Window};
use crate::nufft::{NufftOperator, NufftParams};
use crate::operator::{check_len, norm, norm_sqr, LinearOperator};
use crate::regularizers::{PhaseMatrix, RegularizerKind, SparsifyingOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPath {
    /// `F*F` replaced by `rho I`; the mean update is an elementwise division.
    /// Requires `T = I`.
    DiagonalFast,
    /// Conjugate gradients on the precision operator.
    GeneralSparse,
}

/// How the normal operator `F*F` enters a linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GramMode {
    /// `rho I` with `rho` calibrated from the operator.
    Surrogate,
    /// `F*F` applied through the operator.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative-change tolerance.
    pub eps: f64,
    pub max_iters: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub path: SolverPath,
    /// Normal-operator handling on the general path.
    pub gram: GramMode,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub alpha_max: f64,
    pub beta_max: f64,
    /// Hutchinson probes for the covariance diagonal on the general path.
    pub covariance_probes: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps: 0.01,
            max_iters: 100,
            a: f64::EPSILON,
            b: f64::EPSILON,
            c: f64::EPSILON,
            d: f64::EPSILON,
            path: SolverPath::DiagonalFast,
            gram: GramMode::Surrogate,
            cg_tol: 1e-8,
            cg_max_iters: 500,
            alpha_max: 1e30,
            beta_max: 1e30,
            covariance_probes: 64,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Defaults with the path chosen to suit the regularizer.
    pub fn for_regularizer(kind: RegularizerKind) -> Self {
        Self {
            path: match kind {
                RegularizerKind::Identity => SolverPath::DiagonalFast,
                RegularizerKind::Tv => SolverPath::GeneralSparse,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be positive, got {}", self.eps)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        for (field, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and nonnegative, got {v}")));
            }
        }
        for (field, v) in [("alpha_max", self.alpha_max), ("beta_max", self.beta_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and positive, got {v}")));
            }
        }
        if !(self.cg_tol.is_finite() && self.cg_tol > 0.0) {
            return Err(Error::invalid("cg_tol", format!("must be positive, got {}", self.cg_tol)));
        }
        if self.cg_max_iters == 0 {
            return Err(Error::invalid("cg_max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// `alpha_q = (1 + 2a) / (|T Theta* mu|_q^2 + 2b)`, clipped at `alpha_max`.
pub fn update_alpha(mu: &[C64], theta: &PhaseMatrix, t: &SparsifyingOperator, a: f64, b: f64, alpha_max: f64) -> Vec<f64> {
    let coeffs = t.apply(&theta.apply_adjoint(mu));
    coeffs
        .iter()
        .map(|c| {
            let denom = c.norm_sqr() + 2.0 * b;
            let v = (1.0 + 2.0 * a) / denom;
            if v.is_finite() {
                v.min(alpha_max)
            } else {
                alpha_max
            }
        })
        .collect()
}

/// `beta = (M + 2c) / (||data - F mu||^2 + 2d)`, clipped at `beta_max`.
pub fn update_beta(data: &[C64], predicted: &[C64], c: f64, d: f64, beta_max: f64) -> f64 {
    let m = data.len() as f64;
    let residual: f64 = data.iter().zip(predicted).map(|(y, p)| (y - p).norm_sqr()).sum();
    let v = (m + 2.0 * c) / (residual + 2.0 * d);
    if v.is_finite() {
        v.min(beta_max)
    } else {
        beta_max
    }
}

/// The conditional precision `beta G + (T Theta*)* diag(alpha) (T Theta*)`,
/// with `G = rho I` or `G = F*F`.
pub struct PrecisionOperator<'a> {
    pub forward: &'a dyn LinearOperator,
    pub t: &'a SparsifyingOperator,
    pub theta: &'a PhaseMatrix,
    pub alpha: &'a [f64],
    pub beta: f64,
    pub rho: f64,
    pub gram: GramMode,
}

impl PrecisionOperator<'_> {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let coeffs = self.t.apply(&self.theta.apply_adjoint(v));
        let weighted: Vec<C64> = coeffs.iter().zip(self.alpha).map(|(c, a)| c * a).collect();
        let prior = self.theta.apply(&self.t.apply_adjoint(&weighted));
        match self.gram {
            GramMode::Surrogate => v.iter().zip(prior).map(|(x, p)| x * (self.beta * self.rho) + p).collect(),
            GramMode::Exact => self
                .forward
                .apply_gram(v)
                .into_iter()
                .zip(prior)
                .map(|(g, p)| g * self.beta + p)
                .collect(),
        }
    }

    /// Diagonal entries (exact for the surrogate; `rho` stands in for the
    /// diagonal of `F*F` otherwise).
    pub fn diagonal(&self) -> Vec<f64> {
        self.t
            .weighted_column_norms(self.alpha)
            .into_iter()
            .map(|w| self.beta * self.rho + w)
            .collect()
    }
}

/// Representation of the window precision `Sigma^-1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Precision {
    /// `beta rho + alpha_j` per pixel.
    Diagonal(Vec<f64>),
    /// Implicit operator, reconstructible from the posterior's
    /// `alpha`, `beta`, `theta`, regularizer and `rho`.
    Operator { gram: GramMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub relative_change: f64,
    pub beta: f64,
    pub mean_alpha: f64,
    pub mean_abs_mu: f64,
    /// CG iterations spent on the mean update (0 on the diagonal path).
    pub cg_iterations: usize,
    pub cg_converged: bool,
}

/// Gaussian approximation of one window's posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct SubAperturePosterior {
    pub window: usize,
    pub mean: ComplexImage,
    /// Speckle precisions: one per pixel for `T = I`, one per transform
    /// coefficient otherwise.
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub theta: PhaseMatrix,
    pub regularizer: RegularizerKind,
    pub rho: f64,
    pub precision: Precision,
    /// Diagonal of `Sigma`; exact on the diagonal path, Hutchinson-estimated
    /// on the general path.
    pub covariance_diagonal: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set for all-zero data.
    pub degenerate: bool,
    pub trace: Vec<IterationRecord>,
}

/// Stepwise coordinate descent for one window.
pub struct WindowSolver<'a> {
    data: &'a [C64],
    op: &'a dyn LinearOperator,
    t: &'a SparsifyingOperator,
    config: SolverConfig,
    rhs_image: Vec<C64>,
    rho: f64,
    mu: Vec<C64>,
    theta: PhaseMatrix,
    alpha: Vec<f64>,
    beta: f64,
    trace: Vec<IterationRecord>,
    converged: bool,
}

impl<'a> WindowSolver<'a> {
    pub fn new(data: &'a [C64], op: &'a dyn LinearOperator, t: &'a SparsifyingOperator, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        check_len("window data", op.output_len(), data.len())?;
        check_len("sparsifying operator columns", op.input_len(), t.cols())?;
        if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("window data"));
        }
        if config.path == SolverPath::DiagonalFast && t.kind() != RegularizerKind::Identity {
            return Err(Error::invalid("path", "the diagonal path requires the identity regularizer"));
        }
        let rho = op.gram_scale();
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid("forward operator", format!("normal-operator scale must be positive, got {rho}")));
        }
        let rhs_image = op.apply_adjoint(data);
        let mu: Vec<C64> = rhs_image.iter().map(|v| v / rho).collect();
        let theta = PhaseMatrix::from_values(&mu);
        Ok(Self {
            data,
            op,
            t,
            config,
            rhs_image,
            rho,
            mu,
            theta,
            alpha: vec![0.0; t.rows()],
            beta: 0.0,
            trace: Vec::new(),
            converged: false,
        })
    }

    pub fn mean(&self) -> &[C64] {
        &self.mu
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Phase used by the next step.
    pub fn theta(&self) -> &PhaseMatrix {
        &self.theta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn trace(&self) -> &[IterationRecord] {
        &self.trace
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    /// One alpha, beta, mu, Theta sweep.
    pub fn step(&mut self) -> IterationRecord {
        let cfg = &self.config;
        let alpha = update_alpha(&self.mu, &self.theta, self.t, cfg.a, cfg.b, cfg.alpha_max);
        let beta = update_beta(self.data, &self.op.apply(&self.mu), cfg.c, cfg.d, cfg.beta_max);
        let (next, cg_iterations, cg_converged) = match cfg.path {
            SolverPath::DiagonalFast => {
                let next = self
                    .rhs_image
                    .iter()
                    .zip(&alpha)
                    .map(|(g, a)| g * beta / (beta * self.rho + a))
                    .collect();
                (next, 0, true)
            }
            SolverPath::GeneralSparse => {
                let prec = PrecisionOperator {
                    forward: self.op,
                    t: self.t,
                    theta: &self.theta,
                    alpha: &alpha,
                    beta,
                    rho: self.rho,
                    gram: cfg.gram,
                };
                let inv_diag: Vec<f64> = prec.diagonal().iter().map(|d| 1.0 / d).collect();
                let rhs: Vec<C64> = self.rhs_image.iter().map(|g| g * beta).collect();
                let out = cg::solve(|v| prec.apply(v), &rhs, self.mu.clone(), &inv_diag, cfg.cg_tol, cfg.cg_max_iters);
                (out.solution, out.iterations, out.converged)
            }
        };
        let prev_norm = norm(&self.mu);
        let relative_change = if prev_norm == 0.0 {
            0.0
        } else {
            let diff: f64 = next.iter().zip(&self.mu).map(|(a, b)| (a - b).norm_sqr()).sum();
            diff.sqrt() / prev_norm
        };
        self.theta = PhaseMatrix::from_values(&next);
        self.mu = next;
        self.alpha = alpha;
        self.beta = beta;
        let record = IterationRecord {
            relative_change,
            beta,
            mean_alpha: self.alpha.iter().sum::<f64>() / self.alpha.len().max(1) as f64,
            mean_abs_mu: self.mu.iter().map(|v| v.norm()).sum::<f64>() / self.mu.len().max(1) as f64,
            cg_iterations,
            cg_converged,
        };
        self.trace.push(record);
        if relative_change <= cfg.eps {
            self.converged = true;
        }
        record
    }

    /// Iterate to convergence (or the iteration cap) and assemble the posterior.
    pub fn run(mut self, grid: SceneGrid, window: usize) -> Result<SubAperturePosterior> {
        while !self.converged && self.trace.len() < self.config.max_iters {
            self.step();
        }
        self.finish(grid, window)
    }

    pub fn finish(self, grid: SceneGrid, window: usize) -> Result<SubAperturePosterior> {
        check_len("image grid", grid.len(), self.mu.len())?;
        if self.trace.is_empty() {
            return Err(Error::invalid("iterations", "finish requires at least one step"));
        }
        if self.mu.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("posterior mean"));
        }
        let (precision, covariance_diagonal) = match self.config.path {
            SolverPath::DiagonalFast => {
                let p: Vec<f64> = self.alpha.iter().map(|a| self.beta * self.rho + a).collect();
                let cov = p.iter().map(|v| 1.0 / v).collect();
                (Precision::Diagonal(p), cov)
            }
            SolverPath::GeneralSparse => {
                let prec = PrecisionOperator {
                    forward: self.op,
                    t: self.t,
                    theta: &self.theta,
                    alpha: &self.alpha,
                    beta: self.beta,
                    rho: self.rho,
                    gram: self.config.gram,
                };
                let cov = hutchinson_diagonal(&prec, &self.config, window);
                (Precision::Operator { gram: self.config.gram }, cov)
            }
        };
        Ok(SubAperturePosterior {
            window,
            mean: ComplexImage::new(grid, self.mu)?,
            alpha: self.alpha,
            beta: self.beta,
            theta: self.theta,
            regularizer: self.t.kind(),
            rho: self.rho,
            precision,
            covariance_diagonal,
            iterations: self.trace.len(),
            converged: self.converged,
            degenerate: norm_sqr(self.data) == 0.0,
            trace: self.trace,
        })
    }
}

/// Stochastic estimate of `diag(A^-1)` from Rademacher probes, floored at
/// `1 / A_jj` (a lower bound for Hermitian positive-definite `A`).
pub fn hutchinson_diagonal(prec: &PrecisionOperator<'_>, config: &SolverConfig, window: usize) -> Vec<f64> {
    let diag = prec.diagonal();
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let n = diag.len();
    if config.covariance_probes == 0 {
        return inv_diag;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (window as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut acc = vec![0.0; n];
    for _ in 0..config.covariance_probes {
        let probe: Vec<C64> = (0..n).map(|_| C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0)).collect();
        let out = cg::solve(|v| prec.apply(v), &probe, vec![C64::new(0.0, 0.0); n], &inv_diag, config.cg_tol, config.cg_max_iters);
        for ((a, p), x) in acc.iter_mut().zip(&probe).zip(&out.solution) {
            *a += p.re * x.re;
        }
    }
    let k = config.covariance_probes as f64;
    acc.iter().zip(&inv_diag).map(|(a, floor)| (a / k).max(*floor)).collect()
}

/// Coordinate descent on one window.
pub fn run_window(data: &[C64], op: &NufftOperator, t: &SparsifyingOperator, config: &SolverConfig) -> Result<SubAperturePosterior> {
    run_window_with(data, op, *op.grid(), t, config, 0)
}

/// [`run_window`] for any forward model.
pub fn run_window_with(
    data: &[C64],
    op: &dyn LinearOperator,
    grid: SceneGrid,
    t: &SparsifyingOperator,
    config: &SolverConfig,
    window: usize,
) -> Result<SubAperturePosterior> {
    WindowSolver::new(data, op, t, config.clone())?.run(grid, window)
}

/// Forward operator and data vector of one window.
pub fn window_problem(ph: &PhaseHistory, window: &Window, grid: SceneGrid, params: NufftParams) -> Result<(NufftOperator, Vec<C64>)> {
    let coords = freq_coords(window, ph)?;
    let op = NufftOperator::with_params(grid, coords, params)?;
    let data = ph.window_data(window)?;
    Ok((op, data))
}

/// Apply `f` to every window, possibly concurrently, returning results in
/// window order. `workers == 0` uses the global pool.
pub fn map_windows<T, F>(plan: &AperturePlan, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Window) -> Result<T> + Sync,
{
    let run = || -> Vec<Result<T>> {
        plan.windows
            .par_iter()
            .map(|w| f(w).map_err(|e| Error::Window { index: w.index, source: Box::new(e) }))
            .collect()
    };
    let results = if workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(run)
    };
    results.into_iter().collect()
}

/// Coordinate descent on every window of `plan`.
pub fn run_all(
    ph: &PhaseHistory,
    plan: &AperturePlan,
    grid: SceneGrid,
    regularizer: RegularizerKind,
    config: &SolverConfig,
    workers: usize,
) -> Result<Vec<SubAperturePosterior>> {
    config.validate()?;
    let t = SparsifyingOperator::for_grid(regularizer, &grid);
    map_windows(plan, workers, |w| {
        let (op, data) = window_problem(ph, w, grid, NufftParams::default())?;
        run_window_with(&data, &op, grid, &t, config, w.index)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FreqCoords;
    use crate::operator::{DenseOperator, Identity};

    #[test]
    fn alpha_update_examples() {
        let t = SparsifyingOperator::identity(3);
        let theta = PhaseMatrix::identity(3);
        let mu = [C64::new(1.0, 0.0), C64::new(0.0, 3f64.sqrt()), C64::new(0.0, 0.0)];
        let alpha = update_alpha(&mu, &theta, &t, 0.0, 0.0, 1e30);
        assert_eq!(alpha[0], 1.0);
        assert!((alpha[1] - 1.0 / 3.0).abs() < 1e-15);
        // 1/0 is clipped at the cap
        assert_eq!(alpha[2], 1e30);
        // with b at machine epsilon the zero pixel stays finite below the cap
        let alpha = update_alpha(&mu, &theta, &t, 0.0, f64::EPSILON, 1e30);
        assert_eq!(alpha[2], 1.0 / (2.0 * f64::EPSILON));
    }

    #[test]
    fn beta_update_examples() {
        let data = vec![C64::new(0.0, 0.0); 100];
        let mut predicted = data.clone();
        predicted[0] = C64::new(2.0, 0.0);
        assert_eq!(update_beta(&data, &predicted, 0.0, 0.0, 1e30), 25.0);
        assert_eq!(update_beta(&data, &data, 0.0, 0.0, 1e30), 1e30);
        assert_eq!(update_beta(&data, &data, 0.0, f64::EPSILON, 1e10), 1e10);
    }

    #[test]
    fn diagonal_update_on_unitary_operator() {
        // F = I (rho = 1), alpha_j = beta: mu = F*data / 2
        let data = vec![C64::new(2.0, -4.0), C64::new(1.0, 1.0)];
        let op = Identity(2);
        let t = SparsifyingOperator::identity(2);
        let rhs = op.apply_adjoint(&data);
        let beta = 3.0;
        let alpha = [beta, beta];
        for (g, a) in rhs.iter().zip(alpha) {
            let mu = g * beta / (beta * op.gram_scale() + a);
            assert!((mu - g / 2.0).norm() < 1e-15);
        }
        assert_eq!(t.rows(), 2);
    }

    #[test]
    fn zero_data_converges_in_one_step() {
        let grid = SceneGrid::square(8, 1.0).unwrap();
        let coords = FreqCoords::uniform(&grid, 1);
        let op = NufftOperator::new(grid, coords).unwrap();
        let t = SparsifyingOperator::identity(grid.len());
        let post = run_window(&vec![C64::new(0.0, 0.0); grid.len()], &op, &t, &SolverConfig::default()).unwrap();
        assert_eq!(post.iterations, 1);
        assert!(post.converged && post.degenerate);
        assert!(post.mean.values().iter().all(|v| v.norm() == 0.0));
        assert!(post.alpha.iter().all(|a| *a > 0.0) && post.beta > 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let op = Identity(3);
        let t = SparsifyingOperator::identity(3);
        let grid = SceneGrid::new(3, 1, 1.0).unwrap();
        let cfg = SolverConfig::default();
        let nan = [C64::new(f64::NAN, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        assert!(matches!(run_window_with(&nan, &op, grid, &t, &cfg, 0), Err(Error::NonFinite(_))));
        assert!(matches!(run_window_with(&nan[..2], &op, grid, &t, &cfg, 0), Err(Error::Dimension { .. })));
        let tv = crate::regularizers::tv2d(&grid);
        let ok = [C64::new(1.0, 0.0); 3];
        assert!(matches!(run_window_with(&ok, &op, grid, &tv, &cfg, 0), Err(Error::Invalid { field: "path", .. })));
        let bad = SolverConfig { eps: 0.0, ..cfg };
        assert!(run_window_with(&ok, &op, grid, &t, &bad, 0).is_err());
    }

    #[test]
    fn general_path_with_identity_matches_diagonal_path() {
        let grid = SceneGrid::new(4, 4, 1.0).unwrap();
        let data: Vec<C64> = (0..16).map(|j| C64::from_polar(1.0 + (j % 5) as f64, j as f64)).collect();
        let op = Identity(16);
        let t = SparsifyingOperator::identity(16);
        let fast = run_window_with(&data, &op, grid, &t, &SolverConfig::default(), 0).unwrap();
        let general = SolverConfig {
            path: SolverPath::GeneralSparse,
            cg_tol: 1e-14,
            ..SolverConfig::default()
        };
        let slow = run_window_with(&data, &op, grid, &t, &general, 0).unwrap();
        assert_eq!(fast.iterations, slow.iterations);
        for (a, b) in fast.mean.values().iter().zip(slow.mean.values()) {
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-12));
        }
    }

    #[test]
    fn hutchinson_floor_and_dense_agreement() {
        let grid = SceneGrid::new(3, 3, 1.0).unwrap();
        let n = grid.len();
        let t = crate::regularizers::tv2d(&grid);
        let theta = PhaseMatrix::identity(n);
        let alpha: Vec<f64> = (0..t.rows()).map(|q| 0.1 + (q % 4) as f64 * 0.05).collect();
        let eye = DenseOperator::new(n, n, (0..n * n).map(|i| C64::new(if i / n == i % n { 1.0 } else { 0.0 }, 0.0)).collect()).unwrap();
        let prec = PrecisionOperator {
            forward: &eye,
            t: &t,
            theta: &theta,
            alpha: &alpha,
            beta: 2.0,
            rho: 1.0,
            gram: GramMode::Surrogate,
        };
        let cfg = SolverConfig {
            covariance_probes: 2000,
            cg_tol: 1e-12,
            ..SolverConfig::default()
        };
        let est = hutchinson_diagonal(&prec, &cfg, 0);
        // exact diagonal by unit probes
        for j in 0..n {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            let x = cg::solve(|v| prec.apply(v), &e, vec![C64::new(0.0, 0.0); n], &[1.0; 9], 1e-14, 200).solution;
            assert!((est[j] - x[j].re).abs() < 0.05 * x[j].re);
            assert!(est[j] >= 1.0 / prec.diagonal()[j]);
        }
    }
}
