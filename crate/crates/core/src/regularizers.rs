//! Sparsifying transforms, the diagonal phase matrix, and the
//! common-kernel check.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ComplexImage, SceneGrid};
use crate::operator::{check_len, DenseOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizerKind {
    Identity,
    Tv,
}

impl std::fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegularizerKind::Identity => "identity",
            RegularizerKind::Tv => "tv",
        })
    }
}

impl std::str::FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "tv" => Ok(Self::Tv),
            other => Err(Error::invalid("regularizer", format!("unknown kind `{other}` (expected identity or tv)"))),
        }
    }
}

/// Real `Q x N` sparsifying transform `T`.
///
/// The TV variant stacks horizontal then vertical first differences
/// (`Q = 2N`); border pixels are differenced with themselves, so those rows
/// are identically zero and constants lie in the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsifyingOperator {
    Identity { n: usize },
    Tv { grid: SceneGrid },
}

impl SparsifyingOperator {
    pub fn identity(n: usize) -> Self {
        Self::Identity { n }
    }

    pub fn for_grid(kind: RegularizerKind, grid: &SceneGrid) -> Self {
        match kind {
            RegularizerKind::Identity => Self::identity(grid.len()),
            RegularizerKind::Tv => tv2d(grid),
        }
    }

    pub fn kind(&self) -> RegularizerKind {
        match self {
            Self::Identity { .. } => RegularizerKind::Identity,
            Self::Tv { .. } => RegularizerKind::Tv,
        }
    }

    /// Number of columns `N`.
    pub fn cols(&self) -> usize {
        match self {
            Self::Identity { n } => *n,
            Self::Tv { grid } => grid.len(),
        }
    }

    /// Number of rows `Q`.
    pub fn rows(&self) -> usize {
        match self {
            Self::Identity { n } => *n,
            Self::Tv { grid } => 2 * grid.len(),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        match self {
            Self::Identity { .. } => v.to_vec(),
            Self::Tv { grid } => {
                let (nx, ny, n) = (grid.nx, grid.ny, grid.len());
                let mut out = vec![C64::new(0.0, 0.0); 2 * n];
                for iy in 0..ny {
                    for ix in 0..nx {
                        let j = iy * nx + ix;
                        if ix + 1 < nx {
                            out[j] = v[j + 1] - v[j];
                        }
                        if iy + 1 < ny {
                            out[n + j] = v[j + nx] - v[j];
                        }
                    }
                }
                out
            }
        }
    }

    pub fn apply_adjoint(&self, w: &[C64]) -> Vec<C64> {
        match self {
            Self::Identity { .. } => w.to_vec(),
            Self::Tv { grid } => {
                let (nx, ny, n) = (grid.nx, grid.ny, grid.len());
                let mut out = vec![C64::new(0.0, 0.0); n];
                for iy in 0..ny {
                    for ix in 0..nx {
                        let j = iy * nx + ix;
                        let mut acc = C64::new(0.0, 0.0);
                        if ix + 1 < nx {
                            acc -= w[j];
                        }
                        if ix >= 1 {
                            acc += w[j - 1];
                        }
                        if iy + 1 < ny {
                            acc -= w[n + j];
                        }
                        if iy >= 1 {
                            acc += w[n + j - nx];
                        }
                        out[j] = acc;
                    }
                }
                out
            }
        }
    }

    /// `sum_q weights_q T_qj^2` per column: the diagonal of `T^T diag(weights) T`.
    pub fn weighted_column_norms(&self, weights: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity { .. } => weights.to_vec(),
            Self::Tv { grid } => {
                let (nx, ny, n) = (grid.nx, grid.ny, grid.len());
                let mut out = vec![0.0; n];
                for iy in 0..ny {
                    for ix in 0..nx {
                        let j = iy * nx + ix;
                        let mut acc = 0.0;
                        if ix + 1 < nx {
                            acc += weights[j];
                        }
                        if ix >= 1 {
                            acc += weights[j - 1];
                        }
                        if iy + 1 < ny {
                            acc += weights[n + j];
                        }
                        if iy >= 1 {
                            acc += weights[n + j - nx];
                        }
                        out[j] = acc;
                    }
                }
                out
            }
        }
    }

    /// Dense real matrix, row-major `Q x N`.
    pub fn to_dense(&self) -> Vec<f64> {
        let (q, n) = (self.rows(), self.cols());
        let mut out = vec![0.0; q * n];
        for j in 0..n {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            for (r, v) in self.apply(&e).iter().enumerate() {
                out[r * n + j] = v.re;
            }
        }
        out
    }
}

/// Two-dimensional anisotropic TV operator on `grid`.
pub fn tv2d(grid: &SceneGrid) -> SparsifyingOperator {
    SparsifyingOperator::Tv { grid: *grid }
}

/// Unitary diagonal matrix `Theta` of pixel phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    diag: Vec<C64>,
}

impl PhaseMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            diag: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// `Theta_jj = f_j / |f_j|`, with `1` where `f_j = 0`.
    pub fn from_values(values: &[C64]) -> Self {
        Self {
            diag: values
                .iter()
                .map(|v| {
                    let r = v.norm();
                    if r > 0.0 && r.is_finite() {
                        v / r
                    } else {
                        C64::new(1.0, 0.0)
                    }
                })
                .collect(),
        }
    }

    pub fn diag(&self) -> &[C64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `Theta v`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.diag.iter().zip(v).map(|(t, x)| t * x).collect()
    }

    /// `Theta* v`.
    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.diag.iter().zip(v).map(|(t, x)| t.conj() * x).collect()
    }
}

pub fn phase_from(img: &ComplexImage) -> PhaseMatrix {
    PhaseMatrix::from_values(img.values())
}

/// Largest `N` accepted by [`check_common_kernel`].
pub const COMMON_KERNEL_LIMIT: usize = 4096;

/// Whether `ker(F)` and `ker(T Theta*)` intersect only at zero, decided by the
/// numerical rank of the stacked matrix `[F; T Theta*]` (singular values
/// below `1e-10 sigma_max` count as zero).
pub fn check_common_kernel(forward: &DenseOperator, t: &SparsifyingOperator, theta: &PhaseMatrix) -> Result<bool> {
    let n = forward.cols();
    if n > COMMON_KERNEL_LIMIT {
        return Err(Error::SizeGuard {
            what: "common-kernel check (N)",
            size: n,
            limit: COMMON_KERNEL_LIMIT,
        });
    }
    check_len("sparsifying operator columns", n, t.cols())?;
    check_len("phase matrix", n, theta.len())?;
    let (m, q) = (forward.rows(), t.rows());
    let dense_t = t.to_dense();
    let stacked = DMatrix::from_fn(m + q, n, |r, c| {
        if r < m {
            forward.entry(r, c)
        } else {
            theta.diag()[c].conj() * dense_t[(r - m) * n + c]
        }
    });
    let sv = stacked.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(false);
    }
    let rank = sv.iter().filter(|s| **s > 1e-10 * max).count();
    Ok(rank == n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FreqCoords;
    use crate::nufft::direct_dft_matrix;
    use crate::operator::dot;
    use proptest::prelude::*;

    fn grid(nx: usize, ny: usize) -> SceneGrid {
        SceneGrid::new(nx, ny, 1.0).unwrap()
    }

    #[test]
    fn tv_of_constant_is_zero() {
        let g = grid(5, 7);
        let t = tv2d(&g);
        let out = t.apply(&vec![C64::new(2.5, -1.0); g.len()]);
        assert_eq!(out.len(), 2 * g.len());
        assert!(out.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn tv_of_interior_impulse() {
        // Hand enumeration on 4x4, impulse at (1, 2): horizontal rows j-1 (+1) and j (-1),
        // vertical rows j-nx (+1) and j (-1).
        let g = grid(4, 4);
        let j = g.index(1, 2);
        let mut v = vec![C64::new(0.0, 0.0); 16];
        v[j] = C64::new(1.0, 0.0);
        let out = tv2d(&g).apply(&v);
        let nz: Vec<(usize, f64)> = out.iter().enumerate().filter(|(_, x)| x.norm() > 0.0).map(|(i, x)| (i, x.re)).collect();
        assert_eq!(nz, vec![(j - 1, 1.0), (j, -1.0), (16 + j - 4, 1.0), (16 + j, -1.0)]);
    }

    #[test]
    fn tv_of_ramp() {
        let g = grid(6, 3);
        let v: Vec<C64> = (0..g.len()).map(|j| C64::new((j % 6) as f64 * 0.5, 0.0)).collect();
        let out = tv2d(&g).apply(&v);
        for iy in 0..3 {
            for ix in 0..5 {
                assert_eq!(out[g.index(ix, iy)], C64::new(0.5, 0.0));
            }
            assert_eq!(out[g.index(5, iy)], C64::new(0.0, 0.0));
        }
        assert!(out[g.len()..].iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn column_norms_match_dense() {
        let g = grid(4, 3);
        let t = tv2d(&g);
        let w: Vec<f64> = (0..t.rows()).map(|q| 1.0 + q as f64 * 0.1).collect();
        let dense = t.to_dense();
        let fast = t.weighted_column_norms(&w);
        for (j, f) in fast.iter().enumerate() {
            let slow: f64 = (0..t.rows()).map(|q| w[q] * dense[q * g.len() + j].powi(2)).sum();
            assert!((f - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_conventions() {
        let p = PhaseMatrix::from_values(&[C64::new(0.0, 3.0), C64::new(0.0, 0.0)]);
        assert!((p.diag()[0] - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(p.diag()[1], C64::new(1.0, 0.0));
        let real = p.apply_adjoint(&[C64::new(0.0, 3.0), C64::new(0.0, 0.0)]);
        assert!((real[0] - C64::new(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn common_kernel_cases() {
        let g = grid(8, 8);
        let n = g.len();
        let eye: Vec<C64> = (0..n * n).map(|i| if i / n == i % n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect();
        let f_eye = DenseOperator::new(n, n, eye).unwrap();
        let theta = PhaseMatrix::identity(n);
        assert!(check_common_kernel(&f_eye, &tv2d(&g), &theta).unwrap());
        assert!(check_common_kernel(&f_eye, &SparsifyingOperator::identity(n), &theta).unwrap());

        let zero = DenseOperator::new(n, n, vec![C64::new(0.0, 0.0); n * n]).unwrap();
        assert!(!check_common_kernel(&zero, &tv2d(&g), &theta).unwrap());

        let dft = direct_dft_matrix(&g, &FreqCoords::uniform(&g, 1)).unwrap();
        let values: Vec<C64> = (0..n).map(|j| C64::from_polar(1.0 + j as f64, 0.37 * j as f64)).collect();
        assert!(check_common_kernel(&dft, &tv2d(&g), &PhaseMatrix::from_values(&values)).unwrap());
    }

    #[test]
    fn common_kernel_guard() {
        let n = COMMON_KERNEL_LIMIT + 1;
        let f = DenseOperator::new(1, n, vec![C64::new(1.0, 0.0); n]).unwrap();
        let err = check_common_kernel(&f, &SparsifyingOperator::identity(n), &PhaseMatrix::identity(n)).unwrap_err();
        assert!(matches!(err, Error::SizeGuard { .. }));
    }

    fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b)), len)
    }

    proptest! {
        #[test]
        fn tv_adjoint_identity((v, w) in (complex_vec(35), complex_vec(70))) {
            let t = tv2d(&grid(5, 7));
            let lhs = dot(&w, &t.apply(&v));
            let rhs = dot(&t.apply_adjoint(&w), &v);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn phase_makes_values_real(v in complex_vec(64)) {
            let p = PhaseMatrix::from_values(&v);
            let inf = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
            for (t, r) in p.diag().iter().zip(p.apply_adjoint(&v)) {
                prop_assert!((t.norm() - 1.0).abs() < 1e-14);
                prop_assert!(r.im.abs() <= 1e-12 * inf.max(f64::MIN_POSITIVE));
            }
            // idempotent on the recovered phase
            let again = PhaseMatrix::from_values(p.diag());
            for (a, b) in again.diag().iter().zip(p.diag()) {
                prop_assert!((a - b).norm() < 1e-15);
            }
        }
    }
}
