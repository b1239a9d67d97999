//! Jacobi-preconditioned conjugate gradients for Hermitian positive-definite
//! systems given only as operators.

use num_complex::Complex64 as C64;

use crate::operator::{dot, norm};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
    /// `||b - A x|| / ||b||` at exit.
    pub relative_residual: f64,
}

/// Solve `A x = b` starting from `x0`. Stops once the relative residual is at
/// most `tol` or after `max_iters` iterations; `inv_diag` holds the inverse
/// of the diagonal of `A`.
pub fn solve<A>(apply: A, b: &[C64], x0: Vec<C64>, inv_diag: &[f64], tol: f64, max_iters: usize) -> CgOutcome
where
    A: Fn(&[C64]) -> Vec<C64>,
{
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return CgOutcome {
            solution: vec![C64::new(0.0, 0.0); b.len()],
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        };
    }
    let mut x = x0;
    let ax = apply(&x);
    let mut r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut rel = norm(&r) / b_norm;
    if rel <= tol {
        return CgOutcome {
            solution: x,
            iterations: 0,
            converged: true,
            relative_residual: rel,
        };
    }
    let mut z: Vec<C64> = r.iter().zip(inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    for it in 1..=max_iters {
        let ap = apply(&p);
        let pap = dot(&p, &ap).re;
        if !(pap > 0.0) {
            // Loss of positive definiteness (or exact breakdown).
            return CgOutcome {
                solution: x,
                iterations: it,
                converged: false,
                relative_residual: rel,
            };
        }
        let step = rz / pap;
        for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += pi * step;
            *ri -= api * step;
        }
        rel = norm(&r) / b_norm;
        if rel <= tol {
            return CgOutcome {
                solution: x,
                iterations: it,
                converged: true,
                relative_residual: rel,
            };
        }
        for ((zi, ri), d) in z.iter_mut().zip(&r).zip(inv_diag) {
            *zi = ri * d;
        }
        let rz_next = dot(&r, &z).re;
        let gamma = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + *pi * gamma;
        }
    }
    CgOutcome {
        solution: x,
        iterations: max_iters,
        converged: false,
        relative_residual: rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_hermitian_system() {
        // A = [[4, 1+i], [1-i, 3]]
        let a = [[C64::new(4.0, 0.0), C64::new(1.0, 1.0)], [C64::new(1.0, -1.0), C64::new(3.0, 0.0)]];
        let apply = |x: &[C64]| vec![a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
        let b = [C64::new(1.0, 2.0), C64::new(-1.0, 0.5)];
        let out = solve(apply, &b, vec![C64::new(0.0, 0.0); 2], &[0.25, 1.0 / 3.0], 1e-14, 10);
        assert!(out.converged);
        let check = apply(&out.solution);
        for (c, bi) in check.iter().zip(&b) {
            assert!((c - bi).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_and_iteration_cap() {
        let apply = |x: &[C64]| x.iter().enumerate().map(|(i, v)| v * (1.0 + i as f64)).collect::<Vec<_>>();
        let out = solve(apply, &[C64::new(0.0, 0.0); 3], vec![C64::new(5.0, 0.0); 3], &[1.0; 3], 1e-12, 5);
        assert!(out.converged);
        assert!(out.solution.iter().all(|v| v.norm() == 0.0));
        // unpreconditioned, one iteration cannot solve a 3-eigenvalue system
        let out = solve(apply, &[C64::new(1.0, 0.0); 3], vec![C64::new(0.0, 0.0); 3], &[1.0; 3], 1e-12, 1);
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }
}
