//! Linear forward models `F: C^N -> C^M` shared by the solver, the baselines
//! and the dense test oracles.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub trait LinearOperator: Sync {
    /// Image length `N`.
    fn input_len(&self) -> usize;

    /// Data length `M`.
    fn output_len(&self) -> usize;

    fn apply(&self, x: &[C64]) -> Vec<C64>;

    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64>;

    /// Diagonal value of `F* F` read at a reference pixel; the scale of the
    /// `rho I` surrogate for the normal operator.
    fn gram_scale(&self) -> f64;

    /// `F* F x`.
    fn apply_gram(&self, x: &[C64]) -> Vec<C64> {
        self.apply_adjoint(&self.apply(x))
    }
}

/// Read `(F* F e_j)_j` for the unit impulse at `index`.
pub fn calibrate_gram<O: LinearOperator + ?Sized>(op: &O, index: usize) -> f64 {
    let mut e = vec![C64::new(0.0, 0.0); op.input_len()];
    e[index] = C64::new(1.0, 0.0);
    op.apply_gram(&e)[index].re
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, found })
    }
}

/// `F = I` on `C^n`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn input_len(&self) -> usize {
        self.0
    }

    fn output_len(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        x.to_vec()
    }

    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        y.to_vec()
    }

    fn gram_scale(&self) -> f64 {
        1.0
    }
}

/// Row-major dense `M x N` matrix.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
    gram: f64,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        check_len("dense operator entries", rows * cols, entries.len())?;
        if cols == 0 {
            return Err(Error::invalid("cols", "must be at least 1"));
        }
        let mut op = Self {
            rows,
            cols,
            entries,
            gram: 1.0,
        };
        op.gram = calibrate_gram(&op, cols / 2);
        Ok(op)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.cols + col]
    }
}

impl LinearOperator for DenseOperator {
    fn input_len(&self) -> usize {
        self.cols
    }

    fn output_len(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (row, yi) in self.entries.chunks_exact(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * yi;
            }
        }
        out
    }

    fn gram_scale(&self) -> f64 {
        self.gram
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}
