//! Dense m×m helpers for the per-node algebra (row-major slices).

use std::sync::Arc;

use nalgebra::DMatrix;

use super::fields::{MatField, ScalarField};
use super::grid::Grid;

pub(crate) fn mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for l in 0..m {
            let ail = a[i * m + l];
            for j in 0..m {
                out[i * m + j] += ail * b[l * m + j];
            }
        }
    }
    out
}

/// `aᵀ b`.
pub(crate) fn mul_tn(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for l in 0..m {
        for i in 0..m {
            let ali = a[l * m + i];
            for j in 0..m {
                out[i * m + j] += ali * b[l * m + j];
            }
        }
    }
    out
}

/// `a bᵀ`.
pub(crate) fn mul_nt(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = (0..m).map(|l| a[i * m + l] * b[j * m + l]).sum();
        }
    }
    out
}

/// `(a - aᵀ) / 2`.
pub(crate) fn antisym(a: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = 0.5 * (a[i * m + j] - a[j * m + i]);
        }
    }
    out
}

pub(crate) fn frob2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub(crate) fn identity(m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        out[i * m + i] = 1.0;
    }
    out
}

/// Matrix exponential by scaling and squaring of the Taylor series.
pub(crate) fn expm(x: &[f64], m: usize) -> Vec<f64> {
    let norm = frob2(x).sqrt();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(squarings);
    let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
    let mut sum = identity(m);
    let mut term = identity(m);
    for k in 1..30 {
        term = mul(&term, &xs, m);
        term.iter_mut().for_each(|v| *v /= k as f64);
        sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
        if frob2(&term).sqrt() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum, m);
    }
    sum
}

pub(crate) fn to_dmatrix(a: &[f64], m: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(m, m, a)
}

/// Orthogonal polar factor by the Newton iteration `X ← (X + X⁻ᵀ) / 2`.
pub(crate) fn polar_rotation(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut x = to_dmatrix(a, m);
    for _ in 0..100 {
        let inv_t = x.clone().try_inverse()?.transpose();
        let next = (&x + inv_t) * 0.5;
        let delta = (&next - &x).norm();
        x = next;
        if delta < 1e-15 * x.norm() {
            break;
        }
    }
    Some(x.transpose().as_slice().to_vec())
}

/// Per-node m×m matrices packed node-major, for the inner loops of the
/// gauge and fixed-point solvers.
#[derive(Clone, Debug)]
pub(crate) struct NodeMats {
    pub m: usize,
    pub data: Vec<f64>,
}

impl NodeMats {
    pub fn zeros(len: usize, m: usize) -> Self {
        NodeMats { m, data: vec![0.0; len * m * m] }
    }

    pub fn identity(grid: &Grid, m: usize) -> Self {
        let mut out = Self::zeros(grid.len(), m);
        for k in 0..grid.len() {
            for i in 0..m {
                out.data[k * m * m + i * m + i] = 1.0;
            }
        }
        out
    }

    pub fn from_field(f: &MatField) -> Self {
        let m = f.m();
        let len = f.grid().len();
        let mut out = Self::zeros(len, m);
        for (e, entry) in f.entries().iter().enumerate() {
            for (k, v) in entry.values().iter().enumerate() {
                out.data[k * m * m + e] = *v;
            }
        }
        out
    }

    pub fn get(&self, k: usize) -> &[f64] {
        let mm = self.m * self.m;
        &self.data[k * mm..(k + 1) * mm]
    }

    pub fn set(&mut self, k: usize, v: &[f64]) {
        let mm = self.m * self.m;
        self.data[k * mm..(k + 1) * mm].copy_from_slice(v);
    }

    /// Entry `(i, j)` as a scalar field.
    pub fn entry(&self, grid: &Arc<Grid>, i: usize, j: usize) -> ScalarField {
        let (m, len) = (self.m, grid.len());
        let values = (0..len).map(|k| self.data[k * m * m + i * m + j]).collect();
        ScalarField::new(grid, values).expect("packed field matches its grid")
    }

    pub fn entries(&self, grid: &Arc<Grid>) -> Vec<ScalarField> {
        let m = self.m;
        (0..m * m).map(|e| self.entry(grid, e / m, e % m)).collect()
    }

    /// Writes `f` into entry `(i, j)`.
    pub fn set_entry(&mut self, i: usize, j: usize, f: &ScalarField) {
        let m = self.m;
        for (k, v) in f.values().iter().enumerate() {
            self.data[k * m * m + i * m + j] = *v;
        }
    }
}
