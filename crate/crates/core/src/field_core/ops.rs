//! Finite-difference operators.
//!
//! Gradients are centered differences evaluated on interior nodes, where all
//! four neighbours are active. `div` and `curl` act on vector fields carried by
//! interior nodes: centered where both neighbours are interior, one-sided
//! second order otherwise.
//!
//! `div_adjoint` and `curl_adjoint` are the negative adjoints of `grad` and
//! `perp_grad` for the dual-area inner products. They agree with `div` and
//! `curl` on fully centered nodes and are what the Hodge decomposition and the
//! Neumann problems are built on.

use super::fields::{same_grid, ScalarField, VecField};
use crate::error::Result;

/// Centered difference at node `k`; `stride` is `n` along x and 1 along y.
#[inline]
pub(crate) fn centered(f: &[f64], k: usize, stride: usize, inv2h: f64) -> f64 {
    (f[k + stride] - f[k - stride]) * inv2h
}

pub fn grad(f: &ScalarField) -> VecField {
    let g = f.grid();
    let (inv2h, n) = (0.5 / g.h(), g.n());
    let v = f.values();
    let mut out = VecField::zeros(g);
    for &k in g.interior() {
        out.vx.values_mut()[k] = centered(v, k, n, inv2h);
        out.vy.values_mut()[k] = centered(v, k, 1, inv2h);
    }
    out
}

/// `∇⊥f = (-∂y f, ∂x f)`.
pub fn perp_grad(f: &ScalarField) -> VecField {
    let g = grad(f);
    VecField { vx: g.vy.scale(-1.0), vy: g.vx }
}

/// Derivative along one direction of a field carried by interior nodes.
fn cell_derivative(v: &ScalarField, k: usize, di: isize, dj: isize) -> f64 {
    let g = v.grid();
    let h = g.h();
    let f = v.values();
    let fwd = g.interior_at(k, di, dj);
    let bwd = g.interior_at(k, -di, -dj);
    match (fwd, bwd) {
        (Some(a), Some(b)) => (f[a] - f[b]) * (0.5 / h),
        (Some(a), None) => match g.interior_at(k, 2 * di, 2 * dj) {
            Some(a2) => (-3.0 * f[k] + 4.0 * f[a] - f[a2]) * (0.5 / h),
            None => (f[a] - f[k]) / h,
        },
        (None, Some(b)) => match g.interior_at(k, -2 * di, -2 * dj) {
            Some(b2) => (3.0 * f[k] - 4.0 * f[b] + f[b2]) * (0.5 / h),
            None => (f[k] - f[b]) / h,
        },
        (None, None) => 0.0,
    }
}

/// `∂x Vx + ∂y Vy` on interior nodes.
pub fn div(v: &VecField) -> ScalarField {
    let g = v.grid();
    let mut out = ScalarField::zeros(g);
    for &k in g.interior() {
        out.values_mut()[k] = cell_derivative(&v.vx, k, 1, 0) + cell_derivative(&v.vy, k, 0, 1);
    }
    out
}

/// `∂x Vy - ∂y Vx` on interior nodes.
pub fn curl(v: &VecField) -> ScalarField {
    let g = v.grid();
    let mut out = ScalarField::zeros(g);
    for &k in g.interior() {
        out.values_mut()[k] = cell_derivative(&v.vy, k, 1, 0) - cell_derivative(&v.vx, k, 0, 1);
    }
    out
}

/// `div(grad f)`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    div(&grad(f))
}

/// Weak divergence on active nodes: `⟨div_adjoint V, φ⟩ = -⟨V, grad φ⟩`.
pub fn div_adjoint(v: &VecField) -> ScalarField {
    adjoint(&v.vx, &v.vy, 1.0)
}

/// Weak curl on active nodes: `⟨curl_adjoint V, φ⟩ = -⟨V, perp_grad φ⟩`.
pub fn curl_adjoint(v: &VecField) -> ScalarField {
    adjoint(&v.vy, &v.vx, -1.0)
}

/// `(∂x a + sign ∂y b) / w` with cell values outside the interior read as 0.
fn adjoint(a: &ScalarField, b: &ScalarField, sign: f64) -> ScalarField {
    let g = a.grid();
    let inv2h = 0.5 / g.h();
    let (av, bv) = (a.values(), b.values());
    let cell = |k: usize, di: isize, dj: isize, vals: &[f64]| g.interior_at(k, di, dj).map_or(0.0, |q| vals[q]);
    let mut out = ScalarField::zeros(g);
    for &k in g.active() {
        let dx = (cell(k, 1, 0, av) - cell(k, -1, 0, av)) * inv2h;
        let dy = (cell(k, 0, 1, bv) - cell(k, 0, -1, bv)) * inv2h;
        out.values_mut()[k] = (dx + sign * dy) / g.weight(k);
    }
    out
}

/// `∂x a ∂y b - ∂y a ∂x b` from centered differences on interior nodes.
pub fn jacobian(a: &ScalarField, b: &ScalarField) -> Result<ScalarField> {
    same_grid(a.grid(), b.grid())?;
    let g = a.grid();
    let (inv2h, n) = (0.5 / g.h(), g.n());
    let (av, bv) = (a.values(), b.values());
    let mut out = ScalarField::zeros(g);
    for &k in g.interior() {
        let (ax, ay) = (centered(av, k, n, inv2h), centered(av, k, 1, inv2h));
        let (bx, by) = (centered(bv, k, n, inv2h), centered(bv, k, 1, inv2h));
        out.values_mut()[k] = ax * by - ay * bx;
    }
    Ok(out)
}
