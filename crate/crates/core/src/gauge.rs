//! Coulomb gauge extraction.
//!
//! Given Ω, find a rotation field P minimizing `∫|Ωᴾ|²` with
//! `Ωᴾ = Pᵀ∇P + PᵀΩP`. At a minimizer Ωᴾ is divergence free, so it equals
//! `∇⊥ξ` with ξ vanishing on the boundary. The existence argument in the
//! literature is a continuity method; here the energy is minimized directly
//! by preconditioned Riemannian descent and the certificates are checked
//! afterwards.

use rayon::prelude::*;

use crate::elliptic::{solve_dirichlet, solve_neumann};
use crate::error::{Error, Result};
use crate::field_core::small::{self, NodeMats};
use crate::field_core::{
    connection_energy, connection_norm, curl, mat_w12_seminorm, matrix_vec_norm, perp_grad, Connection, Grid,
    MatField, MatVariant, ScalarField, VecField, ROTATION_TOL,
};

#[derive(Clone, Debug)]
pub struct GaugeOptions {
    /// Stationarity tolerance; `None` means `1e-8 (1 + ‖Ω‖₂)`.
    pub tol_div: Option<f64>,
    pub max_iter: usize,
    /// First trial step of every line search.
    pub step0: f64,
    /// Step reduction factor of the backtracking search.
    pub backtrack: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Largest `∫|Ω|²` accepted without `force`.
    pub eps_threshold: f64,
    pub force: bool,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        GaugeOptions {
            tol_div: None,
            max_iter: 200,
            step0: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            eps_threshold: 5.0,
            force: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GaugeResult {
    pub p: MatField,
    pub xi: MatField,
    /// Antisymmetric part of `Pᵀ∇P + PᵀΩP`.
    pub rotated: Connection,
    /// L² norm of the discarded symmetric part.
    pub sym_defect: f64,
    /// `‖∇⊥ξ - Ωᴾ‖₂`.
    pub residual: f64,
    pub energy_in: f64,
    pub energy_out: f64,
    pub omega_norm: f64,
    /// Weighted L² norm of the discrete first variation (the covariant
    /// divergence of Ωᴾ); zero exactly at a discrete minimizer.
    pub stationarity: f64,
    /// `(‖∇P‖₂ + ‖∇ξ‖₂) / ‖Ω‖₂`, undefined for Ω = 0.
    pub ratio: Option<f64>,
    pub iterations: usize,
    /// Energy after every accepted step, starting from P = id.
    pub energy_trace: Vec<f64>,
}

/// Ω as full m×m matrices per interior node, one set per direction.
struct Packed {
    m: usize,
    dirs: [NodeMats; 2],
}

impl Packed {
    fn new(omega: &Connection) -> Self {
        let (grid, m) = (omega.grid(), omega.m());
        let mut dirs = [NodeMats::zeros(grid.len(), m), NodeMats::zeros(grid.len(), m)];
        for &k in grid.interior() {
            for i in 0..m {
                for j in 0..m {
                    let [a, b] = omega.value(i, j, k);
                    dirs[0].data[k * m * m + i * m + j] = a;
                    dirs[1].data[k * m * m + i * m + j] = b;
                }
            }
        }
        Packed { m, dirs }
    }
}

fn strides(grid: &Grid) -> [usize; 2] {
    [grid.n(), 1]
}

/// `X_e = Pᵀ ∂_e P + Pᵀ Ω_e P` on interior nodes.
fn x_fields(grid: &Grid, om: &Packed, p: &NodeMats) -> [NodeMats; 2] {
    let m = om.m;
    let inv2h = 0.5 / grid.h();
    let mut out = [NodeMats::zeros(grid.len(), m), NodeMats::zeros(grid.len(), m)];
    for (d, s) in strides(grid).into_iter().enumerate() {
        for &k in grid.interior() {
            let pk = p.get(k);
            let dp: Vec<f64> = p.get(k + s).iter().zip(p.get(k - s)).map(|(a, b)| (a - b) * inv2h).collect();
            let mut x = small::mul_tn(pk, &dp, m);
            let s_ = small::mul_tn(pk, &small::mul(om.dirs[d].get(k), pk, m), m);
            x.iter_mut().zip(&s_).for_each(|(a, b)| *a += b);
            out[d].set(k, &x);
        }
    }
    out
}

fn energy(grid: &Grid, om: &Packed, p: &NodeMats) -> f64 {
    let x = x_fields(grid, om, p);
    let m = om.m;
    let mut s = 0.0;
    for xd in &x {
        for &k in grid.interior() {
            s += small::frob2(&small::antisym(xd.get(k), m));
        }
    }
    s * grid.h() * grid.h()
}

/// Gradient of the discrete energy with respect to `P ← P(I + η)`, η ∈ so(m),
/// for the Frobenius pairing summed over nodes.
fn energy_gradient(grid: &Grid, om: &Packed, p: &NodeMats) -> NodeMats {
    let m = om.m;
    let inv2h = 0.5 / grid.h();
    let x = x_fields(grid, om, p);
    let mut g = NodeMats::zeros(grid.len(), m);
    let add = |g: &mut NodeMats, k: usize, v: &[f64], s: f64| {
        let mm = m * m;
        g.data[k * mm..(k + 1) * mm].iter_mut().zip(v).for_each(|(a, b)| *a += s * b);
    };
    for (d, st) in strides(grid).into_iter().enumerate() {
        for &k in grid.interior() {
            let xk = x[d].get(k);
            let y = small::antisym(xk, m);
            let pk = p.get(k);
            let sk = small::mul_tn(pk, &small::mul(om.dirs[d].get(k), pk, m), m);
            // P(k) varies inside X(k): -Y Xᵀ + Sᵀ Y
            add(&mut g, k, &small::mul_nt(&y, xk, m), -1.0);
            add(&mut g, k, &small::mul_tn(&sk, &y, m), 1.0);
            // P(k ± e) varies inside the difference quotient
            let py = small::mul(pk, &y, m);
            add(&mut g, k + st, &small::mul_tn(p.get(k + st), &py, m), inv2h);
            add(&mut g, k - st, &small::mul_tn(p.get(k - st), &py, m), -inv2h);
        }
    }
    let scale = 2.0 * grid.h() * grid.h();
    let mut out = NodeMats::zeros(grid.len(), m);
    for &k in grid.active() {
        let a: Vec<f64> = small::antisym(g.get(k), m).iter().map(|v| v * scale).collect();
        out.set(k, &a);
    }
    out
}

/// Weighted L² norm of `g / (2h² w)`.
fn stationarity(grid: &Grid, g: &NodeMats) -> f64 {
    let h2 = grid.h() * grid.h();
    let s: f64 = grid
        .active()
        .iter()
        .map(|&k| small::frob2(g.get(k)) / (4.0 * h2 * h2 * grid.weight(k)))
        .sum();
    grid.h() * s.sqrt()
}

fn check_rotation(p: &MatField) -> Result<()> {
    if let Some((node, defect)) = p.orthogonality_defect() {
        if defect > ROTATION_TOL {
            return Err(Error::NotRotation { node, defect });
        }
    }
    Ok(())
}

fn split_x(grid: &std::sync::Arc<Grid>, m: usize, x: &[NodeMats; 2]) -> Result<(Connection, f64)> {
    let rotated = Connection::from_node_fn(grid, m, |i, j, k| {
        let (a, b) = (x[0].get(k), x[1].get(k));
        [0.5 * (a[i * m + j] - a[j * m + i]), 0.5 * (b[i * m + j] - b[j * m + i])]
    })?;
    let sym = matrix_vec_norm(grid, m, |i, j, k| {
        let (a, b) = (x[0].get(k), x[1].get(k));
        [0.5 * (a[i * m + j] + a[j * m + i]), 0.5 * (b[i * m + j] + b[j * m + i])]
    });
    Ok((rotated, sym))
}

/// `Ωᴾ = Pᵀ∇P + PᵀΩP`, projected to its antisymmetric part; also returns the
/// L² norm of the symmetric part that was dropped.
pub fn rotate_connection(omega: &Connection, p: &MatField) -> Result<(Connection, f64)> {
    if p.m() != omega.m() {
        return Err(Error::SizeMismatch { expected: omega.m(), got: p.m() });
    }
    check_rotation(p)?;
    let grid = omega.grid();
    let x = x_fields(grid, &Packed::new(omega), &NodeMats::from_field(p));
    split_x(grid, omega.m(), &x)
}

/// Discrete gauge energy `∫|Ωᴾ|²` (antisymmetric part).
pub fn gauge_energy(omega: &Connection, p: &MatField) -> f64 {
    energy(omega.grid(), &Packed::new(omega), &NodeMats::from_field(p))
}

/// Gradient of [`gauge_energy`] as an antisymmetric field: the derivative
/// along `P ← P exp(tη)` is `Σ_nodes ⟨gradient, η⟩` (Frobenius).
pub fn gauge_energy_gradient(omega: &Connection, p: &MatField) -> Result<MatField> {
    let grid = omega.grid();
    let m = omega.m();
    let g = energy_gradient(grid, &Packed::new(omega), &NodeMats::from_field(p));
    let upper = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|(i, j)| g.entry(grid, i, j)).collect();
    MatField::antisym_from_upper(m, upper)
}

fn retract(grid: &Grid, p: &NodeMats, d: &NodeMats, tau: f64) -> NodeMats {
    let m = p.m;
    let mut out = p.clone();
    for &k in grid.active() {
        let step: Vec<f64> = d.get(k).iter().map(|v| tau * v).collect();
        out.set(k, &small::mul(p.get(k), &small::expm(&step, m), m));
    }
    out
}

/// Sobolev-preconditioned descent direction: the natural-boundary Poisson
/// solve of the gradient density, entry by entry.
fn direction(grid: &std::sync::Arc<Grid>, g: &NodeMats) -> Result<NodeMats> {
    let m = g.m;
    let h2 = grid.h() * grid.h();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let solved: Vec<ScalarField> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut f = ScalarField::zeros(grid);
            for &k in grid.active() {
                f.values_mut()[k] = g.get(k)[i * m + j] / (2.0 * h2 * grid.weight(k));
            }
            solve_neumann(&f).map(|(x, _)| x)
        })
        .collect::<Result<_>>()?;
    let mut d = NodeMats::zeros(grid.len(), m);
    for (&(i, j), s) in pairs.iter().zip(&solved) {
        for &k in grid.active() {
            d.data[k * m * m + i * m + j] = s.at(k);
            d.data[k * m * m + j * m + i] = -s.at(k);
        }
    }
    Ok(d)
}

/// Minimizes `∫|Ωᴾ|²` from P = id and recovers ξ from `Δξ = curl Ωᴾ`.
pub fn coulomb_gauge(omega: &Connection, opts: &GaugeOptions) -> Result<GaugeResult> {
    let grid = omega.grid().clone();
    let m = omega.m();
    let energy_in = connection_energy(omega);
    if energy_in > opts.eps_threshold && !opts.force {
        return Err(Error::EnergyTooLarge { energy: energy_in, threshold: opts.eps_threshold });
    }
    let omega_norm = connection_norm(omega);
    let tol = opts.tol_div.unwrap_or(1e-8 * (1.0 + omega_norm));
    let om = Packed::new(omega);

    let mut p = NodeMats::identity(&grid, m);
    let mut e = energy(&grid, &om, &p);
    let mut trace = vec![e];
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let g = energy_gradient(&grid, &om, &p);
        if stationarity(&grid, &g) <= tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let d = direction(&grid, &g)?;
        let slope: f64 = g.data.iter().zip(&d.data).map(|(a, b)| a * b).sum();
        let mut tau = opts.step0;
        let mut accepted = None;
        while tau > 1e-14 {
            let pn = retract(&grid, &p, &d, tau);
            let en = energy(&grid, &om, &pn);
            // slack for rounding once the decrease reaches machine precision
            if en <= e + opts.armijo * tau * slope + 4.0 * f64::EPSILON * e {
                accepted = Some((pn, en));
                break;
            }
            tau *= opts.backtrack;
        }
        iterations += 1;
        match accepted {
            Some((pn, en)) if en <= e => {
                p = pn;
                e = en;
                trace.push(e);
            }
            // no representable decrease left: the iterate is as stationary as
            // floating point allows
            _ => {
                converged = true;
                break;
            }
        }
    }

    let result = finish(omega, &om, p, energy_in, omega_norm, iterations, trace)?;
    if converged {
        Ok(result)
    } else {
        Err(Error::GaugeNotConverged(Box::new(result)))
    }
}

fn finish(
    omega: &Connection,
    om: &Packed,
    p: NodeMats,
    energy_in: f64,
    omega_norm: f64,
    iterations: usize,
    energy_trace: Vec<f64>,
) -> Result<GaugeResult> {
    let grid = omega.grid();
    let m = omega.m();
    let x = x_fields(grid, om, &p);
    let (rotated, sym_defect) = split_x(grid, m, &x)?;
    let g = energy_gradient(grid, om, &p);
    let stationarity = stationarity(grid, &g);
    let energy_out = connection_energy(&rotated);

    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let xi_upper: Vec<ScalarField> = pairs
        .par_iter()
        .map(|&(i, j)| solve_dirichlet(&curl(rotated.upper(i, j))).map(|(s, _)| s))
        .collect::<Result<_>>()?;
    let xi = MatField::antisym_from_upper(m, xi_upper)?;
    let perp: Vec<VecField> = xi.entries().iter().map(perp_grad).collect();
    let residual = matrix_vec_norm(grid, m, |i, j, k| {
        let ([a, b], [c, d]) = (perp[i * m + j].at(k), rotated.value(i, j, k));
        [a - c, b - d]
    });
    let p = MatField::rotation(m, p.entries(grid))?;
    let ratio = (omega_norm > 0.0).then(|| (mat_w12_seminorm(&p) + mat_w12_seminorm(&xi)) / omega_norm);
    Ok(GaugeResult {
        p,
        xi,
        rotated,
        sym_defect,
        residual,
        energy_in,
        energy_out,
        omega_norm,
        stationarity,
        ratio,
        iterations,
        energy_trace,
    })
}

/// Pass/fail flags of an independent re-check of a gauge result.
#[derive(Clone, Debug)]
pub struct GaugeCheck {
    /// Largest `|PᵀP - id|` over active nodes.
    pub rotation_defect: f64,
    pub rotation_ok: bool,
    /// Largest `|det P - 1|`.
    pub det_defect: f64,
    pub det_ok: bool,
    /// ξ is antisymmetric and exactly zero off the fully centered nodes.
    pub xi_ok: bool,
    pub energy_ok: bool,
    /// Recomputed `‖∇⊥ξ - Ωᴾ‖₂`.
    pub residual: f64,
    /// Recomputed `(‖∇P‖₂ + ‖∇ξ‖₂) / ‖Ω‖₂`.
    pub ratio: Option<f64>,
}

impl GaugeCheck {
    pub fn all_pass(&self) -> bool {
        self.rotation_ok && self.det_ok && self.xi_ok && self.energy_ok
    }
}

/// Recomputes the invariants of `result` from Ω without trusting its fields.
pub fn verify_gauge(omega: &Connection, result: &GaugeResult) -> GaugeCheck {
    let grid = omega.grid();
    let m = omega.m();
    let p = &result.p;
    let rotation_defect = p.orthogonality_defect().map_or(0.0, |(_, d)| d);
    let det_defect = grid
        .active()
        .iter()
        .map(|&k| (small::to_dmatrix(&p.at(k), m).determinant() - 1.0).abs())
        .fold(0.0, f64::max);
    let xi = &result.xi;
    let mut xi_ok = xi.variant() == MatVariant::Antisym;
    for &k in grid.active() {
        for i in 0..m {
            for j in 0..m {
                let v = xi.entry(i, j).at(k);
                xi_ok &= v == -xi.entry(j, i).at(k);
                xi_ok &= grid.is_centered(k) || v == 0.0;
            }
        }
    }
    let om = Packed::new(omega);
    let x = x_fields(grid, &om, &NodeMats::from_field(p));
    let energy_in = connection_energy(omega);
    let (residual, energy_out) = match split_x(grid, m, &x) {
        Ok((rotated, _)) => {
            let perp: Vec<VecField> = xi.entries().iter().map(perp_grad).collect();
            let r = matrix_vec_norm(grid, m, |i, j, k| {
                let ([a, b], [c, d]) = (perp[i * m + j].at(k), rotated.value(i, j, k));
                [a - c, b - d]
            });
            (r, connection_energy(&rotated))
        }
        Err(_) => (f64::NAN, f64::NAN),
    };
    let omega_norm = connection_norm(omega);
    let ratio = (omega_norm > 0.0).then(|| (mat_w12_seminorm(p) + mat_w12_seminorm(xi)) / omega_norm);
    GaugeCheck {
        rotation_defect,
        rotation_ok: rotation_defect <= ROTATION_TOL,
        det_defect,
        det_ok: det_defect <= 1e-10,
        xi_ok,
        energy_ok: energy_out <= energy_in + 1e-10,
        residual,
        ratio,
    }
}
