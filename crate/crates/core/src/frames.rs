//! Coulomb moving frames along maps into an oriented surface of ℝ³.
//!
//! A tangent frame `(e₁, e₂)` along u is Coulomb when `div (e₂, ∇e₁) = 0`.
//! For such a frame the potential `-Δa = (∇⊥e₁, ∇e₂)`, `a = 0` on the
//! boundary, produces the two conservation laws
//!
//! ```text
//! div(cosh a (∇u, e₁) + sinh a (∇⊥u, e₂)) = 0
//! div(cosh a (∇u, e₂) - sinh a (∇⊥u, e₁)) = 0
//! ```
//!
//! whenever u is harmonic.

use std::f64::consts::PI;

use crate::elliptic::{solve_dirichlet, solve_neumann};
use crate::error::{Error, Result};
use crate::field_core::{
    div, div_adjoint, grad, jacobian, l2_norm, l2_norm_vec, perp_grad, sup_norm, w12_seminorm, Constraint,
    MapField, ScalarField, VecField,
};
use crate::targets::residual_norms;

/// Default angular distance the target normal must keep from the reference
/// axis and its antipode.
pub const POLE_MARGIN: f64 = 0.1;

/// Orthonormality and tangency tolerances of a valid frame.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
pub const TANGENCY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct FrameOptions {
    pub pole_margin: f64,
    /// Residual tolerance; `None` means `1e-8 (1 + ‖∇e₁‖₂)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions { pole_margin: POLE_MARGIN, tol: None, max_iter: 50 }
    }
}

#[derive(Clone, Debug)]
pub struct Frame {
    pub e1: MapField,
    pub e2: MapField,
    /// `‖div (e₂, ∇e₁)‖₂`, measured with the adjoint divergence.
    pub coulomb_residual: f64,
    pub iterations: usize,
    /// Largest accumulated rotation angle applied to the input frame.
    pub rotation: f64,
}

/// `(e₂, ∇e₁) = Σ_n e₂ⁿ ∇e₁ⁿ` on interior nodes.
pub fn frame_connection(e1: &MapField, e2: &MapField) -> VecField {
    let grid = e1.grid();
    let g1: Vec<VecField> = e1.comps().iter().map(grad).collect();
    let mut out = VecField::zeros(grid);
    for &k in grid.interior() {
        let (mut x, mut y) = (0.0, 0.0);
        for (g, c) in g1.iter().zip(e2.comps()) {
            let [a, b] = g.at(k);
            x += a * c.at(k);
            y += b * c.at(k);
        }
        out.vx.values_mut()[k] = x;
        out.vy.values_mut()[k] = y;
    }
    out
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn fields_from_points(grid: &std::sync::Arc<crate::field_core::Grid>, pts: &[[f64; 3]]) -> Result<MapField> {
    let comps = (0..3)
        .map(|i| {
            let mut v = vec![0.0; grid.len()];
            for &k in grid.active() {
                v[k] = pts[k][i];
            }
            ScalarField::new(grid, v)
        })
        .collect::<Result<Vec<_>>>()?;
    MapField::new(comps, Constraint::None)
}

fn points(f: &MapField) -> Vec<[f64; 3]> {
    let grid = f.grid();
    let mut out = vec![[0.0; 3]; grid.len()];
    for &k in grid.active() {
        out[k] = [f.comp(0).at(k), f.comp(1).at(k), f.comp(2).at(k)];
    }
    out
}

/// Coulomb frame along a unit-sphere valued map; the normal is u itself.
pub fn coulomb_frame(u: &MapField, opts: &FrameOptions) -> Result<Frame> {
    if u.constraint() != Constraint::UnitSphere {
        return Err(Error::ConstraintMissing);
    }
    coulomb_frame_with_normal(u, &|y| y.to_vec(), opts)
}

/// Coulomb frame along u for the target surface with unit normal `normal`.
///
/// The initial frame projects the coordinate axis farthest from the normal
/// values onto the tangent planes; the frame is then rotated until it is
/// Coulomb.
pub fn coulomb_frame_with_normal(u: &MapField, normal: &dyn Fn(&[f64]) -> Vec<f64>, opts: &FrameOptions) -> Result<Frame> {
    if u.m() != 3 {
        return Err(Error::SizeMismatch { expected: 3, got: u.m() });
    }
    let grid = u.grid();
    let mut nv = vec![[0.0; 3]; grid.len()];
    for &k in grid.active() {
        let v = normal(&u.point(k));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if v.len() != 3 || (norm - 1.0).abs() > TANGENCY_TOL {
            return Err(Error::NonUnitNormal { node: k, norm });
        }
        nv[k] = [v[0], v[1], v[2]];
    }
    let axis = (0..3)
        .min_by(|&a, &b| {
            let ma = grid.active().iter().map(|&k| nv[k][a].abs()).fold(0.0, f64::max);
            let mb = grid.active().iter().map(|&k| nv[k][b].abs()).fold(0.0, f64::max);
            ma.total_cmp(&mb)
        })
        .unwrap_or(0);
    let (mut e1, mut e2) = (vec![[0.0; 3]; grid.len()], vec![[0.0; 3]; grid.len()]);
    for &k in grid.active() {
        let n = nv[k];
        let angle = n[axis].abs().min(1.0).acos();
        if angle < opts.pole_margin {
            return Err(Error::PoleMargin { node: k, angle });
        }
        let mut t = [0.0; 3];
        t[axis] = 1.0;
        let d = n[axis];
        for i in 0..3 {
            t[i] -= d * n[i];
        }
        let len = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        t.iter_mut().for_each(|x| *x /= len);
        e1[k] = t;
        e2[k] = cross(&n, &t);
    }
    let e1 = fields_from_points(grid, &e1)?;
    let e2 = fields_from_points(grid, &e2)?;
    coulombize(&e1, &e2, opts)
}

/// Rotates a tangent frame by a scalar angle field until it is Coulomb.
pub fn coulombize(e1: &MapField, e2: &MapField, opts: &FrameOptions) -> Result<Frame> {
    if e1.m() != 3 || e2.m() != 3 {
        return Err(Error::SizeMismatch { expected: 3, got: e1.m().min(e2.m()) });
    }
    crate::field_core::same_grid(e1.grid(), e2.grid())?;
    let grid = e1.grid().clone();
    let (mut p1, mut p2) = (points(e1), points(e2));
    let mut total = ScalarField::zeros(&grid);
    let mut iterations = 0;
    loop {
        let f1 = fields_from_points(&grid, &p1)?;
        let f2 = fields_from_points(&grid, &p2)?;
        let r = div_adjoint(&frame_connection(&f1, &f2));
        let residual = l2_norm(&r);
        let grad_e1 = f1.comps().iter().map(|c| w12_seminorm(c).powi(2)).sum::<f64>().sqrt();
        let tol = opts.tol.unwrap_or(1e-8 * (1.0 + grad_e1));
        if residual <= tol {
            return Ok(Frame { e1: f1, e2: f2, coulomb_residual: residual, iterations, rotation: sup_norm(&total) });
        }
        if iterations >= opts.max_iter {
            return Err(Error::FrameNotConverged { iterations, residual });
        }
        let (theta, _) = solve_neumann(&r.scale(-1.0))?;
        for &k in grid.active() {
            let (s, c) = theta.at(k).sin_cos();
            let (a, b) = (p1[k], p2[k]);
            for i in 0..3 {
                p1[k][i] = c * a[i] + s * b[i];
                p2[k][i] = -s * a[i] + c * b[i];
            }
        }
        total = total.axpy(1.0, &theta)?;
        iterations += 1;
    }
}

/// Largest deviations from orthonormality and from tangency, over active nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameCheck {
    pub orthonormal: f64,
    pub tangency: f64,
}

impl FrameCheck {
    pub fn passes(&self) -> bool {
        self.orthonormal <= ORTHONORMAL_TOL && self.tangency <= TANGENCY_TOL
    }
}

pub fn check_frame(u: &MapField, frame: &Frame, normal: &dyn Fn(&[f64]) -> Vec<f64>) -> FrameCheck {
    let grid = u.grid();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (mut orthonormal, mut tangency): (f64, f64) = (0.0, 0.0);
    for &k in grid.active() {
        let (a, b, n) = (frame.e1.point(k), frame.e2.point(k), normal(&u.point(k)));
        orthonormal = orthonormal.max((dot(&a, &a) - 1.0).abs()).max((dot(&b, &b) - 1.0).abs()).max(dot(&a, &b).abs());
        tangency = tangency.max(dot(&a, &n).abs()).max(dot(&b, &n).abs());
    }
    FrameCheck { orthonormal, tangency }
}

/// `a` with `-Δa = Σ_k J(e₁ᵏ, e₂ᵏ)` and `a = 0` on the boundary.
pub fn solve_a(frame: &Frame) -> Result<ScalarField> {
    let grid = frame.e1.grid();
    let mut rhs = ScalarField::zeros(grid);
    for (a, b) in frame.e1.comps().iter().zip(frame.e2.comps()) {
        rhs = rhs.axpy(-1.0, &jacobian(a, b)?)?;
    }
    Ok(solve_dirichlet(&rhs)?.0)
}

/// Measured sizes of a against the Wente-type bounds (10% slack).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialBounds {
    pub sup: f64,
    pub sup_bound: f64,
    pub grad: f64,
    pub grad_bound: f64,
}

impl PotentialBounds {
    pub fn holds(&self) -> bool {
        self.sup <= self.sup_bound && self.grad <= self.grad_bound
    }
}

fn map_seminorm(f: &MapField) -> f64 {
    f.comps().iter().map(|c| w12_seminorm(c).powi(2)).sum::<f64>().sqrt()
}

pub fn potential_bounds(frame: &Frame, a: &ScalarField) -> PotentialBounds {
    let prod = map_seminorm(&frame.e1) * map_seminorm(&frame.e2);
    PotentialBounds {
        sup: sup_norm(a),
        sup_bound: prod / (2.0 * PI) * 1.1,
        grad: l2_norm_vec(&grad(a)),
        grad_bound: prod / (2.0 * PI).sqrt() * 1.1,
    }
}

/// H⁻¹ norms of the divergences of the two cosh/sinh fluxes.
pub fn frame_conservation_residual(u: &MapField, frame: &Frame, a: &ScalarField) -> Result<(f64, f64)> {
    let grid = u.grid();
    let gu: Vec<VecField> = u.comps().iter().map(grad).collect();
    let pu: Vec<VecField> = u.comps().iter().map(perp_grad).collect();
    let mut f1 = VecField::zeros(grid);
    let mut f2 = VecField::zeros(grid);
    for &k in grid.interior() {
        let (ch, sh) = (a.at(k).cosh(), a.at(k).sinh());
        let (e1, e2) = (frame.e1.point(k), frame.e2.point(k));
        for d in 0..2 {
            let (mut g1, mut g2, mut q1, mut q2) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..3 {
                let (g, p) = (gu[i].at(k)[d], pu[i].at(k)[d]);
                g1 += g * e1[i];
                g2 += g * e2[i];
                q1 += p * e1[i];
                q2 += p * e2[i];
            }
            let (v1, v2) = (ch * g1 + sh * q2, ch * g2 - sh * q1);
            if d == 0 {
                f1.vx.values_mut()[k] = v1;
                f2.vx.values_mut()[k] = v2;
            } else {
                f1.vy.values_mut()[k] = v1;
                f2.vy.values_mut()[k] = v2;
            }
        }
    }
    let r1 = residual_norms(&[div(&f1)])?.hminus1;
    let r2 = residual_norms(&[div(&f2)])?.hminus1;
    Ok((r1, r2))
}

/// Both sides of the second-derivative estimate on the half disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondDerivativeReport {
    /// `h² Σ |∇²u|` over nodes with `r < 1/2`.
    pub lhs: f64,
    /// `exp(‖∇e‖²/4π) (‖∇e‖ + 1) ‖∇u‖₂`, with `‖∇e‖² = ‖∇e₁‖² + ‖∇e₂‖²`.
    pub rhs: f64,
    /// Empirical constant `lhs / rhs`; undefined when both vanish.
    pub ratio: Option<f64>,
}

pub fn second_derivative_report(u: &MapField, frame: &Frame) -> SecondDerivativeReport {
    let grid = u.grid();
    let (n, h) = (grid.n(), grid.h());
    let c = ((n - 1) / 2) as i64;
    let mut lhs = 0.0;
    for &k in grid.interior() {
        let (i, j) = ((k / n) as i64 - c, (k % n) as i64 - c);
        if 4 * (i * i + j * j) >= c * c {
            continue;
        }
        let mut s = 0.0;
        for comp in u.comps() {
            let v = comp.values();
            let uxx = (v[k + n] - 2.0 * v[k] + v[k - n]) / (h * h);
            let uyy = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h);
            let uxy = (v[k + n + 1] - v[k + n - 1] - v[k - n + 1] + v[k - n - 1]) / (4.0 * h * h);
            s += uxx * uxx + 2.0 * uxy * uxy + uyy * uyy;
        }
        lhs += s.sqrt();
    }
    lhs *= h * h;
    let ge2 = map_seminorm(&frame.e1).powi(2) + map_seminorm(&frame.e2).powi(2);
    let rhs = (ge2 / (4.0 * PI)).exp() * (ge2.sqrt() + 1.0) * map_seminorm(u);
    SecondDerivativeReport { lhs, rhs, ratio: (rhs > 0.0).then(|| lhs / rhs) }
}
