//! Exact solutions and the antisymmetric connections Ω of each geometry.
//!
//! Every builder returns a [`Connection`], so `Ω^j_i = -Ω^i_j` holds by
//! storage. Ω is evaluated on interior nodes from centered gradients of the
//! sampled maps.

use std::sync::Arc;

use crate::elliptic::solve_dirichlet;
use crate::error::{Error, Result};
use crate::field_core::{
    connection_apply, grad, l2_norm, l2_norm_vec, laplacian, perp_grad, Connection, Constraint, Grid, MapField,
    ScalarField, VecField,
};

/// Orientation of the inverse stereographic map σ:
/// `∂xσ ∧ ∂yσ = STEREO_ORIENTATION · (|∇σ|²/2) · σ`.
///
/// Fixed by evaluating both sides on the analytic map; with it the cap
/// `σ/H` satisfies `-Δu = -2H ∂xu ∧ ∂yu` for either sign of `H`.
pub const STEREO_ORIENTATION: f64 = -1.0;

fn stereo_point(lambda: f64, center: (f64, f64), x: f64, y: f64) -> [f64; 3] {
    let (w1, w2) = (lambda * (x - center.0), lambda * (y - center.1));
    let r2 = w1 * w1 + w2 * w2;
    let q = 1.0 + r2;
    [2.0 * w1 / q, 2.0 * w2 / q, (r2 - 1.0) / q]
}

fn map_from_points(grid: &Arc<Grid>, m: usize, f: impl Fn(f64, f64) -> Vec<f64>, c: Constraint) -> Result<MapField> {
    let mut comps = vec![ScalarField::zeros(grid); m];
    let mut values: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; m];
    for &k in grid.active() {
        let (x, y) = grid.coords(k);
        for (i, v) in f(x, y).into_iter().enumerate() {
            values[i][k] = v;
        }
    }
    for (comp, v) in comps.iter_mut().zip(values) {
        *comp = ScalarField::new(grid, v)?;
    }
    MapField::new(comps, c)
}

/// Inverse stereographic projection of `w = λ((x, y) - center)`, a harmonic
/// map into S².
pub fn stereo_sphere_map(grid: &Arc<Grid>, lambda: f64, center: (f64, f64)) -> Result<MapField> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("dilation must be positive, got {lambda}")));
    }
    map_from_points(grid, 3, |x, y| stereo_point(lambda, center, x, y).to_vec(), Constraint::UnitSphere)
}

/// Sphere of radius `1/|H|` centered at the origin, parametrized by `σ/H`;
/// solves the constant mean curvature equation.
pub fn cmc_cap_map(grid: &Arc<Grid>, h: f64, lambda: f64) -> Result<MapField> {
    if h == 0.0 || !h.is_finite() {
        return Err(Error::InvalidParameter("mean curvature must be nonzero; use the harmonic generators".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("dilation must be positive, got {lambda}")));
    }
    map_from_points(
        grid,
        3,
        |x, y| stereo_point(lambda, (0.0, 0.0), x, y).iter().map(|v| v / h).collect(),
        Constraint::None,
    )
}

/// `(cos ax, sin ax, ay)`, a harmonic map into the unit cylinder
/// `y₁² + y₂² = 1`.
pub fn cylinder_map(grid: &Arc<Grid>, a: f64) -> Result<MapField> {
    map_from_points(grid, 3, |x, y| vec![(a * x).cos(), (a * x).sin(), a * y], Constraint::None)
}

/// Unit normal of the cylinder `y₁² + y₂² = 1`.
pub fn cylinder_normal(y: &[f64]) -> Vec<f64> {
    let r = y[0].hypot(y[1]);
    vec![y[0] / r, y[1] / r, 0.0]
}

fn grads(u: &MapField) -> Vec<VecField> {
    u.comps().iter().map(grad).collect()
}

/// `Ω^i_j = u^i ∇u^j - u^j ∇u^i`.
pub fn omega_sphere(u: &MapField) -> Result<Connection> {
    if u.constraint() != Constraint::UnitSphere {
        return Err(Error::ConstraintMissing);
    }
    antisym_products(u, &grads(u))
}

fn antisym_products(n: &MapField, dn: &[VecField]) -> Result<Connection> {
    Connection::from_node_fn(n.grid(), n.m(), |i, j, k| {
        let (ni, nj) = (n.comp(i).at(k), n.comp(j).at(k));
        let ([aix, aiy], [ajx, ajy]) = (dn[i].at(k), dn[j].at(k));
        [ni * ajx - nj * aix, ni * ajy - nj * aiy]
    })
}

/// `Ω^i_j = n^i ∇n^j - n^j ∇n^i` with `n` the target normal sampled along `u`.
pub fn omega_hypersurface(u: &MapField, gauss: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<Connection> {
    let grid = u.grid();
    let m = u.m();
    let mut comps = vec![vec![0.0; grid.len()]; m];
    for &k in grid.active() {
        let nk = gauss(&u.point(k));
        if nk.len() != m {
            return Err(Error::SizeMismatch { expected: m, got: nk.len() });
        }
        let norm = nk.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NonUnitNormal { node: k, norm });
        }
        for (i, v) in nk.into_iter().enumerate() {
            comps[i][k] = v;
        }
    }
    let comps = comps.into_iter().map(|v| ScalarField::new(grid, v)).collect::<Result<Vec<_>>>()?;
    let n = MapField::new(comps, Constraint::None)?;
    antisym_products(&n, &grads(&n))
}

/// Prescribed mean curvature connection:
/// `Ω = H(u) [[0, ∇⊥u³, -∇⊥u²], [-∇⊥u³, 0, ∇⊥u¹], [∇⊥u², -∇⊥u¹, 0]]`.
pub fn omega_mean_curvature(u: &MapField, h: &dyn Fn(&[f64]) -> f64) -> Result<Connection> {
    if u.m() != 3 {
        return Err(Error::SizeMismatch { expected: 3, got: u.m() });
    }
    let p: Vec<VecField> = u.comps().iter().map(perp_grad).collect();
    // entry (i, j) with i < j is ε_{ijl} H ∇⊥u^l
    let mut hs = vec![0.0; u.grid().len()];
    for &k in u.grid().interior() {
        hs[k] = h(&u.point(k));
    }
    Connection::from_node_fn(u.grid(), 3, |i, j, k| {
        let (l, sign) = match (i, j) {
            (0, 1) => (2, 1.0),
            (0, 2) => (1, -1.0),
            _ => (0, 1.0),
        };
        let [a, b] = p[l].at(k);
        [sign * hs[k] * a, sign * hs[k] * b]
    })
}

/// Target data of a general conformally invariant Lagrangian: the second
/// fundamental form `A^i_{j,l}(y)` and the torsion coefficients `λ^i_{j,l}(y)`,
/// both written into `out[(i * m + j) * m + l]`.
pub trait LagrangianGeometry: Sync {
    fn second_form(&self, y: &[f64], out: &mut [f64]) -> std::result::Result<(), String>;
    fn torsion(&self, y: &[f64], out: &mut [f64]) -> std::result::Result<(), String>;
}

/// Unit sphere with `A^i_{j,l}(y) = δ_{jl} yⁱ` and no torsion.
#[derive(Clone, Copy, Debug, Default)]
pub struct RoundSphere;

impl LagrangianGeometry for RoundSphere {
    fn second_form(&self, y: &[f64], out: &mut [f64]) -> std::result::Result<(), String> {
        let m = y.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for j in 0..m {
                out[(i * m + j) * m + j] = y[i];
            }
        }
        Ok(())
    }

    fn torsion(&self, _y: &[f64], out: &mut [f64]) -> std::result::Result<(), String> {
        out.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }
}

/// Constant mean curvature `H` in ℝ³: no second fundamental form term and
/// `λ^i_{j,l} = 2H ε_{ijl}`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantMeanCurvature {
    pub h: f64,
}

fn levi_civita(i: usize, j: usize, l: usize) -> f64 {
    match (i, j, l) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl LagrangianGeometry for ConstantMeanCurvature {
    fn second_form(&self, _y: &[f64], out: &mut [f64]) -> std::result::Result<(), String> {
        out.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }

    fn torsion(&self, y: &[f64], out: &mut [f64]) -> std::result::Result<(), String> {
        if y.len() != 3 {
            return Err(format!("constant mean curvature needs m = 3, got {}", y.len()));
        }
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    out[(i * 3 + j) * 3 + l] = 2.0 * self.h * levi_civita(i, j, l);
                }
            }
        }
        Ok(())
    }
}

/// `Ω^i_j = [A^i_{j,l} - A^j_{i,l}] ∇u^l + ¼ [λ^i_{j,l} - λ^j_{i,l}] ∇⊥u^l`.
pub fn omega_general(u: &MapField, geometry: &dyn LagrangianGeometry) -> Result<Connection> {
    let (grid, m) = (u.grid(), u.m());
    let g = grads(u);
    let p: Vec<VecField> = u.comps().iter().map(perp_grad).collect();
    let mut upper = vec![VecField::zeros(grid); m * m.saturating_sub(1) / 2];
    let (mut a, mut lam) = (vec![0.0; m * m * m], vec![0.0; m * m * m]);
    for &k in grid.interior() {
        let y = u.point(k);
        geometry.second_form(&y, &mut a).map_err(|message| Error::Callback { node: k, message })?;
        geometry.torsion(&y, &mut lam).map_err(|message| Error::Callback { node: k, message })?;
        let mut slot = 0;
        for i in 0..m {
            for j in i + 1..m {
                let (mut sx, mut sy) = (0.0, 0.0);
                for l in 0..m {
                    let ca = a[(i * m + j) * m + l] - a[(j * m + i) * m + l];
                    let cl = 0.25 * (lam[(i * m + j) * m + l] - lam[(j * m + i) * m + l]);
                    let ([gx, gy], [px, py]) = (g[l].at(k), p[l].at(k));
                    sx += ca * gx + cl * px;
                    sy += ca * gy + cl * py;
                }
                upper[slot].vx.values_mut()[k] = sx;
                upper[slot].vy.values_mut()[k] = sy;
                slot += 1;
            }
        }
    }
    Connection::from_upper(m, upper)
}

/// Norms of a residual field: plain L² and the energy of its Dirichlet potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub l2: f64,
    /// `‖∇ψ‖₂` with `Δψ = r`, a discrete H⁻¹ norm.
    pub hminus1: f64,
}

/// L² and H⁻¹ norms of a family of scalar residuals, combined in ℓ².
pub fn residual_norms(r: &[ScalarField]) -> Result<Residual> {
    let (mut l2, mut hm) = (0.0, 0.0);
    for ri in r {
        l2 += l2_norm(ri).powi(2);
        let (psi, _) = solve_dirichlet(ri)?;
        hm += l2_norm_vec(&grad(&psi)).powi(2);
    }
    Ok(Residual { l2: l2.sqrt(), hminus1: hm.sqrt() })
}

/// Residual of `-Δu = Ω·∇u`, i.e. of `Δu + Ω·∇u`.
pub fn residual_pde(u: &MapField, omega: &Connection) -> Result<Residual> {
    let r = pde_defect(u, omega)?;
    residual_norms(&r)
}

/// `Δu + Ω·∇u` componentwise on interior nodes.
pub fn pde_defect(u: &MapField, omega: &Connection) -> Result<Vec<ScalarField>> {
    let applied = connection_apply(omega, u)?;
    u.comps().iter().zip(applied.comps()).map(|(ui, ai)| laplacian(ui).axpy(1.0, ai)).collect()
}

/// `Δu + u |∇u|²`, the harmonic map equation into the unit sphere.
pub fn harmonic_defect(u: &MapField) -> Result<Vec<ScalarField>> {
    let g = grads(u);
    let grid = u.grid();
    let mut e = ScalarField::zeros(grid);
    for &k in grid.interior() {
        e.values_mut()[k] = g.iter().map(|gi| {
            let [a, b] = gi.at(k);
            a * a + b * b
        }).sum();
    }
    u.comps()
        .iter()
        .map(|ui| {
            let prod = ScalarField::new(grid, ui.values().iter().zip(e.values()).map(|(a, b)| a * b).collect())?;
            laplacian(ui).axpy(1.0, &prod)
        })
        .collect()
}

/// `∂xu ∧ ∂yu` from centered differences on interior nodes.
pub fn wedge(u: &MapField) -> Result<MapField> {
    if u.m() != 3 {
        return Err(Error::SizeMismatch { expected: 3, got: u.m() });
    }
    let g = grads(u);
    let grid = u.grid();
    let mut out = vec![ScalarField::zeros(grid); 3];
    for &k in grid.interior() {
        let ux = [g[0].vx.at(k), g[1].vx.at(k), g[2].vx.at(k)];
        let uy = [g[0].vy.at(k), g[1].vy.at(k), g[2].vy.at(k)];
        let w = [ux[1] * uy[2] - ux[2] * uy[1], ux[2] * uy[0] - ux[0] * uy[2], ux[0] * uy[1] - ux[1] * uy[0]];
        for i in 0..3 {
            out[i].values_mut()[k] = w[i];
        }
    }
    MapField::new(out, Constraint::None)
}

/// `Δu - 2H ∂xu ∧ ∂yu` for constant `H`, the direct form of the prescribed
/// mean curvature equation.
pub fn cmc_defect(u: &MapField, h: f64) -> Result<Vec<ScalarField>> {
    let w = wedge(u)?;
    u.comps().iter().zip(w.comps()).map(|(ui, wi)| laplacian(ui).axpy(-2.0 * h, wi)).collect()
}

/// `max |Σ_j u^j ∇u^j|` over interior nodes.
pub fn tangency_defect(u: &MapField) -> f64 {
    let g = grads(u);
    let mut worst: f64 = 0.0;
    for &k in u.grid().interior() {
        let (mut sx, mut sy) = (0.0, 0.0);
        for (j, gj) in g.iter().enumerate() {
            let [a, b] = gj.at(k);
            sx += u.comp(j).at(k) * a;
            sy += u.comp(j).at(k) * b;
        }
        worst = worst.max(sx.hypot(sy));
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryKind {
    SphereHarmonic,
    Hypersurface,
    MeanCurvature,
    GeneralLagrangian,
}

impl std::str::FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere_harmonic" => Ok(GeometryKind::SphereHarmonic),
            "hypersurface" => Ok(GeometryKind::Hypersurface),
            "mean_curvature" => Ok(GeometryKind::MeanCurvature),
            "general_lagrangian" => Ok(GeometryKind::GeneralLagrangian),
            other => Err(Error::InvalidParameter(format!("unknown geometry kind '{other}'"))),
        }
    }
}

/// Fixture selection as written in experiment configs.
///
/// * `sphere_harmonic`: stereographic map, Ω from the sphere formula.
/// * `hypersurface`: harmonic map into the unit cylinder with `a = lambda`,
///   Ω from the sampled Gauss map.
/// * `mean_curvature`: sphere cap of curvature `h_const`.
/// * `general_lagrangian`: the Lagrangian form with the built-in round sphere
///   (`h_const = 0`) or constant mean curvature data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub lambda: f64,
    pub center: (f64, f64),
    pub h_const: f64,
}

impl GeometrySpec {
    pub fn sphere(lambda: f64) -> Self {
        GeometrySpec { kind: GeometryKind::SphereHarmonic, lambda, center: (0.0, 0.0), h_const: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !self.h_const.is_finite() {
            return Err(Error::InvalidParameter("h_const must be finite".into()));
        }
        if self.kind == GeometryKind::MeanCurvature && self.h_const == 0.0 {
            return Err(Error::InvalidParameter("mean_curvature needs a nonzero h_const".into()));
        }
        Ok(())
    }

    pub fn map(&self, grid: &Arc<Grid>) -> Result<MapField> {
        self.validate()?;
        match self.kind {
            GeometryKind::SphereHarmonic => stereo_sphere_map(grid, self.lambda, self.center),
            GeometryKind::Hypersurface => cylinder_map(grid, self.lambda),
            GeometryKind::MeanCurvature => cmc_cap_map(grid, self.h_const, self.lambda),
            GeometryKind::GeneralLagrangian if self.h_const != 0.0 => cmc_cap_map(grid, self.h_const, self.lambda),
            GeometryKind::GeneralLagrangian => stereo_sphere_map(grid, self.lambda, self.center),
        }
    }

    pub fn omega(&self, u: &MapField) -> Result<Connection> {
        let h = self.h_const;
        match self.kind {
            GeometryKind::SphereHarmonic => omega_sphere(u),
            GeometryKind::Hypersurface => omega_hypersurface(u, &cylinder_normal),
            GeometryKind::MeanCurvature => omega_mean_curvature(u, &|_| h),
            GeometryKind::GeneralLagrangian if h != 0.0 => omega_general(u, &ConstantMeanCurvature { h }),
            GeometryKind::GeneralLagrangian => omega_general(u, &RoundSphere),
        }
    }
}
