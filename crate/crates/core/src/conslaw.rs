//! Conservation laws `div(A∇u + B∇⊥u) = 0` for systems `-Δu = Ω·∇u`.
//!
//! Starting from a Coulomb gauge `(P, ξ)`, the pair `(Â, B)` solves
//!
//! ```text
//! ΔÂ = div(Ã∇⊥ξ + ∇⊥B P),        ∂Â/∂ν = 0, mean Â = 0
//! ΔB = curl((∇Ã - Ã∇⊥ξ) Pᵀ),      B = 0 on the boundary
//! ```
//!
//! with `Ã = Â + id`, by Picard sweeps. Then `A = ÃPᵀ` satisfies
//! `∇A - AΩ = ∇⊥B`, which turns the system into a divergence.

use rayon::prelude::*;

use crate::elliptic::{hodge_decompose, solve_dirichlet_many, solve_neumann_many};
use crate::error::{Error, Result};
use crate::field_core::small::{self, NodeMats};
use crate::field_core::{
    connection_norm, curl, div, div_adjoint, grad, integrate, l2_norm, l2_norm_vec, mat_w12_seminorm,
    matrix_vec_norm, perp_grad, Connection, Grid, MapField, MatField, ScalarField, VecField,
};
use crate::gauge::GaugeResult;
use crate::targets::{pde_defect, residual_norms, Residual};

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    /// Relative update size at which the sweeps stop.
    pub tol_fp: f64,
    pub max_sweeps: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tol_fp: 1e-9, max_sweeps: 200 }
    }
}

/// Measured constants of the a priori bounds; `None` when Ω = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRatios {
    /// `(‖∇A‖₂ + ‖∇B‖₂) / ‖Ω‖₂`.
    pub grad: Option<f64>,
    /// `‖dist(A, SO(m))‖∞ / ‖Ω‖₂`.
    pub dist: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ABResult {
    pub a: MatField,
    pub b: MatField,
    pub a_hat: MatField,
    pub gauge: GaugeResult,
    pub fp_iters: usize,
    /// Relative size of one further sweep after stopping.
    pub fp_residual: f64,
    /// Relative update norm of every sweep.
    pub trace: Vec<f64>,
    /// Largest `|∫Â_ij|` (the normalization keeps it at rounding level).
    pub a_hat_mean: f64,
    pub dist_so: f64,
    pub min_singular: f64,
    pub bound_ratios: BoundRatios,
}

fn cell_grads(grid: &Grid, x: &NodeMats) -> [NodeMats; 2] {
    let mm = x.m * x.m;
    let inv2h = 0.5 / grid.h();
    let mut out = [NodeMats::zeros(grid.len(), x.m), NodeMats::zeros(grid.len(), x.m)];
    for (d, s) in [grid.n(), 1].into_iter().enumerate() {
        for &k in grid.interior() {
            for e in 0..mm {
                out[d].data[k * mm + e] = (x.data[(k + s) * mm + e] - x.data[(k - s) * mm + e]) * inv2h;
            }
        }
    }
    out
}

fn cell_perp(grid: &Grid, x: &NodeMats) -> [NodeMats; 2] {
    let [gx, mut gy] = cell_grads(grid, x);
    gy.data.iter_mut().for_each(|v| *v = -*v);
    [gy, gx]
}

fn vec_entries(grid: &std::sync::Arc<Grid>, v: &[NodeMats; 2]) -> Vec<VecField> {
    let (ex, ey) = (v[0].entries(grid), v[1].entries(grid));
    ex.into_iter()
        .zip(ey)
        .map(|(a, b)| VecField::new(a, b).expect("entries share the grid"))
        .collect()
}

fn shift_identity(grid: &Grid, x: &NodeMats) -> NodeMats {
    let m = x.m;
    let mut out = x.clone();
    for &k in grid.active() {
        for i in 0..m {
            out.data[k * m * m + i * m + i] += 1.0;
        }
    }
    out
}

struct Sweep<'a> {
    grid: &'a std::sync::Arc<Grid>,
    p: NodeMats,
    pxi: [NodeMats; 2],
}

impl Sweep<'_> {
    fn run(&self, a_hat: &NodeMats, b: &NodeMats) -> Result<(NodeMats, NodeMats)> {
        let (grid, m) = (self.grid, self.p.m);
        let at = shift_identity(grid, a_hat);
        let pb = cell_perp(grid, b);
        let mut v1 = [NodeMats::zeros(grid.len(), m), NodeMats::zeros(grid.len(), m)];
        for d in 0..2 {
            for &k in grid.interior() {
                let mut x = small::mul(at.get(k), self.pxi[d].get(k), m);
                let y = small::mul(pb[d].get(k), self.p.get(k), m);
                x.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
                v1[d].set(k, &x);
            }
        }
        let rhs: Vec<ScalarField> = vec_entries(grid, &v1).iter().map(div_adjoint).collect();
        let mut a_new = NodeMats::zeros(grid.len(), m);
        for (e, f) in solve_neumann_many(&rhs)?.iter().enumerate() {
            a_new.set_entry(e / m, e % m, f);
        }

        let at = shift_identity(grid, &a_new);
        let ga = cell_grads(grid, &at);
        let mut w = [NodeMats::zeros(grid.len(), m), NodeMats::zeros(grid.len(), m)];
        for d in 0..2 {
            for &k in grid.interior() {
                let mut x = ga[d].get(k).to_vec();
                let y = small::mul(at.get(k), self.pxi[d].get(k), m);
                x.iter_mut().zip(&y).for_each(|(a, b)| *a -= b);
                w[d].set(k, &small::mul_nt(&x, self.p.get(k), m));
            }
        }
        let rhs: Vec<ScalarField> = vec_entries(grid, &w).iter().map(curl).collect();
        let mut b_new = NodeMats::zeros(grid.len(), m);
        for (e, f) in solve_dirichlet_many(&rhs)?.iter().enumerate() {
            b_new.set_entry(e / m, e % m, f);
        }
        Ok((a_new, b_new))
    }

    /// Update size relative to the new iterate.
    fn relative(&self, old: (&NodeMats, &NodeMats), new: (&NodeMats, &NodeMats)) -> f64 {
        let mm = self.p.m * self.p.m;
        let (mut du, mut nu) = (0.0, 0.0);
        for &k in self.grid.active() {
            for e in k * mm..(k + 1) * mm {
                du += (new.0.data[e] - old.0.data[e]).powi(2) + (new.1.data[e] - old.1.data[e]).powi(2);
                nu += new.0.data[e].powi(2) + new.1.data[e].powi(2);
            }
        }
        if du == 0.0 {
            0.0
        } else {
            (du / nu.max(f64::MIN_POSITIVE)).sqrt()
        }
    }
}

/// Builds `(A, B)` from Ω and its Coulomb gauge.
pub fn build_ab(omega: &Connection, gauge: &GaugeResult, opts: &FixedPointOptions) -> Result<ABResult> {
    let grid = omega.grid();
    let m = omega.m();
    if gauge.p.m() != m {
        return Err(Error::SizeMismatch { expected: m, got: gauge.p.m() });
    }
    crate::field_core::same_grid(grid, gauge.p.grid())?;
    let sweep = Sweep { grid, p: NodeMats::from_field(&gauge.p), pxi: cell_perp(grid, &NodeMats::from_field(&gauge.xi)) };

    let mut a_hat = NodeMats::zeros(grid.len(), m);
    let mut b = NodeMats::zeros(grid.len(), m);
    let mut trace = Vec::new();
    let mut growing = 0;
    loop {
        let (an, bn) = sweep.run(&a_hat, &b)?;
        let upd = sweep.relative((&a_hat, &b), (&an, &bn));
        a_hat = an;
        b = bn;
        if let Some(&prev) = trace.last() {
            growing = if upd > prev { growing + 1 } else { 0 };
        }
        trace.push(upd);
        if upd <= opts.tol_fp {
            break;
        }
        if growing >= 5 {
            return Err(Error::FixedPointDiverged { sweep: trace.len(), update: upd });
        }
        if trace.len() >= opts.max_sweeps {
            return Err(Error::FixedPointNotConverged { sweeps: trace.len(), update: upd });
        }
    }
    let (an, bn) = sweep.run(&a_hat, &b)?;
    let fp_residual = sweep.relative((&a_hat, &b), (&an, &bn));

    let at = shift_identity(grid, &a_hat);
    let mut a = NodeMats::zeros(grid.len(), m);
    for &k in grid.active() {
        a.set(k, &small::mul_nt(at.get(k), sweep.p.get(k), m));
    }
    let a_hat = MatField::general(m, a_hat.entries(grid))?;
    let a_hat_mean = a_hat.entries().iter().map(|e| integrate(e).abs()).fold(0.0, f64::max);
    let (dist_so, min_singular) = rotation_distance(grid, &a);
    let a = MatField::general(m, a.entries(grid))?;
    let b = MatField::general(m, b.entries(grid))?;
    let norm = connection_norm(omega);
    let bound_ratios = BoundRatios {
        grad: (norm > 0.0).then(|| (mat_w12_seminorm(&a) + mat_w12_seminorm(&b)) / norm),
        dist: (norm > 0.0).then(|| dist_so / norm),
    };
    Ok(ABResult {
        a,
        b,
        a_hat,
        gauge: gauge.clone(),
        fp_iters: trace.len(),
        fp_residual,
        trace,
        a_hat_mean,
        dist_so,
        min_singular,
        bound_ratios,
    })
}

/// Largest Frobenius distance to the polar rotation, and smallest singular
/// value, over active nodes.
fn rotation_distance(grid: &Grid, a: &NodeMats) -> (f64, f64) {
    let m = a.m;
    grid.active()
        .par_iter()
        .map(|&k| {
            let x = a.get(k);
            let sigma = small::to_dmatrix(x, m).singular_values().min();
            let dist = match small::polar_rotation(x, m) {
                Some(r) => small::frob2(&x.iter().zip(&r).map(|(p, q)| p - q).collect::<Vec<_>>()).sqrt(),
                None => f64::INFINITY,
            };
            (dist, sigma)
        })
        .reduce(|| (0.0, f64::INFINITY), |p, q| (p.0.max(q.0), p.1.min(q.1)))
}

fn check_shapes(a: &MatField, b: &MatField, m: usize, grid: &Grid) -> Result<()> {
    for f in [a, b] {
        if f.m() != m {
            return Err(Error::SizeMismatch { expected: m, got: f.m() });
        }
        crate::field_core::same_grid(grid, f.grid())?;
    }
    Ok(())
}

/// `‖∇A - AΩ - ∇⊥B‖₂`, every entry counted. With `A = id`, `B = 0` this is
/// `‖Ω‖₂` to the last bit.
pub fn gauge_relation_residual(a: &MatField, b: &MatField, omega: &Connection) -> Result<f64> {
    let (grid, m) = (omega.grid(), omega.m());
    check_shapes(a, b, m, grid)?;
    let ga: Vec<VecField> = a.entries().iter().map(grad).collect();
    let pb: Vec<VecField> = b.entries().iter().map(perp_grad).collect();
    Ok(matrix_vec_norm(grid, m, |i, j, k| {
        let (mut sx, mut sy) = (0.0, 0.0);
        for l in 0..m {
            let ail = a.entry(i, l).at(k);
            let [ox, oy] = omega.value(l, j, k);
            sx += ail * ox;
            sy += ail * oy;
        }
        let ([gx, gy], [px, py]) = (ga[i * m + j].at(k), pb[i * m + j].at(k));
        [gx - sx - px, gy - sy - py]
    }))
}

/// Rows `Σ_j A_ij ∇u^j + B_ij ∇⊥u^j` on interior nodes.
fn flux(u: &MapField, a: &MatField, b: &MatField) -> Vec<VecField> {
    let grid = u.grid();
    let m = u.m();
    let gu: Vec<VecField> = u.comps().iter().map(grad).collect();
    (0..m)
        .map(|i| {
            VecField::from_fn_nodes(grid, |k| {
                let (mut fx, mut fy) = (0.0, 0.0);
                for j in 0..m {
                    let ([gx, gy], aij, bij) = (gu[j].at(k), a.entry(i, j).at(k), b.entry(i, j).at(k));
                    fx += aij * gx - bij * gy;
                    fy += aij * gy + bij * gx;
                }
                [fx, fy]
            })
        })
        .collect()
}

/// `div(A∇u + B∇⊥u)` in L² and in the H⁻¹ proxy.
pub fn conservation_residual(u: &MapField, a: &MatField, b: &MatField) -> Result<Residual> {
    check_shapes(a, b, u.m(), u.grid())?;
    let r: Vec<ScalarField> = flux(u, a, b).iter().map(div).collect();
    residual_norms(&r)
}

/// `div(uⁱ∇uʲ - uʲ∇uⁱ)` over `i < j`, in L² and the H⁻¹ proxy. Vanishes in
/// the continuum for harmonic maps into the sphere.
pub fn shatah_residual(u: &MapField) -> Result<Residual> {
    let gu: Vec<VecField> = u.comps().iter().map(grad).collect();
    let m = u.m();
    let mut r = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let f = VecField::from_fn_nodes(u.grid(), |k| {
                let (ui, uj) = (u.comp(i).at(k), u.comp(j).at(k));
                let ([aix, aiy], [ajx, ajy]) = (gu[i].at(k), gu[j].at(k));
                [ui * ajx - uj * aix, ui * ajy - uj * aiy]
            });
            r.push(div(&f));
        }
    }
    residual_norms(&r)
}

/// Radii of the dyadic balls used for the oscillation scan.
pub const DYADIC_RADII: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];

#[derive(Clone, Debug)]
pub struct RegularityReport {
    /// `‖rem‖₂` of the row-wise Hodge decompositions of `A∇u`, combined.
    pub rem_norm: f64,
    /// Relative L² error of `∇u = A⁻¹(∇⊥E + ∇D)` (absolute when ∇u = 0).
    pub reconstruction_error: f64,
    pub min_singular: f64,
    /// `(r, osc)`: largest oscillation of u over balls of radius r centered
    /// in the half disk, for each dyadic r.
    pub oscillation: Vec<(f64, f64)>,
}

/// Hodge-decomposes `A∇u = ∇⊥E + ∇D` row by row and recovers ∇u from it.
pub fn regularity_demo(u: &MapField, a: &MatField, b: &MatField) -> Result<RegularityReport> {
    let grid = u.grid();
    let m = u.m();
    check_shapes(a, b, m, grid)?;
    let mut min_singular = f64::INFINITY;
    for &k in grid.interior() {
        let sigma = small::to_dmatrix(&a.at(k), m).singular_values().min();
        if !(sigma > 1e-12) {
            return Err(Error::Singular { node: k, sigma });
        }
        min_singular = min_singular.min(sigma);
    }
    let zero_b = MatField::zeros(grid, m, crate::field_core::MatVariant::General);
    let rows = flux(u, a, &zero_b);
    let hodge = rows.par_iter().map(hodge_decompose).collect::<Result<Vec<_>>>()?;
    let rem_norm = hodge.iter().map(|h| h.rem_norm.powi(2)).sum::<f64>().sqrt();
    let parts: Vec<(VecField, VecField)> = hodge.iter().map(|h| (perp_grad(&h.e), grad(&h.d))).collect();
    let gu: Vec<VecField> = u.comps().iter().map(grad).collect();
    let (mut err, mut total) = (0.0, 0.0);
    for &k in grid.interior() {
        let ainv = small::to_dmatrix(&a.at(k), m).try_inverse().ok_or(Error::Singular { node: k, sigma: 0.0 })?;
        for d in 0..2 {
            let w = nalgebra::DVector::from_iterator(m, parts.iter().map(|(p, q)| p.at(k)[d] + q.at(k)[d]));
            let rec = &ainv * w;
            for j in 0..m {
                let g = gu[j].at(k)[d];
                err += (rec[j] - g).powi(2);
                total += g * g;
            }
        }
    }
    let reconstruction_error = if total > 0.0 { (err / total).sqrt() } else { grid.h() * err.sqrt() };
    let oscillation = DYADIC_RADII.iter().map(|&r| (r, oscillation(u, r))).collect();
    Ok(RegularityReport { rem_norm, reconstruction_error, min_singular, oscillation })
}

/// Largest Euclidean spread (per-component range) of u over lattice balls of
/// radius r whose centers lie in the disk of radius 1/2.
pub fn oscillation(u: &MapField, r: f64) -> f64 {
    let grid = u.grid();
    let h = grid.h();
    let reach = (r / h).floor() as isize;
    let offsets: Vec<(isize, isize)> = (-reach..=reach)
        .flat_map(|di| (-reach..=reach).map(move |dj| (di, dj)))
        .filter(|&(di, dj)| ((di * di + dj * dj) as f64) * h * h <= r * r * (1.0 + 1e-12))
        .collect();
    let centers: Vec<usize> = grid
        .active()
        .iter()
        .copied()
        .filter(|&k| {
            let (x, y) = grid.coords(k);
            x * x + y * y <= 0.25
        })
        .collect();
    centers
        .par_iter()
        .map(|&c| {
            let m = u.m();
            let mut lo = vec![f64::INFINITY; m];
            let mut hi = vec![f64::NEG_INFINITY; m];
            for &(di, dj) in &offsets {
                let Some(k) = grid.offset(c, di, dj).filter(|&k| grid.is_active(k)) else { continue };
                for i in 0..m {
                    let v = u.comp(i).at(k);
                    lo[i] = lo[i].min(v);
                    hi[i] = hi[i].max(v);
                }
            }
            lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
        })
        .reduce(|| 0.0, f64::max)
}

/// Numerical form of the identity `div(A∇u + B∇⊥u) = A(Δu + Ω·∇u) + R·∇u`,
/// where `R = ∇A - AΩ - ∇⊥B`.
#[derive(Clone, Copy, Debug)]
pub struct PdeCertificate {
    /// `‖A(Δu + Ω·∇u)‖₂`.
    pub lhs: f64,
    /// `‖div(A∇u + B∇⊥u)‖₂`.
    pub conservation_l2: f64,
    pub gauge_residual: f64,
    pub sup_grad: f64,
}

impl PdeCertificate {
    pub fn bound(&self) -> f64 {
        self.conservation_l2 + self.gauge_residual * self.sup_grad
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.bound() + slack
    }
}

pub fn pde_certificate(u: &MapField, omega: &Connection, a: &MatField, b: &MatField) -> Result<PdeCertificate> {
    let grid = u.grid();
    let m = u.m();
    let defect = pde_defect(u, omega)?;
    let mut lhs = 0.0;
    for i in 0..m {
        let row = ScalarField::from_fn_nodes(grid, |k| (0..m).map(|j| a.entry(i, j).at(k) * defect[j].at(k)).sum());
        lhs += l2_norm(&row).powi(2);
    }
    let gu: Vec<VecField> = u.comps().iter().map(grad).collect();
    let sup_grad = grid
        .interior()
        .iter()
        .map(|&k| gu.iter().map(|g| g.at(k).iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(PdeCertificate {
        lhs: lhs.sqrt(),
        conservation_l2: conservation_residual(u, a, b)?.l2,
        gauge_residual: gauge_relation_residual(a, b, omega)?,
        sup_grad,
    })
}

/// Flux norm `‖A∇u + B∇⊥u‖₂`, used to scale residuals.
pub fn flux_norm(u: &MapField, a: &MatField, b: &MatField) -> f64 {
    flux(u, a, b).iter().map(|f| l2_norm_vec(f).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_core::{make_grid, Domain};
    use crate::gauge::{coulomb_gauge, GaugeOptions};
    use crate::targets::{omega_sphere, stereo_sphere_map};

    #[test]
    fn trivial_connection_gives_identity() {
        let g = make_grid(17, Domain::DiskMask).unwrap();
        let omega = Connection::zeros(&g, 3);
        let gauge = coulomb_gauge(&omega, &GaugeOptions::default()).unwrap();
        let r = build_ab(&omega, &gauge, &FixedPointOptions::default()).unwrap();
        assert_eq!(r.fp_iters, 1);
        for &k in g.active() {
            assert_eq!(r.a.at(k), small::identity(3));
            assert!(r.b.at(k).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sphere_fixture_satisfies_gauge_relation() {
        let g = make_grid(33, Domain::DiskMask).unwrap();
        let u = stereo_sphere_map(&g, 0.3, (0.0, 0.0)).unwrap();
        let omega = omega_sphere(&u).unwrap();
        let gauge = coulomb_gauge(&omega, &GaugeOptions::default()).unwrap();
        let r = build_ab(&omega, &gauge, &FixedPointOptions::default()).unwrap();
        let res = gauge_relation_residual(&r.a, &r.b, &omega).unwrap() / connection_norm(&omega);
        assert!(res < 5e-3, "{res}");
        assert!(r.a_hat_mean < 1e-12);
    }
}
