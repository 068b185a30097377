//! Pointwise algebra and discrete norms.
//!
//! Scalar fields are integrated with the dual-area weights of the active
//! nodes; vector fields live on interior nodes and carry weight h² each.

use super::fields::{same_grid, Connection, Constraint, MapField, MatField, MatVariant, ScalarField, VecField};
use super::ops::grad;
use super::small::{self, NodeMats};
use crate::error::{Error, Result};

pub fn matmul(a: &MatField, b: &MatField) -> Result<MatField> {
    if a.m() != b.m() {
        return Err(Error::SizeMismatch { expected: a.m(), got: b.m() });
    }
    same_grid(a.grid(), b.grid())?;
    let (m, grid) = (a.m(), a.grid());
    let (pa, pb) = (NodeMats::from_field(a), NodeMats::from_field(b));
    let mut out = NodeMats::zeros(grid.len(), m);
    for k in 0..grid.len() {
        out.set(k, &small::mul(pa.get(k), pb.get(k), m));
    }
    let entries = out.entries(grid);
    if a.variant() == MatVariant::Rotation && b.variant() == MatVariant::Rotation {
        MatField::rotation(m, entries)
    } else {
        MatField::general(m, entries)
    }
}

pub fn transpose(a: &MatField) -> MatField {
    let m = a.m();
    match a.variant() {
        MatVariant::Antisym => {
            let upper = (0..m)
                .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                .map(|(i, j)| a.entry(j, i).clone())
                .collect();
            MatField::antisym_from_upper(m, upper).expect("shape preserved")
        }
        variant => {
            let entries = (0..m * m).map(|e| a.entry(e % m, e / m).clone()).collect();
            let t = MatField::general(m, entries).expect("shape preserved");
            if variant == MatVariant::Rotation {
                MatField::rotation(m, t.into_general()).expect("transpose of a rotation")
            } else {
                t
            }
        }
    }
}

/// `(M u)^i = Σ_j M_ij u^j` nodewise.
pub fn matvec(a: &MatField, u: &MapField) -> Result<MapField> {
    if a.m() != u.m() {
        return Err(Error::SizeMismatch { expected: a.m(), got: u.m() });
    }
    same_grid(a.grid(), u.grid())?;
    let m = a.m();
    let mut comps = Vec::with_capacity(m);
    for i in 0..m {
        let mut acc = ScalarField::zeros(a.grid());
        for j in 0..m {
            acc = acc.axpy(1.0, &mul_fields(a.entry(i, j), u.comp(j)))?;
        }
        comps.push(acc);
    }
    MapField::new(comps, Constraint::None)
}

fn mul_fields(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let values = a.values().iter().zip(b.values()).map(|(x, y)| x * y).collect();
    ScalarField::new(a.grid(), values).expect("same grid")
}

/// `(Ω·∇u)^i = Σ_j Ω^i_j · ∇u^j` on interior nodes.
pub fn connection_apply(omega: &Connection, u: &MapField) -> Result<MapField> {
    if omega.m() != u.m() {
        return Err(Error::SizeMismatch { expected: omega.m(), got: u.m() });
    }
    same_grid(omega.grid(), u.grid())?;
    let m = u.m();
    let grid = u.grid();
    let grads: Vec<VecField> = u.comps().iter().map(grad).collect();
    let mut comps = vec![ScalarField::zeros(grid); m];
    for &k in grid.interior() {
        for (i, comp) in comps.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, gj) in grads.iter().enumerate() {
                let [ox, oy] = omega.value(i, j, k);
                s += ox * gj.vx.at(k) + oy * gj.vy.at(k);
            }
            comp.values_mut()[k] = s;
        }
    }
    MapField::new(comps, Constraint::None)
}

/// Nodewise matrix exponential of an antisymmetric field.
pub fn exp_antisym(xi: &MatField) -> Result<MatField> {
    if xi.variant() != MatVariant::Antisym {
        return Err(Error::NotAntisymmetric);
    }
    let (m, grid) = (xi.m(), xi.grid());
    let packed = NodeMats::from_field(xi);
    let mut out = NodeMats::identity(grid, m);
    for &k in grid.active() {
        out.set(k, &small::expm(packed.get(k), m));
    }
    MatField::rotation(m, out.entries(grid))
}

/// `(h² Σ w f²)^½` over active nodes.
pub fn l2_norm(f: &ScalarField) -> f64 {
    let g = f.grid();
    let s: f64 = g.active().iter().map(|&k| g.weight(k) * f.at(k) * f.at(k)).sum();
    g.h() * s.sqrt()
}

/// `(h² Σ |V|²)^½` over interior nodes.
pub fn l2_norm_vec(v: &VecField) -> f64 {
    let g = v.grid();
    let s: f64 = g
        .interior()
        .iter()
        .map(|&k| {
            let [a, b] = v.at(k);
            a * a + b * b
        })
        .sum();
    g.h() * s.sqrt()
}

/// Max of |f| over active nodes.
pub fn sup_norm(f: &ScalarField) -> f64 {
    f.grid().active().iter().map(|&k| f.at(k).abs()).fold(0.0, f64::max)
}

pub fn w12_seminorm(f: &ScalarField) -> f64 {
    l2_norm_vec(&grad(f))
}

/// `h² Σ w f` over active nodes.
pub fn integrate(f: &ScalarField) -> f64 {
    let g = f.grid();
    let s: f64 = g.active().iter().map(|&k| g.weight(k) * f.at(k)).sum();
    g.h() * g.h() * s
}

/// L² norm of an m×m matrix of vector fields given entrywise, summed over
/// all `(i, j)` in row-major order.
pub(crate) fn matrix_vec_norm(
    grid: &super::Grid,
    m: usize,
    value: impl Fn(usize, usize, usize) -> [f64; 2],
) -> f64 {
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            for &k in grid.interior() {
                let [a, b] = value(i, j, k);
                s += a * a + b * b;
            }
        }
    }
    grid.h() * s.sqrt()
}

/// `‖Ω‖₂` with every entry `Ω^i_j` counted (so each stored pair twice).
pub fn connection_norm(omega: &Connection) -> f64 {
    matrix_vec_norm(omega.grid(), omega.m(), |i, j, k| omega.value(i, j, k))
}

/// `∫|Ω|²`.
pub fn connection_energy(omega: &Connection) -> f64 {
    connection_norm(omega).powi(2)
}

/// `(Σ_ij ‖∇M_ij‖²)^½`.
pub fn mat_w12_seminorm(a: &MatField) -> f64 {
    a.entries().iter().map(|e| w12_seminorm(e).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_core::{make_grid, Domain};

    #[test]
    fn integrate_constant_approximates_disk_area() {
        let g = make_grid(129, Domain::DiskMask).unwrap();
        let area = integrate(&ScalarField::constant(&g, 1.0));
        assert!((area - std::f64::consts::PI).abs() < 0.05);
    }

    #[test]
    fn dual_weights_sum_to_interior_count() {
        // each interior node hands a quarter of its cell to each neighbour
        let g = make_grid(17, Domain::Square).unwrap();
        let area = integrate(&ScalarField::constant(&g, 1.0));
        assert_eq!(area, (g.interior().len() as f64) * g.h() * g.h());
    }
}
