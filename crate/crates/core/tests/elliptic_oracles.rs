//! Poisson solvers against an independently assembled dense operator.

use std::sync::Arc;

use conslab_core::elliptic::*;
use conslab_core::field_core::*;
use nalgebra::{DMatrix, DVector};

/// `GᵀG` over all nodes, with `G` the centered gradient onto interior nodes.
fn dense_stiffness(g: &Grid) -> DMatrix<f64> {
    let (n, inv2h) = (g.n(), 0.5 / g.h());
    let mut k = DMatrix::zeros(g.len(), g.len());
    for &c in g.interior() {
        for s in [n, 1] {
            let (p, q) = (c + s, c - s);
            for (a, sa) in [(p, inv2h), (q, -inv2h)] {
                for (b, sb) in [(p, inv2h), (q, -inv2h)] {
                    k[(a, b)] += sa * sb;
                }
            }
        }
    }
    k
}

fn sub(k: &DMatrix<f64>, nodes: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(nodes.len(), nodes.len(), |a, b| k[(nodes[a], nodes[b])])
}

fn parity(g: &Grid, k: usize) -> usize {
    2 * ((k / g.n()) % 2) + (k % g.n()) % 2
}

fn rhs(g: &Arc<Grid>) -> ScalarField {
    ScalarField::from_fn(g, |x, y| (2.0 * x).sin() * y + x * x - 0.3 * y)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

const CG: SolverOptions = SolverOptions { tol: 1e-12, max_iter: None, dense_below: 0 };

#[test]
fn dirichlet_matches_dense_lu() {
    let g = make_grid(17, Domain::DiskMask).unwrap();
    let f = rhs(&g);
    let nodes: Vec<usize> = g.interior().iter().copied().filter(|&k| g.is_centered(k)).collect();
    let k = sub(&dense_stiffness(&g), &nodes);
    let b = DVector::from_iterator(nodes.len(), nodes.iter().map(|&q| -g.weight(q) * f.at(q)));
    let x = k.lu().solve(&b).unwrap();
    let mut want = vec![0.0; g.len()];
    for (u, &q) in nodes.iter().enumerate() {
        want[q] = x[u];
    }
    for opts in [SolverOptions::default(), CG] {
        let (phi, rep) = solve_dirichlet_with(&f, &opts).unwrap();
        assert!(max_diff(phi.values(), &want) < 1e-10, "{:?}", rep.solver);
    }
}

#[test]
fn neumann_matches_dense_lu_with_class_normalization() {
    let g = make_grid(17, Domain::DiskMask).unwrap();
    let f = rhs(&g);
    let nodes = g.active().to_vec();
    let mut k = sub(&dense_stiffness(&g), &nodes);
    let (mut sw, mut swf) = ([0.0; 4], [0.0; 4]);
    for &q in &nodes {
        sw[parity(&g, q)] += g.weight(q);
        swf[parity(&g, q)] += g.weight(q) * f.at(q);
    }
    for (a, &p) in nodes.iter().enumerate() {
        for (b, &q) in nodes.iter().enumerate() {
            if parity(&g, p) == parity(&g, q) {
                k[(a, b)] += g.weight(p) * g.weight(q);
            }
        }
    }
    let b = DVector::from_iterator(nodes.len(), nodes.iter().map(|&q| {
        let c = parity(&g, q);
        -g.weight(q) * (f.at(q) - swf[c] / sw[c])
    }));
    let x = k.lu().solve(&b).unwrap();
    let mut want = vec![0.0; g.len()];
    for (u, &q) in nodes.iter().enumerate() {
        want[q] = x[u];
    }
    for opts in [SolverOptions::default(), CG] {
        let (phi, rep) = solve_neumann_with(&f, &opts).unwrap();
        assert!(max_diff(phi.values(), &want) < 1e-10, "{:?}", rep.solver);
        assert!(rep.projection > 0.0);
    }
}

#[test]
fn dirichlet_converges_to_the_analytic_paraboloid() {
    let mut errs = Vec::new();
    for n in [33, 65, 129] {
        let g = make_grid(n, Domain::DiskMask).unwrap();
        let (phi, _) = solve_dirichlet(&ScalarField::constant(&g, 1.0)).unwrap();
        let err = g
            .interior()
            .iter()
            .map(|&k| {
                let (x, y) = g.coords(k);
                (phi.at(k) - (x * x + y * y - 1.0) / 4.0).abs()
            })
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[0] < 0.05 && errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
}

#[test]
fn hodge_remainder_is_orthogonal_to_both_ranges() {
    let g = make_grid(33, Domain::DiskMask).unwrap();
    let v = VecField::from_fn(&g, |x, y| ((3.0 * y).sin() + x * x, x * y - (2.0 * x).cos()));
    let hd = hodge_decompose(&v).unwrap();
    let scale = l2_norm_vec(&v);
    for &k in g.active() {
        if !g.is_centered(k) {
            assert_eq!(hd.e.at(k), 0.0);
        }
    }
    let (d, c) = (div_adjoint(&hd.rem), curl(&hd.rem));
    for &k in g.active() {
        assert!(d.at(k).abs() < 1e-7 * scale, "div at {k}: {}", d.at(k));
        if g.is_centered(k) {
            assert!(c.at(k).abs() < 1e-7 * scale, "curl at {k}: {}", c.at(k));
        }
    }
    let back = perp_grad(&hd.e).axpy(1.0, &grad(&hd.d)).unwrap().axpy(1.0, &hd.rem).unwrap();
    assert!(l2_norm_vec(&back.sub(&v).unwrap()) < 1e-12 * scale);
}

#[test]
fn gradient_fields_decompose_without_remainder() {
    let g = make_grid(65, Domain::DiskMask).unwrap();
    let d0 = ScalarField::from_fn(&g, |x, y| x * x * y + (x - y).sin());
    let v = grad(&d0);
    let hd = hodge_decompose(&v).unwrap();
    assert!(hd.rem_norm < 1e-8 * l2_norm_vec(&v), "{}", hd.rem_norm);
}
