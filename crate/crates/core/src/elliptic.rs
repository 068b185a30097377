//! Poisson problems and the discrete Hodge decomposition.
//!
//! The Laplacian is `-GᵀG` with `G` the centered gradient onto interior nodes,
//! i.e. the 5-point stencil with spacing 2h. With that choice `grad`,
//! `perp_grad` and their adjoints form an exact discrete complex:
//! every vector field splits as `∇⊥E + ∇D` up to solver tolerance, with `E`
//! vanishing off the fully centered nodes and `D` free on all active nodes.
//!
//! The stencil couples each node only to nodes of the same parity, so the
//! Neumann operator has one constant mode per parity class (four on the
//! disk). Neumann data are projected and solutions normalized per class.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field_core::{curl, div_adjoint, grad, l2_norm_vec, perp_grad, Grid, ScalarField, VecField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Dense Cholesky factorization.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative algebraic residual `‖b - Kx‖ / ‖b‖`.
    pub final_residual: f64,
    pub solver: SolverKind,
    /// Largest per-class weighted mean removed from Neumann data (0 for Dirichlet).
    pub projection: f64,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    /// Iteration cap; `None` means `20 n²`.
    pub max_iter: Option<usize>,
    /// Grids with fewer nodes per side use the dense solver.
    pub dense_below: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: None, dense_below: 33 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bc {
    Dirichlet,
    Neumann,
}

/// Sparse stiffness matrix `GᵀG` restricted to the unknowns of one problem.
struct Stiffness {
    nodes: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl Stiffness {
    fn new(grid: &Grid, bc: Bc) -> Self {
        let nodes: Vec<usize> = match bc {
            Bc::Dirichlet => grid.interior().iter().copied().filter(|&k| grid.is_centered(k)).collect(),
            Bc::Neumann => grid.active().to_vec(),
        };
        let mut pos = vec![usize::MAX; grid.len()];
        for (u, &k) in nodes.iter().enumerate() {
            pos[k] = u;
        }
        let c = 0.25 / (grid.h() * grid.h());
        let (mut row_ptr, mut cols, mut vals, mut diag) = (vec![0], Vec::new(), Vec::new(), Vec::new());
        for &k in &nodes {
            let mut d = 0.0;
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if grid.interior_at(k, di, dj).is_none() {
                    continue;
                }
                d += c;
                let far = grid.offset(k, 2 * di, 2 * dj).expect("interior nodes have active neighbours");
                if pos[far] != usize::MAX {
                    cols.push(pos[far]);
                    vals.push(-c);
                }
            }
            cols.push(pos[k]);
            vals.push(d);
            diag.push(d);
            row_ptr.push(cols.len());
        }
        Stiffness { nodes, row_ptr, cols, vals, diag }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            *o = (a..b).map(|e| self.vals[e] * x[self.cols[e]]).sum();
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[e])] += self.vals[e];
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Parity classes of the unknowns, as lists of unknown indices.
fn classes(grid: &Grid, nodes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); grid.n_components()];
    for (u, &k) in nodes.iter().enumerate() {
        out[grid.component(k)].push(u);
    }
    out.retain(|c| !c.is_empty());
    out
}

/// Removes the plain mean of `r` on every class.
fn project_out(r: &mut [f64], classes: &[Vec<usize>]) {
    for class in classes {
        let mean = class.iter().map(|&u| r[u]).sum::<f64>() / class.len() as f64;
        class.iter().for_each(|&u| r[u] -= mean);
    }
}

fn solve(f: &ScalarField, bc: Bc, opts: &SolverOptions) -> Result<(ScalarField, SolveReport)> {
    let grid: &Arc<Grid> = f.grid();
    let k = Stiffness::new(grid, bc);
    let classes = match bc {
        Bc::Dirichlet => Vec::new(),
        Bc::Neumann => classes(grid, &k.nodes),
    };
    let mut projection: f64 = 0.0;
    let mut rhs: Vec<f64> = k.nodes.iter().map(|&q| f.at(q)).collect();
    if bc == Bc::Neumann {
        for class in &classes {
            let wsum: f64 = class.iter().map(|&u| grid.weight(k.nodes[u])).sum();
            let mean = class.iter().map(|&u| grid.weight(k.nodes[u]) * rhs[u]).sum::<f64>() / wsum;
            projection = projection.max(mean.abs());
            class.iter().for_each(|&u| rhs[u] -= mean);
        }
    }
    // Δφ = f reads K φ = -w f in weak form
    let b: Vec<f64> = k.nodes.iter().zip(&rhs).map(|(&q, v)| -grid.weight(q) * v).collect();

    let (mut x, iterations, solver) = if grid.n() < opts.dense_below {
        (solve_dense(&k, &b, &classes), 1, SolverKind::Direct)
    } else {
        let cap = opts.max_iter.unwrap_or(20 * grid.n() * grid.n());
        let (x, it) = solve_cg(&k, &b, &classes, opts.tol, cap);
        (x, it, SolverKind::Cg)
    };

    for class in &classes {
        let wsum: f64 = class.iter().map(|&u| grid.weight(k.nodes[u])).sum();
        let mean = class.iter().map(|&u| grid.weight(k.nodes[u]) * x[u]).sum::<f64>() / wsum;
        class.iter().for_each(|&u| x[u] -= mean);
    }

    let bnorm = dot(&b, &b).sqrt();
    let mut kx = vec![0.0; k.len()];
    k.apply(&x, &mut kx);
    let rnorm = kx.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    let final_residual = if bnorm > 0.0 { rnorm / bnorm } else { rnorm };
    let report = SolveReport { iterations, final_residual, solver, projection };
    if !(final_residual <= opts.tol) {
        return Err(Error::SolverFailed(report));
    }
    let mut out = ScalarField::zeros(grid);
    for (u, &q) in k.nodes.iter().enumerate() {
        out.values_mut()[q] = x[u];
    }
    Ok((out, report))
}

fn solve_dense(k: &Stiffness, b: &[f64], classes: &[Vec<usize>]) -> Vec<f64> {
    let mut m = k.dense();
    // adding the kernel projector makes the Neumann matrix definite
    for class in classes {
        let s = 1.0 / class.len() as f64;
        for &a in class {
            for &c in class {
                m[(a, c)] += s;
            }
        }
    }
    let chol = m.cholesky().expect("stiffness matrix is positive definite after regularization");
    chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec()
}

fn solve_cg(k: &Stiffness, b: &[f64], classes: &[Vec<usize>], tol: f64, cap: usize) -> (Vec<f64>, usize) {
    let n = k.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (x, 0);
    }
    let target = tol * bnorm;
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    // restart from the true residual if the recurrence drifted below target
    for _restart in 0..4 {
        k.apply(&x, &mut ap);
        let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, a)| bi - a).collect();
        project_out(&mut r, classes);
        if dot(&r, &r).sqrt() <= target {
            break;
        }
        let mut z: Vec<f64> = r.iter().zip(&k.diag).map(|(ri, d)| ri / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < cap {
            iterations += 1;
            k.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            project_out(&mut r, classes);
            if dot(&r, &r).sqrt() <= 0.5 * target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] / k.diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if iterations >= cap {
            break;
        }
    }
    (x, iterations)
}

/// Solves `Δφ = f` on the fully centered nodes with `φ = 0` on every other node.
pub fn solve_dirichlet(f: &ScalarField) -> Result<(ScalarField, SolveReport)> {
    solve_dirichlet_with(f, &SolverOptions::default())
}

pub fn solve_dirichlet_with(f: &ScalarField, opts: &SolverOptions) -> Result<(ScalarField, SolveReport)> {
    solve(f, Bc::Dirichlet, opts)
}

/// Solves the natural-boundary problem `Δφ = f - mean(f)` on all active nodes,
/// with `φ` of weighted mean zero on each parity class.
pub fn solve_neumann(f: &ScalarField) -> Result<(ScalarField, SolveReport)> {
    solve_neumann_with(f, &SolverOptions::default())
}

pub fn solve_neumann_with(f: &ScalarField, opts: &SolverOptions) -> Result<(ScalarField, SolveReport)> {
    solve(f, Bc::Neumann, opts)
}

/// Independent Dirichlet solves, run in parallel.
pub fn solve_dirichlet_many(fs: &[ScalarField]) -> Result<Vec<ScalarField>> {
    fs.par_iter().map(|f| solve_dirichlet(f).map(|(x, _)| x)).collect()
}

/// Independent Neumann solves, run in parallel.
pub fn solve_neumann_many(fs: &[ScalarField]) -> Result<Vec<ScalarField>> {
    fs.par_iter().map(|f| solve_neumann(f).map(|(x, _)| x)).collect()
}

/// `V = ∇⊥E + ∇D + rem`.
#[derive(Clone, Debug)]
pub struct Hodge {
    /// Curl potential, zero off the fully centered nodes.
    pub e: ScalarField,
    /// Gradient potential, natural boundary condition.
    pub d: ScalarField,
    pub rem: VecField,
    pub rem_norm: f64,
    pub reports: [SolveReport; 2],
}

pub fn hodge_decompose(v: &VecField) -> Result<Hodge> {
    let (e, re) = solve_dirichlet(&curl(v))?;
    let (d, rd) = solve_neumann(&div_adjoint(v))?;
    let rem = v.sub(&perp_grad(&e))?.sub(&grad(&d))?;
    let rem_norm = l2_norm_vec(&rem);
    Ok(Hodge { e, d, rem, rem_norm, reports: [re, rd] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_core::{make_grid, Domain};

    #[test]
    fn cg_and_dense_agree() {
        let g = make_grid(33, Domain::DiskMask).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (2.0 * x).sin() * y + x * x);
        let dense = SolverOptions { dense_below: 100, ..Default::default() };
        for bc in [Bc::Dirichlet, Bc::Neumann] {
            let (a, ra) = solve(&f, bc, &SolverOptions::default()).unwrap();
            let (b, rb) = solve(&f, bc, &dense).unwrap();
            assert_eq!((ra.solver, rb.solver), (SolverKind::Cg, SolverKind::Direct));
            let diff = a.values().iter().zip(b.values()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-8, "{bc:?}: {diff}");
        }
    }

    #[test]
    fn neumann_kernel_has_four_classes_on_disk() {
        let g = make_grid(17, Domain::DiskMask).unwrap();
        let k = Stiffness::new(&g, Bc::Neumann);
        assert_eq!(classes(&g, &k.nodes).len(), 4);
    }
}
