use std::sync::Arc;

use crate::error::{Error, Result};

/// Shape of the computational domain inside the square [-1, 1]².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Nodes strictly inside the unit circle.
    DiskMask,
    /// Every non-edge node of the square.
    Square,
}

/// Role of a node in the masked lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Outside,
    /// Not interior, but 4-adjacent to an interior node.
    Boundary,
    Interior,
}

/// Masked Cartesian grid on [-1, 1]².
///
/// Node `(i, j)` sits at `x = (i - c) h`, `y = (j - c) h` with `c = (n - 1) / 2`
/// and is stored at flat index `i * n + j`.
///
/// Vector fields live on interior nodes (the "cells" of the gradient), scalar
/// potentials on active nodes (interior plus boundary). Nodes whose four
/// neighbours are all interior are "fully centered": every stencil there is
/// the centered one, and they are the unknowns of the Dirichlet problem.
#[derive(Debug)]
pub struct Grid {
    n: usize,
    h: f64,
    domain: Domain,
    kind: Vec<NodeKind>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    active: Vec<usize>,
    centered: Vec<bool>,
    weight: Vec<f64>,
    component: Vec<usize>,
    n_components: usize,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.domain == other.domain
    }
}

/// Builds a grid with `n` nodes per side.
pub fn make_grid(n: usize, domain: Domain) -> Result<Arc<Grid>> {
    if n % 2 == 0 {
        return Err(Error::InvalidGrid(format!("n must be odd, got {n}")));
    }
    if n < 17 {
        return Err(Error::InvalidGrid(format!("n must be at least 17, got {n}")));
    }
    Ok(Arc::new(Grid::build(n, domain)))
}

impl Grid {
    fn build(n: usize, domain: Domain) -> Grid {
        let c = ((n - 1) / 2) as i64;
        let h = 2.0 / (n - 1) as f64;
        let mut kind = vec![NodeKind::Outside; n * n];
        for i in 0..n {
            for j in 0..n {
                let inside = match domain {
                    // integer test keeps the mask exactly dihedral-symmetric
                    Domain::DiskMask => {
                        let (a, b) = (i as i64 - c, j as i64 - c);
                        a * a + b * b < c * c
                    }
                    Domain::Square => i > 0 && j > 0 && i < n - 1 && j < n - 1,
                };
                if inside {
                    kind[i * n + j] = NodeKind::Interior;
                }
            }
        }
        let mut grid = Grid {
            n,
            h,
            domain,
            kind,
            interior: Vec::new(),
            boundary: Vec::new(),
            active: Vec::new(),
            centered: vec![false; n * n],
            weight: vec![0.0; n * n],
            component: vec![usize::MAX; n * n],
            n_components: 0,
        };
        for k in 0..n * n {
            if grid.kind[k] == NodeKind::Interior {
                continue;
            }
            if grid.neighbours4(k).any(|q| grid.kind[q] == NodeKind::Interior) {
                grid.kind[k] = NodeKind::Boundary;
            }
        }
        for k in 0..n * n {
            match grid.kind[k] {
                NodeKind::Interior => grid.interior.push(k),
                NodeKind::Boundary => grid.boundary.push(k),
                NodeKind::Outside => continue,
            }
            grid.active.push(k);
            let cells = grid.neighbours4(k).filter(|&q| grid.is_interior(q)).count();
            grid.weight[k] = cells as f64 / 4.0;
            grid.centered[k] = grid.kind[k] == NodeKind::Interior && cells == 4;
        }
        grid.label_components();
        grid
    }

    /// Connected components of the graph linking `p - e` and `p + e` across
    /// every interior node `p`; the Neumann kernel is spanned by their indicators.
    fn label_components(&mut self) {
        let mut next = 0;
        let mut stack = Vec::new();
        for &start in &self.active {
            if self.component[start] != usize::MAX {
                continue;
            }
            self.component[start] = next;
            stack.push(start);
            while let Some(q) = stack.pop() {
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (Some(mid), Some(far)) = (self.offset(q, di, dj), self.offset(q, 2 * di, 2 * dj))
                    else {
                        continue;
                    };
                    if self.is_interior(mid) && self.component[far] == usize::MAX {
                        self.component[far] = next;
                        stack.push(far);
                    }
                }
            }
            next += 1;
        }
        self.n_components = next;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kind(&self, k: usize) -> NodeKind {
        self.kind[k]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Interior and boundary nodes, in increasing index order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.kind[k] == NodeKind::Interior
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.kind[k] != NodeKind::Outside
    }

    /// Interior node whose four neighbours are interior as well.
    pub fn is_centered(&self, k: usize) -> bool {
        self.centered[k]
    }

    /// Dual-cell area of an active node as a fraction of h²: a quarter per
    /// adjacent interior node. Equals 1 at fully centered nodes.
    pub fn weight(&self, k: usize) -> f64 {
        self.weight[k]
    }

    pub(crate) fn component(&self, k: usize) -> usize {
        self.component[k]
    }

    pub(crate) fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let c = ((self.n - 1) / 2) as f64;
        let (i, j) = (k / self.n, k % self.n);
        ((i as f64 - c) * self.h, (j as f64 - c) * self.h)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Node at lattice offset `(di, dj)` from `k`, if it lies on the lattice.
    pub fn offset(&self, k: usize, di: isize, dj: isize) -> Option<usize> {
        let n = self.n as isize;
        let (i, j) = ((k / self.n) as isize + di, (k % self.n) as isize + dj);
        (i >= 0 && j >= 0 && i < n && j < n).then(|| (i * n + j) as usize)
    }

    /// Interior node at offset `(di, dj)` from `k`, if any.
    pub(crate) fn interior_at(&self, k: usize, di: isize, dj: isize) -> Option<usize> {
        self.offset(k, di, dj).filter(|&q| self.is_interior(q))
    }

    fn neighbours4(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .filter_map(move |(di, dj)| self.offset(k, di, dj))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_grid_has_four_neumann_components() {
        let g = make_grid(17, Domain::DiskMask).unwrap();
        assert_eq!(g.n_components(), 4);
        for &k in g.active() {
            assert!(g.weight(k) > 0.0);
        }
    }

    #[test]
    fn boundary_nodes_touch_interior() {
        let g = make_grid(33, Domain::DiskMask).unwrap();
        for &k in g.boundary() {
            assert!(!g.is_interior(k));
            assert!(g.neighbours4(k).any(|q| g.is_interior(q)));
        }
    }

    #[test]
    fn interior_nodes_have_active_neighbours() {
        let g = make_grid(17, Domain::Square).unwrap();
        for &k in g.interior() {
            assert!(g.neighbours4(k).all(|q| g.is_active(q)));
        }
    }
}
