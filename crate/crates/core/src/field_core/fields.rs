use std::sync::Arc;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Tolerance on `|u| = 1` for unit-sphere constrained maps.
pub const SPHERE_TOL: f64 = 1e-12;
/// Tolerance on `PᵀP = id` for rotation-valued matrix fields.
pub const ROTATION_TOL: f64 = 1e-10;

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Real value per lattice node. Nodes outside the active set hold 0.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self::from_fn(grid, |_, _| c)
    }

    /// Samples `f(x, y)` at every active node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for &k in grid.active() {
            let (x, y) = grid.coords(k);
            values[k] = f(x, y);
        }
        ScalarField { grid: grid.clone(), values }
    }

    /// Evaluates `f(k)` at every interior node.
    pub(crate) fn from_fn_nodes(grid: &Arc<Grid>, f: impl Fn(usize) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for &k in grid.interior() {
            values[k] = f(k);
        }
        ScalarField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Keeps values on interior nodes only.
    pub fn restrict_interior(&self) -> Self {
        let mut out = Self::zeros(&self.grid);
        for &k in self.grid.interior() {
            out.values[k] = self.values[k];
        }
        out
    }
}

/// Two-component field, e.g. a gradient. Lives on interior nodes.
#[derive(Clone, Debug)]
pub struct VecField {
    pub vx: ScalarField,
    pub vy: ScalarField,
}

impl VecField {
    pub fn new(vx: ScalarField, vy: ScalarField) -> Result<Self> {
        same_grid(vx.grid(), vy.grid())?;
        Ok(VecField { vx, vy })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        VecField { vx: ScalarField::zeros(grid), vy: ScalarField::zeros(grid) }
    }

    /// Samples `f(x, y)` at every interior node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut out = Self::zeros(grid);
        for &k in grid.interior() {
            let (x, y) = grid.coords(k);
            let (a, b) = f(x, y);
            out.vx.values[k] = a;
            out.vy.values[k] = b;
        }
        out
    }

    /// Evaluates `f(k)` at every interior node.
    pub(crate) fn from_fn_nodes(grid: &Arc<Grid>, f: impl Fn(usize) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for &k in grid.interior() {
            let [a, b] = f(k);
            out.vx.values[k] = a;
            out.vy.values[k] = b;
        }
        out
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.vx.grid()
    }

    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.vx.values[k], self.vy.values[k]]
    }

    pub fn scale(&self, s: f64) -> Self {
        VecField { vx: self.vx.scale(s), vy: self.vy.scale(s) }
    }

    pub fn axpy(&self, s: f64, other: &VecField) -> Result<Self> {
        Ok(VecField { vx: self.vx.axpy(s, &other.vx)?, vy: self.vy.axpy(s, &other.vy)? })
    }

    pub fn sub(&self, other: &VecField) -> Result<Self> {
        self.axpy(-1.0, other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    None,
    UnitSphere,
}

/// Map from the grid into ℝᵐ.
#[derive(Clone, Debug)]
pub struct MapField {
    comps: Vec<ScalarField>,
    constraint: Constraint,
}

impl MapField {
    pub fn new(comps: Vec<ScalarField>, constraint: Constraint) -> Result<Self> {
        let Some(first) = comps.first() else {
            return Err(Error::InvalidParameter("map needs at least one component".into()));
        };
        for c in &comps[1..] {
            same_grid(first.grid(), c.grid())?;
        }
        let map = MapField { comps, constraint };
        if constraint == Constraint::UnitSphere {
            for &k in map.grid().interior() {
                let norm = map.point(k).iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > SPHERE_TOL {
                    return Err(Error::NotOnSphere { node: k, norm });
                }
            }
        }
        Ok(map)
    }

    pub fn m(&self) -> usize {
        self.comps.len()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.comps[0].grid()
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c.at(k)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatVariant {
    General,
    Rotation,
    Antisym,
}

/// m×m matrix per node, entries stored row-major.
#[derive(Clone, Debug)]
pub struct MatField {
    m: usize,
    entries: Vec<ScalarField>,
    variant: MatVariant,
}

impl MatField {
    pub fn general(m: usize, entries: Vec<ScalarField>) -> Result<Self> {
        if entries.len() != m * m || m == 0 {
            return Err(Error::SizeMismatch { expected: m * m, got: entries.len() });
        }
        for e in &entries[1..] {
            same_grid(entries[0].grid(), e.grid())?;
        }
        Ok(MatField { m, entries, variant: MatVariant::General })
    }

    /// Checks `PᵀP = id` at every active node.
    pub fn rotation(m: usize, entries: Vec<ScalarField>) -> Result<Self> {
        let mut field = Self::general(m, entries)?;
        if let Some((node, defect)) = field.orthogonality_defect() {
            if defect > ROTATION_TOL {
                return Err(Error::NotRotation { node, defect });
            }
        }
        field.variant = MatVariant::Rotation;
        Ok(field)
    }

    /// Builds an antisymmetric field from its strictly upper entries, listed
    /// row by row; the lower triangle is the exact negation.
    pub fn antisym_from_upper(m: usize, upper: Vec<ScalarField>) -> Result<Self> {
        let expected = m * m.saturating_sub(1) / 2;
        if upper.len() != expected || m == 0 {
            return Err(Error::SizeMismatch { expected, got: upper.len() });
        }
        let grid = upper.first().map(|f| f.grid().clone());
        let grid = match grid {
            Some(g) => g,
            None => return Err(Error::InvalidParameter("antisymmetric 1×1 field has no grid".into())),
        };
        let mut entries = vec![ScalarField::zeros(&grid); m * m];
        let mut it = upper.into_iter();
        for i in 0..m {
            for j in i + 1..m {
                let f = it.next().unwrap_or_else(|| ScalarField::zeros(&grid));
                same_grid(&grid, f.grid())?;
                entries[j * m + i] = f.scale(-1.0);
                entries[i * m + j] = f;
            }
        }
        Ok(MatField { m, entries, variant: MatVariant::Antisym })
    }

    pub fn identity(grid: &Arc<Grid>, m: usize) -> Self {
        let entries = (0..m * m)
            .map(|k| ScalarField::constant(grid, if k / m == k % m { 1.0 } else { 0.0 }))
            .collect();
        MatField { m, entries, variant: MatVariant::Rotation }
    }

    pub fn zeros(grid: &Arc<Grid>, m: usize, variant: MatVariant) -> Self {
        MatField { m, entries: vec![ScalarField::zeros(grid); m * m], variant }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn variant(&self) -> MatVariant {
        self.variant
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.entries[0].grid()
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    /// Row-major matrix at node `k`.
    pub fn at(&self, k: usize) -> Vec<f64> {
        self.entries.iter().map(|e| e.at(k)).collect()
    }

    /// Same entries under the general variant, for deliberate editing.
    pub fn into_general(self) -> Vec<ScalarField> {
        self.entries
    }

    /// Largest `max |PᵀP - id|` over active nodes, with its node.
    pub fn orthogonality_defect(&self) -> Option<(usize, f64)> {
        let m = self.m;
        let mut worst: Option<(usize, f64)> = None;
        for &k in self.grid().active() {
            let p = self.at(k);
            let mut d: f64 = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let s: f64 = (0..m).map(|l| p[l * m + i] * p[l * m + j]).sum();
                    d = d.max((s - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
            if worst.map_or(true, |(_, w)| d > w) {
                worst = Some((k, d));
            }
        }
        worst
    }
}

/// so(m)-valued 1-form. Only the entries above the diagonal are stored;
/// `Ω^j_i = -Ω^i_j` is produced on access.
#[derive(Clone, Debug)]
pub struct Connection {
    m: usize,
    upper: Vec<VecField>,
}

impl Connection {
    /// `upper` lists `Ω^i_j` for `i < j`, row by row.
    pub fn from_upper(m: usize, upper: Vec<VecField>) -> Result<Self> {
        let expected = m * (m.saturating_sub(1)) / 2;
        if upper.len() != expected || expected == 0 {
            return Err(Error::SizeMismatch { expected, got: upper.len() });
        }
        for v in &upper[1..] {
            same_grid(upper[0].grid(), v.grid())?;
        }
        Ok(Connection { m, upper })
    }

    /// Evaluates `Ω^i_j` for `i < j` at every interior node.
    pub fn from_node_fn(grid: &Arc<Grid>, m: usize, f: impl Fn(usize, usize, usize) -> [f64; 2]) -> Result<Self> {
        let mut upper = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                let mut v = VecField::zeros(grid);
                for &k in grid.interior() {
                    let [a, b] = f(i, j, k);
                    v.vx.values[k] = a;
                    v.vy.values[k] = b;
                }
                upper.push(v);
            }
        }
        Self::from_upper(m, upper)
    }

    pub fn zeros(grid: &Arc<Grid>, m: usize) -> Self {
        Connection { m, upper: vec![VecField::zeros(grid); m * (m - 1) / 2] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.upper[0].grid()
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.m);
        i * self.m - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Stored entry `Ω^i_j`, `i < j`.
    pub fn upper(&self, i: usize, j: usize) -> &VecField {
        &self.upper[self.slot(i, j)]
    }

    pub fn upper_entries(&self) -> &[VecField] {
        &self.upper
    }

    /// `Ω^i_j` at node `k` for any `i, j`.
    pub fn value(&self, i: usize, j: usize, k: usize) -> [f64; 2] {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.upper(i, j).at(k),
            Ordering::Greater => {
                let [a, b] = self.upper(j, i).at(k);
                [-a, -b]
            }
            Ordering::Equal => [0.0, 0.0],
        }
    }

    /// Owned copy of `Ω^i_j`.
    pub fn entry(&self, i: usize, j: usize) -> VecField {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.upper(i, j).clone(),
            Ordering::Greater => self.upper(j, i).scale(-1.0),
            Ordering::Equal => VecField::zeros(self.grid()),
        }
    }
}
