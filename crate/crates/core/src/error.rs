use thiserror::Error;

use crate::elliptic::SolveReport;
use crate::gauge::GaugeResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("map is not unit-sphere valued at node {node} (|u| = {norm})")]
    NotOnSphere { node: usize, norm: f64 },

    #[error("operation requires a unit-sphere constrained map")]
    ConstraintMissing,

    #[error("matrix field is not a rotation at node {node} (defect {defect:e})")]
    NotRotation { node: usize, defect: f64 },

    #[error("matrix field must have the antisymmetric variant")]
    NotAntisymmetric,

    #[error("normal field is not unit length at node {node} (|n| = {norm})")]
    NonUnitNormal { node: usize, norm: f64 },

    #[error("geometry callback failed at node {node}: {message}")]
    Callback { node: usize, message: String },

    #[error("map comes within {angle:.4} rad of a reference pole at node {node}")]
    PoleMargin { node: usize, angle: f64 },

    #[error("matrix is singular at node {node} (smallest singular value {sigma:e})")]
    Singular { node: usize, sigma: f64 },

    #[error("linear solver did not converge: {0:?}")]
    SolverFailed(SolveReport),

    #[error(
        "connection energy {energy:.4e} exceeds the smallness threshold {threshold:.4e}; \
         the Coulomb gauge is only guaranteed for small energy (set force to override)"
    )]
    EnergyTooLarge { energy: f64, threshold: f64 },

    #[error("gauge descent hit the iteration cap after {} iterations", .0.iterations)]
    GaugeNotConverged(Box<GaugeResult>),

    #[error(
        "fixed-point iteration diverged at sweep {sweep} (update {update:.3e}); \
         the construction needs a small connection energy"
    )]
    FixedPointDiverged { sweep: usize, update: f64 },

    #[error("fixed-point iteration did not converge in {sweeps} sweeps (update {update:.3e})")]
    FixedPointNotConverged { sweeps: usize, update: f64 },

    #[error("Coulomb frame rotation did not converge in {iterations} steps (residual {residual:.3e})")]
    FrameNotConverged { iterations: usize, residual: f64 },

    #[error("unknown generator family '{0}'")]
    UnknownFamily(String),

    #[error("slope fit needs at least 3 grid sizes, got {0}")]
    TooFewSizes(usize),
}
