//! Grid, field types and the discrete operators acting on them.

mod algebra;
mod fields;
mod grid;
mod ops;
pub(crate) mod small;

pub use algebra::{
    connection_apply, connection_energy, connection_norm, exp_antisym, integrate, l2_norm, l2_norm_vec,
    mat_w12_seminorm, matmul, matvec, sup_norm, transpose, w12_seminorm,
};
pub(crate) use algebra::matrix_vec_norm;
pub(crate) use fields::same_grid;
pub use fields::{
    Connection, Constraint, MapField, MatField, MatVariant, ScalarField, VecField, ROTATION_TOL, SPHERE_TOL,
};
pub use grid::{make_grid, Domain, Grid, NodeKind};
pub use ops::{curl, curl_adjoint, div, div_adjoint, grad, jacobian, laplacian, perp_grad};
