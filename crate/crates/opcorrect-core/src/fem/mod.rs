//! Structured P1 finite elements on the unit square.

mod assemble;
mod cg;
mod field;
mod mesh;
pub mod quadrature;
mod sparse;

pub use assemble::{
    apply_dirichlet, assemble_boundary_mass, assemble_exp_weighted_stiffness, assemble_mass,
    assemble_weighted_stiffness,
};
pub use cg::{cg_solve, cg_solve_traced, CgSolution, Preconditioner};
pub use field::{FieldRole, NodalField};
pub use mesh::{build_unit_square_mesh, Mesh, TriGeometry};
pub use sparse::SparseMatrix;

/// Mass and `kappa = 1` stiffness norms of a nodal field:
/// `l2 = sqrt(f' M f)`, `h1 = sqrt(f' M f + f' K f)`.
pub fn field_norms(f: &NodalField, mass: &SparseMatrix, stiffness: &SparseMatrix) -> (f64, f64) {
    let l2sq = mass.quadratic_form(f.values());
    let ksq = stiffness.quadratic_form(f.values());
    (l2sq.max(0.0).sqrt(), (l2sq + ksq).max(0.0).sqrt())
}
