//! Accelerated Bayesian inference of PDE coefficient fields on a desk-scale
//! reaction--diffusion testbed.
//!
//! The crate provides the full stack needed to run the pipeline end to end:
//!
//! * [`fem`] -- structured triangular meshes of the unit square, P1 Lagrange
//!   assembly into CSR matrices, Dirichlet elimination, and preconditioned
//!   conjugate gradients.
//! * [`prior`] -- a bi-Laplacian Gaussian random field prior with exact
//!   whitened sampling and pointwise-statistics estimation.
//! * [`reaction_diffusion`] -- the nonlinear forward model (cubic reaction
//!   term), Newton solves, the one-step residual-based error correction, and
//!   tangent/adjoint actions of the parameter-to-state map.
//! * [`surrogate`] -- POD output bases, derivative-informed input bases via a
//!   randomized eigensolver, a low-rank ResNet coefficient map, Adam, and
//!   stagewise training.
//! * [`bayes`] -- observation operator, Gaussian likelihood potential,
//!   synthetic data, pCN sampling, posterior means, and the posterior-error
//!   bound machinery (constants plus an importance-sampling KL estimate).
//! * [`costing`] -- solve counters and observed/asymptotic speedup reports.
//! * [`io`] -- the `FEFIELD`, `DIPNET`, `CHAIN`, and PGM file formats.

pub mod bayes;
pub mod costing;
pub mod error;
pub mod fem;
pub mod io;
pub mod prior;
pub mod reaction_diffusion;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
pub use fem::{
    assemble_mass, assemble_weighted_stiffness, apply_dirichlet, build_unit_square_mesh, cg_solve,
    field_norms, FieldRole, Mesh, NodalField, Preconditioner, SparseMatrix,
};
pub use prior::BiLaplacianPrior;
pub use reaction_diffusion::{ForwardSolution, ReactionDiffusion};
pub use rng::RngStream;
