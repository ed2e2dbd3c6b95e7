//! Shared problem objects assembled from the configuration.

use std::sync::Arc;

use anyhow::{Context, Result};
use opcorrect_core::bayes::{build_observation, ObservationSetup};
use opcorrect_core::fem::{
    assemble_mass, assemble_weighted_stiffness, build_unit_square_mesh, FieldRole, Mesh,
    NodalField, SparseMatrix,
};
use opcorrect_core::prior::{build_prior, BiLaplacianPrior};
use opcorrect_core::reaction_diffusion::ReactionDiffusion;

use crate::config::RunConfig;

pub struct Desk {
    pub mesh: Arc<Mesh>,
    pub model: ReactionDiffusion,
    pub prior: BiLaplacianPrior,
    pub mass: SparseMatrix,
    /// Unit-coefficient stiffness for H1 norms.
    pub stiffness: SparseMatrix,
    pub obs: ObservationSetup,
}

impl Desk {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let mesh = Arc::new(
            build_unit_square_mesh(cfg.mesh_nx, cfg.mesh_ny).context("building mesh")?,
        );
        let model = ReactionDiffusion::new(&mesh);
        let mean = NodalField::constant(mesh.n_nodes(), cfg.prior_mean, FieldRole::Parameter);
        let prior = build_prior(
            &mesh,
            cfg.prior_alpha,
            cfg.prior_beta,
            cfg.prior_gamma,
            mean,
        )
        .context("building prior")?;
        let mass = assemble_mass(&mesh);
        let ones = NodalField::constant(mesh.n_nodes(), 1.0, FieldRole::Parameter);
        let stiffness = assemble_weighted_stiffness(&mesh, &ones)?;
        let obs = build_observation(&mesh, &mass, cfg.obs_grid, cfg.obs_radius)
            .context("building observation operator")?;
        Ok(Self {
            mesh,
            model,
            prior,
            mass,
            stiffness,
            obs,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }
}
