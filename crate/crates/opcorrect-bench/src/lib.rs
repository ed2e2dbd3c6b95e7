//! Shared fixtures for the benchmark targets.

use std::sync::Arc;

use opcorrect_core::fem::{assemble_mass, build_unit_square_mesh, FieldRole, Mesh, NodalField,
    SparseMatrix};
use opcorrect_core::prior::{build_prior, BiLaplacianPrior};
use opcorrect_core::reaction_diffusion::ReactionDiffusion;
use opcorrect_core::rng::RngStream;
use opcorrect_core::surrogate::{
    compute_derivative_basis_with_solutions, compute_pod, train_adaptive, ArchConfig,
    ReducedBasis, ResNetSurrogate, TrainingSet,
};

pub struct Fixture {
    pub mesh: Arc<Mesh>,
    pub model: ReactionDiffusion,
    pub prior: BiLaplacianPrior,
    pub mass: SparseMatrix,
    pub sample: NodalField,
    pub basis: ReducedBasis,
    pub net: ResNetSurrogate,
}

/// Deterministic desk fixture with a small trained surrogate.
pub fn fixture(n: usize) -> Fixture {
    use opcorrect_core::reaction_diffusion::{NEWTON_MAX_ITERS, NEWTON_RTOL};
    let mesh = Arc::new(build_unit_square_mesh(n, n).unwrap());
    let model = ReactionDiffusion::new(&mesh);
    let mean = NodalField::zeros(mesh.n_nodes(), FieldRole::Parameter);
    let prior = build_prior(&mesh, 0.08, 2.0, None, mean).unwrap();
    let mass = assemble_mass(&mesh);

    let mut rng = RngStream::new(99, 0);
    let pairs: Vec<(NodalField, NodalField)> = (0..24)
        .map(|_| {
            let m = prior.sample(&mut rng).unwrap();
            let u = model
                .solve_forward(&m, NEWTON_RTOL, NEWTON_MAX_ITERS)
                .unwrap()
                .u;
            (m, u)
        })
        .collect();
    let snapshots: Vec<NodalField> = pairs.iter().map(|(_, u)| u.clone()).collect();
    let pod = compute_pod(&snapshots, &mass, 8).unwrap();
    let derivative =
        compute_derivative_basis_with_solutions(&model, &pairs[..8], 8, 6, &mut rng).unwrap();
    let mut basis = ReducedBasis::new(derivative, pod, prior.mean().clone());
    let ms: Vec<NodalField> = pairs.iter().map(|(m, _)| m.clone()).collect();
    basis.fit_input_scales(&mass, &ms).unwrap();

    let inputs: Vec<Vec<f64>> = ms
        .iter()
        .map(|m| basis.encode_input(&mass, m).unwrap())
        .collect();
    let outputs: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|u| basis.encode_output(&mass, u).unwrap())
        .collect();
    let set = TrainingSet::with_heldout(inputs, outputs, 0.1, &mut rng).unwrap();
    let arch = ArchConfig {
        r_in: 8,
        r_out: 8,
        layer_rank: 4,
        layers: 3,
        lr: 1e-3,
        batch: 8,
        epochs_per_stage: 10,
    };
    let net = train_adaptive(&set, &arch, &mut rng).unwrap().net;
    let sample = prior.sample(&mut rng).unwrap();

    Fixture {
        mesh,
        model,
        prior,
        mass,
        sample,
        basis,
        net,
    }
}
