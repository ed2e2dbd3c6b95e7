//! Cross-checks of the library against independent oracle implementations:
//! dense assembly on a different quadrature rule, dense factorizations,
//! fixed-point forward solves, and dense eigensolvers.

mod common;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use opcorrect_core::fem::{
    apply_dirichlet, assemble_exp_weighted_stiffness, assemble_mass, assemble_weighted_stiffness,
    build_unit_square_mesh, cg_solve_traced, FieldRole, Mesh, NodalField, Preconditioner,
};
use opcorrect_core::prior::build_prior;
use opcorrect_core::reaction_diffusion::{
    ReactionDiffusion, NEWTON_MAX_ITERS, NEWTON_RTOL,
};
use opcorrect_core::rng::RngStream;
use opcorrect_core::surrogate::{
    compute_derivative_basis_with_solutions, compute_pod,
};

use common::{
    dense_interpolant_l2sq, dense_residual, dense_stiffness, l2, l2_diff, picard_solve,
};

fn max_rel_diff(sparse: &opcorrect_core::fem::SparseMatrix, dense: &DMatrix<f64>) -> f64 {
    let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for r in 0..sparse.n_rows() {
        for c in 0..sparse.n_cols() {
            worst = worst.max((sparse.get(r, c) - dense[(r, c)]).abs());
        }
    }
    worst / scale
}

#[test]
fn raw_weighted_stiffness_matches_dense_assembly() {
    // the P1 coefficient makes every integrand a polynomial both rules
    // integrate exactly; agreement is to roundoff at any amplitude
    let mesh = build_unit_square_mesh(8, 8).unwrap();
    let mut rng = RngStream::new(41, 0);
    let kappa = NodalField::new(
        (0..mesh.n_nodes()).map(|_| (rng.normal()).exp()).collect(),
        FieldRole::Parameter,
    )
    .unwrap();
    let sparse = assemble_weighted_stiffness(&mesh, &kappa).unwrap();
    let dense = dense_stiffness(&mesh, &kappa, |v| v);
    assert!(max_rel_diff(&sparse, &dense) < 1e-12);
}

#[test]
fn exp_weighted_stiffness_matches_dense_assembly() {
    let mesh = build_unit_square_mesh(8, 8).unwrap();
    let mut rng = RngStream::new(42, 0);
    // small amplitude: the degree-5 and degree-4 rules then agree on the
    // analytic weight to below 1e-12 relative
    let m_small = NodalField::new(
        (0..mesh.n_nodes()).map(|_| 0.005 * rng.normal()).collect(),
        FieldRole::Parameter,
    )
    .unwrap();
    let sparse = assemble_exp_weighted_stiffness(&mesh, &m_small).unwrap();
    let dense = dense_stiffness(&mesh, &m_small, f64::exp);
    assert!(max_rel_diff(&sparse, &dense) < 1e-12);

    // smooth unit-amplitude field: agreement limited by the quadrature
    // degree (the rules differ at degree 5), so the tolerance is looser
    let m_unit = NodalField::from_fn(&mesh, FieldRole::Parameter, |x, y| {
        (2.2 * x).sin() * (1.7 * y).cos()
    });
    let sparse = assemble_exp_weighted_stiffness(&mesh, &m_unit).unwrap();
    let dense = dense_stiffness(&mesh, &m_unit, f64::exp);
    assert!(max_rel_diff(&sparse, &dense) < 1e-4);
}

#[test]
fn assembly_is_linear_in_the_raw_coefficient() {
    let mesh = build_unit_square_mesh(6, 6).unwrap();
    let mut rng = RngStream::new(43, 0);
    let k1 = NodalField::new(
        (0..mesh.n_nodes()).map(|_| rng.uniform() + 0.1).collect(),
        FieldRole::Parameter,
    )
    .unwrap();
    let k2 = NodalField::new(
        (0..mesh.n_nodes()).map(|_| rng.uniform() + 0.1).collect(),
        FieldRole::Parameter,
    )
    .unwrap();
    let (a, b) = (0.7, 2.3);
    let combined = NodalField::new(
        k1.values()
            .iter()
            .zip(k2.values())
            .map(|(x, y)| a * x + b * y)
            .collect(),
        FieldRole::Parameter,
    )
    .unwrap();
    let lhs = assemble_weighted_stiffness(&mesh, &combined).unwrap();
    let k1m = assemble_weighted_stiffness(&mesh, &k1).unwrap();
    let k2m = assemble_weighted_stiffness(&mesh, &k2).unwrap();
    for i in 0..lhs.values().len() {
        let expect = a * k1m.values()[i] + b * k2m.values()[i];
        assert!((lhs.values()[i] - expect).abs() <= 1e-12 * expect.abs().max(1e-3));
    }
}

#[test]
fn mass_energy_matches_per_triangle_closed_form() {
    let mesh = build_unit_square_mesh(8, 8).unwrap();
    let mass = assemble_mass(&mesh);
    let f = NodalField::from_fn(&mesh, FieldRole::State, |x, _| x);
    let direct = mass.quadratic_form(f.values());
    let oracle = dense_interpolant_l2sq(&mesh, &f);
    assert!((direct - oracle).abs() < 1e-13);
    // and the interpolant of x is x itself: integral is exactly 1/3
    assert!((direct - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn residual_of_linear_field_matches_dense_quadrature() {
    // m = 0, u = y: the diffusion part vanishes on interior rows and the
    // reaction part is the mass-weighted y^3 load
    let mesh = build_unit_square_mesh(8, 8).unwrap();
    let model = ReactionDiffusion::new(&Arc::new(mesh.clone()));
    let m = NodalField::zeros(mesh.n_nodes(), FieldRole::Parameter);
    let u = NodalField::from_fn(&mesh, FieldRole::State, |_, y| y);
    let ours = model.assemble_residual(&u, &m).unwrap();
    let mut oracle = dense_residual(&mesh, &u, &m);
    for &n in model.dirichlet_nodes() {
        oracle[n] = 0.0;
    }
    for (a, b) in ours.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn cg_error_decreases_monotonically_in_the_a_norm() {
    // 20x20 SPD system; exact solution from a dense factorization
    let n = 20;
    let mut dense = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = if i == j { 2.0 + n as f64 / 4.0 } else { 0.0 };
            for k in 0..n {
                let gi = (((i * 13 + k * 7 + 3) % 23) as f64 / 23.0) - 0.5;
                let gj = (((j * 13 + k * 7 + 3) % 23) as f64 / 23.0) - 0.5;
                acc += gi * gj;
            }
            dense[(i, j)] = acc;
        }
    }
    let mut row_offsets = vec![0];
    let mut cols = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        for j in 0..n {
            cols.push(j);
            values.push(dense[(i, j)]);
        }
        row_offsets.push(cols.len());
    }
    let a = opcorrect_core::fem::SparseMatrix::new(n, n, row_offsets, cols, values).unwrap();
    let b: Vec<f64> = (0..n).map(|i| ((i * i) as f64).sin()).collect();
    let x_star = dense
        .clone()
        .cholesky()
        .unwrap()
        .solve(&DVector::from_column_slice(&b));

    for precond in [Preconditioner::None, Preconditioner::Jacobi] {
        let (_, trace) = cg_solve_traced(&a, &b, 1e-12, 200, precond).unwrap();
        let mut last = f64::INFINITY;
        for x in &trace {
            let e = DVector::from_column_slice(x) - &x_star;
            let a_norm = (e.transpose() * &dense * &e)[(0, 0)].max(0.0).sqrt();
            assert!(a_norm <= last * (1.0 + 1e-10), "A-norm error increased");
            last = a_norm;
        }
    }
}

#[test]
fn forward_solve_matches_damped_picard_oracle() {
    let mesh = build_unit_square_mesh(16, 16).unwrap();
    let arc = Arc::new(mesh.clone());
    let model = ReactionDiffusion::new(&arc);
    let mean = NodalField::zeros(mesh.n_nodes(), FieldRole::Parameter);
    let prior = build_prior(&arc, 0.08, 2.0, None, mean).unwrap();
    let m = prior.sample(&mut RngStream::new(51, 0)).unwrap();

    let newton = model
        .solve_forward(&m, NEWTON_RTOL, NEWTON_MAX_ITERS)
        .unwrap();
    let picard = picard_solve(&model, &mesh, &m, 0.5, 1e-12, 4000);
    let err = l2_diff(newton.u.values(), picard.values());
    assert!(err <= 1e-8, "newton vs picard: {err}");
}

#[test]
fn mesh_refinement_reduces_l2_error() {
    // manufactured harmonic solution u = sin(pi x) sinh(pi y) / sinh(pi)
    let exact = |x: f64, y: f64| {
        (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sinh()
            / std::f64::consts::PI.sinh()
    };
    let solve_at = |n: usize| -> f64 {
        let mesh = build_unit_square_mesh(n, n).unwrap();
        let ones = NodalField::constant(mesh.n_nodes(), 1.0, FieldRole::Parameter);
        let k = assemble_weighted_stiffness(&mesh, &ones).unwrap();
        let boundary = mesh.boundary_nodes();
        let values: Vec<f64> = boundary
            .iter()
            .map(|&b| {
                let c = mesh.node_coords[b];
                exact(c[0], c[1])
            })
            .collect();
        let (a, rhs) = apply_dirichlet(&k, &vec![0.0; k.n_rows()], &boundary, &values).unwrap();
        let sol = opcorrect_core::fem::cg_solve(&a, &rhs, 1e-13, 10 * rhs.len(), Preconditioner::Jacobi)
            .unwrap();
        let mass = assemble_mass(&mesh);
        let err: Vec<f64> = (0..mesh.n_nodes())
            .map(|i| {
                let c = mesh.node_coords[i];
                sol.x[i] - exact(c[0], c[1])
            })
            .collect();
        mass.quadratic_form(&err).max(0.0).sqrt()
    };
    let coarse = solve_at(8);
    let fine = solve_at(16);
    assert!(
        fine < 0.3 * coarse,
        "refinement did not reduce error: {coarse} -> {fine}"
    );
}

#[test]
fn prior_sample_covariance_matches_the_operator_product() {
    // 4x4 mesh: dense A^{-1} M_L A^{-1} vs the covariance of 50k samples
    let mesh = Arc::new(build_unit_square_mesh(4, 4).unwrap());
    let n = mesh.n_nodes();
    let mean = NodalField::zeros(n, FieldRole::Parameter);
    let prior = build_prior(&mesh, 0.08, 2.0, None, mean).unwrap();

    let a_dense = prior.operator().to_dense();
    let a_inv = a_dense.try_inverse().unwrap();
    let lumped = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        prior.lumped_sqrt().iter().map(|s| s * s),
    ));
    let exact = &a_inv * lumped * a_inv.transpose();

    let n_samples = 50_000;
    let mut rng = RngStream::new(53, 0);
    let mut sum = vec![0.0; n];
    let mut cross: DMatrix<f64> = DMatrix::zeros(n, n);
    for _ in 0..n_samples {
        let s = prior.sample(&mut rng).unwrap();
        let v = s.values();
        for i in 0..n {
            sum[i] += v[i];
            for j in 0..n {
                cross[(i, j)] += v[i] * v[j];
            }
        }
    }
    let nf = n_samples as f64;
    let mut empirical = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            empirical[(i, j)] = (cross[(i, j)] - sum[i] * sum[j] / nf) / (nf - 1.0);
        }
    }
    let rel = (&empirical - &exact).norm() / exact.norm();
    assert!(rel <= 0.10, "frobenius-relative covariance error {rel}");
}

#[test]
fn pod_gram_eigenvalues_match_a_dense_covariance_eigensolver() {
    let mesh = build_unit_square_mesh(16, 16).unwrap();
    let arc = Arc::new(mesh.clone());
    let mass = assemble_mass(&mesh);
    let mean = NodalField::zeros(mesh.n_nodes(), FieldRole::Parameter);
    let prior = build_prior(&arc, 0.08, 2.0, None, mean).unwrap();
    let model = ReactionDiffusion::new(&arc);
    let mut rng = RngStream::new(57, 0);
    let snapshots: Vec<NodalField> = (0..100)
        .map(|_| {
            let m = prior.sample(&mut rng).unwrap();
            model
                .solve_forward(&m, NEWTON_RTOL, NEWTON_MAX_ITERS)
                .unwrap()
                .u
        })
        .collect();
    let pod = compute_pod(&snapshots, &mass, 20).unwrap();

    // dense oracle: eigenvalues of M^{1/2} C M^{1/2} with the empirical
    // covariance C of the centered snapshots
    let d = mesh.n_nodes();
    let nf = snapshots.len() as f64;
    let mut mean_u = vec![0.0; d];
    for s in &snapshots {
        for (a, v) in mean_u.iter_mut().zip(s.values()) {
            *a += v / nf;
        }
    }
    let mut centered = DMatrix::zeros(d, snapshots.len());
    for (j, s) in snapshots.iter().enumerate() {
        for i in 0..d {
            centered[(i, j)] = s.values()[i] - mean_u[i];
        }
    }
    let m_dense = mass.to_dense();
    let m_eig = SymmetricEigen::new(m_dense);
    let m_half = &m_eig.eigenvectors
        * DMatrix::from_diagonal(&m_eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * m_eig.eigenvectors.transpose();
    let weighted = &m_half * &centered;
    let cov = &weighted * weighted.transpose() / nf;
    let mut dense_eigs: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    dense_eigs.sort_by(|a, b| b.total_cmp(a));

    for k in 0..20 {
        let rel = (pod.eigenvalues[k] - dense_eigs[k]).abs() / dense_eigs[0];
        assert!(rel <= 1e-8, "eigenvalue {k}: {rel}");
    }
}

#[test]
fn randomized_derivative_basis_matches_a_dense_eigensolver() {
    // 8x8 mesh (81 dofs): H built column by column through the tangent and
    // adjoint actions, then a dense symmetric eigensolve in the mass
    // geometry
    let mesh = Arc::new(build_unit_square_mesh(8, 8).unwrap());
    let model = ReactionDiffusion::new(&mesh);
    let mean = NodalField::zeros(mesh.n_nodes(), FieldRole::Parameter);
    let prior = build_prior(&mesh, 0.08, 2.0, None, mean).unwrap();
    let mut rng = RngStream::new(59, 0);
    let pairs: Vec<(NodalField, NodalField)> = (0..4)
        .map(|_| {
            let m = prior.sample(&mut rng).unwrap();
            let u = model
                .solve_forward(&m, NEWTON_RTOL, NEWTON_MAX_ITERS)
                .unwrap()
                .u;
            (m, u)
        })
        .collect();

    let dense_eigs = dense_gauss_newton_spectrum(&model, &mesh, &pairs);

    let db = compute_derivative_basis_with_solutions(
        &model,
        &pairs,
        10,
        64,
        &mut RngStream::new(59, 1),
    )
    .unwrap();
    for k in 0..10 {
        let rel = (db.eigenvalues[k] - dense_eigs[k]).abs() / dense_eigs[k];
        assert!(
            rel <= 1e-6,
            "eigenvalue {k}: randomized {} vs dense {} (rel {rel})",
            db.eigenvalues[k],
            dense_eigs[k]
        );
    }
}

fn dense_gauss_newton_spectrum(
    model: &ReactionDiffusion,
    mesh: &Mesh,
    pairs: &[(NodalField, NodalField)],
) -> Vec<f64> {
    let d = mesh.n_nodes();
    let mut h_op = DMatrix::zeros(d, d);
    let linearizations: Vec<_> = pairs
        .iter()
        .map(|(m, u)| model.linearize_at(u, m).unwrap())
        .collect();
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        let ek = NodalField::new(e, FieldRole::Parameter).unwrap();
        let mut col = vec![0.0; d];
        for lin in &linearizations {
            let h = lin.normal_action(&ek).unwrap();
            for (c, v) in col.iter_mut().zip(h.values()) {
                *c += v / pairs.len() as f64;
            }
        }
        for i in 0..d {
            h_op[(i, k)] = col[i];
        }
    }
    // symmetrize in the mass geometry: W = M^{1/2} H M^{-1/2}
    let m_dense = model.mass().to_dense();
    let m_eig = SymmetricEigen::new(m_dense);
    let sqrt = DMatrix::from_diagonal(&m_eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let inv_sqrt = DMatrix::from_diagonal(&m_eig.eigenvalues.map(|l| 1.0 / l.max(1e-300).sqrt()));
    let m_half = &m_eig.eigenvectors * sqrt * m_eig.eigenvectors.transpose();
    let m_half_inv = &m_eig.eigenvectors * inv_sqrt * m_eig.eigenvectors.transpose();
    let w = &m_half * &h_op * &m_half_inv;
    let w = (&w + w.transpose()) * 0.5;
    let mut eigs: Vec<f64> = SymmetricEigen::new(w).eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.total_cmp(a));
    eigs
}

#[test]
fn field_norms_match_exact_integrals() {
    let mesh = build_unit_square_mesh(16, 16).unwrap();
    let mass = assemble_mass(&mesh);
    let ones = NodalField::constant(mesh.n_nodes(), 1.0, FieldRole::Parameter);
    let stiffness = assemble_weighted_stiffness(&mesh, &ones).unwrap();

    let unit = NodalField::constant(mesh.n_nodes(), 1.0, FieldRole::State);
    let (l2n, h1n) = opcorrect_core::fem::field_norms(&unit, &mass, &stiffness);
    assert!((l2n - 1.0).abs() < 1e-12 && (h1n - 1.0).abs() < 1e-12);

    let zero = NodalField::zeros(mesh.n_nodes(), FieldRole::State);
    assert_eq!(
        opcorrect_core::fem::field_norms(&zero, &mass, &stiffness),
        (0.0, 0.0)
    );

    let linear = NodalField::from_fn(&mesh, FieldRole::State, |x, _| x);
    let (l2n, _) = opcorrect_core::fem::field_norms(&linear, &mass, &stiffness);
    assert!((l2n * l2n - 1.0 / 3.0).abs() < 1e-2);
    assert!(l2(linear.values()) > 0.0);
}
