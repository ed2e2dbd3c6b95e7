//! Derivative-informed input basis.
//!
//! Dominant eigenpairs of the prior-sample average of the Gauss-Newton
//! operator `H = (1/n) sum_j dF*(m_j) dF(m_j)`, which is self-adjoint in the
//! parameter mass inner product. The eigenpairs are computed matrix-free by
//! a double-pass randomized range finder with one subspace iteration:
//! sketch `Y = H Omega`, re-sketch `Y2 = H orth_M(Y)`, build a
//! mass-orthonormal `Q`, then Rayleigh-Ritz on `T = Q' M (H Q)`.
//!
//! Gaussian test columns are drawn sequentially, so enlarging the
//! oversampling with the same stream extends the previous sketch; Ritz
//! values are then monotone in the oversampling by subspace inclusion.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::{FieldRole, NodalField, SparseMatrix};
use crate::reaction_diffusion::{ReactionDiffusion, NEWTON_MAX_ITERS, NEWTON_RTOL};
use crate::rng::RngStream;

#[derive(Debug, Clone)]
pub struct DerivativeBasis {
    /// d_m x r, mass-orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Nonincreasing, nonnegative Ritz values.
    pub eigenvalues: Vec<f64>,
    /// Jacobian-system CG solves spent (two per sample per operator apply).
    pub linearized_solves: u64,
}

/// Compute the basis from parameter samples, solving the forward problem at
/// each sample first.
pub fn compute_derivative_basis(
    model: &ReactionDiffusion,
    m_samples: &[NodalField],
    r: usize,
    oversample: usize,
    rng: &mut RngStream,
) -> Result<DerivativeBasis> {
    let pairs: Vec<(NodalField, NodalField)> = m_samples
        .iter()
        .map(|m| {
            let sol = model.solve_forward(m, NEWTON_RTOL, NEWTON_MAX_ITERS)?;
            Ok((m.clone(), sol.u))
        })
        .collect::<Result<_>>()?;
    compute_derivative_basis_with_solutions(model, &pairs, r, oversample, rng)
}

/// As [`compute_derivative_basis`] with precomputed forward solutions.
pub fn compute_derivative_basis_with_solutions(
    model: &ReactionDiffusion,
    samples: &[(NodalField, NodalField)],
    r: usize,
    oversample: usize,
    rng: &mut RngStream,
) -> Result<DerivativeBasis> {
    if samples.is_empty() {
        return Err(Error::invalid("need at least one sample"));
    }
    let d = model.mesh().n_nodes();
    let l = r + oversample;
    if r == 0 || l > d {
        return Err(Error::invalid(format!(
            "rank {r} + oversample {oversample} out of range for {d} dofs"
        )));
    }

    let linearizations: Vec<_> = samples
        .iter()
        .map(|(m, u)| model.linearize_at(u, m))
        .collect::<Result<_>>()?;
    let mut solves = 0u64;
    let mut apply_h = |dm: &NodalField| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; d];
        for lin in &linearizations {
            let h = lin.normal_action(dm)?;
            for (a, v) in acc.iter_mut().zip(h.values()) {
                *a += v;
            }
            solves += 2;
        }
        let nf = linearizations.len() as f64;
        for a in acc.iter_mut() {
            *a /= nf;
        }
        Ok(acc)
    };

    // sketch columns drawn one after another (prefix property)
    let mut omega = Vec::with_capacity(l);
    for _ in 0..l {
        let col: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        omega.push(NodalField::new(col, FieldRole::Parameter)?);
    }
    let mut y = Vec::with_capacity(l);
    for w in &omega {
        y.push(apply_h(w)?);
    }

    // one subspace iteration sharpens the captured range
    let mass = model.mass();
    let q1 = mass_orthonormalize(y, mass);
    let mut y2 = Vec::with_capacity(q1.len());
    for col in &q1 {
        y2.push(apply_h(&NodalField::new(col.clone(), FieldRole::Parameter)?)?);
    }
    let q = mass_orthonormalize(y2, mass);
    let achieved = q.len();
    if achieved < r {
        return Err(Error::RankDeficient {
            requested: r,
            achieved,
        });
    }

    // second pass: T = Q' M (H Q)
    let mut t = DMatrix::zeros(achieved, achieved);
    for (j, qj) in q.iter().enumerate() {
        let hq = apply_h(&NodalField::new(qj.clone(), FieldRole::Parameter)?)?;
        let mhq = mass.matvec_alloc(&hq);
        for (i, qi) in q.iter().enumerate() {
            t[(i, j)] = qi.iter().zip(&mhq).map(|(a, b)| a * b).sum();
        }
    }
    // symmetrize roundoff
    let t = (&t + t.transpose()) * 0.5;
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..achieved).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut basis = DMatrix::zeros(d, r);
    let mut eigenvalues = Vec::with_capacity(r);
    for (col, &k) in order.iter().take(r).enumerate() {
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
        let s = eig.eigenvectors.column(k);
        let mut v = vec![0.0; d];
        for (qj, &sj) in q.iter().zip(s.iter()) {
            for (vi, &qji) in v.iter_mut().zip(qj.iter()) {
                *vi += sj * qji;
            }
        }
        basis.set_column(col, &DMatrix::from_column_slice(d, 1, &v).column(0));
    }

    Ok(DerivativeBasis {
        basis,
        eigenvalues,
        linearized_solves: solves,
    })
}

/// Modified Gram-Schmidt in the mass inner product with re-orthogonalization;
/// near-dependent columns are dropped.
fn mass_orthonormalize(columns: Vec<Vec<f64>>, mass: &SparseMatrix) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    for mut col in columns {
        let initial = mass.quadratic_form(&col).max(0.0).sqrt();
        if initial == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for existing in &q {
                let m_existing = mass.matvec_alloc(existing);
                let proj: f64 = m_existing.iter().zip(&col).map(|(a, b)| a * b).sum();
                for (c, e) in col.iter_mut().zip(existing) {
                    *c -= proj * e;
                }
            }
        }
        let norm = mass.quadratic_form(&col).max(0.0).sqrt();
        if norm <= 1e-10 * initial {
            continue;
        }
        for c in col.iter_mut() {
            *c /= norm;
        }
        q.push(col);
    }
    q
}
