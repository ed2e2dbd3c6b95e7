//! Preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::fem::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iters: usize,
}

/// Solve `A x = b` for symmetric positive definite `A` to a relative residual
/// `|b - A x| / |b| <= tol`. Fails with the last residual if `max_iter` is
/// exhausted.
pub fn cg_solve(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
) -> Result<CgSolution> {
    cg_solve_impl(a, b, tol, max_iter, precond, |_| {})
}

/// As [`cg_solve`], additionally recording every iterate (including the
/// initial guess). Intended for convergence diagnostics.
pub fn cg_solve_traced(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
) -> Result<(CgSolution, Vec<Vec<f64>>)> {
    let mut trace = Vec::new();
    let sol = cg_solve_impl(a, b, tol, max_iter, precond, |x| trace.push(x.to_vec()))?;
    Ok((sol, trace))
}

fn cg_solve_impl(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Preconditioner,
    mut observe: impl FnMut(&[f64]),
) -> Result<CgSolution> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = b.len();
    assert_eq!(a.n_rows(), n);

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iters: 0,
        });
    }

    let inv_diag: Option<Vec<f64>> = match precond {
        Preconditioner::None => None,
        Preconditioner::Jacobi => Some(
            a.diagonal()
                .into_iter()
                .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        ),
    };
    let apply_precond = |r: &[f64], z: &mut [f64]| match &inv_diag {
        None => z.copy_from_slice(r),
        Some(inv) => {
            for i in 0..r.len() {
                z[i] = inv[i] * r[i];
            }
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    apply_precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    observe(&x);

    let mut r_norm = b_norm;
    for iter in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // matrix not SPD on this subspace (or exact zero direction)
            return Err(Error::CgNoConvergence {
                iters: iter - 1,
                residual: r_norm / b_norm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        observe(&x);
        r_norm = norm(&r);
        if r_norm <= tol * b_norm {
            return Ok(CgSolution { x, iters: iter });
        }
        apply_precond(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::CgNoConvergence {
        iters: max_iter,
        residual: r_norm / b_norm,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
