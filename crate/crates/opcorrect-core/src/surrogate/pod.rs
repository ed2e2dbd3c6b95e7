//! Proper orthogonal decomposition of state snapshots.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::{NodalField, SparseMatrix};

#[derive(Debug, Clone)]
pub struct PodResult {
    /// d_u x r_out, mass-orthonormal columns.
    pub basis: DMatrix<f64>,
    pub mean: NodalField,
    /// Nonincreasing, nonnegative eigenvalues of the empirical covariance
    /// (all of them, not just the retained leading block).
    pub eigenvalues: Vec<f64>,
    /// Tail eigenvalue sum: the mean squared mass-norm reconstruction error
    /// of the snapshots under the retained basis.
    pub truncation_error: f64,
}

/// Mass-orthonormal principal basis of centered snapshots via the
/// `n x n` Gram-matrix method: eigenpairs of `G = (1/n) S' M S` lift to
/// basis vectors `v_i = S y_i / sqrt(n lambda_i)`.
pub fn compute_pod(
    snapshots: &[NodalField],
    mass: &SparseMatrix,
    r_out: usize,
) -> Result<PodResult> {
    let n = snapshots.len();
    if n == 0 {
        return Err(Error::invalid("pod needs at least one snapshot"));
    }
    if r_out > n {
        return Err(Error::invalid(format!(
            "pod rank {r_out} exceeds snapshot count {n}"
        )));
    }
    let d = snapshots[0].len();
    if snapshots.iter().any(|s| s.len() != d) {
        return Err(Error::invalid("snapshots have inconsistent lengths"));
    }

    let mut mean = vec![0.0; d];
    for s in snapshots {
        for (m, v) in mean.iter_mut().zip(s.values()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    // centered snapshot matrix, column per snapshot
    let mut centered = DMatrix::zeros(d, n);
    for (j, s) in snapshots.iter().enumerate() {
        for i in 0..d {
            centered[(i, j)] = s.values()[i] - mean[i];
        }
    }
    // G = (1/n) S' M S
    let mut m_centered = DMatrix::zeros(d, n);
    for j in 0..n {
        let col = centered.column(j).iter().copied().collect::<Vec<f64>>();
        let mcol = mass.matvec_alloc(&col);
        for i in 0..d {
            m_centered[(i, j)] = mcol[i];
        }
    }
    let gram = (centered.transpose() * &m_centered) / n as f64;
    let eig = SymmetricEigen::new(gram);

    // sort descending
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&k| eig.eigenvalues[k].max(0.0))
        .collect();

    let mut basis = DMatrix::zeros(d, r_out);
    for (col, &k) in order.iter().take(r_out).enumerate() {
        let lambda = eigenvalues[col];
        if lambda <= 1e-14 * eigenvalues.first().copied().unwrap_or(1.0).max(1e-300) {
            // degenerate direction: keep a zero column rather than dividing
            // by a vanishing eigenvalue
            continue;
        }
        let y: DVector<f64> = eig.eigenvectors.column(k).into();
        let v = &centered * y / (n as f64 * lambda).sqrt();
        basis.set_column(col, &v);
    }

    let truncation_error = eigenvalues.iter().skip(r_out).sum();
    let mean = NodalField::new(mean, snapshots[0].role())?;
    Ok(PodResult {
        basis,
        mean,
        eigenvalues,
        truncation_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, build_unit_square_mesh, FieldRole};

    #[test]
    fn exact_rank_three_family_is_captured() {
        let mesh = build_unit_square_mesh(8, 8).unwrap();
        let mass = assemble_mass(&mesh);
        let g1 = NodalField::from_fn(&mesh, FieldRole::State, |x, _| x);
        let g2 = NodalField::from_fn(&mesh, FieldRole::State, |_, y| y * y);
        let g3 = NodalField::from_fn(&mesh, FieldRole::State, |x, y| (x * y).sin());
        let offset = NodalField::from_fn(&mesh, FieldRole::State, |x, y| 1.0 + x - y);
        let mut snaps = Vec::new();
        for k in 0..12 {
            let (a, b, c) = ((k % 3) as f64 - 1.0, (k % 4) as f64 * 0.5, (k % 5) as f64 * 0.2);
            let mut s = offset.clone();
            s = s.axpy(a, &g1);
            s = s.axpy(b, &g2);
            s = s.axpy(c, &g3);
            snaps.push(s);
        }
        let pod = compute_pod(&snaps, &mass, 3).unwrap();
        // every snapshot reconstructs to solver accuracy
        for s in &snaps {
            let centered: Vec<f64> = s
                .values()
                .iter()
                .zip(pod.mean.values())
                .map(|(a, b)| a - b)
                .collect();
            let mc = mass.matvec_alloc(&centered);
            let coords = pod.basis.transpose() * DVector::from_column_slice(&mc);
            let recon = &pod.basis * coords;
            let err: Vec<f64> = centered
                .iter()
                .zip(recon.iter())
                .map(|(a, b)| a - b)
                .collect();
            let l2 = mass.quadratic_form(&err).max(0.0).sqrt();
            assert!(l2 <= 1e-10, "reconstruction error {l2}");
        }
        assert!(pod.truncation_error <= 1e-12);
    }

    #[test]
    fn identical_snapshots_give_zero_spectrum() {
        let mesh = build_unit_square_mesh(4, 4).unwrap();
        let mass = assemble_mass(&mesh);
        let s = NodalField::from_fn(&mesh, FieldRole::State, |x, y| x + y);
        let snaps = vec![s.clone(), s.clone(), s.clone(), s.clone()];
        let pod = compute_pod(&snaps, &mass, 2).unwrap();
        assert_eq!(pod.mean.values(), s.values());
        assert!(pod.eigenvalues.iter().all(|&l| l.abs() < 1e-18));
    }

    #[test]
    fn basis_is_mass_orthonormal_and_spectrum_sorted() {
        let mesh = build_unit_square_mesh(6, 6).unwrap();
        let mass = assemble_mass(&mesh);
        let mut snaps = Vec::new();
        for k in 0..10 {
            let kf = k as f64;
            snaps.push(NodalField::from_fn(&mesh, FieldRole::State, move |x, y| {
                (kf * x).sin() + 0.3 * (kf * y).cos() + 0.1 * kf
            }));
        }
        let pod = compute_pod(&snaps, &mass, 5).unwrap();
        for i in 0..5 {
            for j in 0..=i {
                let vi: Vec<f64> = pod.basis.column(i).iter().copied().collect();
                let vj = pod.basis.column(j);
                let mvi = mass.matvec_alloc(&vi);
                let dot: f64 = mvi.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "({i},{j}): {dot}");
            }
        }
        for w in pod.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(pod.eigenvalues.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn rejects_rank_above_snapshot_count() {
        let mesh = build_unit_square_mesh(4, 4).unwrap();
        let mass = assemble_mass(&mesh);
        let s = NodalField::zeros(mesh.n_nodes(), FieldRole::State);
        assert!(compute_pod(&[s], &mass, 2).is_err());
    }

    #[test]
    fn truncation_error_is_monotone_in_rank() {
        let mesh = build_unit_square_mesh(6, 6).unwrap();
        let mass = assemble_mass(&mesh);
        let mut snaps = Vec::new();
        for k in 0..8 {
            let kf = k as f64 + 1.0;
            snaps.push(NodalField::from_fn(&mesh, FieldRole::State, move |x, y| {
                (kf * x * y).sin() / kf
            }));
        }
        let mut last = f64::INFINITY;
        for r in 1..=6 {
            let pod = compute_pod(&snaps, &mass, r).unwrap();
            assert!(pod.truncation_error <= last + 1e-15);
            last = pod.truncation_error;
        }
    }
}
