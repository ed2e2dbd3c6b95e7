//! Independent oracle implementations for cross-checking the library.
//!
//! Everything here uses its own code path: dense matrices, a different
//! quadrature rule, fixed-point instead of Newton, dense eigensolvers.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use opcorrect_core::fem::{Mesh, NodalField};
use opcorrect_core::reaction_diffusion::ReactionDiffusion;

/// Seven-point degree-5 rule (distinct from the library's six-point rule).
pub const DEGREE5_7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    (
        [0.059_715_871_789_77, 0.470_142_064_105_115, 0.470_142_064_105_115],
        0.132_394_152_788_506,
    ),
    (
        [0.470_142_064_105_115, 0.059_715_871_789_77, 0.470_142_064_105_115],
        0.132_394_152_788_506,
    ),
    (
        [0.470_142_064_105_115, 0.470_142_064_105_115, 0.059_715_871_789_77],
        0.132_394_152_788_506,
    ),
    (
        [0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456],
        0.125_939_180_544_827,
    ),
    (
        [0.101_286_507_323_456, 0.797_426_985_353_087, 0.101_286_507_323_456],
        0.125_939_180_544_827,
    ),
    (
        [0.101_286_507_323_456, 0.101_286_507_323_456, 0.797_426_985_353_087],
        0.125_939_180_544_827,
    ),
];

/// Six-point degree-4 rule, written out independently of the library's
/// tables. The Picard oracle integrates with this rule so that it solves
/// the same discrete problem as the Newton path (exact for every assembled
/// polynomial term) while sharing no solver code.
pub const DEGREE4_6_ORACLE: [([f64; 3], f64); 6] = [
    (
        [0.108_103_018_168_07, 0.445_948_490_915_965, 0.445_948_490_915_965],
        0.223_381_589_678_011,
    ),
    (
        [0.445_948_490_915_965, 0.108_103_018_168_07, 0.445_948_490_915_965],
        0.223_381_589_678_011,
    ),
    (
        [0.445_948_490_915_965, 0.445_948_490_915_965, 0.108_103_018_168_07],
        0.223_381_589_678_011,
    ),
    (
        [0.816_847_572_980_458, 0.091_576_213_509_771, 0.091_576_213_509_771],
        0.109_951_743_655_322,
    ),
    (
        [0.091_576_213_509_771, 0.816_847_572_980_458, 0.091_576_213_509_771],
        0.109_951_743_655_322,
    ),
    (
        [0.091_576_213_509_771, 0.091_576_213_509_771, 0.816_847_572_980_458],
        0.109_951_743_655_322,
    ),
];

fn bary_interp(v: [f64; 3], b: [f64; 3]) -> f64 {
    v[0] * b[0] + v[1] * b[1] + v[2] * b[2]
}

fn tri_grads(mesh: &Mesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let geo = mesh.tri_geometry(t);
    (geo.grads, geo.area)
}

/// Dense weighted-stiffness assembly with the seven-point rule; the weight
/// is evaluated at quadrature points of the P1 interpolant of `w`, mapped
/// through `f`.
pub fn dense_stiffness(mesh: &Mesh, w: &NodalField, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = mesh.n_nodes();
    let mut k = DMatrix::zeros(n, n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (grads, area) = tri_grads(mesh, t);
        let wv = tri.map(|i| w.values()[i]);
        let weight: f64 = DEGREE5_7
            .iter()
            .map(|&(b, q)| q * f(bary_interp(wv, b)))
            .sum();
        for a in 0..3 {
            for b in 0..3 {
                let dot = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                k[(tri[a], tri[b])] += area * weight * dot;
            }
        }
    }
    k
}

/// Dense residual assembly with the seven-point rule (diffusion plus cubic
/// reaction), unrestricted rows.
pub fn dense_residual(mesh: &Mesh, u: &NodalField, m: &NodalField) -> Vec<f64> {
    let n = mesh.n_nodes();
    let mut r = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (grads, area) = tri_grads(mesh, t);
        let uv = tri.map(|i| u.values()[i]);
        let mv = tri.map(|i| m.values()[i]);
        let mut grad_u = [0.0, 0.0];
        for k in 0..3 {
            grad_u[0] += uv[k] * grads[k][0];
            grad_u[1] += uv[k] * grads[k][1];
        }
        for &(b, q) in &DEGREE5_7 {
            let expm = bary_interp(mv, b).exp();
            let uq = bary_interp(uv, b);
            for a in 0..3 {
                let diffusion =
                    expm * (grad_u[0] * grads[a][0] + grad_u[1] * grads[a][1]);
                let reaction = uq * uq * uq * b[a];
                r[tri[a]] += area * q * (diffusion + reaction);
            }
        }
    }
    r
}

/// Exact integral of the square of the P1 interpolant of `f`, by the
/// midpoint closed form (exact for quadratics on each triangle).
pub fn dense_interpolant_l2sq(mesh: &Mesh, f: &NodalField) -> f64 {
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.tri_geometry(t).area;
        let v = tri.map(|i| f.values()[i]);
        let mids = [
            0.5 * (v[0] + v[1]),
            0.5 * (v[1] + v[2]),
            0.5 * (v[2] + v[0]),
        ];
        acc += area / 3.0 * (mids[0] * mids[0] + mids[1] * mids[1] + mids[2] * mids[2]);
    }
    acc
}

/// Damped Picard fixed-point solver for the reaction--diffusion problem:
/// repeatedly solve the linear diffusion problem with the previous iterate's
/// cubic term as a load, relaxing with factor `omega`. Dense solves.
pub fn picard_solve(
    model: &ReactionDiffusion,
    mesh: &Mesh,
    m: &NodalField,
    omega: f64,
    tol: f64,
    max_iters: usize,
) -> NodalField {
    use opcorrect_core::fem::FieldRole;
    let n = mesh.n_nodes();
    // degree-4 rule: exact for every polynomial term, so the fixed point is
    // the same discrete solution the Newton path targets
    let mut k = DMatrix::zeros(n, n);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (grads, area) = tri_grads(mesh, t);
        let mv = tri.map(|i| m.values()[i]);
        let weight: f64 = DEGREE4_6_ORACLE
            .iter()
            .map(|&(b, q)| q * bary_interp(mv, b).exp())
            .sum();
        for a in 0..3 {
            for b in 0..3 {
                let dot = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                k[(tri[a], tri[b])] += area * weight * dot;
            }
        }
    }
    let dirichlet: Vec<(usize, f64)> = model
        .dirichlet_nodes()
        .iter()
        .zip(model.dirichlet_values())
        .map(|(&a, &b)| (a, b))
        .collect();

    // start from the linear solution
    let mut u = dense_constrained_solve(&k, &vec![0.0; n], &dirichlet);
    for _ in 0..max_iters {
        // load = -int u^3 v
        let uf = NodalField::new(u.clone(), FieldRole::State).unwrap();
        let mut load = vec![0.0; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.tri_geometry(t).area;
            let uv = tri.map(|i| uf.values()[i]);
            for &(b, q) in &DEGREE4_6_ORACLE {
                let uq = bary_interp(uv, b);
                for a in 0..3 {
                    load[tri[a]] -= area * q * uq * uq * uq * b[a];
                }
            }
        }
        let fresh = dense_constrained_solve(&k, &load, &dirichlet);
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let next = (1.0 - omega) * u[i] + omega * fresh[i];
            delta += (next - u[i]).powi(2);
            u[i] = next;
        }
        if delta.sqrt() <= tol {
            break;
        }
    }
    NodalField::new(u, FieldRole::State).unwrap()
}

/// Dense symmetric-elimination solve of `A x = b` with Dirichlet data.
pub fn dense_constrained_solve(
    a: &DMatrix<f64>,
    rhs: &[f64],
    dirichlet: &[(usize, f64)],
) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    let mut b = DVector::from_column_slice(rhs);
    for &(node, value) in dirichlet {
        for i in 0..n {
            if i != node {
                b[i] -= a[(i, node)] * value;
            }
            a[(i, node)] = 0.0;
            a[(node, i)] = 0.0;
        }
        a[(node, node)] = 1.0;
        b[node] = value;
    }
    let chol = a.cholesky().expect("oracle system must be SPD");
    chol.solve(&b).as_slice().to_vec()
}

/// l2 distance between two nodal vectors.
pub fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn l2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
