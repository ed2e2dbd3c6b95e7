//! Global assembly of P1 bilinear forms and Dirichlet elimination.

use crate::error::{Error, Result};
use crate::fem::quadrature::{self, DEGREE4_6};
use crate::fem::{Mesh, NodalField, SparseMatrix};

/// Consistent mass matrix `M_ij = int phi_i phi_j`. Exact for P1; total sum
/// equals the domain area.
pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    let mut m = SparseMatrix::zero_pattern_from_mesh(mesh);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.tri_geometry(t).area;
        for (a, &i) in tri.iter().enumerate() {
            for (b, &j) in tri.iter().enumerate() {
                let w = if a == b { area / 6.0 } else { area / 12.0 };
                m.add_at(i, j, w);
            }
        }
    }
    m
}

/// Weighted stiffness `K_ij = int kappa grad(phi_i) . grad(phi_j)` with a
/// strictly positive nodal coefficient `kappa`, interpolated linearly inside
/// each triangle. Linear in `kappa`.
pub fn assemble_weighted_stiffness(mesh: &Mesh, kappa: &NodalField) -> Result<SparseMatrix> {
    if kappa.len() != mesh.n_nodes() {
        return Err(Error::invalid("kappa length does not match mesh"));
    }
    if kappa.values().iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::invalid("kappa must be finite and strictly positive"));
    }
    Ok(stiffness_with_weight(mesh, |tri_nodes| {
        // integral of the P1 interpolant over the triangle / area = vertex mean
        let kv = tri_nodes.map(|n| kappa.values()[n]);
        (kv[0] + kv[1] + kv[2]) / 3.0
    }))
}

/// Stiffness weighted by `exp(m)` evaluated at the degree-4 quadrature points
/// of the P1 interpolant of `m` (not nodal `exp` then interpolation).
pub fn assemble_exp_weighted_stiffness(mesh: &Mesh, m: &NodalField) -> Result<SparseMatrix> {
    if m.len() != mesh.n_nodes() {
        return Err(Error::invalid("m length does not match mesh"));
    }
    if !m.is_finite() {
        return Err(Error::invalid("m must be finite"));
    }
    Ok(stiffness_with_weight(mesh, |tri_nodes| {
        let mv = tri_nodes.map(|n| m.values()[n]);
        DEGREE4_6
            .iter()
            .map(|&(bary, w)| w * quadrature::interpolate(mv, bary).exp())
            .sum()
    }))
}

/// Shared element loop: the P1 gradients are constant per triangle, so the
/// weighted form factorizes as `mean_weight * area * grad_i . grad_j`.
fn stiffness_with_weight(mesh: &Mesh, mean_weight: impl Fn([usize; 3]) -> f64) -> SparseMatrix {
    let mut k = SparseMatrix::zero_pattern_from_mesh(mesh);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let geo = mesh.tri_geometry(t);
        let scale = geo.area * mean_weight(*tri);
        for (a, &i) in tri.iter().enumerate() {
            for (b, &j) in tri.iter().enumerate() {
                let dot = geo.grads[a][0] * geo.grads[b][0] + geo.grads[a][1] * geo.grads[b][1];
                k.add_at(i, j, scale * dot);
            }
        }
    }
    k
}

/// Boundary mass `B_ij = int_boundary phi_i phi_j` over all four edges,
/// assembled from 1D P1 edge elements.
pub fn assemble_boundary_mass(mesh: &Mesh) -> SparseMatrix {
    let mut b = SparseMatrix::zero_pattern_from_mesh(mesh);
    let mut add_edge = |i: usize, j: usize| {
        let p = mesh.node_coords[i];
        let q = mesh.node_coords[j];
        let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        b.add_at(i, i, len / 3.0);
        b.add_at(j, j, len / 3.0);
        b.add_at(i, j, len / 6.0);
        b.add_at(j, i, len / 6.0);
    };
    for i in 0..mesh.nx {
        add_edge(mesh.node_index(i, 0), mesh.node_index(i + 1, 0));
        add_edge(mesh.node_index(i, mesh.ny), mesh.node_index(i + 1, mesh.ny));
    }
    for j in 0..mesh.ny {
        add_edge(mesh.node_index(0, j), mesh.node_index(0, j + 1));
        add_edge(mesh.node_index(mesh.nx, j), mesh.node_index(mesh.nx, j + 1));
    }
    b
}

/// Symmetric Dirichlet elimination with lifting. Constrained rows and columns
/// are zeroed, the diagonal is set to one, and the right-hand side absorbs
/// the column contribution so the reduced system stays symmetric. Solving the
/// returned system yields exactly `boundary_values` at the constrained nodes.
pub fn apply_dirichlet(
    a: &SparseMatrix,
    rhs: &[f64],
    nodes: &[usize],
    boundary_values: &[f64],
) -> Result<(SparseMatrix, Vec<f64>)> {
    if nodes.len() != boundary_values.len() {
        return Err(Error::invalid("nodes and boundary_values length mismatch"));
    }
    if rhs.len() != a.n_rows() {
        return Err(Error::invalid("rhs length does not match matrix"));
    }
    let n = a.n_rows();
    let mut constrained = vec![false; n];
    let mut value = vec![0.0; n];
    for (&node, &g) in nodes.iter().zip(boundary_values) {
        if node >= n {
            return Err(Error::invalid(format!("node {node} out of range")));
        }
        if constrained[node] {
            return Err(Error::invalid(format!("duplicate constrained node {node}")));
        }
        constrained[node] = true;
        value[node] = g;
    }

    let mut out = a.clone();
    let mut b = rhs.to_vec();
    // lift: move known column contributions to the rhs of free rows
    for r in 0..n {
        if constrained[r] {
            continue;
        }
        for (c, v) in a.row(r) {
            if constrained[c] {
                b[r] -= v * value[c];
            }
        }
    }
    // zero constrained rows/columns, unit diagonal, pin rhs
    for d in 0..n {
        if !constrained[d] {
            continue;
        }
        // the pattern is structurally symmetric, so row d lists column d's rows
        let cols: Vec<usize> = out.row(d).map(|(c, _)| c).collect();
        for c in cols {
            out.set_at(d, c, 0.0);
            out.set_at(c, d, 0.0);
        }
        out.set_at(d, d, 1.0);
        b[d] = value[d];
    }
    Ok((out, b))
}
