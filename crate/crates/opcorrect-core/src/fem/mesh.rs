//! Structured triangulation of the unit square.

use crate::error::{Error, Result};

/// Per-triangle quantities reused by every assembly loop: area and the
/// (constant) gradients of the three P1 basis functions.
#[derive(Debug, Clone, Copy)]
pub struct TriGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

/// Uniform triangular mesh of `[0,1]^2` with `nx * ny` cells, two triangles
/// per cell. Nodes are laid out row-major from the bottom edge up; boundary
/// nodes are tagged by edge, with the four corners owned by the top/bottom
/// lists (the Dirichlet edges of the forward problem).
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub node_coords: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_top: Vec<usize>,
    pub boundary_bottom: Vec<usize>,
    pub boundary_left: Vec<usize>,
    pub boundary_right: Vec<usize>,
    tri_geometry: Vec<TriGeometry>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Node index at lattice position `(i, j)`, `i` along x and `j` along y.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn tri_geometry(&self, tri: usize) -> &TriGeometry {
        &self.tri_geometry[tri]
    }

    /// All boundary node indices (each exactly once).
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut all = Vec::new();
        all.extend_from_slice(&self.boundary_bottom);
        all.extend_from_slice(&self.boundary_top);
        all.extend_from_slice(&self.boundary_left);
        all.extend_from_slice(&self.boundary_right);
        all
    }
}

/// Build the structured mesh. Rejects `nx` or `ny` below 2, where the edge
/// tagging degenerates.
pub fn build_unit_square_mesh(nx: usize, ny: usize) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::MeshTooSmall { nx, ny });
    }
    let mut node_coords = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            node_coords.push([i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n00 = j * (nx + 1) + i;
            let n10 = n00 + 1;
            let n01 = n00 + (nx + 1);
            let n11 = n01 + 1;
            // both counterclockwise
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }
    let boundary_bottom: Vec<usize> = (0..=nx).collect();
    let boundary_top: Vec<usize> = (0..=nx).map(|i| ny * (nx + 1) + i).collect();
    let boundary_left: Vec<usize> = (1..ny).map(|j| j * (nx + 1)).collect();
    let boundary_right: Vec<usize> = (1..ny).map(|j| j * (nx + 1) + nx).collect();

    let tri_geometry = triangles
        .iter()
        .map(|t| triangle_geometry(&node_coords, t))
        .collect();

    Ok(Mesh {
        nx,
        ny,
        node_coords,
        triangles,
        boundary_top,
        boundary_bottom,
        boundary_left,
        boundary_right,
        tri_geometry,
    })
}

fn triangle_geometry(coords: &[[f64; 2]], tri: &[usize; 3]) -> TriGeometry {
    let p0 = coords[tri[0]];
    let p1 = coords[tri[1]];
    let p2 = coords[tri[2]];
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * det;
    debug_assert!(area > 0.0, "triangle must be counterclockwise");
    // grad(phi_k) = perp of opposite edge / (2 area)
    let grads = [
        [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
        [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
        [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
    ];
    TriGeometry { area, grads }
}
