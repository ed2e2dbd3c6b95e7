//! Local-averaging observation operator and synthetic data generation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::{Mesh, NodalField, SparseMatrix};
use crate::reaction_diffusion::{ReactionDiffusion, NEWTON_MAX_ITERS, NEWTON_RTOL};
use crate::rng::RngStream;

/// Noisy point observations: each row of `B` averages the state over the
/// mesh nodes inside a disc around one observation point, weighted by the
/// lumped mass (so constant fields are reproduced exactly).
#[derive(Debug, Clone)]
pub struct ObservationSetup {
    /// Observation point coordinates, row-major over the grid.
    pub points: Vec<[f64; 2]>,
    /// Requested disc radius.
    pub radius_requested: f64,
    /// Effective radius after any growth needed to make every disc nonempty.
    pub radius: f64,
    /// Number of 1.5x growth steps applied.
    pub growth_steps: u32,
    /// n_y x d_u averaging matrix; rows are nonnegative and sum to one.
    pub b: DMatrix<f64>,
    /// Noise standard deviation; set once data exists.
    pub sigma: Option<f64>,
}

impl ObservationSetup {
    pub fn n_observations(&self) -> usize {
        self.b.nrows()
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn noise_sigma(&self) -> Result<f64> {
        match self.sigma {
            Some(s) if s > 0.0 => Ok(s),
            _ => Err(Error::invalid("observation noise sigma not set")),
        }
    }

    /// `B u`.
    pub fn observe(&self, u: &NodalField) -> Vec<f64> {
        let mut out = vec![0.0; self.b.nrows()];
        for r in 0..self.b.nrows() {
            let mut acc = 0.0;
            for c in 0..self.b.ncols() {
                let w = self.b[(r, c)];
                if w != 0.0 {
                    acc += w * u.values()[c];
                }
            }
            out[r] = acc;
        }
        out
    }
}

/// Build the `grid x grid` interior observation lattice with lumped-mass
/// disc averaging. An empty disc grows the radius by 1.5x (recorded in
/// `growth_steps`) until every disc holds at least one node.
pub fn build_observation(
    mesh: &Mesh,
    mass: &SparseMatrix,
    grid: usize,
    radius: f64,
) -> Result<ObservationSetup> {
    if grid == 0 {
        return Err(Error::invalid("observation grid must be nonempty"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let mut points = Vec::with_capacity(grid * grid);
    let step = 1.0 / (grid as f64 + 1.0);
    for j in 1..=grid {
        for i in 1..=grid {
            points.push([i as f64 * step, j as f64 * step]);
        }
    }
    let lumped = mass.row_sums();

    let mut r = radius;
    let mut growth_steps = 0u32;
    let b = loop {
        match averaging_matrix(mesh, &lumped, &points, r) {
            Some(b) => break b,
            None => {
                growth_steps += 1;
                if growth_steps > 16 {
                    return Err(Error::invalid(format!(
                        "observation disc stayed empty after growing radius to {r:.3}"
                    )));
                }
                r *= 1.5;
            }
        }
    };

    Ok(ObservationSetup {
        points,
        radius_requested: radius,
        radius: r,
        growth_steps,
        b,
        sigma: None,
    })
}

fn averaging_matrix(
    mesh: &Mesh,
    lumped: &[f64],
    points: &[[f64; 2]],
    radius: f64,
) -> Option<DMatrix<f64>> {
    let n = mesh.n_nodes();
    let mut b = DMatrix::zeros(points.len(), n);
    for (row, p) in points.iter().enumerate() {
        let mut total = 0.0;
        for (node, c) in mesh.node_coords.iter().enumerate() {
            let d2 = (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
            if d2 <= radius * radius {
                b[(row, node)] = lumped[node];
                total += lumped[node];
            }
        }
        if total <= 0.0 {
            return None;
        }
        for node in 0..n {
            b[(row, node)] /= total;
        }
    }
    Some(b)
}

/// Synthetic observations `y* = B F(m*) + n` with white noise of standard
/// deviation `noise_pct * max|B F(m*)|`. Returns `(y*, sigma)`.
pub fn make_synthetic_data(
    obs: &ObservationSetup,
    model: &ReactionDiffusion,
    m_star: &NodalField,
    noise_pct: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, f64)> {
    if !(noise_pct > 0.0) {
        return Err(Error::invalid("noise percentage must be positive"));
    }
    let sol = model.solve_forward(m_star, NEWTON_RTOL, NEWTON_MAX_ITERS)?;
    let clean = obs.observe(&sol.u);
    let peak = clean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sigma = noise_pct * peak;
    let y: Vec<f64> = clean.iter().map(|v| v + sigma * rng.normal()).collect();
    Ok((y, sigma))
}
