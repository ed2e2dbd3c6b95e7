//! Nonlinear reaction--diffusion forward model on the unit square:
//!
//! ```text
//! -div(exp(m) grad u) + u^3 = 0   in (0,1)^2
//! u = 1 on the top edge, u = 0 on the bottom edge, zero flux on the sides
//! ```
//!
//! In weak form the residual against a test function `v` that vanishes on
//! the Dirichlet edges is
//!
//! ```text
//! <R(u, m), v> = int exp(m) grad u . grad v + int u^3 v .
//! ```
//!
//! Besides the Newton forward solve, the module provides the one-shot
//! error-correction solve (one Jacobian assembly plus one linear solve at an
//! arbitrary state estimate), and the tangent/adjoint actions of the
//! parameter-to-state map used to build derivative-informed input bases.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::quadrature::{self, DEGREE4_6};
use crate::fem::{
    apply_dirichlet, assemble_mass, cg_solve, FieldRole, Mesh, NodalField, Preconditioner,
    SparseMatrix,
};

/// Relative Newton tolerance used by the pipeline.
pub const NEWTON_RTOL: f64 = 1e-10;
/// Absolute residual floor: below this the iterate is accepted regardless.
pub const NEWTON_ATOL: f64 = 1e-12;
pub const NEWTON_MAX_ITERS: usize = 25;
const CG_RTOL: f64 = 1e-12;
const LINE_SEARCH_FACTOR: f64 = 0.5;
const LINE_SEARCH_MAX: usize = 10;
const ARMIJO_SLOPE: f64 = 1e-4;

/// Converged state with solve counters. `linear_solve_count` counts the CG
/// solves of Newton-step systems (one per iteration); the linear-variant
/// initial guess is not a Newton step and is excluded.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub u: NodalField,
    pub newton_iters: usize,
    pub final_residual_norm: f64,
    pub linear_solve_count: usize,
    pub converged: bool,
    /// Relative residual norms per iterate, starting at the initial guess.
    pub residual_history: Vec<f64>,
}

/// Forward problem bound to one mesh: Dirichlet data, mass matrix, and the
/// shared sparsity pattern. Immutable after construction and safe to share
/// across workers.
#[derive(Debug, Clone)]
pub struct ReactionDiffusion {
    mesh: Arc<Mesh>,
    mass: SparseMatrix,
    dirichlet_nodes: Vec<usize>,
    dirichlet_values: Vec<f64>,
    cubic_reaction: bool,
}

impl ReactionDiffusion {
    pub fn new(mesh: &Arc<Mesh>) -> Self {
        Self::with_reaction(mesh, true)
    }

    /// `cubic_reaction = false` drops the `u^3` term, leaving the linear
    /// diffusion problem (used as the Newton initial guess and in tests).
    pub fn with_reaction(mesh: &Arc<Mesh>, cubic_reaction: bool) -> Self {
        let mass = assemble_mass(mesh);
        let mut dirichlet_nodes = mesh.boundary_top.clone();
        let mut dirichlet_values = vec![1.0; dirichlet_nodes.len()];
        dirichlet_nodes.extend_from_slice(&mesh.boundary_bottom);
        dirichlet_values.extend(std::iter::repeat(0.0).take(mesh.boundary_bottom.len()));
        Self {
            mesh: Arc::clone(mesh),
            mass,
            dirichlet_nodes,
            dirichlet_values,
            cubic_reaction,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet_nodes
    }

    pub fn dirichlet_values(&self) -> &[f64] {
        &self.dirichlet_values
    }

    /// The boundary lift: Dirichlet values on constrained nodes, zero inside.
    pub fn lift(&self) -> NodalField {
        let mut u = NodalField::zeros(self.mesh.n_nodes(), FieldRole::State);
        for (&n, &g) in self.dirichlet_nodes.iter().zip(&self.dirichlet_values) {
            u.values_mut()[n] = g;
        }
        u
    }

    /// Overwrite the Dirichlet entries of `u` with the exact boundary data.
    fn impose_boundary(&self, u: &mut NodalField) {
        for (&n, &g) in self.dirichlet_nodes.iter().zip(&self.dirichlet_values) {
            u.values_mut()[n] = g;
        }
    }

    fn check_fields(&self, u: &NodalField, m: &NodalField) -> Result<()> {
        if u.len() != self.mesh.n_nodes() || m.len() != self.mesh.n_nodes() {
            return Err(Error::invalid("field length does not match mesh"));
        }
        if !u.is_finite() || !m.is_finite() {
            return Err(Error::invalid("fields must be finite"));
        }
        Ok(())
    }

    /// Residual vector restricted to the test space (Dirichlet rows zeroed).
    pub fn assemble_residual(&self, u: &NodalField, m: &NodalField) -> Result<Vec<f64>> {
        self.check_fields(u, m)?;
        let diffusion = self.assemble_diffusion_residual(u, m);
        let mut r = diffusion;
        if self.cubic_reaction {
            let reaction = self.assemble_reaction_residual(u);
            for (ri, re) in r.iter_mut().zip(reaction) {
                *ri += re;
            }
        }
        for &n in &self.dirichlet_nodes {
            r[n] = 0.0;
        }
        Ok(r)
    }

    /// `int exp(m) grad u . grad phi_i`, unrestricted.
    pub(crate) fn assemble_diffusion_residual(&self, u: &NodalField, m: &NodalField) -> Vec<f64> {
        let mut r = vec![0.0; self.mesh.n_nodes()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let geo = self.mesh.tri_geometry(t);
            let mv = tri.map(|n| m.values()[n]);
            let uv = tri.map(|n| u.values()[n]);
            let grad_u = grad_of(&uv, &geo.grads);
            let expm: f64 = DEGREE4_6
                .iter()
                .map(|&(bary, w)| w * quadrature::interpolate(mv, bary).exp())
                .sum();
            let scale = geo.area * expm;
            for (a, &i) in tri.iter().enumerate() {
                r[i] += scale * (grad_u[0] * geo.grads[a][0] + grad_u[1] * geo.grads[a][1]);
            }
        }
        r
    }

    /// `int u^3 phi_i`, unrestricted.
    pub(crate) fn assemble_reaction_residual(&self, u: &NodalField) -> Vec<f64> {
        let mut r = vec![0.0; self.mesh.n_nodes()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let geo = self.mesh.tri_geometry(t);
            let uv = tri.map(|n| u.values()[n]);
            for &(bary, w) in &DEGREE4_6 {
                let uq = quadrature::interpolate(uv, bary);
                let common = geo.area * w * uq * uq * uq;
                for (a, &i) in tri.iter().enumerate() {
                    r[i] += common * bary[a];
                }
            }
        }
        r
    }

    /// State Jacobian `int exp(m) grad du . grad v + int 3 u^2 du v`,
    /// assembled without Dirichlet elimination. Symmetric; positive definite
    /// once the Dirichlet rows/columns are eliminated.
    pub fn assemble_jacobian(&self, u: &NodalField, m: &NodalField) -> Result<SparseMatrix> {
        self.check_fields(u, m)?;
        let mut j = SparseMatrix::zero_pattern_from_mesh(&self.mesh);
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let geo = self.mesh.tri_geometry(t);
            let mv = tri.map(|n| m.values()[n]);
            let uv = tri.map(|n| u.values()[n]);
            let expm: f64 = DEGREE4_6
                .iter()
                .map(|&(bary, w)| w * quadrature::interpolate(mv, bary).exp())
                .sum();
            let kscale = geo.area * expm;
            for (a, &i) in tri.iter().enumerate() {
                for (b, &jn) in tri.iter().enumerate() {
                    let dot =
                        geo.grads[a][0] * geo.grads[b][0] + geo.grads[a][1] * geo.grads[b][1];
                    j.add_at(i, jn, kscale * dot);
                }
            }
            if self.cubic_reaction {
                for &(bary, w) in &DEGREE4_6 {
                    let uq = quadrature::interpolate(uv, bary);
                    let common = geo.area * w * 3.0 * uq * uq;
                    for (a, &i) in tri.iter().enumerate() {
                        for (b, &jn) in tri.iter().enumerate() {
                            j.add_at(i, jn, common * bary[a] * bary[b]);
                        }
                    }
                }
            }
        }
        Ok(j)
    }

    /// Parameter derivative action `b_i = int exp(m) dm grad u . grad phi_i`,
    /// restricted to the test space.
    fn assemble_parameter_derivative(
        &self,
        u: &NodalField,
        m: &NodalField,
        dm: &NodalField,
    ) -> Vec<f64> {
        let mut r = vec![0.0; self.mesh.n_nodes()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let geo = self.mesh.tri_geometry(t);
            let mv = tri.map(|n| m.values()[n]);
            let dmv = tri.map(|n| dm.values()[n]);
            let uv = tri.map(|n| u.values()[n]);
            let grad_u = grad_of(&uv, &geo.grads);
            let weight: f64 = DEGREE4_6
                .iter()
                .map(|&(bary, w)| {
                    w * quadrature::interpolate(mv, bary).exp()
                        * quadrature::interpolate(dmv, bary)
                })
                .sum();
            let scale = geo.area * weight;
            for (a, &i) in tri.iter().enumerate() {
                r[i] += scale * (grad_u[0] * geo.grads[a][0] + grad_u[1] * geo.grads[a][1]);
            }
        }
        for &n in &self.dirichlet_nodes {
            r[n] = 0.0;
        }
        r
    }

    /// Adjoint of the parameter derivative: `y_k = int exp(m) psi_k grad u . grad z`.
    fn assemble_parameter_derivative_adjoint(
        &self,
        u: &NodalField,
        m: &NodalField,
        z: &[f64],
    ) -> Vec<f64> {
        let mut y = vec![0.0; self.mesh.n_nodes()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let geo = self.mesh.tri_geometry(t);
            let mv = tri.map(|n| m.values()[n]);
            let uv = tri.map(|n| u.values()[n]);
            let zv = tri.map(|n| z[n]);
            let grad_u = grad_of(&uv, &geo.grads);
            let grad_z = grad_of(&zv, &geo.grads);
            let dot = grad_u[0] * grad_z[0] + grad_u[1] * grad_z[1];
            for &(bary, w) in &DEGREE4_6 {
                let common = geo.area * w * quadrature::interpolate(mv, bary).exp() * dot;
                for (a, &k) in tri.iter().enumerate() {
                    y[k] += common * bary[a];
                }
            }
        }
        y
    }

    /// Solve the linear variant (`u^3` dropped) at parameter `m`. Returns the
    /// solution and the CG iteration count.
    pub fn solve_linear_variant(&self, m: &NodalField) -> Result<(NodalField, usize)> {
        let linear = Self::with_reaction(&self.mesh, false);
        let zero_state = NodalField::zeros(self.mesh.n_nodes(), FieldRole::State);
        let k = linear.assemble_jacobian(&zero_state, m)?;
        let rhs = vec![0.0; self.mesh.n_nodes()];
        let (a, b) = apply_dirichlet(&k, &rhs, &self.dirichlet_nodes, &self.dirichlet_values)?;
        let sol = cg_solve(&a, &b, CG_RTOL, 10 * b.len(), Preconditioner::Jacobi)?;
        let mut u = NodalField::new(sol.x, FieldRole::State)?;
        self.impose_boundary(&mut u);
        Ok((u, sol.iters))
    }

    /// Newton solve with backtracking line search. The initial guess is the
    /// linear-variant solution at the same parameter.
    pub fn solve_forward(
        &self,
        m: &NodalField,
        tol: f64,
        max_newton: usize,
    ) -> Result<ForwardSolution> {
        if !(tol > 0.0) {
            return Err(Error::invalid("newton tolerance must be positive"));
        }
        let (mut u, _) = self.solve_linear_variant(m)?;
        let mut r = self.assemble_residual(&u, m)?;
        let r_ref = norm(&r).max(f64::MIN_POSITIVE);
        let mut r_norm = r_ref;
        let mut history = vec![1.0];
        let mut linear_solves = 0;

        for iter in 0..max_newton {
            if r_norm <= (tol * r_ref).max(NEWTON_ATOL) {
                return Ok(ForwardSolution {
                    u,
                    newton_iters: iter,
                    final_residual_norm: r_norm / r_ref,
                    linear_solve_count: linear_solves,
                    converged: true,
                    residual_history: history,
                });
            }
            let j = self.assemble_jacobian(&u, m)?;
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let zeros = vec![0.0; self.dirichlet_nodes.len()];
            let (a, b) = apply_dirichlet(&j, &rhs, &self.dirichlet_nodes, &zeros)?;
            let delta = cg_solve(&a, &b, CG_RTOL, 10 * b.len(), Preconditioner::Jacobi)?.x;
            linear_solves += 1;

            // backtracking on the residual norm
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=LINE_SEARCH_MAX {
                let candidate = add_scaled(&u, alpha, &delta);
                let rc = self.assemble_residual(&candidate, m)?;
                let rc_norm = norm(&rc);
                if rc_norm <= (1.0 - ARMIJO_SLOPE * alpha) * r_norm {
                    accepted = Some((candidate, rc, rc_norm));
                    break;
                }
                alpha *= LINE_SEARCH_FACTOR;
            }
            let Some((next_u, next_r, next_norm)) = accepted else {
                return Err(Error::NewtonStalled {
                    iter,
                    residual: r_norm / r_ref,
                });
            };
            u = next_u;
            r = next_r;
            r_norm = next_norm;
            history.push(r_norm / r_ref);
        }

        if r_norm <= (tol * r_ref).max(NEWTON_ATOL) {
            return Ok(ForwardSolution {
                u,
                newton_iters: max_newton,
                final_residual_norm: r_norm / r_ref,
                linear_solve_count: linear_solves,
                converged: true,
                residual_history: history,
            });
        }
        Err(Error::NewtonNoConvergence {
            iters: max_newton,
            history,
        })
    }

    /// One-step residual-based correction of a state estimate `u_tilde`:
    /// solve `dR(u~, m) u_C = -R(u~, m) + dR(u~, m) u~` in the solution set.
    /// The input's Dirichlet entries are discarded and replaced by the exact
    /// boundary data before linearization, so the correction also repairs
    /// boundary error. Exactly one Jacobian assembly and one CG solve.
    pub fn error_correct(
        &self,
        u_tilde: &NodalField,
        m: &NodalField,
    ) -> Result<(NodalField, usize)> {
        self.check_fields(u_tilde, m)?;
        let mut u_hat = u_tilde.clone();
        self.impose_boundary(&mut u_hat);
        let j = self.assemble_jacobian(&u_hat, m)?;
        let r = self.assemble_residual(&u_hat, m)?;
        let ju = j.matvec_alloc(u_hat.values());
        let rhs: Vec<f64> = r.iter().zip(&ju).map(|(ri, jui)| -ri + jui).collect();
        let (a, b) = apply_dirichlet(&j, &rhs, &self.dirichlet_nodes, &self.dirichlet_values)?;
        let sol = cg_solve(&a, &b, CG_RTOL, 10 * b.len(), Preconditioner::Jacobi)?;
        let mut u_c = NodalField::new(sol.x, FieldRole::State)?;
        self.impose_boundary(&mut u_c);
        Ok((u_c, 1))
    }

    fn check_solution_point(&self, u: &NodalField, m: &NodalField) -> Result<()> {
        let r = self.assemble_residual(u, m)?;
        let rn = norm(&r);
        if rn > 1e-6 {
            return Err(Error::invalid(format!(
                "state is not a forward solution (residual norm {rn:.3e})"
            )));
        }
        Ok(())
    }

    /// Directional state derivative `dF(m) dm = -J(u, m)^{-1} d_m R(u, m) dm`
    /// at a solution point `u = F(m)`.
    pub fn tangent_action(
        &self,
        u: &NodalField,
        m: &NodalField,
        dm: &NodalField,
    ) -> Result<NodalField> {
        self.linearize_at(u, m)?.tangent(dm)
    }

    /// Adjoint of the tangent with respect to the mass inner products on the
    /// state and parameter spaces. Uses the same (symmetric) Jacobian solve
    /// as the tangent plus one cheap mass solve.
    pub fn adjoint_action(
        &self,
        u: &NodalField,
        m: &NodalField,
        w: &NodalField,
    ) -> Result<NodalField> {
        self.linearize_at(u, m)?.adjoint(w)
    }

    /// Cache the eliminated Jacobian at a solution point for repeated
    /// tangent/adjoint applications (derivative-basis construction applies
    /// them dozens of times per sample).
    pub fn linearize_at(&self, u: &NodalField, m: &NodalField) -> Result<LinearizedMap<'_>> {
        self.check_fields(u, m)?;
        self.check_solution_point(u, m)?;
        let j = self.assemble_jacobian(u, m)?;
        let zeros_rhs = vec![0.0; self.mesh.n_nodes()];
        let zeros_bc = vec![0.0; self.dirichlet_nodes.len()];
        let (jac_elim, _) = apply_dirichlet(&j, &zeros_rhs, &self.dirichlet_nodes, &zeros_bc)?;
        Ok(LinearizedMap {
            model: self,
            u: u.clone(),
            m: m.clone(),
            jac_elim,
        })
    }
}

/// Tangent/adjoint actions of the parameter-to-state map at a fixed
/// linearization point. Each action costs exactly one CG solve of the
/// Jacobian system (the adjoint adds one cheap mass solve).
#[derive(Debug, Clone)]
pub struct LinearizedMap<'a> {
    model: &'a ReactionDiffusion,
    u: NodalField,
    m: NodalField,
    jac_elim: SparseMatrix,
}

impl LinearizedMap<'_> {
    pub fn tangent(&self, dm: &NodalField) -> Result<NodalField> {
        let b = self
            .model
            .assemble_parameter_derivative(&self.u, &self.m, dm);
        let rhs: Vec<f64> = b.iter().map(|v| -v).collect();
        let sol = cg_solve(
            &self.jac_elim,
            &rhs,
            CG_RTOL,
            10 * rhs.len(),
            Preconditioner::Jacobi,
        )?;
        NodalField::new(sol.x, FieldRole::State)
    }

    pub fn adjoint(&self, w: &NodalField) -> Result<NodalField> {
        let mut mw = self.model.mass.matvec_alloc(w.values());
        for &n in &self.model.dirichlet_nodes {
            mw[n] = 0.0;
        }
        let z = cg_solve(
            &self.jac_elim,
            &mw,
            CG_RTOL,
            10 * mw.len(),
            Preconditioner::Jacobi,
        )?
        .x;
        let y = self
            .model
            .assemble_parameter_derivative_adjoint(&self.u, &self.m, &z);
        let q = cg_solve(
            &self.model.mass,
            &y,
            CG_RTOL,
            10 * y.len(),
            Preconditioner::Jacobi,
        )?
        .x;
        NodalField::new(q.into_iter().map(|v| -v).collect(), FieldRole::Parameter)
    }

    /// `adjoint(tangent(dm))`: one application of the sample's contribution
    /// to the expected Gauss-Newton operator. Two linearized solves.
    pub fn normal_action(&self, dm: &NodalField) -> Result<NodalField> {
        let t = self.tangent(dm)?;
        self.adjoint(&t)
    }
}

fn grad_of(values: &[f64; 3], grads: &[[f64; 2]; 3]) -> [f64; 2] {
    let mut g = [0.0, 0.0];
    for k in 0..3 {
        g[0] += values[k] * grads[k][0];
        g[1] += values[k] * grads[k][1];
    }
    g
}

fn add_scaled(u: &NodalField, alpha: f64, delta: &[f64]) -> NodalField {
    let values = u
        .values()
        .iter()
        .zip(delta)
        .map(|(a, d)| a + alpha * d)
        .collect();
    NodalField::new(values, FieldRole::State).expect("finite update")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
