use std::sync::Arc;

use crate::assembly::{
    assemble_matrix_with, assemble_vector, build_graph, div, dot, field, grad, test, trial, vector_function,
    AssemblyMode, FeFunction, MatrixGraph,
};
use crate::bc::{apply_dirichlet, resolve_dirichlet, BcSet, Dirichlet};
use crate::error::{Error, Result};
use crate::fespace::{quadrature_for, DofMap, FiniteElement, QuadratureRule};
use crate::linalg::{DistMatrix, DistVector};
use crate::mesh::Mesh;
use crate::partition::Partition;

/// Space-time data, evaluated at (x, t) into one value per component.
pub type TimeFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Unsteady incompressible flow: ∂u/∂t + (β·∇)u − ν Δu + ∇p = f, div u = 0.
#[derive(Clone)]
pub struct FlowProblem {
    pub nu: f64,
    /// Oseen convection with β the previous velocity.
    pub convection: bool,
    pub force: Option<TimeFn>,
    /// Velocity Dirichlet data per boundary marker.
    pub dirichlet: Vec<(i32, TimeFn)>,
}

impl FlowProblem {
    pub fn dirichlet_at(&self, vel: &DofMap, t: f64) -> Result<Dirichlet> {
        let mut bcs = BcSet::new();
        for (m, g) in &self.dirichlet {
            let g = g.clone();
            bcs = bcs.dirichlet(*m, move |x, out| g(x, t, out));
        }
        resolve_dirichlet(vel, &bcs)
    }
}

/// P2 velocity and P1 pressure spaces on one partition.
pub fn taylor_hood(mesh: Arc<Mesh>, partition: Arc<Partition>) -> Result<(Arc<DofMap>, Arc<DofMap>)> {
    let dim = mesh.dim();
    let vel = DofMap::new(mesh.clone(), partition.clone(), FiniteElement::p2(dim), dim)?;
    let pres = DofMap::new(mesh, partition, FiniteElement::p1(dim), 1)?;
    Ok((Arc::new(vel), Arc::new(pres)))
}

/// The time-independent matrices of a Taylor–Hood discretization.
pub struct FlowOperators {
    pub vel: Arc<DofMap>,
    pub pres: Arc<DofMap>,
    pub mass: DistMatrix,
    pub stiffness: DistMatrix,
    /// D: pressure rows, velocity columns, entries −∫ q div φ.
    pub divergence: DistMatrix,
    /// Dᵀ assembled directly: velocity rows, pressure columns.
    pub gradient: DistMatrix,
    /// Diagonal lumped mass, see [`lump_mass`].
    pub lumped: DistVector,
    vel_graph: MatrixGraph,
    quad: QuadratureRule,
}

/// Diagonal lumping m_i = M_ii · ΣM / Σ diag(M). It keeps the total mass and
/// stays positive for quadratic elements, whose vertex row sums vanish.
pub fn lump_mass(m: &DistMatrix) -> DistVector {
    let diag = m.diagonal();
    let total: f64 = (0..m.n_rows()).map(|i| m.row(i).1.iter().sum::<f64>()).sum();
    let mut l = diag.clone();
    l.scale(total / diag.sum());
    l
}

impl FlowOperators {
    pub fn new(vel: Arc<DofMap>, pres: Arc<DofMap>) -> Result<Self> {
        let dim = vel.mesh().dim();
        if vel.components() != dim || pres.components() != 1 {
            return Err(Error::Dimension("velocity needs one component per dimension, pressure one".into()));
        }
        let quad = quadrature_for(dim, 4)?;
        let vel_graph = build_graph(&vel, &vel)?;
        let std = AssemblyMode::Standard;
        let mass = assemble_matrix_with(&dot(trial(), test()), &vel, &vel, &quad, Some(&vel_graph), std)?;
        let stiffness =
            assemble_matrix_with(&dot(grad(trial()), grad(test())), &vel, &vel, &quad, Some(&vel_graph), std)?;
        let divergence = assemble_matrix_with(&(-(test() * div(trial()))), &pres, &vel, &quad, None, std)?;
        let gradient = assemble_matrix_with(&(-(div(test()) * trial())), &vel, &pres, &quad, None, std)?;
        let lumped = lump_mass(&mass);
        Ok(FlowOperators { vel, pres, mass, stiffness, divergence, gradient, lumped, vel_graph, quad })
    }

    /// Oseen convection matrix ∫ ((∇u) β)·v.
    pub fn convection(&self, beta: &DistVector) -> Result<DistMatrix> {
        let b = FeFunction::from_dist(self.vel.clone(), beta)?;
        let form = dot(grad(trial()) * field(&b), test());
        assemble_matrix_with(&form, &self.vel, &self.vel, &self.quad, Some(&self.vel_graph), AssemblyMode::Standard)
    }

    pub fn load(&self, f: &TimeFn, t: f64) -> Result<DistVector> {
        let f = f.clone();
        let dim = self.vel.mesh().dim();
        let form = dot(vector_function(dim, move |x, out| f(x, t, out)), test());
        assemble_vector(&form, &self.vel, &self.quad)
    }

    /// True when every boundary face is a velocity Dirichlet face, so the
    /// pressure is only defined up to a constant.
    pub fn enclosed(&self, problem: &FlowProblem) -> bool {
        let markers = self.vel.mesh().markers();
        markers.iter().all(|m| problem.dirichlet.iter().any(|(d, _)| d == m))
    }
}

/// One time step of the discrete problem
///
/// ```text
/// [ C  G0 ] [u]   [f]
/// [ D  0  ] [p] = [0]
/// ```
///
/// with G0 the gradient with Dirichlet rows cleared. Splittings solve for the
/// increment over `p_prev`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub c: Arc<DistMatrix>,
    /// Gradient including Dirichlet rows.
    pub g: Arc<DistMatrix>,
    pub g0: Arc<DistMatrix>,
    pub d: Arc<DistMatrix>,
    pub lumped: DistVector,
    pub dt: f64,
    pub rhs: DistVector,
    pub p_prev: DistVector,
    pub dirichlet: Dirichlet,
    /// Pressure DoF fixed to zero when the pressure has a constant null space.
    pub pin: Option<usize>,
}

impl SaddleSystem {
    /// Wraps given blocks; `c` must already carry its Dirichlet rows.
    #[allow(clippy::too_many_arguments)]
    pub fn from_blocks(
        c: DistMatrix,
        g: DistMatrix,
        d: DistMatrix,
        lumped: DistVector,
        dt: f64,
        rhs: DistVector,
        p_prev: DistVector,
        dirichlet: Dirichlet,
        pin: Option<usize>,
    ) -> Result<Self> {
        let (nu, np) = (c.n_rows(), d.n_rows());
        if c.n_cols() != nu || g.n_rows() != nu || g.n_cols() != np || d.n_cols() != nu {
            return Err(Error::Dimension("saddle blocks have inconsistent shapes".into()));
        }
        if lumped.len() != nu || rhs.len() != nu || p_prev.len() != np {
            return Err(Error::Dimension("saddle vectors have inconsistent lengths".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let mut g0 = g.clone();
        g0.zero_rows(&dirichlet.dofs);
        Ok(SaddleSystem {
            c: Arc::new(c),
            g: Arc::new(g),
            g0: Arc::new(g0),
            d: Arc::new(d),
            lumped,
            dt,
            rhs,
            p_prev,
            dirichlet,
            pin,
        })
    }

    pub fn n_velocity(&self) -> usize {
        self.c.n_rows()
    }

    pub fn n_pressure(&self) -> usize {
        self.d.n_rows()
    }
}

/// Backward Euler step from `u_prev` to time `t_new`:
/// C = M/Δt + νK (+ N(u_prev)), f = M u_prev/Δt + F(t_new).
pub fn build_saddle_system(
    ops: &FlowOperators,
    problem: &FlowProblem,
    dt: f64,
    t_new: f64,
    u_prev: &DistVector,
    p_prev: &DistVector,
) -> Result<SaddleSystem> {
    let mut c = ops.mass.add(1.0 / dt, &ops.stiffness, problem.nu)?;
    if problem.convection {
        c = c.add(1.0, &ops.convection(u_prev)?, 1.0)?;
    }
    let mut rhs = ops.mass.mul(u_prev)?;
    rhs.scale(1.0 / dt);
    if let Some(f) = &problem.force {
        rhs.axpy(1.0, &ops.load(f, t_new)?);
    }
    let dirichlet = problem.dirichlet_at(&ops.vel, t_new)?;
    apply_dirichlet(&mut c, &mut rhs, &dirichlet, false)?;
    let pin = ops.enclosed(problem).then_some(0);
    SaddleSystem::from_blocks(
        c,
        ops.gradient.clone(),
        ops.divergence.clone(),
        ops.lumped.clone(),
        dt,
        rhs,
        p_prev.clone(),
        dirichlet,
        pin,
    )
}
