use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::SaddleSystem;
use crate::bc::{apply_dirichlet, Dirichlet};
use crate::error::{Error, Result};
use crate::linalg::{
    krylov, DistMatrix, DistVector, LinearSolver, Method, Operator, PreconditionerKind, RowMap, SolverConfig,
    SubdomainSolver,
};

/// Velocity–pressure solution strategy for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Block LU with the exact Schur complement, solved iteratively.
    ExactLu,
    /// C⁻¹ replaced by Δt M_l⁻¹ in both factors.
    Perot,
    /// C⁻¹ replaced by Δt M_l⁻¹ in the lower factor only.
    Yosida,
    /// Yosida followed by this many pressure corrections.
    YosidaQ(usize),
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::ExactLu => write!(f, "exact-lu"),
            Scheme::Perot => write!(f, "perot"),
            Scheme::Yosida => write!(f, "yosida"),
            Scheme::YosidaQ(q) => write!(f, "yosida{q}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact-lu" => Scheme::ExactLu,
            "perot" => Scheme::Perot,
            "yosida" => Scheme::Yosida,
            _ => match s.strip_prefix("yosida").and_then(|q| q.parse().ok()) {
                Some(q) => Scheme::YosidaQ(q),
                None => return Err(Error::Config(format!("unknown scheme '{s}'"))),
            },
        })
    }
}

/// Inner solver settings for velocity (C) and pressure (Schur) systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub velocity: SolverConfig,
    pub schur: SolverConfig,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let pc = PreconditionerKind::Schwarz { overlap: 1, solver: SubdomainSolver::SparseLu };
        SplitConfig {
            velocity: SolverConfig {
                method: Method::Gmres,
                tol: 1e-10,
                max_iters: 1000,
                restart: 50,
                preconditioner: pc,
            },
            schur: SolverConfig { method: Method::Cg, tol: 1e-10, max_iters: 1000, restart: 50, preconditioner: pc },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitSolution {
    pub u: DistVector,
    pub p: DistVector,
    /// Pressure increments of the correction sweeps, in order.
    pub corrections: Vec<DistVector>,
    pub c_iters: usize,
    pub schur_iters: usize,
}

/// Repeated solves with C. Rows holding only a diagonal entry (Dirichlet
/// rows) are solved exactly after the Krylov solve.
struct VelocitySolver {
    solver: LinearSolver,
    diagonal_rows: Vec<(usize, f64)>,
    iters: AtomicUsize,
}

impl VelocitySolver {
    fn new(sys: &SaddleSystem, config: SolverConfig) -> Result<Self> {
        let diagonal_rows = sys.dirichlet.dofs.iter().map(|&g| (g, sys.c.get(g, g))).collect();
        Ok(VelocitySolver {
            solver: LinearSolver::new(sys.c.clone(), config)?,
            diagonal_rows,
            iters: AtomicUsize::new(0),
        })
    }

    fn solve(&self, b: &DistVector) -> Result<DistVector> {
        let (mut x, st) = self.solver.solve(b).map_err(|e| e.context("velocity solve"))?;
        self.iters.fetch_add(st.iterations, Ordering::Relaxed);
        if !st.converged {
            log::warn!("velocity solve stopped at relative residual {:e}", st.relative_residual);
        }
        for &(g, c) in &self.diagonal_rows {
            x.set(g, b.get(g) / c);
        }
        Ok(x)
    }
}

/// Explicit Δt D M_l⁻¹ G (G full or with Dirichlet rows cleared).
pub fn lumped_schur(sys: &SaddleSystem, full_gradient: bool) -> Result<DistMatrix> {
    let mut h = sys.lumped.clone();
    for p in h.parts_mut() {
        for v in p.iter_mut() {
            *v = sys.dt / *v;
        }
    }
    sys.d.mul_diag_mul(&h, if full_gradient { &sys.g } else { &sys.g0 })
}

/// Solves with an explicit pressure matrix, fixing the pinned DoF to zero.
struct SchurSolver {
    solver: LinearSolver,
    pin: Option<usize>,
    iters: AtomicUsize,
}

impl SchurSolver {
    fn new(mut s: DistMatrix, pin: Option<usize>, config: SolverConfig) -> Result<(Self, f64)> {
        let mut scale = 1.0;
        if let Some(k) = pin {
            let mut dummy = DistVector::zeros(s.row_map().clone());
            scale = apply_dirichlet(&mut s, &mut dummy, &Dirichlet::new(vec![(k, 0.0)]), true)?[0];
        }
        let solver = LinearSolver::new(Arc::new(s), config)?;
        Ok((SchurSolver { solver, pin, iters: AtomicUsize::new(0) }, scale))
    }

    fn solve(&self, r: &DistVector) -> Result<DistVector> {
        let mut b = r.clone();
        if let Some(k) = self.pin {
            b.set(k, 0.0);
        }
        let (x, st) = self.solver.solve(&b).map_err(|e| e.context("pressure solve"))?;
        self.iters.fetch_add(st.iterations, Ordering::Relaxed);
        if !st.converged {
            log::warn!("pressure solve stopped at relative residual {:e}", st.relative_residual);
        }
        Ok(x)
    }
}

fn momentum_rhs(sys: &SaddleSystem) -> Result<DistVector> {
    let mut f = sys.g0.mul(&sys.p_prev)?;
    f.axpby(1.0, &sys.rhs, -1.0);
    Ok(f)
}

fn finish(
    sys: &SaddleSystem,
    u: DistVector,
    delta: &DistVector,
    corrections: Vec<DistVector>,
    vs: &VelocitySolver,
    ss: usize,
) -> SplitSolution {
    let mut p = sys.p_prev.clone();
    p.axpy(1.0, delta);
    for c in &corrections {
        p.axpy(1.0, c);
    }
    SplitSolution { u, p, corrections, c_iters: vs.iters.load(Ordering::Relaxed), schur_iters: ss }
}

/// The matrix-free exact Schur operator x ↦ D C⁻¹ G0 x, with the pinned row
/// replaced by a scaled identity row.
struct ExactSchur<'a> {
    sys: &'a SaddleSystem,
    vel: &'a VelocitySolver,
    pin: Option<(usize, f64)>,
}

impl Operator for ExactSchur<'_> {
    fn domain(&self) -> &Arc<RowMap> {
        self.sys.d.row_map()
    }

    fn range(&self) -> &Arc<RowMap> {
        self.sys.d.row_map()
    }

    fn apply(&self, x: &DistVector, y: &mut DistVector) -> Result<()> {
        let w = self.vel.solve(&self.sys.g0.mul(x)?)?;
        self.sys.d.spmv(&w, y)?;
        if let Some((k, c)) = self.pin {
            y.set(k, c * x.get(k));
        }
        Ok(())
    }
}

/// Exact block factorization: the Schur system D C⁻¹ G0 δ = D C⁻¹ f is
/// solved by GMRES with nested C-solves, preconditioned by the lumped Schur
/// matrix.
pub fn solve_exact_lu(sys: &SaddleSystem, cfg: &SplitConfig) -> Result<SplitSolution> {
    let vel = VelocitySolver::new(sys, cfg.velocity)?;
    let f = momentum_rhs(sys)?;
    let (approx, scale) = SchurSolver::new(lumped_schur(sys, false)?, sys.pin, cfg.schur)?;
    let pc = approx.solver.preconditioner();
    let op = ExactSchur { sys, vel: &vel, pin: sys.pin.map(|k| (k, scale)) };
    let mut b = sys.d.mul(&vel.solve(&f)?)?;
    if let Some(k) = sys.pin {
        b.set(k, 0.0);
    }
    let mut delta = DistVector::zeros(sys.d.row_map().clone());
    let outer = SolverConfig { method: Method::Gmres, ..cfg.schur };
    let st = krylov(&op, pc, &b, &mut delta, &outer).map_err(|e| e.context("Schur solve"))?;
    if !st.converged {
        return Err(Error::Divergence(format!(
            "Schur solve stopped at relative residual {:e} after {} iterations",
            st.relative_residual, st.iterations
        )));
    }
    let mut t = sys.g0.mul(&delta)?;
    t.axpby(1.0, &f, -1.0);
    let u = vel.solve(&t)?;
    Ok(finish(sys, u, &delta, Vec::new(), &vel, st.iterations))
}

/// Inexact factorization with Δt M_l⁻¹ in both factors: exactly
/// divergence-free velocity, splitting error in the momentum equation and
/// the Dirichlet trace.
pub fn solve_perot(sys: &SaddleSystem, cfg: &SplitConfig) -> Result<SplitSolution> {
    let vel = VelocitySolver::new(sys, cfg.velocity)?;
    let (schur, _) = SchurSolver::new(lumped_schur(sys, true)?, None, cfg.schur)?;
    let tilde = vel.solve(&momentum_rhs(sys)?)?;
    let delta = schur.solve(&sys.d.mul(&tilde)?)?;
    let mut step = sys.g.mul(&delta)?;
    for (s, m) in step.parts_mut().iter_mut().zip(sys.lumped.parts()) {
        for (v, &mi) in s.iter_mut().zip(m) {
            *v *= sys.dt / mi;
        }
    }
    let mut u = tilde;
    u.axpy(-1.0, &step);
    let it = schur.iters.load(Ordering::Relaxed);
    Ok(finish(sys, u, &delta, Vec::new(), &vel, it))
}

/// Yosida scheme: lumped Schur in the lower factor, exact C-solve in the
/// upper one. Velocity Dirichlet data hold exactly; the splitting error
/// shows up in the divergence.
pub fn solve_yosida(sys: &SaddleSystem, cfg: &SplitConfig) -> Result<SplitSolution> {
    solve_yosida_q(sys, cfg, 0)
}

/// Yosida followed by `q` pressure corrections S δ_k = D u,
/// u ← u − C⁻¹ G0 δ_k, p ← p + δ_k. The increments are returned for error
/// estimation.
pub fn solve_yosida_q(sys: &SaddleSystem, cfg: &SplitConfig, q: usize) -> Result<SplitSolution> {
    let vel = VelocitySolver::new(sys, cfg.velocity)?;
    let (schur, _) = SchurSolver::new(lumped_schur(sys, false)?, sys.pin, cfg.schur)?;
    let tilde = vel.solve(&momentum_rhs(sys)?)?;
    let delta = schur.solve(&sys.d.mul(&tilde)?)?;
    let mut u = tilde;
    u.axpy(-1.0, &vel.solve(&sys.g0.mul(&delta)?)?);
    let mut corrections = Vec::with_capacity(q);
    for _ in 0..q {
        let dk = schur.solve(&sys.d.mul(&u)?)?;
        u.axpy(-1.0, &vel.solve(&sys.g0.mul(&dk)?)?);
        corrections.push(dk);
    }
    let it = schur.iters.load(Ordering::Relaxed);
    Ok(finish(sys, u, &delta, corrections, &vel, it))
}

/// Dispatches on `scheme`.
pub fn solve_split(sys: &SaddleSystem, scheme: Scheme, cfg: &SplitConfig) -> Result<SplitSolution> {
    match scheme {
        Scheme::ExactLu => solve_exact_lu(sys, cfg),
        Scheme::Perot => solve_perot(sys, cfg),
        Scheme::Yosida => solve_yosida(sys, cfg),
        Scheme::YosidaQ(q) => solve_yosida_q(sys, cfg, q),
    }
}
