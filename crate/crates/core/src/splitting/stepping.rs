use std::io::BufWriter;
use std::path::PathBuf;

use super::{build_saddle_system, solve_split, FlowOperators, FlowProblem, Scheme, SplitConfig, SplitSolution};
use crate::error::{Error, Result};
use crate::io::{write_vtk_file, Checkpoint, StatsWriter, StepRecord, VtkField};
use crate::linalg::DistVector;

/// Velocity and pressure at time `t`. `dt` is the step size proposed for
/// the next step.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub u: DistVector,
    pub p: DistVector,
}

impl FlowState {
    pub fn zero(ops: &FlowOperators, dt: f64) -> Self {
        FlowState {
            step: 0,
            t: 0.0,
            dt,
            u: DistVector::zeros(ops.vel.row_map()),
            p: DistVector::zeros(ops.pres.row_map()),
        }
    }

    pub fn checkpoint(&self, scheme: Scheme) -> Checkpoint {
        Checkpoint {
            step: self.step,
            t: self.t,
            dt: self.dt,
            scheme: scheme.to_string(),
            u: self.u.to_global(),
            p: self.p.to_global(),
        }
    }

    pub fn from_checkpoint(ops: &FlowOperators, c: &Checkpoint) -> Result<Self> {
        Ok(FlowState {
            step: c.step,
            t: c.t,
            dt: c.dt,
            u: DistVector::from_global(ops.vel.row_map(), &c.u)?,
            p: DistVector::from_global(ops.pres.row_map(), &c.p)?,
        })
    }
}

/// Step-size control driven by the last pressure correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety: f64,
    pub order: f64,
    pub max_retries: usize,
}

impl AdaptiveConfig {
    pub fn new(tol: f64, dt_min: f64, dt_max: f64) -> Self {
        AdaptiveConfig { tol, dt_min, dt_max, safety: 0.9, order: 2.0, max_retries: 5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("adaptive tolerance must be positive, got {}", self.tol)));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::Config(format!("need 0 < dt_min <= dt_max, got [{}, {}]", self.dt_min, self.dt_max)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) || !(self.order > 0.0) {
            return Err(Error::Config("safety must lie in (0, 1] and order be positive".into()));
        }
        Ok(())
    }

    /// θ·Δt·(tol/η)^(1/r), clamped to the allowed range.
    pub fn next_dt(&self, dt: f64, eta: f64) -> f64 {
        let grow = if eta > 0.0 { (self.tol / eta).powf(1.0 / self.order) } else { f64::INFINITY };
        (self.safety * dt * grow).clamp(self.dt_min, self.dt_max)
    }
}

/// Relative size of the last pressure correction, `None` without corrections.
pub fn correction_estimate(sol: &SplitSolution) -> Option<f64> {
    let last = sol.corrections.last()?;
    let pn = sol.p.norm2();
    Some(if pn > 0.0 { last.norm2() / pn } else { last.norm2() })
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: FlowState,
    pub solution: SplitSolution,
    pub record: StepRecord,
    /// False when the adaptive controller gave up on meeting the tolerance.
    pub compliant: bool,
    pub retries: usize,
}

/// Advances a flow problem with one splitting scheme.
pub struct FlowSolver {
    pub ops: FlowOperators,
    pub problem: FlowProblem,
    pub scheme: Scheme,
    pub config: SplitConfig,
}

impl FlowSolver {
    pub fn new(ops: FlowOperators, problem: FlowProblem, scheme: Scheme, config: SplitConfig) -> Self {
        FlowSolver { ops, problem, scheme, config }
    }

    /// One backward Euler step of size `dt` from `state` with `scheme`.
    pub fn solve_step(&self, state: &FlowState, dt: f64, scheme: Scheme) -> Result<SplitSolution> {
        let sys = build_saddle_system(&self.ops, &self.problem, dt, state.t + dt, &state.u, &state.p)?;
        solve_split(&sys, scheme, &self.config)
    }

    fn outcome(
        &self,
        state: &FlowState,
        dt: f64,
        next_dt: f64,
        sol: SplitSolution,
        compliant: bool,
        retries: usize,
    ) -> Result<StepOutcome> {
        let record = StepRecord {
            step: state.step + 1,
            t: state.t + dt,
            dt,
            eta: correction_estimate(&sol),
            c_iters: sol.c_iters,
            schur_iters: sol.schur_iters,
            div_norm: self.ops.divergence.mul(&sol.u)?.norm2(),
        };
        let next = FlowState { step: state.step + 1, t: state.t + dt, dt: next_dt, u: sol.u.clone(), p: sol.p.clone() };
        Ok(StepOutcome { state: next, solution: sol, record, compliant, retries })
    }

    /// Steady state for the data at time `t`: `sweeps` exact block solves
    /// with a very large step, each linearizing convection about the last.
    pub fn steady_state(&self, t: f64, sweeps: usize) -> Result<FlowState> {
        const BIG: f64 = 1e6;
        let mut s = FlowState::zero(&self.ops, BIG);
        s.t = t - BIG;
        for _ in 0..sweeps.max(1) {
            let sol = self.solve_step(&s, BIG, Scheme::ExactLu)?;
            s.u = sol.u;
            s.p = sol.p;
        }
        s.t = t;
        Ok(s)
    }

    /// Step of size `dt`, keeping `state.dt` as the proposal for the next one.
    pub fn step(&self, state: &FlowState, dt: f64) -> Result<StepOutcome> {
        let sol = self.solve_step(state, dt, self.scheme)?;
        self.outcome(state, dt, state.dt, sol, true, 0)
    }

    /// Tries `state.dt` (capped by `max_dt`), shrinking and retrying while the
    /// estimate exceeds the tolerance. The returned state carries the next
    /// proposed step size.
    pub fn adaptive_step(&self, state: &FlowState, cfg: &AdaptiveConfig, max_dt: f64) -> Result<StepOutcome> {
        cfg.validate()?;
        if !matches!(self.scheme, Scheme::YosidaQ(q) if q >= 1) {
            return Err(Error::Config(format!("adaptive stepping needs yosida with corrections, got {}", self.scheme)));
        }
        let mut dt = state.dt.clamp(cfg.dt_min, cfg.dt_max).min(max_dt);
        let mut retries = 0;
        loop {
            let sol = self.solve_step(state, dt, self.scheme)?;
            let eta = correction_estimate(&sol).expect("corrections requested");
            let proposal = cfg.next_dt(dt, eta);
            if eta <= cfg.tol {
                return self.outcome(state, dt, proposal, sol, true, retries);
            }
            if retries == cfg.max_retries || dt <= cfg.dt_min {
                log::warn!(
                    "step {} at t = {}: estimate {eta:e} above tolerance {:e} with dt = {dt:e}; accepting",
                    state.step + 1,
                    state.t + dt,
                    cfg.tol
                );
                return self.outcome(state, dt, proposal, sol, false, retries);
            }
            retries += 1;
            dt = proposal.min(max_dt);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    Fixed(f64),
    Adaptive(AdaptiveConfig),
}

/// Files written by [`time_loop`]. Step-numbered outputs land in `dir` as
/// `<prefix>_NNNNNN.vtk` and `<prefix>_NNNNNN.chk`.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub dir: PathBuf,
    pub prefix: String,
    pub csv: bool,
    /// Snapshot cadence in steps; 0 disables snapshots.
    pub vtk_every: u64,
    /// Checkpoint cadence in steps; 0 writes only the final checkpoint when
    /// `final_checkpoint` is set.
    pub checkpoint_every: u64,
    pub final_checkpoint: bool,
}

impl Outputs {
    pub fn none() -> Self {
        Outputs::default()
    }

    fn path(&self, step: Option<u64>, ext: &str) -> PathBuf {
        match step {
            Some(s) => self.dir.join(format!("{}_{s:06}.{ext}", self.prefix)),
            None => self.dir.join(format!("{}.{ext}", self.prefix)),
        }
    }

    pub fn csv_path(&self) -> PathBuf {
        self.path(None, "csv")
    }

    pub fn checkpoint_path(&self, step: Option<u64>) -> PathBuf {
        self.path(step, "chk")
    }

    pub fn vtk_path(&self, step: u64) -> PathBuf {
        self.path(Some(step), "vtk")
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub state: FlowState,
    pub records: Vec<StepRecord>,
    /// Steps accepted with the estimate above tolerance.
    pub non_compliant: usize,
}

fn write_snapshot(solver: &FlowSolver, out: &Outputs, state: &FlowState) -> Result<()> {
    let (u, p) = (state.u.to_global(), state.p.to_global());
    let fields = [
        VtkField { name: "velocity", space: &solver.ops.vel, values: &u },
        VtkField { name: "pressure", space: &solver.ops.pres, values: &p },
    ];
    write_vtk_file(out.vtk_path(state.step), solver.ops.vel.mesh(), &fields)
}

/// Marches from `initial` to `t_end`. With adaptive stepping `initial.dt` is
/// the first trial step. The final step is shortened to land on `t_end`.
pub fn time_loop(
    solver: &FlowSolver,
    initial: FlowState,
    t_end: f64,
    stepping: Stepping,
    out: &Outputs,
) -> Result<Trajectory> {
    let mut state = initial;
    if let Stepping::Fixed(dt) = stepping {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        state.dt = dt;
    }
    let writes = out.csv || out.vtk_every > 0 || out.checkpoint_every > 0 || out.final_checkpoint;
    if writes {
        std::fs::create_dir_all(&out.dir)?;
    }
    let mut csv = if out.csv {
        let append = state.step > 0 && out.csv_path().exists();
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(append)
            .write(true)
            .truncate(!append)
            .open(out.csv_path())?;
        Some(if append { StatsWriter::resume(BufWriter::new(file)) } else { StatsWriter::new(BufWriter::new(file))? })
    } else {
        None
    };
    if out.vtk_every > 0 && state.step == 0 {
        write_snapshot(solver, out, &state)?;
    }
    let mut records = Vec::new();
    let mut non_compliant = 0;
    // Stop once the remaining interval is round-off.
    while t_end - state.t > 1e-10 * state.dt.max(f64::MIN_POSITIVE) {
        let remaining = t_end - state.t;
        let o = match stepping {
            Stepping::Fixed(_) => solver.step(&state, state.dt.min(remaining))?,
            Stepping::Adaptive(cfg) => solver.adaptive_step(&state, &cfg, remaining)?,
        };
        if !o.compliant {
            non_compliant += 1;
        }
        log::info!(
            "step {} t = {:.6} dt = {:.3e} velocity its {} pressure its {} |Du| = {:.3e}",
            o.record.step,
            o.record.t,
            o.record.dt,
            o.record.c_iters,
            o.record.schur_iters,
            o.record.div_norm
        );
        state = o.state;
        if let Some(w) = csv.as_mut() {
            w.write(&o.record)?;
        }
        records.push(o.record);
        if out.vtk_every > 0 && state.step % out.vtk_every == 0 {
            write_snapshot(solver, out, &state)?;
        }
        if out.checkpoint_every > 0 && state.step % out.checkpoint_every == 0 {
            state.checkpoint(solver.scheme).save(out.checkpoint_path(Some(state.step)))?;
        }
    }
    if out.final_checkpoint {
        state.checkpoint(solver.scheme).save(out.checkpoint_path(None))?;
    }
    Ok(Trajectory { state, records, non_compliant })
}
