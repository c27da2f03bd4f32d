use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use super::config::{mesh_from_params, partition_from_params, solver_from_params, OutputParams};
use crate::error::{Error, Result};
use crate::io::{Checkpoint, ParamTree};
use crate::splitting::{
    taylor_hood, AdaptiveConfig, FlowOperators, FlowProblem, FlowSolver, FlowState, Outputs, Scheme, SplitConfig,
    Stepping, TimeFn,
};

/// Lid velocity profile along the moving wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lid {
    Uniform,
    /// 16x²(1−x)² (times the same in y for 3D), vanishing at the corners.
    Regularized,
}

/// Divergence-free swirl force with a Gaussian envelope in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

/// Lid-driven cavity on the unit square or cube. The lid is the last box
/// marker (y = 1 in 2D, z = 1 in 3D) moving in x; the other walls are no-slip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cavity {
    pub nu: f64,
    pub convection: bool,
    pub lid: Lid,
    pub lid_speed: f64,
    /// Time constant τ of a start-up ramp 1 − e^(−t/τ); `None` for an
    /// impulsive start.
    pub ramp: Option<f64>,
    pub pulse: Option<Pulse>,
}

impl Cavity {
    pub fn new(nu: f64) -> Self {
        Cavity { nu, convection: false, lid: Lid::Regularized, lid_speed: 1.0, ramp: None, pulse: None }
    }

    pub fn problem(&self, dim: usize) -> FlowProblem {
        let zero: TimeFn = Arc::new(|_, _, out: &mut [f64]| out.fill(0.0));
        let (lid, speed, ramp) = (self.lid, self.lid_speed, self.ramp);
        let lid_fn: TimeFn = Arc::new(move |x: &[f64], t: f64, out: &mut [f64]| {
            out.fill(0.0);
            let profile = match lid {
                Lid::Uniform => 1.0,
                Lid::Regularized => x[..x.len() - 1].iter().map(|&s| 16.0 * s * s * (1.0 - s) * (1.0 - s)).product(),
            };
            let envelope = ramp.map_or(1.0, |tau| 1.0 - (-t / tau).exp());
            out[0] = speed * profile * envelope;
        });
        let mut dirichlet: Vec<(i32, TimeFn)> = (1..2 * dim as i32).map(|m| (m, zero.clone())).collect();
        dirichlet.push((2 * dim as i32, lid_fn));
        let force = self.pulse.map(|p| {
            let f: TimeFn = Arc::new(move |x: &[f64], t: f64, out: &mut [f64]| {
                out.fill(0.0);
                let g = p.amplitude * (-((t - p.center) / p.width).powi(2)).exp();
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                out[0] = g * PI * sx * sx * (2.0 * PI * x[1]).sin();
                out[1] = -g * PI * (2.0 * PI * x[0]).sin() * sy * sy;
            });
            f
        });
        FlowProblem { nu: self.nu, convection: self.convection, force, dirichlet }
    }
}

/// Everything an `ns` run needs, read from a parameter file.
pub struct FlowSetup {
    pub solver: FlowSolver,
    pub initial: FlowState,
    pub t_end: f64,
    pub stepping: Stepping,
    pub outputs: Outputs,
}

fn outputs(out: &OutputParams) -> Outputs {
    Outputs {
        dir: out.dir.clone(),
        prefix: out.prefix.clone(),
        csv: out.csv,
        vtk_every: if out.vtk { out.vtk_every } else { 0 },
        checkpoint_every: out.checkpoint_every,
        final_checkpoint: out.checkpoint,
    }
}

/// Reads `[mesh]`, `[partition]`, `[flow]`, `[time]`, `[solver.velocity]`,
/// `[solver.schur]` and `[output]`. Command-line values for the scheme,
/// adaptivity, rank count and restart file take precedence.
pub fn flow_from_params(
    p: &ParamTree,
    base: &Path,
    scheme: Option<Scheme>,
    adaptive: bool,
    ranks: Option<usize>,
    restart: Option<&Path>,
) -> Result<FlowSetup> {
    let mesh = Arc::new(mesh_from_params(p, base)?);
    let dim = mesh.dim();
    if mesh.markers() != (1..=2 * dim as i32).collect::<Vec<_>>() {
        return Err(Error::Config("the cavity needs a box mesh with markers 1..2d".into()));
    }
    let partition = Arc::new(partition_from_params(p, &mesh, ranks)?);
    let lid = match p.get_or("flow.lid", "regularized".to_string())?.as_str() {
        "regularized" => Lid::Regularized,
        "uniform" => Lid::Uniform,
        other => return Err(Error::Config(format!("unknown lid profile '{other}'"))),
    };
    let ramp: f64 = p.get_or("flow.ramp", 0.0)?;
    let amplitude: f64 = p.get_or("flow.pulse_amplitude", 0.0)?;
    let cavity = Cavity {
        nu: p.get_or("flow.nu", 0.01)?,
        convection: p.get_or("flow.convection", true)?,
        lid,
        lid_speed: p.get_or("flow.lid_speed", 1.0)?,
        ramp: (ramp > 0.0).then_some(ramp),
        pulse: if amplitude != 0.0 {
            Some(Pulse {
                amplitude,
                center: p.get_or("flow.pulse_center", 0.5)?,
                width: p.get_or("flow.pulse_width", 0.05)?,
            })
        } else {
            None
        },
    };
    if !(cavity.nu > 0.0) {
        return Err(Error::Config(format!("viscosity must be positive, got {}", cavity.nu)));
    }
    let scheme = match scheme {
        Some(s) => s,
        None => p.get_or("flow.scheme", "yosida".to_string())?.parse()?,
    };
    let defaults = SplitConfig::default();
    let config = SplitConfig {
        velocity: solver_from_params(p, "solver.velocity", defaults.velocity)?,
        schur: solver_from_params(p, "solver.schur", defaults.schur)?,
    };
    let (vel, pres) = taylor_hood(mesh, partition)?;
    let ops = FlowOperators::new(vel, pres)?;
    let solver = FlowSolver::new(ops, cavity.problem(dim), scheme, config);

    let dt: f64 = p.get_or("time.dt", 0.01)?;
    let t_end: f64 = p.require("time.t_end")?;
    let stepping = if adaptive || p.get_or("time.adaptive", false)? {
        let mut cfg = AdaptiveConfig::new(
            p.get_or("time.tol", 1e-3)?,
            p.get_or("time.dt_min", 1e-4)?,
            p.get_or("time.dt_max", 0.1)?,
        );
        cfg.safety = p.get_or("time.safety", cfg.safety)?;
        cfg.order = p.get_or("time.order", cfg.order)?;
        cfg.max_retries = p.get_or("time.max_retries", cfg.max_retries)?;
        cfg.validate()?;
        if !matches!(scheme, Scheme::YosidaQ(q) if q >= 1) {
            return Err(Error::Config(format!("adaptive stepping needs yosida with corrections, got {scheme}")));
        }
        Stepping::Adaptive(cfg)
    } else {
        Stepping::Fixed(dt)
    };
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let initial = match restart {
        Some(path) => {
            let c = Checkpoint::load(path)?;
            if c.scheme != scheme.to_string() {
                log::warn!("restarting a {} run with {scheme}", c.scheme);
            }
            FlowState::from_checkpoint(&solver.ops, &c)
                .map_err(|e| Error::Config(format!("checkpoint {} does not fit this setup: {e}", path.display())))?
        }
        None => match p.get_or("flow.initial", "rest".to_string())?.as_str() {
            "rest" => FlowState::zero(&solver.ops, dt),
            "steady" => FlowState { dt, ..solver.steady_state(0.0, p.get_or("flow.steady_sweeps", 4)?)? },
            other => return Err(Error::Config(format!("unknown initial state '{other}'"))),
        },
    };
    if !(t_end > initial.t) {
        return Err(Error::Config(format!("end time {t_end} is not after the start time {}", initial.t)));
    }
    let out = OutputParams::from_params(p, base, "ns")?;
    Ok(FlowSetup { solver, initial, t_end, stepping, outputs: outputs(&out) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_params;
    use crate::splitting::time_loop;

    #[test]
    fn lid_profiles() {
        let mut c = Cavity::new(1.0);
        let prob = c.problem(2);
        assert_eq!(prob.dirichlet.len(), 4);
        let (m, lid) = &prob.dirichlet[3];
        assert_eq!(*m, 4);
        let mut out = [9.0; 2];
        lid(&[0.5, 1.0], 0.0, &mut out);
        assert_eq!(out, [1.0, 0.0]);
        lid(&[0.0, 1.0], 0.0, &mut out);
        assert_eq!(out[0], 0.0);
        c.lid = Lid::Uniform;
        c.ramp = Some(0.1);
        let prob = c.problem(3);
        let mut out = [0.0; 3];
        (prob.dirichlet[5].1)(&[0.0, 0.0, 1.0], 0.1, &mut out);
        assert!((out[0] - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn pulse_force_is_centered() {
        let mut c = Cavity::new(1.0);
        c.pulse = Some(Pulse { amplitude: 2.0, center: 0.5, width: 0.1 });
        let f = c.problem(2).force.unwrap();
        let mut out = [0.0; 2];
        f(&[0.5, 0.25], 0.5, &mut out);
        assert!((out[0] - 2.0 * PI).abs() < 1e-12);
        f(&[0.5, 0.25], 1.5, &mut out);
        assert!(out[0].abs() < 1e-40);
    }

    #[test]
    fn parameters_drive_a_short_run() {
        let p = parse_params(
            "[mesh]\nn = 3\n[flow]\nnu = 0.1\nscheme = yosida2\n[time]\nt_end = 0.02\ndt = 0.01\n[output]\ncsv = false\nvtk = false\ncheckpoint = false\n",
        )
        .unwrap();
        let s = flow_from_params(&p, Path::new("."), None, false, Some(2), None).unwrap();
        assert_eq!(s.solver.scheme, Scheme::YosidaQ(2));
        let tr = time_loop(&s.solver, s.initial, s.t_end, s.stepping, &s.outputs).unwrap();
        assert_eq!(tr.records.len(), 2);
        assert!(tr.state.u.norm2() > 0.0);
    }

    #[test]
    fn adaptive_needs_corrections() {
        let p = parse_params("[mesh]\nn = 2\n[time]\nt_end = 1\n").unwrap();
        let r = flow_from_params(&p, Path::new("."), Some(Scheme::Perot), true, None, None);
        assert!(matches!(r, Err(Error::Config(_))));
        let p = parse_params("[mesh]\nn = 2\n[flow]\nscheme = chorin\n[time]\nt_end = 1\n").unwrap();
        assert!(matches!(flow_from_params(&p, Path::new("."), None, false, None, None), Err(Error::Config(_))));
    }
}
