use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::*;
use crate::bc::Dirichlet;
use crate::io::Checkpoint;
use crate::linalg::{DistMatrix, DistVector};
use crate::mesh::{generate_box, BoxSpec};
use crate::partition::{build_dual_graph, partition_greedy, Partition};

fn operators(n: usize, ranks: usize) -> FlowOperators {
    let mesh = Arc::new(generate_box(&BoxSpec::unit(2, n)).unwrap());
    let part = if ranks == 1 {
        Partition::serial(mesh.n_cells())
    } else {
        partition_greedy(&build_dual_graph(&mesh), ranks, 7).unwrap()
    };
    let (vel, pres) = taylor_hood(mesh, Arc::new(part)).unwrap();
    FlowOperators::new(vel, pres).unwrap()
}

fn constant(v: [f64; 2]) -> TimeFn {
    Arc::new(move |_, _, out| out.copy_from_slice(&v))
}

/// Lid-driven cavity: top wall (marker 4) slides, the other walls hold.
fn cavity(nu: f64) -> FlowProblem {
    let zero = constant([0.0, 0.0]);
    FlowProblem {
        nu,
        convection: false,
        force: None,
        dirichlet: vec![(1, zero.clone()), (2, zero.clone()), (3, zero), (4, constant([1.0, 0.0]))],
    }
}

fn max_abs_diff(a: &DistVector, b: &DistVector) -> f64 {
    a.to_global().iter().zip(b.to_global()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn tight() -> SplitConfig {
    let mut cfg = SplitConfig::default();
    cfg.velocity.tol = 1e-13;
    cfg.schur.tol = 1e-13;
    cfg
}

#[test]
fn scheme_names_round_trip() {
    for s in [Scheme::ExactLu, Scheme::Perot, Scheme::Yosida, Scheme::YosidaQ(2)] {
        assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
    }
    assert!("yosidax".parse::<Scheme>().is_err());
    assert!("lu".parse::<Scheme>().is_err());
}

#[test]
fn velocity_block_without_viscosity_is_scaled_mass() {
    let ops = operators(3, 1);
    let problem = FlowProblem { nu: 0.0, convection: false, force: None, dirichlet: vec![] };
    let u0 = DistVector::zeros(ops.vel.row_map());
    let p0 = DistVector::zeros(ops.pres.row_map());
    let sys = build_saddle_system(&ops, &problem, 0.25, 0.25, &u0, &p0).unwrap();
    let (c, m) = (sys.c.to_dense(), ops.mass.to_dense());
    for (rc, rm) in c.iter().zip(&m) {
        for (x, y) in rc.iter().zip(rm) {
            assert_eq!(*x, y / 0.25);
        }
    }
    assert!(sys.pin.is_none());
}

#[test]
fn divergence_of_constant_field_vanishes() {
    let ops = operators(4, 2);
    let u = crate::assembly::interpolate(&ops.vel, |_, out| {
        out[0] = 0.7;
        out[1] = -1.3;
    });
    assert!(ops.divergence.mul(&u).unwrap().norm_inf() <= 1e-12);
}

#[test]
fn gradient_is_divergence_transpose() {
    let ops = operators(3, 2);
    let (g, d) = (ops.gradient.to_dense(), ops.divergence.to_dense());
    for (i, row) in g.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            assert!((x - d[j][i]).abs() < 1e-14);
        }
    }
}

#[test]
fn lumped_mass_is_positive_and_conservative() {
    let ops = operators(3, 1);
    assert!(ops.lumped.to_global().iter().all(|&m| m > 0.0));
    // Two components over the unit square.
    assert!((ops.lumped.sum() - 2.0).abs() < 1e-12);
}

#[test]
fn zero_data_gives_zero_solution() {
    let ops = operators(3, 2);
    let zero = constant([0.0, 0.0]);
    let problem = FlowProblem {
        nu: 1.0,
        convection: false,
        force: None,
        dirichlet: (1..=4).map(|m| (m, zero.clone())).collect(),
    };
    let u0 = DistVector::zeros(ops.vel.row_map());
    let p0 = DistVector::zeros(ops.pres.row_map());
    let sys = build_saddle_system(&ops, &problem, 0.1, 0.1, &u0, &p0).unwrap();
    assert_eq!(sys.pin, Some(0));
    for s in [Scheme::ExactLu, Scheme::Perot, Scheme::Yosida, Scheme::YosidaQ(2)] {
        let sol = solve_split(&sys, s, &SplitConfig::default()).unwrap();
        assert_eq!(sol.u.norm_inf(), 0.0);
        assert_eq!(sol.p.norm_inf(), 0.0);
    }
}

/// Solves [C G0; D 0][u; p] = [f; 0] densely, with the pinned continuity row
/// replaced by p_k = p_prev_k.
fn dense_monolithic(sys: &SaddleSystem) -> (Vec<f64>, Vec<f64>) {
    let (nu, np) = (sys.n_velocity(), sys.n_pressure());
    let mut a = DMatrix::zeros(nu + np, nu + np);
    let (c, g0, d) = (sys.c.to_dense(), sys.g0.to_dense(), sys.d.to_dense());
    for i in 0..nu {
        for j in 0..nu {
            a[(i, j)] = c[i][j];
        }
        for j in 0..np {
            a[(i, nu + j)] = g0[i][j];
        }
    }
    for i in 0..np {
        for j in 0..nu {
            a[(nu + i, j)] = d[i][j];
        }
    }
    let mut b = DVector::zeros(nu + np);
    for (i, v) in sys.rhs.to_global().into_iter().enumerate() {
        b[i] = v;
    }
    if let Some(k) = sys.pin {
        for j in 0..nu + np {
            a[(nu + k, j)] = 0.0;
        }
        a[(nu + k, nu + k)] = 1.0;
        b[nu + k] = sys.p_prev.get(k);
    }
    let x = a.lu().solve(&b).expect("nonsingular saddle system");
    (x.as_slice()[..nu].to_vec(), x.as_slice()[nu..].to_vec())
}

#[test]
fn exact_lu_matches_dense_monolithic_solve() {
    let ops = operators(4, 2);
    assert!(ops.vel.n_dofs() + ops.pres.n_dofs() <= 300);
    let problem = cavity(0.1);
    let solver = FlowSolver::new(ops, problem, Scheme::ExactLu, tight());
    let mut state = FlowState::zero(&solver.ops, 0.05);
    for _ in 0..3 {
        let sys = build_saddle_system(&solver.ops, &solver.problem, 0.05, state.t + 0.05, &state.u, &state.p).unwrap();
        let (u, p) = dense_monolithic(&sys);
        let o = solver.step(&state, 0.05).unwrap();
        let du = o.state.u.to_global().iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dp = o.state.p.to_global().iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(du < 1e-8 && dp < 1e-8, "velocity {du:e} pressure {dp:e}");
        state = o.state;
    }
}

/// With C equal to the scaled lumped mass every inexact factorization is
/// exact.
#[test]
fn splittings_agree_when_velocity_block_is_lumped_mass() {
    let ops = operators(3, 2);
    let dt = 0.1;
    let map = ops.vel.row_map();
    let triplets: Vec<_> = (0..ops.vel.n_dofs()).map(|i| (i, i, ops.lumped.get(i) / dt)).collect();
    let c = DistMatrix::from_triplets(map.clone(), map.clone(), &triplets).unwrap();
    let rhs = DistVector::from_fn(map, |i| ((i * 37 % 11) as f64 - 5.0) / 7.0);
    let p_prev = DistVector::from_fn(ops.pres.row_map(), |i| 0.01 * i as f64);
    let sys = SaddleSystem::from_blocks(
        c,
        ops.gradient.clone(),
        ops.divergence.clone(),
        ops.lumped.clone(),
        dt,
        rhs,
        p_prev,
        Dirichlet::new(vec![]),
        None,
    )
    .unwrap();
    let cfg = tight();
    let exact = solve_exact_lu(&sys, &cfg).unwrap();
    for s in [Scheme::Perot, Scheme::Yosida, Scheme::YosidaQ(1)] {
        let sol = solve_split(&sys, s, &cfg).unwrap();
        assert!(max_abs_diff(&sol.u, &exact.u) < 1e-9, "{s} velocity");
        assert!(max_abs_diff(&sol.p, &exact.p) < 1e-9, "{s} pressure");
    }
}

#[test]
fn yosida_without_corrections_is_yosida() {
    let ops = operators(3, 1);
    let problem = cavity(0.1);
    let (u0, p0) = (DistVector::zeros(ops.vel.row_map()), DistVector::zeros(ops.pres.row_map()));
    let sys = build_saddle_system(&ops, &problem, 0.05, 0.05, &u0, &p0).unwrap();
    let cfg = SplitConfig::default();
    let a = solve_yosida(&sys, &cfg).unwrap();
    let b = solve_yosida_q(&sys, &cfg, 0).unwrap();
    assert_eq!(a.u.to_global(), b.u.to_global());
    assert_eq!(a.p.to_global(), b.p.to_global());
    assert!(b.corrections.is_empty());
}

#[test]
fn splitting_errors_land_where_expected() {
    let ops = operators(4, 2);
    let problem = cavity(0.1);
    let (u0, p0) = (DistVector::zeros(ops.vel.row_map()), DistVector::zeros(ops.pres.row_map()));
    let sys = build_saddle_system(&ops, &problem, 0.05, 0.05, &u0, &p0).unwrap();
    let cfg = SplitConfig::default();
    let trace = |u: &DistVector| {
        sys.dirichlet.dofs.iter().zip(&sys.dirichlet.values).map(|(&g, &v)| (u.get(g) - v).abs()).fold(0.0, f64::max)
    };
    let perot = solve_perot(&sys, &cfg).unwrap();
    assert!(sys.d.mul(&perot.u).unwrap().norm2() <= 10.0 * cfg.schur.tol);
    assert!(trace(&perot.u) > 1e-6);
    let yosida = solve_yosida(&sys, &cfg).unwrap();
    assert!(trace(&yosida.u) <= cfg.velocity.tol);
    assert!(sys.d.mul(&yosida.u).unwrap().norm2() > 1e-8);
}

#[test]
fn pressure_gauge_changes_pressure_by_a_constant() {
    let ops = operators(4, 1);
    let problem = cavity(0.1);
    let (u0, p0) = (DistVector::zeros(ops.vel.row_map()), DistVector::zeros(ops.pres.row_map()));
    let mut sys = build_saddle_system(&ops, &problem, 0.05, 0.05, &u0, &p0).unwrap();
    let a = solve_exact_lu(&sys, &tight()).unwrap();
    sys.pin = Some(ops.pres.n_dofs() - 1);
    let b = solve_exact_lu(&sys, &tight()).unwrap();
    assert!(max_abs_diff(&a.u, &b.u) < 1e-10);
    let shift = b.p.get(0) - a.p.get(0);
    assert!(shift.abs() > 1e-6);
    let (pa, pb) = (a.p.to_global(), b.p.to_global());
    assert!(pa.iter().zip(&pb).all(|(x, y)| (y - x - shift).abs() < 1e-8));
}

#[test]
fn controller_formula() {
    let cfg = AdaptiveConfig::new(1e-3, 1e-4, 0.5);
    assert!((cfg.next_dt(0.1, 1e-3) - 0.09).abs() < 1e-15);
    assert_eq!(cfg.next_dt(0.1, 1e-12), 0.5);
    assert_eq!(cfg.next_dt(0.1, 0.0), 0.5);
    assert_eq!(cfg.next_dt(0.1, 1e6), 1e-4);
    assert!(AdaptiveConfig::new(0.0, 1e-4, 0.5).validate().is_err());
    assert!(AdaptiveConfig::new(1e-3, 1.0, 0.5).validate().is_err());
}

#[test]
fn adaptive_step_requires_corrections() {
    let solver = FlowSolver::new(operators(2, 1), cavity(0.1), Scheme::Yosida, SplitConfig::default());
    let s = FlowState::zero(&solver.ops, 0.1);
    assert!(matches!(
        solver.adaptive_step(&s, &AdaptiveConfig::new(1e-3, 1e-4, 1.0), 1.0),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn zero_problem_stays_at_rest() {
    let mut problem = cavity(0.1);
    problem.dirichlet[3].1 = constant([0.0, 0.0]);
    let solver = FlowSolver::new(operators(3, 2), problem, Scheme::YosidaQ(1), SplitConfig::default());
    let traj =
        time_loop(&solver, FlowState::zero(&solver.ops, 0.1), 0.5, Stepping::Fixed(0.1), &Outputs::none()).unwrap();
    assert_eq!(traj.records.len(), 5);
    assert_eq!(traj.state.u.norm_inf(), 0.0);
    assert_eq!(traj.state.p.norm_inf(), 0.0);
    assert!((traj.state.t - 0.5).abs() < 1e-12);
}

#[test]
fn restart_reproduces_trajectory_bitwise() {
    let dir = std::env::temp_dir().join(format!("pfem-restart-{}", std::process::id()));
    let out = Outputs {
        dir: dir.clone(),
        prefix: "run".into(),
        csv: true,
        vtk_every: 2,
        checkpoint_every: 2,
        final_checkpoint: true,
    };
    let mut problem = cavity(0.05);
    problem.convection = true;
    let solver = FlowSolver::new(operators(3, 2), problem, Scheme::YosidaQ(1), SplitConfig::default());
    let cfg = AdaptiveConfig::new(1e-2, 1e-3, 0.2);
    let full = time_loop(&solver, FlowState::zero(&solver.ops, 0.02), 0.3, Stepping::Adaptive(cfg), &out).unwrap();
    let end = std::fs::read(out.checkpoint_path(None)).unwrap();
    assert!(full.records.len() >= 3);

    let mid = Checkpoint::load(out.checkpoint_path(Some(2))).unwrap();
    let resumed = FlowState::from_checkpoint(&solver.ops, &mid).unwrap();
    let quiet = Outputs { csv: false, vtk_every: 0, checkpoint_every: 0, prefix: "resumed".into(), ..out.clone() };
    let rest = time_loop(&solver, resumed, 0.3, Stepping::Adaptive(cfg), &quiet).unwrap();
    assert_eq!(std::fs::read(quiet.checkpoint_path(None)).unwrap(), end);
    assert_eq!(rest.records, full.records[2..]);

    let csv = std::fs::read_to_string(out.csv_path()).unwrap();
    assert_eq!(csv.lines().count(), full.records.len() + 1);
    assert!(out.vtk_path(0).exists() && out.vtk_path(2).exists());
    std::fs::remove_dir_all(dir).unwrap();
}
