use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::config::{mesh_from_params, partition_from_params, solver_from_params, OutputParams};
use crate::assembly::{
    assemble_boundary_vector, assemble_matrix_with, assemble_vector_with, constant, default_quadrature, dot,
    error_norms, function, grad, test, trial, AssemblyMode,
};
use crate::bc::{apply_dirichlet, resolve_dirichlet, BcSet};
use crate::error::{Error, Result};
use crate::fespace::{facet_quadrature_for, quadrature_for, DofMap, FiniteElement};
use crate::io::{write_vtk_file, Checkpoint, ParamTree, VtkField};
use crate::linalg::{DistMatrix, DistVector, LinearSolver, Method, SolveStats, SolverConfig};
use crate::mesh::{generate_box, BoxSpec, Mesh};
use crate::partition::{build_dual_graph, partition_greedy, Partition};

/// Data of −div(κ ∇u) = f with Dirichlet and Neumann boundary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoissonData {
    /// Manufactured u = Π sin(π x_i); source and boundary data follow from it.
    Sine,
    Constant {
        source: f64,
        dirichlet: f64,
        neumann: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonProblem {
    pub kappa: f64,
    pub data: PoissonData,
    pub dirichlet: Vec<i32>,
    pub neumann: Vec<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonOptions {
    pub degree: usize,
    pub solver: SolverConfig,
    pub symmetrize: bool,
    pub mode: AssemblyMode,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        PoissonOptions {
            degree: 1,
            solver: SolverConfig { method: Method::Cg, ..SolverConfig::default() },
            symmetrize: true,
            mode: AssemblyMode::Standard,
        }
    }
}

pub struct PoissonSolution {
    pub space: Arc<DofMap>,
    /// Solution in global numbering.
    pub u: Vec<f64>,
    pub stats: SolveStats,
    /// L2 and H1-seminorm errors when the exact solution is known.
    pub errors: Option<(f64, f64)>,
    pub setup_time: Duration,
    pub solve_time: Duration,
}

pub fn sine_solution(x: &[f64]) -> f64 {
    x.iter().map(|&xi| (PI * xi).sin()).product()
}

pub fn sine_gradient(x: &[f64], g: &mut [f64]) {
    for (k, gk) in g.iter_mut().enumerate() {
        *gk =
            x.iter().enumerate().map(|(i, &xi)| if i == k { PI * (PI * xi).cos() } else { (PI * xi).sin() }).product();
    }
}

/// Outward unit normal shared by all faces with `marker`, or an error if
/// the marked boundary is not planar.
pub fn planar_normal(mesh: &Mesh, marker: i32) -> Result<[f64; 3]> {
    let d = mesh.dim();
    let mut normal: Option<[f64; 3]> = None;
    for f in (0..mesh.n_boundary_faces()).filter(|&f| mesh.face_marker(f) == marker) {
        let fv = mesh.boundary_face(f);
        let p = |k: usize| {
            let mut x = [0.0; 3];
            x[..d].copy_from_slice(mesh.vertex(fv[k]));
            x
        };
        let (a, b) = (p(0), p(1));
        let mut n = if d == 2 {
            [b[1] - a[1], a[0] - b[0], 0.0]
        } else {
            let c = p(2);
            let (u, v) = ([b[0] - a[0], b[1] - a[1], b[2] - a[2]], [c[0] - a[0], c[1] - a[1], c[2] - a[2]]);
            [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
        };
        let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        n.iter_mut().for_each(|x| *x /= len);
        let cell = mesh.cell(mesh.face_cell(f));
        let mut inward = 0.0;
        for i in 0..d {
            let centroid = cell.iter().map(|&v| mesh.vertex(v)[i]).sum::<f64>() / cell.len() as f64;
            inward += (centroid - a[i]) * n[i];
        }
        if inward > 0.0 {
            n.iter_mut().for_each(|x| *x = -*x);
        }
        match normal {
            None => normal = Some(n),
            Some(m) if (0..3).all(|i| (m[i] - n[i]).abs() < 1e-10) => {}
            Some(_) => return Err(Error::Config(format!("boundary marker {marker} is not planar"))),
        }
    }
    normal.ok_or_else(|| Error::Config(format!("boundary marker {marker} does not occur in the mesh")))
}

fn assemble_system(space: &DofMap, problem: &PoissonProblem, mode: AssemblyMode) -> Result<(DistMatrix, DistVector)> {
    let mesh = space.mesh();
    let d = mesh.dim();
    let quad = default_quadrature(space, space)?;
    let a = assemble_matrix_with(&(problem.kappa * dot(grad(trial()), grad(test()))), space, space, &quad, None, mode)?;
    let load_quad = quadrature_for(d, 4)?;
    let kappa = problem.kappa;
    let source = match problem.data {
        PoissonData::Sine => function(move |x| kappa * d as f64 * PI * PI * sine_solution(x)),
        PoissonData::Constant { source, .. } => constant(source),
    };
    let mut b = assemble_vector_with(&(source * test()), space, &load_quad, mode)?;
    if !problem.neumann.is_empty() {
        let fq = facet_quadrature_for(d, 4)?;
        for &m in &problem.neumann {
            let g = match problem.data {
                PoissonData::Sine => {
                    let n = planar_normal(mesh, m)?;
                    function(move |x| {
                        let mut g = [0.0; 3];
                        sine_gradient(x, &mut g[..x.len()]);
                        kappa * (0..x.len()).map(|i| g[i] * n[i]).sum::<f64>()
                    })
                }
                PoissonData::Constant { neumann, .. } => constant(neumann),
            };
            b.axpy(1.0, &assemble_boundary_vector(&(g * test()), space, &fq, &[m], mode)?);
        }
    }
    Ok((a, b))
}

/// Assembled system with Dirichlet rows enforced.
pub fn poisson_system(
    space: &DofMap,
    problem: &PoissonProblem,
    opts: &PoissonOptions,
) -> Result<(DistMatrix, DistVector)> {
    if !(problem.kappa > 0.0) {
        return Err(Error::Config(format!("diffusion coefficient must be positive, got {}", problem.kappa)));
    }
    if let Some(m) = problem.dirichlet.iter().find(|m| problem.neumann.contains(m)) {
        return Err(Error::Config(format!("marker {m} is both Dirichlet and Neumann")));
    }
    let (mut a, mut b) = assemble_system(space, problem, opts.mode)?;
    let mut bcs = BcSet::new();
    for &m in &problem.dirichlet {
        bcs = match problem.data {
            PoissonData::Sine => bcs.dirichlet_scalar(m, sine_solution),
            PoissonData::Constant { dirichlet, .. } => bcs.dirichlet_scalar(m, move |_| dirichlet),
        };
    }
    let dir = resolve_dirichlet(space, &bcs)?;
    apply_dirichlet(&mut a, &mut b, &dir, opts.symmetrize)?;
    Ok((a, b))
}

/// Assembles, enforces Dirichlet rows and solves. Solver divergence or a
/// solve that stops short of the tolerance is reported as
/// [`Error::Divergence`].
pub fn solve_poisson(
    mesh: Arc<Mesh>,
    partition: Arc<Partition>,
    problem: &PoissonProblem,
    opts: &PoissonOptions,
) -> Result<PoissonSolution> {
    let start = Instant::now();
    let el = FiniteElement::new(opts.degree, mesh.dim())?;
    let space = Arc::new(DofMap::new(mesh, partition, el, 1)?);
    let (a, b) = poisson_system(&space, problem, opts)?;
    let solver = LinearSolver::new(Arc::new(a), opts.solver)?;
    let setup_time = start.elapsed();
    let start = Instant::now();
    let (x, stats) = solver.solve(&b).map_err(|e| e.context("Poisson solve"))?;
    let solve_time = start.elapsed();
    if !stats.converged {
        return Err(Error::Divergence(format!(
            "Poisson solve stopped at relative residual {:e} after {} iterations",
            stats.relative_residual, stats.iterations
        )));
    }
    let u = x.to_global();
    let errors = match problem.data {
        PoissonData::Sine => Some(error_norms(&space, &u, sine_solution, sine_gradient)?),
        PoissonData::Constant { .. } => None,
    };
    Ok(PoissonSolution { space, u, stats, errors, setup_time, solve_time })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dofs: usize,
    pub iterations: usize,
    pub l2: f64,
    pub h1: f64,
    /// Observed orders against the previous (coarser) level.
    pub l2_order: Option<f64>,
    pub h1_order: Option<f64>,
}

/// Solves the manufactured problem on `levels` boxes, doubling the
/// subdivisions of `spec` each time, and reports errors with observed orders.
pub fn convergence_study(
    spec: &BoxSpec,
    levels: usize,
    ranks: usize,
    problem: &PoissonProblem,
    opts: &PoissonOptions,
) -> Result<Vec<ConvergenceRow>> {
    if problem.data != PoissonData::Sine {
        return Err(Error::Config("a convergence study needs the manufactured solution".into()));
    }
    if levels == 0 {
        return Err(Error::Config("a convergence study needs at least one level".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    let mut spec = spec.clone();
    for _ in 0..levels {
        let mesh = Arc::new(generate_box(&spec)?);
        let part = Arc::new(partition_greedy(&build_dual_graph(&mesh), ranks, 0)?);
        let sol = solve_poisson(mesh, part, problem, opts)?;
        let (l2, h1) = sol.errors.expect("manufactured solution");
        let h = spec.bounds.iter().zip(&spec.subdivisions).map(|(b, &k)| (b.1 - b.0) / k as f64).fold(0.0, f64::max);
        let order = |prev: f64, cur: f64, hp: f64| (prev / cur).ln() / (hp / h).ln();
        let (l2_order, h1_order) = match rows.last() {
            Some(p) => (Some(order(p.l2, l2, p.h)), Some(order(p.h1, h1, p.h))),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            n: spec.subdivisions[0],
            h,
            dofs: sol.space.n_dofs(),
            iterations: sol.stats.iterations,
            l2,
            h1,
            l2_order,
            h1_order,
        });
        spec.subdivisions.iter_mut().for_each(|k| *k *= 2);
    }
    Ok(rows)
}

/// Everything a Poisson run needs, read from a parameter file.
pub struct PoissonSetup {
    pub mesh: Arc<Mesh>,
    pub partition: Arc<Partition>,
    pub problem: PoissonProblem,
    pub options: PoissonOptions,
    pub output: OutputParams,
}

/// Reads `[mesh]`, `[partition]`, `[fe]`, `[problem]`, `[solver]`,
/// `[assembly]` and `[output]`. Unlisted boundary markers default to
/// Dirichlet.
pub fn poisson_from_params(p: &ParamTree, base: &Path, ranks: Option<usize>) -> Result<PoissonSetup> {
    let mesh = Arc::new(mesh_from_params(p, base)?);
    let partition = Arc::new(partition_from_params(p, &mesh, ranks)?);
    let data = match p.get_or("problem.solution", "sine".to_string())?.as_str() {
        "sine" => PoissonData::Sine,
        "constant" => PoissonData::Constant {
            source: p.get_or("problem.source", 1.0)?,
            dirichlet: p.get_or("problem.dirichlet_value", 0.0)?,
            neumann: p.get_or("problem.neumann_value", 0.0)?,
        },
        other => return Err(Error::Config(format!("unknown Poisson solution '{other}'"))),
    };
    let neumann: Vec<i32> =
        p.get::<Vec<usize>>("problem.neumann")?.unwrap_or_default().into_iter().map(|m| m as i32).collect();
    let dirichlet = match p.get::<Vec<usize>>("problem.dirichlet")? {
        Some(m) => m.into_iter().map(|m| m as i32).collect(),
        None => mesh.markers().into_iter().filter(|m| *m != 0 && !neumann.contains(m)).collect(),
    };
    let problem = PoissonProblem { kappa: p.get_or("problem.kappa", 1.0)?, data, dirichlet, neumann };
    let defaults = PoissonOptions::default();
    let mode = match p.get_or("assembly.mode", "standard".to_string())?.as_str() {
        "standard" => AssemblyMode::Standard,
        "overlapped" => AssemblyMode::Overlapped,
        other => return Err(Error::Config(format!("unknown assembly mode '{other}'"))),
    };
    let options = PoissonOptions {
        degree: p.get_or("fe.degree", 1)?,
        solver: solver_from_params(p, "solver", defaults.solver)?,
        symmetrize: p.get_or("solver.symmetrize", true)?,
        mode,
    };
    let output = OutputParams::from_params(p, base, "poisson")?;
    Ok(PoissonSetup { mesh, partition, problem, options, output })
}

/// Writes the solution as VTK and as a checkpoint (`u` only, `p` empty)
/// according to `out`.
pub fn write_poisson_output(sol: &PoissonSolution, out: &OutputParams) -> Result<()> {
    if !out.vtk && !out.checkpoint {
        return Ok(());
    }
    std::fs::create_dir_all(&out.dir)?;
    if out.vtk {
        let fields = [VtkField { name: "u", space: &sol.space, values: &sol.u }];
        write_vtk_file(out.dir.join(format!("{}.vtk", out.prefix)), sol.space.mesh(), &fields)?;
    }
    if out.checkpoint {
        let c = Checkpoint { step: 0, t: 0.0, dt: 0.0, scheme: "poisson".into(), u: sol.u.clone(), p: Vec::new() };
        c.save(out.dir.join(format!("{}.chk", out.prefix)))?;
    }
    Ok(())
}
