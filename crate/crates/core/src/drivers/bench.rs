use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use super::poisson::{poisson_system, PoissonOptions, PoissonProblem};
use crate::error::{Error, Result};
use crate::fespace::{DofMap, FiniteElement};
use crate::linalg::{build_schwarz, krylov, DistVector, PreconditionerKind};
use crate::mesh::Mesh;
use crate::partition::{build_dual_graph, partition_greedy};

pub const SCALING_HEADER: [&str; 8] =
    ["ranks", "dofs", "iterations", "factor_time_max", "factor_time_mean", "setup_time", "solve_time", "residual"];

/// One subdomain count of a scaling run. Times are in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub ranks: usize,
    pub dofs: usize,
    pub iterations: usize,
    /// Largest and mean subdomain factorization time.
    pub factor_time_max: f64,
    pub factor_time_mean: f64,
    /// Assembly plus preconditioner construction.
    pub setup_time: f64,
    pub solve_time: f64,
    pub residual: f64,
}

/// Solves the same Poisson problem once per entry of `ranks`, with one
/// Schwarz subdomain per rank. The preconditioner in `opts` must be Schwarz.
pub fn bench_scaling(
    mesh: Arc<Mesh>,
    problem: &PoissonProblem,
    opts: &PoissonOptions,
    ranks: &[usize],
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    let PreconditionerKind::Schwarz { overlap, solver } = opts.solver.preconditioner else {
        return Err(Error::Config("the scaling bench needs the Schwarz preconditioner".into()));
    };
    if ranks.is_empty() || ranks.contains(&0) {
        return Err(Error::Config("rank counts must be a non-empty list of positive integers".into()));
    }
    let graph = build_dual_graph(&mesh);
    let el = FiniteElement::new(opts.degree, mesh.dim())?;
    let mut rows = Vec::with_capacity(ranks.len());
    for &k in ranks {
        let start = Instant::now();
        let part = Arc::new(partition_greedy(&graph, k, seed)?);
        let space = DofMap::new(mesh.clone(), part, el, 1)?;
        let (a, b) = poisson_system(&space, problem, opts)?;
        let pc = build_schwarz(&a, overlap, solver)?;
        let setup_time = start.elapsed().as_secs_f64();
        let times: Vec<f64> = pc.factor_times().iter().map(|t| t.as_secs_f64()).collect();
        let start = Instant::now();
        let mut x = DistVector::zeros(a.col_map().clone());
        let st = krylov(&a, &pc, &b, &mut x, &opts.solver)?;
        let solve_time = start.elapsed().as_secs_f64();
        if !st.converged {
            return Err(Error::Divergence(format!(
                "{k} subdomains: solve stopped at relative residual {:e} after {} iterations",
                st.relative_residual, st.iterations
            )));
        }
        log::info!("{k} subdomains: {} iterations, setup {setup_time:.3} s, solve {solve_time:.3} s", st.iterations);
        rows.push(ScalingRow {
            ranks: k,
            dofs: space.n_dofs(),
            iterations: st.iterations,
            factor_time_max: times.iter().copied().fold(0.0, f64::max),
            factor_time_mean: times.iter().sum::<f64>() / times.len() as f64,
            setup_time,
            solve_time,
            residual: st.relative_residual,
        });
    }
    Ok(rows)
}

pub fn write_scaling_csv<W: Write>(w: W, rows: &[ScalingRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.into());
    csv.write_record(SCALING_HEADER).map_err(io)?;
    for r in rows {
        csv.write_record([
            r.ranks.to_string(),
            r.dofs.to_string(),
            r.iterations.to_string(),
            format!("{:e}", r.factor_time_max),
            format!("{:e}", r.factor_time_mean),
            format!("{:e}", r.setup_time),
            format!("{:e}", r.solve_time),
            format!("{:e}", r.residual),
        ])
        .map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::poisson::PoissonData;
    use crate::linalg::SolverConfig;
    use crate::mesh::{generate_box, BoxSpec};

    fn problem() -> PoissonProblem {
        PoissonProblem { kappa: 1.0, data: PoissonData::Sine, dirichlet: vec![1, 2, 3, 4], neumann: vec![] }
    }

    #[test]
    fn one_subdomain_is_a_direct_solve() {
        let mesh = Arc::new(generate_box(&BoxSpec::unit(2, 6)).unwrap());
        let rows = bench_scaling(mesh, &problem(), &PoissonOptions::default(), &[1, 4], 0).unwrap();
        assert_eq!(rows[0].iterations, 1);
        assert!(rows[1].iterations > 1);
        assert_eq!(rows[0].dofs, 49);
        let mut buf = Vec::new();
        write_scaling_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), SCALING_HEADER.join(","));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn needs_schwarz() {
        let mesh = Arc::new(generate_box(&BoxSpec::unit(2, 2)).unwrap());
        let opts = PoissonOptions {
            solver: SolverConfig { preconditioner: PreconditionerKind::Jacobi, ..SolverConfig::default() },
            ..PoissonOptions::default()
        };
        assert!(matches!(bench_scaling(mesh, &problem(), &opts, &[1], 0), Err(Error::Config(_))));
    }
}
