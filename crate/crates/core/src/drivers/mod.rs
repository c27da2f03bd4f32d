//! Parameter-file driven runs behind the command-line tool: Poisson solves
//! and refinement studies, cavity flows, the subdomain scaling bench and
//! partition statistics.

mod bench;
mod config;
mod flow;
mod info;
mod poisson;

pub use bench::{bench_scaling, write_scaling_csv, ScalingRow, SCALING_HEADER};
pub use config::{
    box_from_params, mesh_from_params, parse_method, parse_subdomain_solver, partition_from_params, solver_from_params,
    OutputParams,
};
pub use flow::{flow_from_params, Cavity, FlowSetup, Lid, Pulse};
pub use info::{partition_info, RankInfo};
pub use poisson::{
    convergence_study, planar_normal, poisson_from_params, poisson_system, sine_gradient, sine_solution, solve_poisson,
    write_poisson_output, ConvergenceRow, PoissonData, PoissonOptions, PoissonProblem, PoissonSetup, PoissonSolution,
};
