//! Unsteady incompressible flow on Taylor–Hood spaces and the algebraic
//! velocity–pressure splittings used to advance it.

mod schemes;
mod stepping;
mod system;

pub use schemes::{
    lumped_schur, solve_exact_lu, solve_perot, solve_split, solve_yosida, solve_yosida_q, Scheme, SplitConfig,
    SplitSolution,
};
pub use stepping::*;
pub use system::{build_saddle_system, lump_mass, taylor_hood, FlowOperators, FlowProblem, SaddleSystem, TimeFn};

#[cfg(test)]
mod tests;
