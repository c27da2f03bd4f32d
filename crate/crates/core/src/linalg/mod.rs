//! Row-distributed sparse linear algebra: maps, vectors, CSR matrices,
//! Krylov solvers, ILU(0) and the algebraic additive Schwarz preconditioner.

mod dense;
mod ilu;
mod krylov;
mod map;
mod matrix;
mod schwarz;
mod vector;

pub use dense::DenseLu;
pub use ilu::{ilu0_factor, ilu0_solve, Ilu0, PIVOT_SHIFT};
pub use krylov::{
    bicgstab, cg, gmres, krylov, make_preconditioner, solve, Identity, Jacobi, LinearSolver, Method, Operator,
    Preconditioner, PreconditionerKind, SolveStats, SolverConfig,
};
pub use map::RowMap;
pub use matrix::{Csr, DistMatrix};
pub use schwarz::{
    apply_preconditioner, build_schwarz, build_schwarz_with_sets, extract_submatrix, schwarz_index_sets,
    SchwarzPreconditioner, SubdomainSolver,
};
pub use vector::DistVector;
