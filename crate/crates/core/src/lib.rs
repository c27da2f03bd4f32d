//! Parallel finite-element toolkit with an in-process rank abstraction.
//!
//! The pipeline mirrors a distributed-memory code: a mesh is partitioned into
//! per-rank element sets, degree-of-freedom maps are built per rank, forms are
//! assembled into row-distributed matrices, and Krylov solvers preconditioned
//! by algebraic additive Schwarz solve the result. Ranks are simulated as
//! independent workers that exchange data in explicit phases.

pub mod assembly;
pub mod bc;
pub mod drivers;
pub mod error;
pub mod fespace;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod partition;
pub mod splitting;

pub use error::{Error, Result};
