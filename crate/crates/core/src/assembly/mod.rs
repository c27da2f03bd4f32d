//! Weak forms as expression trees and their assembly into distributed
//! matrices and vectors.
//!
//! A form is written with [`trial`], [`test`], [`grad`], [`dot`] and the
//! arithmetic operators, compiled once to a flat list of basis products, and
//! evaluated for all its terms in a single element loop.

mod assemble;
mod compile;
mod expr;
mod graph;
mod kernel;
mod norms;

pub use assemble::{
    assemble_boundary_vector, assemble_matrix, assemble_matrix_with, assemble_vector, assemble_vector_with,
    default_quadrature, interpolate, interpolate_on_boundary, interpolate_scalar, required_halo_depth, AssemblyMode,
};
pub use expr::{
    component, constant, div, dot, field, function, grad, test, trial, vector_function, Expr, FeFunction, ScalarFn,
    VectorFn,
};
pub use graph::{build_graph, MatrixGraph};
pub use norms::error_norms;
