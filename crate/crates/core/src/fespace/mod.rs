//! Lagrange P1/P2 elements, quadrature rules and distributed DoF maps.

mod dofmap;
mod element;
mod quadrature;

pub use dofmap::{build_dofmap, mesh_edges, DofMap};
pub use element::{FiniteElement, TETRA_EDGES, TRIANGLE_EDGES};
pub use quadrature::{facet_quadrature_for, quadrature_for, QuadratureRule};
