//! Spectral theory of periodic Jacobi operators on trees.
//!
//! The operator lives on the universal cover of a finite leafless graph
//! carrying a potential `b` per vertex and a positive weight `a` per edge.
//! Everything here works through the finite quotient.

pub mod aomoto;
pub mod dos;
pub mod fixtures;
pub mod graph;
pub mod mfield;
pub mod oracles;
pub mod quadrature;
pub mod truncation;

pub use graph::{DirectedEdge, GraphError, QuotientGraph, RawGraph, SpanningDecomposition};
pub use mfield::{HalfPlanePoint, MField, SolveError, SolverOptions};
pub use dos::{DensityGrid, DosError, DosOptions, SpectralReport};
