//! Numerical laboratory for inequalities between maximal functions, Hardy
//! and BMO norms, Jacobian determinants, singular integrals and p-harmonic
//! potentials on periodic and box-shaped grids.
//!
//! Everything runs on uniform lattices in one, two or three dimensions.
//! Operators come in pairs: a production path and, where pruning or spectral
//! shortcuts could hide a bug, a brute-force oracle that must agree bit for
//! bit. Inequality checks return structured reports rather than booleans, so
//! the observed constants can be tracked across grids and corpora.

pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod jacobian;
pub mod maximal;
pub mod mollifier;
pub mod norms;
pub mod pharmonic;
pub mod report;
pub mod rng;
pub mod singular;
pub mod spectral;
pub mod stencil;

mod sweep;

pub use error::{Error, Result};
pub use field::{MappingField, MatrixField, ScalarField, VectorField};
pub use grid::{Domain, Grid, Topology};
pub use report::InequalityReport;
pub use stencil::StencilSet;
