//! Level-set reinitialization with a discontinuous Galerkin discretization
//! of the Eikonal equation, stabilized by a blended finite-volume sub-cell scheme.

pub mod basis;
pub mod discretization;
pub mod error;
pub mod field;
pub mod fvsubcell;
pub mod geometry;
pub mod harness;
pub mod hamiltonian;
pub mod ldg;
pub mod mesh;
pub mod regularization;
pub mod timeint;

pub use discretization::Discretization;
pub use error::{Error, Result};
pub use field::LevelSetField;
pub use ldg::GradientPair;
