//! Rotation-based mixed finite elements for quasi-static Biot poroelasticity
//! on 2D triangulations.

pub mod assembly;
pub mod error;
pub mod integration;
pub mod mesh;
pub mod quadrature;
pub mod reduction;
pub mod solver;
pub mod sparse;
pub mod spaces;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
