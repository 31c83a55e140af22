//! C1-conforming virtual elements for the vibration of Kirchhoff plates on
//! polygonal meshes.
//!
//! The pipeline is: [`mesh`] generation, per-cell [`element`] matrices,
//! constrained global [`assembly`], the generalized symmetric eigenproblem in
//! [`eigensolve`], and convergence studies in [`analysis`].

pub mod analysis;
pub mod assembly;
pub mod eigensolve;
pub mod element;
pub mod error;
pub mod mesh;

#[cfg(test)]
mod testing;

pub use error::{Result, VemError};
