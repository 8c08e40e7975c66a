//! Weak-form identification of dynamics from trajectory data, with the
//! pointwise and occupation variants, an error decomposition for the
//! resulting surrogates, and a POD pipeline that reduces a 1D diffusion
//! equation to a small identified ODE system.

pub mod analysis;
pub mod bases;
pub mod error;
mod fd;
pub mod grid;
pub mod identify;
pub mod ode;
pub mod pod;

pub use error::{Error, Result};

// matrix types in the public API come from nalgebra
pub use nalgebra;
