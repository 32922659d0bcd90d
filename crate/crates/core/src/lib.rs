//! Diffusion sampling viewed as gradient descent on the squared distance to a
//! target set.
//!
//! The crate provides finite point clouds and simple manifolds as targets,
//! exact and perturbed denoisers, noise schedules with an admissibility test
//! for (eta, nu)-bounded denoiser error, and DDIM / DDPM /
//! gradient-estimation sampling loops with per-step instrumentation.

pub mod analysis;
pub mod cli;
pub mod denoisers;
pub mod error;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod samplers;
pub mod schedules;
pub mod vecmath;

pub use error::{Error, Result};
