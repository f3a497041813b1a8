//! Flux-reconstruction solver for 1D steady advection-diffusion and Burgers
//! problems, an h/p-multigrid V-cycle accelerator, and an episodic
//! environment that lets a learned policy choose the cycle parameters.

pub mod env;
pub mod fr;
pub mod multigrid;
