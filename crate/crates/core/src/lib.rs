//! 2-D compressible Navier-Stokes perturbation dynamics around the plane
//! Couette flow in a periodic channel, with eps-weighted energy diagnostics,
//! low-Mach sweep experiments and a stiffness benchmark.

pub mod baseflow;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod experiments;
pub mod grid;
pub mod params;
pub mod solver;

pub use baseflow::{build_base_flow, steady_residual, BaseFlow};
pub use grid::{Grid, ScalarField};
pub use params::{build_params, PhysicalParams};
pub use solver::{PerturbationState, SolverConfig, Tendency};
