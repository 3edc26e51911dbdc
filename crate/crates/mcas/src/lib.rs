//! Simulation engine and experiment harness for a mass-conserved
//! activator-substrate reaction-diffusion model of chemotaxis emergence.
//!
//! The evolution equation on the periodic cell boundary is
//!
//! ```text
//! du/dt = (a u^2 + alpha f(x)) (M - U(t)) / |T| - b u + k lap(u)
//! ```
//!
//! with the substrate closed out as the spatially uniform
//! `v(t) = (M - U(t)) / |T|`. The crate provides the spatial discretization
//! ([`grid`], [`spectral`]), the reaction terms and pheromone profiles
//! ([`kinetics`]), stiff-capable time stepping ([`integrator`]), observables
//! ([`diagnostics`]) and the experiment pipeline ([`harness`]) behind the
//! `mcas` command-line tool.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod integrator;
pub mod kinetics;
pub mod report;
pub mod solver;
pub mod spectral;

pub use error::{McasError, Result};
pub use grid::{Field, GridSpec, QuadratureRule};
pub use integrator::{Method, Observer, SimState, StepperConfig};
pub use kinetics::{KineticsSpec, KineticsVariant, PheromoneProfile, System};
