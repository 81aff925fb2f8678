//! Simulation and verification engine for planar point sources and point
//! vortices with complex intensities.
//!
//! * [`model`]: particles, the interaction field, and the scalar quantities
//!   attached to a state.
//! * [`integrate`]: adaptive integration, collision location and merging.
//! * [`blowup`]: relative coordinates and time-rescaled charts regular at
//!   binary collisions.
//! * [`analytic`]: closed-form two-body solutions.
//! * [`diagnostics`]: invariant reports and the winding probe.

pub mod analytic;
pub mod blowup;
pub mod diagnostics;
pub mod error;
pub mod integrate;
pub mod model;
pub mod par;

pub use error::{Error, Result};
pub use integrate::{
    integrate_adaptive, simulate, Direction, Event, EventKind, IntegratorOptions, SimulationConfig, Trajectory,
};
pub use model::{Intensity, Particle, SystemState, WeightVector};
pub use num_complex::Complex64;
