//! Equilibrium solver for a scalar linear-quadratic game between a player
//! using continuous feedback control and a player using impulse control.
//!
//! The workflow is: build [`GameParams`], call [`Equilibrium::solve`], then
//! query thresholds, strategies and values, roll the equilibrium forward with
//! [`simulate::rollout`], or certify it with [`verify::verify`].

pub mod equilibrium;
pub mod error;
pub mod fmt;
pub mod model;
pub mod ode;
pub mod policy;
pub mod riccati;
pub mod simulate;
pub mod verify;

pub use equilibrium::{Equilibrium, ValueSample};
pub use error::{Error, Result};
pub use model::{GameParams, ParamViolation, StateBox};
pub use policy::{Impulse, Region, ThresholdPolicy, Thresholds};
pub use riccati::{CoefficientPath, Coefficients, RiccatiConstants, DEFAULT_STEPS};
pub use simulate::{
    admissibility_check, impulse_bound, rollout, AdmissibilityReport, ImpulseBound, ImpulseEvent,
    RolloutOptions, Segment, Trajectory,
};
pub use verify::{GridSpec, Tolerances, VerificationReport};
