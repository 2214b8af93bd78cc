//! Traffic shaping of connected automated vehicle platoons with variable
//! time-gaps.
//!
//! The crate designs time-gap and velocity profiles over roadway location
//! that respect a braking-based safety region, drives a platoon along them
//! with feedback-linearizing controllers formulated in the location domain,
//! and audits the result for stability, safety and merge feasibility.

pub mod config;
pub mod controller;
pub mod error;
pub mod numfmt;
pub mod profiles;
pub mod safety;
pub mod sim;

pub use controller::{ControllerGains, V_FLOOR};
pub use error::{Error, Result};
pub use profiles::{design_profile, optimize_gamma, Parity, ShapingProfile};
pub use safety::{OperatingPoint, SafetyParams};
pub use sim::{simulate_platoon, PlatoonTrace, Scenario};
