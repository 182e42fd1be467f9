//! Finite-horizon MDP framework for early collision-avoidance maneuver
//! decisions: conjunction risk, phasing-maneuver fuel, a CDM simulator,
//! REINFORCE training and evaluation against a 24-hour cut-off policy.

pub mod cdm;
pub mod config;
pub mod error;
pub mod eval;
pub mod geom;
pub mod maneuver;
pub mod policy;
pub mod quad;
pub mod risk;
pub mod seed;
pub mod simenv;

pub use error::{Error, ErrorClass, Result};
