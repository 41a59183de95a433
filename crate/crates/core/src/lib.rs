//! Finite-control-set model predictive current control for PMSM drives.
//!
//! The crate contains the plant model ([`machine`]), the inverter's finite
//! control set ([`inverter`]), single-step ([`mpcc`]) and multi-step
//! ([`multistep`]) current controllers, the outer speed loop ([`speed`]), a
//! deterministic closed-loop simulator ([`sim`]), post-hoc metrics
//! ([`analysis`]), and the scenario/config plumbing behind the command-line
//! runner ([`config`], [`runner`]).

pub mod analysis;
pub mod config;
pub mod error;
pub mod inverter;
pub mod machine;
pub mod mpcc;
pub mod multistep;
pub mod runner;
pub mod sim;
pub mod speed;
pub mod transforms;

pub use error::{Error, Result};
