//! Feedback stabilization of canard cycles in planar fast-slow systems.
//!
//! The crate covers the fold normal form and the van der Pol oscillator:
//! first integrals and overflow-safe level terms ([`integrals`]), vector
//! fields ([`models`]), blow-up charts ([`blowup`]), control laws
//! ([`controllers`]), closed-loop systems ([`closed_loop`]), an adaptive
//! integrator ([`sim`]) and a mixed-mode oscillation supervisor ([`mmo`]).

pub mod blowup;
pub mod closed_loop;
pub mod controllers;
mod error;
pub mod integrals;
pub mod mmo;
pub mod models;
pub mod sim;

pub use error::{CanardError, Result};
pub use integrals::{ControllerGains, PhasePoint, ScaledLevel, SystemParams};
