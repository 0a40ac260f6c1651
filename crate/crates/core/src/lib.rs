//! Fisher-KPP advection-diffusion on star-shaped river networks.
//!
//! Each branch carries `w_t = w_xx - beta w_x + w - w^2`; branches meet at
//! `x = 0` with continuity and the Kirchhoff flux balance
//! `sum_lower a w_x(0) = sum_upper a w_x(0)`.
//!
//! * [`network`]: branch specs, conservation of `a * beta`, junction weights.
//! * [`phase_plane`]: the scaled stationary ODE as a planar system and its
//!   special orbits.
//! * [`stationary`]: critical junction values, stationary profiles, far-field
//!   decay, and a time-relaxation cross-check.
//! * [`simulator`]: IMEX finite differences on the truncated star graph.
//! * [`classifier`]: washout / carrying capacity / below capacity, predicted
//!   and observed.

pub mod classifier;
pub mod error;
pub mod interp;
pub mod network;
pub mod ode;
pub mod phase_plane;
pub mod simulator;
pub mod stationary;

pub use error::{Error, Result};
