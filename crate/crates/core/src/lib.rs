//! Joint user association and power control for downlink user-centric
//! cell-free massive MIMO.
//!
//! The crate models the network ([`network`]), evaluates spectral efficiency
//! and constraints ([`se`]), and provides two solvers for the mixed-integer
//! sum-SE problem: successive convex approximation ([`sca`]) and a
//! penalty-based accelerated projected gradient method ([`apg`]), alongside
//! the FULL and HEU baselines ([`baselines`]). [`experiment`] runs
//! Monte-Carlo sweeps over many realizations.

pub mod apg;
pub mod assoc;
pub mod baselines;
mod error;
pub mod experiment;
pub mod ipm;
pub mod mat;
pub mod network;
pub mod sca;
pub mod se;

pub use error::{Error, Result};
pub use mat::Mat;
pub use network::{NetworkConfig, Realization};
pub use se::{LinkGains, SolveOutcome};
