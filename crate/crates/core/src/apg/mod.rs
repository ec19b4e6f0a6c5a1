//! Penalty-based accelerated projected gradient method for the joint
//! association and power-control problem.

mod penalty;
mod projection;
mod solver;

pub use penalty::{penalty_terms, value_and_gradient, Penalties};
pub use projection::{project_theta, project_theta_rows, project_z, project_z_rows};
pub use solver::{apg_inner, apg_solve, ApgState, InnerStop, Point};
pub(crate) use solver::{run, Mode};

use crate::mat::Mat;
use crate::network::NetworkConfig;
use crate::se::LinkGains;
use serde::{Deserialize, Serialize};

/// Gradient of the penalized objective, as `(d/d theta, d/d z)`.
pub fn gradient(
    theta: &Mat,
    z: &Mat,
    g: &LinkGains,
    cfg: &NetworkConfig,
    chi: f64,
    mu: &[f64; 4],
) -> (Mat, Mat) {
    let (_, _, gt, gz) = value_and_gradient(theta, z, g, cfg, chi, mu);
    (gt, gz)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ApgInit {
    /// HEU association with equal power on the served UEs.
    Heuristic,
    /// Strong-set association (see [`crate::assoc::strong_set_association`])
    /// with equal power on the served UEs.
    StrongSets,
    /// Uniform random point of the feasible set.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApgParams {
    pub mu: [f64; 4],
    pub chi_init: f64,
    pub delta: f64,
    pub alpha_vbar: f64,
    pub alpha_v: f64,
    pub zeta: f64,
    pub eps: f64,
    /// Carried for completeness; no step of the method reads it.
    pub upsilon: f64,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub init: ApgInit,
    /// Extra runs from random starting points; the best outcome is kept.
    pub restarts: usize,
    /// Seed of the first random restart; restart `j` uses `restart_seed + j`.
    pub restart_seed: u64,
    /// Scale the reported SEs so every AP meets its fronthaul limit.
    pub cap_fronthaul: bool,
}

impl Default for ApgParams {
    fn default() -> Self {
        ApgParams {
            mu: [50.0, 1e3, 5e4, 10.0],
            chi_init: 1.0,
            delta: 2.0,
            alpha_vbar: 1e-4,
            alpha_v: 1e-4,
            zeta: 0.1,
            eps: 1e-3,
            upsilon: 1e-2,
            inner_tol: 1e-8,
            max_inner: 10_000,
            max_outer: 30,
            init: ApgInit::StrongSets,
            restarts: 4,
            restart_seed: 0,
            cap_fronthaul: true,
        }
    }
}

impl ApgParams {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.mu.iter().all(|&m| m >= 0.0)
            && self.chi_init > 0.0
            && self.delta > 1.0
            && self.alpha_vbar > 0.0
            && self.alpha_v > 0.0
            && (0.0..1.0).contains(&self.zeta)
            && self.eps > 0.0
            && self.inner_tol > 0.0
            && self.max_inner > 0
            && self.max_outer > 0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config("invalid APG parameters".into()))
        }
    }
}
