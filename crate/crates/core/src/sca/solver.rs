use super::subproblem::{
    convexified_constraints, convexified_with_fixed_assoc, ConvexSubproblem, ScaIterate,
};
use super::surrogate::assoc_penalty;
use crate::apg::{apg_solve, ApgParams};
use crate::assoc::{build_outcome, mask_power, round_association, strong_set_association, RunInfo};
use crate::baselines::heu_associate;
use crate::error::{Error, Result};
use crate::ipm::{self, IpmOptions};
use crate::mat::Mat;
use crate::network::{NetworkConfig, Realization};
use crate::se::{
    ap_powers, fronthaul_load, interference_from_powers, se_per_ue, FeasibilityOptions, LinkGains,
    SolveOutcome,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaParams {
    /// Weight of the relaxation penalty `sum (a - a^2)`.
    pub lambda: f64,
    /// Relative change of the objective at which the outer loop stops.
    pub tol: f64,
    pub max_iters: usize,
    #[serde(skip)]
    pub ipm: IpmOptions,
    /// Largest acceptable `sum (a - a^2) / (M K)` before rounding.
    pub integrality_threshold: f64,
    /// Scale reported SEs so that no AP exceeds its fronthaul limit.
    pub cap_fronthaul: bool,
    /// Power-only iterations run after rounding, with the association fixed.
    pub polish_iters: usize,
    pub init: ScaInit,
}

impl Default for ScaParams {
    fn default() -> Self {
        ScaParams {
            lambda: 100.0,
            tol: 1e-3,
            max_iters: 50,
            ipm: IpmOptions::default(),
            integrality_threshold: 5e-5,
            cap_fronthaul: true,
            polish_iters: 10,
            init: ScaInit::FirstOrder,
        }
    }
}

impl ScaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::Config(
                "SCA needs lambda >= 0, tol > 0 and max_iters > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Solves one convex subproblem starting from `start`.
pub fn solve_subproblem(
    sub: &ConvexSubproblem,
    start: &ScaIterate,
    opts: &IpmOptions,
) -> Result<(ScaIterate, ipm::IpmSolution)> {
    let x0 = sub.to_vector(start);
    let sol = ipm::solve(&sub.problem, &x0, opts)?;
    if !sol.x.iter().all(|v| v.is_finite()) {
        return Err(Error::Subproblem("non-finite subproblem solution".into()));
    }
    let mut it = sub.from_vector(&sol.x);
    for v in it.a.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
    for v in it.theta.as_mut_slice() {
        *v = v.max(0.0);
    }
    Ok((it, sol))
}

/// Association used to build the starting iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScaInit {
    /// Greedy HEU association.
    Heuristic,
    /// Every AP serves the UEs in its strong set; uncovered UEs join their
    /// strongest AP.
    StrongSets,
    /// All entries equal to the given fraction.
    Uniform(f64),
    /// Association and power returned by [`apg_solve`] with default
    /// parameters; strong sets if that solve fails.
    FirstOrder,
}

/// Association matrix for `init`.
pub fn initial_association(r: &Realization, cfg: &NetworkConfig, init: ScaInit) -> Mat {
    match init {
        ScaInit::Heuristic => heu_associate(r, cfg),
        ScaInit::StrongSets | ScaInit::FirstOrder => strong_set_association(r),
        ScaInit::Uniform(f) => Mat::filled(r.num_aps(), r.num_ues(), f.clamp(0.0, 1.0)),
    }
}

/// Starting iterate for association `a`: equal power over each AP's links
/// with `theta^2 <= a`, power shifted greedily toward UEs below the QoS
/// target, then scaled down until no fronthaul load exceeds the cap.
pub fn initial_iterate(a: Mat, r: &Realization, g: &LinkGains, cfg: &NetworkConfig) -> ScaIterate {
    let mut theta = Mat::from_fn(a.rows(), a.cols(), |m, k| {
        (a[(m, k)] / a.row_sum(m).max(1.0)).sqrt()
    });
    for _ in 0..20 * cfg.num_ues {
        let se = se_per_ue(&theta, g);
        let Some(k) = (0..se.len())
            .filter(|&k| se[k] < cfg.qos_se)
            .min_by(|&i, &j| se[i].total_cmp(&se[j]))
        else {
            break;
        };
        let best = (0..theta.rows())
            .filter(|&m| a[(m, k)] > 0.0)
            .max_by(|&i, &j| r.beta[(i, k)].total_cmp(&r.beta[(j, k)]));
        let Some(m) = best else { break };
        let cap = a[(m, k)].sqrt();
        if theta[(m, k)] >= cap {
            break;
        }
        theta[(m, k)] = (2.0 * theta[(m, k)]).max(0.1 * cap).min(cap);
        let norm = theta.row(m).iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm > 1.0 {
            theta.row_mut(m).iter_mut().for_each(|t| *t /= norm);
        }
    }
    iterate_from_power(a, theta, g, cfg)
}

/// Iterate with association `a` and power `theta` (scaled into the fronthaul
/// limits) and slacks consistent with them.
pub fn iterate_from_power(a: Mat, theta: Mat, g: &LinkGains, cfg: &NetworkConfig) -> ScaIterate {
    let theta = within_fronthaul(theta, &a, g, cfg);
    let se = se_per_ue(&theta, g);
    let w_hat = interference_from_powers(&ap_powers(&theta), g);
    ScaIterate {
        a,
        t: se.iter().map(|s| s.max(cfg.qos_se)).collect(),
        t_hat: se,
        theta,
        w_hat,
    }
}

fn starting_iterate(
    r: &Realization,
    cfg: &NetworkConfig,
    g: &LinkGains,
    init: ScaInit,
    notes: &mut Vec<String>,
) -> ScaIterate {
    if init == ScaInit::FirstOrder {
        match apg_solve(r, cfg, &ApgParams::default(), None) {
            Ok(o) => return iterate_from_power(o.assoc, o.theta, g, cfg),
            Err(e) => notes.push(format!("first-order start failed ({e}); using strong sets")),
        }
    }
    initial_iterate(initial_association(r, cfg, init), r, g, cfg)
}

/// Scales `theta` by the largest common factor in `(0, 1]` that keeps every
/// fronthaul load within the cap. SEs grow with the factor, so bisection applies.
fn within_fronthaul(theta: Mat, a: &Mat, g: &LinkGains, cfg: &NetworkConfig) -> Mat {
    let peak = |c: f64| {
        let se = se_per_ue(&theta.map(|t| t * c), g);
        fronthaul_load(a, &se).into_iter().fold(0.0, f64::max)
    };
    if peak(1.0) <= cfg.fronthaul_cap {
        return theta;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if peak(mid) <= cfg.fronthaul_cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    theta.map(|t| t * lo)
}

/// Rebases an iterate at its own power: slacks are kept, but `w_hat` is
/// floored at 1 where the solver left it marginally below.
fn rebase(mut it: ScaIterate) -> ScaIterate {
    for w in &mut it.w_hat {
        *w = w.max(1.0);
    }
    it
}

/// Successive convex approximation of the relaxed problem, followed by
/// rounding of the association.
pub fn sca_solve(
    r: &Realization,
    cfg: &NetworkConfig,
    params: &ScaParams,
    init: Option<ScaIterate>,
) -> Result<SolveOutcome> {
    params.validate()?;
    let start = Instant::now();
    let g = LinkGains::new(r, cfg);
    let mut notes = Vec::new();
    let mut x = match init {
        Some(x) => x,
        None => starting_iterate(r, cfg, &g, params.init, &mut notes),
    };
    let mut trace = Vec::new();
    let mut ipm_iters = 0;
    let mut converged = false;

    for _ in 0..params.max_iters {
        let sub = convexified_constraints(&x, &g, cfg, params.lambda);
        let (next, sol) = solve_subproblem(&sub, &x, &params.ipm)?;
        ipm_iters += sol.iterations;
        if !sol.converged {
            notes.push(format!(
                "subproblem {} stopped at primal {:.2e}, dual {:.2e}",
                trace.len(),
                sol.primal_residual,
                sol.dual_residual
            ));
        }
        x = rebase(next);
        let obj = x.objective(params.lambda);
        let done = trace
            .last()
            .is_some_and(|&prev: &f64| (prev - obj).abs() <= params.tol * prev.abs().max(1.0));
        trace.push(obj);
        if done {
            converged = true;
            break;
        }
    }

    let gap = integrality_gap(&x.a);
    if gap > params.integrality_threshold {
        notes.push(format!(
            "association not integral: normalized gap {gap:.2e}"
        ));
    }
    let a = round_association(&x.a, &r.beta, cfg.max_served);
    let mut theta = mask_power(&x.theta, &a);
    if params.polish_iters > 0 {
        match polish(&x, &a, &theta, &g, cfg, params) {
            Ok((t, iters)) => {
                theta = t;
                ipm_iters += iters;
            }
            Err(e) => notes.push(format!("power polishing failed: {e}")),
        }
    }
    notes.push(format!("{ipm_iters} interior-point iterations"));
    let info = RunInfo {
        iterations: trace.len(),
        wall_time: start.elapsed().as_secs_f64(),
        objective_trace: trace,
        converged,
        notes,
    };
    Ok(build_outcome(
        theta,
        a,
        &g,
        cfg,
        &FeasibilityOptions::default(),
        params.cap_fronthaul,
        info,
    ))
}

/// Runs SCA iterations over power and slacks with the association fixed at
/// `a`, starting from `theta`. Returns the final power and the number of
/// interior-point iterations spent.
fn polish(
    relaxed: &ScaIterate,
    a: &Mat,
    theta: &Mat,
    g: &LinkGains,
    cfg: &NetworkConfig,
    params: &ScaParams,
) -> Result<(Mat, usize)> {
    let se = se_per_ue(theta, g);
    let mut x = ScaIterate {
        a: a.clone(),
        theta: theta.clone(),
        t: se.iter().map(|s| s.max(cfg.qos_se)).collect(),
        t_hat: se
            .iter()
            .zip(&relaxed.t_hat)
            .map(|(s, t)| s.max(*t))
            .collect(),
        w_hat: interference_from_powers(&ap_powers(theta), g),
    };
    let mut iters = 0;
    let mut prev = f64::INFINITY;
    for _ in 0..params.polish_iters {
        let sub = convexified_with_fixed_assoc(&x, g, cfg, a);
        let (mut next, sol) = solve_subproblem(&sub, &x, &params.ipm)?;
        iters += sol.iterations;
        next.a = a.clone();
        next.theta = mask_power(&next.theta, a);
        x = rebase(next);
        let obj = -x.t.iter().sum::<f64>();
        if (prev - obj).abs() <= params.tol * obj.abs().max(1.0) {
            break;
        }
        prev = obj;
    }
    Ok((x.theta, iters))
}

/// Normalized relaxation gap `sum (a - a^2) / (M K)`.
pub fn integrality_gap(a: &Mat) -> f64 {
    assoc_penalty(a) / (a.rows() * a.cols()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Geometry;
    use approx::assert_relative_eq;

    fn qos_feasible_instance(
        m: usize,
        k: usize,
        kh: usize,
        seed: u64,
    ) -> (Realization, NetworkConfig) {
        (seed..)
            .map(|s| {
                let cfg = NetworkConfig::new(m, k, kh).with_seed(s);
                (Realization::generate(&cfg, 0).unwrap(), cfg)
            })
            .find(|(r, cfg)| {
                let g = LinkGains::new(r, cfg);
                let x = initial_iterate(strong_set_association(r), r, &g, cfg);
                se_per_ue(&x.theta, &g).iter().all(|&s| s >= cfg.qos_se)
            })
            .unwrap()
    }

    #[test]
    fn objective_trace_is_monotone() {
        for seed in [0, 20, 40] {
            let (r, cfg) = qos_feasible_instance(10, 4, 3, seed);
            let params = ScaParams {
                init: ScaInit::StrongSets,
                ..ScaParams::default()
            };
            let out = sca_solve(&r, &cfg, &params, None).unwrap();
            assert!(out.converged && out.iterations <= 50);
            for w in out.objective_trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0),
                    "{:?}",
                    out.objective_trace
                );
            }
        }
    }

    #[test]
    fn each_solution_is_feasible_for_the_next_subproblem() {
        let (r, cfg) = qos_feasible_instance(8, 3, 2, 5);
        let g = LinkGains::new(&r, &cfg);
        let mut x = initial_iterate(strong_set_association(&r), &r, &g, &cfg);
        for _ in 0..4 {
            let sub = convexified_constraints(&x, &g, &cfg, 100.0);
            let (next, sol) = solve_subproblem(&sub, &x, &IpmOptions::default()).unwrap();
            assert!(sol.converged);
            x = rebase(next);
            let following = convexified_constraints(&x, &g, &cfg, 100.0);
            assert!(following.problem.max_violation(&following.to_vector(&x)) <= 1e-6);
        }
    }

    #[test]
    fn single_ue_single_ap_gets_full_power() {
        let cfg = NetworkConfig::new(1, 1, 1);
        let geom = Geometry {
            ap_positions: vec![[0.0, 0.0]],
            ue_positions: vec![[10.0, 0.0]],
        };
        let r = Realization::from_beta(geom, Mat::filled(1, 1, 1e-10), &cfg, 0);
        let out = sca_solve(&r, &cfg, &ScaParams::default(), None).unwrap();
        assert_eq!(out.assoc, Mat::filled(1, 1, 1.0));
        assert_relative_eq!(out.theta[(0, 0)], 1.0, epsilon = 1e-5);
        assert!(out.feasibility.is_feasible());
    }

    #[test]
    fn relaxed_association_ends_integral() {
        let (r, cfg) = qos_feasible_instance(10, 4, 3, 60);
        let params = ScaParams {
            polish_iters: 0,
            ..ScaParams::default()
        };
        let out = sca_solve(&r, &cfg, &params, None).unwrap();
        assert!(
            out.notes.iter().all(|n| !n.contains("not integral")),
            "{:?}",
            out.notes
        );
        assert!(out.assoc.as_slice().iter().all(|&a| a == 0.0 || a == 1.0));
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = ScaParams {
            tol: 0.0,
            ..ScaParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
