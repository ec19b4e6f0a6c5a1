//! Assembly of the convex subproblem solved at each SCA iteration.
//!
//! Variables are grouped per AP as `[theta_m., a_m., p_m, r_m]`, followed by
//! the per-UE globals `t`, `t_hat` and `omega = w_hat / w_hat0`. The auxiliary
//! `p_m >= sum_k theta_mk^2` carries the AP's power into the interference
//! term of the lower SE bound, and `r_m` carries the AP's share of the
//! linearized interference bound, so that dense per-UE couplings stay
//! confined to a few low-rank terms.

use super::surrogate::{se_tilde, surrogate_se_lower};
use crate::ipm::{Bound, ConvexFn, Layout, Problem, SparseVec};
use crate::mat::Mat;
use crate::network::NetworkConfig;
use crate::se::{amplitudes, ap_powers, interference_from_powers, LinkGains};
use std::f64::consts::LN_2;

/// Point of the relaxed problem: association, power and the three slack vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaIterate {
    pub a: Mat,
    pub theta: Mat,
    /// Lower bounds on the SEs.
    pub t: Vec<f64>,
    /// Upper bounds on the SEs.
    pub t_hat: Vec<f64>,
    /// Lower bounds on the interference-plus-noise terms.
    pub w_hat: Vec<f64>,
}

impl ScaIterate {
    /// Penalized objective `-sum t + lambda * sum (a - a^2)`.
    pub fn objective(&self, lambda: f64) -> f64 {
        -self.t.iter().sum::<f64>() + lambda * super::surrogate::assoc_penalty(&self.a)
    }
}

/// Index map of subproblem variables.
#[derive(Debug, Clone, Copy)]
pub struct VarMap {
    pub num_aps: usize,
    pub num_ues: usize,
}

impl VarMap {
    fn block(&self) -> usize {
        2 * self.num_ues + 2
    }
    pub fn theta(&self, m: usize, k: usize) -> usize {
        m * self.block() + k
    }
    pub fn a(&self, m: usize, k: usize) -> usize {
        m * self.block() + self.num_ues + k
    }
    pub fn p(&self, m: usize) -> usize {
        m * self.block() + 2 * self.num_ues
    }
    pub fn r(&self, m: usize) -> usize {
        m * self.block() + 2 * self.num_ues + 1
    }
    fn globals(&self) -> usize {
        self.num_aps * self.block()
    }
    pub fn t(&self, k: usize) -> usize {
        self.globals() + k
    }
    pub fn t_hat(&self, k: usize) -> usize {
        self.globals() + self.num_ues + k
    }
    pub fn omega(&self, k: usize) -> usize {
        self.globals() + 2 * self.num_ues + k
    }
    pub fn len(&self) -> usize {
        self.globals() + 3 * self.num_ues
    }
    pub fn layout(&self) -> Layout {
        Layout {
            blocks: (0..self.num_aps)
                .map(|m| m * self.block()..(m + 1) * self.block())
                .collect(),
            globals: self.globals()..self.len(),
        }
    }
}

/// Convex subproblem at one expansion point, with the data needed to map
/// between [`ScaIterate`] and the solver's variable vector.
#[derive(Debug, Clone)]
pub struct ConvexSubproblem {
    pub problem: Problem,
    pub vars: VarMap,
    /// Scale of each `omega_k`, equal to the expansion value of `w_hat_k`.
    pub w_scale: Vec<f64>,
}

impl ConvexSubproblem {
    pub fn to_vector(&self, it: &ScaIterate) -> Vec<f64> {
        let v = self.vars;
        let mut x = vec![0.0; v.len()];
        let powers = ap_powers(&it.theta);
        for m in 0..v.num_aps {
            for k in 0..v.num_ues {
                x[v.theta(m, k)] = it.theta[(m, k)];
                x[v.a(m, k)] = it.a[(m, k)];
            }
            x[v.p(m)] = powers[m];
            x[v.r(m)] = powers[m];
        }
        for k in 0..v.num_ues {
            x[v.t(k)] = it.t[k];
            x[v.t_hat(k)] = it.t_hat[k];
            x[v.omega(k)] = it.w_hat[k] / self.w_scale[k];
        }
        x
    }

    pub fn from_vector(&self, x: &[f64]) -> ScaIterate {
        let v = self.vars;
        ScaIterate {
            a: Mat::from_fn(v.num_aps, v.num_ues, |m, k| x[v.a(m, k)]),
            theta: Mat::from_fn(v.num_aps, v.num_ues, |m, k| x[v.theta(m, k)]),
            t: (0..v.num_ues).map(|k| x[v.t(k)]).collect(),
            t_hat: (0..v.num_ues).map(|k| x[v.t_hat(k)]).collect(),
            w_hat: (0..v.num_ues)
                .map(|k| x[v.omega(k)] * self.w_scale[k])
                .collect(),
        }
    }
}

fn sv(pairs: impl IntoIterator<Item = (usize, f64)>) -> SparseVec {
    let mut v = SparseVec::new();
    for (i, x) in pairs {
        v.push(i, x);
    }
    v
}

/// Builds the convex subproblem around `x0`.
///
/// The lower SE bound is expanded at the true interference `V_k(theta0)`, the
/// upper bound at `(U_k(theta0), w_hat0_k)`, the fronthaul product at
/// `(a0, t_hat0)`, and the relaxation penalty at `a0`.
pub fn convexified_constraints(
    x0: &ScaIterate,
    g: &LinkGains,
    cfg: &NetworkConfig,
    lambda: f64,
) -> ConvexSubproblem {
    build(x0, g, cfg, lambda, None)
}

/// Width of the box that pins a fixed association entry.
pub(crate) const PIN_WIDTH: f64 = 1e-9;

/// Same subproblem with each `a_mk` confined to a box of width
/// [`PIN_WIDTH`] at the binary value `fixed[(m, k)]`.
pub fn convexified_with_fixed_assoc(
    x0: &ScaIterate,
    g: &LinkGains,
    cfg: &NetworkConfig,
    fixed: &Mat,
) -> ConvexSubproblem {
    build(x0, g, cfg, 0.0, Some(fixed))
}

fn build(
    x0: &ScaIterate,
    g: &LinkGains,
    cfg: &NetworkConfig,
    lambda: f64,
    fixed: Option<&Mat>,
) -> ConvexSubproblem {
    let (mc, kc) = (x0.theta.rows(), x0.theta.cols());
    let v = VarMap {
        num_aps: mc,
        num_ues: kc,
    };
    let kappa = g.prelog / LN_2;
    let u0 = amplitudes(&x0.theta, g);
    let y0 = interference_from_powers(&ap_powers(&x0.theta), g);
    let w0: Vec<f64> = x0.w_hat.iter().map(|w| w.max(1.0)).collect();
    let cap = cfg.fronthaul_cap;

    let mut objective = vec![0.0; v.len()];
    let mut objective_constant = 0.0;
    for k in 0..kc {
        objective[v.t(k)] = -1.0;
    }
    for m in 0..mc {
        for k in 0..kc {
            let a0 = x0.a[(m, k)];
            objective[v.a(m, k)] = lambda * (1.0 - 2.0 * a0);
            objective_constant += lambda * a0 * a0;
        }
    }

    let mut cons = Vec::new();
    let mut bounds = Vec::new();
    for m in 0..mc {
        for k in 0..kc {
            bounds.push(Bound::lower(v.theta(m, k), 0.0));
            let (lo, hi) = match fixed {
                Some(f) if f[(m, k)] > 0.5 => (1.0 - PIN_WIDTH, 1.0),
                Some(_) => (0.0, PIN_WIDTH),
                None => (0.0, 1.0),
            };
            bounds.push(Bound::lower(v.a(m, k), lo));
            bounds.push(Bound::upper(v.a(m, k), hi));
            if hi == PIN_WIDTH {
                bounds.push(Bound::upper(v.theta(m, k), PIN_WIDTH));
            }
            // theta^2 <= a
            cons.push(ConvexFn {
                linear: sv([(v.a(m, k), -1.0)]),
                diag_squares: vec![(v.theta(m, k), 1.0)],
                ..Default::default()
            });
        }
        bounds.push(Bound::upper(v.p(m), 1.0));
        // sum_k theta^2 <= p
        cons.push(ConvexFn {
            linear: sv([(v.p(m), -1.0)]),
            diag_squares: (0..kc).map(|k| (v.theta(m, k), 1.0)).collect(),
            ..Default::default()
        });
        // r <= sum_k (2 theta0 theta - theta0^2)
        let th0 = x0.theta.row(m);
        cons.push(ConvexFn {
            constant: th0.iter().map(|t| t * t).sum(),
            linear: sv(std::iter::once((v.r(m), 1.0))
                .chain((0..kc).map(|k| (v.theta(m, k), -2.0 * th0[k])))),
            ..Default::default()
        });
        // sum_k a <= K_hat
        cons.push(ConvexFn {
            constant: -(cfg.max_served as f64),
            linear: sv((0..kc).map(|k| (v.a(m, k), 1.0))),
            ..Default::default()
        });
        // fronthaul majorant, scaled by 1 / C_max
        let mut f = ConvexFn {
            constant: -1.0,
            ..Default::default()
        };
        for k in 0..kc {
            let d0 = x0.a[(m, k)] - x0.t_hat[k];
            f.constant += 0.25 * d0 * d0 / cap;
            f.squares
                .push((0.25 / cap, sv([(v.a(m, k), 1.0), (v.t_hat(k), 1.0)])));
            f.linear.push(v.a(m, k), -0.5 * d0 / cap);
            f.linear.push(v.t_hat(k), 0.5 * d0 / cap);
        }
        cons.push(f);
    }

    for k in 0..kc {
        // sum_m a >= 1
        cons.push(ConvexFn {
            constant: 1.0,
            linear: sv((0..mc).map(|m| (v.a(m, k), -1.0))),
            ..Default::default()
        });
        bounds.push(Bound::lower(v.t(k), cfg.qos_se));
        bounds.push(Bound::lower(v.omega(k), 1.0 / w0[k]));

        let column = sv((0..mc).map(|m| (v.theta(m, k), g.signal[(m, k)])));
        // t <= lower SE bound with interference 1 + sum_m leak_mk p_m
        let (uu, yy) = (u0[k], y0[k]);
        let ratio = uu * uu / yy;
        let gamma = uu * uu / (yy * (uu * uu + yy));
        let mut lo = ConvexFn {
            constant: -kappa * (ratio.ln_1p() - ratio) + kappa * gamma,
            linear: sv(std::iter::once((v.t(k), 1.0))
                .chain((0..mc).map(|m| (v.theta(m, k), -kappa * 2.0 * uu / yy * g.signal[(m, k)])))
                .chain((0..mc).map(|m| (v.p(m), kappa * gamma * g.leak[(m, k)])))),
            ..Default::default()
        };
        if gamma > 0.0 {
            lo.squares.push((kappa * gamma, column.clone()));
        }
        cons.push(lo);

        // upper SE bound <= t_hat, with w_hat = w0 * omega
        let d = uu * uu + w0[k];
        cons.push(ConvexFn {
            constant: kappa * (d.ln() - 1.0 - w0[k].ln()),
            linear: sv([(v.omega(k), kappa * w0[k] / d), (v.t_hat(k), -1.0)]),
            squares: vec![(kappa / d, column)],
            neg_logs: vec![(v.omega(k), kappa)],
            ..Default::default()
        });

        // w_hat <= 1 + sum_m leak_mk r_m, scaled by 1 / w0
        cons.push(ConvexFn {
            constant: -1.0 / w0[k],
            linear: sv(std::iter::once((v.omega(k), 1.0))
                .chain((0..mc).map(|m| (v.r(m), -g.leak[(m, k)] / w0[k])))),
            ..Default::default()
        });
    }

    ConvexSubproblem {
        problem: Problem {
            layout: v.layout(),
            objective,
            objective_constant,
            constraints: cons,
            bounds,
        },
        vars: v,
        w_scale: w0,
    }
}

/// Lower SE bound of UE `k` at `theta`, expanded around `theta0`, with the
/// exact interference of `theta`.
pub fn lower_bound_at(theta: &Mat, theta0: &Mat, g: &LinkGains, k: usize) -> f64 {
    let u = amplitudes(theta, g)[k];
    let y = interference_from_powers(&ap_powers(theta), g)[k];
    let u0 = amplitudes(theta0, g)[k];
    let y0 = interference_from_powers(&ap_powers(theta0), g)[k];
    surrogate_se_lower(g.prelog, u, y, u0, y0)
}

/// Exact SE of UE `k` at `theta` with interference replaced by `w`.
pub fn se_with_interference(theta: &Mat, w: f64, g: &LinkGains, k: usize) -> f64 {
    se_tilde(g.prelog, amplitudes(theta, g)[k], w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipm::{self, IpmOptions};
    use crate::network::Realization;
    use crate::sca::solver::initial_iterate;
    use crate::sca::{initial_association, ScaInit};
    use approx::assert_relative_eq;

    fn setup(m: usize, k: usize, kh: usize, seed: u64) -> (Realization, LinkGains, NetworkConfig) {
        let cfg = NetworkConfig::new(m, k, kh).with_seed(seed);
        let r = Realization::generate(&cfg, 0).unwrap();
        let g = LinkGains::new(&r, &cfg);
        (r, g, cfg)
    }

    #[test]
    fn start_is_feasible_for_its_own_subproblem() {
        let mut checked = 0;
        for seed in 0..10 {
            let (r, g, cfg) = setup(8, 3, 2, seed);
            let x0 = initial_iterate(
                initial_association(&r, &cfg, ScaInit::StrongSets),
                &r,
                &g,
                &cfg,
            );
            if crate::se::se_per_ue(&x0.theta, &g)
                .iter()
                .any(|&s| s < cfg.qos_se)
            {
                continue;
            }
            checked += 1;
            let sub = convexified_constraints(&x0, &g, &cfg, 100.0);
            let x = sub.to_vector(&x0);
            assert!(sub.problem.max_violation(&x) <= 1e-9, "seed {seed}");
            assert_relative_eq!(
                sub.problem.objective_value(&x),
                x0.objective(100.0),
                epsilon = 1e-9
            );
        }
        assert!(checked >= 3);
    }

    #[test]
    fn fronthaul_majorant_is_exact_at_expansion() {
        let (r, g, cfg) = setup(5, 3, 2, 7);
        let x0 = initial_iterate(
            initial_association(&r, &cfg, ScaInit::Heuristic),
            &r,
            &g,
            &cfg,
        );
        let sub = convexified_constraints(&x0, &g, &cfg, 100.0);
        let x = sub.to_vector(&x0);
        // per AP: theta^2 <= a (K of them), power, r, K_hat, then fronthaul
        let per_ap = cfg.num_ues + 4;
        for m in 0..cfg.num_aps {
            let f = &sub.problem.constraints[m * per_ap + cfg.num_ues + 3];
            let load: f64 = (0..cfg.num_ues).map(|k| x0.a[(m, k)] * x0.t_hat[k]).sum();
            assert_relative_eq!(f.value(&x), load / cfg.fronthaul_cap - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_link_uses_full_power() {
        let cfg = NetworkConfig::new(1, 1, 1);
        let geom = crate::network::Geometry {
            ap_positions: vec![[0.0, 0.0]],
            ue_positions: vec![[10.0, 0.0]],
        };
        let r = Realization::from_beta(geom, Mat::filled(1, 1, 1e-10), &cfg, 0);
        let g = LinkGains::new(&r, &cfg);
        let a = Mat::filled(1, 1, 1.0);
        let mut x = initial_iterate(a.clone(), &r, &g, &cfg);
        for _ in 0..5 {
            let sub = convexified_with_fixed_assoc(&x, &g, &cfg, &a);
            let sol = ipm::solve(&sub.problem, &sub.to_vector(&x), &IpmOptions::default()).unwrap();
            assert!(sol.converged);
            x = sub.from_vector(&sol.x);
        }
        assert_relative_eq!(x.theta[(0, 0)], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn two_by_two_subproblem_matches_grid() {
        let (r, g, mut cfg) = setup(2, 2, 2, 11);
        cfg.fronthaul_cap = 1e6;
        cfg.qos_se = 0.0;
        let a = Mat::filled(2, 2, 1.0);
        let x0 = initial_iterate(a.clone(), &r, &g, &cfg);
        let sub = convexified_with_fixed_assoc(&x0, &g, &cfg, &a);
        let sol = ipm::solve(&sub.problem, &sub.to_vector(&x0), &IpmOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.primal_residual <= 1e-7 && sol.dual_residual <= 1e-7);

        // With a pinned at one and no binding fronthaul limit, the optimal
        // t_k equals the lower bound at theta with p_m = ||theta_m||^2.
        let u0 = amplitudes(&x0.theta, &g);
        let y0 = interference_from_powers(&ap_powers(&x0.theta), &g);
        let steps: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let mut best = f64::INFINITY;
        for &t00 in &steps {
            for &t01 in &steps {
                for &t10 in &steps {
                    for &t11 in &steps {
                        let th = Mat::from_rows(&[vec![t00, t01], vec![t10, t11]]);
                        if (0..2)
                            .any(|m| th.row(m).iter().map(|t| t * t).sum::<f64>() > 1.0 + 1e-12)
                        {
                            continue;
                        }
                        let u = amplitudes(&th, &g);
                        let y = interference_from_powers(&ap_powers(&th), &g);
                        let obj: f64 = (0..2)
                            .map(|k| -surrogate_se_lower(g.prelog, u[k], y[k], u0[k], y0[k]))
                            .sum();
                        best = best.min(obj);
                    }
                }
            }
        }
        assert!(sol.objective <= best + 1e-6);
        assert!(
            (sol.objective - best).abs() <= 1e-2,
            "{} vs {}",
            sol.objective,
            best
        );
    }
}
