//! Self-checks run by `cellfree validate`: gradient against finite
//! differences, projections against exact oracles, the simulated channel
//! estimate against its closed form, and tightness of the convex bounds.
//! Also hosts the exhaustive small-instance oracle.

use crate::apg::{penalty_terms, project_theta, project_z, value_and_gradient};
use crate::mat::Mat;
use crate::network::{
    channel_estimate_variance, simulate_mmse_estimate, NetworkConfig, Realization,
};
use crate::sca::{se_tilde, surrogate_se_lower, surrogate_se_upper};
use crate::se::{fronthaul_load, se_per_ue, LinkGains};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Largest normwise relative error `max|g - g_fd| / max|g_fd|` of the
/// analytic gradient over `instances` random 5-AP, 3-UE points, using
/// central differences with step `1e-6`.
///
/// Points whose hinge arguments lie within `1e-3` of a kink are redrawn, as
/// are points where the finite-difference stencil would leave the domain.
pub fn gradient_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = [50.0, 1e3, 5e4, 10.0];
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < instances {
        let mut cfg = NetworkConfig::new(5, 3, 2).with_seed(rng.gen());
        cfg.qos_se = rng.gen_range(0.1..3.0);
        cfg.fronthaul_cap = rng.gen_range(1.0..20.0);
        let Ok(r) = Realization::generate(&cfg, 0) else {
            continue;
        };
        let g = LinkGains::new(&r, &cfg);
        let mut theta = Mat::from_fn(5, 3, |_, _| rng.gen_range(0.01..1.0));
        for m in 0..5 {
            project_theta(theta.row_mut(m));
        }
        let mut z = Mat::from_fn(5, 3, |_, _| rng.gen_range(0.05..0.95));
        for m in 0..5 {
            project_z(z.row_mut(m), cfg.max_served);
        }
        if hinge_margin(&theta, &z, &g, &cfg) < 1e-3 {
            continue;
        }
        let chi = rng.gen_range(0.5..4.0);
        let (_, _, gt, gz) = value_and_gradient(&theta, &z, &g, &cfg, chi, &mu);
        let f = |t: &Mat, z: &Mat| penalty_terms(t, z, &g, &cfg).objective(chi, &mu);
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for i in 0..15 {
            for (x, grad, is_theta) in [(&theta, &gt, true), (&z, &gz, false)] {
                let (mut p, mut m) = (x.clone(), x.clone());
                p.as_mut_slice()[i] += h;
                m.as_mut_slice()[i] -= h;
                let fd = if is_theta {
                    (f(&p, &z) - f(&m, &z)) / (2.0 * h)
                } else {
                    (f(&theta, &p) - f(&theta, &m)) / (2.0 * h)
                };
                err = err.max((grad.as_slice()[i] - fd).abs());
                scale = scale.max(fd.abs());
            }
        }
        worst = worst.max(err / scale.max(f64::MIN_POSITIVE));
        done += 1;
    }
    worst
}

fn hinge_margin(theta: &Mat, z: &Mat, g: &LinkGains, cfg: &NetworkConfig) -> f64 {
    let se = se_per_ue(theta, g);
    let mut args: Vec<f64> = se.iter().map(|s| cfg.qos_se - s).collect();
    let a = z.map(|z| z * z);
    args.extend((0..z.cols()).map(|k| 1.0 - a.col_sum(k)));
    args.extend(
        theta
            .as_slice()
            .iter()
            .zip(a.as_slice())
            .map(|(t, a)| t * t - a),
    );
    args.extend(
        fronthaul_load(&a, &se)
            .iter()
            .map(|l| l - cfg.fronthaul_cap),
    );
    args.into_iter().map(f64::abs).fold(f64::INFINITY, f64::min)
}

/// Exact Euclidean projection onto `{x >= 0, ||x|| <= radius}` by
/// enumerating the KKT cases: for every support set, either the ball is
/// inactive (`x_S = y_S`) or active (`x_S = radius y_S / ||y_S||`).
pub fn project_ball_orthant_oracle(y: &[f64], radius: f64) -> Vec<f64> {
    let n = y.len();
    let mut best = vec![0.0; n];
    let mut best_d = y.iter().map(|v| v * v).sum::<f64>();
    for mask in 1u32..(1 << n) {
        let on = |i: usize| mask & (1 << i) != 0;
        if (0..n).any(|i| on(i) && y[i] < 0.0) {
            continue;
        }
        let norm = (0..n)
            .filter(|&i| on(i))
            .map(|i| y[i] * y[i])
            .sum::<f64>()
            .sqrt();
        let mut cands = Vec::new();
        if norm <= radius {
            cands.push(1.0);
        }
        if norm > 0.0 {
            cands.push(radius / norm);
        }
        for s in cands {
            let x: Vec<f64> = (0..n).map(|i| if on(i) { s * y[i] } else { 0.0 }).collect();
            let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = x;
            }
        }
    }
    best
}

/// Alternating projections between `{x >= 0, ||x||^2 <= max_served}` and
/// the box `[0, 1]^K`.
pub fn alternating_projection(y: &[f64], max_served: usize, rounds: usize) -> Vec<f64> {
    let radius = (max_served as f64).sqrt();
    let mut x = y.to_vec();
    for _ in 0..rounds {
        x = project_ball_orthant_oracle(&x, radius);
        x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    x
}

/// Worst deviations of the closed-form projections on `trials` random
/// inputs with `2 <= K <= 5`:
/// `(theta vs exact, z vs exact ball step then clip, z vs alternating)`.
pub fn projection_errors(trials: usize, seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let maxdiff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    for _ in 0..trials {
        let k = rng.gen_range(2..=5);
        let kh = rng.gen_range(1..=k);
        let scale = [0.5, 1.0, 3.0][rng.gen_range(0..3)];
        let y: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..2.0) * scale).collect();

        let mut t = y.clone();
        project_theta(&mut t);
        worst.0 = worst
            .0
            .max(maxdiff(&t, &project_ball_orthant_oracle(&y, 1.0)));

        let mut z = y.clone();
        project_z(&mut z, kh);
        let mut composed = project_ball_orthant_oracle(&y, (kh as f64).sqrt());
        composed.iter_mut().for_each(|v| *v = v.min(1.0));
        worst.1 = worst.1.max(maxdiff(&z, &composed));
        worst.2 = worst
            .2
            .max(maxdiff(&z, &alternating_projection(&y, kh, 500)));
    }
    worst
}

/// Largest relative error of the simulated estimate power against the
/// closed-form variance over `beta in {0.1, 1, 10}` and pilot SNR
/// `tau rho in {0.5, 1, 10}` (five pilot symbols).
pub fn mmse_error(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 5;
    let mut worst: f64 = 0.0;
    for beta in [0.1, 1.0, 10.0] {
        for snr in [0.5, 1.0, 10.0] {
            let rho = snr / tau as f64;
            let sim = simulate_mmse_estimate(beta, rho, tau, samples, &mut rng);
            let exact = channel_estimate_variance(beta, rho, tau);
            worst = worst.max((sim.estimate_power / exact - 1.0).abs());
        }
    }
    worst
}

/// Over `trials` random expansion points: the largest absolute gap (in
/// bit/s/Hz) between either SE bound and the SE at the expansion point, and the most negative slack
/// `SE - lower` or `upper - SE` at random nearby points.
pub fn surrogate_errors(trials: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gap, mut slack) = (0.0f64, f64::INFINITY);
    for _ in 0..trials {
        let prelog = rng.gen_range(0.5..1.0);
        let u0 = 10f64.powf(rng.gen_range(-2.0..2.0));
        let y0 = 10f64.powf(rng.gen_range(0.0..3.0));
        let exact = se_tilde(prelog, u0, y0);
        let lo = surrogate_se_lower(prelog, u0, y0, u0, y0);
        let hi = surrogate_se_upper(prelog, u0, y0, u0, y0);
        gap = gap.max((lo - exact).abs()).max((hi - exact).abs());
        let u = u0 * rng.gen_range(0.1..3.0);
        let y = y0 * rng.gen_range(0.5..2.0);
        let se = se_tilde(prelog, u, y);
        slack = slack
            .min(se - surrogate_se_lower(prelog, u, y, u0, y0))
            .min(surrogate_se_upper(prelog, u, y, u0, y0) - se);
    }
    (gap, slack)
}

/// The four suites of `cellfree validate`, at full size.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    let grad = gradient_error(50, seed);
    let (pt, pz, palt) = projection_errors(500, seed);
    let mmse = mmse_error(100_000, seed);
    let (gap, slack) = surrogate_errors(1000, seed);
    vec![
        SuiteResult {
            name: "gradient",
            passed: grad <= 1e-5,
            detail: format!("max relative error {grad:.2e} over 50 instances (limit 1e-5)"),
        },
        SuiteResult {
            name: "projection",
            passed: pt <= 1e-6 && pz <= 1e-6 && palt <= 1e-2,
            detail: format!(
                "theta vs exact {pt:.1e}, z vs composed exact {pz:.1e} (limit 1e-6), z vs alternating {palt:.1e} (limit 1e-2)"
            ),
        },
        SuiteResult {
            name: "channel-estimate",
            passed: mmse <= 0.02,
            detail: format!("max relative error {mmse:.3e} with 1e5 samples (limit 2e-2)"),
        },
        SuiteResult {
            name: "surrogate-tightness",
            passed: gap <= 1e-10 && slack >= -1e-12,
            detail: format!("gap at expansion point {gap:.1e}, worst bound slack {slack:.1e}"),
        },
    ]
}

/// Exhaustive optimum of the sum SE for tiny instances: every binary
/// association meeting the per-AP limit and coverage, with every served
/// amplitude on a grid of spacing `step` and each AP's power at most 1,
/// kept only when QoS and fronthaul hold. Returns `None` if no grid point is
/// feasible. Intended for at most about six links.
pub fn exhaustive_oracle(g: &LinkGains, cfg: &NetworkConfig, step: f64) -> Option<f64> {
    let (m, k) = (g.num_aps(), g.num_ues());
    let levels: Vec<f64> = (0..=(1.0 / step).round() as usize)
        .map(|i| (i as f64 * step).min(1.0))
        .collect();
    let mut best: Option<f64> = None;
    for mask in 0u64..(1 << (m * k)) {
        let a = Mat::from_fn(m, k, |i, j| ((mask >> (i * k + j)) & 1) as f64);
        if (0..m).any(|i| a.row_sum(i) > cfg.max_served as f64)
            || (0..k).any(|j| a.col_sum(j) < 1.0)
        {
            continue;
        }
        let links: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| a[(i, j)] > 0.0)
            .collect();
        let mut idx = vec![0usize; links.len()];
        loop {
            let mut theta = Mat::zeros(m, k);
            for (&(i, j), &l) in links.iter().zip(&idx) {
                theta[(i, j)] = levels[l];
            }
            let power_ok =
                (0..m).all(|i| theta.row(i).iter().map(|t| t * t).sum::<f64>() <= 1.0 + 1e-12);
            if power_ok {
                let se = se_per_ue(&theta, g);
                let ok = se.iter().all(|&s| s >= cfg.qos_se)
                    && fronthaul_load(&a, &se)
                        .iter()
                        .all(|&l| l <= cfg.fronthaul_cap);
                if ok {
                    let s: f64 = se.iter().sum();
                    best = Some(best.map_or(s, |b: f64| b.max(s)));
                }
            }
            let mut pos = 0;
            while pos < idx.len() {
                idx[pos] += 1;
                if idx[pos] < levels.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
    }
    best
}
