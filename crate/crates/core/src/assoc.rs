//! Rounding of relaxed association variables and assembly of solver outcomes.

use crate::apg::project_theta_rows;
use crate::baselines::cap_fronthaul;
use crate::mat::Mat;
use crate::network::{NetworkConfig, Realization};
use crate::se::{
    ap_powers, check_feasibility_with_se, fronthaul_load, se_per_ue, FeasibilityOptions, LinkGains,
    SolveOutcome,
};

/// Rounds relaxed association values at 0.5 and repairs coverage and per-AP load.
///
/// A UE left without an AP joins its strongest AP that still has room (or its
/// strongest AP outright). An AP over `max_served` drops its weakest UEs,
/// preferring ones that remain covered elsewhere.
pub fn round_association(relaxed: &Mat, beta: &Mat, max_served: usize) -> Mat {
    let (mc, kc) = (relaxed.rows(), relaxed.cols());
    let mut a = relaxed.map(|x| if x >= 0.5 { 1.0 } else { 0.0 });

    for k in 0..kc {
        if a.col_sum(k) >= 1.0 {
            continue;
        }
        let by_gain = |cands: &mut dyn Iterator<Item = usize>| {
            cands.max_by(|&i, &j| beta[(i, k)].total_cmp(&beta[(j, k)]).then(j.cmp(&i)))
        };
        let room = by_gain(&mut (0..mc).filter(|&m| a.row_sum(m) < max_served as f64));
        let m = room
            .or_else(|| by_gain(&mut (0..mc)))
            .expect("at least one AP");
        a[(m, k)] = 1.0;
    }

    for m in 0..mc {
        while a.row_sum(m) > max_served as f64 {
            let served = (0..kc).filter(|&k| a[(m, k)] == 1.0);
            let weakest = |it: &mut dyn Iterator<Item = usize>| {
                it.min_by(|&i, &j| beta[(m, i)].total_cmp(&beta[(m, j)]).then(j.cmp(&i)))
            };
            let shared = weakest(&mut served.clone().filter(|&k| a.col_sum(k) > 1.0));
            let k = shared
                .or_else(|| weakest(&mut served.clone()))
                .expect("AP serves someone");
            a[(m, k)] = 0.0;
        }
    }
    a
}

/// Zeroes power on unassociated links and projects each AP back onto its power ball.
pub fn mask_power(theta: &Mat, a: &Mat) -> Mat {
    let mut t = Mat::from_fn(theta.rows(), theta.cols(), |m, k| {
        if a[(m, k)] > 0.0 {
            theta[(m, k)]
        } else {
            0.0
        }
    });
    project_theta_rows(&mut t);
    t
}

/// Shifts power toward UEs that miss the QoS target.
///
/// Each step targets the worst UE below the target. It first tries raising
/// that UE's amplitude on its best link by 5% (starting from 0.05 on a link
/// with no power), rescaling the AP back onto the unit power ball. The best
/// link may be a new one on an AP serving fewer than `max_served` UEs; it
/// is then added to `a`. Failing that, it lowers by 5% the power of the
/// non-serving AP that leaks the most interference onto the UE. A step is
/// kept only if the UE gains and no UE meeting the target falls below it.
/// Stops when every UE meets the target, when neither step helps, or after
/// `max_steps`.
pub fn repair_qos(
    theta: &Mat,
    a: &Mat,
    g: &LinkGains,
    qos: f64,
    max_served: usize,
    max_steps: usize,
) -> (Mat, Mat) {
    let (mut theta, mut a) = (theta.clone(), a.clone());
    let mut se = se_per_ue(&theta, g);
    for _ in 0..max_steps {
        let Some(k) = (0..se.len())
            .filter(|&k| se[k] < qos)
            .min_by(|&i, &j| se[i].total_cmp(&se[j]))
        else {
            break;
        };
        let accept = |next: &Mat| {
            let next_se = se_per_ue(next, g);
            let keeps = (0..se.len()).all(|j| j == k || se[j] < qos || next_se[j] >= qos);
            (next_se[k] > se[k] && keeps).then_some(next_se)
        };

        let raise = (0..theta.rows())
            .filter(|&m| a[(m, k)] > 0.0 || (a.row_sum(m) as usize) < max_served)
            .max_by(|&i, &j| g.signal[(i, k)].total_cmp(&g.signal[(j, k)]))
            .and_then(|m| {
                let mut next = theta.clone();
                next[(m, k)] = (next[(m, k)] * 1.05).max(0.05);
                let norm = next.row(m).iter().map(|t| t * t).sum::<f64>().sqrt();
                if norm > 1.0 {
                    next.row_mut(m).iter_mut().for_each(|t| *t /= norm);
                }
                accept(&next).map(|s| (m, next, s))
            });
        if let Some((m, next, next_se)) = raise {
            a[(m, k)] = 1.0;
            theta = next;
            se = next_se;
            continue;
        }

        let powers = ap_powers(&theta);
        let lower = (0..theta.rows())
            .filter(|&m| a[(m, k)] == 0.0 && powers[m] > 0.0)
            .max_by(|&i, &j| (g.leak[(i, k)] * powers[i]).total_cmp(&(g.leak[(j, k)] * powers[j])))
            .and_then(|m| {
                let mut next = theta.clone();
                next.row_mut(m)
                    .iter_mut()
                    .for_each(|t| *t *= 0.95f64.sqrt());
                accept(&next).map(|s| (next, s))
            });
        match lower {
            Some((next, next_se)) => {
                theta = next;
                se = next_se;
            }
            None => break,
        }
    }
    (theta, a)
}

/// Each AP serves its strong set; every UE left uncovered is added to its
/// strongest AP.
pub fn strong_set_association(r: &Realization) -> Mat {
    let mut a = r.delta.clone();
    for k in 0..a.cols() {
        if a.col_sum(k) == 0.0 {
            let best = (0..a.rows())
                .max_by(|&i, &j| r.beta[(i, k)].total_cmp(&r.beta[(j, k)]))
                .expect("at least one AP");
            a[(best, k)] = 1.0;
        }
    }
    a
}

/// Diagnostics carried from a solver into its outcome.
#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    pub iterations: usize,
    pub wall_time: f64,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub notes: Vec<String>,
}

/// Evaluates `(theta, a)` and packages the result. With `cap`, SEs are scaled
/// so that no AP exceeds its fronthaul limit.
pub fn build_outcome(
    theta: Mat,
    a: Mat,
    g: &LinkGains,
    cfg: &NetworkConfig,
    opts: &FeasibilityOptions,
    cap: bool,
    info: RunInfo,
) -> SolveOutcome {
    let raw = se_per_ue(&theta, g);
    let se = if cap {
        cap_fronthaul(&raw, &a, cfg)
    } else {
        raw.clone()
    };
    let feasibility = check_feasibility_with_se(&theta, &a, &se, cfg, opts);
    SolveOutcome {
        sum_se: se.iter().sum(),
        fronthaul_per_ap: fronthaul_load(&a, &se),
        se_per_ue: se,
        se_uncapped: raw,
        feasibility,
        iterations: info.iterations,
        wall_time: info.wall_time,
        objective_trace: info.objective_trace,
        theta,
        assoc: a,
        converged: info.converged,
        notes: info.notes,
    }
}
