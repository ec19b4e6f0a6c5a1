//! FULL and HEU association baselines, power optimization for a fixed
//! association, and fronthaul SE capping.

use crate::apg::{self, ApgParams, Mode};
use crate::assoc::{build_outcome, RunInfo};
use crate::error::Result;
use crate::mat::Mat;
use crate::network::{NetworkConfig, Realization};
use crate::se::{fronthaul_load, FeasibilityOptions, LinkGains, SolveOutcome};
use std::time::Instant;

/// Every AP serves every UE.
pub fn full_associate(cfg: &NetworkConfig) -> Mat {
    Mat::filled(cfg.num_aps, cfg.num_ues, 1.0)
}

/// Greedy association: each UE, in index order, takes its strongest AP not
/// yet picked by an earlier UE (all APs become eligible again once each has
/// been picked); then every AP fills up to `max_served` with its strongest
/// remaining UEs.
pub fn heu_associate(r: &Realization, cfg: &NetworkConfig) -> Mat {
    heu_associate_ordered(r, cfg, &(0..r.num_ues()).collect::<Vec<_>>())
}

/// [`heu_associate`] with an explicit first-phase UE order.
pub fn heu_associate_ordered(r: &Realization, cfg: &NetworkConfig, order: &[usize]) -> Mat {
    let (mc, kc) = (r.num_aps(), r.num_ues());
    let beta = &r.beta;
    let mut a = Mat::zeros(mc, kc);
    let mut taken = vec![false; mc];
    for &k in order {
        if taken.iter().all(|&t| t) {
            taken.iter_mut().for_each(|t| *t = false);
        }
        let m = (0..mc)
            .filter(|&m| !taken[m])
            .max_by(|&i, &j| beta[(i, k)].total_cmp(&beta[(j, k)]).then(j.cmp(&i)))
            .expect("an untaken AP exists");
        taken[m] = true;
        a[(m, k)] = 1.0;
    }
    for m in 0..mc {
        let have = a.row_sum(m) as usize;
        if have >= cfg.max_served {
            continue;
        }
        let mut rest: Vec<usize> = (0..kc).filter(|&k| a[(m, k)] == 0.0).collect();
        rest.sort_by(|&i, &j| beta[(m, j)].total_cmp(&beta[(m, i)]).then(i.cmp(&j)));
        for &k in rest.iter().take(cfg.max_served - have) {
            a[(m, k)] = 1.0;
        }
    }
    a
}

/// Scales all SEs by `C_max / max_m load_m` when some AP exceeds its fronthaul limit.
pub fn cap_fronthaul(se: &[f64], a: &Mat, cfg: &NetworkConfig) -> Vec<f64> {
    let peak = fronthaul_load(a, se).into_iter().fold(0.0, f64::max);
    if peak > cfg.fronthaul_cap {
        let s = cfg.fronthaul_cap / peak;
        se.iter().map(|x| x * s).collect()
    } else {
        se.to_vec()
    }
}

/// Optimizes power for a fixed binary association with the APG iteration,
/// keeping only the QoS penalty and pinning unassociated links to zero power.
pub fn optimize_power_fixed_assoc(
    a: &Mat,
    r: &Realization,
    cfg: &NetworkConfig,
    params: &ApgParams,
) -> Result<(Mat, RunInfo)> {
    let g = LinkGains::new(r, cfg);
    optimize_power_with_gains(a, &g, cfg, params)
}

pub(crate) fn optimize_power_with_gains(
    a: &Mat,
    g: &LinkGains,
    cfg: &NetworkConfig,
    params: &ApgParams,
) -> Result<(Mat, RunInfo)> {
    let served = (0..a.rows())
        .map(|m| a.row_sum(m).max(1.0))
        .collect::<Vec<_>>();
    let theta = Mat::from_fn(a.rows(), a.cols(), |m, k| a[(m, k)] / served[m].sqrt());
    let z = a.clone();
    apg::run(theta, z, g, cfg, params, Mode::PowerOnly)
}

/// FULL baseline: all-ones association with optimized power.
pub fn solve_full(
    r: &Realization,
    cfg: &NetworkConfig,
    params: &ApgParams,
) -> Result<SolveOutcome> {
    let start = Instant::now();
    let g = LinkGains::new(r, cfg);
    let a = full_associate(cfg);
    let (theta, mut info) = optimize_power_with_gains(&a, &g, cfg, params)?;
    info.wall_time = start.elapsed().as_secs_f64();
    Ok(build_outcome(
        theta,
        a,
        &g,
        cfg,
        &FeasibilityOptions::full_association(),
        false,
        info,
    ))
}

/// HEU baseline: greedy association, optimized power, fronthaul-capped SEs.
pub fn solve_heu(r: &Realization, cfg: &NetworkConfig, params: &ApgParams) -> Result<SolveOutcome> {
    let start = Instant::now();
    let g = LinkGains::new(r, cfg);
    let a = heu_associate(r, cfg);
    let (theta, mut info) = optimize_power_with_gains(&a, &g, cfg, params)?;
    info.wall_time = start.elapsed().as_secs_f64();
    Ok(build_outcome(
        theta,
        a,
        &g,
        cfg,
        &FeasibilityOptions::default(),
        true,
        info,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Geometry;
    use approx::assert_relative_eq;

    fn realization(beta: Mat, cfg: &NetworkConfig) -> Realization {
        let geom = Geometry {
            ap_positions: vec![[0.0, 0.0]; beta.rows()],
            ue_positions: vec![[0.0, 0.0]; beta.cols()],
        };
        Realization::from_beta(geom, beta, cfg, 0)
    }

    #[test]
    fn heu_trace_two_by_two() {
        let cfg = NetworkConfig::new(2, 2, 1);
        let r = realization(Mat::from_rows(&[vec![3.0, 1.0], vec![2.0, 5.0]]), &cfg);
        let a = heu_associate(&r, &cfg);
        assert_eq!(a, Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
    }

    #[test]
    fn heu_first_phase_uses_distinct_aps() {
        let cfg = NetworkConfig::new(2, 2, 2);
        let r = realization(Mat::from_rows(&[vec![3.0, 5.0], vec![2.0, 1.0]]), &cfg);
        let a = heu_associate_ordered(&r, &cfg, &[0, 1]);
        assert_eq!(a, Mat::filled(2, 2, 1.0));
        let cfg1 = NetworkConfig::new(2, 2, 1);
        let a = heu_associate_ordered(&r, &cfg1, &[0, 1]);
        assert_eq!(a, Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
    }

    #[test]
    fn heu_wraps_when_ues_outnumber_aps() {
        let cfg = NetworkConfig::new(2, 3, 2);
        let r = realization(
            Mat::from_rows(&[vec![3.0, 5.0, 4.0], vec![2.0, 1.0, 1.0]]),
            &cfg,
        );
        let a = heu_associate(&r, &cfg);
        for k in 0..3 {
            assert!(a.col_sum(k) >= 1.0);
        }
        for m in 0..2 {
            assert!(a.row_sum(m) <= 2.0);
        }
    }

    #[test]
    fn cap_examples() {
        let cfg = NetworkConfig::new(1, 2, 2);
        let a = Mat::filled(1, 2, 1.0);
        assert_eq!(cap_fronthaul(&[5.0, 5.0], &a, &cfg), vec![5.0, 5.0]);
        let capped = cap_fronthaul(&[15.0, 15.0], &a, &cfg);
        assert_relative_eq!(capped[0], 10.0);
        assert_relative_eq!(capped[1], 10.0);
        assert_eq!(cap_fronthaul(&capped, &a, &cfg), capped);
    }

    #[test]
    fn full_is_all_ones() {
        let a = full_associate(&NetworkConfig::new(3, 4, 2));
        assert_eq!(a, Mat::filled(3, 4, 1.0));
    }
}
