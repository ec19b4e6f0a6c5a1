use cellfree::apg::{apg_solve, ApgParams};
use cellfree::experiment::validation::{
    exhaustive_oracle, gradient_error, mmse_error, projection_errors,
};
use cellfree::experiment::{median, run_sweep, ExperimentSpec, SolverKind, SweepResults};
use cellfree::sca::{sca_solve, ScaParams};
use cellfree::{LinkGains, NetworkConfig, Realization};
use std::process::ExitCode;
use std::time::Instant;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, passed: bool, detail: String, started: Instant) {
        let tag = if passed { "PASS" } else { "FAIL" };
        if !passed {
            self.failed += 1;
        }
        println!(
            "{tag} [{id}] {name}: {detail} ({:.1} s)",
            started.elapsed().as_secs_f64()
        );
    }
}

fn gradient(rep: &mut Report) {
    let t = Instant::now();
    let err = gradient_error(50, 2024);
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        1,
        "gradient",
        err <= 1e-5 && secs < 10.0,
        format!("max relative error {err:.2e} on 50 instances"),
        t,
    );
}

fn projection(rep: &mut Report) {
    let t = Instant::now();
    let (theta, z, alt) = projection_errors(500, 2024);
    rep.line(
        2,
        "projection",
        theta <= 1e-6 && z <= 1e-6 && alt <= 1e-2,
        format!("theta {theta:.1e}, z {z:.1e}, z vs alternating {alt:.1e}"),
        t,
    );
}

fn estimation(rep: &mut Report) {
    let t = Instant::now();
    let err = mmse_error(100_000, 2024);
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        3,
        "estimation-statistics",
        err <= 0.02 && secs < 30.0,
        format!("max relative error {err:.3e} with 1e5 samples"),
        t,
    );
}

fn small_oracle(rep: &mut Report) {
    let t = Instant::now();
    let (mut checked, mut good, mut skipped) = (0, 0, 0);
    let (mut worst_sca, mut worst_apg) = (f64::INFINITY, f64::INFINITY);
    let mut seed = 1000;
    while checked < 20 {
        let cfg = NetworkConfig::new(2, 2, 1).with_seed(seed);
        seed += 1;
        let r = Realization::generate(&cfg, 0).expect("realization");
        let g = LinkGains::new(&r, &cfg);
        let Some(best) = exhaustive_oracle(&g, &cfg, 0.02) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        let ratio = |o: cellfree::Result<cellfree::SolveOutcome>| match o {
            Ok(o) if o.feasibility.is_feasible() => o.sum_se / best,
            _ => 0.0,
        };
        let s = ratio(sca_solve(&r, &cfg, &ScaParams::default(), None));
        let a = ratio(apg_solve(&r, &cfg, &ApgParams::default(), None));
        worst_sca = worst_sca.min(s);
        worst_apg = worst_apg.min(a);
        if s >= 0.95 && a >= 0.95 {
            good += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        4,
        "small-oracle",
        good == checked && secs < 300.0,
        format!(
            "{good}/{checked} instances within 95% for both (worst SCA {worst_sca:.4}, APG {worst_apg:.4}; {skipped} draws without a feasible grid point skipped)"
        ),
        t,
    );
}

fn sweep(preset: &str, n: usize, solvers: &[SolverKind]) -> SweepResults {
    let mut spec = ExperimentSpec::preset(preset).expect("preset");
    spec.num_realizations = n;
    spec.solvers = solvers.to_vec();
    run_sweep(&spec).expect("sweep")
}

fn med(res: &SweepResults, k: SolverKind) -> f64 {
    median(&res.sum_se(k)).unwrap_or(f64::NAN)
}

fn apg_feasibility(rep: &mut Report, small: &SweepResults, t: Instant) {
    let runs: Vec<_> = small
        .for_solver(SolverKind::Apg)
        .filter(|r| r.realization < 100)
        .collect();
    let ok = runs
        .iter()
        .filter(|r| r.feasible() && r.outcome.as_ref().is_ok_and(|o| o.converged))
        .count();
    rep.line(
        5,
        "apg-feasibility",
        runs.len() == 100 && ok >= 95,
        format!("{ok}/{} realizations met the penalty threshold and are feasible", runs.len()),
        t,
    );
}

fn ordering(rep: &mut Report, small: &SweepResults, large: &SweepResults, t: Instant) {
    use SolverKind::*;
    let (full, sca, apg, heu) = (med(small, Full), med(small, Sca), med(small, Apg), med(small, Heu));
    let small_ok = full >= sca && sca >= apg && sca > heu && (sca - 31.5).abs() <= 0.15 * 31.5;
    let (l_sca, l_apg, l_heu) = (med(large, Sca), med(large, Apg), med(large, Heu));
    let large_ok = l_apg >= 1.8 * l_heu && l_apg >= 0.9 * l_sca;
    rep.line(
        6,
        "ordering",
        small_ok && large_ok,
        format!(
            "25x7 medians FULL {full:.2} SCA {sca:.2} APG {apg:.2} HEU {heu:.2}; 150x40 medians SCA {l_sca:.2} APG {l_apg:.2} HEU {l_heu:.2} (APG/HEU {:.2}, APG/SCA {:.3})",
            l_apg / l_heu,
            l_apg / l_sca
        ),
        t,
    );
}

fn sca_monotone(rep: &mut Report, results: &[&SweepResults], t: Instant) {
    let (mut checked, mut bad) = (0, 0);
    for res in results {
        for rec in res.for_solver(SolverKind::Sca) {
            checked += 1;
            let Ok(o) = &rec.outcome else {
                bad += 1;
                continue;
            };
            let monotone = o
                .objective_trace
                .windows(2)
                .all(|w| w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0));
            if !(monotone && o.converged && o.objective_trace.len() <= 50) {
                bad += 1;
            }
        }
    }
    rep.line(
        7,
        "sca-monotonicity",
        checked > 0 && bad == 0,
        format!("{} of {checked} SCA runs monotone and converged within 50 iterations", checked - bad),
        t,
    );
}

fn timing(rep: &mut Report, large: &SweepResults, t: Instant) {
    let mean = |k: SolverKind| {
        let v: Vec<f64> = large
            .for_solver(k)
            .filter(|r| r.realization < 5)
            .filter_map(|r| r.outcome.as_ref().ok().map(|o| o.wall_time))
            .collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let (apg, na) = mean(SolverKind::Apg);
    let (sca, ns) = mean(SolverKind::Sca);
    rep.line(
        8,
        "run-time",
        na >= 5 && ns >= 5 && apg <= sca / 3.0,
        format!("mean APG {apg:.2} s, SCA {sca:.2} s over 5 realizations at 150x40 (ratio {:.3})", apg / sca),
        t,
    );
}

fn determinism(rep: &mut Report) {
    let t = Instant::now();
    let columns = |jobs: usize| {
        let mut spec = ExperimentSpec::preset("small-25x7").expect("preset");
        spec.num_realizations = 8;
        spec.parallelism = jobs;
        let res = run_sweep(&spec).expect("sweep");
        let mut buf = Vec::new();
        res.write_ue_rows(csv::Writer::from_writer(&mut buf)).expect("csv");
        buf
    };
    let first = columns(1);
    let again = columns(1);
    let wide = columns(8);
    rep.line(
        9,
        "determinism",
        first == again && first == wide,
        format!(
            "{} bytes of SE rows; repeat identical: {}, parallelism 8 identical: {}",
            first.len(),
            first == again,
            first == wide
        ),
        t,
    );
}

fn main() -> ExitCode {
    let mut rep = Report { failed: 0 };
    gradient(&mut rep);
    projection(&mut rep);
    estimation(&mut rep);
    small_oracle(&mut rep);

    let t = Instant::now();
    let small = sweep("small-25x7", 200, &SolverKind::ALL);
    println!("ran 200 realizations at 25x7 in {:.0} s", t.elapsed().as_secs_f64());
    let t_large = Instant::now();
    let large = sweep("large-150x40", 20, &[SolverKind::Sca, SolverKind::Apg, SolverKind::Heu]);
    println!("ran 20 realizations at 150x40 in {:.0} s", t_large.elapsed().as_secs_f64());

    apg_feasibility(&mut rep, &small, t);
    ordering(&mut rep, &small, &large, t);
    sca_monotone(&mut rep, &[&small, &large], t);
    timing(&mut rep, &large, t_large);
    determinism(&mut rep);

    println!("{} of 9 criteria passed", 9 - rep.failed);
    if rep.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
