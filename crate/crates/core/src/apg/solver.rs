use super::penalty::{value_and_gradient, Penalties};
use super::projection::{project_theta, project_z};
use super::{ApgInit, ApgParams};
use crate::assoc::{
    build_outcome, mask_power, repair_qos, round_association, strong_set_association, RunInfo,
};
use crate::baselines::heu_associate;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::network::{NetworkConfig, Realization};
use crate::se::{FeasibilityOptions, LinkGains, SolveOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::time::Instant;

/// A point `v = (theta, z)` of the APG iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub theta: Mat,
    pub z: Mat,
}

impl Point {
    fn dist_sq(&self, o: &Point) -> f64 {
        let d = |a: &Mat, b: &Mat| {
            a.as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        };
        d(&self.theta, &o.theta) + d(&self.z, &o.z)
    }

    /// `v + c1 (w - v) + c2 (v - u)`.
    fn extrapolate(v: &Point, w: &Point, u: &Point, c1: f64, c2: f64) -> Point {
        let comb = |v: &Mat, w: &Mat, u: &Mat| {
            let mut out = v.clone();
            for ((o, &w), &u) in out
                .as_mut_slice()
                .iter_mut()
                .zip(w.as_slice())
                .zip(u.as_slice())
            {
                *o += c1 * (w - *o) + c2 * (*o - u);
            }
            out
        };
        Point {
            theta: comb(&v.theta, &w.theta, &u.theta),
            z: comb(&v.z, &w.z, &u.z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Optimize power and association.
    Joint,
    /// Association frozen at `z`; only power moves, with zero power on
    /// unassociated links, and only the QoS penalty is active.
    PowerOnly,
}

pub(crate) struct Problem<'a> {
    g: &'a LinkGains,
    cfg: &'a NetworkConfig,
    mu: [f64; 4],
    mode: Mode,
    alpha_vbar: f64,
    alpha_v: f64,
}

impl Problem<'_> {
    fn eval(&self, v: &Point, chi: f64) -> (f64, Penalties) {
        let pen = super::penalty_terms(&v.theta, &v.z, self.g, self.cfg);
        (pen.objective(chi, &self.mu), pen)
    }

    fn step(&self, v: &Point, chi: f64, alpha: f64) -> Point {
        let (_, _, gt, gz) = value_and_gradient(&v.theta, &v.z, self.g, self.cfg, chi, &self.mu);
        let mut out = v.clone();
        for (x, d) in out.theta.as_mut_slice().iter_mut().zip(gt.as_slice()) {
            *x -= alpha * d;
        }
        match self.mode {
            Mode::Joint => {
                for (x, d) in out.z.as_mut_slice().iter_mut().zip(gz.as_slice()) {
                    *x -= alpha * d;
                }
                self.project(&mut out);
            }
            Mode::PowerOnly => self.project(&mut out),
        }
        out
    }

    fn project(&self, v: &mut Point) {
        for m in 0..v.theta.rows() {
            if self.mode == Mode::PowerOnly {
                for (t, &z) in v.theta.row_mut(m).iter_mut().zip(v.z.row(m)) {
                    if z == 0.0 {
                        *t = 0.0;
                    }
                }
            }
            project_theta(v.theta.row_mut(m));
            if self.mode == Mode::Joint {
                project_z(v.z.row_mut(m), self.cfg.max_served);
            }
        }
    }
}

/// Iteration state of the nonmonotone accelerated method.
#[derive(Debug, Clone)]
pub struct ApgState {
    pub v: Point,
    pub v_prev: Point,
    pub v_tilde: Point,
    pub q: f64,
    pub q_prev: f64,
    pub b: f64,
    pub c: f64,
    pub chi: f64,
    pub iter: usize,
    /// Objective value at every accepted iterate of the current penalty round.
    pub f_trace: Vec<f64>,
}

impl ApgState {
    pub fn new(v: Point, f0: f64, chi: f64) -> Self {
        ApgState {
            v_prev: v.clone(),
            v_tilde: v.clone(),
            v,
            q: 1.0,
            q_prev: 0.0,
            b: 1.0,
            c: f0,
            chi,
            iter: 0,
            f_trace: vec![f0],
        }
    }

    /// Next extrapolation weight, `(1 + sqrt(4 q^2 + 1)) / 2`.
    pub fn next_q(q: f64) -> f64 {
        (1.0 + (4.0 * q * q + 1.0).sqrt()) / 2.0
    }

    /// Folds a newly accepted objective value into the nonmonotone average.
    pub fn update_average(&mut self, f_new: f64, zeta: f64) {
        let b_new = zeta * self.b + 1.0;
        self.c = (zeta * self.b * self.c + f_new) / b_new;
        self.b = b_new;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStop {
    ObjectiveStalled,
    SumSeStalled,
    IterationCap,
}

/// Runs inner iterations at the current penalty multiplier until the
/// objective or the sum SE stalls, or `max_inner` is reached.
pub fn apg_inner(
    state: &mut ApgState,
    g: &LinkGains,
    cfg: &NetworkConfig,
    params: &ApgParams,
) -> Result<InnerStop> {
    let p = problem(g, cfg, params, Mode::Joint);
    inner(state, &p, params)
}

fn problem<'a>(
    g: &'a LinkGains,
    cfg: &'a NetworkConfig,
    params: &ApgParams,
    mode: Mode,
) -> Problem<'a> {
    let mu = match mode {
        Mode::Joint => params.mu,
        Mode::PowerOnly => [0.0, params.mu[1], 0.0, 0.0],
    };
    Problem {
        g,
        cfg,
        mu,
        mode,
        alpha_vbar: params.alpha_vbar,
        alpha_v: params.alpha_v,
    }
}

fn inner(state: &mut ApgState, p: &Problem, params: &ApgParams) -> Result<InnerStop> {
    let chi = state.chi;
    let (mut f_v, pen) = p.eval(&state.v, chi);
    let mut h_prev = pen.h;
    let mut recent: VecDeque<f64> = VecDeque::from([f_v]);
    for _ in 0..params.max_inner {
        let c1 = state.q_prev / state.q;
        let c2 = (state.q_prev - 1.0) / state.q;
        let vbar = Point::extrapolate(&state.v, &state.v_tilde, &state.v_prev, c1, c2);
        let cand = p.step(&vbar, chi, p.alpha_vbar);
        let (f_cand, pen_cand) = p.eval(&cand, chi);

        let (next, f_next, h_next) = if f_cand <= state.c - params.zeta * cand.dist_sq(&vbar) {
            (cand.clone(), f_cand, pen_cand.h)
        } else {
            let corr = p.step(&state.v, chi, p.alpha_v);
            let (f_corr, pen_corr) = p.eval(&corr, chi);
            if f_corr < f_cand {
                (corr, f_corr, pen_corr.h)
            } else {
                (cand.clone(), f_cand, pen_cand.h)
            }
        };
        if !f_next.is_finite() {
            return Err(Error::NonFinite {
                iter: state.iter,
                chi,
            });
        }

        state.v_prev = std::mem::replace(&mut state.v, next);
        state.v_tilde = cand;
        state.q_prev = state.q;
        state.q = ApgState::next_q(state.q);
        state.update_average(f_next, params.zeta);
        state.iter += 1;
        state.f_trace.push(f_next);
        f_v = f_next;

        recent.push_back(f_v);
        if recent.len() > 11 {
            recent.pop_front();
            let old = recent[0];
            if (f_v - old).abs() <= params.inner_tol * f_v.abs().max(1e-12) {
                return Ok(InnerStop::ObjectiveStalled);
            }
        }
        if (h_next - h_prev).abs() <= params.inner_tol * h_next.abs().max(1e-12) {
            return Ok(InnerStop::SumSeStalled);
        }
        h_prev = h_next;
    }
    Ok(InnerStop::IterationCap)
}

/// Result of the penalty loop before rounding.
pub(crate) struct ApgRun {
    pub point: Point,
    pub penalties: Penalties,
    pub info: RunInfo,
}

pub(crate) fn run_penalty_loop(
    start: Point,
    g: &LinkGains,
    cfg: &NetworkConfig,
    params: &ApgParams,
    mode: Mode,
) -> Result<ApgRun> {
    params.validate()?;
    let p = problem(g, cfg, params, mode);
    let mut v = start;
    p.project(&mut v);
    let mut chi = params.chi_init;
    let (f0, _) = p.eval(&v, chi);
    let mut state = ApgState::new(v, f0, chi);
    let mut info = RunInfo::default();
    let mut penalties;
    let mut rounds = 0;
    loop {
        let stop = inner(&mut state, &p, params)?;
        rounds += 1;
        penalties = p.eval(&state.v, chi).1;
        let norm = penalties.normalized(g.num_aps(), g.num_ues());
        let met = norm
            .iter()
            .zip(&p.mu)
            .all(|(q, &mu)| mu == 0.0 || *q <= params.eps);
        if met {
            info.converged = true;
            break;
        }
        if rounds >= params.max_outer {
            info.notes.push(format!(
                "penalties above target after {rounds} rounds (last inner stop {stop:?}): {norm:?}"
            ));
            break;
        }
        chi *= params.delta;
        let (f, _) = p.eval(&state.v, chi);
        state.chi = chi;
        state.c = f;
        state.b = 1.0;
    }
    info.iterations = state.iter;
    info.objective_trace = state.f_trace;
    info.notes
        .push(format!("penalty rounds {rounds}, final chi {chi}"));
    Ok(ApgRun {
        point: state.v,
        penalties,
        info,
    })
}

/// Power-only entry point used by the baselines.
pub(crate) fn run(
    theta: Mat,
    z: Mat,
    g: &LinkGains,
    cfg: &NetworkConfig,
    params: &ApgParams,
    mode: Mode,
) -> Result<(Mat, RunInfo)> {
    let out = run_penalty_loop(Point { theta, z }, g, cfg, params, mode)?;
    Ok((out.point.theta, out.info))
}

fn initial_point(r: &Realization, cfg: &NetworkConfig, init: &ApgInit) -> Point {
    match init {
        ApgInit::Heuristic | ApgInit::StrongSets => {
            let a = match init {
                ApgInit::Heuristic => heu_associate(r, cfg),
                _ => strong_set_association(r),
            };
            let s = 1.0 / (cfg.max_served as f64).sqrt();
            Point {
                theta: a.map(|x| x * s),
                z: a,
            }
        }
        ApgInit::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut draw = || Mat::from_fn(r.num_aps(), r.num_ues(), |_, _| rng.gen::<f64>());
            Point {
                theta: draw(),
                z: draw(),
            }
        }
    }
}

/// Full APG solve: penalty loop, rounding of `z^2` to a binary association,
/// power masking, QoS repair and evaluation.
///
/// The loop runs from `init` (or the start selected by `params.init`) and
/// then from `params.restarts` random points. Among the outcomes, feasible
/// ones whose penalties met the target rank first, then other feasible
/// ones, then the rest; ties go to the larger sum SE.
pub fn apg_solve(
    r: &Realization,
    cfg: &NetworkConfig,
    params: &ApgParams,
    init: Option<Point>,
) -> Result<SolveOutcome> {
    let start = Instant::now();
    let g = LinkGains::new(r, cfg);
    let first = init.unwrap_or_else(|| initial_point(r, cfg, &params.init));
    let restarts = (0..params.restarts as u64).map(|j| {
        let seed = params.restart_seed.wrapping_add(j);
        initial_point(r, cfg, &ApgInit::Random { seed })
    });
    let mut best: Option<(usize, SolveOutcome)> = None;
    let mut iterations = 0;
    for (j, v0) in std::iter::once(first).chain(restarts).enumerate() {
        let out = solve_from(v0, r, &g, cfg, params)?;
        iterations += out.iterations;
        let better = match &best {
            None => true,
            Some((_, b)) => {
                let key = |o: &SolveOutcome| {
                    let feasible = o.feasibility.is_feasible();
                    (feasible && o.converged, feasible)
                };
                let (ko, kb) = (key(&out), key(b));
                ko > kb || (ko == kb && out.sum_se > b.sum_se)
            }
        };
        if better {
            best = Some((j, out));
        }
    }
    let (j, mut out) = best.expect("at least one start");
    if params.restarts > 0 {
        out.notes
            .push(format!("kept start {j} of {}", params.restarts + 1));
    }
    out.iterations = iterations;
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

fn solve_from(
    v0: Point,
    r: &Realization,
    g: &LinkGains,
    cfg: &NetworkConfig,
    params: &ApgParams,
) -> Result<SolveOutcome> {
    let run = run_penalty_loop(v0, g, cfg, params, Mode::Joint)?;
    let a = round_association(&run.point.z.map(|z| z * z), &r.beta, cfg.max_served);
    let (theta, a) = repair_qos(
        &mask_power(&run.point.theta, &a),
        &a,
        g,
        cfg.qos_se,
        cfg.max_served,
        100 * cfg.num_ues,
    );
    let mut info = run.info;
    let norm = run.penalties.normalized(g.num_aps(), g.num_ues());
    info.notes.push(format!("normalized penalties {norm:?}"));
    Ok(build_outcome(
        theta,
        a,
        g,
        cfg,
        &FeasibilityOptions::default(),
        params.cap_fronthaul,
        info,
    ))
}
