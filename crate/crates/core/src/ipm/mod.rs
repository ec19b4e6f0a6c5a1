//! Infeasible-start primal-dual interior-point method for smooth convex
//! programs `min c'x  s.t.  f_i(x) <= 0`, with Mehrotra predictor-corrector
//! steps and a block-structured Newton solve.

mod kkt;
mod problem;

pub use kkt::{KktFactor, KktMatrix};
pub use problem::{Bound, BoundKind, ConvexFn, Layout, Problem, SparseVec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative diagonal shift used when factoring the Newton matrix.
    pub regularization: f64,
    pub refinements: usize,
    /// Smallest initial slack.
    pub initial_slack: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tol: 1e-7,
            max_iter: 150,
            regularization: 1e-13,
            refinements: 3,
            initial_slack: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmSolution {
    pub x: Vec<f64>,
    /// Multipliers of `constraints`, then of `bounds`.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `max_i max(0, f_i(x))`.
    pub primal_residual: f64,
    /// `||c + sum_i lambda_i grad f_i(x)||_inf`, relative to the largest
    /// per-variable sum of absolute terms.
    pub dual_residual: f64,
    /// Mean complementarity `s'lambda / m`.
    pub complementarity: f64,
    pub converged: bool,
}

struct Residuals {
    f: Vec<f64>,
    grads: Vec<SparseVec>,
    rd: Vec<f64>,
    /// Per variable, `|c_j| + sum_i |lambda_i d f_i / d x_j|`.
    rd_scale: Vec<f64>,
    rp: Vec<f64>,
}

fn residuals(p: &Problem, x: &[f64], s: &[f64], lam: &[f64]) -> Residuals {
    let nc = p.constraints.len();
    let mut f = Vec::with_capacity(lam.len());
    let mut grads = Vec::with_capacity(nc);
    let mut rd = p.objective.clone();
    let mut rd_scale: Vec<f64> = p.objective.iter().map(|c| c.abs()).collect();
    for (i, c) in p.constraints.iter().enumerate() {
        f.push(c.value(x));
        let g = c.gradient(x);
        for (j, v) in g.iter() {
            rd[j] += lam[i] * v;
            rd_scale[j] += (lam[i] * v).abs();
        }
        grads.push(g);
    }
    for (b, bd) in p.bounds.iter().enumerate() {
        f.push(bd.value_at(x));
        rd[bd.var] += lam[nc + b] * bd.sign();
        rd_scale[bd.var] += lam[nc + b].abs();
    }
    let rp = f.iter().zip(s).map(|(f, s)| f + s).collect();
    Residuals {
        f,
        grads,
        rd,
        rd_scale,
        rp,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Largest step in `(0, 1]` keeping `v + alpha dv >= (1 - tau) v`.
fn max_step(v: &[f64], dv: &[f64], tau: f64) -> f64 {
    v.iter().zip(dv).fold(
        1.0,
        |a, (&v, &d)| if d < 0.0 { a.min(-tau * v / d) } else { a },
    )
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dl: Vec<f64>,
}

/// Newton direction for complementarity target encoded as `sinv_rc = S^-1 r_c`.
fn direction(
    p: &Problem,
    fac: &KktFactor,
    res: &Residuals,
    s: &[f64],
    lam: &[f64],
    sinv_rc: &[f64],
    refinements: usize,
) -> Direction {
    let nc = p.constraints.len();
    let m = lam.len();
    let q: Vec<f64> = (0..m)
        .map(|i| lam[i] / s[i] * res.rp[i] - sinv_rc[i])
        .collect();
    let mut rhs: Vec<f64> = res.rd.iter().map(|v| -v).collect();
    for (i, g) in res.grads.iter().enumerate() {
        for (j, v) in g.iter() {
            rhs[j] -= q[i] * v;
        }
    }
    for (b, bd) in p.bounds.iter().enumerate() {
        rhs[bd.var] -= q[nc + b] * bd.sign();
    }
    let dx = fac.solve(&rhs, refinements);
    let mut jdx: Vec<f64> = res.grads.iter().map(|g| g.dot(&dx)).collect();
    jdx.extend(p.bounds.iter().map(|bd| bd.sign() * dx[bd.var]));
    let ds = (0..m).map(|i| -res.rp[i] - jdx[i]).collect();
    let dl = (0..m)
        .map(|i| lam[i] / s[i] * (jdx[i] + res.rp[i]) - sinv_rc[i])
        .collect();
    Direction { dx, ds, dl }
}

fn newton_matrix(p: &Problem, x: &[f64], res: &Residuals, s: &[f64], lam: &[f64]) -> KktMatrix {
    let nc = p.constraints.len();
    let mut h = KktMatrix::new(&p.layout);
    for (i, c) in p.constraints.iter().enumerate() {
        let l = lam[i];
        for (coef, w) in &c.squares {
            h.add_rank1(2.0 * coef * l, w);
        }
        for &(j, d) in &c.diag_squares {
            h.add_diag(j, 2.0 * d * l);
        }
        for &(j, e) in &c.neg_logs {
            h.add_diag(j, e * l / (x[j] * x[j]));
        }
        h.add_rank1(l / s[i], &res.grads[i]);
    }
    for (b, bd) in p.bounds.iter().enumerate() {
        h.add_diag(bd.var, lam[nc + b] / s[nc + b]);
    }
    h
}

const STALL_ITERS: usize = 8;

/// Returns the iterate with the smallest combined residual seen so far.
fn finish(best: Option<(f64, IpmSolution)>, iter: usize) -> Result<IpmSolution> {
    match best {
        Some((_, mut sol)) => {
            sol.iterations = iter;
            Ok(sol)
        }
        None => Err(Error::Subproblem(format!(
            "numerical breakdown at iteration {iter}"
        ))),
    }
}

/// Solves `p` from the (possibly infeasible) starting point `x0`.
///
/// Returns the iterate with the smallest combined residual when the method
/// converges, stalls, hits the iteration cap or breaks down numerically; only
/// a breakdown before the first step is an `Err`. `converged` reports whether
/// the returned point meets `tol`.
pub fn solve(p: &Problem, x0: &[f64], opts: &IpmOptions) -> Result<IpmSolution> {
    let n = p.num_vars();
    assert_eq!(x0.len(), n);
    let nc = p.constraints.len();
    let m = nc + p.bounds.len();
    let mut x = x0.to_vec();
    let mut f0: Vec<f64> = p.constraints.iter().map(|c| c.value(&x)).collect();
    f0.extend(p.bounds.iter().map(|b| b.value_at(&x)));
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Subproblem(
            "starting point outside the log domain".into(),
        ));
    }
    let mut s: Vec<f64> = f0.iter().map(|f| (-f).max(opts.initial_slack)).collect();
    let mut lam: Vec<f64> = s.iter().map(|s| opts.initial_slack / s).collect();
    let tau_min: f64 = 0.99;

    let mut iter = 0;
    let mut best: Option<(f64, IpmSolution)> = None;
    let mut since_best = 0;
    loop {
        let res = residuals(p, &x, &s, &lam);
        let mu = s.iter().zip(&lam).map(|(s, l)| s * l).sum::<f64>() / m.max(1) as f64;
        let rp = inf_norm(&res.rp);
        let rd = inf_norm(&res.rd) / (1.0 + inf_norm(&res.rd_scale));
        let obj = p.objective_value(&x);
        let gap = mu * m as f64 / (1.0 + obj.abs());
        let converged = rp <= opts.tol && rd <= opts.tol && gap <= opts.tol;
        let score = rp.max(rd).max(gap);
        if score.is_finite() && best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((
                score,
                IpmSolution {
                    x: x.clone(),
                    duals: lam.clone(),
                    objective: obj,
                    iterations: iter,
                    primal_residual: res.f.iter().fold(0.0f64, |a, &f| a.max(f)),
                    dual_residual: rd,
                    complementarity: mu,
                    converged,
                },
            ));
            since_best = 0;
        } else if best.as_ref().is_some_and(|(_, b)| {
            b.primal_residual <= opts.tol
                && b.complementarity * m as f64 <= opts.tol * (1.0 + b.objective.abs())
        }) {
            since_best += 1;
        }
        if converged || iter >= opts.max_iter || since_best >= STALL_ITERS {
            return finish(best, iter);
        }
        iter += 1;
        let h = newton_matrix(p, &x, &res, &s, &lam);
        let fac = match h.factor(opts.regularization) {
            Ok(f) => f,
            Err(_) if best.is_some() => return finish(best, iter),
            Err(e) => return Err(Error::Subproblem(format!("iteration {iter}: {e}"))),
        };

        // Predictor.
        let aff = direction(p, &fac, &res, &s, &lam, &lam, opts.refinements);
        let a_aff = max_step(&s, &aff.ds, 1.0).min(max_step(&lam, &aff.dl, 1.0));
        let mu_aff = (0..m)
            .map(|i| (s[i] + a_aff * aff.ds[i]) * (lam[i] + a_aff * aff.dl[i]))
            .sum::<f64>()
            / m as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);

        // Corrector.
        let sinv_rc: Vec<f64> = (0..m)
            .map(|i| lam[i] + (aff.ds[i] * aff.dl[i] - sigma * mu) / s[i])
            .collect();
        let d = direction(p, &fac, &res, &s, &lam, &sinv_rc, opts.refinements);
        if d.dx
            .iter()
            .chain(&d.ds)
            .chain(&d.dl)
            .any(|v| !v.is_finite())
        {
            return finish(best, iter);
        }
        let tau = tau_min;
        let mut alpha = max_step(&s, &d.ds, tau);
        let alpha_dual = max_step(&lam, &d.dl, tau);

        // Keep iterates inside the domain of the logarithmic terms.
        let mut trial: Vec<f64>;
        loop {
            trial = x.iter().zip(&d.dx).map(|(x, d)| x + alpha * d).collect();
            if p.constraints.iter().all(|c| c.value(&trial).is_finite()) {
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return finish(best, iter);
            }
        }
        x = trial;
        for i in 0..m {
            s[i] += alpha * d.ds[i];
            lam[i] += alpha_dual * d.dl[i];
        }
    }
}
