//! Closed-form downlink SE under partial protective zero-forcing, fronthaul
//! loads and constraint checking.

use crate::mat::Mat;
use crate::network::{NetworkConfig, Realization};
use serde::{Deserialize, Serialize};

/// Per-link coefficients of the SE model for one realization.
///
/// `signal[(m,k)] = sqrt(rho_d (N - |S_m|) sigma_mk^2)` and
/// `leak[(m,k)] = rho_d (beta_mk - delta_mk sigma_mk^2)`, so that
/// `S_k = (sum_m signal_mk theta_mk)^2` and `V_k = 1 + sum_m leak_mk P_m`
/// with `P_m = sum_l theta_ml^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub signal: Mat,
    pub leak: Mat,
    pub prelog: f64,
}

impl LinkGains {
    pub fn new(r: &Realization, cfg: &NetworkConfig) -> Self {
        let n = cfg.antennas_per_ap as f64;
        let rho = cfg.dl_power;
        let signal = Mat::from_fn(r.num_aps(), r.num_ues(), |m, k| {
            let gain = n - r.strong_sets[m].len() as f64;
            (rho * gain * r.sigma_sq[(m, k)]).sqrt()
        });
        let leak = Mat::from_fn(r.num_aps(), r.num_ues(), |m, k| {
            rho * (r.beta[(m, k)] - r.delta[(m, k)] * r.sigma_sq[(m, k)]).max(0.0)
        });
        LinkGains {
            signal,
            leak,
            prelog: cfg.prelog(),
        }
    }

    pub fn num_aps(&self) -> usize {
        self.signal.rows()
    }

    pub fn num_ues(&self) -> usize {
        self.signal.cols()
    }
}

/// Per-AP transmit power `sum_k theta_mk^2`.
pub fn ap_powers(theta: &Mat) -> Vec<f64> {
    (0..theta.rows())
        .map(|m| theta.row(m).iter().map(|t| t * t).sum())
        .collect()
}

/// Coherent amplitude `U_k = sum_m signal_mk theta_mk` per UE.
pub fn amplitudes(theta: &Mat, g: &LinkGains) -> Vec<f64> {
    let mut u = vec![0.0; theta.cols()];
    for m in 0..theta.rows() {
        for ((uk, &s), &t) in u.iter_mut().zip(g.signal.row(m)).zip(theta.row(m)) {
            *uk += s * t;
        }
    }
    u
}

/// Interference-plus-noise `V_k = 1 + sum_m leak_mk P_m` for given AP powers.
pub fn interference_from_powers(powers: &[f64], g: &LinkGains) -> Vec<f64> {
    let mut v = vec![1.0; g.num_ues()];
    for (m, &p) in powers.iter().enumerate() {
        for (vk, &l) in v.iter_mut().zip(g.leak.row(m)) {
            *vk += l * p;
        }
    }
    v
}

/// Returns `(S, V)`: squared coherent signal and interference-plus-noise per UE.
pub fn signal_and_interference(theta: &Mat, g: &LinkGains) -> (Vec<f64>, Vec<f64>) {
    let s = amplitudes(theta, g).into_iter().map(|u| u * u).collect();
    let v = interference_from_powers(&ap_powers(theta), g);
    (s, v)
}

pub fn se_from_sinr_terms(prelog: f64, s: &[f64], v: &[f64]) -> Vec<f64> {
    s.iter()
        .zip(v)
        .map(|(&s, &v)| prelog * (s / v).ln_1p() / std::f64::consts::LN_2)
        .collect()
}

pub fn se_per_ue(theta: &Mat, g: &LinkGains) -> Vec<f64> {
    let (s, v) = signal_and_interference(theta, g);
    se_from_sinr_terms(g.prelog, &s, &v)
}

/// Fronthaul load of every AP, `sum_k a_mk SE_k`.
pub fn fronthaul_load(a: &Mat, se: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|m| a.row(m).iter().zip(se).map(|(a, s)| a * s).sum())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    Nonnegative,
    Power,
    Integrality,
    PowerAssociation,
    Qos,
    Fronthaul,
    MaxServed,
    Coverage,
}

impl Constraint {
    pub const ALL: [Constraint; 8] = [
        Constraint::Nonnegative,
        Constraint::Power,
        Constraint::Integrality,
        Constraint::PowerAssociation,
        Constraint::Qos,
        Constraint::Fronthaul,
        Constraint::MaxServed,
        Constraint::Coverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constraint::Nonnegative => "nonnegative",
            Constraint::Power => "power",
            Constraint::Integrality => "integrality",
            Constraint::PowerAssociation => "power_association",
            Constraint::Qos => "qos",
            Constraint::Fronthaul => "fronthaul",
            Constraint::MaxServed => "max_served",
            Constraint::Coverage => "coverage",
        }
    }
}

/// Tolerances and exemptions used by [`check_feasibility`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOptions {
    pub algebraic_tol: f64,
    pub rate_tol: f64,
    /// Skip fronthaul, per-AP load and coverage checks (FULL association).
    pub exempt_association_limits: bool,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions {
            algebraic_tol: 1e-6,
            rate_tol: 1e-4,
            exempt_association_limits: false,
        }
    }
}

impl FeasibilityOptions {
    pub fn full_association() -> Self {
        FeasibilityOptions {
            exempt_association_limits: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    /// Largest amount by which any instance of the constraint is exceeded (0 if none).
    pub worst_violation: f64,
    pub tolerance: f64,
    pub checked: bool,
}

impl ConstraintCheck {
    pub fn passed(&self) -> bool {
        !self.checked || self.worst_violation <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub checks: Vec<ConstraintCheck>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.checks.iter().all(ConstraintCheck::passed)
    }

    pub fn get(&self, c: Constraint) -> &ConstraintCheck {
        self.checks
            .iter()
            .find(|x| x.constraint == c)
            .expect("every constraint is reported")
    }

    pub fn failed(&self) -> Vec<Constraint> {
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.constraint)
            .collect()
    }
}

/// Checks `(theta, a)` against every constraint, computing SEs from `theta`.
pub fn check_feasibility(
    theta: &Mat,
    a: &Mat,
    g: &LinkGains,
    cfg: &NetworkConfig,
    opts: &FeasibilityOptions,
) -> FeasibilityReport {
    let se = se_per_ue(theta, g);
    check_feasibility_with_se(theta, a, &se, cfg, opts)
}

/// As [`check_feasibility`] with externally supplied (e.g. capped) SEs.
pub fn check_feasibility_with_se(
    theta: &Mat,
    a: &Mat,
    se: &[f64],
    cfg: &NetworkConfig,
    opts: &FeasibilityOptions,
) -> FeasibilityReport {
    let (mc, kc) = (theta.rows(), theta.cols());
    let pos = |x: f64| x.max(0.0);
    let worst = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, |acc: f64, x| acc.max(pos(x)));

    let nonneg = worst(&mut theta.as_slice().iter().map(|&t| -t));
    let power = worst(&mut ap_powers(theta).into_iter().map(|p| p - 1.0));
    let integrality = worst(
        &mut a
            .as_slice()
            .iter()
            .map(|&x| x.min(1.0 - x).max(-x).max(x - 1.0)),
    );
    let link = worst(&mut (0..mc * kc).map(|i| theta.as_slice()[i].powi(2) - a.as_slice()[i]));
    let qos = worst(&mut se.iter().map(|&s| cfg.qos_se - s));
    let fronthaul = worst(
        &mut fronthaul_load(a, se)
            .into_iter()
            .map(|l| l - cfg.fronthaul_cap),
    );
    let served = worst(&mut (0..mc).map(|m| a.row_sum(m) - cfg.max_served as f64));
    let coverage = worst(&mut (0..kc).map(|k| 1.0 - a.col_sum(k)));

    let limits = !opts.exempt_association_limits;
    let mk = |constraint, worst_violation, tolerance, checked| ConstraintCheck {
        constraint,
        worst_violation,
        tolerance,
        checked,
    };
    let alg = opts.algebraic_tol;
    FeasibilityReport {
        checks: vec![
            mk(Constraint::Nonnegative, nonneg, alg, true),
            mk(Constraint::Power, power, alg, true),
            mk(Constraint::Integrality, integrality, alg, true),
            mk(Constraint::PowerAssociation, link, alg, true),
            mk(Constraint::Qos, qos, opts.rate_tol, true),
            mk(Constraint::Fronthaul, fronthaul, opts.rate_tol, limits),
            mk(Constraint::MaxServed, served, alg, limits),
            mk(Constraint::Coverage, coverage, alg, limits),
        ],
    }
}

/// Result of one solver run on one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub se_per_ue: Vec<f64>,
    pub sum_se: f64,
    /// SEs before any fronthaul capping (equal to `se_per_ue` when no cap applied).
    pub se_uncapped: Vec<f64>,
    pub fronthaul_per_ap: Vec<f64>,
    pub feasibility: FeasibilityReport,
    pub iterations: usize,
    pub wall_time: f64,
    pub objective_trace: Vec<f64>,
    pub theta: Mat,
    pub assoc: Mat,
    /// Solver-specific convergence flag (penalties or integrality reached their targets).
    pub converged: bool,
    pub notes: Vec<String>,
}

impl SolveOutcome {
    pub fn sum_se_uncapped(&self) -> f64 {
        self.se_uncapped.iter().sum()
    }
}
