//! Network geometry, large-scale fading, channel-estimation statistics and
//! the strong/weak UE partition used by partial protective zero-forcing.

use crate::error::{Error, Result};
use crate::mat::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

const BOLTZMANN: f64 = 1.380_649e-23;
const NOISE_TEMPERATURE_K: f64 = 290.0;
const MAX_PLACEMENT_ROUNDS: usize = 10_000;
const MIN_DISTANCE_M: f64 = 1.0;

/// Thermal noise power in watts for the given bandwidth and noise figure.
pub fn noise_power_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    BOLTZMANN * NOISE_TEMPERATURE_K * bandwidth_hz * 10f64.powf(noise_figure_db / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

/// Scalar parameters of one network scenario.
///
/// Powers `pilot_power` and `dl_power` are normalized by the noise power, so
/// the large-scale gains in [`Realization::beta`] stay raw linear gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_aps: usize,
    pub num_ues: usize,
    pub antennas_per_ap: usize,
    pub coherence_len: usize,
    pub pilot_len: usize,
    pub pilot_power: f64,
    pub dl_power: f64,
    pub qos_se: f64,
    pub fronthaul_cap: f64,
    pub max_served: usize,
    pub area_side: f64,
    pub min_ap_separation: f64,
    pub strong_set_fraction: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub rng_seed: u64,
    #[serde(default = "default_height")]
    pub height_diff: f64,
    #[serde(default = "default_shadowing")]
    pub shadowing_std_db: f64,
}

fn default_height() -> f64 {
    10.0
}

fn default_shadowing() -> f64 {
    4.0
}

impl NetworkConfig {
    /// Standard scenario: 1 km square, N = 2, 200-symbol coherence block,
    /// 1 W downlink and 0.1 W pilot power, 20 MHz at 9 dB noise figure.
    pub fn new(num_aps: usize, num_ues: usize, max_served: usize) -> Self {
        let bandwidth_hz = 20e6;
        let noise_figure_db = 9.0;
        let noise = noise_power_watts(bandwidth_hz, noise_figure_db);
        NetworkConfig {
            num_aps,
            num_ues,
            antennas_per_ap: 2,
            coherence_len: 200,
            pilot_len: num_ues,
            pilot_power: 0.1 / noise,
            dl_power: 1.0 / noise,
            qos_se: 0.2,
            fronthaul_cap: 20.0,
            max_served,
            area_side: 1000.0,
            min_ap_separation: 50.0,
            strong_set_fraction: 95.0,
            noise_figure_db,
            bandwidth_hz,
            rng_seed: 0,
            height_diff: default_height(),
            shadowing_std_db: default_shadowing(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// Fraction of the coherence block left for downlink payload.
    pub fn prelog(&self) -> f64 {
        (self.coherence_len - self.pilot_len) as f64 / self.coherence_len as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_aps == 0 || self.num_ues == 0 {
            return fail("num_aps and num_ues must be positive".into());
        }
        if self.antennas_per_ap == 0 {
            return fail("antennas_per_ap must be positive".into());
        }
        if self.pilot_len < self.num_ues {
            return fail(format!(
                "pilot_len {} is shorter than num_ues {}",
                self.pilot_len, self.num_ues
            ));
        }
        if self.pilot_len >= self.coherence_len {
            return fail("pilot_len must be below coherence_len".into());
        }
        if self.max_served == 0 || self.max_served > self.num_ues {
            return fail(format!("max_served must lie in 1..={}", self.num_ues));
        }
        if self.num_aps * self.max_served < self.num_ues {
            return fail(format!(
                "{} APs serving at most {} UEs each cannot cover {} UEs",
                self.num_aps, self.max_served, self.num_ues
            ));
        }
        if !(self.pilot_power > 0.0 && self.dl_power > 0.0) {
            return fail("powers must be positive".into());
        }
        if !(self.strong_set_fraction > 0.0 && self.strong_set_fraction <= 100.0) {
            return fail("strong_set_fraction must lie in (0, 100]".into());
        }
        if !(self.area_side > 0.0) {
            return fail("area_side must be positive".into());
        }
        if self.min_ap_separation < 0.0 || self.qos_se < 0.0 || self.fronthaul_cap <= 0.0 {
            return fail("separation, QoS and fronthaul limits must be nonnegative".into());
        }
        Ok(())
    }
}

/// AP and UE positions on the torus `[0, side)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
}

/// One Monte-Carlo draw of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// Large-scale gain of each AP-UE link.
    pub beta: Mat,
    /// Per-antenna mean-square of the MMSE channel estimate.
    pub sigma_sq: Mat,
    pub strong_sets: Vec<Vec<usize>>,
    /// 1.0 where UE k is in the strong set of AP m, else 0.0.
    pub delta: Mat,
    pub seed: u64,
}

impl Realization {
    /// Builds realization `index` of the scenario with the seed
    /// [`realization_seed`]`(rng_seed, index)`.
    pub fn generate(cfg: &NetworkConfig, index: u64) -> Result<Self> {
        let seed = realization_seed(cfg.rng_seed, index);
        let geom = build_geometry(cfg, seed)?;
        let beta = large_scale_fading(&geom, cfg, seed);
        Ok(Self::from_beta(geom, beta, cfg, seed))
    }

    /// Completes a realization from given large-scale gains.
    pub fn from_beta(geom: Geometry, beta: Mat, cfg: &NetworkConfig, seed: u64) -> Self {
        let sigma_sq = beta.map(|b| channel_estimate_variance(b, cfg.pilot_power, cfg.pilot_len));
        let (strong_sets, delta) = select_strong_sets(&beta, cfg);
        Realization {
            ap_positions: geom.ap_positions,
            ue_positions: geom.ue_positions,
            beta,
            sigma_sq,
            strong_sets,
            delta,
            seed,
        }
    }

    pub fn num_aps(&self) -> usize {
        self.beta.rows()
    }

    pub fn num_ues(&self) -> usize {
        self.beta.cols()
    }
}

/// Shortest distance between two points on a torus of the given side.
/// Seed of realization `index`: the first output of stream `index` of a
/// ChaCha8 generator keyed by `base`.
pub fn realization_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.gen()
}

pub fn wrap_distance(a: [f64; 2], b: [f64; 2], side: f64) -> f64 {
    let axis = |u: f64, v: f64| {
        let d = (u - v).abs() % side;
        d.min(side - d)
    };
    axis(a[0], b[0]).hypot(axis(a[1], b[1]))
}

pub fn build_geometry(cfg: &NetworkConfig, seed: u64) -> Result<Geometry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = cfg.area_side;
    let draw = |rng: &mut ChaCha8Rng| [rng.gen::<f64>() * side, rng.gen::<f64>() * side];

    let mut aps: Vec<[f64; 2]> = Vec::with_capacity(cfg.num_aps);
    for ap in 0..cfg.num_aps {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ROUNDS {
            let p = draw(&mut rng);
            if aps
                .iter()
                .all(|&q| wrap_distance(p, q, side) >= cfg.min_ap_separation)
            {
                aps.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Placement {
                ap,
                min_sep: cfg.min_ap_separation,
                rounds: MAX_PLACEMENT_ROUNDS,
            });
        }
    }
    let ues = (0..cfg.num_ues).map(|_| draw(&mut rng)).collect();
    Ok(Geometry {
        ap_positions: aps,
        ue_positions: ues,
    })
}

/// Log-distance path loss in dB, without shadowing.
pub fn path_loss_db(distance_m: f64) -> f64 {
    -30.5 - 36.7 * distance_m.max(MIN_DISTANCE_M).log10()
}

/// Large-scale gains with independent log-normal shadowing.
pub fn large_scale_fading(geom: &Geometry, cfg: &NetworkConfig, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let shadow = Normal::new(0.0, cfg.shadowing_std_db).expect("finite shadowing std");
    let mut beta = Mat::zeros(geom.ap_positions.len(), geom.ue_positions.len());
    for (m, &ap) in geom.ap_positions.iter().enumerate() {
        for (k, &ue) in geom.ue_positions.iter().enumerate() {
            let d2 = wrap_distance(ap, ue, cfg.area_side);
            let d = d2.hypot(cfg.height_diff);
            let db = path_loss_db(d) + shadow.sample(&mut rng);
            beta[(m, k)] = 10f64.powf(db / 10.0);
        }
    }
    beta
}

/// Mean-square of the per-antenna MMSE estimate, `tau rho beta^2 / (tau rho beta + 1)`.
pub fn channel_estimate_variance(beta: f64, pilot_power: f64, pilot_len: usize) -> f64 {
    let snr = pilot_len as f64 * pilot_power;
    snr * beta * beta / (snr * beta + 1.0)
}

/// Per-AP strong sets: the fewest strongest UEs holding at least
/// `strong_set_fraction` percent of the AP's total gain, capped at `N - 1`.
pub fn select_strong_sets(beta: &Mat, cfg: &NetworkConfig) -> (Vec<Vec<usize>>, Mat) {
    let (m_count, k_count) = (beta.rows(), beta.cols());
    let cap = cfg.antennas_per_ap.saturating_sub(1);
    let target = cfg.strong_set_fraction / 100.0;
    let mut sets = Vec::with_capacity(m_count);
    let mut delta = Mat::zeros(m_count, k_count);
    for m in 0..m_count {
        let row = beta.row(m);
        let total: f64 = row.iter().sum();
        let mut order: Vec<usize> = (0..k_count).collect();
        order.sort_by(|&i, &j| row[j].total_cmp(&row[i]).then(i.cmp(&j)));
        let mut set = Vec::new();
        if total > 0.0 {
            let mut acc = 0.0;
            for &k in &order {
                set.push(k);
                acc += row[k];
                if acc / total >= target {
                    break;
                }
            }
        }
        set.truncate(cap);
        for &k in &set {
            delta[(m, k)] = 1.0;
        }
        sets.push(set);
    }
    (sets, delta)
}

/// Empirical statistics of the simulated pilot-based MMSE estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmseStats {
    /// Mean of `|g_hat|^2` per antenna.
    pub estimate_power: f64,
    /// Mean of `|g - g_hat|^2` per antenna.
    pub error_power: f64,
}

/// Simulates single-UE pilot training: the AP receives `sqrt(rho) g phi^H + noise`
/// over `pilot_len` symbols, correlates with the unit-modulus pilot `phi` and
/// scales by the MMSE coefficient.
pub fn simulate_mmse_estimate<R: Rng + ?Sized>(
    beta: f64,
    pilot_power: f64,
    pilot_len: usize,
    num_samples: usize,
    rng: &mut R,
) -> MmseStats {
    assert!(num_samples >= 1 && pilot_len >= 1);
    let tau = pilot_len as f64;
    let coef = pilot_power.sqrt() * beta / (tau * pilot_power * beta + 1.0);
    let pilot: Vec<(f64, f64)> = (0..pilot_len)
        .map(|n| {
            let ph = 2.0 * std::f64::consts::PI * n as f64 / tau;
            (ph.cos(), ph.sin())
        })
        .collect();
    let cn = |var: f64, rng: &mut R| {
        let s = (var / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        (s * re, s * im)
    };

    let (mut est, mut err) = (0.0, 0.0);
    let amp = pilot_power.sqrt();
    for _ in 0..num_samples {
        let g = cn(beta, rng);
        // y = sum_n (sqrt(rho) g conj(phi_n) + w_n) phi_n
        let (mut yr, mut yi) = (0.0, 0.0);
        for &(pr, pi) in &pilot {
            let (wr, wi) = cn(1.0, rng);
            let rr = amp * (g.0 * pr + g.1 * pi) + wr;
            let ri = amp * (g.1 * pr - g.0 * pi) + wi;
            yr += rr * pr - ri * pi;
            yi += rr * pi + ri * pr;
        }
        let (hr, hi) = (coef * yr, coef * yi);
        est += hr * hr + hi * hi;
        err += (g.0 - hr).powi(2) + (g.1 - hi).powi(2);
    }
    MmseStats {
        estimate_power: est / num_samples as f64,
        error_power: err / num_samples as f64,
    }
}
