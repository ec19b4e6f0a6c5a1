//! Penalty terms of the relaxed problem and the analytic gradient of the
//! penalized objective with respect to `(theta, z)`.

use crate::mat::Mat;
use crate::network::NetworkConfig;
use crate::se::{amplitudes, ap_powers, interference_from_powers, LinkGains};
use std::f64::consts::LN_2;

/// The four penalties and the negated sum SE at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    /// Binary relaxation, QoS, coverage/power-association, fronthaul.
    pub q: [f64; 4],
    pub h: f64,
}

impl Penalties {
    pub fn objective(&self, chi: f64, mu: &[f64; 4]) -> f64 {
        self.h + chi * self.q.iter().zip(mu).map(|(q, m)| q * m).sum::<f64>()
    }

    /// Penalties divided by their instance counts `(MK, K, MK, M)`.
    pub fn normalized(&self, num_aps: usize, num_ues: usize) -> [f64; 4] {
        let (m, k) = (num_aps as f64, num_ues as f64);
        [
            self.q[0] / (m * k),
            self.q[1] / k,
            self.q[2] / (m * k),
            self.q[3] / m,
        ]
    }
}

struct Terms {
    u: Vec<f64>,
    v: Vec<f64>,
    se: Vec<f64>,
    qos_gap: Vec<f64>,
    coverage_gap: Vec<f64>,
    overload: Vec<f64>,
}

fn terms(theta: &Mat, z: &Mat, g: &LinkGains, cfg: &NetworkConfig) -> Terms {
    let u = amplitudes(theta, g);
    let v = interference_from_powers(&ap_powers(theta), g);
    let se: Vec<f64> = u
        .iter()
        .zip(&v)
        .map(|(&u, &v)| g.prelog * (u * u / v).ln_1p() / LN_2)
        .collect();
    let qos_gap = se.iter().map(|&s| (cfg.qos_se - s).max(0.0)).collect();
    let coverage_gap = (0..z.cols())
        .map(|k| (1.0 - (0..z.rows()).map(|m| z[(m, k)].powi(2)).sum::<f64>()).max(0.0))
        .collect();
    let overload = (0..z.rows())
        .map(|m| {
            let load: f64 = z.row(m).iter().zip(&se).map(|(z, s)| z * z * s).sum();
            (load - cfg.fronthaul_cap).max(0.0)
        })
        .collect();
    Terms {
        u,
        v,
        se,
        qos_gap,
        coverage_gap,
        overload,
    }
}

pub fn penalty_terms(theta: &Mat, z: &Mat, g: &LinkGains, cfg: &NetworkConfig) -> Penalties {
    let t = terms(theta, z, g, cfg);
    let mut q1 = 0.0;
    let mut q3 = t.coverage_gap.iter().map(|c| c * c).sum::<f64>();
    for (&th, &zz) in theta.as_slice().iter().zip(z.as_slice()) {
        let z2 = zz * zz;
        q1 += z2 - z2 * z2;
        q3 += (th * th - z2).max(0.0).powi(2);
    }
    Penalties {
        q: [
            q1,
            t.qos_gap.iter().map(|x| x * x).sum(),
            q3,
            t.overload.iter().map(|x| x * x).sum(),
        ],
        h: -t.se.iter().sum::<f64>(),
    }
}

/// Value and gradient of `f = h + chi * sum_i mu_i Q_i`.
///
/// Returns `(f, penalties, grad_theta, grad_z)`. Hinges contribute zero
/// at their kinks. Cost is `O(MK)`.
pub fn value_and_gradient(
    theta: &Mat,
    z: &Mat,
    g: &LinkGains,
    cfg: &NetworkConfig,
    chi: f64,
    mu: &[f64; 4],
) -> (f64, Penalties, Mat, Mat) {
    let (mc, kc) = (theta.rows(), theta.cols());
    let t = terms(theta, z, g, cfg);
    let kappa = g.prelog / LN_2;
    let [c1, c2, c3, c4] = [chi * mu[0], chi * mu[1], chi * mu[2], chi * mu[3]];

    // Weight of each SE_i in f, so that df = sum_i w_i dSE_i + (explicit z, theta terms).
    let mut w: Vec<f64> = t.qos_gap.iter().map(|gap| -1.0 - 2.0 * c2 * gap).collect();
    if c4 != 0.0 {
        for m in 0..mc {
            let o = t.overload[m];
            if o > 0.0 {
                for (wi, zz) in w.iter_mut().zip(z.row(m)) {
                    *wi += 2.0 * c4 * o * zz * zz;
                }
            }
        }
    }
    let inv_sv: Vec<f64> = (0..kc).map(|i| 1.0 / (t.u[i] * t.u[i] + t.v[i])).collect();
    // coefficient of leak_mi in the interference part: w_i (A_i - B_i)
    let leak_w: Vec<f64> = (0..kc).map(|i| w[i] * (inv_sv[i] - 1.0 / t.v[i])).collect();
    let sig_w: Vec<f64> = (0..kc).map(|i| 2.0 * w[i] * inv_sv[i] * t.u[i]).collect();

    let mut q1 = 0.0;
    let mut q3 = t.coverage_gap.iter().map(|c| c * c).sum::<f64>();
    let mut gt = Mat::zeros(mc, kc);
    let mut gz = Mat::zeros(mc, kc);
    for m in 0..mc {
        let leak = g.leak.row(m);
        let sig = g.signal.row(m);
        let interf: f64 = leak.iter().zip(&leak_w).map(|(l, w)| l * w).sum();
        let th_row = theta.row(m);
        let z_row = z.row(m);
        let o = t.overload[m];
        for k in 0..kc {
            let th = th_row[k];
            let zz = z_row[k];
            let z2 = zz * zz;
            let excess = (th * th - z2).max(0.0);
            q1 += z2 - z2 * z2;
            q3 += excess * excess;
            gt[(m, k)] = kappa * (sig_w[k] * sig[k] + 2.0 * th * interf) + 4.0 * c3 * excess * th;
            gz[(m, k)] = c1 * (2.0 * zz - 4.0 * zz * z2)
                - 4.0 * c3 * (t.coverage_gap[k] + excess) * zz
                + 4.0 * c4 * o * zz * t.se[k];
        }
    }
    let pen = Penalties {
        q: [
            q1,
            t.qos_gap.iter().map(|x| x * x).sum(),
            q3,
            t.overload.iter().map(|x| x * x).sum(),
        ],
        h: -t.se.iter().sum::<f64>(),
    };
    (pen.objective(chi, mu), pen, gt, gz)
}
