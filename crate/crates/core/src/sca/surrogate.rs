//! Convex and concave bounds used to convexify the relaxed problem around
//! an expansion point. All SE quantities are in bit/s/Hz and include the prelog.

use crate::mat::Mat;
use crate::se::LinkGains;
use std::f64::consts::LN_2;

/// `prelog * log2(1 + u^2 / w)`.
pub fn se_tilde(prelog: f64, u: f64, w: f64) -> f64 {
    prelog * (u * u / w).ln_1p() / LN_2
}

/// Concave minorant of [`se_tilde`] in `(u, y)`, tight at `(u0, y0)`.
pub fn surrogate_se_lower(prelog: f64, u: f64, y: f64, u0: f64, y0: f64) -> f64 {
    let r = u0 * u0 / y0;
    let gamma = u0 * u0 / (y0 * (u0 * u0 + y0));
    prelog / LN_2 * (r.ln_1p() - r + 2.0 * u0 * u / y0 - gamma * (u * u + y))
}

/// Convex majorant of [`se_tilde`] in `(u, w)` for `w > 0`, tight at `(u0, w0)`.
pub fn surrogate_se_upper(prelog: f64, u: f64, w: f64, u0: f64, w0: f64) -> f64 {
    let d = u0 * u0 + w0;
    prelog / LN_2 * (d.ln() + (u * u + w) / d - 1.0 - w.ln())
}

/// Relaxation gap `sum (a - a^2)`, zero exactly on binary points.
pub fn assoc_penalty(a: &Mat) -> f64 {
    a.as_slice().iter().map(|a| a - a * a).sum()
}

/// Linear majorant of [`assoc_penalty`] around `a0`.
pub fn assoc_penalty_majorant(a: &Mat, a0: &Mat) -> f64 {
    a.as_slice()
        .iter()
        .zip(a0.as_slice())
        .map(|(a, a0)| a - 2.0 * a0 * a + a0 * a0)
        .sum()
}

/// Convex majorant of the bilinear term `a * t` around `(a0, t0)`.
pub fn bilinear_majorant(a: f64, t: f64, a0: f64, t0: f64) -> f64 {
    let d0 = a0 - t0;
    0.25 * ((a + t).powi(2) - 2.0 * d0 * (a - t) + d0 * d0)
}

/// Linear minorant of the interference-plus-noise of UE `k` around `theta0`.
pub fn interference_minorant(theta: &Mat, theta0: &Mat, g: &LinkGains, k: usize) -> f64 {
    let mut v = 1.0;
    for m in 0..theta.rows() {
        let lin: f64 = theta
            .row(m)
            .iter()
            .zip(theta0.row(m))
            .map(|(t, t0)| 2.0 * t0 * t - t0 * t0)
            .sum();
        v += g.leak[(m, k)] * lin;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bounds_are_tight_at_expansion() {
        let (u0, y0) = (3.0, 7.0);
        assert_relative_eq!(
            surrogate_se_lower(0.9, u0, y0, u0, y0),
            se_tilde(0.9, u0, y0),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            surrogate_se_upper(0.9, u0, y0, u0, y0),
            se_tilde(0.9, u0, y0),
            epsilon = 1e-12
        );
        assert_relative_eq!(bilinear_majorant(0.3, 2.0, 0.3, 2.0), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn bounds_hold_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let (u, u0) = (rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
            let (y, y0) = (rng.gen_range(1.0..50.0), rng.gen_range(1.0..50.0));
            let exact = se_tilde(1.0, u, y);
            assert!(surrogate_se_lower(1.0, u, y, u0, y0) <= exact + 1e-12);
            assert!(surrogate_se_upper(1.0, u, y, u0, y0) >= exact - 1e-12);
            let (a, t) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..10.0));
            let (a0, t0) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..10.0));
            assert!(bilinear_majorant(a, t, a0, t0) >= a * t - 1e-12);
        }
    }

    #[test]
    fn zero_amplitude_expansion() {
        let v = surrogate_se_lower(1.0, 2.0, 3.0, 0.0, 1.5);
        assert_eq!(v, 0.0);
        let w0: f64 = 2.5;
        let up = surrogate_se_upper(1.0, 0.0, 4.0, 0.0, w0);
        assert_relative_eq!(
            up,
            (w0.ln() + 4.0 / w0 - 1.0 - 4f64.ln()) / LN_2,
            epsilon = 1e-12
        );
        assert!(up >= 0.0);
        assert_eq!(surrogate_se_upper(1.0, 0.0, w0, 0.0, w0), 0.0);
    }

    #[test]
    fn penalty_majorant() {
        let a0 = Mat::from_rows(&[vec![0.2, 0.9]]);
        assert_relative_eq!(
            assoc_penalty_majorant(&a0, &a0),
            assoc_penalty(&a0),
            epsilon = 1e-15
        );
        let a = Mat::from_rows(&[vec![0.7, 0.1]]);
        assert!(assoc_penalty_majorant(&a, &a0) >= assoc_penalty(&a));
    }
}
