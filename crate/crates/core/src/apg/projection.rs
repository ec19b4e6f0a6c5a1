//! Closed-form projections onto the APG feasible set.

use crate::mat::Mat;

/// Projects onto `{x >= 0, ||x|| <= 1}`: clamp negatives, then shrink radially.
pub fn project_theta(row: &mut [f64]) {
    let mut nrm = 0.0;
    for x in row.iter_mut() {
        *x = x.max(0.0);
        nrm += *x * *x;
    }
    let scale = 1.0 / nrm.sqrt().max(1.0);
    if scale < 1.0 {
        row.iter_mut().for_each(|x| *x *= scale);
    }
}

/// Composed projection for `{0 <= x <= 1, ||x||^2 <= max_served}`: clamp
/// negatives, shrink into the ball, then clip at 1. Not the exact projection
/// onto the intersection, but lands inside it.
pub fn project_z(row: &mut [f64], max_served: usize) {
    let radius = (max_served as f64).sqrt();
    let mut nrm = 0.0;
    for x in row.iter_mut() {
        *x = x.max(0.0);
        nrm += *x * *x;
    }
    let scale = radius / nrm.sqrt().max(radius);
    for x in row.iter_mut() {
        *x = (*x * scale).min(1.0);
    }
}

pub fn project_theta_rows(theta: &mut Mat) {
    for m in 0..theta.rows() {
        project_theta(theta.row_mut(m));
    }
}

pub fn project_z_rows(z: &mut Mat, max_served: usize) {
    for m in 0..z.rows() {
        project_z(z.row_mut(m), max_served);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn theta_examples() {
        let mut a = [0.3, 0.4];
        project_theta(&mut a);
        assert_eq!(a, [0.3, 0.4]);
        let mut b = [3.0, 4.0];
        project_theta(&mut b);
        assert_relative_eq!(b[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(b[1], 0.8, epsilon = 1e-15);
        let mut c = [-1.0, 2.0];
        project_theta(&mut c);
        assert_eq!(c, [0.0, 1.0]);
    }

    #[test]
    fn z_examples() {
        let mut a = [2.0, 2.0];
        project_z(&mut a, 1);
        assert_relative_eq!(a[0], 0.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(a[1], 0.5f64.sqrt(), epsilon = 1e-15);
        let mut b = [0.2, 1.0, 0.0];
        project_z(&mut b, 3);
        assert_eq!(b, [0.2, 1.0, 0.0]);
        let mut c = [0.9, 0.8, 0.7];
        project_z(&mut c, 2);
        assert!(c.iter().map(|x| x * x).sum::<f64>() <= 2.0 + 1e-12);
    }
}
