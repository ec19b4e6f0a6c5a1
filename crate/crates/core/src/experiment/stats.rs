use crate::error::{Error, Result};

/// Empirical CDF: sorted values paired with probabilities `i/n`.
///
/// With `grid > 0` and fewer grid points than values, `grid` evenly spaced
/// points are kept, always including the largest value.
pub fn emit_cdf(values: &[f64], grid: usize) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let full: Vec<(f64, f64)> = v
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n as f64))
        .collect();
    if grid == 0 || grid >= n {
        return Ok(full);
    }
    Ok((1..=grid).map(|j| full[j * n / grid - 1]).collect())
}

/// Percentile `q` in `[0, 1]` of sorted `values`, linearly interpolated
/// between order statistics at position `q (n - 1)`.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}

/// Median read off a full CDF from [`emit_cdf`].
pub fn median_from_cdf(cdf: &[(f64, f64)]) -> Option<f64> {
    let values: Vec<f64> = cdf.iter().map(|p| p.0).collect();
    percentile(&values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_cdf() {
        assert_eq!(emit_cdf(&[3.0], 0).unwrap(), vec![(3.0, 1.0)]);
        assert!(emit_cdf(&[], 0).is_err());
    }

    #[test]
    fn quartile_probabilities() {
        let cdf = emit_cdf(&[4.0, 2.0, 1.0, 3.0], 0).unwrap();
        let p: Vec<f64> = cdf.iter().map(|x| x.1).collect();
        assert_eq!(p, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(median_from_cdf(&cdf), Some(2.5));
        assert_eq!(median(&[4.0, 2.0, 1.0, 3.0]), Some(2.5));
    }

    #[test]
    fn thinned_cdf_keeps_maximum() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let cdf = emit_cdf(&v, 4).unwrap();
        assert_eq!(cdf.len(), 4);
        assert_eq!(*cdf.last().unwrap(), (9.0, 1.0));
    }
}
