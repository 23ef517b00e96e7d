//! Least-squares power-law fits used to test `O(·)` and `o(·)` claims.

use serde::Serialize;

use crate::scalar::Real;

/// Fit of `y ≈ C x^exponent` in log-log coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub log_constant: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
    pub points: usize,
}

/// Fits a power law to the pairs with strictly positive, finite coordinates.
/// Returns `None` when fewer than two such pairs exist.
pub fn fit_power_law<T: Real>(xs: &[T], ys: &[T]) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (x.to_f64_lossy(), y.to_f64_lossy()))
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - icpt - slope * p.0).powi(2))
        .sum();
    Some(PowerFit {
        exponent: slope,
        log_constant: icpt,
        residual: (rss / n).sqrt(),
        points: pts.len(),
    })
}

/// Observed order of convergence from errors at successive dyadic levels:
/// fit of `error ∝ h^p` with `h = 2^-level`.
pub fn convergence_order(levels: &[u32], errors: &[f64]) -> Option<PowerFit> {
    let hs: Vec<f64> = levels.iter().map(|&l| (-(l as f64)).exp2()).collect();
    fit_power_law(&hs, errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power() {
        let xs: Vec<f64> = (1..8).map(|k| (-(k as f64)).exp2()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.7)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.exponent - 1.7).abs() < 1e-12);
        assert!((fit.log_constant - 3f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn skips_zero_entries() {
        assert!(fit_power_law(&[1.0, 2.0], &[0.0, 1.0]).is_none());
        let fit = fit_power_law(&[1.0, 2.0, 4.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(fit.points, 2);
    }

    #[test]
    fn order_from_levels() {
        let errs = [1e-2, 2.5e-3, 6.25e-4];
        let fit = convergence_order(&[4, 5, 6], &errs).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
    }
}
