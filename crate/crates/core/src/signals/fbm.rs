//! Fractional Brownian motion sampled exactly through a dense Cholesky factor.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::calculus::field::Field;
use crate::calculus::geometry::{Domain, Grid};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signals::lacunary::component_rng;

pub const MAX_FBM_LEVEL: u32 = 12;

/// Cholesky factor of the fBm covariance on a dyadic grid, reusable across seeds.
pub struct FbmSampler {
    hurst: f64,
    level: u32,
    lower: f64,
    upper: f64,
    factor: DMatrix<f64>,
}

impl FbmSampler {
    pub fn new(hurst: f64, level: u32, lower: f64, upper: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::config(format!("Hurst parameter must lie in (0, 1), got {hurst}")));
        }
        if level > MAX_FBM_LEVEL {
            return Err(Error::Size(format!(
                "fBm level {level} exceeds the dense factorisation limit {MAX_FBM_LEVEL}"
            )));
        }
        if level == 0 || !(lower < upper) {
            return Err(Error::config("fBm needs level >= 1 and a non-empty interval"));
        }
        let n = 1usize << level;
        let h = (upper - lower) / n as f64;
        let t: Vec<f64> = (1..=n).map(|i| h * i as f64).collect();
        let h2 = 2.0 * hurst;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            0.5 * (t[i].powf(h2) + t[j].powf(h2) - (t[i] - t[j]).abs().powf(h2))
        });
        let factor = cov
            .cholesky()
            .ok_or_else(|| Error::config("fBm covariance is not positive definite"))?
            .unpack();
        Ok(FbmSampler {
            hurst,
            level,
            lower,
            upper,
            factor,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Path values at the `2^level + 1` grid nodes, starting from 0.
    pub fn sample_path(&self, seed: u64) -> Vec<f64> {
        let n = self.factor.nrows();
        let mut rng = component_rng(seed, 0);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut path = Vec::with_capacity(n + 1);
        path.push(0.0);
        for i in 0..n {
            let row = self.factor.row(i);
            let mut s = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                s += row[j] * zj;
            }
            path.push(s);
        }
        path
    }

    /// Grid field with claimed exponent `H - 0.01`.
    pub fn sample<T: Real>(&self, seed: u64) -> Result<Field<T>> {
        let domain = Domain::interval(T::lit(self.lower), T::lit(self.upper))?;
        let grid = Grid::uniform(domain, self.level)?;
        let values = self.sample_path(seed).into_iter().map(T::lit).collect();
        Field::from_grid(
            grid,
            (1, 1),
            values,
            T::lit(self.hurst - 0.01),
            format!("fbm(H={},seed={seed})", self.hurst),
        )
    }
}

/// One fBm path on `[0, 1]` with `2^level` steps.
pub fn gen_fbm_1d<T: Real>(hurst: f64, level: u32, seed: u64) -> Result<Field<T>> {
    FbmSampler::new(hurst, level, 0.0, 1.0)?.sample(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_and_reproducible() {
        let a: Field<f64> = gen_fbm_1d(0.75, 6, 9).unwrap();
        let b: Field<f64> = gen_fbm_1d(0.75, 6, 9).unwrap();
        assert_eq!(a.eval_scalar(&[0.0]).unwrap(), 0.0);
        assert_eq!(a.samples().unwrap().values(), b.samples().unwrap().values());
        assert!((a.exponent() - 0.74).abs() < 1e-12);
    }

    #[test]
    fn level_guard() {
        assert!(matches!(FbmSampler::new(0.75, 13, 0.0, 1.0), Err(Error::Size(_))));
    }
}
