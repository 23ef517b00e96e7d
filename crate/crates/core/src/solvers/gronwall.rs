//! Numerical check of the Young-Gronwall bound `‖a‖_β ≤ C (|a₀| + ‖b‖_α)`
//! for solutions of `a_t = a₀ + ∫_0^t (b + u a) dy`.

use serde::Serialize;

use crate::calculus::field::Field;
use crate::calculus::geometry::Grid;
use crate::calculus::{holder_seminorm, HolderOptions};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct GronwallOptions {
    pub levels: Vec<u32>,
    /// The linear equation must hold to `residual_tol (1 + sup |a|)`.
    pub residual_tol: f64,
    /// Largest accepted relative spread of the ratio across levels.
    pub max_variation: f64,
}

impl Default for GronwallOptions {
    fn default() -> Self {
        GronwallOptions {
            levels: (10..=14).collect(),
            residual_tol: 1e-6,
            max_variation: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GronwallLevel {
    pub level: u32,
    /// `sup |a| + [a]_β`.
    pub a_norm: f64,
    pub a0: f64,
    /// `sup |b| + [b]_α`.
    pub b_norm: f64,
    /// `None` in the `0 / 0` case.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GronwallReport {
    pub levels: Vec<GronwallLevel>,
    /// Sup of `|a_t - a₀ - ∫_0^t (b + u a) dy|` at the finest level.
    pub residual: f64,
    /// `(max - min) / max` of the ratio over the levels.
    pub variation: f64,
    /// `a ≡ 0` with `a₀ = 0` and `b ≡ 0`.
    pub exact_zero: bool,
    pub finite: bool,
    pub stable: bool,
    pub pass: bool,
}

fn holder_norm<T: Real>(f: &Field<T>, exponent: T, level: u32, samples: &[T]) -> Result<f64> {
    let sup = samples.iter().fold(0.0f64, |m, x| m.max(x.to_f64_lossy().abs()));
    let semi = holder_seminorm(
        f,
        exponent,
        &HolderOptions {
            level: Some(level),
            ..Default::default()
        },
    )?;
    Ok(sup + semi.seminorm)
}

/// Checks the linear equation by trapezoid Young sums, then reports the
/// ratio `‖a‖_β / (|a₀| + ‖b‖_α)` and its spread across refinement levels.
pub fn verify_gronwall<T: Real>(
    a: &Field<T>,
    b: &Field<T>,
    u: &Field<T>,
    y: &Field<T>,
    alpha: T,
    beta: T,
    opts: &GronwallOptions,
) -> Result<GronwallReport> {
    for (name, f) in [("a", a), ("b", b), ("u", u), ("y", y)] {
        if f.dim() != 1 || f.ncomp() != 1 {
            return Err(Error::shape(format!("{name} must be a scalar signal on an interval")));
        }
        if f.domain() != y.domain() {
            return Err(Error::shape(format!("{name} does not live on the interval of y")));
        }
    }
    let finest = *opts
        .levels
        .iter()
        .max()
        .ok_or_else(|| Error::config("at least one level is required"))?;

    let grid = Grid::uniform(y.domain().clone(), finest)?;
    let (av, bv, uv, yv) = (
        a.sample_values(&grid),
        b.sample_values(&grid),
        u.sample_values(&grid),
        y.sample_values(&grid),
    );
    let mut acc = T::zero();
    let mut residual: f64 = 0.0;
    for i in 0..grid.len() - 1 {
        let (l, r) = (bv[i] + uv[i] * av[i], bv[i + 1] + uv[i + 1] * av[i + 1]);
        acc = acc + T::lit(0.5) * (l + r) * (yv[i + 1] - yv[i]);
        residual = residual.max((av[i + 1] - av[0] - acc).abs().to_f64_lossy());
    }
    let a_sup = av.iter().fold(0.0f64, |m, x| m.max(x.to_f64_lossy().abs()));
    if !(residual <= opts.residual_tol * (1.0 + a_sup)) {
        return Err(Error::Precondition(format!(
            "a does not solve the linear equation: residual {residual:.3e}"
        )));
    }

    let mut levels = Vec::new();
    for &level in &opts.levels {
        let g = Grid::uniform(y.domain().clone(), level)?;
        let (av, bv) = (a.sample_values(&g), b.sample_values(&g));
        let a_norm = holder_norm(a, beta, level, &av)?;
        let b_norm = holder_norm(b, alpha, level, &bv)?;
        let a0 = av[0].to_f64_lossy().abs();
        let den = a0 + b_norm;
        let ratio = if den == 0.0 && a_norm == 0.0 { None } else { Some(a_norm / den) };
        levels.push(GronwallLevel {
            level,
            a_norm,
            a0,
            b_norm,
            ratio,
        });
    }
    let exact_zero = levels.iter().all(|l| l.ratio.is_none());
    let ratios: Vec<f64> = levels.iter().filter_map(|l| l.ratio).collect();
    let finite = ratios.iter().all(|r| r.is_finite());
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let variation = if ratios.is_empty() || hi == 0.0 { 0.0 } else { (hi - lo) / hi };
    let stable = finite && variation < opts.max_variation;
    Ok(GronwallReport {
        levels,
        residual,
        variation,
        exact_zero,
        finite,
        stable,
        pass: exact_zero || stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::geometry::Domain;

    fn f(label: &str, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Field<f64> {
        Field::scalar_fn(Domain::unit(1), 1.0, label, move |p: &[f64]| h(p[0])).unwrap()
    }

    #[test]
    fn exponential_ratio_is_level_stable() {
        let r = verify_gronwall(
            &f("a", f64::exp),
            &f("b", |_| 0.0),
            &f("u", |_| 1.0),
            &f("y", |t| t),
            0.5,
            0.5,
            &GronwallOptions::default(),
        )
        .unwrap();
        assert!(r.pass && r.variation < 0.05, "{r:?}");
    }

    #[test]
    fn zero_solution_is_exact_zero() {
        let zero = f("zero", |_| 0.0);
        let r = verify_gronwall(&zero, &zero, &f("u", |_| 1.0), &f("y", |t| t), 0.5, 0.5, &GronwallOptions::default()).unwrap();
        assert!(r.exact_zero && r.pass);
    }

    #[test]
    fn wrong_solution_is_rejected() {
        let r = verify_gronwall(
            &f("a", |t| 1.0 + t),
            &f("b", |_| 0.0),
            &f("u", |_| 1.0),
            &f("y", |t| t),
            0.5,
            0.5,
            &GronwallOptions::default(),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
