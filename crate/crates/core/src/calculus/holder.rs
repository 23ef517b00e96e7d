//! Hölder seminorm estimation from dyadic increments.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::field::Field;
use crate::calculus::geometry::Grid;
use crate::error::{Error, Result};
use crate::rates::fit_power_law;
use crate::scalar::Real;

/// Which point pairs enter the supremum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderScheme {
    /// Pairs separated by `2^j` cells along one axis.
    #[default]
    DyadicPairs,
    /// Every pair of grid points; grids of at most 1024 points.
    AllPairs,
}

#[derive(Clone, Debug, Default)]
pub struct HolderOptions {
    pub scheme: HolderScheme,
    /// Sampling level per axis; defaults to the field's own grid, or a
    /// dimension dependent level for closed-form fields.
    pub level: Option<u32>,
    /// Restrict increments to one coordinate axis.
    pub axis: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleRow {
    pub scale: f64,
    pub max_increment: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderReport {
    pub exponent: f64,
    pub seminorm: f64,
    pub table: Vec<ScaleRow>,
    pub fitted_exponent: Option<f64>,
    pub fit_residual: Option<f64>,
}

const ALL_PAIRS_MAX_POINTS: usize = 1 << 10;

fn default_level(dim: usize) -> u32 {
    match dim {
        1 => 14,
        2 => 9,
        _ => 6,
    }
}

fn samples_for<T: Real>(f: &Field<T>, level: Option<u32>) -> Result<(Grid<T>, Vec<T>)> {
    if let (Some(s), None) = (f.samples(), level) {
        return Ok((s.grid().clone(), s.values().to_vec()));
    }
    let level = level.unwrap_or_else(|| default_level(f.dim()));
    let grid = Grid::uniform(f.domain().clone(), level)?;
    let values = f.sample_values(&grid);
    Ok((grid, values))
}

fn increment<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (y - x).to_f64_lossy();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Maximum increment over all pairs `(i, i + step)` along `axis`.
fn max_axis_increment<T: Real>(grid: &Grid<T>, values: &[T], nc: usize, axis: usize, step: usize) -> f64 {
    let n = grid.nodes(axis);
    let stride: usize = (axis + 1..grid.dim()).map(|a| grid.nodes(a)).product();
    (0..grid.len())
        .into_par_iter()
        .filter(|&flat| (flat / stride) % n + step < n)
        .map(|flat| {
            let other = flat + step * stride;
            increment(&values[flat * nc..(flat + 1) * nc], &values[other * nc..(other + 1) * nc])
        })
        .reduce(|| 0.0, f64::max)
}

/// Estimates `[δf]_α` and the scaling exponent of the increments.
pub fn holder_seminorm<T: Real>(f: &Field<T>, alpha: T, opts: &HolderOptions) -> Result<HolderReport> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::config(format!("exponent must lie in (0, 1], got {alpha}")));
    }
    if let Some(a) = opts.axis {
        if a >= f.dim() {
            return Err(Error::config(format!("axis {a} out of range")));
        }
    }
    let (grid, values) = samples_for(f, opts.level)?;
    if grid.len() < 2 {
        return Err(Error::config("empty grid"));
    }
    let nc = f.ncomp();
    let alpha = alpha.to_f64_lossy();
    let axes: Vec<usize> = match opts.axis {
        Some(a) => vec![a],
        None => (0..grid.dim()).collect(),
    };

    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut sup_ratio: f64 = 0.0;
    match opts.scheme {
        HolderScheme::DyadicPairs => {
            for &axis in &axes {
                let h = grid.spacing(axis).to_f64_lossy();
                for j in 0..grid.levels()[axis] {
                    let step = 1usize << j;
                    let scale = h * step as f64;
                    let m = max_axis_increment(&grid, &values, nc, axis, step);
                    sup_ratio = sup_ratio.max(m / scale.powf(alpha));
                    rows.push((scale, m));
                }
            }
        }
        HolderScheme::AllPairs => {
            if grid.len() > ALL_PAIRS_MAX_POINTS {
                return Err(Error::config(format!(
                    "all_pairs is limited to {ALL_PAIRS_MAX_POINTS} points, grid has {}",
                    grid.len()
                )));
            }
            let h = axes
                .iter()
                .map(|&a| grid.spacing(a).to_f64_lossy())
                .fold(f64::INFINITY, f64::min);
            let pts: Vec<Vec<f64>> = (0..grid.len())
                .map(|i| grid.point_flat(i).iter().map(|x| x.to_f64_lossy()).collect())
                .collect();
            let mut bins: Vec<f64> = Vec::new();
            for i in 0..grid.len() {
                for j in i + 1..grid.len() {
                    let diff: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| b - a).collect();
                    if let Some(a) = opts.axis {
                        if diff.iter().enumerate().any(|(k, d)| k != a && *d != 0.0) {
                            continue;
                        }
                    }
                    let d = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let inc = increment(&values[i * nc..(i + 1) * nc], &values[j * nc..(j + 1) * nc]);
                    sup_ratio = sup_ratio.max(inc / d.powf(alpha));
                    let bin = ((d / h).log2() + 1e-9).floor().max(0.0) as usize;
                    if bins.len() <= bin {
                        bins.resize(bin + 1, 0.0);
                    }
                    bins[bin] = bins[bin].max(inc);
                }
            }
            rows = bins
                .into_iter()
                .enumerate()
                .map(|(j, m)| (h * (j as f64).exp2(), m))
                .collect();
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows.dedup_by(|b, a| {
        if (a.0 - b.0).abs() <= 1e-12 * a.0 {
            a.1 = a.1.max(b.1);
            true
        } else {
            false
        }
    });

    let hmin = axes
        .iter()
        .map(|&a| grid.spacing(a).to_f64_lossy())
        .fold(f64::INFINITY, f64::min);
    let diam = match opts.axis {
        Some(a) => grid.domain().width(a).to_f64_lossy(),
        None => grid.domain().diam().to_f64_lossy(),
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.0 >= 2.0 * hmin * (1.0 - 1e-12) && r.0 <= diam / 4.0 * (1.0 + 1e-12))
        .cloned()
        .unzip();
    let fit = fit_power_law(&xs, &ys);
    Ok(HolderReport {
        exponent: alpha,
        seminorm: sup_ratio,
        table: rows
            .into_iter()
            .map(|(scale, m)| ScaleRow {
                scale,
                max_increment: m,
                ratio: m / scale.powf(alpha),
            })
            .collect(),
        fitted_exponent: fit.as_ref().map(|f| f.exponent),
        fit_residual: fit.as_ref().map(|f| f.residual),
    })
}
