//! Separable Gaussian mollification on dyadic grids.

use rayon::prelude::*;

use crate::calculus::field::Field;
use crate::calculus::geometry::Grid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reflects an out-of-range index into `0..n` (mirror about the end nodes).
fn reflect(mut i: i64, n: i64) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

fn kernel<T: Real>(eps: T, h: T) -> Vec<T> {
    let r = (T::lit(3.0) * eps / h).ceil().to_usize().unwrap_or(1).max(1) as i64;
    let w: Vec<T> = (-r..=r)
        .map(|j| {
            let x = T::lit(j as f64) * h / eps;
            (-(x * x) * T::lit(0.5)).exp()
        })
        .collect();
    let s: T = w.iter().copied().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Convolves `f` with a Gaussian of width `eps` truncated at `3 eps`,
/// sampled on the uniform grid of `level`. Requires `eps >= 2h`.
pub fn mollify<T: Real>(f: &Field<T>, eps: T, level: u32) -> Result<Field<T>> {
    let grid = Grid::uniform(f.domain().clone(), level)?;
    let h = (0..grid.dim()).map(|a| grid.spacing(a)).fold(T::zero(), |a, b| a.max(b));
    if !(eps >= T::lit(2.0) * h) {
        return Err(Error::config(format!(
            "mollification width {eps} is below twice the grid spacing {h}"
        )));
    }
    let nc = f.ncomp();
    let mut values = f.sample_values(&grid);
    for axis in 0..grid.dim() {
        let n = grid.nodes(axis);
        let w = kernel(eps, grid.spacing(axis));
        let r = (w.len() / 2) as i64;
        let stride: usize = (axis + 1..grid.dim()).map(|a| grid.nodes(a)).product();
        let lines: Vec<usize> = (0..grid.len()).filter(|&i| (i / stride) % n == 0).collect();
        let smoothed: Vec<Vec<T>> = lines
            .par_iter()
            .map(|&start| {
                let mut out = vec![T::zero(); n * nc];
                for i in 0..n {
                    for (j, &wj) in w.iter().enumerate() {
                        let src = reflect(i as i64 + j as i64 - r, n as i64);
                        let at = (start + src * stride) * nc;
                        for c in 0..nc {
                            out[i * nc + c] = out[i * nc + c] + wj * values[at + c];
                        }
                    }
                }
                out
            })
            .collect();
        for (&start, line) in lines.iter().zip(smoothed) {
            for i in 0..n {
                let at = (start + i * stride) * nc;
                values[at..at + nc].copy_from_slice(&line[i * nc..(i + 1) * nc]);
            }
        }
    }
    Field::from_grid(
        grid,
        f.shape(),
        values,
        f.exponent(),
        format!("mollify({}, eps={eps})", f.label()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::geometry::Domain;

    #[test]
    fn constants_are_preserved() {
        let f = Field::constant(Domain::<f64>::unit(2), (1, 1), vec![1.5]).unwrap();
        let g = mollify(&f, 0.05, 6).unwrap();
        for v in g.samples().unwrap().values() {
            assert!((v - 1.5).abs() < 1e-14);
        }
    }

    #[test]
    fn resolution_guard() {
        let f = Field::constant(Domain::<f64>::unit(1), (1, 1), vec![1.0]).unwrap();
        assert!(matches!(mollify(&f, 0.01, 6), Err(Error::Config(_))));
    }

    #[test]
    fn reflection_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(-9, 5), 1);
        assert_eq!(reflect(2, 5), 2);
    }
}
