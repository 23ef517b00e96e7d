//! Evaluable scalar/vector/matrix fields on a box.
//!
//! A [`Field`] is either a closed-form function (evaluable anywhere) or a set of
//! samples on a dyadic [`Grid`] read back through multilinear interpolation.
//! Values are stored row-major as `rows x cols` matrices; vectors use
//! `cols == 1`, scalars `rows == cols == 1`.

use std::fmt;
use std::sync::Arc;

use crate::calculus::geometry::{Domain, Grid};
use crate::error::{Error, Result};
use crate::scalar::Real;

type EvalFn<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;

#[derive(Clone)]
pub enum Source<T> {
    Closed(Arc<EvalFn<T>>),
    Grid(Arc<GridSamples<T>>),
}

/// Samples of a field on every node of a grid.
#[derive(Clone, Debug)]
pub struct GridSamples<T> {
    grid: Grid<T>,
    ncomp: usize,
    values: Vec<T>,
}

impl<T: Real> GridSamples<T> {
    pub fn new(grid: Grid<T>, ncomp: usize, values: Vec<T>) -> Result<Self> {
        if ncomp == 0 {
            return Err(Error::shape("fields need at least one component"));
        }
        if values.len() != grid.len() * ncomp {
            return Err(Error::Format(format!(
                "expected {} samples ({} nodes x {} components), got {}",
                grid.len() * ncomp,
                grid.len(),
                ncomp,
                values.len()
            )));
        }
        Ok(GridSamples {
            grid,
            ncomp,
            values,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    #[inline]
    pub fn at_flat(&self, flat: usize) -> &[T] {
        &self.values[flat * self.ncomp..(flat + 1) * self.ncomp]
    }

    /// Locates `x` on `axis`: cell index and fractional offset in `[0, 1]`.
    /// Offsets within rounding of a node are snapped so node values are exact.
    #[inline]
    pub(crate) fn locate(&self, axis: usize, x: T) -> (usize, T) {
        let g = &self.grid;
        let cells = g.cells(axis);
        let lo = g.domain().lower()[axis];
        let u = (x - lo) / g.domain().width(axis) * T::from_usize_lossy(cells);
        let r = u.round();
        let u = if (u - r).abs() < T::lit(1e-9) { r } else { u };
        let u = u.max(T::zero()).min(T::from_usize_lossy(cells));
        let i = u.floor().to_usize().unwrap_or(0).min(cells - 1);
        (i, u - T::from_usize_lossy(i))
    }

    /// Visits the grid nodes of the cell containing `p` with their
    /// multilinear weights; zero-weight corners are skipped.
    #[inline]
    pub fn for_each_corner(&self, p: &[T], mut visit: impl FnMut(usize, T)) {
        let m = self.grid.dim();
        let mut base = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for axis in 0..m {
            let (i, t) = self.locate(axis, p[axis]);
            base[axis] = i;
            frac[axis] = t;
        }
        let mut idx = [0usize; 3];
        for corner in 0..(1usize << m) {
            let mut w = T::one();
            for axis in 0..m {
                let bit = (corner >> axis) & 1;
                idx[axis] = base[axis] + bit;
                w = w * if bit == 1 {
                    frac[axis]
                } else {
                    T::one() - frac[axis]
                };
            }
            if w != T::zero() {
                visit(self.grid.flat(&idx[..m]), w);
            }
        }
    }

    /// Multilinear interpolation into `out` (length `ncomp`).
    pub fn interpolate(&self, p: &[T], out: &mut [T]) {
        let m = self.grid.dim();
        let mut base = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for axis in 0..m {
            let (i, t) = self.locate(axis, p[axis]);
            base[axis] = i;
            frac[axis] = t;
        }
        out.iter_mut().for_each(|o| *o = T::zero());
        let mut idx = [0usize; 3];
        for corner in 0..(1usize << m) {
            let mut w = T::one();
            for axis in 0..m {
                let bit = (corner >> axis) & 1;
                idx[axis] = base[axis] + bit;
                w = w * if bit == 1 {
                    frac[axis]
                } else {
                    T::one() - frac[axis]
                };
            }
            if w == T::zero() {
                continue;
            }
            let vals = self.at_flat(self.grid.flat(&idx[..m]));
            for (o, &v) in out.iter_mut().zip(vals) {
                *o = *o + w * v;
            }
        }
    }
}

/// An evaluable field with a claimed Hölder exponent.
#[derive(Clone)]
pub struct Field<T> {
    domain: Domain<T>,
    rows: usize,
    cols: usize,
    source: Source<T>,
    exponent: T,
    label: String,
}

impl<T: Real> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Closed(_) => "closed".to_string(),
            Source::Grid(s) => format!("grid{:?}", s.grid().levels()),
        };
        f.debug_struct("Field")
            .field("label", &self.label)
            .field("shape", &(self.rows, self.cols))
            .field("dim", &self.domain.dim())
            .field("exponent", &self.exponent)
            .field("source", &kind)
            .finish()
    }
}

fn check_exponent<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha <= T::one() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "claimed Hölder exponent must lie in (0, 1], got {alpha}"
        )))
    }
}

impl<T: Real> Field<T> {
    /// Closed-form matrix-valued field.
    pub fn closed<F>(
        domain: Domain<T>,
        shape: (usize, usize),
        exponent: T,
        label: impl Into<String>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[T], &mut [T]) + Send + Sync + 'static,
    {
        check_exponent(exponent)?;
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::shape("empty codomain"));
        }
        Ok(Field {
            domain,
            rows: shape.0,
            cols: shape.1,
            source: Source::Closed(Arc::new(f)),
            exponent,
            label: label.into(),
        })
    }

    /// Closed-form scalar field.
    pub fn scalar_fn<F>(domain: Domain<T>, exponent: T, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        Field::closed(domain, (1, 1), exponent, label, move |p, out| out[0] = f(p))
    }

    /// Constant matrix field.
    pub fn constant(domain: Domain<T>, shape: (usize, usize), value: Vec<T>) -> Result<Self> {
        if value.len() != shape.0 * shape.1 {
            return Err(Error::shape("constant value does not match shape"));
        }
        Field::closed(domain, shape, T::one(), "constant", move |_, out| {
            out.copy_from_slice(&value)
        })
    }

    /// Grid-sampled field.
    pub fn from_grid(
        grid: Grid<T>,
        shape: (usize, usize),
        values: Vec<T>,
        exponent: T,
        label: impl Into<String>,
    ) -> Result<Self> {
        check_exponent(exponent)?;
        let samples = GridSamples::new(grid, shape.0 * shape.1, values)?;
        Ok(Field {
            domain: samples.grid().domain().clone(),
            rows: shape.0,
            cols: shape.1,
            source: Source::Grid(Arc::new(samples)),
            exponent,
            label: label.into(),
        })
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of scalar components `rows * cols`.
    pub fn ncomp(&self) -> usize {
        self.rows * self.cols
    }

    pub fn exponent(&self) -> T {
        self.exponent
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> &Source<T> {
        &self.source
    }

    pub fn samples(&self) -> Option<&GridSamples<T>> {
        match &self.source {
            Source::Grid(s) => Some(s),
            Source::Closed(_) => None,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.source, Source::Closed(_))
    }

    pub fn with_exponent(mut self, exponent: T) -> Result<Self> {
        check_exponent(exponent)?;
        self.exponent = exponent;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// The same field viewed on a sub-box.
    pub fn restrict(&self, domain: &Domain<T>) -> Result<Field<T>> {
        if !self.domain.covers(domain) {
            return Err(Error::config("restriction box exceeds the field domain"));
        }
        let mut out = self.clone();
        out.domain = domain.clone();
        Ok(out)
    }

    /// Evaluation without the domain check; callers guarantee `p` is inside.
    #[inline]
    pub fn eval_unchecked(&self, p: &[T], out: &mut [T]) {
        match &self.source {
            Source::Closed(f) => f(p, out),
            Source::Grid(s) => s.interpolate(p, out),
        }
    }

    pub fn eval_into(&self, p: &[T], out: &mut [T]) -> Result<()> {
        self.domain.check(p)?;
        if out.len() != self.ncomp() {
            return Err(Error::shape("output buffer has the wrong length"));
        }
        self.eval_unchecked(p, out);
        Ok(())
    }

    pub fn eval(&self, p: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.ncomp()];
        self.eval_into(p, &mut out)?;
        Ok(out)
    }

    /// Value of a scalar field.
    pub fn eval_scalar(&self, p: &[T]) -> Result<T> {
        if self.ncomp() != 1 {
            return Err(Error::shape("eval_scalar on a non-scalar field"));
        }
        let mut out = [T::zero()];
        self.eval_into(p, &mut out)?;
        Ok(out[0])
    }

    /// Samples the field on `grid` (which must lie in the domain).
    pub fn sample(&self, grid: &Grid<T>) -> Result<Field<T>> {
        if !self.domain.covers(grid.domain()) {
            return Err(Error::config("sampling grid exceeds the field domain"));
        }
        let values = self.sample_values(grid);
        Field::from_grid(grid.clone(), self.shape(), values, self.exponent, self.label.clone())
    }

    /// Raw samples on `grid`, row-major over nodes then components.
    pub fn sample_values(&self, grid: &Grid<T>) -> Vec<T> {
        use rayon::prelude::*;
        let nc = self.ncomp();
        let mut values = vec![T::zero(); grid.len() * nc];
        values
            .par_chunks_mut(nc)
            .enumerate()
            .for_each(|(flat, out)| {
                let p = grid.point_flat(flat);
                self.eval_unchecked(&p, out);
            });
        values
    }

    /// Scalar component `(r, c)` as its own field.
    pub fn component(&self, r: usize, c: usize) -> Result<Field<T>> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::shape("component index out of range"));
        }
        let inner = self.clone();
        let k = r * self.cols + c;
        let nc = self.ncomp();
        Field::closed(
            self.domain.clone(),
            (1, 1),
            self.exponent,
            format!("{}[{r},{c}]", self.label),
            move |p, out| {
                let mut buf = [T::zero(); 16];
                if nc <= 16 {
                    inner.eval_unchecked(p, &mut buf[..nc]);
                    out[0] = buf[k];
                } else {
                    let mut v = vec![T::zero(); nc];
                    inner.eval_unchecked(p, &mut v);
                    out[0] = v[k];
                }
            },
        )
    }

    /// Stacks scalar/vector fields on a common domain into a column vector field.
    pub fn stack(parts: &[Field<T>], label: impl Into<String>) -> Result<Field<T>> {
        let first = parts.first().ok_or_else(|| Error::shape("nothing to stack"))?;
        let domain = first.domain.clone();
        if parts.iter().any(|f| f.domain != domain || f.cols != 1) {
            return Err(Error::shape("stacked parts need a common domain and column shape"));
        }
        let exponent = parts
            .iter()
            .map(|f| f.exponent)
            .fold(T::one(), |a, b| a.min(b));
        let sizes: Vec<usize> = parts.iter().map(|f| f.rows).collect();
        let total = sizes.iter().sum();
        let parts = parts.to_vec();
        Field::closed(domain, (total, 1), exponent, label, move |p, out| {
            let mut off = 0;
            for (f, &n) in parts.iter().zip(&sizes) {
                f.eval_unchecked(p, &mut out[off..off + n]);
                off += n;
            }
        })
    }

    /// Pointwise matrix product `self(p) * other(p)`.
    pub fn matmul(&self, other: &Field<T>) -> Result<Field<T>> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.domain != other.domain {
            return Err(Error::shape("matmul operands live on different domains"));
        }
        let (a, b) = (self.clone(), other.clone());
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let exponent = self.exponent.min(other.exponent);
        Field::closed(
            self.domain.clone(),
            (n, m),
            exponent,
            format!("({})*({})", self.label, other.label),
            move |p, out| {
                let mut x = vec![T::zero(); n * k];
                let mut y = vec![T::zero(); k * m];
                a.eval_unchecked(p, &mut x);
                b.eval_unchecked(p, &mut y);
                matmul_into(&x, &y, n, k, m, out);
            },
        )
    }

    /// Linear combination `Σ c_i f_i` of equally shaped fields.
    pub fn lincomb(terms: &[(T, Field<T>)]) -> Result<Field<T>> {
        let (_, first) = terms.first().ok_or_else(|| Error::shape("empty combination"))?;
        let shape = first.shape();
        let domain = first.domain.clone();
        if terms.iter().any(|(_, f)| f.shape() != shape || f.domain != domain) {
            return Err(Error::shape("combined fields must share shape and domain"));
        }
        let exponent = terms
            .iter()
            .map(|(_, f)| f.exponent)
            .fold(T::one(), |a, b| a.min(b));
        let terms = terms.to_vec();
        let nc = shape.0 * shape.1;
        Field::closed(domain, shape, exponent, "lincomb", move |p, out| {
            let mut buf = vec![T::zero(); nc];
            out.iter_mut().for_each(|o| *o = T::zero());
            for (c, f) in &terms {
                f.eval_unchecked(p, &mut buf);
                for (o, &v) in out.iter_mut().zip(&buf) {
                    *o = *o + *c * v;
                }
            }
        })
    }
}

/// `out (n x m) = a (n x k) * b (k x m)`, all row-major.
#[inline]
pub fn matmul_into<T: Real>(a: &[T], b: &[T], n: usize, k: usize, m: usize, out: &mut [T]) {
    for i in 0..n {
        for j in 0..m {
            let mut s = T::zero();
            for l in 0..k {
                s = s + a[i * k + l] * b[l * m + j];
            }
            out[i * m + j] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_affine_functions() {
        let grid = Grid::uniform(Domain::<f64>::unit(2), 3).unwrap();
        let f = Field::scalar_fn(Domain::unit(2), 1.0, "affine", |p: &[f64]| 2.0 * p[0] - 3.0 * p[1] + 0.5)
            .unwrap();
        let s = f.sample(&grid).unwrap();
        for p in [[0.1, 0.7], [0.333, 0.999], [1.0, 0.0], [0.0625, 0.5]] {
            let a = f.eval_scalar(&p).unwrap();
            let b = s.eval_scalar(&p).unwrap();
            assert!((a - b).abs() < 1e-14, "{p:?}: {a} vs {b}");
        }
    }

    #[test]
    fn grid_values_are_exact_at_nodes() {
        let grid = Grid::uniform(Domain::<f64>::unit(1), 4).unwrap();
        let f = Field::scalar_fn(Domain::unit(1), 1.0, "sin", |p: &[f64]| (7.0 * p[0]).sin()).unwrap();
        let s = f.sample(&grid).unwrap();
        for i in 0..grid.nodes(0) {
            let x = grid.coord(0, i);
            assert_eq!(s.eval_scalar(&[x]).unwrap(), f.eval_scalar(&[x]).unwrap());
        }
    }

    #[test]
    fn outside_points_are_rejected() {
        let f = Field::scalar_fn(Domain::<f64>::unit(1), 1.0, "id", |p: &[f64]| p[0]).unwrap();
        assert!(matches!(f.eval_scalar(&[1.5]), Err(Error::Domain { .. })));
    }

    #[test]
    fn matmul_shapes() {
        let d = Domain::<f64>::unit(1);
        let a = Field::constant(d.clone(), (1, 2), vec![1.0, 2.0]).unwrap();
        let b = Field::constant(d.clone(), (2, 1), vec![3.0, 4.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().eval(&[0.3]).unwrap(), vec![11.0]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let f = Field::<f32>::scalar_fn(Domain::unit(1), 1.0, "sq", |p: &[f32]| p[0] * p[0]).unwrap();
        assert_eq!(f.eval_scalar(&[0.5]).unwrap(), 0.25f32);
    }
}
