//! Boxes, dyadic grids and the oriented segments/rectangles that 1-forms are
//! integrated over.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{dist, Real};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// Axis-aligned box `I^m = [lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> Domain<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() || lower.len() > MAX_DIM {
            return Err(Error::config(format!(
                "domain dimension must be in 1..={MAX_DIM}, got {}",
                lower.len()
            )));
        }
        if lower.len() != upper.len() {
            return Err(Error::config("lower/upper bounds differ in length"));
        }
        for (i, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::config(format!("axis {i}: need lower < upper")));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// The unit cube `[0,1]^m`.
    pub fn unit(m: usize) -> Self {
        Domain::new(vec![T::zero(); m], vec![T::one(); m]).expect("1 <= m <= 3")
    }

    pub fn interval(a: T, b: T) -> Result<Self> {
        Domain::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> T {
        self.upper[axis] - self.lower[axis]
    }

    pub fn diam(&self) -> T {
        dist(&self.lower, &self.upper)
    }

    fn slack(&self, axis: usize) -> T {
        T::lit(1e-12) * (T::one() + self.width(axis).abs())
    }

    pub fn contains(&self, p: &[T]) -> bool {
        p.len() == self.dim()
            && p.iter().enumerate().all(|(i, &x)| {
                x >= self.lower[i] - self.slack(i) && x <= self.upper[i] + self.slack(i)
            })
    }

    pub fn check(&self, p: &[T]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain {
                point: p.iter().map(|x| x.to_f64_lossy()).collect(),
            })
        }
    }

    /// True when `other` lies inside `self` (up to rounding slack).
    pub fn covers(&self, other: &Domain<T>) -> bool {
        self.contains(other.lower()) && self.contains(other.upper())
    }

    /// Sub-box with one axis restricted to `[a, b]`.
    pub fn with_axis(&self, axis: usize, a: T, b: T) -> Result<Self> {
        let mut lo = self.lower.clone();
        let mut hi = self.upper.clone();
        lo[axis] = a;
        hi[axis] = b;
        Domain::new(lo, hi)
    }

    /// Cartesian product with another box.
    pub fn product(&self, other: &Domain<T>) -> Result<Self> {
        let mut lo = self.lower.clone();
        lo.extend_from_slice(other.lower());
        let mut hi = self.upper.clone();
        hi.extend_from_slice(other.upper());
        Domain::new(lo, hi)
    }

    /// Full rectangle spanned by two axes, based at the lower corner.
    pub fn face(&self, a1: usize, a2: usize) -> Result<Rectangle<T>> {
        let m = self.dim();
        let mut v1 = vec![T::zero(); m];
        let mut v2 = vec![T::zero(); m];
        v1[a1] = self.width(a1);
        v2[a2] = self.width(a2);
        Rectangle::new(self.lower.clone(), v1, v2)
    }
}

/// Tensor-product dyadic grid: axis `i` carries `2^levels[i] + 1` nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid<T> {
    domain: Domain<T>,
    levels: Vec<u32>,
}

impl<T: Real> Grid<T> {
    pub fn new(domain: Domain<T>, levels: Vec<u32>) -> Result<Self> {
        if levels.len() != domain.dim() {
            return Err(Error::config("one refinement level per axis required"));
        }
        if levels.iter().any(|&l| l > 26) {
            return Err(Error::config("grid level above 26 is not supported"));
        }
        let total: f64 = levels.iter().map(|&l| (1u64 << l) as f64 + 1.0).product();
        if total > 2.0e8 {
            return Err(Error::Size(format!("grid with {total} nodes is too large")));
        }
        Ok(Grid { domain, levels })
    }

    /// Same level on every axis.
    pub fn uniform(domain: Domain<T>, level: u32) -> Result<Self> {
        let m = domain.dim();
        Grid::new(domain, vec![level; m])
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Number of cells along an axis.
    pub fn cells(&self, axis: usize) -> usize {
        1usize << self.levels[axis]
    }

    /// Number of nodes along an axis.
    pub fn nodes(&self, axis: usize) -> usize {
        self.cells(axis) + 1
    }

    pub fn shape(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.nodes(i)).collect()
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|i| self.nodes(i)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.domain.width(axis) / T::from_usize_lossy(self.cells(axis))
    }

    pub fn min_spacing(&self) -> T {
        (0..self.dim())
            .map(|i| self.spacing(i))
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// Coordinate of node `i` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> T {
        let frac = T::from_usize_lossy(i) / T::from_usize_lossy(self.cells(axis));
        if i == self.cells(axis) {
            self.domain.upper()[axis]
        } else {
            self.domain.lower()[axis] + self.domain.width(axis) * frac
        }
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<T> {
        (0..self.nodes(axis)).map(|i| self.coord(axis, i)).collect()
    }

    /// Row-major flat index (axis 0 slowest).
    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (axis, &i) in idx.iter().enumerate() {
            f = f * self.nodes(axis) + i;
        }
        f
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.nodes(axis);
            idx[axis] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn point(&self, idx: &[usize]) -> Vec<T> {
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i))
            .collect()
    }

    pub fn point_flat(&self, flat: usize) -> Vec<T> {
        self.point(&self.multi(flat))
    }

    /// Index of the node at `p`, if `p` is (up to rounding) a grid node.
    pub fn node_of(&self, p: &[T]) -> Option<Vec<usize>> {
        if p.len() != self.dim() {
            return None;
        }
        let mut idx = Vec::with_capacity(p.len());
        for (axis, &x) in p.iter().enumerate() {
            let u = (x - self.domain.lower()[axis]) / self.domain.width(axis)
                * T::from_usize_lossy(self.cells(axis));
            let r = u.round();
            if (u - r).abs() > T::lit(1e-7) || r < T::zero() {
                return None;
            }
            let i = r.to_usize()?;
            if i > self.cells(axis) {
                return None;
            }
            idx.push(i);
        }
        Some(idx)
    }
}

/// Oriented segment `[p q]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segment<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> Segment<T> {
    pub fn new(p: Vec<T>, q: Vec<T>) -> Result<Self> {
        if p.len() != q.len() || p.is_empty() {
            return Err(Error::shape("segment endpoints differ in dimension"));
        }
        Ok(Segment { p, q })
    }

    pub fn reversed(&self) -> Self {
        Segment {
            p: self.q.clone(),
            q: self.p.clone(),
        }
    }

    pub fn len(&self) -> T {
        dist(&self.p, &self.q)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == T::zero()
    }

    pub fn midpoint(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.p
            .iter()
            .zip(&self.q)
            .map(|(&a, &b)| a + (b - a) * half)
            .collect()
    }

    /// Affine parametrisation `γ(t) = p + t (q - p)`, `t ∈ [0, 1]`.
    #[inline]
    pub fn at(&self, t: T, out: &mut [T]) {
        for ((o, &a), &b) in out.iter_mut().zip(&self.p).zip(&self.q) {
            *o = a + (b - a) * t;
        }
    }

    pub fn halves(&self) -> [Segment<T>; 2] {
        let r = self.midpoint();
        [
            Segment {
                p: self.p.clone(),
                q: r.clone(),
            },
            Segment {
                p: r,
                q: self.q.clone(),
            },
        ]
    }
}

/// Oriented rectangle `[p; v1, v2]` with sides along distinct coordinate axes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rectangle<T> {
    pub base: Vec<T>,
    pub v1: Vec<T>,
    pub v2: Vec<T>,
}

fn single_axis<T: Real>(v: &[T]) -> Option<usize> {
    let nz: Vec<usize> = (0..v.len()).filter(|&i| v[i] != T::zero()).collect();
    match nz.as_slice() {
        [i] => Some(*i),
        _ => None,
    }
}

impl<T: Real> Rectangle<T> {
    pub fn new(base: Vec<T>, v1: Vec<T>, v2: Vec<T>) -> Result<Self> {
        if base.len() < 2 || v1.len() != base.len() || v2.len() != base.len() {
            return Err(Error::shape("rectangle needs dimension >= 2 and matching sides"));
        }
        let a1 = single_axis(&v1)
            .ok_or_else(|| Error::config("side v1 must be a nonzero multiple of a basis vector"))?;
        let a2 = single_axis(&v2)
            .ok_or_else(|| Error::config("side v2 must be a nonzero multiple of a basis vector"))?;
        if a1 == a2 {
            return Err(Error::config("rectangle sides must be along distinct axes"));
        }
        Ok(Rectangle { base, v1, v2 })
    }

    /// Axis-aligned rectangle `[lo1, hi1] x [lo2, hi2]` in the plane of axes `(a1, a2)`
    /// of an `m`-dimensional space, other coordinates taken from `at`.
    pub fn axis_aligned(at: &[T], a1: usize, a2: usize, len1: T, len2: T) -> Result<Self> {
        let m = at.len();
        let mut v1 = vec![T::zero(); m];
        let mut v2 = vec![T::zero(); m];
        if a1 >= m || a2 >= m {
            return Err(Error::shape("axis out of range"));
        }
        v1[a1] = len1;
        v2[a2] = len2;
        Rectangle::new(at.to_vec(), v1, v2)
    }

    pub fn axes(&self) -> (usize, usize) {
        (
            single_axis(&self.v1).expect("validated"),
            single_axis(&self.v2).expect("validated"),
        )
    }

    fn corner(&self, c1: T, c2: T) -> Vec<T> {
        self.base
            .iter()
            .zip(&self.v1)
            .zip(&self.v2)
            .map(|((&b, &x), &y)| b + x * c1 + y * c2)
            .collect()
    }

    pub fn vertices(&self) -> [Vec<T>; 4] {
        let (o, l) = (T::zero(), T::one());
        [
            self.corner(o, o),
            self.corner(l, o),
            self.corner(l, l),
            self.corner(o, l),
        ]
    }

    /// The four oriented edges `[p, p+v1], [p+v1, p+v1+v2], [p+v1+v2, p+v2], [p+v2, p]`.
    pub fn edges(&self) -> [Segment<T>; 4] {
        let [a, b, c, d] = self.vertices();
        [
            Segment {
                p: a.clone(),
                q: b.clone(),
            },
            Segment { p: b, q: c.clone() },
            Segment { p: c, q: d.clone() },
            Segment { p: d, q: a },
        ]
    }

    /// Length of the longer side (sup-norm diameter).
    pub fn diam(&self) -> T {
        let s1 = crate::scalar::norm(&self.v1);
        let s2 = crate::scalar::norm(&self.v2);
        s1.max(s2)
    }

    /// Unsigned area `|v1| |v2|`.
    pub fn area(&self) -> T {
        crate::scalar::norm(&self.v1) * crate::scalar::norm(&self.v2)
    }

    /// Dyadic subdivision into four rectangles with halved sides.
    pub fn quarters(&self) -> [Rectangle<T>; 4] {
        let half = T::lit(0.5);
        let h1: Vec<T> = self.v1.iter().map(|&x| x * half).collect();
        let h2: Vec<T> = self.v2.iter().map(|&x| x * half).collect();
        let shift = |c1: T, c2: T| -> Vec<T> {
            self.base
                .iter()
                .zip(&h1)
                .zip(&h2)
                .map(|((&b, &x), &y)| b + x * c1 + y * c2)
                .collect()
        };
        let (o, l) = (T::zero(), T::one());
        [
            Rectangle {
                base: shift(o, o),
                v1: h1.clone(),
                v2: h2.clone(),
            },
            Rectangle {
                base: shift(l, o),
                v1: h1.clone(),
                v2: h2.clone(),
            },
            Rectangle {
                base: shift(o, l),
                v1: h1.clone(),
                v2: h2.clone(),
            },
            Rectangle {
                base: shift(l, l),
                v1: h1,
                v2: h2,
            },
        ]
    }

    pub fn inside(&self, domain: &Domain<T>) -> bool {
        self.vertices().iter().all(|v| domain.contains(v))
    }
}
