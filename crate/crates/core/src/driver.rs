//! Structured drivers `F(u, z)` with closed-form first derivatives.
//!
//! A driver is composed with a signal as `f(p, z) = F(g(p), z)`, so the
//! g-derivative of `f` is `∂_u F` and its derivative in the unknown is
//! `∂_z F`; neither is ever inferred from rough data. Jet candidates of the
//! form `v = V(g)` are drivers without unknowns (`z_dim == 0`).

use std::fmt;
use std::sync::Arc;

use crate::calculus::field::Field;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub trait Driver<T: Real>: Send + Sync {
    fn name(&self) -> &str;
    /// Dimension of the signal argument `u`.
    fn u_dim(&self) -> usize;
    /// Dimension of the unknown `z` (0 for pure functions of the signal).
    fn z_dim(&self) -> usize;
    /// Shape of the value, `(rows, cols)`.
    fn out_shape(&self) -> (usize, usize);
    fn eval(&self, u: &[T], z: &[T], out: &mut [T]);
    /// `∂F/∂u_j`, laid out as `out[c * u_dim + j]` for value component `c`.
    fn d_u(&self, u: &[T], z: &[T], out: &mut [T]);
    /// `∂F/∂z_j`, laid out as `out[c * z_dim + j]`.
    fn d_z(&self, u: &[T], z: &[T], out: &mut [T]);
    /// Hölder exponent of the derivatives.
    fn gamma(&self) -> T {
        T::one()
    }
}

pub type DriverRef<T> = Arc<dyn Driver<T>>;

impl<T: Real> fmt::Debug for dyn Driver<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Driver({}: u{} z{} -> {:?})",
            self.name(),
            self.u_dim(),
            self.z_dim(),
            self.out_shape()
        )
    }
}

type Fun<T> = Arc<dyn Fn(&[T], &[T], &mut [T]) + Send + Sync>;

/// Driver assembled from closures.
#[derive(Clone)]
pub struct FnDriver<T> {
    name: String,
    u_dim: usize,
    z_dim: usize,
    shape: (usize, usize),
    f: Fun<T>,
    du: Fun<T>,
    dz: Fun<T>,
    gamma: T,
}

impl<T: Real> FnDriver<T> {
    pub fn new<F, DU, DZ>(
        name: impl Into<String>,
        u_dim: usize,
        z_dim: usize,
        shape: (usize, usize),
        f: F,
        du: DU,
        dz: DZ,
    ) -> Self
    where
        F: Fn(&[T], &[T], &mut [T]) + Send + Sync + 'static,
        DU: Fn(&[T], &[T], &mut [T]) + Send + Sync + 'static,
        DZ: Fn(&[T], &[T], &mut [T]) + Send + Sync + 'static,
    {
        FnDriver {
            name: name.into(),
            u_dim,
            z_dim,
            shape,
            f: Arc::new(f),
            du: Arc::new(du),
            dz: Arc::new(dz),
            gamma: T::one(),
        }
    }

    pub fn with_gamma(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn into_ref(self) -> DriverRef<T> {
        Arc::new(self)
    }
}

impl<T: Real> Driver<T> for FnDriver<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn u_dim(&self) -> usize {
        self.u_dim
    }
    fn z_dim(&self) -> usize {
        self.z_dim
    }
    fn out_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn eval(&self, u: &[T], z: &[T], out: &mut [T]) {
        (self.f)(u, z, out)
    }
    fn d_u(&self, u: &[T], z: &[T], out: &mut [T]) {
        (self.du)(u, z, out)
    }
    fn d_z(&self, u: &[T], z: &[T], out: &mut [T]) {
        (self.dz)(u, z, out)
    }
    fn gamma(&self) -> T {
        self.gamma
    }
}

/// Smooth scalar functions with two derivatives, used as outer maps and
/// as building blocks of named drivers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarFn {
    Id,
    Square,
    Cube,
    Sin,
    Cos,
    Exp,
}

impl ScalarFn {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "id" | "identity" => ScalarFn::Id,
            "square" | "sq" => ScalarFn::Square,
            "cube" => ScalarFn::Cube,
            "sin" => ScalarFn::Sin,
            "cos" => ScalarFn::Cos,
            "exp" => ScalarFn::Exp,
            _ => return Err(Error::config(format!("unknown scalar function {name:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarFn::Id => "id",
            ScalarFn::Square => "square",
            ScalarFn::Cube => "cube",
            ScalarFn::Sin => "sin",
            ScalarFn::Cos => "cos",
            ScalarFn::Exp => "exp",
        }
    }

    #[inline]
    pub fn eval<T: Real>(self, x: T) -> T {
        match self {
            ScalarFn::Id => x,
            ScalarFn::Square => x * x,
            ScalarFn::Cube => x * x * x,
            ScalarFn::Sin => x.sin(),
            ScalarFn::Cos => x.cos(),
            ScalarFn::Exp => x.exp(),
        }
    }

    #[inline]
    pub fn d1<T: Real>(self, x: T) -> T {
        match self {
            ScalarFn::Id => T::one(),
            ScalarFn::Square => T::lit(2.0) * x,
            ScalarFn::Cube => T::lit(3.0) * x * x,
            ScalarFn::Sin => x.cos(),
            ScalarFn::Cos => -x.sin(),
            ScalarFn::Exp => x.exp(),
        }
    }

    #[inline]
    pub fn d2<T: Real>(self, x: T) -> T {
        match self {
            ScalarFn::Id => T::zero(),
            ScalarFn::Square => T::lit(2.0),
            ScalarFn::Cube => T::lit(6.0) * x,
            ScalarFn::Sin => -x.sin(),
            ScalarFn::Cos => -x.cos(),
            ScalarFn::Exp => x.exp(),
        }
    }
}

/// `F(u, z) = C`, a constant `rows x cols` matrix.
pub fn constant<T: Real>(u_dim: usize, z_dim: usize, shape: (usize, usize), c: Vec<T>) -> Result<DriverRef<T>> {
    if c.len() != shape.0 * shape.1 {
        return Err(Error::shape("constant driver value does not match shape"));
    }
    Ok(FnDriver::<T>::new(
        "constant",
        u_dim,
        z_dim,
        shape,
        move |_, _, out| out.copy_from_slice(&c),
        |_, _, out| out.iter_mut().for_each(|o| *o = T::zero()),
        |_, _, out| out.iter_mut().for_each(|o| *o = T::zero()),
    )
    .into_ref())
}

/// `F^{l,i}(u, z) = z_l` for `l < d`, `i < k`: every direction driven by the unknown.
pub fn linear_z<T: Real>(k: usize, d: usize) -> DriverRef<T> {
    FnDriver::<T>::new(
        "linear_z",
        k,
        d,
        (d, k),
        move |_, z, out| {
            for l in 0..d {
                for i in 0..k {
                    out[l * k + i] = z[l];
                }
            }
        },
        |_, _, out| out.iter_mut().for_each(|o| *o = T::zero()),
        move |_, _, out| {
            out.iter_mut().for_each(|o| *o = T::zero());
            for l in 0..d {
                for i in 0..k {
                    out[(l * k + i) * d + l] = T::one();
                }
            }
        },
    )
    .into_ref()
}

/// `F(u) = φ'(u)` for scalar `u`: the derivative jet of `φ ∘ g`.
pub fn derivative_of<T: Real>(phi: ScalarFn) -> DriverRef<T> {
    FnDriver::<T>::new(
        format!("d_{}", phi.name()),
        1,
        0,
        (1, 1),
        move |u, _, out| out[0] = phi.d1(u[0]),
        move |u, _, out| out[0] = phi.d2(u[0]),
        |_, _, _| {},
    )
    .into_ref()
}

/// `V(u) = ∇Φ(u)` for `Φ(u₁, u₂) = sin(u₁) u₂ + u₂³ / 3`, a smooth gradient.
pub fn gradient_2d<T: Real>() -> DriverRef<T> {
    FnDriver::<T>::new(
        "gradient_2d",
        2,
        0,
        (1, 2),
        |u, _, out| {
            out[0] = u[0].cos() * u[1];
            out[1] = u[0].sin() + u[1] * u[1];
        },
        |u, _, out| {
            out[0] = -u[0].sin() * u[1];
            out[1] = u[0].cos();
            out[2] = u[0].cos();
            out[3] = T::lit(2.0) * u[1];
        },
        |_, _, _| {},
    )
    .into_ref()
}

/// `V(u) = (-u₂, u₁)`, the rotational field.
pub fn rotational<T: Real>() -> DriverRef<T> {
    FnDriver::<T>::new(
        "rotational",
        2,
        0,
        (1, 2),
        |u, _, out| {
            out[0] = -u[1];
            out[1] = u[0];
        },
        |_, _, out| {
            out.copy_from_slice(&[T::zero(), -T::one(), T::one(), T::zero()]);
        },
        |_, _, _| {},
    )
    .into_ref()
}

/// `V(u) = (u₂, 0)`.
pub fn shear<T: Real>() -> DriverRef<T> {
    FnDriver::<T>::new(
        "shear",
        2,
        0,
        (1, 2),
        |u, _, out| {
            out[0] = u[1];
            out[1] = T::zero();
        },
        |_, _, out| {
            out.copy_from_slice(&[T::zero(), T::one(), T::zero(), T::zero()]);
        },
        |_, _, _| {},
    )
    .into_ref()
}

/// `F(u₁, u₂, z) = (u₂, 1)`.
pub fn wedge_example<T: Real>() -> DriverRef<T> {
    FnDriver::<T>::new(
        "wedge_example",
        2,
        1,
        (1, 2),
        |u, _, out| {
            out[0] = u[1];
            out[1] = T::one();
        },
        |_, _, out| {
            out.copy_from_slice(&[T::zero(), T::one(), T::zero(), T::zero()]);
        },
        |_, _, out| out.iter_mut().for_each(|o| *o = T::zero()),
    )
    .into_ref()
}

/// Scalar level-set drivers `F(u, z)` for the implicit function solver.
pub fn implicit_cubic<T: Real>() -> DriverRef<T> {
    FnDriver::<T>::new(
        "implicit_cubic",
        1,
        1,
        (1, 1),
        |u, z, out| out[0] = z[0] * z[0] * z[0] + z[0] - u[0],
        |_, _, out| out[0] = -T::one(),
        |_, z, out| out[0] = T::lit(3.0) * z[0] * z[0] + T::one(),
    )
    .into_ref()
}

pub fn implicit_square<T: Real>() -> DriverRef<T> {
    FnDriver::<T>::new(
        "implicit_square",
        1,
        1,
        (1, 1),
        |u, z, out| out[0] = z[0] * z[0] - u[0],
        |_, _, out| out[0] = -T::one(),
        |_, z, out| out[0] = T::lit(2.0) * z[0],
    )
    .into_ref()
}

pub fn implicit_shift<T: Real>() -> DriverRef<T> {
    FnDriver::<T>::new(
        "implicit_shift",
        1,
        1,
        (1, 1),
        |u, z, out| out[0] = z[0] - u[0],
        |_, _, out| out[0] = -T::one(),
        |_, _, out| out[0] = T::one(),
    )
    .into_ref()
}

/// Names accepted by [`named`].
pub const DRIVER_NAMES: &[&str] = &[
    "linear_z",
    "d_sin",
    "d_cos",
    "d_exp",
    "d_square",
    "d_cube",
    "gradient_2d",
    "rotational",
    "shear",
    "wedge_example",
    "implicit_cubic",
    "implicit_square",
    "implicit_shift",
];

/// Looks up a driver by name; `k` and `d` size the `linear_z` family.
pub fn named<T: Real>(name: &str, k: usize, d: usize) -> Result<DriverRef<T>> {
    if let Some(phi) = name.strip_prefix("d_") {
        return Ok(derivative_of(ScalarFn::parse(phi)?));
    }
    Ok(match name {
        "linear_z" => linear_z(k, d),
        "gradient_2d" => gradient_2d(),
        "rotational" => rotational(),
        "shear" => shear(),
        "wedge_example" => wedge_example(),
        "implicit_cubic" => implicit_cubic(),
        "implicit_square" => implicit_square(),
        "implicit_shift" => implicit_shift(),
        _ => return Err(Error::config(format!("unknown driver {name:?}"))),
    })
}

/// The field `p ↦ V(g(p))` for a driver without unknowns.
pub fn compose<T: Real>(v: &DriverRef<T>, g: &Field<T>) -> Result<Field<T>> {
    if v.z_dim() != 0 {
        return Err(Error::shape("compose needs a driver without unknowns"));
    }
    if g.ncomp() != v.u_dim() || g.cols() != 1 {
        return Err(Error::shape(format!(
            "driver {} expects a {}-vector signal, got {}x{}",
            v.name(),
            v.u_dim(),
            g.rows(),
            g.cols()
        )));
    }
    let (v2, g2) = (v.clone(), g.clone());
    let k = g.ncomp();
    if k > 8 {
        return Err(Error::shape("signals with more than 8 components are not supported"));
    }
    Field::closed(
        g.domain().clone(),
        v.out_shape(),
        g.exponent(),
        format!("{}({})", v.name(), g.label()),
        move |p, out| {
            let mut u = [T::zero(); 8];
            g2.eval_unchecked(p, &mut u[..k]);
            v2.eval(&u[..k], &[], out);
        },
    )
}

/// The field `p ↦ ∂_u V(g(p))`, shaped `(rows * cols) x u_dim`.
pub fn compose_du<T: Real>(v: &DriverRef<T>, g: &Field<T>) -> Result<Field<T>> {
    if v.z_dim() != 0 || g.ncomp() != v.u_dim() {
        return Err(Error::shape("compose_du needs a driver without unknowns matching the signal"));
    }
    let (v2, g2) = (v.clone(), g.clone());
    let k = g.ncomp();
    if k > 8 {
        return Err(Error::shape("signals with more than 8 components are not supported"));
    }
    let (r, c) = v.out_shape();
    Field::closed(
        g.domain().clone(),
        (r * c, k),
        g.exponent(),
        format!("d{}({})", v.name(), g.label()),
        move |p, out| {
            let mut u = [T::zero(); 8];
            g2.eval_unchecked(p, &mut u[..k]);
            v2.d_u(&u[..k], &[], out);
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(d: &DriverRef<f64>, u: &[f64], z: &[f64]) {
        let n = d.out_shape().0 * d.out_shape().1;
        let mut du = vec![0.0; n * d.u_dim()];
        let mut dz = vec![0.0; n * d.z_dim()];
        d.d_u(u, z, &mut du);
        d.d_z(u, z, &mut dz);
        let eps = 1e-6;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for j in 0..d.u_dim() {
            let (mut a, mut b) = (u.to_vec(), u.to_vec());
            a[j] -= eps;
            b[j] += eps;
            d.eval(&a, z, &mut lo);
            d.eval(&b, z, &mut hi);
            for c in 0..n {
                let fd = (hi[c] - lo[c]) / (2.0 * eps);
                assert!((fd - du[c * d.u_dim() + j]).abs() < 1e-6, "{} du", d.name());
            }
        }
        for j in 0..d.z_dim() {
            let (mut a, mut b) = (z.to_vec(), z.to_vec());
            a[j] -= eps;
            b[j] += eps;
            d.eval(u, &a, &mut lo);
            d.eval(u, &b, &mut hi);
            for c in 0..n {
                let fd = (hi[c] - lo[c]) / (2.0 * eps);
                assert!((fd - dz[c * d.z_dim() + j]).abs() < 1e-6, "{} dz", d.name());
            }
        }
    }

    #[test]
    fn registry_derivatives_match_finite_differences() {
        for name in DRIVER_NAMES {
            let d = named::<f64>(name, 2, 1).unwrap();
            let u: Vec<f64> = (0..d.u_dim()).map(|i| 0.3 + 0.4 * i as f64).collect();
            let z: Vec<f64> = (0..d.z_dim()).map(|i| 0.7 - 0.2 * i as f64).collect();
            fd_check(&d, &u, &z);
        }
    }

    #[test]
    fn unknown_names_are_config_errors() {
        assert!(matches!(named::<f64>("nope", 1, 1), Err(Error::Config(_))));
        assert!(matches!(named::<f64>("d_nope", 1, 1), Err(Error::Config(_))));
    }
}
