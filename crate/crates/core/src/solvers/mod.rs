//! Fixed-point solvers: Young differential equations, the wedge-null and
//! diagonal Frobenius theorems, the implicit function theorem, the
//! Young-Gronwall verifier and g-derivatives of YDE solutions.

mod frobenius;
mod gronwall;
mod implicit;
mod yde;

pub use frobenius::{
    involutivity_check, solve_frobenius_diagonal, solve_frobenius_wedge_null, DiagonalOptions,
    InitialIterate, InvolutivityReport, WedgeNullOptions,
};
pub use gronwall::{verify_gronwall, GronwallLevel, GronwallOptions, GronwallReport};
pub use implicit::{
    level_set_composition_check, solve_implicit, GraphFn, ImplicitOptions, ImplicitProblem,
    ImplicitSolution, LevelSetReport, LevelSetRow,
};
pub use yde::{
    exponent_condition_holds, solve_yde, yde_g_derivative, YdeGDerivative, YdeOptions, YdeProblem,
    YdeSlice,
};

use serde::Serialize;

use crate::calculus::field::Field;
use crate::calculus::geometry::Grid;
use crate::driver::DriverRef;
use crate::error::{Error, Result};
use crate::jets::GDiffReport;
use crate::scalar::Real;

/// A Pfaff system `δθ_{pq} = f(p, θ_p) δg_{pq} + o(|q - p|)` with
/// `f(p, z) = F(g_p, z)` and `θ(p0) = θ0`.
#[derive(Clone, Debug)]
pub struct PfaffProblem<T: Real> {
    pub g: Field<T>,
    pub driver: DriverRef<T>,
    pub p0: Vec<T>,
    pub theta0: Vec<T>,
}

impl<T: Real> PfaffProblem<T> {
    pub fn new(g: Field<T>, driver: DriverRef<T>, p0: Vec<T>, theta0: Vec<T>) -> Result<Self> {
        let k = g.rows();
        if g.cols() != 1 {
            return Err(Error::shape("the signal g must be vector valued"));
        }
        if driver.u_dim() != k {
            return Err(Error::shape(format!(
                "driver {} takes a {}-vector signal, g has {k} components",
                driver.name(),
                driver.u_dim()
            )));
        }
        let d = driver.z_dim();
        if d == 0 || driver.out_shape() != (d, k) {
            return Err(Error::shape(format!(
                "driver {} must map into {d}x{k} matrices with a {d}-dimensional unknown",
                driver.name()
            )));
        }
        if theta0.len() != d {
            return Err(Error::shape("initial value does not match the unknown dimension"));
        }
        g.domain().check(&p0)?;
        Ok(PfaffProblem { g, driver, p0, theta0 })
    }

    pub fn d(&self) -> usize {
        self.driver.z_dim()
    }

    pub fn k(&self) -> usize {
        self.g.rows()
    }

    pub fn beta(&self) -> T {
        self.g.exponent()
    }

    pub fn gamma(&self) -> T {
        self.driver.gamma()
    }

    /// `β(2 + γ) > 2`.
    pub fn check_threshold(&self) -> Result<()> {
        let (b, c) = (self.beta(), self.gamma());
        if b * (T::lit(2.0) + c) > T::lit(2.0) {
            Ok(())
        } else {
            Err(Error::regularity(format!("Pfaff solvers need β(2 + γ) > 2, got β = {b}, γ = {c}")))
        }
    }

    /// `f(p, z)` in `d x k` row-major layout.
    pub fn f_at(&self, p: &[T], z: &[T], out: &mut [T]) {
        let mut u = [T::zero(); 8];
        let k = self.k();
        self.g.eval_unchecked(p, &mut u[..k]);
        self.driver.eval(&u[..k], z, out);
    }
}

/// Diagnostics shared by the solvers; unused entries stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Sup difference with the solution one level coarser.
    pub error_estimate: Option<f64>,
    /// Picard re-integration residual of a YDE solution.
    pub picard_residual: Option<f64>,
    /// Fixed-point residual per iteration.
    pub residual_history: Vec<f64>,
    /// Germ remainder of `δθ - f(θ̄) δg`.
    pub germ: Option<GDiffReport>,
    /// Discrepancy between two integration paths or sweep orders.
    pub path_residual: Option<f64>,
    /// Per axis sup of `|δθ - ½(f_a + f_b) δg^i|` over grid edges.
    pub axis_defects: Vec<f64>,
    /// Subdomain splits performed by the bisection fallback.
    pub patching: Vec<String>,
    pub log: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T: Real> {
    pub theta: Field<T>,
    /// Grid carrying the computed node values.
    pub grid: Grid<T>,
    /// Node values of `θ`, `d` per node.
    pub nodes: Vec<T>,
    pub iterations: usize,
    /// Final fixed-point residual `sup |θ_{n+1} - θ_n|` (0 for direct schemes).
    pub residual: f64,
    pub diagnostics: Diagnostics,
}

impl<T: Real> SolveResult<T> {
    /// Sup distance between the node values of two solutions on the same grid.
    pub fn sup_distance(&self, other: &SolveResult<T>) -> Result<f64> {
        if self.grid != other.grid || self.nodes.len() != other.nodes.len() {
            return Err(Error::shape("solutions live on different grids"));
        }
        Ok(sup_diff(&self.nodes, &other.nodes))
    }
}

pub(crate) fn sup_diff<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).abs().to_f64_lossy())
        .fold(0.0, f64::max)
}

/// Solves the small dense system `a x = b` (row-major `n x n`) in place of `b`.
pub(crate) fn solve_small<T: Real>(a: &[T], b: &mut [T]) -> Option<()> {
    let n = b.len();
    if n == 1 {
        if a[0] == T::zero() || !a[0].is_finite() {
            return None;
        }
        b[0] = b[0] / a[0];
        return Some(());
    }
    let m = nalgebra::DMatrix::from_row_iterator(n, n, a.iter().map(|x| x.to_f64_lossy()));
    let rhs = nalgebra::DVector::from_iterator(n, b.iter().map(|x| x.to_f64_lossy()));
    let x = m.lu().solve(&rhs)?;
    for (o, v) in b.iter_mut().zip(x.iter()) {
        *o = T::lit(*v);
    }
    Some(())
}

/// Determinant of a small dense matrix (row-major).
pub(crate) fn det_small<T: Real>(a: &[T], n: usize) -> f64 {
    nalgebra::DMatrix::from_row_iterator(n, n, a.iter().map(|x| x.to_f64_lossy())).determinant()
}

/// Iteration tolerance near rounding for the scalar type.
pub(crate) fn rounding_tol<T: Real>() -> T {
    T::epsilon() * T::lit(64.0)
}
