//! Young differential equations `θ_t = θ_0 + ∫_0^t F(u_s, θ_s) dy_s` and
//! the linear equation for their g-derivative.

use rayon::prelude::*;

use super::{solve_small, sup_diff, Diagnostics, SolveResult};
use crate::calculus::field::Field;
use crate::calculus::geometry::Grid;
use crate::driver::{Driver, DriverRef};
use crate::error::{Error, Result};
use crate::jets::{g_derivative_check, jet_interpolant, GDiffOptions, GDiffReport};
use crate::scalar::{max_abs, Real};

const NEWTON_STEPS: usize = 60;

/// Implicit trapezoid steps `z₁ = z₀ + ½(F(u₀, z₀) + F(u₁, z₁))_{·,col} δy`,
/// solved by Newton's method with the closed-form `∂_z F`.
pub(crate) struct Stepper<'a, T: Real> {
    driver: &'a dyn Driver<T>,
    col: usize,
    d: usize,
    kc: usize,
    f0: Vec<T>,
    f1: Vec<T>,
    /// `f0` already holds `F(u₀, z₀)` from the previous step.
    carried: bool,
    dz: Vec<T>,
    jac: Vec<T>,
    rhs: Vec<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub(crate) fn new(driver: &'a dyn Driver<T>, col: usize) -> Self {
        let (d, kc) = driver.out_shape();
        let dz_len = d * kc * driver.z_dim();
        Stepper {
            driver,
            col,
            d,
            kc,
            f0: vec![T::zero(); d * kc],
            f1: vec![T::zero(); d * kc],
            carried: false,
            dz: vec![T::zero(); dz_len],
            jac: vec![T::zero(); d * d],
            rhs: vec![T::zero(); d],
        }
    }

    /// Forgets the carried value, e.g. when the next step does not start
    /// where the last one ended.
    pub(crate) fn reset(&mut self) {
        self.carried = false;
    }

    pub(crate) fn step(&mut self, u0: &[T], u1: &[T], z0: &[T], dy: T, z1: &mut [T]) -> Result<()> {
        let (d, kc, col) = (self.d, self.kc, self.col);
        let half = T::lit(0.5);
        if !self.carried {
            self.driver.eval(u0, z0, &mut self.f0);
        }
        for r in 0..d {
            z1[r] = z0[r] + self.f0[r * kc + col] * dy;
        }
        let eps = T::epsilon();
        for it in 0..NEWTON_STEPS {
            self.driver.eval(u1, z1, &mut self.f1);
            let mut worst = T::zero();
            for r in 0..d {
                let a = half * (self.f0[r * kc + col] + self.f1[r * kc + col]);
                self.rhs[r] = z1[r] - z0[r] - a * dy;
                worst = worst.max(self.rhs[r].abs());
            }
            if !worst.is_finite() {
                break;
            }
            // The Euler predictor has a systematic O(δy²) defect that may sit
            // below rounding level in single precision, so at least one
            // Newton correction is always applied.
            if worst == T::zero() || (it > 0 && worst <= T::lit(8.0) * eps * (T::one() + max_abs(z0) + max_abs(z1))) {
                std::mem::swap(&mut self.f0, &mut self.f1);
                self.carried = true;
                return Ok(());
            }
            self.driver.d_z(u1, z1, &mut self.dz);
            for r in 0..d {
                for j in 0..d {
                    let djz = self.dz[(r * kc + col) * d + j];
                    self.jac[r * d + j] = if r == j { T::one() } else { T::zero() } - half * dy * djz;
                }
            }
            if solve_small(&self.jac, &mut self.rhs).is_none() {
                self.carried = false;
                return Err(Error::nonconvergence("singular Newton matrix in a trapezoid step", vec![]));
            }
            for r in 0..d {
                z1[r] = z1[r] - self.rhs[r];
            }
            if max_abs(&self.rhs) <= T::lit(4.0) * eps * (T::one() + max_abs(z1)) {
                self.carried = false;
                return Ok(());
            }
        }
        self.carried = false;
        Err(Error::nonconvergence(
            format!("trapezoid step did not converge (increment {})", dy),
            vec![],
        ))
    }
}

/// Solves along one line of nodes from index `i0`, forwards and backwards.
/// `us` holds `u_dim` values per node and `ys` the scalar integrator.
pub(crate) fn solve_line<T: Real>(
    driver: &dyn Driver<T>,
    col: usize,
    us: &[T],
    ys: &[T],
    i0: usize,
    z_start: &[T],
) -> Result<Vec<T>> {
    let n = ys.len();
    let ud = driver.u_dim();
    let d = z_start.len();
    let mut out = vec![T::zero(); n * d];
    out[i0 * d..(i0 + 1) * d].copy_from_slice(z_start);
    let mut st = Stepper::new(driver, col);
    let mut z1 = vec![T::zero(); d];
    for i in i0..n.saturating_sub(1) {
        let dy = ys[i + 1] - ys[i];
        st.step(&us[i * ud..(i + 1) * ud], &us[(i + 1) * ud..(i + 2) * ud], &out[i * d..(i + 1) * d], dy, &mut z1)?;
        out[(i + 1) * d..(i + 2) * d].copy_from_slice(&z1);
    }
    st.reset();
    for i in (1..=i0).rev() {
        let dy = ys[i - 1] - ys[i];
        st.step(&us[i * ud..(i + 1) * ud], &us[(i - 1) * ud..i * ud], &out[i * d..(i + 1) * d], dy, &mut z1)?;
        out[(i - 1) * d..i * d].copy_from_slice(&z1);
    }
    Ok(out)
}

/// `θ_t = θ_0 + ∫ F(u_s, θ_s) dy_s` on the interval of `y`; `u` defaults to `y`.
#[derive(Clone, Debug)]
pub struct YdeProblem<T: Real> {
    pub driver: DriverRef<T>,
    pub y: Field<T>,
    pub u: Option<Field<T>>,
    pub theta0: Vec<T>,
}

impl<T: Real> YdeProblem<T> {
    pub fn new(driver: DriverRef<T>, y: Field<T>, theta0: Vec<T>) -> Result<Self> {
        YdeProblem {
            driver,
            y,
            u: None,
            theta0,
        }
        .validated()
    }

    pub fn with_argument(mut self, u: Field<T>) -> Result<Self> {
        self.u = Some(u);
        self.validated()
    }

    fn argument(&self) -> &Field<T> {
        self.u.as_ref().unwrap_or(&self.y)
    }

    fn validated(self) -> Result<Self> {
        if self.y.dim() != 1 || self.y.ncomp() != 1 {
            return Err(Error::shape("YDE integrators are scalar signals on an interval"));
        }
        let u = self.argument();
        if u.domain() != self.y.domain() {
            return Err(Error::shape("driver argument and integrator live on different intervals"));
        }
        let d = self.driver.z_dim();
        if u.ncomp() != self.driver.u_dim() || self.driver.out_shape() != (d, 1) || self.theta0.len() != d || d == 0 {
            return Err(Error::shape(format!(
                "driver {} does not fit a {}-dimensional YDE with a {}-component argument",
                self.driver.name(),
                self.theta0.len(),
                u.ncomp()
            )));
        }
        Ok(self)
    }
}

#[derive(Clone, Debug)]
pub struct YdeOptions {
    pub level: u32,
    /// Tolerance of the Picard re-integration check (widened to ten times
    /// the refinement error estimate when that is larger).
    pub tol: f64,
    /// Extra dyadic levels used by the Picard re-integration.
    pub picard_sub: u32,
    pub picard: bool,
}

impl Default for YdeOptions {
    fn default() -> Self {
        YdeOptions {
            level: 14,
            tol: 1e-6,
            picard_sub: 2,
            picard: true,
        }
    }
}

fn line_nodes<T: Real>(p: &YdeProblem<T>, level: u32) -> Result<(Grid<T>, Vec<T>)> {
    let grid = Grid::uniform(p.y.domain().clone(), level)?;
    let us = p.argument().sample_values(&grid);
    let ys = p.y.sample_values(&grid);
    let nodes = solve_line(p.driver.as_ref(), 0, &us, &ys, 0, &p.theta0)?;
    Ok((grid, nodes))
}

fn driver_nodes<T: Real>(driver: &dyn Driver<T>, us: &[T], theta: &[T], n: usize) -> Vec<T> {
    let (ud, d) = (driver.u_dim(), driver.z_dim());
    let (r, c) = driver.out_shape();
    let mut v = vec![T::zero(); n * r * c];
    for i in 0..n {
        driver.eval(&us[i * ud..(i + 1) * ud], &theta[i * d..(i + 1) * d], &mut v[i * r * c..(i + 1) * r * c]);
    }
    v
}

/// Solves a YDE with implicit trapezoid steps on a dyadic grid.
///
/// The difference with the solution one level coarser is reported as the
/// error estimate. The Picard pass re-integrates `F(u, θ) dy` on a finer
/// partition with the jet interpolant of the solution and must reproduce
/// the node values.
pub fn solve_yde<T: Real>(p: &YdeProblem<T>, opts: &YdeOptions) -> Result<SolveResult<T>> {
    let beta = p.y.exponent();
    let gamma = p.driver.gamma();
    if beta * (T::one() + gamma) <= T::one() {
        return Err(Error::regularity(format!(
            "Young differential equations need β(1 + γ) > 1, got β = {beta}, γ = {gamma}"
        )));
    }
    if opts.level < 1 {
        return Err(Error::config("YDE level must be at least 1"));
    }
    let (grid, theta) = line_nodes(p, opts.level)?;
    let (_, coarse) = line_nodes(p, opts.level - 1)?;
    let d = p.theta0.len();
    let n = grid.len();
    let fine_even: Vec<T> = (0..coarse.len() / d)
        .flat_map(|i| theta[2 * i * d..(2 * i + 1) * d].to_vec())
        .collect();
    let error_estimate = sup_diff(&fine_even, &coarse);

    let us = p.argument().sample_values(&grid);
    let v = driver_nodes(p.driver.as_ref(), &us, &theta, n);
    let field = jet_interpolant(&grid, theta.clone(), v, &p.y, "theta")?;

    let mut diagnostics = Diagnostics {
        error_estimate: Some(error_estimate),
        ..Default::default()
    };
    let mut residual = 0.0;
    if opts.picard {
        let r = picard_residual(p, &grid, &theta, &field, opts.picard_sub)?;
        let allowed = opts.tol.max(10.0 * error_estimate);
        diagnostics.log.push(format!("picard residual {r:.3e} (allowed {allowed:.3e})"));
        if !(r <= allowed) {
            return Err(Error::nonconvergence(
                format!("Picard re-integration moved the solution by {r:.3e} (allowed {allowed:.3e})"),
                vec![r, allowed, error_estimate],
            ));
        }
        diagnostics.picard_residual = Some(r);
        residual = r;
    }
    Ok(SolveResult {
        theta: field,
        grid,
        nodes: theta,
        iterations: 1,
        residual,
        diagnostics,
    })
}

fn picard_residual<T: Real>(p: &YdeProblem<T>, grid: &Grid<T>, theta: &[T], field: &Field<T>, sub: u32) -> Result<f64> {
    let d = theta.len() / grid.len();
    let ud = p.driver.u_dim();
    let m = 1usize << sub;
    let h = grid.spacing(0) / T::from_usize_lossy(m);
    let cells: Vec<Vec<T>> = (0..grid.len() - 1)
        .into_par_iter()
        .map(|i| {
            let t0 = grid.coord(0, i);
            let mut u = vec![T::zero(); ud];
            let mut z = vec![T::zero(); d];
            let mut f = vec![T::zero(); d];
            let mut prev: Option<(Vec<T>, T)> = None;
            let mut acc = vec![T::zero(); d];
            for j in 0..=m {
                let t = if j == m { grid.coord(0, i + 1) } else { t0 + h * T::from_usize_lossy(j) };
                let pt = [t];
                p.argument().eval_unchecked(&pt, &mut u);
                field.eval_unchecked(&pt, &mut z);
                let mut y = [T::zero()];
                p.y.eval_unchecked(&pt, &mut y);
                p.driver.eval(&u, &z, &mut f);
                if let Some((fp, yp)) = &prev {
                    for r in 0..d {
                        acc[r] = acc[r] + T::lit(0.5) * (fp[r] + f[r]) * (y[0] - *yp);
                    }
                }
                prev = Some((f.clone(), y[0]));
            }
            acc
        })
        .collect();
    let mut run = p.theta0.clone();
    let mut worst: f64 = 0.0;
    for (i, c) in cells.iter().enumerate() {
        for r in 0..d {
            run[r] = run[r] + c[r];
            worst = worst.max((run[r] - theta[(i + 1) * d + r]).abs().to_f64_lossy());
        }
    }
    Ok(worst)
}

/// Whether some `x ∈ [0, 1]` satisfies `α(xγ + 1) > 1` and `β((1 - x)γ + 1) > 1`.
pub fn exponent_condition_holds(alpha: f64, beta: f64, gamma: f64) -> bool {
    (0..=1000).any(|i| {
        let x = i as f64 / 1000.0;
        alpha * (x * gamma + 1.0) > 1.0 && beta * ((1.0 - x) * gamma + 1.0) > 1.0
    })
}

/// The family `θ_{(t,p)} = ϑ_p + ∫_0^t F((y_s, g_p), θ_{(s,p)}) dy_s`
/// indexed by `p` in the domain of `g`.
#[derive(Clone, Debug)]
pub struct YdeSlice<T: Real> {
    /// Takes `u = (y_t, g_p)`, so `u_dim = 1 + k`.
    pub driver: DriverRef<T>,
    pub y: Field<T>,
    pub g: Field<T>,
    pub vartheta: Field<T>,
    /// `𝔻_g ϑ`, a `d x k` field.
    pub d_vartheta: Field<T>,
}

#[derive(Clone, Debug)]
pub struct YdeGDerivative<T: Real> {
    /// `θ` on `I x J`, time first.
    pub theta: Field<T>,
    /// `𝔻_g θ` on `I x J`.
    pub derivative: Field<T>,
    /// g-derivative check of `p ↦ θ_{(T,p)}` at the final time.
    pub check: GDiffReport,
}

/// Solves the slice family and the linear YDE
/// `𝔻_gθ = 𝔻_gϑ + ∫ ((𝔻_g f)_θ̄ + (𝔻_{x^d} f)_θ̄ 𝔻_gθ) dy` for its g-derivative.
pub fn yde_g_derivative<T: Real>(s: &YdeSlice<T>, time_level: u32, space_level: u32) -> Result<YdeGDerivative<T>> {
    let k = s.g.rows();
    let d = s.driver.z_dim();
    let m = s.g.dim();
    if s.y.dim() != 1 || s.y.ncomp() != 1 || s.g.cols() != 1 {
        return Err(Error::shape("the slice needs a scalar y on an interval and a vector g"));
    }
    if m + 1 > 3 {
        return Err(Error::shape("the slice domain supports at most two space dimensions"));
    }
    if s.driver.u_dim() != 1 + k || s.driver.out_shape() != (d, 1) || d == 0 {
        return Err(Error::shape("the driver must take (y, g) and return a d-vector"));
    }
    if s.vartheta.ncomp() != d || s.d_vartheta.ncomp() != d * k {
        return Err(Error::shape("initial datum or its g-derivative has the wrong shape"));
    }
    let (alpha, beta, gamma) = (
        s.g.exponent().to_f64_lossy(),
        s.y.exponent().to_f64_lossy(),
        s.driver.gamma().to_f64_lossy(),
    );
    if !exponent_condition_holds(alpha, beta, gamma) {
        return Err(Error::regularity(format!(
            "no x in [0, 1] with α(xγ + 1) > 1 and β((1 - x)γ + 1) > 1 for α = {alpha}, β = {beta}, γ = {gamma}"
        )));
    }
    let tgrid = Grid::uniform(s.y.domain().clone(), time_level)?;
    let pgrid = Grid::uniform(s.g.domain().clone(), space_level)?;
    let ys = s.y.sample_values(&tgrid);
    let gs = s.g.sample_values(&pgrid);
    let th0 = s.vartheta.sample_values(&pgrid);
    let dth0 = s.d_vartheta.sample_values(&pgrid);
    let nt = tgrid.len();
    let np = pgrid.len();
    let driver = s.driver.as_ref();

    let lines: Vec<(Vec<T>, Vec<T>)> = (0..np)
        .into_par_iter()
        .map(|j| -> Result<(Vec<T>, Vec<T>)> {
            let mut us = vec![T::zero(); nt * (1 + k)];
            for i in 0..nt {
                us[i * (1 + k)] = ys[i];
                us[i * (1 + k) + 1..(i + 1) * (1 + k)].copy_from_slice(&gs[j * k..(j + 1) * k]);
            }
            let theta = solve_line(driver, 0, &us, &ys, 0, &th0[j * d..(j + 1) * d])?;
            let deriv = derivative_line(driver, &us, &ys, &theta, &dth0[j * d * k..(j + 1) * d * k], k)?;
            Ok((theta, deriv))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut theta_vals = vec![T::zero(); nt * np * d];
    let mut deriv_vals = vec![T::zero(); nt * np * d * k];
    for (j, (th, dv)) in lines.iter().enumerate() {
        for i in 0..nt {
            let at = i * np + j;
            theta_vals[at * d..(at + 1) * d].copy_from_slice(&th[i * d..(i + 1) * d]);
            deriv_vals[at * d * k..(at + 1) * d * k].copy_from_slice(&dv[i * d * k..(i + 1) * d * k]);
        }
    }
    let dom = s.y.domain().product(s.g.domain())?;
    let mut levels = vec![time_level];
    levels.extend(std::iter::repeat(space_level).take(m));
    let grid = Grid::new(dom, levels)?;
    let exponent = s.y.exponent().min(s.g.exponent());
    let theta = Field::from_grid(grid.clone(), (d, 1), theta_vals, exponent, "theta")?;
    let derivative = Field::from_grid(grid, (d, k), deriv_vals, exponent, "dg_theta")?;

    let th_t: Vec<T> = (0..np).flat_map(|j| lines[j].0[(nt - 1) * d..nt * d].to_vec()).collect();
    let dv_t: Vec<T> = (0..np)
        .flat_map(|j| lines[j].1[(nt - 1) * d * k..nt * d * k].to_vec())
        .collect();
    let th_field = Field::from_grid(pgrid.clone(), (d, 1), th_t, s.g.exponent(), "theta_T")?;
    let dv_field = Field::from_grid(pgrid, (d, k), dv_t, s.g.exponent(), "dg_theta_T")?;
    let target = alpha.min(beta) * (1.0 + gamma);
    let check = g_derivative_check(
        &th_field,
        &dv_field,
        &s.g,
        &GDiffOptions {
            level: Some(space_level),
            target_rate: Some(target),
            max_scale: None,
        },
    )?;
    Ok(YdeGDerivative {
        theta,
        derivative,
        check,
    })
}

/// Trapezoid steps of the linear YDE for `D = 𝔻_g θ` along one line.
fn derivative_line<T: Real>(driver: &dyn Driver<T>, us: &[T], ys: &[T], theta: &[T], d0: &[T], k: usize) -> Result<Vec<T>> {
    let n = ys.len();
    let d = driver.z_dim();
    let ud = 1 + k;
    let mut out = vec![T::zero(); n * d * k];
    out[..d * k].copy_from_slice(d0);
    let mut du = vec![T::zero(); d * ud];
    let mut dz = vec![T::zero(); d * d];
    // Drift `G + Z D` at node i, with G = ∂_g F and Z = ∂_z F.
    let drift = |i: usize, dmat: &[T], du: &mut [T], dz: &mut [T], out: &mut [T]| {
        let (u, z) = (&us[i * ud..(i + 1) * ud], &theta[i * d..(i + 1) * d]);
        driver.d_u(u, z, du);
        driver.d_z(u, z, dz);
        for r in 0..d {
            for c in 0..k {
                let mut s = du[r * ud + 1 + c];
                for l in 0..d {
                    s = s + dz[r * d + l] * dmat[l * k + c];
                }
                out[r * k + c] = s;
            }
        }
    };
    let half = T::lit(0.5);
    let mut a0 = vec![T::zero(); d * k];
    let mut jac = vec![T::zero(); d * d];
    let mut col = vec![T::zero(); d];
    for i in 0..n - 1 {
        let dy = ys[i + 1] - ys[i];
        let (prev, next) = out.split_at_mut((i + 1) * d * k);
        let cur = &prev[i * d * k..];
        drift(i, cur, &mut du, &mut dz, &mut a0);
        let (u1, z1) = (&us[(i + 1) * ud..(i + 2) * ud], &theta[(i + 1) * d..(i + 2) * d]);
        driver.d_u(u1, z1, &mut du);
        driver.d_z(u1, z1, &mut dz);
        for r in 0..d {
            for l in 0..d {
                jac[r * d + l] = if r == l { T::one() } else { T::zero() } - half * dy * dz[r * d + l];
            }
        }
        for c in 0..k {
            for r in 0..d {
                col[r] = cur[r * k + c] + half * dy * (a0[r * k + c] + du[r * ud + 1 + c]);
            }
            solve_small(&jac, &mut col)
                .ok_or_else(|| Error::nonconvergence("singular step in the g-derivative equation", vec![]))?;
            for r in 0..d {
                next[r * k + c] = col[r];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::geometry::Domain;
    use crate::driver::{linear_z, FnDriver};

    fn identity_path() -> Field<f64> {
        Field::scalar_fn(Domain::unit(1), 1.0, "t", |p: &[f64]| p[0]).unwrap()
    }

    #[test]
    fn linear_equation_gives_exponential() {
        let p = YdeProblem::new(linear_z::<f64>(1, 1), identity_path(), vec![1.0]).unwrap();
        let r = solve_yde(&p, &YdeOptions::default()).unwrap();
        let end = r.theta.eval_scalar(&[1.0]).unwrap();
        assert!((end - std::f64::consts::E).abs() < 1e-5, "{end}");
        assert!(r.diagnostics.picard_residual.unwrap() < 1e-6);
    }

    #[test]
    fn constant_driver_is_exact() {
        let y = Field::scalar_fn(Domain::unit(1), 0.8, "w", |p: &[f64]| (7.0 * p[0]).sin() * 0.3).unwrap();
        let c = crate::driver::constant::<f64>(1, 1, (1, 1), vec![2.5]).unwrap();
        let p = YdeProblem::new(c, y.clone(), vec![0.5]).unwrap();
        let r = solve_yde(&p, &YdeOptions { level: 8, ..Default::default() }).unwrap();
        for t in [0.0, 0.3, 0.77, 1.0] {
            let want = 0.5 + 2.5 * (y.eval_scalar(&[t]).unwrap() - y.eval_scalar(&[0.0]).unwrap());
            assert!((r.theta.eval_scalar(&[t]).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_subcritical_exponents() {
        let y = Field::scalar_fn(Domain::unit(1), 0.45, "rough", |p: &[f64]| p[0]).unwrap();
        let d = FnDriver::<f64>::new(
            "z",
            1,
            1,
            (1, 1),
            |_: &[f64], z: &[f64], o: &mut [f64]| o[0] = z[0],
            |_: &[f64], _: &[f64], o: &mut [f64]| o[0] = 0.0,
            |_: &[f64], _: &[f64], o: &mut [f64]| o[0] = 1.0,
        )
            .with_gamma(1.0)
            .into_ref();
        let p = YdeProblem::new(d, y, vec![1.0]).unwrap();
        assert!(matches!(solve_yde(&p, &YdeOptions::default()), Err(Error::Regularity(_))));
    }

    #[test]
    fn exponent_window_examples() {
        assert!(exponent_condition_holds(0.9, 0.9, 1.0));
        assert!(exponent_condition_holds(1.0, 0.6, 1.0));
        assert!(!exponent_condition_holds(0.6, 0.6, 0.5));
    }

    fn slice(driver: DriverRef<f64>, y: Field<f64>, vartheta: Field<f64>, dv: Field<f64>) -> YdeSlice<f64> {
        let g = Field::scalar_fn(Domain::unit(1), 1.0, "g", |p: &[f64]| (3.0 * p[0]).sin()).unwrap();
        YdeSlice { driver, y, g, vartheta, d_vartheta: dv }
    }

    #[test]
    fn g_derivative_without_unknown_is_the_time_increment() {
        // F((y, g), z) = g, so θ = g (y_t - y_0) and 𝔻_g θ = y_t - y_0.
        let drv = FnDriver::<f64>::new(
            "g",
            2,
            1,
            (1, 1),
            |u, _, o| o[0] = u[1],
            |_, _, o| {
                o[0] = 0.0;
                o[1] = 1.0;
            },
            |_, _, o| o[0] = 0.0,
        )
        .into_ref();
        let y = Field::scalar_fn(Domain::unit(1), 1.0, "y", |p: &[f64]| (2.0 * p[0]).cos()).unwrap();
        let zero = Field::constant(Domain::unit(1), (1, 1), vec![0.0]).unwrap();
        let r = yde_g_derivative(&slice(drv, y.clone(), zero.clone(), zero), 8, 5).unwrap();
        for (t, s) in [(0.25, 0.25), (1.0, 0.5), (0.75, 0.875)] {
            let dy = y.eval_scalar(&[t]).unwrap() - 1.0;
            assert!((r.derivative.eval_scalar(&[t, s]).unwrap() - dy).abs() < 1e-12);
        }
    }

    #[test]
    fn g_derivative_of_linear_flow_is_exponential() {
        // F = z with ϑ = g: θ = g exp(y_t - y_0) and 𝔻_g θ = exp(y_t - y_0).
        let y = Field::scalar_fn(Domain::unit(1), 1.0, "y", |p: &[f64]| p[0] * p[0]).unwrap();
        let g = Field::scalar_fn(Domain::unit(1), 1.0, "g", |p: &[f64]| (3.0 * p[0]).sin()).unwrap();
        let one = Field::constant(Domain::unit(1), (1, 1), vec![1.0]).unwrap();
        let drv = FnDriver::<f64>::new(
            "z",
            2,
            1,
            (1, 1),
            |_, z, o| o[0] = z[0],
            |_, _, o| o.iter_mut().for_each(|x| *x = 0.0),
            |_, _, o| o[0] = 1.0,
        )
        .into_ref();
        let r = yde_g_derivative(&slice(drv, y, g, one), 10, 4).unwrap();
        for (t, s) in [(0.5, 0.25), (1.0, 0.75)] {
            let want = f64::exp(t * t);
            assert!((r.derivative.eval_scalar(&[t, s]).unwrap() - want).abs() < 1e-5);
        }
        assert!(r.check.pass, "{:?}", r.check);
    }

    #[test]
    fn rough_linear_equation_matches_closed_form() {
        let y: Field<f64> = crate::signals::SignalSpec::Weierstrass1d { beta: 0.6, terms: 10, seed: 3 }
            .build_unit()
            .unwrap();
        let p = YdeProblem::new(linear_z::<f64>(1, 1), y.clone(), vec![1.0]).unwrap();
        let r = solve_yde(&p, &YdeOptions { level: 16, picard: false, ..Default::default() }).unwrap();
        let y0 = y.eval_scalar(&[0.0]).unwrap();
        let err = (0..r.grid.len())
            .map(|f| {
                let t = r.grid.point_flat(f)[0];
                let w = (y.eval_scalar(&[t]).unwrap() - y0).exp();
                (r.nodes[f] - w).abs() / w
            })
            .fold(0.0, f64::max);
        // Top frequency 2048 leaves 32 nodes per period at level 16.
        assert!(err < 2e-5, "{err}");
        assert!(r.diagnostics.error_estimate.unwrap() < 1e-4);
    }
}
