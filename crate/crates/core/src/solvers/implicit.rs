//! Implicit functions `F(g(x), θ(x)) = F(g(x₀), y₀)` by a chord fixed point.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{det_small, rounding_tol, solve_small, sup_diff, Diagnostics, SolveResult};
use crate::calculus::field::Field;
use crate::calculus::geometry::{Domain, Grid};
use crate::driver::DriverRef;
use crate::error::{Error, Result};
use crate::jets::{g_derivative_check, jet_interpolant, GDiffOptions, GDiffReport};
use crate::scalar::{max_abs, Real};

/// Level set of `f(x, y) = F(g(x), y)` through `(x₀, y₀)`; `F` takes
/// `u = g(x)` with `k` components and the unknown `y ∈ ℝ^n`.
#[derive(Clone, Debug)]
pub struct ImplicitProblem<T: Real> {
    pub g: Field<T>,
    pub driver: DriverRef<T>,
    pub x0: Vec<T>,
    pub y0: Vec<T>,
}

impl<T: Real> ImplicitProblem<T> {
    pub fn new(g: Field<T>, driver: DriverRef<T>, x0: Vec<T>, y0: Vec<T>) -> Result<Self> {
        let n = driver.z_dim();
        if g.cols() != 1 || driver.u_dim() != g.rows() {
            return Err(Error::shape("driver signal argument does not match g"));
        }
        if n == 0 || driver.out_shape() != (n, 1) || y0.len() != n {
            return Err(Error::shape("implicit drivers map (u, y) with y in R^n into R^n"));
        }
        g.domain().check(&x0)?;
        Ok(ImplicitProblem { g, driver, x0, y0 })
    }

    fn n(&self) -> usize {
        self.y0.len()
    }

    fn k(&self) -> usize {
        self.g.rows()
    }
}

#[derive(Clone, Debug)]
pub struct ImplicitOptions {
    pub level: u32,
    /// Per-node stopping tolerance on the chord update.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: u32,
    /// Sampling level of the g-derivative check (the solve level by default).
    pub check_level: Option<u32>,
}

impl Default for ImplicitOptions {
    fn default() -> Self {
        ImplicitOptions {
            level: 12,
            tol: 1e-12,
            max_iter: 200,
            max_halvings: 20,
            check_level: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImplicitSolution<T: Real> {
    pub result: SolveResult<T>,
    /// Box on which the fixed point converged.
    pub domain: Domain<T>,
    pub halvings: u32,
    /// `sup_p |f(p, θ_p) - f(x₀, y₀)|` over the nodes.
    pub level_set_residual: f64,
    /// `𝔻_g θ = -(∂_y F)^{-1} ∂_u F` along the graph.
    pub derivative: Field<T>,
    pub check: GDiffReport,
}

struct Chord<T> {
    theta: Vec<T>,
    iterations: usize,
}

/// Solves `θ ↦ θ - A⁻¹ (F(g_p, θ) - F(g(x₀), y₀))` at every node, with
/// `A = ∂_y F` frozen at the base point, halving the box towards `x₀`
/// whenever some node fails to contract.
pub fn solve_implicit<T: Real>(p: &ImplicitProblem<T>, opts: &ImplicitOptions) -> Result<ImplicitSolution<T>> {
    let (n, k) = (p.n(), p.k());
    let beta = p.g.exponent();
    let gamma = p.driver.gamma();
    if beta * (T::one() + gamma) <= T::one() {
        return Err(Error::regularity(format!(
            "implicit functions need β(1 + γ) > 1, got β = {beta}, γ = {gamma}"
        )));
    }
    let driver = p.driver.as_ref();
    let mut u0 = vec![T::zero(); k];
    p.g.eval_unchecked(&p.x0, &mut u0);
    let mut a = vec![T::zero(); n * n];
    driver.d_z(&u0, &p.y0, &mut a);
    let det = det_small(&a, n);
    let scale = 1.0 + max_abs(&a).to_f64_lossy();
    if !(det.abs() > 1e-12 * scale.powi(n as i32)) {
        return Err(Error::Degeneracy(format!(
            "∂_y f at the base point has determinant {det:.3e}"
        )));
    }
    let mut c = vec![T::zero(); n];
    driver.eval(&u0, &p.y0, &mut c);

    let mut domain = p.g.domain().clone();
    let mut halvings = 0;
    let mut log = Vec::new();
    let (grid, chord) = loop {
        let grid = Grid::uniform(domain.clone(), opts.level)?;
        match chord_nodes(p, &grid, &a, &c, opts) {
            Ok(ch) => break (grid, ch),
            Err(why) => {
                if halvings >= opts.max_halvings {
                    return Err(Error::nonconvergence(
                        format!("chord iteration fails after {halvings} halvings: {why}"),
                        vec![],
                    ));
                }
                log.push(format!("halving {}: {why}", halvings + 1));
                let half = T::lit(0.5);
                let lower: Vec<T> = domain.lower().iter().zip(&p.x0).map(|(&l, &x)| x - (x - l) * half).collect();
                let upper: Vec<T> = domain.upper().iter().zip(&p.x0).map(|(&u, &x)| x + (u - x) * half).collect();
                domain = Domain::new(lower, upper)?;
                halvings += 1;
            }
        }
    };

    let nn = grid.len();
    let gs = p.g.sample_values(&grid);
    let results: Vec<(Vec<T>, f64)> = (0..nn)
        .into_par_iter()
        .map(|f| {
            let (u, th) = (&gs[f * k..(f + 1) * k], &chord.theta[f * n..(f + 1) * n]);
            let mut out = vec![T::zero(); n];
            driver.eval(u, th, &mut out);
            let res = sup_diff(&out, &c);
            let mut az = vec![T::zero(); n * n];
            let mut bu = vec![T::zero(); n * k];
            driver.d_z(u, th, &mut az);
            driver.d_u(u, th, &mut bu);
            let mut dv = vec![T::zero(); n * k];
            for col in 0..k {
                let mut rhs: Vec<T> = (0..n).map(|r| -bu[r * k + col]).collect();
                if solve_small(&az, &mut rhs).is_none() {
                    rhs.iter_mut().for_each(|x| *x = T::nan());
                }
                for r in 0..n {
                    dv[r * k + col] = rhs[r];
                }
            }
            (dv, res)
        })
        .collect();
    let level_set_residual = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let dv: Vec<T> = results.into_iter().flat_map(|r| r.0).collect();
    if dv.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degeneracy("∂_y f becomes singular along the computed graph".into()));
    }
    let g_on = p.g.restrict(&domain)?;
    let theta = jet_interpolant(&grid, chord.theta.clone(), dv.clone(), &g_on, "theta")?;
    let derivative = Field::from_grid(grid.clone(), (n, k), dv, beta, "dg_theta")?;
    let check = g_derivative_check(
        &theta,
        &derivative,
        &g_on,
        &GDiffOptions {
            level: Some(opts.check_level.unwrap_or(opts.level)),
            target_rate: Some((beta * (T::one() + gamma)).to_f64_lossy()),
            max_scale: None,
        },
    )?;
    let diagnostics = Diagnostics {
        log,
        germ: Some(check.clone()),
        ..Default::default()
    };
    Ok(ImplicitSolution {
        result: SolveResult {
            theta,
            grid,
            nodes: chord.theta,
            iterations: chord.iterations,
            residual: level_set_residual,
            diagnostics,
        },
        domain,
        halvings,
        level_set_residual,
        derivative,
        check,
    })
}

fn chord_nodes<T: Real>(
    p: &ImplicitProblem<T>,
    grid: &Grid<T>,
    a: &[T],
    c: &[T],
    opts: &ImplicitOptions,
) -> std::result::Result<Chord<T>, String> {
    let (n, k) = (p.n(), p.k());
    let gs = p.g.sample_values(grid);
    let tol = opts.tol.max(rounding_tol::<T>().to_f64_lossy());
    let driver = p.driver.as_ref();
    let per_node: Vec<std::result::Result<(Vec<T>, usize), String>> = (0..grid.len())
        .into_par_iter()
        .map(|f| {
            let u = &gs[f * k..(f + 1) * k];
            let mut th = p.y0.clone();
            let mut out = vec![T::zero(); n];
            let mut last = f64::INFINITY;
            for it in 1..=opts.max_iter {
                driver.eval(u, &th, &mut out);
                for r in 0..n {
                    out[r] = out[r] - c[r];
                }
                if solve_small(a, &mut out).is_none() {
                    return Err("singular chord matrix".to_string());
                }
                let step = max_abs(&out).to_f64_lossy();
                for r in 0..n {
                    th[r] = th[r] - out[r];
                }
                if !step.is_finite() || (it > 2 && step >= last) {
                    return Err(format!(
                        "no contraction at {:?}",
                        grid.point_flat(f).iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>()
                    ));
                }
                if step <= tol * (1.0 + max_abs(&th).to_f64_lossy()) {
                    return Ok((th, it));
                }
                last = step;
            }
            Err(format!("{} chord iterations without convergence", opts.max_iter))
        })
        .collect();
    let mut theta = Vec::with_capacity(grid.len() * n);
    let mut iterations = 0;
    for r in per_node {
        let (th, it) = r?;
        theta.extend(th);
        iterations = iterations.max(it);
    }
    Ok(Chord { theta, iterations })
}

/// `φ(x, g(x), y)`, a function on the graph of the implicit solution.
pub type GraphFn<T> = Arc<dyn Fn(&[T], &[T], &[T]) -> T + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSetRow {
    pub diam: f64,
    pub variation: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSetReport {
    /// `min(1, (γ + β) β)`.
    pub exponent: f64,
    pub rows: Vec<LevelSetRow>,
    pub pass: bool,
}

/// Measures `sup |φ(θ̄_p) - φ(θ̄_{x₀})|` on boxes shrinking around `x₀`,
/// passing iff it stays below `tol · diam^e` on every box.
pub fn level_set_composition_check<T: Real>(
    phi: &GraphFn<T>,
    problem: &ImplicitProblem<T>,
    solution: &ImplicitSolution<T>,
    tol: f64,
) -> Result<LevelSetReport> {
    let beta = problem.g.exponent().to_f64_lossy();
    let gamma = problem.driver.gamma().to_f64_lossy();
    let exponent = ((gamma + beta) * beta).min(1.0);
    let k = problem.k();
    let dom = &solution.domain;
    let x0 = &problem.x0;
    let at = |x: &[T]| -> T {
        let mut u = vec![T::zero(); k];
        problem.g.eval_unchecked(x, &mut u);
        let mut y = vec![T::zero(); problem.n()];
        solution.result.theta.eval_unchecked(x, &mut y);
        phi(x, &u, &y)
    };
    let base = at(x0);
    let mut rows = Vec::new();
    for j in 0..7 {
        let shrink = T::lit(0.5f64.powi(j));
        let lower: Vec<T> = dom.lower().iter().zip(x0).map(|(&l, &x)| x - (x - l) * shrink).collect();
        let upper: Vec<T> = dom.upper().iter().zip(x0).map(|(&u, &x)| x + (u - x) * shrink).collect();
        let sub = Domain::new(lower, upper)?;
        let level = match sub.dim() {
            1 => 6,
            2 => 4,
            _ => 3,
        };
        let grid = Grid::uniform(sub.clone(), level)?;
        let variation = (0..grid.len())
            .into_par_iter()
            .map(|f| (at(&grid.point_flat(f)) - base).abs().to_f64_lossy())
            .reduce(|| 0.0, f64::max);
        let diam = sub.diam().to_f64_lossy();
        rows.push(LevelSetRow {
            diam,
            variation,
            bound: tol * diam.powf(exponent),
        });
    }
    let pass = rows.iter().all(|r| r.variation <= r.bound);
    Ok(LevelSetReport { exponent, rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{implicit_cubic, implicit_shift, implicit_square};

    fn sin_on(a: f64, b: f64) -> Field<f64> {
        Field::scalar_fn(Domain::interval(a, b).unwrap(), 1.0, "sin", |p: &[f64]| p[0].sin()).unwrap()
    }

    fn bisect(rhs: f64) -> f64 {
        let (mut lo, mut hi) = (-2.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid * mid + mid - rhs > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn shift_is_one_iteration() {
        let p = ImplicitProblem::new(sin_on(-1.0, 1.0), implicit_shift(), vec![0.0], vec![0.25]).unwrap();
        let s = solve_implicit(&p, &ImplicitOptions { level: 8, ..Default::default() }).unwrap();
        assert_eq!(s.halvings, 0);
        assert!(s.result.iterations <= 2);
        for x in [-1.0f64, -0.3, 0.6, 1.0] {
            let want = x.sin() + 0.25;
            assert!((s.result.theta.eval_scalar(&[x]).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_matches_bisection() {
        let p = ImplicitProblem::new(sin_on(-1.0, 1.0), implicit_cubic(), vec![0.0], vec![0.0]).unwrap();
        let s = solve_implicit(&p, &ImplicitOptions { level: 10, ..Default::default() }).unwrap();
        assert!(s.halvings >= 1);
        let g = &s.result.grid;
        for i in 0..g.len() {
            let x = g.coord(0, i);
            assert!((s.result.nodes[i] - bisect(x.sin())).abs() < 1e-8);
        }
        assert!(s.check.pass, "{:?}", s.check);
    }

    #[test]
    fn square_is_degenerate() {
        let p = ImplicitProblem::new(sin_on(-1.0, 1.0), implicit_square(), vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(solve_implicit(&p, &ImplicitOptions::default()), Err(Error::Degeneracy(_))));
    }

    #[test]
    fn level_set_functions() {
        let p = ImplicitProblem::new(sin_on(-1.0, 1.0), implicit_cubic(), vec![0.0], vec![0.0]).unwrap();
        let s = solve_implicit(&p, &ImplicitOptions { level: 10, ..Default::default() }).unwrap();
        let f: GraphFn<f64> = Arc::new(|_, u, y| y[0].powi(3) + y[0] - u[0]);
        assert!(level_set_composition_check(&f, &p, &s, 1e-6).unwrap().pass);
        let smooth: GraphFn<f64> = Arc::new(|_, u, y| (y[0].powi(3) + y[0] - u[0]).exp());
        assert!(level_set_composition_check(&smooth, &p, &s, 1e-6).unwrap().pass);
        let x: GraphFn<f64> = Arc::new(|x, _, _| x[0]);
        assert!(!level_set_composition_check(&x, &p, &s, 1e-6).unwrap().pass);
    }
}
