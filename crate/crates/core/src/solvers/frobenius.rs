//! Pfaff systems `δθ = f(θ̄) δg`: the wedge-null fixed point and the
//! diagonal sweep of one-dimensional YDEs.

use rayon::prelude::*;
use serde::Serialize;

use super::yde::solve_line;
use super::{sup_diff, Diagnostics, PfaffProblem, SolveResult};
use crate::calculus::field::{Field, GridSamples};
use crate::calculus::geometry::Grid;
use crate::error::{Error, Result};
use crate::jets::{
    g_derivative_check, integrate_nodes, jet_interpolant_sampled, wedge_null_pairs, GDiffOptions, JetTestOptions,
};
use crate::scalar::{max_abs, Real};

/// Starting point of the wedge-null fixed-point iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InitialIterate {
    /// `v₀ ≡ f(p₀, ϑ)`.
    Frozen,
    /// `v₀ ≡ 0`.
    Zero,
}

#[derive(Clone, Debug)]
pub struct WedgeNullOptions {
    pub level: u32,
    /// The segment `[p₀ p]` gets `2^sub_level` cells per grid step it spans.
    pub sub_level: u32,
    /// Stop once `sup |v_{n+1} - v_n| < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Bisection budget of the patching fallback.
    pub max_depth: u32,
    pub init: InitialIterate,
    /// Run the pairwise wedge-null test before iterating.
    pub precheck: bool,
    pub jet: JetTestOptions,
    /// Germ and path-independence diagnostics after convergence.
    pub diagnostics: bool,
}

impl Default for WedgeNullOptions {
    fn default() -> Self {
        WedgeNullOptions {
            level: 7,
            sub_level: 0,
            tol: 1e-9,
            max_iter: 200,
            max_depth: 6,
            init: InitialIterate::Frozen,
            precheck: true,
            jet: JetTestOptions::default(),
            diagnostics: true,
        }
    }
}

/// Largest number of cached segment samples for one box.
const SEGMENT_BUDGET: usize = 60_000_000;

struct WedgeNull<'a, T: Real> {
    p: &'a PfaffProblem<T>,
    grid: Grid<T>,
    opts: &'a WedgeNullOptions,
    gs: Vec<T>,
    theta: Vec<T>,
    v: Vec<T>,
    curv: Vec<T>,
    history: Vec<f64>,
    patching: Vec<String>,
    iterations: usize,
}

/// `F(u, z)` and its total g-derivative `∂_{u_j} F^{r,i} + Σ_l ∂_{z_l} F^{r,i} F^{l,j}`.
struct JetBuf<T> {
    val: Vec<T>,
    a: Vec<T>,
    dz: Vec<T>,
}

impl<T: Real> JetBuf<T> {
    fn new(d: usize, k: usize) -> Self {
        JetBuf {
            val: vec![T::zero(); d * k],
            a: vec![T::zero(); d * k * k],
            dz: vec![T::zero(); d * k * d],
        }
    }

    fn eval(&mut self, driver: &dyn crate::driver::Driver<T>, u: &[T], z: &[T], derivative: bool) {
        driver.eval(u, z, &mut self.val);
        if !derivative {
            return;
        }
        let (d, k) = (z.len(), u.len());
        driver.d_u(u, z, &mut self.a);
        driver.d_z(u, z, &mut self.dz);
        for c in 0..d * k {
            for j in 0..k {
                let mut s = self.a[c * k + j];
                for l in 0..d {
                    s = s + self.dz[c * d + l] * self.val[l * k + j];
                }
                self.a[c * k + j] = s;
            }
        }
    }
}

enum Outcome {
    Converged,
    Stalled(String),
}

impl<T: Real> WedgeNull<'_, T> {
    fn box_nodes(&self, lo: &[usize], hi: &[usize]) -> Vec<usize> {
        let m = self.grid.dim();
        let mut out = Vec::new();
        let mut idx = lo.to_vec();
        loop {
            out.push(self.grid.flat(&idx));
            let mut a = m;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                if idx[a] < hi[a] {
                    idx[a] += 1;
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }

    fn solve_box(&mut self, lo: Vec<usize>, hi: Vec<usize>, base: usize, theta_b: Vec<T>, depth: u32) -> Result<()> {
        match self.iterate_box(&lo, &hi, base, &theta_b)? {
            Outcome::Converged => Ok(()),
            Outcome::Stalled(why) => {
                let m = self.grid.dim();
                let axis = (0..m).max_by_key(|&a| (hi[a] - lo[a], m - a)).unwrap_or(0);
                if depth >= self.opts.max_depth || hi[axis] - lo[axis] < 2 {
                    return Err(Error::nonconvergence(
                        format!("fixed point stalled ({why}) and the bisection budget is exhausted at depth {depth}"),
                        self.history.clone(),
                    ));
                }
                let mid = (lo[axis] + hi[axis]) / 2;
                let bidx = self.grid.multi(base);
                let (mut lo_a, mut hi_a, mut lo_b, mut hi_b) = (lo.clone(), hi.clone(), lo.clone(), hi.clone());
                if bidx[axis] <= mid {
                    hi_a[axis] = mid;
                    lo_b[axis] = mid;
                } else {
                    lo_a[axis] = mid;
                    hi_b[axis] = mid;
                }
                self.patching.push(format!(
                    "depth {depth}: box {lo:?}..{hi:?} stalled ({why}); split axis {axis} at node {mid}"
                ));
                self.solve_box(lo_a.clone(), hi_a.clone(), base, theta_b, depth + 1)?;
                let mut face_base = bidx.clone();
                face_base[axis] = mid;
                let fb = self.grid.flat(&face_base);
                let d = self.p.d();
                let theta_fb = self.theta[fb * d..(fb + 1) * d].to_vec();
                let mut face_lo = lo_b.clone();
                let mut face_hi = hi_b.clone();
                face_lo[axis] = mid;
                face_hi[axis] = mid;
                let face = self.box_nodes(&face_lo, &face_hi);
                let saved: Vec<(Vec<T>, Vec<T>)> = face
                    .iter()
                    .map(|&f| (self.theta[f * d..(f + 1) * d].to_vec(), self.v[f * d * self.p.k()..(f + 1) * d * self.p.k()].to_vec()))
                    .collect();
                self.solve_box(lo_b, hi_b, fb, theta_fb, depth + 1)?;
                let dk = d * self.p.k();
                let mut gap: f64 = 0.0;
                for (&f, (th, vv)) in face.iter().zip(&saved) {
                    gap = gap.max(sup_diff(&self.theta[f * d..(f + 1) * d], th));
                    self.theta[f * d..(f + 1) * d].copy_from_slice(th);
                    self.v[f * dk..(f + 1) * dk].copy_from_slice(vv);
                }
                self.patching.push(format!("depth {depth}: shared face at axis {axis} node {mid} agrees to {gap:.3e}"));
                Ok(())
            }
        }
    }

    /// Second-order jet coefficients `∂_{u_j} F^{r,i} + Σ_l ∂_{z_l} F^{r,i} F^{l,j}`
    /// at the nodes, so off-grid values of the iterate carry the curvature
    /// of `θ` in `g`.
    fn update_curvature(&mut self, nodes: &[usize]) {
        let (d, k) = (self.p.d(), self.p.k());
        let kk = d * k * k;
        let driver = self.p.driver.as_ref();
        let (gs, theta) = (&self.gs, &self.theta);
        let rows: Vec<Vec<T>> = nodes
            .par_iter()
            .map(|&f| {
                let (u, z) = (&gs[f * k..(f + 1) * k], &theta[f * d..(f + 1) * d]);
                let mut buf = JetBuf::new(d, k);
                buf.eval(driver, u, z, true);
                buf.a
            })
            .collect();
        for (&f, a) in nodes.iter().zip(rows) {
            self.curv[f * kk..(f + 1) * kk].copy_from_slice(&a);
        }
    }

    fn iterate_box(&mut self, lo: &[usize], hi: &[usize], base: usize, theta_b: &[T]) -> Result<Outcome> {
        let (d, k, m) = (self.p.d(), self.p.k(), self.grid.dim());
        let dk = d * k;
        let nodes = self.box_nodes(lo, hi);
        let bidx = self.grid.multi(base);
        let pb = self.grid.point_flat(base);
        let per_step = 1usize << self.opts.sub_level;
        // Cells of the straight segment from the base to each node.
        let cells: Vec<usize> = nodes
            .iter()
            .map(|&f| {
                let idx = self.grid.multi(f);
                (0..m).map(|a| idx[a].abs_diff(bidx[a])).max().unwrap_or(0) * per_step
            })
            .collect();
        let mut offsets = Vec::with_capacity(nodes.len() + 1);
        offsets.push(0usize);
        for c in &cells {
            offsets.push(offsets.last().unwrap() + if *c == 0 { 0 } else { c + 1 });
        }
        let total = *offsets.last().unwrap();
        if total > SEGMENT_BUDGET {
            return Err(Error::Size(format!("{total} segment samples exceed the budget; lower the level")));
        }
        let grid_owned = self.grid.clone();
        let grid = &grid_owned;
        let problem = self.p;
        let g = &problem.g;
        let point = |f: usize, j: usize, n: usize, out: &mut [T]| {
            let q = grid.point_flat(f);
            let t = T::from_usize_lossy(j) / T::from_usize_lossy(n);
            for a in 0..m {
                out[a] = pb[a] + (q[a] - pb[a]) * t;
            }
        };
        let mut gq = vec![T::zero(); total * k];
        gq.par_chunks_mut(k).enumerate().for_each(|(s, out)| {
            let i = offsets.partition_point(|&o| o <= s) - 1;
            let mut q = [T::zero(); 3];
            point(nodes[i], s - offsets[i], cells[i], &mut q[..m]);
            g.eval_unchecked(&q[..m], out);
        });

        let driver = problem.driver.as_ref();
        let mut frozen = vec![T::zero(); dk];
        if self.opts.init == InitialIterate::Frozen {
            driver.eval(&self.gs[base * k..(base + 1) * k], theta_b, &mut frozen);
        }
        let mut constant = true;
        let start = self.history.len();
        loop {
            let theta_s = GridSamples::new(grid.clone(), d, self.theta.clone())?;
            if !constant {
                self.update_curvature(&nodes);
            }
            let (theta_g, v_g, gs, a_g) = (&theta_s, &self.v, &self.gs, &self.curv);
            let frozen_ref = &frozen;
            // Value and g-derivative of `F(g, θ̃)` at a segment sample.
            let eval_v = |q: &[T], gqv: &[T], out: &mut JetBuf<T>| {
                if constant {
                    out.val.copy_from_slice(frozen_ref);
                    out.a.iter_mut().for_each(|x| *x = T::zero());
                    return;
                }
                let mut z = [T::zero(); 8];
                theta_g.for_each_corner(q, |c, w| {
                    for r in 0..d {
                        let mut s = theta_g.at_flat(c)[r];
                        for i in 0..k {
                            let di = gqv[i] - gs[c * k + i];
                            let mut t = v_g[c * dk + r * k + i];
                            for j in 0..k {
                                let dj = gqv[j] - gs[c * k + j];
                                t = t + T::lit(0.5) * a_g[(c * d + r) * k * k + i * k + j] * dj;
                            }
                            s = s + t * di;
                        }
                        z[r] = z[r] + w * s;
                    }
                });
                out.eval(driver, gqv, &z[..d], true);
            };
            let twelfth = T::lit(1.0 / 12.0);
            let updated: Vec<(Vec<T>, Vec<T>)> = nodes
                .par_iter()
                .enumerate()
                .map(|(i, &f)| {
                    let mut th = theta_b.to_vec();
                    let n = cells[i];
                    if n > 0 {
                        let mut q = [T::zero(); 3];
                        let mut ja = JetBuf::new(d, k);
                        let mut jb = JetBuf::new(d, k);
                        let seg = &gq[offsets[i] * k..offsets[i + 1] * k];
                        point(f, 0, n, &mut q[..m]);
                        eval_v(&q[..m], &seg[..k], &mut ja);
                        for j in 0..n {
                            point(f, j + 1, n, &mut q[..m]);
                            let (g0, g1) = (&seg[j * k..(j + 1) * k], &seg[(j + 1) * k..(j + 2) * k]);
                            eval_v(&q[..m], g1, &mut jb);
                            // Trapezoid germ with the end correction
                            // -(1/12) (Dv_b - Dv_a)[δg, δg].
                            for r in 0..d {
                                for c in 0..k {
                                    let dc = g1[c] - g0[c];
                                    let mut corr = T::zero();
                                    for e in 0..k {
                                        let at = (r * k + c) * k + e;
                                        corr = corr + (jb.a[at] - ja.a[at]) * (g1[e] - g0[e]);
                                    }
                                    th[r] = th[r] + (T::lit(0.5) * (ja.val[r * k + c] + jb.val[r * k + c]) - twelfth * corr) * dc;
                                }
                            }
                            std::mem::swap(&mut ja, &mut jb);
                        }
                    }
                    let mut v = vec![T::zero(); dk];
                    driver.eval(&gs[f * k..(f + 1) * k], &th, &mut v);
                    (th, v)
                })
                .collect();
            let mut residual: f64 = 0.0;
            for (&f, (th, v)) in nodes.iter().zip(&updated) {
                let old: &[T] = if constant { &frozen } else { &self.v[f * dk..(f + 1) * dk] };
                residual = residual.max(sup_diff(v, old));
                if v.iter().chain(th).any(|x| !x.is_finite()) {
                    residual = f64::NAN;
                }
                self.theta[f * d..(f + 1) * d].copy_from_slice(th);
                self.v[f * dk..(f + 1) * dk].copy_from_slice(v);
            }
            constant = false;
            self.iterations += 1;
            self.history.push(residual);
            let h = &self.history[start..];
            if residual < self.opts.tol {
                return Ok(Outcome::Converged);
            }
            if residual.is_nan() {
                return Ok(Outcome::Stalled("non-finite iterate".into()));
            }
            if h.len() >= 4 && h.windows(2).rev().take(3).all(|w| w[1] >= w[0]) {
                return Ok(Outcome::Stalled(format!("residual {residual:.3e} not decreasing for 3 iterations")));
            }
            if h.len() >= self.opts.max_iter {
                return Ok(Outcome::Stalled(format!("{} iterations, residual {residual:.3e}", h.len())));
            }
        }
    }
}

/// Solves a Pfaff system whose signal satisfies `dg^i ∧ dg^j = 0` by the
/// fixed point `v ↦ f(·, ϑ + ∫_{[p₀ ·]} v dg)` on a dyadic grid.
///
/// Segment integrals run along the straight segment from the base point with
/// the jet-aware interpolant of the current iterate. When the iteration
/// stalls the box is bisected along its longest axis; the half holding the
/// base point is solved first and the other half restarts from the shared
/// face. `p₀` must be a grid node.
pub fn solve_frobenius_wedge_null<T: Real>(p: &PfaffProblem<T>, opts: &WedgeNullOptions) -> Result<SolveResult<T>> {
    p.check_threshold()?;
    let (d, k) = (p.d(), p.k());
    let mut diagnostics = Diagnostics::default();
    if opts.precheck && k >= 2 {
        for ((i, j), report) in wedge_null_pairs(&p.g, &opts.jet)? {
            if !report.vanishes {
                return Err(Error::Involutivity {
                    reason: format!(
                        "dg^{i} ∧ dg^{j} does not vanish (final ratio {:.3e}, threshold {:.3e})",
                        report.final_ratio(),
                        report.threshold
                    ),
                    sample: p.p0.iter().map(|x| x.to_f64_lossy()).collect(),
                });
            }
            diagnostics.log.push(format!("wedge-null pair ({i}, {j}) passes, final ratio {:.3e}", report.final_ratio()));
        }
    }
    let grid = Grid::uniform(p.g.domain().clone(), opts.level)?;
    let p0_idx = grid.node_of(&p.p0).ok_or_else(|| Error::config("base point must be a grid node"))?;
    let n = grid.len();
    let gs = p.g.sample_values(&grid);
    let mut state = WedgeNull {
        p,
        grid: grid.clone(),
        opts,
        gs,
        theta: vec![T::zero(); n * d],
        v: vec![T::zero(); n * d * k],
        curv: vec![T::zero(); n * d * k * k],
        history: Vec::new(),
        patching: Vec::new(),
        iterations: 0,
    };
    let lo = vec![0; grid.dim()];
    let hi: Vec<usize> = (0..grid.dim()).map(|a| grid.cells(a)).collect();
    let base = grid.flat(&p0_idx);
    state.solve_box(lo, hi, base, p.theta0.clone(), 0)?;
    let WedgeNull {
        gs,
        mut theta,
        v,
        history,
        patching,
        iterations,
        ..
    } = state;
    theta[base * d..(base + 1) * d].copy_from_slice(&p.theta0);
    let field = jet_interpolant_sampled(&grid, theta.clone(), v, gs, &p.g, "theta")?;
    let residual = history.last().copied().unwrap_or(0.0);
    diagnostics.residual_history = history;
    diagnostics.patching = patching;
    if opts.diagnostics {
        pfaff_diagnostics(p, &grid, &p0_idx, &theta, &field, opts.level, opts.sub_level + 4, &mut diagnostics)?;
    }
    Ok(SolveResult {
        theta: field,
        grid,
        nodes: theta,
        iterations,
        residual,
        diagnostics,
    })
}

/// `q ↦ F(g(q), θ(q))` as a field.
fn composed_driver<T: Real>(p: &PfaffProblem<T>, theta: &Field<T>) -> Result<Field<T>> {
    let (d, k) = (p.d(), p.k());
    let (g, th, driver) = (p.g.clone(), theta.clone(), p.driver.clone());
    Field::closed(p.g.domain().clone(), (d, k), p.g.exponent(), "f_theta", move |q, out| {
        let mut u = [T::zero(); 8];
        let mut z = [T::zero(); 8];
        g.eval_unchecked(q, &mut u[..k]);
        th.eval_unchecked(q, &mut z[..d]);
        driver.eval(&u[..k], &z[..d], out);
    })
}

/// Germ remainder rate and the discrepancy with axis-path integration of `f(θ̄) dg`.
#[allow(clippy::too_many_arguments)]
fn pfaff_diagnostics<T: Real>(
    p: &PfaffProblem<T>,
    grid: &Grid<T>,
    p0_idx: &[usize],
    nodes: &[T],
    theta: &Field<T>,
    level: u32,
    sub_level: u32,
    diag: &mut Diagnostics,
) -> Result<()> {
    let vf = composed_driver(p, theta)?;
    let target = (p.beta() * (T::one() + p.gamma())).to_f64_lossy();
    let germ = g_derivative_check(
        theta,
        &vf,
        &p.g,
        &GDiffOptions {
            level: Some(level),
            target_rate: Some(target),
            max_scale: None,
        },
    )?;
    diag.germ = Some(germ);
    let order: Vec<usize> = (0..grid.dim()).collect();
    let path = integrate_nodes(&vf, &p.g, grid, p0_idx, &p.theta0, &order, sub_level);
    diag.path_residual = Some(sup_diff(&path, nodes));
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DiagonalOptions {
    pub level: u32,
    /// Order in which the sweep extends along the axes; `0..m` by default.
    pub axis_order: Option<Vec<usize>>,
    /// Involutivity residuals must stay below `tol (1 + |f|)`.
    pub involutivity_tol: f64,
    /// Half width of the sampled unknown range around `ϑ`.
    pub z_radius: f64,
    /// Lattice points per axis of the involutivity precheck.
    pub lattice: usize,
    /// Coarser solve, reversed sweep and germ diagnostics.
    pub diagnostics: bool,
}

impl Default for DiagonalOptions {
    fn default() -> Self {
        DiagonalOptions {
            level: 10,
            axis_order: None,
            involutivity_tol: 1e-8,
            z_radius: 2.0,
            lattice: 17,
            diagnostics: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvolutivityReport {
    /// Max of `|f^{l,i} ∂_{z^{l'}} f^{l,j} - f^{l,j} ∂_{z^{l'}} f^{l,i}|` (scaled).
    pub commutator: f64,
    /// Max of `|∂_{g^i} f^{l,j} - ∂_{g^j} f^{l,i}|` (scaled).
    pub symmetry: f64,
    pub tol: f64,
    /// Sample `(s, z)` with the largest scaled residual.
    pub worst: Vec<f64>,
    pub samples: usize,
    pub pass: bool,
}

/// Samples the involutivity residuals of a diagonal Pfaff system on a lattice
/// of `I^m x [ϑ - r, ϑ + r]`, each scaled by `1 + |f|` at the sample.
pub fn involutivity_check<T: Real>(p: &PfaffProblem<T>, opts: &DiagonalOptions) -> Result<InvolutivityReport> {
    let (d, k, m) = (p.d(), p.k(), p.g.dim());
    let axes = m + d;
    // Cap the lattice at about 2e5 samples.
    let per = (opts.lattice.max(3) as f64).min((2e5f64).powf(1.0 / axes as f64).floor()).max(3.0) as usize;
    let total = per.pow(axes as u32);
    let dom = p.g.domain();
    let coord = |a: usize, i: usize| -> T {
        let t = T::from_usize_lossy(i) / T::from_usize_lossy(per - 1);
        if a < m {
            dom.lower()[a] + dom.width(a) * t
        } else {
            let r = T::lit(opts.z_radius);
            p.theta0[a - m] - r + r * T::lit(2.0) * t
        }
    };
    let driver = p.driver.as_ref();
    let results: Vec<(f64, f64, usize)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut s = [T::zero(); 3];
            let mut z = vec![T::zero(); d];
            let mut rest = flat;
            for a in (0..axes).rev() {
                let c = coord(a, rest % per);
                rest /= per;
                if a < m {
                    s[a] = c;
                } else {
                    z[a - m] = c;
                }
            }
            let mut u = vec![T::zero(); k];
            p.g.eval_unchecked(&s[..m], &mut u);
            let mut f = vec![T::zero(); d * k];
            let mut du = vec![T::zero(); d * k * k];
            let mut dz = vec![T::zero(); d * k * d];
            driver.eval(&u, &z, &mut f);
            driver.d_u(&u, &z, &mut du);
            driver.d_z(&u, &z, &mut dz);
            let scale = 1.0 + max_abs(&f).to_f64_lossy();
            let (mut comm, mut sym): (f64, f64) = (0.0, 0.0);
            for l in 0..d {
                for i in 0..k {
                    for j in i + 1..k {
                        let (ci, cj) = (l * k + i, l * k + j);
                        for lp in 0..d {
                            let r = f[ci] * dz[cj * d + lp] - f[cj] * dz[ci * d + lp];
                            comm = comm.max(r.abs().to_f64_lossy() / scale);
                        }
                        let r = du[cj * k + i] - du[ci * k + j];
                        sym = sym.max(r.abs().to_f64_lossy() / scale);
                    }
                }
            }
            (comm, sym, flat)
        })
        .collect();
    let (mut comm, mut sym, mut worst_flat, mut worst_val) = (0.0f64, 0.0f64, 0usize, -1.0f64);
    for (c, s, flat) in results {
        comm = comm.max(c);
        sym = sym.max(s);
        if c.max(s) > worst_val {
            worst_val = c.max(s);
            worst_flat = flat;
        }
    }
    let mut worst = vec![0.0; axes];
    let mut rest = worst_flat;
    for a in (0..axes).rev() {
        worst[a] = coord(a, rest % per).to_f64_lossy();
        rest /= per;
    }
    Ok(InvolutivityReport {
        commutator: comm,
        symmetry: sym,
        tol: opts.involutivity_tol,
        worst,
        samples: total,
        pass: comm <= opts.involutivity_tol && sym <= opts.involutivity_tol,
    })
}

/// Per-axis tables `g^a(s^a)` of a diagonal signal, checking on a lattice
/// that component `a` does not move along the other axes.
fn diagonal_tables<T: Real>(p: &PfaffProblem<T>, grid: &Grid<T>) -> Result<Vec<Vec<T>>> {
    let m = grid.dim();
    if p.k() != m {
        return Err(Error::Precondition(format!(
            "a diagonal signal needs one component per axis, got {} components on {m} axes",
            p.k()
        )));
    }
    let probe = Grid::uniform(p.g.domain().clone(), 3)?;
    let vals = p.g.sample_values(&probe);
    let anchor = probe.node_of(&p.p0).unwrap_or_else(|| vec![0; m]);
    for f in 0..probe.len() {
        let idx = probe.multi(f);
        for a in 0..m {
            let mut j = anchor.clone();
            j[a] = idx[a];
            let (x, y) = (vals[f * m + a], vals[probe.flat(&j) * m + a]);
            if (x - y).abs() > T::lit(1e-12) * (T::one() + x.abs()) {
                return Err(Error::Precondition(format!(
                    "component {a} of g varies along another axis near {:?}",
                    probe.point(&idx).iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>()
                )));
            }
        }
    }
    Ok((0..m)
        .map(|a| {
            (0..grid.nodes(a))
                .map(|i| {
                    let mut q = p.p0.clone();
                    q[a] = grid.coord(a, i);
                    let mut out = vec![T::zero(); m];
                    p.g.eval_unchecked(&q, &mut out);
                    out[a]
                })
                .collect()
        })
        .collect())
}

/// Node values of the axis sweep: along each axis in `order`, every line
/// through the nodes reached so far is extended by a one-dimensional YDE.
fn sweep<T: Real>(p: &PfaffProblem<T>, grid: &Grid<T>, tables: &[Vec<T>], p0_idx: &[usize], order: &[usize]) -> Result<Vec<T>> {
    let (d, m) = (p.d(), grid.dim());
    let mut theta = vec![T::zero(); grid.len() * d];
    let f0 = grid.flat(p0_idx);
    theta[f0 * d..(f0 + 1) * d].copy_from_slice(&p.theta0);
    let mut known = vec![false; m];
    for &a in order {
        let n = grid.nodes(a);
        let stride: usize = (a + 1..m).map(|b| grid.nodes(b)).product();
        let i0 = p0_idx[a];
        // Start nodes: known axes free, the others pinned at p₀.
        let mut starts = vec![Vec::<usize>::new()];
        for b in 0..m {
            let choices: Vec<usize> = if known[b] { (0..grid.nodes(b)).collect() } else { vec![p0_idx[b]] };
            starts = starts
                .into_iter()
                .flat_map(|s| {
                    choices.iter().map(move |&c| {
                        let mut t = s.clone();
                        t.push(c);
                        t
                    })
                })
                .collect();
        }
        let th = &theta;
        let lines: Vec<(usize, Vec<T>)> = starts
            .par_iter()
            .map(|idx| -> Result<(usize, Vec<T>)> {
                let start = grid.flat(idx);
                let mut us = vec![T::zero(); n * m];
                for i in 0..n {
                    for b in 0..m {
                        us[i * m + b] = tables[b][if b == a { i } else { idx[b] }];
                    }
                }
                let line = solve_line(p.driver.as_ref(), a, &us, &tables[a], i0, &th[start * d..(start + 1) * d])?;
                Ok((start - i0 * stride, line))
            })
            .collect::<Result<_>>()?;
        for (base, line) in lines {
            for i in 0..n {
                let at = (base + i * stride) * d;
                theta[at..at + d].copy_from_slice(&line[i * d..(i + 1) * d]);
            }
        }
        known[a] = true;
    }
    Ok(theta)
}

fn node_g<T: Real>(grid: &Grid<T>, tables: &[Vec<T>]) -> Vec<T> {
    let m = grid.dim();
    let mut out = vec![T::zero(); grid.len() * m];
    let mut idx = vec![0usize; m];
    for o in out.chunks_mut(m) {
        for a in 0..m {
            o[a] = tables[a][idx[a]];
        }
        for a in (0..m).rev() {
            idx[a] += 1;
            if idx[a] < grid.nodes(a) {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

/// Solves a Pfaff system with diagonal signal `g = (g^1(s^1), ..., g^m(s^m))`
/// by sweeping one-dimensional YDEs axis after axis from `p₀`.
///
/// Involutivity is checked first on a sample lattice. Diagnostics hold the
/// difference with the solution one level coarser, the discrepancy with the
/// reversed sweep order, the per-axis trapezoid defects of the node values
/// and the germ remainder table. `p₀` must be a grid node.
pub fn solve_frobenius_diagonal<T: Real>(p: &PfaffProblem<T>, opts: &DiagonalOptions) -> Result<SolveResult<T>> {
    p.check_threshold()?;
    let m = p.g.dim();
    let grid = Grid::uniform(p.g.domain().clone(), opts.level)?;
    let tables = diagonal_tables(p, &grid)?;
    let inv = involutivity_check(p, opts)?;
    if !inv.pass {
        return Err(Error::Involutivity {
            reason: format!(
                "residuals {:.3e} (commutator) and {:.3e} (symmetry) exceed {:.1e}",
                inv.commutator, inv.symmetry, inv.tol
            ),
            sample: inv.worst,
        });
    }
    let order: Vec<usize> = opts.axis_order.clone().unwrap_or_else(|| (0..m).collect());
    let mut sorted = order.clone();
    sorted.sort_unstable();
    if sorted != (0..m).collect::<Vec<_>>() {
        return Err(Error::config(format!("axis order {order:?} is not a permutation of 0..{m}")));
    }
    let p0_idx = grid.node_of(&p.p0).ok_or_else(|| Error::config("base point must be a grid node"))?;
    let theta = sweep(p, &grid, &tables, &p0_idx, &order)?;
    let (d, k) = (p.d(), p.k());
    let gs = node_g(&grid, &tables);
    let mut v = vec![T::zero(); grid.len() * d * k];
    v.par_chunks_mut(d * k).enumerate().for_each(|(f, out)| {
        p.driver.eval(&gs[f * k..(f + 1) * k], &theta[f * d..(f + 1) * d], out);
    });

    let mut diagnostics = Diagnostics::default();
    diagnostics.log.push(format!(
        "involutivity residuals {:.3e} / {:.3e} on {} samples",
        inv.commutator, inv.symmetry, inv.samples
    ));
    diagnostics.axis_defects = axis_defects(&grid, &theta, &v, &gs, d, k);
    if opts.diagnostics {
        if opts.level >= 1 {
            let coarse_grid = Grid::uniform(p.g.domain().clone(), opts.level - 1)?;
            if let Some(c0) = coarse_grid.node_of(&p.p0) {
                let ct = diagonal_tables(p, &coarse_grid)?;
                let coarse = sweep(p, &coarse_grid, &ct, &c0, &order)?;
                let fine: Vec<T> = (0..coarse_grid.len())
                    .flat_map(|f| {
                        let idx: Vec<usize> = coarse_grid.multi(f).iter().map(|i| 2 * i).collect();
                        let at = grid.flat(&idx);
                        theta[at * d..(at + 1) * d].to_vec()
                    })
                    .collect();
                diagnostics.error_estimate = Some(sup_diff(&fine, &coarse));
            }
        }
        let reversed: Vec<usize> = order.iter().rev().copied().collect();
        let other = sweep(p, &grid, &tables, &p0_idx, &reversed)?;
        diagnostics.path_residual = Some(sup_diff(&theta, &other));
    }
    let field = jet_interpolant_sampled(&grid, theta.clone(), v, gs, &p.g, "theta")?;
    if opts.diagnostics {
        let vf = composed_driver(p, &field)?;
        let target = (p.beta() * (T::one() + p.gamma())).to_f64_lossy();
        let germ = g_derivative_check(
            &field,
            &vf,
            &p.g,
            &GDiffOptions {
                level: Some(opts.level.min(match m {
                    1 => 14,
                    2 => 8,
                    _ => 5,
                })),
                target_rate: Some(target),
                max_scale: None,
            },
        )?;
        diagnostics.germ = Some(germ);
    }
    Ok(SolveResult {
        theta: field,
        grid,
        nodes: theta,
        iterations: 1,
        residual: 0.0,
        diagnostics,
    })
}

/// Per axis `a`, the sup over grid edges of `|δθ - ½(f^a_p + f^a_q) δg^a|`.
fn axis_defects<T: Real>(grid: &Grid<T>, theta: &[T], v: &[T], gs: &[T], d: usize, k: usize) -> Vec<f64> {
    let m = grid.dim();
    (0..m)
        .map(|a| {
            let n = grid.nodes(a);
            let stride: usize = (a + 1..m).map(|b| grid.nodes(b)).product();
            let outer = grid.len() / (n * stride);
            // Lines along axis `a` start at `o * n * stride + inner`.
            (0..outer * stride)
                .into_par_iter()
                .map(|line| {
                    let start = (line / stride) * n * stride + line % stride;
                    let mut worst: f64 = 0.0;
                    for i in 0..n - 1 {
                        let f = start + i * stride;
                        let q = f + stride;
                        let dg = gs[q * k + a] - gs[f * k + a];
                        for r in 0..d {
                            let avg = T::lit(0.5) * (v[f * d * k + r * k + a] + v[q * d * k + r * k + a]);
                            worst = worst.max((theta[q * d + r] - theta[f * d + r] - avg * dg).abs().to_f64_lossy());
                        }
                    }
                    worst
                })
                .reduce(|| 0.0, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::geometry::Domain;
    use crate::driver::{constant, linear_z, FnDriver};
    use crate::signals::{gen_diagonal, mollify, SignalSpec};

    fn weierstrass(beta: f64, terms: u32, seed: u64) -> Field<f64> {
        SignalSpec::Weierstrass1d { beta, terms, seed }.build_unit().unwrap()
    }

    fn node_error(r: &SolveResult<f64>, exact: impl Fn(&[f64]) -> f64) -> f64 {
        (0..r.grid.len())
            .map(|f| (r.nodes[f] - exact(&r.grid.point_flat(f))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_driver_reproduces_increments() {
        let g = weierstrass(0.8, 8, 2);
        let p = PfaffProblem::new(g.clone(), constant(1, 1, (1, 1), vec![1.5]).unwrap(), vec![0.0], vec![0.25]).unwrap();
        let r = solve_frobenius_wedge_null(&p, &WedgeNullOptions { level: 8, ..Default::default() }).unwrap();
        let g0 = g.eval_scalar(&[0.0]).unwrap();
        let err = node_error(&r, |q| 0.25 + 1.5 * (g.eval_scalar(q).unwrap() - g0));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn smooth_wedge_null_signal_gives_exponential() {
        let g = Field::scalar_fn(Domain::unit(2), 1.0, "s", |p: &[f64]| (p[0] + p[1]).sin()).unwrap();
        let p = PfaffProblem::new(g.clone(), linear_z(1, 1), vec![0.0, 0.0], vec![1.0]).unwrap();
        let r = solve_frobenius_wedge_null(&p, &WedgeNullOptions { level: 6, ..Default::default() }).unwrap();
        let err = node_error(&r, |q| (q[0] + q[1]).sin().exp());
        assert!(err < 1e-6, "{err}");
        assert!(r.diagnostics.path_residual.unwrap() < 1e-4);
        assert!(r.diagnostics.patching.is_empty());
    }

    #[test]
    fn fixed_point_does_not_depend_on_the_start() {
        let g = weierstrass(0.9, 10, 5);
        let p = PfaffProblem::new(g, linear_z(1, 1), vec![0.0], vec![1.0]).unwrap();
        let opts = WedgeNullOptions { level: 9, tol: 1e-10, diagnostics: false, ..Default::default() };
        let a = solve_frobenius_wedge_null(&p, &opts).unwrap();
        let b = solve_frobenius_wedge_null(&p, &WedgeNullOptions { init: InitialIterate::Zero, ..opts.clone() }).unwrap();
        assert!(a.sup_distance(&b).unwrap() < 10.0 * opts.tol);
    }

    #[test]
    fn mollified_solutions_approach_the_rough_one() {
        let g = weierstrass(0.9, 10, 7);
        let opts = WedgeNullOptions { level: 8, diagnostics: false, ..Default::default() };
        let solve = |g: Field<f64>| {
            let p = PfaffProblem::new(g, linear_z(1, 1), vec![0.0], vec![1.0]).unwrap();
            solve_frobenius_wedge_null(&p, &opts).unwrap()
        };
        let rough = solve(g.clone());
        let dists: Vec<f64> = [4, 5, 6, 7]
            .iter()
            .map(|&j| {
                let gm = mollify(&g, 2f64.powi(-j), 10).unwrap();
                solve(gm).sup_distance(&rough).unwrap()
            })
            .collect();
        for w in dists.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{dists:?}");
        }
        assert!(dists[3] < 0.5 * dists[0], "{dists:?}");
    }

    #[test]
    fn non_wedge_null_signal_is_rejected() {
        let g = Field::closed(Domain::unit(2), (2, 1), 1.0, "id", |p: &[f64], o: &mut [f64]| {
            o[0] = p[0];
            o[1] = p[1];
        })
        .unwrap();
        let p = PfaffProblem::new(g, linear_z(2, 1), vec![0.0, 0.0], vec![1.0]).unwrap();
        let r = solve_frobenius_wedge_null(&p, &WedgeNullOptions { level: 5, ..Default::default() });
        assert!(matches!(r, Err(Error::Involutivity { .. })), "{r:?}");
    }

    #[test]
    fn stalled_iteration_is_patched_by_bisection() {
        // Picard residuals of a strongly growing linear equation rise before
        // they fall, which the stall detector sees on the full interval.
        let g = Field::scalar_fn(Domain::unit(1), 1.0, "s", |p: &[f64]| 30.0 * p[0]).unwrap();
        let p = PfaffProblem::new(g, linear_z(1, 1), vec![0.0], vec![1.0]).unwrap();
        let opts = WedgeNullOptions { level: 7, diagnostics: false, ..Default::default() };
        let r = solve_frobenius_wedge_null(&p, &opts).unwrap();
        assert!(!r.diagnostics.patching.is_empty());
        let rel = (0..r.grid.len())
            .map(|f| {
                let w = (30.0 * r.grid.point_flat(f)[0]).exp();
                (r.nodes[f] - w).abs() / w
            })
            .fold(0.0, f64::max);
        assert!(rel < 1e-3, "{rel}");
        let capped = solve_frobenius_wedge_null(&p, &WedgeNullOptions { max_depth: 0, ..opts });
        assert!(matches!(capped, Err(Error::Nonconvergence { .. })), "{capped:?}");
    }

    fn ident2() -> Field<f64> {
        Field::closed(Domain::unit(2), (2, 1), 1.0, "id", |p: &[f64], o: &mut [f64]| {
            o[0] = p[0];
            o[1] = p[1];
        })
        .unwrap()
    }

    #[test]
    fn diagonal_constants_are_exact() {
        let g = gen_diagonal(&[weierstrass(0.8, 8, 1), weierstrass(0.7, 8, 2)]).unwrap();
        let drv = constant(2, 1, (1, 2), vec![2.0, -1.0]).unwrap();
        let p = PfaffProblem::new(g.clone(), drv, vec![0.0, 0.0], vec![0.5]).unwrap();
        let r = solve_frobenius_diagonal(&p, &DiagonalOptions { level: 6, ..Default::default() }).unwrap();
        let g0 = g.eval(&[0.0, 0.0]).unwrap();
        let err = node_error(&r, |q| {
            let v = g.eval(q).unwrap();
            0.5 + 2.0 * (v[0] - g0[0]) - (v[1] - g0[1])
        });
        assert!(err < 1e-12, "{err}");
        assert!(r.diagnostics.path_residual.unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_exponential_converges_at_second_order() {
        let p = PfaffProblem::new(ident2(), linear_z(2, 1), vec![0.0, 0.0], vec![1.0]).unwrap();
        let errs: Vec<f64> = [6u32, 8]
            .iter()
            .map(|&level| {
                let r = solve_frobenius_diagonal(&p, &DiagonalOptions { level, diagnostics: false, ..Default::default() }).unwrap();
                (r.theta.eval_scalar(&[1.0, 1.0]).unwrap() - 2f64.exp()).abs()
            })
            .collect();
        let rate = (errs[0] / errs[1]).log2() / 2.0;
        assert!(errs[1] < 5e-5 && rate > 1.8, "{errs:?} {rate}");
    }

    #[test]
    fn rough_diagonal_sweep_is_order_independent() {
        let (w1, w2) = (weierstrass(0.9, 4, 1), weierstrass(0.9, 4, 2));
        let g = gen_diagonal(&[w1.clone(), w2.clone()]).unwrap();
        let p = PfaffProblem::new(g, linear_z(2, 1), vec![0.0, 0.0], vec![1.0]).unwrap();
        let (a0, b0) = (w1.eval_scalar(&[0.0]).unwrap(), w2.eval_scalar(&[0.0]).unwrap());
        let exact = |q: &[f64]| (w1.eval_scalar(&q[..1]).unwrap() - a0 + w2.eval_scalar(&q[1..]).unwrap() - b0).exp();
        let errs: Vec<f64> = [8u32, 9]
            .iter()
            .map(|&level| {
                let r = solve_frobenius_diagonal(&p, &DiagonalOptions { level, ..Default::default() }).unwrap();
                assert!(r.diagnostics.path_residual.unwrap() < 1e-10);
                assert!(r.diagnostics.axis_defects.iter().all(|&x| x < 1e-10));
                node_error(&r, exact)
            })
            .collect();
        // Trapezoid sweeps are second order once the top frequency is resolved.
        assert!(errs[1] < 0.3 * errs[0] && errs[1] < 5e-3, "{errs:?}");
    }

    #[test]
    fn non_involutive_driver_is_rejected() {
        // F = (z, z²): the commutator z·2z - z²·1 does not vanish.
        let drv = FnDriver::<f64>::new(
            "z_zz",
            2,
            1,
            (1, 2),
            |_, z, o| {
                o[0] = z[0];
                o[1] = z[0] * z[0];
            },
            |_, _, o| o.iter_mut().for_each(|x| *x = 0.0),
            |_, z, o| {
                o[0] = 1.0;
                o[1] = 2.0 * z[0];
            },
        )
        .into_ref();
        let p = PfaffProblem::new(ident2(), drv, vec![0.0, 0.0], vec![1.0]).unwrap();
        let r = solve_frobenius_diagonal(&p, &DiagonalOptions { level: 5, ..Default::default() });
        assert!(matches!(r, Err(Error::Involutivity { .. })), "{r:?}");
        let rep = involutivity_check(&p, &DiagonalOptions::default()).unwrap();
        assert!(!rep.pass && rep.commutator > 0.1);
    }

    #[test]
    fn non_diagonal_signal_is_a_precondition_error() {
        let g = Field::closed(Domain::unit(2), (2, 1), 1.0, "mixed", |p: &[f64], o: &mut [f64]| {
            o[0] = p[0] + p[1];
            o[1] = p[1];
        })
        .unwrap();
        let p = PfaffProblem::new(g, linear_z(2, 1), vec![0.0, 0.0], vec![1.0]).unwrap();
        let r = solve_frobenius_diagonal(&p, &DiagonalOptions { level: 5, ..Default::default() });
        assert!(matches!(r, Err(Error::Precondition(_))), "{r:?}");
    }
}
