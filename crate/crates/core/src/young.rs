//! Young integrals `∫ f dg` on intervals, segments and rectangle boundaries.
//!
//! Integrals are limits of germ sums over dyadic partitions of the
//! parametrising interval. The default germ is the symmetric one
//! `½(f_a + f_b) δg_ab`; it differs from the left-point germ `f_a δg_ab` by
//! `½ δf δg`, a term of order `|b - a|^{α+β}`, so both have the same limit,
//! but the symmetric sums telescope exactly for `∫ f dg + ∫ g df` and carry
//! no first order bias on smooth data.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::field::Field;
use crate::calculus::geometry::{Grid, Rectangle, Segment};
use crate::error::{Error, Result};
use crate::rates::{fit_power_law, PowerFit};
use crate::scalar::Real;

/// Germ used on each partition cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `½(f_a + f_b) δg_ab`.
    #[default]
    Trapezoid,
    /// `f_a δg_ab`.
    LeftPoint,
}

#[derive(Clone, Debug)]
pub struct YoungOptions {
    pub max_level: u32,
    pub min_level: u32,
    /// Relative stopping tolerance between successive levels. Zero runs
    /// every level up to `max_level` and reports the result as converged.
    pub tol: f64,
    pub rule: Rule,
}

impl Default for YoungOptions {
    fn default() -> Self {
        YoungOptions {
            max_level: 16,
            min_level: 3,
            tol: 1e-9,
            rule: Rule::Trapezoid,
        }
    }
}

impl YoungOptions {
    /// Evaluates at exactly one level, without a refinement table.
    pub fn fixed(level: u32) -> Self {
        YoungOptions {
            max_level: level,
            min_level: level,
            tol: 0.0,
            rule: Rule::Trapezoid,
        }
    }

    pub fn with_rule(mut self, rule: Rule) -> Self {
        self.rule = rule;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelValue {
    pub level: u32,
    pub value: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralResult<T> {
    pub value: Vec<T>,
    pub level: u32,
    pub table: Vec<LevelValue>,
    /// Norm of the last refinement difference.
    pub error: f64,
    /// `|∫ - f_a δg_ab|` (zero germ for closed boundaries).
    pub germ_remainder: f64,
    /// `germ_remainder / len^{α+β}` with `len` the length (or diameter).
    pub germ_ratio: f64,
    pub converged: bool,
    pub warning: Option<String>,
}

impl<T: Real> IntegralResult<T> {
    pub fn scalar(&self) -> T {
        self.value[0]
    }
}

/// Fails unless the claimed exponents satisfy `α + β > 1`.
pub fn check_young_exponents<T: Real>(alpha: T, beta: T) -> Result<()> {
    if alpha + beta > T::one() {
        Ok(())
    } else {
        Err(Error::regularity(format!(
            "Young integration needs α + β > 1, got α = {alpha}, β = {beta}"
        )))
    }
}

fn check_shapes<T: Real>(f: &Field<T>, g: &Field<T>) -> Result<()> {
    if g.cols() != 1 {
        return Err(Error::shape("integrator must be vector valued"));
    }
    if f.cols() != g.rows() && !(f.ncomp() == 1 && g.rows() == 1) {
        return Err(Error::shape(format!(
            "integrand {}x{} cannot be contracted with a {}-vector",
            f.rows(),
            f.cols(),
            g.rows()
        )));
    }
    if f.dim() != g.dim() {
        return Err(Error::shape("integrand and integrator live in different dimensions"));
    }
    Ok(())
}

/// Samples of `f` and `g` along one oriented segment, refined dyadically.
struct Sweep<'a, T> {
    f: &'a Field<T>,
    g: &'a Field<T>,
    p: Vec<T>,
    dir: Vec<T>,
    fv: Vec<T>,
    gv: Vec<T>,
    level: u32,
}

impl<'a, T: Real> Sweep<'a, T> {
    fn new(f: &'a Field<T>, g: &'a Field<T>, seg: &Segment<T>, level: u32) -> Self {
        let dir: Vec<T> = seg.p.iter().zip(&seg.q).map(|(&a, &b)| b - a).collect();
        let mut s = Sweep {
            f,
            g,
            p: seg.p.clone(),
            dir,
            fv: Vec::new(),
            gv: Vec::new(),
            level,
        };
        let n = 1usize << level;
        let (nf, ng) = (f.ncomp(), g.ncomp());
        s.fv = vec![T::zero(); (n + 1) * nf];
        s.gv = vec![T::zero(); (n + 1) * ng];
        let mut x = vec![T::zero(); s.p.len()];
        for i in 0..=n {
            s.point(i, n, &mut x);
            f.eval_unchecked(&x, &mut s.fv[i * nf..(i + 1) * nf]);
            g.eval_unchecked(&x, &mut s.gv[i * ng..(i + 1) * ng]);
        }
        s
    }

    /// Point `i / n` of the way along the segment; the endpoint is exact.
    #[inline]
    fn point(&self, i: usize, n: usize, x: &mut [T]) {
        if i == n {
            for ((xi, &p), &d) in x.iter_mut().zip(&self.p).zip(&self.dir) {
                *xi = p + d;
            }
            return;
        }
        let t = T::from_usize_lossy(i) / T::from_usize_lossy(n);
        for ((xi, &p), &d) in x.iter_mut().zip(&self.p).zip(&self.dir) {
            *xi = p + t * d;
        }
    }

    fn refine(&mut self) {
        let n = 1usize << self.level;
        let (nf, ng) = (self.f.ncomp(), self.g.ncomp());
        let mut fv = vec![T::zero(); (2 * n + 1) * nf];
        let mut gv = vec![T::zero(); (2 * n + 1) * ng];
        let mut x = vec![T::zero(); self.p.len()];
        for i in 0..=n {
            fv[2 * i * nf..(2 * i + 1) * nf].copy_from_slice(&self.fv[i * nf..(i + 1) * nf]);
            gv[2 * i * ng..(2 * i + 1) * ng].copy_from_slice(&self.gv[i * ng..(i + 1) * ng]);
            if i < n {
                let j = 2 * i + 1;
                self.point(j, 2 * n, &mut x);
                self.f.eval_unchecked(&x, &mut fv[j * nf..(j + 1) * nf]);
                self.g.eval_unchecked(&x, &mut gv[j * ng..(j + 1) * ng]);
            }
        }
        self.fv = fv;
        self.gv = gv;
        self.level += 1;
    }

    /// Germ sum at the current level, cells in ascending order.
    fn sum(&self, rule: Rule, out: &mut [T]) {
        germ_sum(&self.fv, &self.gv, self.g.ncomp(), rule, out);
    }
}

/// Germ sum over consecutive samples; `fv` holds `d x k` matrices and `gv`
/// `k`-vectors, one per node.
pub(crate) fn germ_sum<T: Real>(fv: &[T], gv: &[T], k: usize, rule: Rule, out: &mut [T]) {
    let d = out.len();
    let nf = d * k;
    let n = gv.len() / k - 1;
    out.iter_mut().for_each(|o| *o = T::zero());
    let half = T::lit(0.5);
    for i in 0..n {
        let f0 = &fv[i * nf..(i + 1) * nf];
        let f1 = &fv[(i + 1) * nf..(i + 2) * nf];
        let g0 = &gv[i * k..(i + 1) * k];
        let g1 = &gv[(i + 1) * k..(i + 2) * k];
        for r in 0..d {
            let mut s = T::zero();
            for c in 0..k {
                let dg = g1[c] - g0[c];
                let fr = match rule {
                    Rule::Trapezoid => half * (f0[r * k + c] + f1[r * k + c]),
                    Rule::LeftPoint => f0[r * k + c],
                };
                s = s + fr * dg;
            }
            out[r] = out[r] + s;
        }
    }
}

fn vnorm<T: Real>(v: &[T]) -> f64 {
    v.iter()
        .map(|x| x.to_f64_lossy().powi(2))
        .sum::<f64>()
        .sqrt()
}

fn to_f64s<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

/// Refines a signed family of segments jointly until the total converges.
fn integrate_chain<T: Real>(
    f: &Field<T>,
    g: &Field<T>,
    chain: &[(Segment<T>, bool)],
    opts: &YoungOptions,
) -> (Vec<T>, u32, Vec<LevelValue>, f64, bool, Option<String>) {
    let d = f.rows();
    let start = opts.min_level.min(opts.max_level);
    let mut sweeps: Vec<Sweep<T>> = chain
        .par_iter()
        .map(|(s, _)| Sweep::new(f, g, s, start))
        .collect();
    let total = |sweeps: &[Sweep<T>]| {
        let parts: Vec<Vec<T>> = sweeps
            .par_iter()
            .map(|s| {
                let mut o = vec![T::zero(); d];
                s.sum(opts.rule, &mut o);
                o
            })
            .collect();
        let mut acc = vec![T::zero(); d];
        for (part, (_, neg)) in parts.iter().zip(chain) {
            for (a, &x) in acc.iter_mut().zip(part) {
                *a = if *neg { *a - x } else { *a + x };
            }
        }
        acc
    };
    let mut value = total(&sweeps);
    let mut table = vec![LevelValue {
        level: start,
        value: to_f64s(&value),
    }];
    let mut diffs: Vec<f64> = Vec::new();
    let mut converged = start == opts.max_level || opts.tol == 0.0;
    let mut level = start;
    while level < opts.max_level {
        sweeps.par_iter_mut().for_each(|s| s.refine());
        level += 1;
        let next = total(&sweeps);
        let diff: Vec<T> = next.iter().zip(&value).map(|(&a, &b)| a - b).collect();
        let dn = vnorm(&diff);
        diffs.push(dn);
        value = next;
        table.push(LevelValue {
            level,
            value: to_f64s(&value),
        });
        if dn <= opts.tol * vnorm(&value) || dn == 0.0 {
            converged = true;
            break;
        }
    }
    let error = diffs.last().copied().unwrap_or(0.0);
    let stalled = diffs.len() >= 4 && {
        let w = &diffs[diffs.len() - 4..];
        w[1] >= w[0] && w[2] >= w[1] && w[3] >= w[2] && w[3] > 0.0
    };
    let warning = if stalled {
        Some("refinement differences did not decrease over the last 3 levels".to_string())
    } else if !converged {
        Some(format!("tolerance not reached by level {}", opts.max_level))
    } else {
        None
    };
    (value, level, table, error, converged, warning)
}

/// `∫_{[pq]} f dg` for the affine parametrisation of the segment.
pub fn young_integral_segment<T: Real>(
    f: &Field<T>,
    g: &Field<T>,
    seg: &Segment<T>,
    opts: &YoungOptions,
) -> Result<IntegralResult<T>> {
    check_young_exponents(f.exponent(), g.exponent())?;
    check_shapes(f, g)?;
    f.domain().check(&seg.p)?;
    f.domain().check(&seg.q)?;
    let (value, level, table, error, converged, warning) =
        integrate_chain(f, g, &[(seg.clone(), false)], opts);
    let fa = f.eval(&seg.p)?;
    let mut dg = g.eval(&seg.q)?;
    for (x, y) in dg.iter_mut().zip(g.eval(&seg.p)?) {
        *x = *x - y;
    }
    let k = g.rows();
    let mut germ = vec![T::zero(); f.rows()];
    crate::calculus::field::matmul_into(&fa, &dg, f.rows(), k, 1, &mut germ);
    let rem: Vec<T> = value.iter().zip(&germ).map(|(&a, &b)| a - b).collect();
    let germ_remainder = vnorm(&rem);
    let len = seg.len().to_f64_lossy();
    let e = (f.exponent() + g.exponent()).to_f64_lossy();
    Ok(IntegralResult {
        value,
        level,
        table,
        error,
        germ_remainder,
        germ_ratio: if len > 0.0 { germ_remainder / len.powf(e) } else { 0.0 },
        converged,
        warning,
    })
}

/// `∫_a^b f dg` for fields on a one dimensional domain.
pub fn young_integral_1d<T: Real>(
    f: &Field<T>,
    g: &Field<T>,
    a: T,
    b: T,
    opts: &YoungOptions,
) -> Result<IntegralResult<T>> {
    if f.dim() != 1 || g.dim() != 1 {
        return Err(Error::shape("young_integral_1d needs one dimensional fields"));
    }
    young_integral_segment(f, g, &Segment::new(vec![a], vec![b])?, opts)
}

/// `∫_{∂Q} f dg`, the sum of the four oriented edge integrals.
pub fn boundary_integral<T: Real>(
    f: &Field<T>,
    g: &Field<T>,
    q: &Rectangle<T>,
    opts: &YoungOptions,
) -> Result<IntegralResult<T>> {
    check_young_exponents(f.exponent(), g.exponent())?;
    check_shapes(f, g)?;
    if !q.inside(f.domain()) {
        return Err(Error::Domain {
            point: q.base.iter().map(|x| x.to_f64_lossy()).collect(),
        });
    }
    let chain: Vec<(Segment<T>, bool)> = q.edges().into_iter().map(|s| (s, false)).collect();
    let (value, level, table, error, converged, warning) = integrate_chain(f, g, &chain, opts);
    let germ_remainder = vnorm(&value);
    let diam = q.diam().to_f64_lossy();
    let e = (f.exponent() + g.exponent()).to_f64_lossy();
    Ok(IntegralResult {
        value,
        level,
        table,
        error,
        germ_remainder,
        germ_ratio: germ_remainder / diam.powf(e),
        converged,
        warning,
    })
}

/// Fixed-level segment integral without bookkeeping, for inner loops.
/// Points must lie in the domain; shapes are not rechecked.
pub fn segment_sum<T: Real>(f: &Field<T>, g: &Field<T>, p: &[T], q: &[T], level: u32, rule: Rule, out: &mut [T]) {
    let seg = Segment {
        p: p.to_vec(),
        q: q.to_vec(),
    };
    Sweep::new(f, g, &seg, level).sum(rule, out);
}

/// Fixed-level boundary integral; each edge uses `2^level` cells.
pub fn boundary_sum<T: Real>(f: &Field<T>, g: &Field<T>, q: &Rectangle<T>, level: u32, rule: Rule) -> Vec<T> {
    let d = f.rows();
    let mut acc = vec![T::zero(); d];
    let mut part = vec![T::zero(); d];
    for e in q.edges() {
        segment_sum(f, g, &e.p, &e.q, level, rule, &mut part);
        for (a, &x) in acc.iter_mut().zip(&part) {
            *a = *a + x;
        }
    }
    acc
}

/// Objects with a canonical dyadic subdivision.
pub trait Dyadic<T>: Sized + Clone + Send + Sync {
    fn children(&self) -> Vec<Self>;
    fn diameter(&self) -> T;
}

impl<T: Real> Dyadic<T> for Segment<T> {
    fn children(&self) -> Vec<Self> {
        self.halves().to_vec()
    }
    fn diameter(&self) -> T {
        self.len()
    }
}

impl<T: Real> Dyadic<T> for Rectangle<T> {
    fn children(&self) -> Vec<Self> {
        self.quarters().to_vec()
    }
    fn diameter(&self) -> T {
        self.diam()
    }
}

#[derive(Clone, Debug)]
pub struct AdditivityOptions {
    /// Deepest subdivision level (at least 2).
    pub depth: u32,
    /// Power of the diameter in the tested ratio (1 or 2).
    pub k: u32,
    /// Threshold on the finest level ratio.
    pub tol: f64,
    /// Ratios at or below this are treated as exact zeros.
    pub noise_floor: f64,
    /// Minimal fitted decay exponent of the ratio in the diameter.
    pub min_decay: f64,
}

impl Default for AdditivityOptions {
    fn default() -> Self {
        AdditivityOptions {
            depth: 5,
            k: 2,
            tol: 1e-1,
            noise_floor: 1e-10,
            min_decay: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdditivityLevel {
    pub level: u32,
    pub diam: f64,
    pub objects: usize,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdditivityReport {
    pub k: u32,
    pub levels: Vec<AdditivityLevel>,
    pub max_ratio: f64,
    pub final_ratio: f64,
    /// Fitted `s` in `ratio ∝ diam^s` over the finer half of the levels;
    /// positive means decay.
    pub decay_exponent: Option<f64>,
    pub fit_residual: Option<f64>,
    pub threshold: f64,
    pub vanishes: bool,
}

impl AdditivityReport {
    /// Recomputes the verdict against a new finest-level threshold.
    pub fn with_threshold(mut self, threshold: f64, opts: &AdditivityOptions) -> Self {
        self.threshold = threshold;
        self.vanishes = verdict(&self, opts);
        self
    }
}

fn verdict(r: &AdditivityReport, opts: &AdditivityOptions) -> bool {
    if r.max_ratio <= opts.noise_floor {
        return true;
    }
    let decays = r.decay_exponent.is_some_and(|s| s > opts.min_decay)
        || r.final_ratio <= opts.noise_floor;
    decays && r.final_ratio <= r.threshold
}

/// Values of `F` on every dyadic sub-object of `q` down to `depth`:
/// `table[level]` holds `(diameter, value)` pairs in subdivision order.
pub type DyadicTable = Vec<Vec<(f64, Vec<f64>)>>;

pub fn dyadic_table<T, O, F>(func: F, q: &O, depth: u32) -> Result<DyadicTable>
where
    T: Real,
    O: Dyadic<T>,
    F: Fn(&O) -> Result<Vec<T>> + Sync,
{
    let mut objects = vec![q.clone()];
    let mut table = Vec::with_capacity(depth as usize + 1);
    for level in 0..=depth {
        let vals: Vec<Result<(f64, Vec<f64>)>> = objects
            .par_iter()
            .map(|o| Ok((o.diameter().to_f64_lossy(), to_f64s(&func(o)?))))
            .collect();
        table.push(vals.into_iter().collect::<Result<Vec<_>>>()?);
        if level < depth {
            objects = objects.iter().flat_map(|o| o.children()).collect();
        }
    }
    Ok(table)
}

/// Builds the additivity report of one scalar reduction of the table values.
pub fn additivity_report<S>(table: &DyadicTable, reduce: S, opts: &AdditivityOptions) -> AdditivityReport
where
    S: Fn(&[f64]) -> f64,
{
    let levels: Vec<AdditivityLevel> = table
        .iter()
        .enumerate()
        .map(|(level, row)| {
            let mut max_ratio: f64 = 0.0;
            let mut diam: f64 = 0.0;
            for (d, v) in row {
                max_ratio = max_ratio.max(reduce(v) / d.powi(opts.k as i32));
                diam = diam.max(*d);
            }
            AdditivityLevel {
                level: level as u32,
                diam,
                objects: row.len(),
                max_ratio,
            }
        })
        .collect();
    // The decay is read off the finer half of the levels: coarse levels are
    // dominated by under-resolved edges and by cancellations of periodic data.
    let first = (levels.len() / 2).min(levels.len().saturating_sub(3));
    let (xs, ys): (Vec<f64>, Vec<f64>) = levels[first..]
        .iter()
        .filter(|l| l.max_ratio > opts.noise_floor)
        .map(|l| (l.diam, l.max_ratio))
        .unzip();
    let fit = fit_power_law(&xs, &ys);
    let mut report = AdditivityReport {
        k: opts.k,
        max_ratio: levels.iter().map(|l| l.max_ratio).fold(0.0, f64::max),
        final_ratio: levels.last().map_or(0.0, |l| l.max_ratio),
        levels,
        decay_exponent: fit.as_ref().map(|f| f.exponent),
        fit_residual: fit.as_ref().map(|f| f.residual),
        threshold: opts.tol,
        vanishes: false,
    };
    report.vanishes = verdict(&report, opts);
    report
}

pub(crate) fn validate_additivity(opts: &AdditivityOptions) -> Result<()> {
    if opts.depth < 2 {
        return Err(Error::config("additivity depth must be at least 2"));
    }
    if !(1..=2).contains(&opts.k) {
        return Err(Error::config("additivity power k must be 1 or 2"));
    }
    Ok(())
}

/// Tests whether a functional `F` is `o(diam^k)` along the dyadic
/// subdivisions of `q`, the numerical side of the dyadic vanishing lemma.
pub fn check_dyadic_additivity<T, O, F>(func: F, q: &O, opts: &AdditivityOptions) -> Result<AdditivityReport>
where
    T: Real,
    O: Dyadic<T>,
    F: Fn(&O) -> Result<Vec<T>> + Sync,
{
    validate_additivity(opts)?;
    let table = dyadic_table(func, q, opts.depth)?;
    Ok(additivity_report(&table, |v| v.iter().map(|x| x * x).sum::<f64>().sqrt(), opts))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GermRow {
    pub level: u32,
    pub scale: f64,
    pub max_remainder: f64,
    pub rms_remainder: f64,
}

/// Remainder of the left-point germ, `∫_s^t f dg - f_s δg_st`, over every
/// dyadic cell at each requested level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GermSweep {
    pub rows: Vec<GermRow>,
    /// Power-law fit of the max remainder against the cell length.
    pub fit: Option<PowerFit>,
    /// Same fit for the root mean square remainder.
    pub rms_fit: Option<PowerFit>,
    /// `α + β` from the field exponents.
    pub target: f64,
}

/// Measures how fast the germ remainder vanishes on a one dimensional
/// scalar pair. Integrals come from trapezoid sums at `level`, which must
/// exceed every sweep level.
pub fn germ_remainder_sweep<T: Real>(f: &Field<T>, g: &Field<T>, levels: &[u32], level: u32) -> Result<GermSweep> {
    check_young_exponents(f.exponent(), g.exponent())?;
    if f.dim() != 1 || g.dim() != 1 || f.ncomp() != 1 || g.ncomp() != 1 {
        return Err(Error::shape("the germ sweep needs scalar signals on an interval"));
    }
    if levels.is_empty() || levels.iter().any(|&l| l >= level) {
        return Err(Error::config(format!("sweep levels {levels:?} must lie below the quadrature level {level}")));
    }
    let grid = Grid::uniform(f.domain().clone(), level)?;
    let fv = f.sample_values(&grid);
    let gv = g.sample_values(&grid);
    let mut cum = vec![0.0f64; fv.len()];
    for i in 1..fv.len() {
        let cell = T::lit(0.5) * (fv[i - 1] + fv[i]) * (gv[i] - gv[i - 1]);
        cum[i] = cum[i - 1] + cell.to_f64_lossy();
    }
    let width = f.domain().width(0).to_f64_lossy();
    let rows: Vec<GermRow> = levels
        .iter()
        .map(|&j| {
            let step = 1usize << (level - j);
            let cells = 1usize << j;
            let (mut max, mut sq) = (0.0f64, 0.0f64);
            for c in 0..cells {
                let (a, b) = (c * step, (c + 1) * step);
                let germ = (fv[a] * (gv[b] - gv[a])).to_f64_lossy();
                let r = (cum[b] - cum[a] - germ).abs();
                max = max.max(r);
                sq += r * r;
            }
            GermRow {
                level: j,
                scale: width * (-(j as f64)).exp2(),
                max_remainder: max,
                rms_remainder: (sq / cells as f64).sqrt(),
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.scale).collect();
    let max: Vec<f64> = rows.iter().map(|r| r.max_remainder).collect();
    let rms: Vec<f64> = rows.iter().map(|r| r.rms_remainder).collect();
    Ok(GermSweep {
        fit: fit_power_law(&xs, &max),
        rms_fit: fit_power_law(&xs, &rms),
        target: (f.exponent() + g.exponent()).to_f64_lossy(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::geometry::Domain;

    fn poly(d: Domain<f64>, label: &str, f: fn(&[f64]) -> f64) -> Field<f64> {
        Field::scalar_fn(d, 1.0, label, f).unwrap()
    }

    #[test]
    fn constant_integrand_telescopes() {
        let d = Domain::unit(1);
        let f = Field::constant(d.clone(), (1, 1), vec![2.5]).unwrap();
        let g = poly(d, "g", |p| (5.0 * p[0]).sin());
        let r = young_integral_1d(&f, &g, 0.1, 0.9, &YoungOptions::default()).unwrap();
        let exact = 2.5 * ((4.5f64).sin() - (0.5f64).sin());
        for row in &r.table {
            assert!((row.value[0] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn t_dt_squared() {
        let d = Domain::unit(1);
        let f = poly(d.clone(), "t", |p| p[0]);
        let g = poly(d, "t2", |p| p[0] * p[0]);
        let opts = YoungOptions { max_level: 14, ..Default::default() };
        let r = young_integral_1d(&f, &g, 0.0, 1.0, &opts).unwrap();
        assert!((r.scalar() - 2.0 / 3.0).abs() < 1e-8, "{}", r.scalar());
        let left = young_integral_1d(&f, &g, 0.0, 1.0, &opts.clone().with_rule(Rule::LeftPoint)).unwrap();
        assert!((left.scalar() - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn diagonal_segment() {
        let d = Domain::unit(2);
        let f = poly(d.clone(), "x+y", |p| p[0] + p[1]);
        let g = poly(d, "xy", |p| p[0] * p[1]);
        let s = Segment::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let r = young_integral_segment(&f, &g, &s, &YoungOptions::default()).unwrap();
        assert!((r.scalar() - 4.0 / 3.0).abs() < 1e-8);
        let back = young_integral_segment(&f, &g, &s.reversed(), &YoungOptions::default()).unwrap();
        assert!((back.scalar() + r.scalar()).abs() < 1e-9);
    }

    #[test]
    fn green_area() {
        let d = Domain::unit(2);
        let f = poly(d.clone(), "x", |p| p[0]);
        let g = poly(d.clone(), "y", |p| p[1]);
        let q = d.face(0, 1).unwrap();
        let r = boundary_integral(&f, &g, &q, &YoungOptions::default()).unwrap();
        assert!((r.scalar() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_low_regularity() {
        let d = Domain::unit(1);
        let f = poly(d.clone(), "t", |p| p[0]).with_exponent(0.4).unwrap();
        let g = f.clone().with_exponent(0.5).unwrap();
        assert!(matches!(
            young_integral_1d(&f, &g, 0.0, 1.0, &YoungOptions::default()),
            Err(Error::Regularity(_))
        ));
    }

    #[test]
    fn additivity_verdicts() {
        let q = Domain::<f64>::unit(2).face(0, 1).unwrap();
        let opts = AdditivityOptions { depth: 4, ..Default::default() };
        let cube = check_dyadic_additivity(|r: &Rectangle<f64>| Ok(vec![r.diam().powi(3)]), &q, &opts).unwrap();
        assert!(cube.vanishes);
        assert!((cube.decay_exponent.unwrap() - 1.0).abs() < 1e-9);
        let area = check_dyadic_additivity(|r: &Rectangle<f64>| Ok(vec![r.area()]), &q, &opts).unwrap();
        assert!(!area.vanishes);
        assert!(area.decay_exponent.unwrap().abs() < 1e-9);
        let shallow = AdditivityOptions { depth: 1, ..Default::default() };
        assert!(check_dyadic_additivity(|r: &Rectangle<f64>| Ok(vec![r.area()]), &q, &shallow).is_err());
    }

    #[test]
    fn smooth_germ_remainder_is_second_order() {
        let d = Domain::unit(1);
        let f = poly(d.clone(), "sin", |p| (3.0 * p[0]).sin());
        let g = poly(d, "t2", |p| p[0] * p[0]);
        let sweep = germ_remainder_sweep(&f, &g, &[3, 4, 5, 6, 7], 14).unwrap();
        let fit = sweep.fit.unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.05, "{fit:?}");
        assert!(germ_remainder_sweep(&f, &f, &[3, 14], 14).is_err());
    }
}
