//! Lacunary Fourier series with one mode per dyadic frequency annulus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::field::Field;
use crate::calculus::geometry::Domain;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One term `amplitude * cos(2π k·x + phase)` in box-normalised coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: Vec<i64>,
    pub amplitude: f64,
    pub phase: f64,
}

pub const MAX_TERMS: u32 = 24;

/// Generator for the `component`-th signal drawn from `seed`.
pub fn component_rng(seed: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng
}

/// Uniform integer vector with `2^n < |k| <= 2^{n+1}`.
fn annulus_frequency(rng: &mut ChaCha8Rng, n: u32, dim: usize) -> Vec<i64> {
    let r = 1i64 << (n + 1);
    let (lo2, hi2) = (1i128 << (2 * n), 1i128 << (2 * (n + 1)));
    if dim == 1 {
        return vec![rng.random_range((1i64 << n) + 1..=r)];
    }
    loop {
        let k: Vec<i64> = (0..dim).map(|_| rng.random_range(-r..=r)).collect();
        let n2: i128 = k.iter().map(|&x| (x as i128) * (x as i128)).sum();
        if n2 > lo2 && n2 <= hi2 {
            return k;
        }
    }
}

/// Modes `c_n = 2^{-nβ}`, `n = 1..=terms`, with seeded frequencies and phases.
pub fn lacunary_modes(beta: f64, terms: u32, seed: u64, component: u64, dim: usize) -> Result<Vec<Mode>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::config(format!("β must lie in (0, 1], got {beta}")));
    }
    if terms == 0 || terms > MAX_TERMS {
        return Err(Error::config(format!("term count must lie in 1..={MAX_TERMS}, got {terms}")));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::config("lacunary series support dimensions 1 to 3"));
    }
    let mut rng = component_rng(seed, component);
    Ok((1..=terms)
        .map(|n| {
            let k = annulus_frequency(&mut rng, n, dim);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            Mode {
                k,
                amplitude: (-(n as f64) * beta).exp2(),
                phase,
            }
        })
        .collect())
}

/// Field evaluating a finite trigonometric sum.
pub fn modes_field<T: Real>(domain: &Domain<T>, modes: &[Mode], exponent: T, label: impl Into<String>) -> Result<Field<T>> {
    let m = domain.dim();
    if modes.iter().any(|md| md.k.len() != m) {
        return Err(Error::shape("mode frequency dimension differs from the domain"));
    }
    let lower = domain.lower().to_vec();
    let inv_w: Vec<T> = (0..m).map(|i| T::one() / domain.width(i)).collect();
    let tau = T::lit(std::f64::consts::TAU);
    let terms: Vec<(Vec<T>, T, T)> = modes
        .iter()
        .map(|md| {
            (
                md.k.iter().map(|&k| T::lit(k as f64)).collect(),
                T::lit(md.amplitude),
                T::lit(md.phase),
            )
        })
        .collect();
    Field::closed(domain.clone(), (1, 1), exponent, label, move |p, out| {
        let mut s = T::zero();
        for (k, a, ph) in &terms {
            let mut arg = T::zero();
            for i in 0..k.len() {
                arg = arg + k[i] * (p[i] - lower[i]) * inv_w[i];
            }
            s = s + *a * (tau * arg + *ph).cos();
        }
        out[0] = s;
    })
}

/// Real lacunary series with claimed exponent `β` on `domain`.
pub fn gen_lacunary<T: Real>(beta: f64, terms: u32, seed: u64, domain: &Domain<T>) -> Result<Field<T>> {
    gen_lacunary_component(beta, terms, seed, 0, domain)
}

pub fn gen_lacunary_component<T: Real>(
    beta: f64,
    terms: u32,
    seed: u64,
    component: u64,
    domain: &Domain<T>,
) -> Result<Field<T>> {
    let modes = lacunary_modes(beta, terms, seed, component, domain.dim())?;
    modes_field(
        domain,
        &modes,
        T::lit(beta),
        format!("lacunary(β={beta},N={terms},seed={seed})"),
    )
}

/// Warning when a grid of `level` cannot resolve the top frequency `2^{terms+1}`.
pub fn aliasing_warning(terms: u32, level: u32) -> Option<String> {
    (level < terms + 2).then(|| {
        format!("grid level {level} under-resolves {terms} lacunary terms (need at least {})", terms + 2)
    })
}
