//! Test signals: lacunary series, composed and diagonal families, fBm, and
//! mollified versions, all reproducible from a serialisable [`SignalSpec`].

pub mod fbm;
pub mod lacunary;
pub mod mollify;
pub mod smooth;

use serde::{Deserialize, Serialize};

use crate::calculus::field::Field;
use crate::calculus::geometry::Domain;
use crate::driver::ScalarFn;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use fbm::{gen_fbm_1d, FbmSampler};
pub use lacunary::{gen_lacunary, lacunary_modes, modes_field, Mode};
pub use mollify::mollify;
pub use smooth::smooth_named;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    /// One dimensional lacunary series.
    Weierstrass1d { beta: f64, terms: u32, seed: u64 },
    /// Lacunary series on `dim` dimensions.
    LacunaryMd { beta: f64, terms: u32, seed: u64, dim: usize },
    /// Explicit trigonometric modes.
    Modes { dim: usize, exponent: f64, modes: Vec<Mode> },
    /// `Σ_i w_i(p_i)` with one dimensional parts.
    Sum { parts: Vec<SignalSpec> },
    /// `(φ_1(w), …, φ_k(w))` for a scalar core `w`.
    Composed { core: Box<SignalSpec>, outer: Vec<String> },
    /// `(w_1(p_1), …, w_m(p_m))` with one dimensional parts.
    Diagonal { axes: Vec<SignalSpec> },
    /// Concatenation of components on a common domain.
    Stack { parts: Vec<SignalSpec> },
    Fbm1d { hurst: f64, level: u32, seed: u64 },
    Smooth { name: String, dim: usize },
    Mollified { base: Box<SignalSpec>, eps: f64, level: u32 },
}

impl SignalSpec {
    /// Dimension of the domain the signal lives on.
    pub fn dim(&self) -> usize {
        match self {
            SignalSpec::Weierstrass1d { .. } | SignalSpec::Fbm1d { .. } => 1,
            SignalSpec::LacunaryMd { dim, .. }
            | SignalSpec::Modes { dim, .. }
            | SignalSpec::Smooth { dim, .. } => *dim,
            SignalSpec::Sum { parts } => parts.len(),
            SignalSpec::Diagonal { axes } => axes.len(),
            SignalSpec::Composed { core, .. } => core.dim(),
            SignalSpec::Stack { parts } => parts.first().map_or(0, |p| p.dim()),
            SignalSpec::Mollified { base, .. } => base.dim(),
        }
    }

    /// Builds the field on the unit box.
    pub fn build_unit<T: Real>(&self) -> Result<Field<T>> {
        self.build(&Domain::unit(self.dim().max(1)))
    }

    pub fn build<T: Real>(&self, domain: &Domain<T>) -> Result<Field<T>> {
        self.build_component(domain, 0)
    }

    fn build_component<T: Real>(&self, domain: &Domain<T>, component: u64) -> Result<Field<T>> {
        if self.dim() != domain.dim() {
            return Err(Error::config(format!(
                "signal of dimension {} on a {}-dimensional domain",
                self.dim(),
                domain.dim()
            )));
        }
        match self {
            SignalSpec::Weierstrass1d { beta, terms, seed }
            | SignalSpec::LacunaryMd { beta, terms, seed, .. } => {
                lacunary::gen_lacunary_component(*beta, *terms, *seed, component, domain)
            }
            SignalSpec::Modes { exponent, modes, .. } => {
                modes_field(domain, modes, T::lit(*exponent), "modes")
            }
            SignalSpec::Sum { parts } => {
                let fs = axis_parts(parts, domain)?;
                let exponent = fs.iter().map(|f| f.exponent()).fold(T::one(), |a, b| a.min(b));
                Field::scalar_fn(domain.clone(), exponent, "sum", move |p| {
                    let mut s = T::zero();
                    let mut o = [T::zero()];
                    for (i, f) in fs.iter().enumerate() {
                        f.eval_unchecked(&p[i..=i], &mut o);
                        s = s + o[0];
                    }
                    s
                })
            }
            SignalSpec::Diagonal { axes } => {
                let fs = axis_parts(axes, domain)?;
                let exponent = fs.iter().map(|f| f.exponent()).fold(T::one(), |a, b| a.min(b));
                let m = fs.len();
                Field::closed(domain.clone(), (m, 1), exponent, "diagonal", move |p, out| {
                    for (i, f) in fs.iter().enumerate() {
                        f.eval_unchecked(&p[i..=i], &mut out[i..=i]);
                    }
                })
            }
            SignalSpec::Composed { core, outer } => {
                let w = core.build_component(domain, component)?;
                if w.ncomp() != 1 {
                    return Err(Error::shape("composed signals need a scalar core"));
                }
                let maps = outer
                    .iter()
                    .map(|s| ScalarFn::parse(s))
                    .collect::<Result<Vec<_>>>()?;
                if maps.is_empty() {
                    return Err(Error::config("composed signal without outer maps"));
                }
                let k = maps.len();
                Field::closed(domain.clone(), (k, 1), w.exponent(), "composed", move |p, out| {
                    let mut x = [T::zero()];
                    w.eval_unchecked(p, &mut x);
                    for (o, phi) in out.iter_mut().zip(&maps) {
                        *o = phi.eval(x[0]);
                    }
                })
            }
            SignalSpec::Stack { parts } => {
                let fs = parts
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.build_component(domain, component + i as u64))
                    .collect::<Result<Vec<_>>>()?;
                Field::stack(&fs, "stack")
            }
            SignalSpec::Fbm1d { hurst, level, seed } => {
                let (a, b) = (domain.lower()[0].to_f64_lossy(), domain.upper()[0].to_f64_lossy());
                FbmSampler::new(*hurst, *level, a, b)?.sample(*seed)
            }
            SignalSpec::Smooth { name, .. } => smooth_named(name, domain),
            SignalSpec::Mollified { base, eps, level } => {
                mollify(&base.build_component(domain, component)?, T::lit(*eps), *level)
            }
        }
    }
}

fn axis_parts<T: Real>(parts: &[SignalSpec], domain: &Domain<T>) -> Result<Vec<Field<T>>> {
    parts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.dim() != 1 {
                return Err(Error::config("axis parts must be one dimensional"));
            }
            let d = Domain::interval(domain.lower()[i], domain.upper()[i])?;
            s.build_component(&d, i as u64)
        })
        .collect()
}

/// Composed wedge-null family `(φ_1(w), …, φ_k(w))` from a scalar core.
pub fn gen_composed<T: Real>(core: &Field<T>, outer: &[ScalarFn]) -> Result<Field<T>> {
    if core.ncomp() != 1 || outer.is_empty() {
        return Err(Error::shape("composed signals need a scalar core and at least one outer map"));
    }
    let (w, maps) = (core.clone(), outer.to_vec());
    Field::closed(core.domain().clone(), (maps.len(), 1), core.exponent(), "composed", move |p, out| {
        let mut x = [T::zero()];
        w.eval_unchecked(p, &mut x);
        for (o, phi) in out.iter_mut().zip(&maps) {
            *o = phi.eval(x[0]);
        }
    })
}

/// Diagonal signal `(w_1(p_1), …, w_m(p_m))` from one dimensional fields.
pub fn gen_diagonal<T: Real>(parts: &[Field<T>]) -> Result<Field<T>> {
    if parts.is_empty() || parts.iter().any(|f| f.dim() != 1 || f.ncomp() != 1) {
        return Err(Error::shape("diagonal signals need scalar one dimensional parts"));
    }
    let lower: Vec<T> = parts.iter().map(|f| f.domain().lower()[0]).collect();
    let upper: Vec<T> = parts.iter().map(|f| f.domain().upper()[0]).collect();
    let exponent = parts.iter().map(|f| f.exponent()).fold(T::one(), |a, b| a.min(b));
    let fs = parts.to_vec();
    let m = fs.len();
    Field::closed(Domain::new(lower, upper)?, (m, 1), exponent, "diagonal", move |p, out| {
        for (i, f) in fs.iter().enumerate() {
            f.eval_unchecked(&p[i..=i], &mut out[i..=i]);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip_regenerates_identical_samples() {
        let spec = SignalSpec::Composed {
            core: Box::new(SignalSpec::LacunaryMd { beta: 0.9, terms: 8, seed: 5, dim: 2 }),
            outer: vec!["id".into(), "cube".into()],
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: SignalSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let grid = crate::calculus::geometry::Grid::uniform(Domain::unit(2), 4).unwrap();
        let a = spec.build_unit::<f64>().unwrap().sample_values(&grid);
        let b = back.build_unit::<f64>().unwrap().sample_values(&grid);
        assert_eq!(a, b);
    }

    #[test]
    fn diagonal_components_depend_on_one_axis() {
        let spec = SignalSpec::Diagonal {
            axes: vec![
                SignalSpec::Weierstrass1d { beta: 0.9, terms: 6, seed: 1 },
                SignalSpec::Smooth { name: "constant:2".into(), dim: 1 },
            ],
        };
        let g = spec.build_unit::<f64>().unwrap();
        let a = g.eval(&[0.3, 0.1]).unwrap();
        let b = g.eval(&[0.3, 0.9]).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], 2.0);
        let c = g.eval(&[0.7, 0.1]).unwrap();
        assert_eq!(c[1], a[1]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = SignalSpec::Weierstrass1d { beta: 0.8, terms: 4, seed: 1 };
        assert!(spec.build::<f64>(&Domain::unit(2)).is_err());
    }
}
