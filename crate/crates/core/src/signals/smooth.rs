//! Named closed-form smooth signals.
//!
//! | name            | value                         |
//! |-----------------|-------------------------------|
//! | `poly:tN`       | `p₀^N`                        |
//! | `coord:i`       | `p_i`                         |
//! | `identity`      | `(p₀, …, p_{m-1})`            |
//! | `sum`, `prod`   | `Σ p_i`, `Π p_i`              |
//! | `constant:c`    | `c`                           |
//! | `F_lin:a,b,…`   | `F(Σ a_i p_i)`, `F` a scalar map (`sin`, `cos`, `exp`, `square`, `cube`, `id`) |

use crate::calculus::field::Field;
use crate::calculus::geometry::Domain;
use crate::driver::ScalarFn;
use crate::error::{Error, Result};
use crate::scalar::Real;

fn parse_f64s(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad number {t:?} in signal name")))
        })
        .collect()
}

pub fn smooth_named<T: Real>(name: &str, domain: &Domain<T>) -> Result<Field<T>> {
    let m = domain.dim();
    let d = domain.clone();
    let one = T::one();
    if let Some(pow) = name.strip_prefix("poly:t") {
        let n: i32 = if pow.is_empty() {
            1
        } else {
            pow.parse()
                .map_err(|_| Error::config(format!("bad polynomial power in {name:?}")))?
        };
        return Field::scalar_fn(d, one, name, move |p| p[0].powi(n));
    }
    if let Some(i) = name.strip_prefix("coord:") {
        let i: usize = i
            .parse()
            .map_err(|_| Error::config(format!("bad coordinate in {name:?}")))?;
        if i >= m {
            return Err(Error::config(format!("coordinate {i} out of range for dimension {m}")));
        }
        return Field::scalar_fn(d, one, name, move |p| p[i]);
    }
    if let Some(c) = name.strip_prefix("constant:") {
        let c = T::lit(parse_f64s(c)?[0]);
        return Field::scalar_fn(d, one, name, move |_| c);
    }
    if let Some((outer, coeffs)) = name.split_once("_lin:") {
        let phi = ScalarFn::parse(outer)?;
        let a: Vec<T> = parse_f64s(coeffs)?.into_iter().map(T::lit).collect();
        if a.len() != m {
            return Err(Error::config(format!("{name:?} needs {m} coefficients")));
        }
        return Field::scalar_fn(d, one, name, move |p| {
            let w = a.iter().zip(p).fold(T::zero(), |s, (&ai, &pi)| s + ai * pi);
            phi.eval(w)
        });
    }
    match name {
        "identity" => Field::closed(d, (m, 1), one, name, |p, out| out.copy_from_slice(p)),
        "sum" => Field::scalar_fn(d, one, name, |p| p.iter().copied().sum()),
        "prod" => Field::scalar_fn(d, one, name, |p| p.iter().fold(T::one(), |a, &b| a * b)),
        _ => Err(Error::config(format!("unknown smooth signal {name:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_values() {
        let d1 = Domain::<f64>::unit(1);
        let d2 = Domain::<f64>::unit(2);
        assert_eq!(smooth_named("poly:t2", &d1).unwrap().eval_scalar(&[0.5]).unwrap(), 0.25);
        assert_eq!(smooth_named("poly:t", &d1).unwrap().eval_scalar(&[0.5]).unwrap(), 0.5);
        assert_eq!(smooth_named("coord:1", &d2).unwrap().eval_scalar(&[0.2, 0.7]).unwrap(), 0.7);
        assert_eq!(smooth_named("identity", &d2).unwrap().eval(&[0.2, 0.7]).unwrap(), vec![0.2, 0.7]);
        let s = smooth_named("sin_lin:1,2", &d2).unwrap().eval_scalar(&[0.1, 0.2]).unwrap();
        assert!((s - 0.5f64.sin()).abs() < 1e-15);
        assert!(smooth_named("sin_lin:1", &d2).is_err());
        assert!(smooth_named("bogus", &d2).is_err());
    }
}
