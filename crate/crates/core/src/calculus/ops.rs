//! First and second order increments.

use crate::calculus::field::Field;
use crate::error::Result;
use crate::scalar::Real;

/// `δf_{pq} = f(q) - f(p)`.
pub fn delta<T: Real>(f: &Field<T>, p: &[T], q: &[T]) -> Result<Vec<T>> {
    let a = f.eval(p)?;
    let mut b = f.eval(q)?;
    for (bi, ai) in b.iter_mut().zip(&a) {
        *bi = *bi - *ai;
    }
    Ok(b)
}

/// `δω_{xyz} = ω_{yz} - ω_{xz} + ω_{xy}` for a two-point function `ω`.
pub fn delta2<T, W>(omega: W, x: &[T], y: &[T], z: &[T]) -> Result<Vec<T>>
where
    T: Real,
    W: Fn(&[T], &[T]) -> Result<Vec<T>>,
{
    let yz = omega(y, z)?;
    let xz = omega(x, z)?;
    let xy = omega(x, y)?;
    Ok(yz
        .iter()
        .zip(&xz)
        .zip(&xy)
        .map(|((&a, &b), &c)| a - b + c)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::geometry::Domain;
    use proptest::prelude::*;

    fn wavy() -> Field<f64> {
        Field::scalar_fn(Domain::unit(2), 1.0, "wavy", |p: &[f64]| {
            (3.0 * p[0]).sin() * (1.0 + p[1] * p[1]) + (5.0 * p[1]).cos()
        })
        .unwrap()
    }

    #[test]
    fn delta_of_square() {
        let f = Field::scalar_fn(Domain::<f64>::unit(1), 1.0, "sq", |p: &[f64]| p[0] * p[0]).unwrap();
        assert_eq!(delta(&f, &[0.0], &[1.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn delta2_of_constant_two_point_function() {
        let one = |_: &[f64], _: &[f64]| Ok(vec![1.0]);
        assert_eq!(delta2(one, &[0.0], &[0.5], &[1.0]).unwrap(), vec![1.0]);
    }

    proptest! {
        #[test]
        fn delta_delta_vanishes(x in prop::array::uniform2(0.0f64..1.0),
                                y in prop::array::uniform2(0.0f64..1.0),
                                z in prop::array::uniform2(0.0f64..1.0)) {
            let f = wavy();
            let d = delta2(|p: &[f64], q: &[f64]| delta(&f, p, q), &x, &y, &z).unwrap();
            prop_assert!(d[0].abs() <= 8.0 * f64::EPSILON * 4.0);
        }

        #[test]
        fn germ_defect_is_product_of_increments(x in prop::array::uniform2(0.0f64..1.0),
                                                y in prop::array::uniform2(0.0f64..1.0),
                                                z in prop::array::uniform2(0.0f64..1.0)) {
            let f = wavy();
            let g = Field::scalar_fn(Domain::unit(2), 1.0, "g", |p: &[f64]| p[0] * p[1] + p[1]).unwrap();
            let germ = |p: &[f64], q: &[f64]| {
                Ok(vec![f.eval_scalar(p)? * delta(&g, p, q)?[0]])
            };
            let d = delta2(germ, &x, &y, &z).unwrap()[0];
            let expect = delta(&f, &x, &y).unwrap()[0] * delta(&g, &y, &z).unwrap()[0];
            prop_assert!((d - expect).abs() < 1e-14);
        }

        #[test]
        fn leibniz_rule(x in prop::array::uniform2(0.0f64..1.0),
                        y in prop::array::uniform2(0.0f64..1.0)) {
            let f = wavy();
            let g = Field::scalar_fn(Domain::unit(2), 1.0, "g", |p: &[f64]| (p[0] - p[1]).exp()).unwrap();
            let fg = f.matmul(&g).unwrap();
            let lhs = delta(&fg, &x, &y).unwrap()[0];
            let rhs = delta(&f, &x, &y).unwrap()[0] * g.eval_scalar(&y).unwrap()
                + f.eval_scalar(&x).unwrap() * delta(&g, &x, &y).unwrap()[0];
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
