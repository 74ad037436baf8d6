//! Right Euclidean division `A = Q o B + R` with `ord R < ord B`.

use std::sync::Arc;

use num_complex::Complex64;

use super::operator::MatDiffOperator;
use crate::error::{Error, Result};
use crate::jets::matrix::{mat_jet_inverse, MatrixJet};

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Quotient and remainder coefficient jets at one point.
fn divide_at(
    a: &MatDiffOperator,
    b: &MatDiffOperator,
    x0: Complex64,
    order: usize,
) -> Result<(Vec<MatrixJet>, Vec<MatrixJet>)> {
    let (na, nb) = (a.order(), b.order());
    let span = na - nb;
    let mut rem = a.coeffs_at(x0, order)?;
    let cb = b.coeffs_at(x0, order + span)?;
    let top_inv = match b.leading_constant() {
        Some(m) => {
            let inv = m
                .clone()
                .try_inverse()
                .ok_or(Error::SingularLeadingCoefficient { x0 })?;
            MatrixJet::constant(x0, order, &inv)
        }
        None => mat_jet_inverse(&cb[nb].truncate(order))
            .map_err(|_| Error::SingularLeadingCoefficient { x0 })?,
    };
    let mut quotient = vec![MatrixJet::zeros(x0, order, a.n(), a.n()); span + 1];
    for s in (0..=span).rev() {
        let q = rem[s + nb].try_mul(&top_inv)?;
        for r in 0..=s {
            let c = Complex64::new(binomial(s, r), 0.0);
            for (j, bj) in cb.iter().enumerate() {
                let term = q.try_mul(&bj.nth_derivative(r, order))?.scale(c);
                let m = s - r + j;
                rem[m] = rem[m].try_sub(&term)?;
            }
        }
        quotient[s] = q;
    }
    rem.truncate(nb.max(1));
    if nb == 0 {
        rem[0] = MatrixJet::zeros(x0, order, a.n(), a.n());
    }
    Ok((quotient, rem))
}

/// Right division of `a` by `b`. Both results are procedural operators that
/// re-run the division recurrence at each queried point.
pub fn right_divide(
    a: &MatDiffOperator,
    b: &MatDiffOperator,
) -> Result<(MatDiffOperator, MatDiffOperator)> {
    if a.n() != b.n() {
        return Err(Error::Contract("right_divide: sizes differ".into()));
    }
    if b.order() > a.order() {
        return Err(Error::Contract(format!(
            "right_divide: divisor order {} exceeds dividend order {}",
            b.order(),
            a.order()
        )));
    }
    if let Some(m) = b.leading_constant() {
        if m.clone().try_inverse().is_none() {
            return Err(Error::SingularLeadingCoefficient {
                x0: Complex64::new(f64::NAN, 0.0),
            });
        }
    }
    let n = a.n();
    let leading = match (a.leading_constant(), b.leading_constant()) {
        (Some(x), Some(y)) => y.clone().try_inverse().map(|inv| x * inv),
        _ => None,
    };
    let mut singular: Vec<f64> = a.singular_set().iter().chain(b.singular_set()).copied().collect();
    singular.sort_by(f64::total_cmp);
    singular.dedup();
    let pair = Arc::new((a.clone(), b.clone()));
    let p1 = pair.clone();
    let quotient = MatDiffOperator::from_fn(n, a.order() - b.order(), leading, singular.clone(), move |x0, k| {
        Ok(divide_at(&p1.0, &p1.1, x0, k)?.0)
    });
    let p2 = pair;
    let remainder = MatDiffOperator::from_fn(n, b.order().max(1) - 1, None, singular, move |x0, k| {
        Ok(divide_at(&p2.0, &p2.1, x0, k)?.1)
    });
    Ok((quotient, remainder))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::function::{const_fn, real};
    use crate::jets::matrix::CMatrix;

    #[test]
    fn self_division_is_identity() {
        let c = CMatrix::from_fn(2, 2, |i, j| Complex64::new(i as f64 + 0.5, j as f64));
        let b = MatDiffOperator::from_coefficients(vec![
            const_fn(c),
            const_fn(CMatrix::identity(2, 2)),
        ])
        .unwrap();
        let (q, r) = right_divide(&b, &b).unwrap();
        assert_eq!(q.order(), 0);
        let qv = q.values_at(real(0.2)).unwrap();
        assert!((&qv[0] - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(r.values_at(real(0.2)).unwrap()[0].norm() < 1e-15);
    }

    #[test]
    fn difference_of_squares() {
        let c = CMatrix::from_fn(2, 2, |i, j| Complex64::new(1.0 + i as f64 * j as f64, 0.3));
        let i2 = CMatrix::identity(2, 2);
        let a = MatDiffOperator::from_coefficients(vec![
            const_fn(-(&c * &c)),
            const_fn(CMatrix::zeros(2, 2)),
            const_fn(i2.clone()),
        ])
        .unwrap();
        let b = MatDiffOperator::from_coefficients(vec![const_fn(-c.clone()), const_fn(i2.clone())]).unwrap();
        let (q, r) = right_divide(&a, &b).unwrap();
        let qv = q.values_at(real(1.0)).unwrap();
        assert!((&qv[0] - &c).norm() < 1e-14);
        assert!((&qv[1] - &i2).norm() < 1e-14);
        assert!(r.values_at(real(1.0)).unwrap()[0].norm() < 1e-14);
    }

    #[test]
    fn singular_constant_leading_is_rejected() {
        let a = MatDiffOperator::derivative(2);
        let b = MatDiffOperator::from_coefficients(vec![
            const_fn(CMatrix::identity(2, 2)),
            const_fn(CMatrix::zeros(2, 2)),
        ])
        .unwrap();
        assert!(matches!(
            right_divide(&a, &b),
            Err(Error::SingularLeadingCoefficient { .. })
        ));
    }
}
