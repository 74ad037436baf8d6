//! Relative residuals of operator identities at sample points.
//!
//! A residual compares two terms `a`, `b` as `|a - b| / max(1, |a| + |b|)`
//! with the entrywise max-modulus norm.

use num_complex::Complex64;

use super::hamiltonian::Hamiltonian;
use super::operator::MatDiffOperator;
use crate::error::{Error, Result};
use crate::jets::expr::ScalarExpr;
use crate::jets::function::{expr_fn, MatFn, ExprMatrix};
use crate::jets::matrix::CMatrix;

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn relative_difference(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b)) / (max_abs(a) + max_abs(b)).max(1.0)
}

fn pt(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Largest relative difference between the coefficient values of two
/// operators (missing coefficients count as zero), normalized at each point
/// by the largest coefficient of either operator.
pub fn coefficient_residual(a: &MatDiffOperator, b: &MatDiffOperator, points: &[f64]) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::Contract("coefficient_residual: sizes differ".into()));
    }
    let zero = CMatrix::zeros(a.n(), a.n());
    let mut worst: f64 = 0.0;
    for &x in points {
        let ca = a.values_at(pt(x))?;
        let cb = b.values_at(pt(x))?;
        let norm = |c: &[CMatrix]| c.iter().map(max_abs).fold(0.0, f64::max);
        let scale = (norm(&ca) + norm(&cb)).max(1.0);
        for j in 0..ca.len().max(cb.len()) {
            let u = ca.get(j).unwrap_or(&zero);
            let v = cb.get(j).unwrap_or(&zero);
            worst = worst.max(max_abs(&(u - v)) / scale);
        }
    }
    Ok(worst)
}

/// Largest coefficient modulus relative to `max(1, scale)`.
pub fn operator_magnitude(a: &MatDiffOperator, points: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in points {
        for c in a.values_at(pt(x))? {
            worst = worst.max(max_abs(&c));
        }
    }
    Ok(worst)
}

/// Largest relative difference of the actions of two operators on probes.
pub fn probe_residual(
    a: &MatDiffOperator,
    b: &MatDiffOperator,
    probes: &[MatFn],
    points: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in probes {
        for &x in points {
            let u = a.apply(f, pt(x), 0)?;
            let v = b.apply(f, pt(x), 0)?;
            worst = worst.max(relative_difference(u.value(), v.value()));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntertwiningResidual {
    pub probe: f64,
    pub coefficientwise: f64,
}

impl IntertwiningResidual {
    pub fn max(&self) -> f64 {
        self.probe.max(self.coefficientwise)
    }
}

/// Residual of `Q H_+ = H_- Q`, both on probes and coefficientwise.
pub fn intertwining_residual(
    q: &MatDiffOperator,
    h_plus: &Hamiltonian,
    h_minus: &Hamiltonian,
    probes: &[MatFn],
    points: &[f64],
) -> Result<IntertwiningResidual> {
    let left = MatDiffOperator::compose(q, &h_plus.operator())?;
    let right = MatDiffOperator::compose(&h_minus.operator(), q)?;
    Ok(IntertwiningResidual {
        probe: probe_residual(&left, &right, probes, points)?,
        coefficientwise: coefficient_residual(&left, &right, points)?,
    })
}

/// Six smooth vector probes of size `n`: polynomial, Gaussian, trigonometric
/// and complex mixtures, each varying from component to component.
pub fn probe_battery(n: usize) -> Vec<MatFn> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let column = |f: &dyn Fn(usize) -> ScalarExpr| {
        expr_fn(ExprMatrix::column((0..n).map(f).collect()))
    };
    let gauss = |s: f64| {
        ScalarExpr::mul(vec![ScalarExpr::real(-s), ScalarExpr::x().pow(2)]).exp()
    };
    vec![
        column(&|i| {
            ScalarExpr::polynomial(&[c(1.0 + i as f64, 0.0), c(0.3, 0.0), c(-0.05 * (i + 1) as f64, 0.0)])
        }),
        column(&|i| {
            ScalarExpr::mul(vec![
                gauss(0.1 + 0.05 * i as f64),
                ScalarExpr::linear(c(1.0, 0.0), c(0.2 * i as f64, 0.0)),
            ])
        }),
        column(&|i| ScalarExpr::linear(c(0.7 + 0.3 * i as f64, 0.0), c(0.4 * i as f64, 0.0)).sin()),
        column(&|i| {
            ScalarExpr::add(vec![
                ScalarExpr::linear(c(1.1, 0.0), c(-0.5 * i as f64, 0.0)).cos(),
                ScalarExpr::polynomial(&[c(0.0, 0.5), c(0.0, 0.1 * (i + 1) as f64)]),
            ])
        }),
        column(&|i| {
            ScalarExpr::linear(c(0.0, 0.6 + 0.2 * i as f64), c(0.0, 0.0)).exp()
        }),
        column(&|i| {
            ScalarExpr::mul(vec![
                gauss(0.05),
                ScalarExpr::linear(c(0.5, 0.0), c(i as f64, 0.0)).cos(),
                ScalarExpr::polynomial(&[c(1.0, -0.5), c(0.0, 0.2)]),
            ])
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::function::const_fn;

    #[test]
    fn identity_intertwines_equal_hamiltonians() {
        let v = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::x().sin(), ScalarExpr::x()]));
        let h = Hamiltonian::new(v).unwrap();
        let pts = [-3.0, -0.5, 1.0, 4.2];
        let r = intertwining_residual(&MatDiffOperator::identity(2), &h, &h, &probe_battery(2), &pts).unwrap();
        assert_eq!(r.max(), 0.0);
        let scaled = MatDiffOperator::identity(2).scale(Complex64::new(2.0, -1.0));
        let r = intertwining_residual(&scaled, &h, &h, &probe_battery(2), &pts).unwrap();
        assert!(r.max() < 1e-15);
    }

    #[test]
    fn probes_differ_between_components() {
        for p in probe_battery(3) {
            let v = p.eval(pt(0.7), 0).unwrap();
            assert!((v.value()[(0, 0)] - v.value()[(1, 0)]).norm() > 1e-6);
        }
    }

    #[test]
    fn non_commuting_constant_fails_intertwining() {
        let v = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::x(), ScalarExpr::real(0.0)]));
        let h = Hamiltonian::new(v).unwrap();
        let m = CMatrix::from_fn(2, 2, |_, _| pt(1.0));
        let q = MatDiffOperator::from_coefficients(vec![const_fn(m)]).unwrap();
        let r = intertwining_residual(&q, &h, &h, &probe_battery(2), &[0.5, 1.5]).unwrap();
        assert!(r.max() > 1e-2);
    }
}
