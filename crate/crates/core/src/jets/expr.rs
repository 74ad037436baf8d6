//! A small closed-form expression language for scalar complex functions.
//!
//! Expressions serialize as JSON trees tagged by `"kind"`; complex constants
//! are `[re, im]` pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::jet::Jet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarExpr {
    Const {
        value: Complex64,
    },
    X,
    Add {
        args: Vec<ScalarExpr>,
    },
    Mul {
        args: Vec<ScalarExpr>,
    },
    /// `num / den`; `poles` lists the real zeros of `den` known in advance.
    Div {
        num: Box<ScalarExpr>,
        den: Box<ScalarExpr>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        poles: Vec<f64>,
    },
    Pow {
        base: Box<ScalarExpr>,
        exponent: i32,
    },
    Exp {
        arg: Box<ScalarExpr>,
    },
    Sin {
        arg: Box<ScalarExpr>,
    },
    Cos {
        arg: Box<ScalarExpr>,
    },
    /// `inner(scale * x + shift)`.
    AffineCompose {
        scale: Complex64,
        shift: Complex64,
        inner: Box<ScalarExpr>,
    },
}

/// Distance below which a point is considered to sit on a declared pole.
const POLE_RADIUS: f64 = 1e-12;

impl ScalarExpr {
    pub fn constant(value: Complex64) -> Self {
        ScalarExpr::Const { value }
    }

    pub fn real(value: f64) -> Self {
        Self::constant(Complex64::new(value, 0.0))
    }

    pub fn x() -> Self {
        ScalarExpr::X
    }

    pub fn add(args: Vec<ScalarExpr>) -> Self {
        ScalarExpr::Add { args }
    }

    pub fn mul(args: Vec<ScalarExpr>) -> Self {
        ScalarExpr::Mul { args }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(num: ScalarExpr, den: ScalarExpr) -> Self {
        ScalarExpr::Div {
            num: Box::new(num),
            den: Box::new(den),
            poles: Vec::new(),
        }
    }

    pub fn pow(self, exponent: i32) -> Self {
        ScalarExpr::Pow {
            base: Box::new(self),
            exponent,
        }
    }

    pub fn exp(self) -> Self {
        ScalarExpr::Exp {
            arg: Box::new(self),
        }
    }

    pub fn sin(self) -> Self {
        ScalarExpr::Sin {
            arg: Box::new(self),
        }
    }

    pub fn cos(self) -> Self {
        ScalarExpr::Cos {
            arg: Box::new(self),
        }
    }

    pub fn compose_affine(self, scale: Complex64, shift: Complex64) -> Self {
        ScalarExpr::AffineCompose {
            scale,
            shift,
            inner: Box::new(self),
        }
    }

    /// `a * x + b`.
    pub fn linear(a: Complex64, b: Complex64) -> Self {
        Self::add(vec![
            Self::mul(vec![Self::constant(a), Self::x()]),
            Self::constant(b),
        ])
    }

    /// Polynomial with ascending coefficients, built in Horner form.
    pub fn polynomial(coeffs: &[Complex64]) -> Self {
        let mut it = coeffs.iter().rev();
        let Some(top) = it.next() else {
            return Self::real(0.0);
        };
        it.fold(Self::constant(*top), |acc, ck| {
            Self::add(vec![Self::constant(*ck), Self::mul(vec![Self::x(), acc])])
        })
    }

    /// `exp(k x) * p(x)`.
    pub fn exp_poly(k: Complex64, poly: &[Complex64]) -> Self {
        Self::mul(vec![
            Self::linear(k, Complex64::default()).exp(),
            Self::polynomial(poly),
        ])
    }

    pub fn is_zero_const(&self) -> bool {
        matches!(self, ScalarExpr::Const { value } if *value == Complex64::default())
    }

    /// Real points where the expression is declared singular.
    pub fn singular_set(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_poles(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_poles(&self, out: &mut Vec<f64>) {
        match self {
            ScalarExpr::Const { .. } | ScalarExpr::X => {}
            ScalarExpr::Add { args } | ScalarExpr::Mul { args } => {
                args.iter().for_each(|a| a.collect_poles(out))
            }
            ScalarExpr::Div { num, den, poles } => {
                num.collect_poles(out);
                den.collect_poles(out);
                out.extend(poles.iter().copied());
            }
            ScalarExpr::Pow { base, .. } => base.collect_poles(out),
            ScalarExpr::Exp { arg } | ScalarExpr::Sin { arg } | ScalarExpr::Cos { arg } => {
                arg.collect_poles(out)
            }
            ScalarExpr::AffineCompose {
                scale,
                shift,
                inner,
            } => {
                let mut inner_poles = Vec::new();
                inner.collect_poles(&mut inner_poles);
                // only real preimages of real poles lie on the axis
                for p in inner_poles {
                    let pre = (Complex64::new(p, 0.0) - shift) / scale;
                    if pre.im.abs() < POLE_RADIUS && scale.norm() > 0.0 {
                        out.push(pre.re);
                    }
                }
            }
        }
    }

    /// Order-`order` Taylor jet of the expression at `x0`.
    pub fn eval(&self, x0: Complex64, order: usize) -> Result<Jet> {
        match self {
            ScalarExpr::Const { value } => Ok(Jet::constant(x0, order, *value)),
            ScalarExpr::X => Ok(Jet::variable(x0, order)),
            ScalarExpr::Add { args } => {
                let mut acc = Jet::zero(x0, order);
                for a in args {
                    acc = acc.try_add(&a.eval(x0, order)?)?;
                }
                Ok(acc)
            }
            ScalarExpr::Mul { args } => {
                let mut acc = Jet::one(x0, order);
                for a in args {
                    acc = acc.try_mul(&a.eval(x0, order)?)?;
                }
                Ok(acc)
            }
            ScalarExpr::Div { num, den, poles } => {
                if poles
                    .iter()
                    .any(|p| (x0 - p).norm() < POLE_RADIUS * p.abs().max(1.0))
                {
                    return Err(Error::SingularPoint { x0 });
                }
                let n = num.eval(x0, order)?;
                let d = den.eval(x0, order)?;
                n.try_div(&d)
            }
            ScalarExpr::Pow { base, exponent } => base.eval(x0, order)?.powi(*exponent),
            ScalarExpr::Exp { arg } => Ok(arg.eval(x0, order)?.exp()),
            ScalarExpr::Sin { arg } => Ok(arg.eval(x0, order)?.sin()),
            ScalarExpr::Cos { arg } => Ok(arg.eval(x0, order)?.cos()),
            ScalarExpr::AffineCompose {
                scale,
                shift,
                inner,
            } => {
                let y0 = scale * x0 + shift;
                let j = inner.eval(y0, order)?;
                Ok(j.affine_pullback(x0, *scale))
            }
        }
    }

    /// Plain function value.
    pub fn value(&self, x: Complex64) -> Result<Complex64> {
        Ok(self.eval(x, 0)?.value())
    }
}

impl Default for ScalarExpr {
    fn default() -> Self {
        ScalarExpr::real(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn square_at_three() {
        let e = ScalarExpr::x().pow(2);
        let j = e.eval(z(3.0), 2).unwrap();
        assert_eq!(j.coeffs(), &[z(9.0), z(6.0), z(1.0)]);
    }

    #[test]
    fn sine_maclaurin() {
        let j = ScalarExpr::x().sin().eval(z(0.0), 3).unwrap();
        let want = [0.0, 1.0, 0.0, -1.0 / 6.0];
        for (a, b) in j.coeffs().iter().zip(want) {
            assert!((a - z(b)).norm() < 1e-16);
        }
    }

    /// Richardson-extrapolated central differences for derivative orders 0..=3.
    fn fd_derivatives(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> [f64; 4] {
        let d = |h: f64| -> [f64; 4] {
            let f0 = f(x);
            let (fp1, fm1) = (f(x + h), f(x - h));
            let (fp2, fm2) = (f(x + 2.0 * h), f(x - 2.0 * h));
            [
                f0,
                (fp1 - fm1) / (2.0 * h),
                (fp1 - 2.0 * f0 + fm1) / (h * h),
                (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) / (2.0 * h.powi(3)),
            ]
        };
        let coarse = d(2.0 * h);
        let fine = d(h);
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = (4.0 * fine[k] - coarse[k]) / 3.0;
        }
        out
    }

    /// Taylor coefficients from the Cauchy integral on a circle (trapezoid rule).
    fn cauchy_coefficients(f: &dyn Fn(Complex64) -> Complex64, x: f64, r: f64, k_max: usize) -> Vec<Complex64> {
        let m = 128;
        (0..=k_max)
            .map(|k| {
                let mut s = Complex64::default();
                for j in 0..m {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    let w = Complex64::from_polar(1.0, th);
                    s += f(x + w * r) * w.powi(-(k as i32));
                }
                s / (m as f64 * r.powi(k as i32))
            })
            .collect()
    }

    #[test]
    fn rational_exponential_against_finite_differences() {
        let e = ScalarExpr::div(
            ScalarExpr::linear(z(2.0), z(0.0)).exp(),
            ScalarExpr::add(vec![ScalarExpr::real(1.0), ScalarExpr::x().pow(2)]),
        );
        let f = |x: f64| (2.0 * x).exp() / (1.0 + x * x);
        let j = e.eval(z(1.0), 4).unwrap();
        let fd = fd_derivatives(&f, 1.0, 1e-3);
        for k in 0..=3 {
            let got = j.derivative_value(k);
            let scale = fd[k].abs().max(1.0);
            assert!(
                (got.re - fd[k]).abs() / scale < 1e-6 && got.im.abs() < 1e-12,
                "k={k}: jet {got} vs fd {}",
                fd[k]
            );
        }
        // fourth order is beyond double-precision differencing; use contour quadrature
        let fc = |w: Complex64| (w * 2.0).exp() / (w * w + 1.0);
        let cc = cauchy_coefficients(&fc, 1.0, 0.4, 4);
        for k in 0..=4 {
            assert!((j.coeff(k) - cc[k]).norm() / cc[k].norm().max(1.0) < 1e-10);
        }
    }

    #[test]
    fn declared_pole_is_reported() {
        let e = ScalarExpr::Div {
            num: Box::new(ScalarExpr::real(1.0)),
            den: Box::new(ScalarExpr::linear(z(1.0), z(-2.0))),
            poles: vec![2.0],
        };
        assert!(matches!(e.eval(z(2.0), 1), Err(Error::SingularPoint { .. })));
        assert_eq!(e.singular_set(), vec![2.0]);
        let shifted = e.compose_affine(z(2.0), z(0.0));
        assert_eq!(shifted.singular_set(), vec![1.0]);
    }

    #[test]
    fn undeclared_zero_denominator_is_reported() {
        let e = ScalarExpr::div(ScalarExpr::real(1.0), ScalarExpr::x());
        assert!(matches!(e.eval(z(0.0), 2), Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn affine_composition_scales_coefficients() {
        // exp(2x + 1) at 0 -> e * 2^k / k!
        let e = ScalarExpr::x().exp().compose_affine(z(2.0), z(1.0));
        let j = e.eval(z(0.0), 3).unwrap();
        let e1 = 1f64.exp();
        let want = [e1, 2.0 * e1, 2.0 * e1, 4.0 / 3.0 * e1];
        for (a, b) in j.coeffs().iter().zip(want) {
            assert!((a - z(b)).norm() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip_uses_kind_tags() {
        let e = ScalarExpr::exp_poly(Complex64::new(0.5, -0.25), &[z(1.0), Complex64::new(0.0, 2.0)]);
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.contains("\"kind\":\"exp\""));
        assert!(s.contains("[0.5,-0.25]"));
        let back: ScalarExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        let ac: ScalarExpr = serde_json::from_str(
            r#"{"kind":"affine-compose","scale":[2,0],"shift":[0,0],"inner":{"kind":"x"}}"#,
        )
        .unwrap();
        assert_eq!(ac.value(z(1.5)).unwrap(), z(3.0));
    }
}
