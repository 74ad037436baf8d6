//! Truncated Taylor jets of complex scalar functions.
//!
//! A [`Jet`] of order `K` at `x0` stores `c_k = f^(k)(x0) / k!` for `k = 0..=K`.
//! Every operation produces coefficient `k` from input coefficients `<= k` only,
//! so results are bitwise prefix-consistent across orders.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot threshold used when inverting a jet.
pub const EPS_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    base: Complex64,
    coeffs: Vec<Complex64>,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl Jet {
    pub fn new(base: Complex64, coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet carries at least one coefficient");
        Jet { base, coeffs }
    }

    pub fn constant(base: Complex64, order: usize, value: Complex64) -> Self {
        let mut coeffs = vec![Complex64::default(); order + 1];
        coeffs[0] = value;
        Jet { base, coeffs }
    }

    pub fn zero(base: Complex64, order: usize) -> Self {
        Self::constant(base, order, Complex64::default())
    }

    pub fn one(base: Complex64, order: usize) -> Self {
        Self::constant(base, order, c(1.0))
    }

    /// The identity function `x` expanded at `base`.
    pub fn variable(base: Complex64, order: usize) -> Self {
        let mut j = Self::constant(base, order, base);
        if order >= 1 {
            j.coeffs[1] = c(1.0);
        }
        j
    }

    /// Jet of a polynomial given by ascending coefficients in powers of `(x - base)`.
    pub fn from_taylor(base: Complex64, order: usize, taylor: &[Complex64]) -> Self {
        let mut coeffs = vec![Complex64::default(); order + 1];
        for (dst, src) in coeffs.iter_mut().zip(taylor) {
            *dst = *src;
        }
        Jet { base, coeffs }
    }

    pub fn base(&self) -> Complex64 {
        self.base
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs[k]
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// `f^(k)(x0)`, i.e. `k! c_k`.
    pub fn derivative_value(&self, k: usize) -> Complex64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.coeffs[k] * fact
    }

    /// Largest coefficient modulus.
    pub fn magnitude(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order(), "cannot extend a jet by truncation");
        Jet {
            base: self.base,
            coeffs: self.coeffs[..=order].to_vec(),
        }
    }

    /// Jet of `f'`; the order drops by one (`c'_k = (k+1) c_{k+1}`).
    pub fn derivative(&self) -> Jet {
        if self.order() == 0 {
            return Jet::zero(self.base, 0);
        }
        let coeffs = (0..self.order())
            .map(|k| self.coeffs[k + 1] * (k + 1) as f64)
            .collect();
        Jet {
            base: self.base,
            coeffs,
        }
    }

    fn check_compatible(&self, other: &Jet) -> Result<()> {
        if self.base != other.base || self.order() != other.order() {
            return Err(Error::Contract(format!(
                "jet mismatch: ({}, K={}) vs ({}, K={})",
                self.base,
                self.order(),
                other.base,
                other.order()
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(Complex64, Complex64) -> Complex64) -> Jet {
        Jet {
            base: self.base,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// Truncated Cauchy product.
    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        let k_max = self.order();
        let coeffs = (0..=k_max)
            .map(|k| {
                (0..=k)
                    .map(|i| self.coeffs[i] * other.coeffs[k - i])
                    .sum()
            })
            .collect();
        Ok(Jet {
            base: self.base,
            coeffs,
        })
    }

    pub fn scale(&self, s: Complex64) -> Jet {
        Jet {
            base: self.base,
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }

    /// Multiplicative inverse; fails when the constant term is negligible
    /// relative to the jet magnitude.
    pub fn inv(&self) -> Result<Jet> {
        let a0 = self.coeffs[0];
        let mag = self.magnitude();
        if a0.norm() <= EPS_PIVOT * mag || a0.norm() == 0.0 {
            return Err(Error::SingularPoint { x0: self.base });
        }
        let inv0 = a0.inv();
        let mut out = vec![Complex64::default(); self.coeffs.len()];
        out[0] = inv0;
        for k in 1..out.len() {
            let s: Complex64 = (1..=k).map(|i| self.coeffs[i] * out[k - i]).sum();
            out[k] = -s * inv0;
        }
        Ok(Jet {
            base: self.base,
            coeffs: out,
        })
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.try_mul(&other.inv()?)
    }

    /// Integer power; negative exponents go through [`Jet::inv`].
    pub fn powi(&self, e: i32) -> Result<Jet> {
        let mut result = Jet::one(self.base, self.order());
        let mut base = self.clone();
        let mut m = e.unsigned_abs();
        while m > 0 {
            if m & 1 == 1 {
                result = result.try_mul(&base)?;
            }
            m >>= 1;
            if m > 0 {
                base = base.try_mul(&base)?;
            }
        }
        if e < 0 {
            result.inv()
        } else {
            Ok(result)
        }
    }

    pub fn exp(&self) -> Jet {
        let k_max = self.order();
        let mut out = vec![Complex64::default(); k_max + 1];
        out[0] = self.coeffs[0].exp();
        for k in 1..=k_max {
            let s: Complex64 = (1..=k)
                .map(|j| self.coeffs[j] * out[k - j] * j as f64)
                .sum();
            out[k] = s / k as f64;
        }
        Jet {
            base: self.base,
            coeffs: out,
        }
    }

    /// Simultaneous `(sin f, cos f)`.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let k_max = self.order();
        let mut s = vec![Complex64::default(); k_max + 1];
        let mut co = vec![Complex64::default(); k_max + 1];
        s[0] = self.coeffs[0].sin();
        co[0] = self.coeffs[0].cos();
        for k in 1..=k_max {
            let mut ds = Complex64::default();
            let mut dc = Complex64::default();
            for j in 1..=k {
                let w = self.coeffs[j] * j as f64;
                ds += w * co[k - j];
                dc -= w * s[k - j];
            }
            s[k] = ds / k as f64;
            co[k] = dc / k as f64;
        }
        (
            Jet {
                base: self.base,
                coeffs: s,
            },
            Jet {
                base: self.base,
                coeffs: co,
            },
        )
    }

    pub fn sin(&self) -> Jet {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Jet {
        self.sin_cos().1
    }

    /// Re-labels the jet of `g` at `a*x0 + b` as the jet of `x -> g(a x + b)` at `x0`.
    pub fn affine_pullback(&self, x0: Complex64, scale: Complex64) -> Jet {
        let mut p = c(1.0);
        let coeffs = self
            .coeffs
            .iter()
            .map(|ck| {
                let v = ck * p;
                p *= scale;
                v
            })
            .collect();
        Jet { base: x0, coeffs }
    }

    /// Evaluates the truncated series at `x0 + h`.
    pub fn eval_at(&self, h: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::default(), |acc, ck| acc * h + ck)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.try_add(rhs).expect("jet add")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.try_sub(rhs).expect("jet sub")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.try_mul(rhs).expect("jet mul")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(c(-1.0))
    }
}
