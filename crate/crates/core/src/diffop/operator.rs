//! Matrix linear differential operators `sum_j X_j(x) d^j`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jets::function::{closure_fn, point_key, MatFn};
use crate::jets::matrix::{CMatrix, MatrixJet};

type CoeffEval = dyn Fn(Complex64, usize) -> Result<Vec<MatrixJet>> + Send + Sync;

struct Inner {
    eval: Box<CoeffEval>,
    leading: Option<CMatrix>,
    singular: Vec<f64>,
    cache: Mutex<HashMap<(u64, u64), Vec<MatrixJet>>>,
}

/// An `n x n` operator of order `N` whose coefficients are evaluated jointly
/// at a point. Coefficient jets are memoized per point at the highest order
/// requested so far.
#[derive(Clone)]
pub struct MatDiffOperator {
    n: usize,
    order: usize,
    inner: Arc<Inner>,
}

impl fmt::Debug for MatDiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatDiffOperator")
            .field("n", &self.n)
            .field("order", &self.order)
            .field("leading", &self.inner.leading)
            .finish()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn merge_sets(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = a.iter().chain(b).copied().collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

impl MatDiffOperator {
    /// Procedural operator. `eval(x0, K)` must return `order + 1` jets of order `K`.
    pub fn from_fn<F>(
        n: usize,
        order: usize,
        leading: Option<CMatrix>,
        singular: Vec<f64>,
        eval: F,
    ) -> Self
    where
        F: Fn(Complex64, usize) -> Result<Vec<MatrixJet>> + Send + Sync + 'static,
    {
        MatDiffOperator {
            n,
            order,
            inner: Arc::new(Inner {
                eval: Box::new(eval),
                leading,
                singular,
                cache: Mutex::new(HashMap::new()),
            }),
        }
    }

    /// Operator from an explicit coefficient list (index `j` multiplies `d^j`).
    pub fn from_coefficients(coeffs: Vec<MatFn>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::Contract("operator needs at least one coefficient".into()));
        };
        let n = first.dims().0;
        if coeffs.iter().any(|c| c.dims() != (n, n)) {
            return Err(Error::Contract("operator coefficients must all be n x n".into()));
        }
        let order = coeffs.len() - 1;
        let leading = coeffs[order].constant();
        let singular = coeffs
            .iter()
            .fold(Vec::new(), |acc, c| merge_sets(&acc, &c.singular_set()));
        Ok(Self::from_fn(n, order, leading, singular, move |x0, k| {
            coeffs.iter().map(|c| c.eval(x0, k)).collect()
        }))
    }

    pub fn constant(m: CMatrix) -> Self {
        let n = m.nrows();
        let m2 = m.clone();
        Self::from_fn(n, 0, Some(m), Vec::new(), move |x0, k| {
            Ok(vec![MatrixJet::constant(x0, k, &m2)])
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(CMatrix::identity(n, n))
    }

    /// `I d`.
    pub fn derivative(n: usize) -> Self {
        Self::from_fn(n, 1, Some(CMatrix::identity(n, n)), Vec::new(), move |x0, k| {
            Ok(vec![
                MatrixJet::zeros(x0, k, n, n),
                MatrixJet::identity(x0, k, n),
            ])
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Leading coefficient when it is a known constant.
    pub fn leading_constant(&self) -> Option<&CMatrix> {
        self.inner.leading.as_ref()
    }

    pub fn singular_set(&self) -> &[f64] {
        &self.inner.singular
    }

    /// All coefficient jets at `x0` to order `K`.
    pub fn coeffs_at(&self, x0: Complex64, order: usize) -> Result<Vec<MatrixJet>> {
        let key = point_key(x0);
        if let Some(hit) = self.inner.cache.lock().unwrap().get(&key) {
            if hit[0].order() >= order {
                return Ok(hit.iter().map(|m| m.truncate(order)).collect());
            }
        }
        let value = (self.inner.eval)(x0, order)?;
        if value.len() != self.order + 1 || value.iter().any(|m| m.order() != order) {
            return Err(Error::Contract("operator evaluator returned malformed coefficients".into()));
        }
        self.inner
            .cache
            .lock()
            .unwrap()
            .insert(key, value.clone());
        Ok(value)
    }

    /// Coefficient values (order 0) at a point.
    pub fn values_at(&self, x0: Complex64) -> Result<Vec<CMatrix>> {
        Ok(self
            .coeffs_at(x0, 0)?
            .into_iter()
            .map(|m| m.value().clone())
            .collect())
    }

    /// Evaluator view of coefficient `j`.
    pub fn coefficient(&self, j: usize) -> MatFn {
        assert!(j <= self.order);
        let op = self.clone();
        closure_fn((self.n, self.n), self.inner.singular.clone(), move |x0, k| {
            Ok(op.coeffs_at(x0, k)?.swap_remove(j))
        })
    }

    /// Jet of `sum_j X_j f^(j)` at `x0` to order `K`; `f` may have any column count.
    pub fn apply(&self, f: &MatFn, x0: Complex64, order: usize) -> Result<MatrixJet> {
        if f.dims().0 != self.n {
            return Err(Error::Contract("apply: row count mismatch".into()));
        }
        let coeffs = self.coeffs_at(x0, order)?;
        let fj = f.eval(x0, order + self.order)?;
        let mut acc = MatrixJet::zeros(x0, order, self.n, f.dims().1);
        for (j, c) in coeffs.iter().enumerate() {
            acc = acc.try_add(&c.try_mul(&fj.nth_derivative(j, order))?)?;
        }
        Ok(acc)
    }

    /// Lazy evaluator of `self f`.
    pub fn apply_fn(&self, f: &MatFn) -> MatFn {
        let op = self.clone();
        let f2 = f.clone();
        let singular = merge_sets(&self.inner.singular, &f.singular_set());
        closure_fn((self.n, f.dims().1), singular, move |x0, k| op.apply(&f2, x0, k))
    }

    /// `self + other`, padding the lower-order operand with zero coefficients.
    pub fn add(&self, other: &MatDiffOperator) -> Result<MatDiffOperator> {
        self.combine(other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &MatDiffOperator) -> Result<MatDiffOperator> {
        self.combine(other, Complex64::new(-1.0, 0.0))
    }

    fn combine(&self, other: &MatDiffOperator, s: Complex64) -> Result<MatDiffOperator> {
        if self.n != other.n {
            return Err(Error::Contract("operator sum: sizes differ".into()));
        }
        let n = self.n;
        let order = self.order.max(other.order);
        let leading = match self.order.cmp(&other.order) {
            std::cmp::Ordering::Greater => self.inner.leading.clone(),
            std::cmp::Ordering::Less => other.inner.leading.as_ref().map(|m| m * s),
            std::cmp::Ordering::Equal => match (&self.inner.leading, &other.inner.leading) {
                (Some(a), Some(b)) => Some(a + b * s),
                _ => None,
            },
        };
        let (a, b) = (self.clone(), other.clone());
        let singular = merge_sets(&self.inner.singular, &other.inner.singular);
        Ok(Self::from_fn(n, order, leading, singular, move |x0, k| {
            let ca = a.coeffs_at(x0, k)?;
            let cb = b.coeffs_at(x0, k)?;
            (0..=order)
                .map(|j| {
                    let mut m = MatrixJet::zeros(x0, k, n, n);
                    if let Some(x) = ca.get(j) {
                        m = m.try_add(x)?;
                    }
                    if let Some(y) = cb.get(j) {
                        m = m.try_add(&y.scale(s))?;
                    }
                    Ok(m)
                })
                .collect()
        }))
    }

    pub fn scale(&self, s: Complex64) -> MatDiffOperator {
        let op = self.clone();
        let leading = self.inner.leading.as_ref().map(|m| m * s);
        Self::from_fn(self.n, self.order, leading, self.inner.singular.clone(), move |x0, k| {
            Ok(op.coeffs_at(x0, k)?.iter().map(|m| m.scale(s)).collect())
        })
    }

    /// `M * self` for a constant matrix `M`.
    pub fn left_mul(&self, m: &CMatrix) -> MatDiffOperator {
        let op = self.clone();
        let m2 = m.clone();
        let leading = self.inner.leading.as_ref().map(|l| m * l);
        Self::from_fn(self.n, self.order, leading, self.inner.singular.clone(), move |x0, k| {
            Ok(op.coeffs_at(x0, k)?.iter().map(|c| c.left_mul_const(&m2)).collect())
        })
    }

    /// `self * M` for a constant matrix `M`.
    pub fn right_mul(&self, m: &CMatrix) -> MatDiffOperator {
        let op = self.clone();
        let m2 = m.clone();
        let leading = self.inner.leading.as_ref().map(|l| l * m);
        Self::from_fn(self.n, self.order, leading, self.inner.singular.clone(), move |x0, k| {
            Ok(op.coeffs_at(x0, k)?.iter().map(|c| c.right_mul_const(&m2)).collect())
        })
    }

    /// `M self M^{-1}`.
    pub fn conjugate_by(&self, m: &CMatrix) -> Result<MatDiffOperator> {
        let inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Contract("conjugation by a singular matrix".into()))?;
        Ok(self.left_mul(m).right_mul(&inv))
    }

    /// `a o b`: the coefficient of `d^m` is
    /// `sum_{i - r + j = m} C(i, r) A_i B_j^(r)`.
    pub fn compose(a: &MatDiffOperator, b: &MatDiffOperator) -> Result<MatDiffOperator> {
        if a.n != b.n {
            return Err(Error::Contract("compose: sizes differ".into()));
        }
        let n = a.n;
        let (na, nb) = (a.order, b.order);
        let order = na + nb;
        let leading = match (&a.inner.leading, &b.inner.leading) {
            (Some(x), Some(y)) => Some(x * y),
            _ => None,
        };
        let (a2, b2) = (a.clone(), b.clone());
        let singular = merge_sets(&a.inner.singular, &b.inner.singular);
        Ok(Self::from_fn(n, order, leading, singular, move |x0, k| {
            let ca = a2.coeffs_at(x0, k)?;
            let cb = b2.coeffs_at(x0, k + na)?;
            let mut out = vec![MatrixJet::zeros(x0, k, n, n); order + 1];
            for (i, ai) in ca.iter().enumerate() {
                for r in 0..=i {
                    let c = Complex64::new(binomial(i, r), 0.0);
                    for (j, bj) in cb.iter().enumerate() {
                        let term = ai.try_mul(&bj.nth_derivative(r, k))?.scale(c);
                        let m = i - r + j;
                        out[m] = out[m].try_add(&term)?;
                    }
                }
            }
            Ok(out)
        }))
    }

    /// Composition of a sequence, leftmost first.
    pub fn compose_all(ops: &[MatDiffOperator]) -> Result<MatDiffOperator> {
        let (first, rest) = ops
            .split_first()
            .ok_or_else(|| Error::Contract("compose_all: empty list".into()))?;
        rest.iter()
            .try_fold(first.clone(), |acc, op| MatDiffOperator::compose(&acc, op))
    }
}
