//! Matrix-valued function evaluators: `(x0, K) -> MatrixJet`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::expr::ScalarExpr;
use super::matrix::{mat_jet_inverse, CMatrix, MatrixJet};
use crate::error::{Error, Result};

/// A matrix function that can be expanded to any order at any regular point.
///
/// Implementations must be deterministic and prefix-consistent:
/// `eval(x0, K)` equals `eval(x0, K').truncate(K)` for `K' > K`.
pub trait MatrixFunction: Send + Sync {
    fn dims(&self) -> (usize, usize);

    fn eval(&self, x0: Complex64, order: usize) -> Result<MatrixJet>;

    /// Declared real points where evaluation is known to fail.
    fn singular_set(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `Some` when the function is a constant matrix.
    fn constant(&self) -> Option<CMatrix> {
        None
    }
}

pub type MatFn = Arc<dyn MatrixFunction>;

impl fmt::Debug for dyn MatrixFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, c) = self.dims();
        write!(f, "MatrixFunction({r}x{c})")
    }
}

pub(crate) fn point_key(x0: Complex64) -> (u64, u64) {
    (x0.re.to_bits(), x0.im.to_bits())
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone)]
pub struct ConstMatrix(pub CMatrix);

impl MatrixFunction for ConstMatrix {
    fn dims(&self) -> (usize, usize) {
        self.0.shape()
    }

    fn eval(&self, x0: Complex64, order: usize) -> Result<MatrixJet> {
        Ok(MatrixJet::constant(x0, order, &self.0))
    }

    fn constant(&self) -> Option<CMatrix> {
        Some(self.0.clone())
    }
}

/// Row-major grid of closed-form scalar expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<ScalarExpr>,
}

impl ExprMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<ScalarExpr>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Contract(format!(
                "expression matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(ExprMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn diagonal(entries: Vec<ScalarExpr>) -> Self {
        let n = entries.len();
        let mut grid = vec![ScalarExpr::default(); n * n];
        for (i, e) in entries.into_iter().enumerate() {
            grid[i * n + i] = e;
        }
        ExprMatrix {
            rows: n,
            cols: n,
            entries: grid,
        }
    }

    pub fn column(entries: Vec<ScalarExpr>) -> Self {
        ExprMatrix {
            rows: entries.len(),
            cols: 1,
            entries,
        }
    }
}

impl MatrixFunction for ExprMatrix {
    fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn eval(&self, x0: Complex64, order: usize) -> Result<MatrixJet> {
        let jets = self
            .entries
            .iter()
            .map(|e| e.eval(x0, order))
            .collect::<Result<Vec<_>>>()?;
        MatrixJet::from_entries(self.rows, self.cols, &jets)
    }

    fn singular_set(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.entries.iter().flat_map(|e| e.singular_set()).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    }

    fn constant(&self) -> Option<CMatrix> {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for (k, e) in self.entries.iter().enumerate() {
            match e {
                ScalarExpr::Const { value } => m[(k / self.cols, k % self.cols)] = *value,
                _ => return None,
            }
        }
        Some(m)
    }
}

type EvalFn = dyn Fn(Complex64, usize) -> Result<MatrixJet> + Send + Sync;

/// Procedural evaluator backed by a closure.
pub struct FnMatrix {
    dims: (usize, usize),
    singular: Vec<f64>,
    f: Box<EvalFn>,
}

impl FnMatrix {
    pub fn new<F>(dims: (usize, usize), singular: Vec<f64>, f: F) -> Self
    where
        F: Fn(Complex64, usize) -> Result<MatrixJet> + Send + Sync + 'static,
    {
        FnMatrix {
            dims,
            singular,
            f: Box::new(f),
        }
    }
}

impl MatrixFunction for FnMatrix {
    fn dims(&self) -> (usize, usize) {
        self.dims
    }

    fn eval(&self, x0: Complex64, order: usize) -> Result<MatrixJet> {
        (self.f)(x0, order)
    }

    fn singular_set(&self) -> Vec<f64> {
        self.singular.clone()
    }
}

/// Memoizes the highest order requested per point and truncates for lower orders.
pub struct Cached {
    inner: MatFn,
    cache: Mutex<HashMap<(u64, u64), MatrixJet>>,
}

impl Cached {
    pub fn new(inner: MatFn) -> Self {
        Cached {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl MatrixFunction for Cached {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    fn eval(&self, x0: Complex64, order: usize) -> Result<MatrixJet> {
        let key = point_key(x0);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            if hit.order() >= order {
                return Ok(hit.truncate(order));
            }
        }
        let value = self.inner.eval(x0, order)?;
        self.cache.lock().unwrap().insert(key, value.clone());
        Ok(value)
    }

    fn singular_set(&self) -> Vec<f64> {
        self.inner.singular_set()
    }

    fn constant(&self) -> Option<CMatrix> {
        self.inner.constant()
    }
}

pub fn const_fn(m: CMatrix) -> MatFn {
    Arc::new(ConstMatrix(m))
}

pub fn expr_fn(m: ExprMatrix) -> MatFn {
    Arc::new(m)
}

pub fn closure_fn<F>(dims: (usize, usize), singular: Vec<f64>, f: F) -> MatFn
where
    F: Fn(Complex64, usize) -> Result<MatrixJet> + Send + Sync + 'static,
{
    Arc::new(FnMatrix::new(dims, singular, f))
}

pub fn cached(f: MatFn) -> MatFn {
    Arc::new(Cached::new(f))
}

fn merged(a: &MatFn, b: &MatFn) -> Vec<f64> {
    let mut s = a.singular_set();
    s.extend(b.singular_set());
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

pub fn add_fn(a: &MatFn, b: &MatFn) -> MatFn {
    if let (Some(x), Some(y)) = (a.constant(), b.constant()) {
        return const_fn(x + y);
    }
    let (a2, b2) = (a.clone(), b.clone());
    closure_fn(a.dims(), merged(a, b), move |x0, k| {
        a2.eval(x0, k)?.try_add(&b2.eval(x0, k)?)
    })
}

pub fn sub_fn(a: &MatFn, b: &MatFn) -> MatFn {
    add_fn(a, &scale_fn(b, real(-1.0)))
}

pub fn mul_fn(a: &MatFn, b: &MatFn) -> MatFn {
    if let (Some(x), Some(y)) = (a.constant(), b.constant()) {
        return const_fn(x * y);
    }
    let (a2, b2) = (a.clone(), b.clone());
    let dims = (a.dims().0, b.dims().1);
    closure_fn(dims, merged(a, b), move |x0, k| {
        a2.eval(x0, k)?.try_mul(&b2.eval(x0, k)?)
    })
}

pub fn scale_fn(a: &MatFn, s: Complex64) -> MatFn {
    if let Some(x) = a.constant() {
        return const_fn(x * s);
    }
    let a2 = a.clone();
    closure_fn(a.dims(), a.singular_set(), move |x0, k| Ok(a2.eval(x0, k)?.scale(s)))
}

pub fn left_const_fn(m: &CMatrix, a: &MatFn) -> MatFn {
    mul_fn(&const_fn(m.clone()), a)
}

pub fn right_const_fn(a: &MatFn, m: &CMatrix) -> MatFn {
    mul_fn(a, &const_fn(m.clone()))
}

/// First derivative, evaluated from one extra order of the argument.
pub fn derivative_fn(a: &MatFn) -> MatFn {
    let (r, c) = a.dims();
    if a.constant().is_some() {
        return const_fn(CMatrix::zeros(r, c));
    }
    let a2 = a.clone();
    closure_fn((r, c), a.singular_set(), move |x0, k| {
        Ok(a2.eval(x0, k + 1)?.derivative())
    })
}

/// Pointwise inverse of a square matrix function.
pub fn inverse_fn(a: &MatFn) -> MatFn {
    if let Some(m) = a.constant() {
        if let Some(inv) = m.clone().try_inverse() {
            return const_fn(inv);
        }
    }
    let a2 = a.clone();
    closure_fn(a.dims(), a.singular_set(), move |x0, k| {
        mat_jet_inverse(&a2.eval(x0, k)?)
    })
}

/// Sub-block `rows x cols` starting at `(r0, c0)`.
pub fn block_fn(a: &MatFn, r0: usize, c0: usize, rows: usize, cols: usize) -> MatFn {
    if let Some(m) = a.constant() {
        return const_fn(m.view((r0, c0), (rows, cols)).into_owned());
    }
    let a2 = a.clone();
    closure_fn((rows, cols), a.singular_set(), move |x0, k| {
        let full = a2.eval(x0, k)?;
        let coeffs = full
            .coeffs()
            .iter()
            .map(|m| m.view((r0, c0), (rows, cols)).into_owned())
            .collect();
        Ok(MatrixJet::from_coeffs(x0, coeffs))
    })
}

/// Value of `f` at a point.
pub fn value_at(f: &MatFn, x: Complex64) -> Result<CMatrix> {
    Ok(f.eval(x, 0)?.value().clone())
}
