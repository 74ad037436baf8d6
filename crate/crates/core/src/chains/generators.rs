//! Closed-form chain families and the stacked diagonal construction.

use num_complex::Complex64;

use super::chain::{Chain, ChainSet};
use crate::diffop::hamiltonian::Hamiltonian;
use crate::error::{Error, Result};
use crate::jets::expr::ScalarExpr;
use crate::jets::function::{closure_fn, expr_fn, ExprMatrix, MatFn};
use crate::jets::jet::Jet;
use crate::jets::matrix::MatrixJet;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Ascending polynomial coefficients of the free chain at `lambda = 0`:
/// `phi_0 = 1`, `phi_j = -(double antiderivative of phi_{j-1}) + a_j x + b_j`.
pub fn free_polynomial_chain(shifts: &[(Complex64, Complex64)]) -> Vec<Vec<Complex64>> {
    let mut out = vec![vec![c(1.0)]];
    for &(a, b) in shifts {
        let prev = out.last().unwrap();
        let mut next = vec![Complex64::default(); prev.len() + 2];
        for (k, &ck) in prev.iter().enumerate() {
            next[k + 2] = -ck / c(((k + 1) * (k + 2)) as f64);
        }
        next[0] += b;
        next[1] += a;
        out.push(next);
    }
    out
}

/// Members `phi_i = (1/i!) d^i/dlambda^i exp(k(lambda) x)` with
/// `k(lambda) = sign * sqrt(c - lambda)`, as `exp(k0 x) * p_i(x)`.
/// Returns `(k0, [p_0, ..., p_{len-1}])` with ascending coefficients.
pub fn exponential_chain(
    level: Complex64,
    lambda: Complex64,
    sign: f64,
    len: usize,
) -> Result<(Complex64, Vec<Vec<Complex64>>)> {
    let w = level - lambda;
    if w.norm() < 1e-12 {
        return Err(Error::Contract("exponential chain needs lambda away from the level".into()));
    }
    let k0 = w.sqrt() * sign;
    // d(eps) = k(lambda + eps) - k0 = k0 * sum_{j>=1} binom(1/2, j) (-eps / w)^j
    let mut d = vec![Complex64::default(); len.max(1)];
    let mut binom = 1.0;
    for j in 1..len {
        binom *= (0.5 - (j - 1) as f64) / j as f64;
        d[j] = k0 * binom * (-w.inv()).powu(j as u32);
    }
    let dj = Jet::new(c(0.0), d);
    let mut powers = vec![Jet::one(c(0.0), len.max(1) - 1)];
    for m in 1..len {
        powers.push(&powers[m - 1] * &dj);
    }
    let mut fact = 1.0;
    let mut polys: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); len]; len];
    for (m, pw) in powers.iter().enumerate() {
        if m > 0 {
            fact *= m as f64;
        }
        for (i, poly) in polys.iter_mut().enumerate() {
            poly[m] = pw.coeff(i) / fact;
        }
    }
    for (i, poly) in polys.iter_mut().enumerate() {
        poly.truncate(i + 1);
    }
    Ok((k0, polys))
}

/// Scalar expressions `a * phi_i^(+) + b * phi_i^(-)` for the two branches.
pub fn mixed_exponential_chain(
    level: Complex64,
    lambda: Complex64,
    a: Complex64,
    b: Complex64,
    len: usize,
) -> Result<Vec<ScalarExpr>> {
    let (kp, pp) = exponential_chain(level, lambda, 1.0, len)?;
    let (km, pm) = exponential_chain(level, lambda, -1.0, len)?;
    Ok((0..len)
        .map(|i| {
            let plus: Vec<Complex64> = pp[i].iter().map(|z| z * a).collect();
            let minus: Vec<Complex64> = pm[i].iter().map(|z| z * b).collect();
            let mut terms = Vec::new();
            if a != Complex64::default() {
                terms.push(ScalarExpr::exp_poly(kp, &plus));
            }
            if b != Complex64::default() {
                terms.push(ScalarExpr::exp_poly(km, &minus));
            }
            ScalarExpr::add(terms)
        })
        .collect())
}

/// Stacked vector `(phi_{1, l}, phi_{2, l - N}, ..., phi_{n, l - (n-1) N})`,
/// with `phi_{i, j} = 0` for `j < 0`.
fn stacked_member(scalars: &[Vec<MatFn>], l: usize, big_n: usize) -> MatFn {
    let n = scalars.len();
    let parts: Vec<Option<MatFn>> = (0..n)
        .map(|i| {
            l.checked_sub(i * big_n)
                .map(|j| scalars[i][j].clone())
        })
        .collect();
    let singular = parts
        .iter()
        .flatten()
        .flat_map(|f| f.singular_set())
        .collect();
    closure_fn((n, 1), singular, move |x0, k| {
        let mut entries = Vec::with_capacity(n);
        for p in &parts {
            entries.push(match p {
                Some(f) => f.eval(x0, k)?.entry(0, 0),
                None => Jet::zero(x0, k),
            });
        }
        MatrixJet::from_entries(n, 1, &entries)
    })
}

/// Diagonal Hamiltonian `diag(-d^2 + v_l)` with one chain of length `n N`
/// at `lambda0`, stacked from scalar chains of lengths `N (n - l + 1)`.
pub fn assemble_diag(
    potentials: &[MatFn],
    scalar_chains: &[Vec<MatFn>],
    big_n: usize,
    lambda0: Complex64,
) -> Result<ChainSet> {
    let n = potentials.len();
    if scalar_chains.len() != n || n == 0 {
        return Err(Error::BadChainLengths(format!(
            "{} scalar chains for {} channels",
            scalar_chains.len(),
            n
        )));
    }
    for (i, ch) in scalar_chains.iter().enumerate() {
        let want = big_n * (n - i);
        if ch.len() != want {
            return Err(Error::BadChainLengths(format!(
                "channel {} has {} members, expected {want}",
                i + 1,
                ch.len()
            )));
        }
    }
    let v = diagonal_fn(potentials)?;
    let h = Hamiltonian::new(v)?;
    let members = (0..n * big_n)
        .map(|l| stacked_member(scalar_chains, l, big_n))
        .collect();
    ChainSet::new(h, vec![Chain::new(lambda0, members)])
}

/// Diagonal matrix function from `1 x 1` entries.
pub fn diagonal_fn(entries: &[MatFn]) -> Result<MatFn> {
    if entries.iter().any(|e| e.dims() != (1, 1)) {
        return Err(Error::Contract("diagonal entries must be scalar".into()));
    }
    let n = entries.len();
    let parts = entries.to_vec();
    let singular = parts.iter().flat_map(|f| f.singular_set()).collect();
    if let Some(consts) = parts.iter().map(|p| p.constant()).collect::<Option<Vec<_>>>() {
        let m = crate::jets::matrix::CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                consts[i][(0, 0)]
            } else {
                Complex64::default()
            }
        });
        return Ok(crate::jets::function::const_fn(m));
    }
    Ok(closure_fn((n, n), singular, move |x0, k| {
        let mut grid = vec![Jet::zero(x0, k); n * n];
        for (i, p) in parts.iter().enumerate() {
            grid[i * n + i] = p.eval(x0, k)?.entry(0, 0);
        }
        MatrixJet::from_entries(n, n, &grid)
    }))
}

pub fn scalar_fn(e: ScalarExpr) -> MatFn {
    expr_fn(ExprMatrix::column(vec![e]))
}
