//! Chains defined by initial data: `-F_i'' + (V - lambda) F_i = F_{i-1}`,
//! integrated by Taylor stepping.
//!
//! States at grid points `x0 + k * GRID` are computed once, outward from
//! `x0`, and kept in an append-only table. A query integrates from the
//! nearest checkpoint between `x0` and the query point, so results do not
//! depend on query order.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use nalgebra::DVector;
use num_complex::Complex64;

use super::chain::Chain;
use crate::error::{Error, Result};
use crate::jets::expr::ScalarExpr;
use crate::jets::function::{closure_fn, expr_fn, point_key, ExprMatrix, MatFn};
use crate::jets::matrix::{CMatrix, MatrixJet};

pub const TAYLOR_ORDER: usize = 12;
pub const LOCAL_TOL: f64 = 1e-12;
pub const GRID: f64 = 0.25;
const MIN_STEP: f64 = 1e-9;

type CVec = DVector<Complex64>;

/// Values and first derivatives of every member.
#[derive(Debug, Clone)]
struct State {
    values: Vec<CVec>,
    derivs: Vec<CVec>,
}

impl State {
    fn norm(&self) -> f64 {
        self.values
            .iter()
            .chain(&self.derivs)
            .flat_map(|v| v.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Initial data of one member: value and derivative vectors at `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub value: Vec<Complex64>,
    pub derivative: Vec<Complex64>,
}

struct OdeCore {
    n: usize,
    potential: MatFn,
    lambda: Complex64,
    x0: f64,
    seeds: Vec<Seed>,
    grid: Mutex<BTreeMap<i64, State>>,
    jets: Mutex<HashMap<(u64, u64), Vec<MatrixJet>>>,
}

impl OdeCore {
    /// Taylor coefficients (as vectors) of every member at `x` to `order`.
    fn series(&self, x: f64, state: &State, order: usize) -> Result<Vec<Vec<CVec>>> {
        let v = self.potential.eval(Complex64::new(x, 0.0), order.saturating_sub(2))?;
        let p = self.seeds.len();
        let mut out: Vec<Vec<CVec>> = Vec::with_capacity(p);
        for i in 0..p {
            let mut c: Vec<CVec> = Vec::with_capacity(order + 1);
            c.push(state.values[i].clone());
            if order >= 1 {
                c.push(state.derivs[i].clone());
            }
            for k in 0..order.saturating_sub(1) {
                let mut acc = c[k].scale(1.0) * (-self.lambda);
                for j in 0..=k {
                    acc += v.coeff(j) * &c[k - j];
                }
                if i > 0 {
                    acc -= &out[i - 1][k];
                }
                let denom = ((k + 1) * (k + 2)) as f64;
                c.push(acc / Complex64::new(denom, 0.0));
            }
            out.push(c);
        }
        Ok(out)
    }

    fn advance(&self, from: f64, state: &State, to: f64) -> Result<State> {
        let mut x = from;
        let mut s = state.clone();
        let dir = (to - from).signum();
        let mut steps = 0usize;
        while (to - x).abs() > 0.0 {
            let series = self.series(x, &s, TAYLOR_ORDER)?;
            let scale = s.norm().max(1.0);
            let mut h = f64::INFINITY;
            for k in [TAYLOR_ORDER - 1, TAYLOR_ORDER] {
                let ck = series
                    .iter()
                    .map(|c| c[k].iter().map(|z| z.norm()).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                if ck > 0.0 {
                    h = h.min((LOCAL_TOL * scale / ck).powf(1.0 / k as f64));
                }
            }
            let h = (0.9 * h).min((to - x).abs());
            if !(h >= MIN_STEP) && (to - x).abs() > MIN_STEP {
                return Err(Error::IntegrationFailure {
                    x: Complex64::new(x, 0.0),
                    reason: format!("step size {h:.3e} below minimum"),
                });
            }
            steps += 1;
            if steps > 200_000 {
                return Err(Error::IntegrationFailure {
                    x: Complex64::new(x, 0.0),
                    reason: "too many steps".into(),
                });
            }
            let hs = Complex64::new(dir * h, 0.0);
            let mut values = Vec::with_capacity(series.len());
            let mut derivs = Vec::with_capacity(series.len());
            for c in &series {
                let mut val = CVec::zeros(self.n);
                let mut der = CVec::zeros(self.n);
                for k in (0..c.len()).rev() {
                    val = val * hs + &c[k];
                    if k >= 1 {
                        der = der * hs + &c[k] * Complex64::new(k as f64, 0.0);
                    }
                }
                values.push(val);
                derivs.push(der);
            }
            s = State { values, derivs };
            x = if h == (to - x).abs() { to } else { x + dir * h };
        }
        Ok(s)
    }

    fn checkpoint(&self, k: i64) -> Result<State> {
        if let Some(s) = self.grid.lock().unwrap().get(&k) {
            return Ok(s.clone());
        }
        let state = if k == 0 {
            State {
                values: self.seeds.iter().map(|s| CVec::from_vec(s.value.clone())).collect(),
                derivs: self
                    .seeds
                    .iter()
                    .map(|s| CVec::from_vec(s.derivative.clone()))
                    .collect(),
            }
        } else {
            let prev = k - k.signum();
            let start = self.checkpoint(prev)?;
            self.advance(
                self.x0 + prev as f64 * GRID,
                &start,
                self.x0 + k as f64 * GRID,
            )?
        };
        self.grid.lock().unwrap().entry(k).or_insert(state.clone());
        Ok(state)
    }

    fn jets_at(&self, x0: Complex64, order: usize) -> Result<Vec<MatrixJet>> {
        if x0.im != 0.0 {
            return Err(Error::Contract("ODE chains are evaluated on the real axis only".into()));
        }
        let key = point_key(x0);
        if let Some(hit) = self.jets.lock().unwrap().get(&key) {
            if hit[0].order() >= order {
                return Ok(hit.iter().map(|m| m.truncate(order)).collect());
            }
        }
        let x = x0.re;
        let k = ((x - self.x0) / GRID).trunc() as i64;
        let start = self.checkpoint(k)?;
        let state = self.advance(self.x0 + k as f64 * GRID, &start, x)?;
        let series = self.series(x, &state, order)?;
        let out: Vec<MatrixJet> = series
            .into_iter()
            .map(|c| {
                let coeffs = c
                    .into_iter()
                    .map(|v| CMatrix::from_column_slice(self.n, 1, v.as_slice()))
                    .collect();
                MatrixJet::from_coeffs(x0, coeffs)
            })
            .collect();
        self.jets.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }
}

/// Chain of `n`-vector members from initial data at `x0`.
pub fn ode_chain(potential: MatFn, lambda: Complex64, seeds: Vec<Seed>, x0: f64) -> Result<Chain> {
    let n = potential.dims().0;
    if potential.dims() != (n, n) {
        return Err(Error::Contract("potential must be square".into()));
    }
    if seeds.is_empty() {
        return Err(Error::BadChainLengths("ODE chain needs at least one seed".into()));
    }
    if seeds
        .iter()
        .any(|s| s.value.len() != n || s.derivative.len() != n)
    {
        return Err(Error::Contract(format!("ODE seeds must have {n} components")));
    }
    let singular = potential.singular_set();
    let core = Arc::new(OdeCore {
        n,
        potential,
        lambda,
        x0,
        seeds,
        grid: Mutex::new(BTreeMap::new()),
        jets: Mutex::new(HashMap::new()),
    });
    let members = (0..core.seeds.len())
        .map(|i| {
            let c = core.clone();
            closure_fn((n, 1), singular.clone(), move |x, k| {
                Ok(c.jets_at(x, k)?.swap_remove(i))
            })
        })
        .collect();
    Ok(Chain::new(lambda, members))
}

/// Scalar chain for `-d^2 + v`, seeds given as `(phi_i(x0), phi_i'(x0))`.
pub fn chain_from_scalar(
    v: &ScalarExpr,
    lambda: Complex64,
    seeds: &[(Complex64, Complex64)],
    x0: f64,
) -> Result<Chain> {
    let potential = expr_fn(ExprMatrix::new(1, 1, vec![v.clone()])?);
    let seeds = seeds
        .iter()
        .map(|&(a, b)| Seed {
            value: vec![a],
            derivative: vec![b],
        })
        .collect();
    ode_chain(potential, lambda, seeds, x0)
}
