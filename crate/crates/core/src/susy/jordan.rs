//! Exact Jordan-data bookkeeping for conjugate intertwiners.

use num_complex::Complex64;

use crate::chains::chain::{ChainSet, JordanSpec};
use crate::diffop::hamiltonian::SpectralPolynomial;
use crate::error::{Error, Result};

/// Jordan data of `T^-` (the conjugate's matrix) from the data of `T^+`.
///
/// For each value with largest block `kappa` occurring `mu` times, the value
/// survives iff `mu < 2n`; it then has `2n - mu` blocks: `kappa` repeated
/// `2n - g` times followed by `kappa - k_i` for the blocks `k_i < kappa`.
pub fn jordan_of_conjugate(js: &JordanSpec, n: usize) -> Result<JordanSpec> {
    js.check_bound(n)?;
    let mut out = Vec::new();
    for e in &js.entries {
        let g = e.blocks.len();
        let kappa = e.blocks[0];
        let mu = e.blocks.iter().filter(|&&b| b == kappa).count();
        if mu >= 2 * n {
            continue;
        }
        let g_plus = 2 * n - mu;
        let mut blocks = Vec::with_capacity(g_plus);
        for j in 1..=g_plus {
            let b = if j <= 2 * n - g {
                kappa
            } else {
                kappa - e.blocks[2 * n - j]
            };
            if b > 0 {
                blocks.push(b);
            }
        }
        out.push((e.lambda, blocks));
    }
    JordanSpec::new(out)
}

/// `kappa_l` per value: the polynomial `prod (lambda - lambda_l)^{kappa_l}`.
pub fn kappa_polynomial(js: &JordanSpec) -> SpectralPolynomial {
    SpectralPolynomial {
        roots: js.entries.iter().map(|e| (e.lambda, e.blocks[0])).collect(),
    }
}

/// Jordan data of `Q D` where `D = prod (H - lambda_l)^{delta_l}` and `Q`
/// has data `js`: each block grows by `delta`, and `2n - g` new blocks of
/// order `delta` appear.
pub fn compose_with_polynomial(js: &JordanSpec, poly: &SpectralPolynomial, n: usize) -> Result<JordanSpec> {
    js.check_bound(n)?;
    let mut entries: Vec<(Complex64, Vec<usize>)> = js
        .entries
        .iter()
        .map(|e| (e.lambda, e.blocks.clone()))
        .collect();
    for &(lambda, delta) in &poly.roots {
        if delta == 0 {
            continue;
        }
        let slot = match entries.iter().position(|(l, _)| *l == lambda) {
            Some(i) => i,
            None => {
                entries.push((lambda, Vec::new()));
                entries.len() - 1
            }
        };
        let blocks = &mut entries[slot].1;
        for b in blocks.iter_mut() {
            *b += delta;
        }
        let extra = 2 * n - blocks.len();
        blocks.extend(std::iter::repeat_n(delta, extra));
    }
    JordanSpec::new(entries)
}

/// Values with exactly `2n` blocks and their smallest block order.
pub fn removable(js: &JordanSpec, n: usize) -> Result<SpectralPolynomial> {
    js.check_bound(n)?;
    Ok(SpectralPolynomial {
        roots: js
            .entries
            .iter()
            .filter(|e| e.blocks.len() == 2 * n)
            .map(|e| (e.lambda, *e.blocks.last().unwrap()))
            .collect(),
    })
}

/// Jordan data left after dividing out `prod (lambda_l - H)^{delta_l}`:
/// every block of a removed value shrinks by `delta_l`.
pub fn after_removal(js: &JordanSpec, removed: &SpectralPolynomial) -> Result<JordanSpec> {
    let mut entries = Vec::new();
    for e in &js.entries {
        let delta = removed.multiplicity(e.lambda);
        if e.blocks.iter().any(|&b| b < delta) {
            return Err(Error::InvalidJordanSpec(format!(
                "cannot remove order {delta} at {} from blocks {:?}",
                e.lambda, e.blocks
            )));
        }
        entries.push((e.lambda, e.blocks.iter().map(|b| b - delta).filter(|&b| b > 0).collect()));
    }
    JordanSpec::new(entries)
}

/// The two expressions for the order after weak minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct OrderFormula {
    pub order: usize,
    pub removed_degree: usize,
    /// `N - 2 sum delta_l`.
    pub by_removal: i64,
    /// `(1/n) sum_l k_l` with `k_l = mult_l - 2n delta_l`; `None` when not an integer.
    pub by_multiplicity: Option<i64>,
}

impl OrderFormula {
    pub fn consistent(&self) -> bool {
        self.by_multiplicity == Some(self.by_removal)
    }
}

pub fn order_formula(js: &JordanSpec, n: usize, order: usize) -> Result<OrderFormula> {
    let removed = removable(js, n)?;
    let degree = removed.degree();
    let total: i64 = js
        .entries
        .iter()
        .map(|e| {
            let mult = e.blocks.iter().sum::<usize>() as i64;
            let delta = removed.multiplicity(e.lambda) as i64;
            mult - 2 * n as i64 * delta
        })
        .sum();
    Ok(OrderFormula {
        order,
        removed_degree: degree,
        by_removal: order as i64 - 2 * degree as i64,
        by_multiplicity: (total % n as i64 == 0).then_some(total / n as i64),
    })
}

/// Jordan data of `P` (first `n m` members) and of `K` with `Q = K P`, for a
/// chain-ordered kernel: chain `c` with `p_c` members in the prefix leaves a
/// chain of `len_c - p_c` images in `ker K`.
pub fn split_jordan_specs(cs: &ChainSet, m: usize) -> Result<(JordanSpec, JordanSpec)> {
    let count = cs.n() * m;
    if count > cs.total() {
        return Err(Error::Contract(format!("split at order {m} exceeds the kernel")));
    }
    let js_p = cs.prefix_jordan_spec(count)?;
    let mut in_prefix = vec![0usize; cs.chains().len()];
    for &(c, _) in &cs.ordering()[..count] {
        in_prefix[c] += 1;
    }
    let mut entries: Vec<(Complex64, Vec<usize>)> = Vec::new();
    for (c, chain) in cs.chains().iter().enumerate() {
        let rest = chain.len() - in_prefix[c];
        if rest == 0 {
            continue;
        }
        match entries.iter_mut().find(|(l, _)| *l == chain.lambda) {
            Some(e) => e.1.push(rest),
            None => entries.push((chain.lambda, vec![rest])),
        }
    }
    Ok((js_p, JordanSpec::new(entries)?))
}
