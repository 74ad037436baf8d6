use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffop::hamiltonian::Hamiltonian;
use crate::diffop::residual::max_abs;
use crate::error::{Error, Result};
use crate::jets::function::MatFn;
use crate::jets::matrix::CMatrix;

/// Associated functions `(H - lambda) F_0 = 0`, `(H - lambda) F_i = F_{i-1}`.
#[derive(Clone)]
pub struct Chain {
    pub lambda: Complex64,
    pub members: Vec<MatFn>,
}

impl fmt::Debug for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chain(lambda = {}, len = {})", self.lambda, self.members.len())
    }
}

impl Chain {
    pub fn new(lambda: Complex64, members: Vec<MatFn>) -> Self {
        Chain { lambda, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One Jordan entry: a spectral value and its block orders (nonincreasing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanEntry {
    pub lambda: Complex64,
    pub blocks: Vec<usize>,
}

/// Jordan data of the matrix `T` of an intertwiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct JordanSpec {
    pub entries: Vec<JordanEntry>,
}

impl JordanSpec {
    /// Validates distinct values and positive block orders; sorts blocks
    /// nonincreasing and drops entries without blocks.
    pub fn new(entries: Vec<(Complex64, Vec<usize>)>) -> Result<Self> {
        let mut out: Vec<JordanEntry> = Vec::new();
        for (lambda, mut blocks) in entries {
            if blocks.contains(&0) {
                return Err(Error::InvalidJordanSpec("block orders must be positive".into()));
            }
            if out.iter().any(|e| e.lambda == lambda) {
                return Err(Error::InvalidJordanSpec(format!("repeated spectral value {lambda}")));
            }
            if blocks.is_empty() {
                continue;
            }
            blocks.sort_unstable_by(|a, b| b.cmp(a));
            out.push(JordanEntry { lambda, blocks });
        }
        Ok(JordanSpec { entries: out })
    }

    /// Checks the bound of at most `2n` blocks per value.
    pub fn check_bound(&self, n: usize) -> Result<()> {
        for e in &self.entries {
            if e.blocks.len() > 2 * n {
                return Err(Error::InvalidJordanSpec(format!(
                    "{} blocks for lambda = {} exceed 2n = {}",
                    e.blocks.len(),
                    e.lambda,
                    2 * n
                )));
            }
        }
        Ok(())
    }

    /// Sum of all block orders (the size of `T`).
    pub fn dimension(&self) -> usize {
        self.entries.iter().flat_map(|e| &e.blocks).sum()
    }

    pub fn blocks(&self, lambda: Complex64) -> &[usize] {
        self.entries
            .iter()
            .find(|e| e.lambda == lambda)
            .map_or(&[], |e| e.blocks.as_slice())
    }

    /// Largest block order for `lambda` (0 when absent).
    pub fn kappa(&self, lambda: Complex64) -> usize {
        self.blocks(lambda).first().copied().unwrap_or(0)
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn algebraic_multiplicity(&self, lambda: Complex64) -> usize {
        self.blocks(lambda).iter().sum()
    }

    /// `det(mu I - T)`.
    pub fn characteristic(&self, mu: Complex64) -> Complex64 {
        self.entries.iter().fold(Complex64::new(1.0, 0.0), |acc, e| {
            acc * (mu - e.lambda).powu(e.blocks.iter().sum::<usize>() as u32)
        })
    }
}

/// Transformation data: chains of one Hamiltonian plus a flat ordering of all
/// members that lists every chain in its own order.
#[derive(Clone)]
pub struct ChainSet {
    hamiltonian: Hamiltonian,
    chains: Vec<Chain>,
    ordering: Vec<(usize, usize)>,
}

impl fmt::Debug for ChainSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainSet")
            .field("chains", &self.chains)
            .field("ordering", &self.ordering)
            .finish()
    }
}

impl ChainSet {
    /// Chain-by-chain ordering.
    pub fn new(hamiltonian: Hamiltonian, chains: Vec<Chain>) -> Result<Self> {
        let ordering = chains
            .iter()
            .enumerate()
            .flat_map(|(c, ch)| (0..ch.len()).map(move |m| (c, m)))
            .collect();
        Self::with_ordering(hamiltonian, chains, ordering)
    }

    /// Explicit flat ordering of `(chain, member)` pairs.
    pub fn with_ordering(
        hamiltonian: Hamiltonian,
        chains: Vec<Chain>,
        ordering: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = hamiltonian.n();
        for ch in &chains {
            if ch.is_empty() {
                return Err(Error::BadChainLengths("empty chain".into()));
            }
            if ch.members.iter().any(|m| m.dims() != (n, 1)) {
                return Err(Error::Contract("chain members must be n x 1".into()));
            }
        }
        let total: usize = chains.iter().map(Chain::len).sum();
        if ordering.len() != total {
            return Err(Error::BadChainLengths(format!(
                "ordering lists {} members, chains hold {total}",
                ordering.len()
            )));
        }
        let mut next = vec![0usize; chains.len()];
        for &(c, m) in &ordering {
            if c >= chains.len() || next[c] != m {
                return Err(Error::BadChainLengths(format!(
                    "ordering breaks chain order at ({c}, {m})"
                )));
            }
            next[c] += 1;
        }
        Ok(ChainSet {
            hamiltonian,
            chains,
            ordering,
        })
    }

    /// Interleaves groups: repeatedly takes `take` members from each group
    /// (each group a list of chain indices consumed chain by chain).
    pub fn interleaved(
        hamiltonian: Hamiltonian,
        chains: Vec<Chain>,
        groups: &[Vec<usize>],
        take: usize,
    ) -> Result<Self> {
        let lengths: Vec<usize> = chains.iter().map(Chain::len).collect();
        let ordering = interleave_ordering(&lengths, groups, take);
        Self::with_ordering(hamiltonian, chains, ordering)
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn ordering(&self) -> &[(usize, usize)] {
        &self.ordering
    }

    pub fn n(&self) -> usize {
        self.hamiltonian.n()
    }

    pub fn total(&self) -> usize {
        self.ordering.len()
    }

    /// Members in flat order.
    pub fn members(&self) -> Vec<MatFn> {
        self.ordering
            .iter()
            .map(|&(c, m)| self.chains[c].members[m].clone())
            .collect()
    }

    pub fn prefix(&self, count: usize) -> Vec<MatFn> {
        self.members().into_iter().take(count).collect()
    }

    pub fn lambda_of(&self, flat: usize) -> Complex64 {
        self.chains[self.ordering[flat].0].lambda
    }

    /// Flat index of the preceding chain member.
    pub fn predecessor(&self, flat: usize) -> Option<usize> {
        let (c, m) = self.ordering[flat];
        if m == 0 {
            return None;
        }
        self.ordering.iter().position(|&p| p == (c, m - 1))
    }

    /// Jordan data of the first `count` members.
    pub fn prefix_jordan_spec(&self, count: usize) -> Result<JordanSpec> {
        let mut lengths = vec![0usize; self.chains.len()];
        for &(c, _) in &self.ordering[..count] {
            lengths[c] += 1;
        }
        let mut entries: Vec<(Complex64, Vec<usize>)> = Vec::new();
        for (c, &len) in lengths.iter().enumerate() {
            if len == 0 {
                continue;
            }
            let lambda = self.chains[c].lambda;
            match entries.iter_mut().find(|(l, _)| *l == lambda) {
                Some(e) => e.1.push(len),
                None => entries.push((lambda, vec![len])),
            }
        }
        JordanSpec::new(entries)
    }

    pub fn jordan_spec(&self) -> Result<JordanSpec> {
        self.prefix_jordan_spec(self.total())
    }

    /// Same chains restricted to a prefix.
    pub fn truncated(&self, count: usize) -> Result<ChainSet> {
        let mut lengths = vec![0usize; self.chains.len()];
        for &(c, _) in &self.ordering[..count] {
            lengths[c] += 1;
        }
        let mut remap = vec![usize::MAX; self.chains.len()];
        let mut chains = Vec::new();
        for (c, &len) in lengths.iter().enumerate() {
            if len > 0 {
                remap[c] = chains.len();
                chains.push(Chain::new(
                    self.chains[c].lambda,
                    self.chains[c].members[..len].to_vec(),
                ));
            }
        }
        let ordering = self.ordering[..count]
            .iter()
            .map(|&(c, m)| (remap[c], m))
            .collect();
        ChainSet::with_ordering(self.hamiltonian.clone(), chains, ordering)
    }
}

/// Flat ordering that repeatedly takes `take` members from each group of
/// chains; chains of unknown index contribute nothing.
pub fn interleave_ordering(lengths: &[usize], groups: &[Vec<usize>], take: usize) -> Vec<(usize, usize)> {
    let mut queues: Vec<Vec<(usize, usize)>> = groups
        .iter()
        .map(|g| {
            g.iter()
                .flat_map(|&c| (0..lengths.get(c).copied().unwrap_or(0)).map(move |m| (c, m)))
                .rev()
                .collect()
        })
        .collect();
    let mut ordering = Vec::new();
    while queues.iter().any(|q| !q.is_empty()) {
        for q in &mut queues {
            for _ in 0..take.max(1) {
                if let Some(item) = q.pop() {
                    ordering.push(item);
                }
            }
        }
    }
    ordering
}

/// Worst relative residual of the chain relations of `chain` under `h`.
pub fn chain_residual(h: &Hamiltonian, chain: &Chain, points: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(chain.len());
    for (i, member) in chain.members.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for &x in points {
            let z = Complex64::new(x, 0.0);
            let lhs = h.shifted(chain.lambda).apply(member, z, 0)?.value().clone();
            let rhs = if i == 0 {
                CMatrix::zeros(h.n(), 1)
            } else {
                chain.members[i - 1].eval(z, 0)?.value().clone()
            };
            let scale = max_abs(member.eval(z, 0)?.value());
            worst = worst.max(max_abs(&(&lhs - &rhs)) / (max_abs(&lhs) + max_abs(&rhs) + scale).max(1.0));
        }
        out.push(worst);
    }
    Ok(out)
}

/// Explicit `T` (with `H F_i = sum_j T_ij F_j` in flat order) and its Jordan
/// data, after checking every chain relation against `tol`.
pub fn t_matrix(cs: &ChainSet, points: &[f64], tol: f64) -> Result<(CMatrix, JordanSpec)> {
    for (c, chain) in cs.chains().iter().enumerate() {
        for (m, r) in chain_residual(cs.hamiltonian(), chain, points)?.into_iter().enumerate() {
            if !(r < tol) {
                return Err(Error::InvalidChain {
                    chain: c,
                    member: m,
                    residual: r,
                });
            }
        }
    }
    let d = cs.total();
    let mut t = CMatrix::zeros(d, d);
    for l in 0..d {
        t[(l, l)] = cs.lambda_of(l);
        if let Some(p) = cs.predecessor(l) {
            t[(l, p)] = Complex64::new(1.0, 0.0);
        }
    }
    Ok((t, cs.jordan_spec()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::expr::ScalarExpr;
    use crate::jets::function::{const_fn, expr_fn, real, ExprMatrix};

    fn free(n: usize) -> Hamiltonian {
        Hamiltonian::new(const_fn(CMatrix::zeros(n, n))).unwrap()
    }

    fn scalar(e: ScalarExpr) -> MatFn {
        expr_fn(ExprMatrix::column(vec![e]))
    }

    #[test]
    fn single_member_gives_one_by_one_t() {
        let k = Complex64::new(0.0, 1.5);
        let chain = Chain::new(k * k * -1.0, vec![scalar(ScalarExpr::exp_poly(k, &[real(1.0)]))]);
        let cs = ChainSet::new(free(1), vec![chain]).unwrap();
        let (t, js) = t_matrix(&cs, &[0.1, 0.9, -2.0], 1e-10).unwrap();
        assert_eq!(t.shape(), (1, 1));
        assert_eq!(t[(0, 0)], real(2.25));
        assert_eq!(js.blocks(real(2.25)), &[1]);
    }

    #[test]
    fn two_chains_same_value() {
        let lam = real(0.0);
        let a = Chain::new(
            lam,
            vec![
                scalar(ScalarExpr::real(1.0)),
                scalar(ScalarExpr::polynomial(&[real(0.0), real(0.0), real(-0.5)])),
            ],
        );
        let b = Chain::new(lam, vec![scalar(ScalarExpr::x())]);
        let cs = ChainSet::new(free(1), vec![a, b]).unwrap();
        let (t, js) = t_matrix(&cs, &[0.3, 1.0], 1e-12).unwrap();
        assert_eq!(js.blocks(lam), &[2, 1]);
        assert_eq!(js.dimension(), 3);
        assert_eq!(t[(1, 0)], real(1.0));
    }

    #[test]
    fn broken_chain_is_reported() {
        let chain = Chain::new(real(0.0), vec![scalar(ScalarExpr::real(1.0)), scalar(ScalarExpr::x())]);
        let cs = ChainSet::new(free(1), vec![chain]).unwrap();
        assert!(matches!(
            t_matrix(&cs, &[0.5], 1e-8),
            Err(Error::InvalidChain { chain: 0, member: 1, .. })
        ));
    }

    #[test]
    fn ordering_must_respect_chain_order() {
        let chain = Chain::new(real(0.0), vec![scalar(ScalarExpr::real(1.0)), scalar(ScalarExpr::x())]);
        let r = ChainSet::with_ordering(free(1), vec![chain], vec![(0, 1), (0, 0)]);
        assert!(matches!(r, Err(Error::BadChainLengths(_))));
    }

    #[test]
    fn jordan_spec_rejects_repeats_and_sorts() {
        let js = JordanSpec::new(vec![(real(1.0), vec![1, 3, 2])]).unwrap();
        assert_eq!(js.blocks(real(1.0)), &[3, 2, 1]);
        assert_eq!(js.kappa(real(1.0)), 3);
        assert!(JordanSpec::new(vec![(real(1.0), vec![1]), (real(1.0), vec![2])]).is_err());
        let wide = JordanSpec::new(vec![(real(0.0), vec![1; 5])]).unwrap();
        assert!(wide.check_bound(2).is_err());
        assert!(wide.check_bound(3).is_ok());
    }

    #[test]
    fn interleaving_takes_round_robin() {
        let one = || scalar(ScalarExpr::real(1.0));
        let chains = vec![
            Chain::new(real(0.0), vec![one(), one()]),
            Chain::new(real(1.0), vec![one(), one()]),
        ];
        let cs = ChainSet::interleaved(free(1), chains, &[vec![0], vec![1]], 1).unwrap();
        assert_eq!(cs.ordering(), &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert_eq!(cs.predecessor(2), Some(0));
        let pre = cs.prefix_jordan_spec(2).unwrap();
        assert_eq!(pre.dimension(), 2);
    }
}
