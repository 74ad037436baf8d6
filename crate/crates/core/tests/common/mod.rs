//! Shared helpers for the integration tests: a brute-force Jordan-type oracle
//! over a prime field and a few scenario shortcuts.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const P: u64 = 1_000_003;

/// Nilpotent model `V = (F_p[t] / t^depth)^width` with `A` = multiplication
/// by `t`. Vectors are flat, component-major: index `i * depth + j` is `t^j`
/// in component `i`.
pub struct Model {
    pub width: usize,
    pub depth: usize,
}

impl Model {
    pub fn dim(&self) -> usize {
        self.width * self.depth
    }

    pub fn shift(&self, v: &[u64], power: usize) -> Vec<u64> {
        let mut out = vec![0; self.dim()];
        for i in 0..self.width {
            for j in 0..self.depth {
                if j + power < self.depth {
                    out[i * self.depth + j + power] = v[i * self.depth + j];
                }
            }
        }
        out
    }

    pub fn random(&self, rng: &mut ChaCha8Rng) -> Vec<u64> {
        (0..self.dim()).map(|_| rng.gen_range(0..P)).collect()
    }

    pub fn unit(&self, component: usize) -> Vec<u64> {
        let mut v = vec![0; self.dim()];
        v[component * self.depth] = 1;
        v
    }

    /// Cyclic span of `A^{depth - height} w`, a block of order `height`.
    pub fn block(&self, w: &[u64], height: usize) -> Vec<Vec<u64>> {
        let u = self.shift(w, self.depth - height);
        (0..height).map(|j| self.shift(&u, j)).collect()
    }

    /// Images of a spanning set under `A^power`.
    pub fn image(&self, span: &[Vec<u64>], power: usize) -> Vec<Vec<u64>> {
        span.iter().map(|v| self.shift(v, power)).collect()
    }

    /// Jordan type of `A` restricted to the invariant subspace `span`.
    pub fn subspace_type(&self, span: &[Vec<u64>]) -> Vec<usize> {
        let ranks: Vec<usize> = (0..=self.depth).map(|s| rank(&self.image(span, s))).collect();
        type_from_ranks(&ranks)
    }

    /// Jordan type of `A` on `V / span`.
    pub fn quotient_type(&self, span: &[Vec<u64>]) -> Vec<usize> {
        let base = rank(span);
        let full: Vec<Vec<u64>> = (0..self.width).map(|i| self.unit(i)).collect();
        let ranks: Vec<usize> = (0..=self.depth)
            .map(|s| {
                let mut all = span.to_vec();
                for u in &full {
                    for j in s..self.depth {
                        all.push(self.shift(u, j));
                    }
                }
                rank(&all) - base
            })
            .collect();
        type_from_ranks(&ranks)
    }
}

/// Blocks of order `>= s` number `r_{s-1} - r_s`.
fn type_from_ranks(ranks: &[usize]) -> Vec<usize> {
    let mut blocks = Vec::new();
    for s in (1..ranks.len()).rev() {
        let at_least = ranks[s - 1] - ranks[s];
        while blocks.len() < at_least {
            blocks.push(s);
        }
    }
    blocks
}

fn pow_mod(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1;
    b %= P;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % P;
        }
        b = b * b % P;
        e >>= 1;
    }
    r
}

pub fn rank(rows: &[Vec<u64>]) -> usize {
    let mut m: Vec<Vec<u64>> = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, piv);
        let inv = pow_mod(m[r][c], P - 2);
        for i in 0..m.len() {
            if i != r && m[i][c] != 0 {
                let f = m[i][c] * inv % P;
                let pivot = m[r].clone();
                for (a, b) in m[i][c..].iter_mut().zip(&pivot[c..]) {
                    *a = (*a + P - f * b % P) % P;
                }
            }
        }
        r += 1;
    }
    r
}

/// Random invariant subspace of `(F_p[t]/t^kappa)^{2n}` with block orders
/// `blocks`; retries until the drawn subspace has exactly that type.
pub fn kernel_of_type(blocks: &[usize], n: usize, rng: &mut ChaCha8Rng) -> (Model, Vec<Vec<u64>>) {
    let kappa = blocks.iter().copied().max().unwrap_or(1);
    let model = Model { width: 2 * n, depth: kappa };
    loop {
        let span: Vec<Vec<u64>> = blocks
            .iter()
            .flat_map(|&k| {
                let w = model.random(rng);
                model.block(&w, k)
            })
            .collect();
        let mut got = model.subspace_type(&span);
        let mut want = blocks.to_vec();
        got.sort_unstable();
        want.sort_unstable();
        if got == want {
            return (model, span);
        }
    }
}

/// Jordan type of the conjugate's matrix at one value: `A` on `V / ker Q`.
pub fn conjugate_type(blocks: &[usize], n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (model, span) = kernel_of_type(blocks, n, &mut rng);
    model.quotient_type(&span)
}

/// Jordan type of `ker (Q (H - lambda)^delta)` at one value: the preimage
/// of `ker Q` under `A^delta` in a model deep enough to hold it.
pub fn preimage_type(blocks: &[usize], n: usize, delta: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = blocks.iter().copied().max().unwrap_or(0);
    let model = Model { width: 2 * n, depth: kappa + delta };
    let mut span = Vec::new();
    for &k in blocks {
        let w = model.random(&mut rng);
        span.extend(model.block(&w, k + delta));
    }
    for i in 0..2 * n {
        span.extend(model.block(&model.unit(i), delta));
    }
    model.subspace_type(&span)
}

/// Nonincreasing partitions of `total` with at most `parts` parts.
pub fn partitions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, max: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        if parts == 0 {
            return;
        }
        for p in (1..=max.min(left)).rev() {
            cur.push(p);
            rec(left - p, p, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, total, parts, &mut Vec::new(), &mut out);
    out
}

/// Block lists with at most `2n` blocks and largest block `kappa`.
pub fn block_lists(kappa: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in kappa..=2 * n * kappa {
        for p in partitions(total, 2 * n) {
            if p[0] == kappa {
                out.push(p);
            }
        }
    }
    out
}

/// Distinct test eigenvalues.
pub fn lam(i: usize) -> num_complex::Complex64 {
    num_complex::Complex64::new(i as f64, 0.5 * i as f64)
}

/// Block lists of every spec over values `lam(0..)` and `sum kappa_l <= budget`.
pub fn all_specs(n: usize, budget: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    fn rec(n: usize, left: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        for kappa in 1..=left {
            for blocks in block_lists(kappa, n) {
                cur.push(blocks);
                rec(n, left - kappa, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, budget, &mut Vec::new(), &mut out);
    out
}
