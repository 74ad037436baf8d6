//! Scenario files: the JSON description of an operator to build and the
//! stages to verify, plus seeded generators for the standard families.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::builder::build_intertwiner;
use crate::chains::chain::{interleave_ordering, Chain, ChainSet};
use crate::chains::generators::{assemble_diag, free_polynomial_chain, mixed_exponential_chain, scalar_fn};
use crate::diffop::hamiltonian::{Hamiltonian, SpectralPolynomial};
use crate::error::{Error, Result};
use crate::factor::StackedData;
use crate::jets::expr::ScalarExpr;
use crate::jets::function::{expr_fn, real, ExprMatrix, MatFn};
use crate::jets::matrix::CMatrix;
use crate::verify::VerifyConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Build,
    NegativeControl,
    Factorize,
    FirstOrder,
    Minimize,
    Conjugate,
    Algebra,
    Irreducible,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Build,
        Stage::NegativeControl,
        Stage::Factorize,
        Stage::FirstOrder,
        Stage::Minimize,
        Stage::Conjugate,
        Stage::Algebra,
        Stage::Irreducible,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Build => "build",
            Stage::NegativeControl => "negative-control",
            Stage::Factorize => "factorize",
            Stage::FirstOrder => "first-order",
            Stage::Minimize => "minimize",
            Stage::Conjugate => "conjugate",
            Stage::Algebra => "algebra",
            Stage::Irreducible => "irreducible",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Scenario(format!("unknown stage '{s}'")))
    }
}

/// One Jordan chain; each member is a column of `n` expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub lambda: Complex64,
    pub members: Vec<Vec<ScalarExpr>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Construction {
    /// Explicit potential and kernel chains, optionally with a flat
    /// `(chain, member)` ordering.
    Chains {
        potential: ExprMatrix,
        chains: Vec<ChainSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ordering: Option<Vec<(usize, usize)>>,
    },
    /// Diagonal potential with one stacked chain at `lambda0`; channel `l`
    /// carries `order * (n - l)` scalar members.
    Stacked {
        order: usize,
        lambda0: Complex64,
        potentials: Vec<ScalarExpr>,
        chains: Vec<Vec<ScalarExpr>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: VerifyConfig,
    pub construction: Construction,
    /// Constant leading coefficient, row-major; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leading: Option<Vec<Vec<Complex64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
    /// Polynomial factor `prod (lambda I - H_+)^{delta}` planted on the
    /// right of `Q` before minimization.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub planted: Vec<(Complex64, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<Stage>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

fn column_fn(entries: &[ScalarExpr]) -> MatFn {
    expr_fn(ExprMatrix::column(entries.to_vec()))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn n(&self) -> usize {
        match &self.construction {
            Construction::Chains { potential, .. } => potential.rows,
            Construction::Stacked { potentials, .. } => potentials.len(),
        }
    }

    /// Order of the operator built from the kernel.
    pub fn order(&self) -> usize {
        let n = self.n().max(1);
        match &self.construction {
            Construction::Chains { chains, .. } => chains.iter().map(|c| c.members.len()).sum::<usize>() / n,
            Construction::Stacked { order, .. } => *order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(bad(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        let n = self.n();
        if n == 0 {
            return Err(bad("matrix size must be positive"));
        }
        match &self.construction {
            Construction::Chains { potential, chains, ordering } => {
                if potential.cols != n || potential.entries.len() != n * n {
                    return Err(bad("potential must be a square expression matrix"));
                }
                if chains.is_empty() {
                    return Err(bad("at least one chain is required"));
                }
                let mut total = 0;
                for (c, ch) in chains.iter().enumerate() {
                    if ch.members.is_empty() {
                        return Err(bad(format!("chain {c} is empty")));
                    }
                    if ch.members.iter().any(|m| m.len() != n) {
                        return Err(bad(format!("chain {c} has a member of the wrong length")));
                    }
                    total += ch.members.len();
                }
                if total % n != 0 {
                    return Err(bad(format!("{total} kernel members is not a multiple of n = {n}")));
                }
                if let Some(ord) = ordering {
                    let mut next = vec![0usize; chains.len()];
                    for &(c, m) in ord {
                        if c >= chains.len() || next[c] != m {
                            return Err(bad(format!("ordering breaks chain order at ({c}, {m})")));
                        }
                        next[c] += 1;
                    }
                    if ord.len() != total {
                        return Err(bad("ordering does not list every member"));
                    }
                }
                if self.stages.contains(&Stage::Irreducible) {
                    return Err(bad("the irreducible stage needs a stacked construction"));
                }
            }
            Construction::Stacked { order, chains, .. } => {
                if *order == 0 {
                    return Err(bad("stacked order must be positive"));
                }
                if chains.len() != n {
                    return Err(bad(format!("{} scalar chains for {n} channels", chains.len())));
                }
                for (l, ch) in chains.iter().enumerate() {
                    if ch.len() != order * (n - l) {
                        return Err(bad(format!(
                            "channel {} has {} members, expected {}",
                            l + 1,
                            ch.len(),
                            order * (n - l)
                        )));
                    }
                }
            }
        }
        if let Some(rows) = &self.leading {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(bad("leading coefficient must be n x n"));
            }
            if self.leading_matrix().unwrap().determinant().norm() < 1e-12 {
                return Err(bad("leading coefficient is singular"));
            }
        }
        if let Some(ladder) = &self.ladder {
            let big_n = self.order();
            if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) || ladder[0] == 0 || *ladder.last().unwrap() != big_n {
                return Err(bad(format!("ladder {ladder:?} must increase strictly to {big_n}")));
            }
        }
        SpectralPolynomial::new(self.planted.clone()).map_err(|e| bad(e.to_string()))?;
        let (a, b) = self.config.window;
        if !(a < b) || self.config.points == 0 {
            return Err(bad("sampling window must be a nonempty interval with at least one point"));
        }
        Ok(())
    }

    pub fn leading_matrix(&self) -> Option<CMatrix> {
        self.leading.as_ref().map(|rows| {
            let n = rows.len();
            CMatrix::from_fn(n, n, |i, j| rows[i][j])
        })
    }

    pub fn planted_polynomial(&self) -> SpectralPolynomial {
        SpectralPolynomial {
            roots: self.planted.clone(),
        }
    }

    /// Verification settings with the scenario seed applied.
    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            seed: self.seed,
            ..self.config.clone()
        }
    }

    pub fn stages(&self) -> Vec<Stage> {
        let mut st = if self.stages.is_empty() {
            let mut d = vec![
                Stage::Build,
                Stage::NegativeControl,
                Stage::Factorize,
                Stage::Minimize,
                Stage::Conjugate,
                Stage::Algebra,
            ];
            if matches!(self.construction, Construction::Stacked { .. }) {
                d.push(Stage::Irreducible);
            }
            d
        } else {
            self.stages.clone()
        };
        st.sort();
        st.dedup();
        st
    }

    pub fn stacked_data(&self) -> Option<StackedData> {
        match &self.construction {
            Construction::Stacked {
                lambda0,
                potentials,
                chains,
                ..
            } => Some(StackedData {
                potentials: potentials.iter().cloned().map(scalar_fn).collect(),
                chains: chains
                    .iter()
                    .map(|ch| ch.iter().cloned().map(scalar_fn).collect())
                    .collect(),
                lambda0: *lambda0,
            }),
            Construction::Chains { .. } => None,
        }
    }

    pub fn chain_set(&self) -> Result<ChainSet> {
        match &self.construction {
            Construction::Chains {
                potential,
                chains,
                ordering,
            } => {
                let h = Hamiltonian::new(expr_fn(potential.clone()))?;
                let chains: Vec<Chain> = chains
                    .iter()
                    .map(|c| Chain::new(c.lambda, c.members.iter().map(|m| column_fn(m)).collect()))
                    .collect();
                match ordering {
                    Some(ord) => ChainSet::with_ordering(h, chains, ord.clone()),
                    None => ChainSet::new(h, chains),
                }
            }
            Construction::Stacked { order, .. } => {
                let data = self.stacked_data().unwrap();
                assemble_diag(&data.potentials, &data.chains, *order, data.lambda0)
            }
        }
    }
}

/// Families produced by `generate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleKind {
    /// Stacked diagonal construction with vanishing proper prefix Wronskians.
    Irreducible,
    /// Two decoupled oscillator channels, first order, one eigenfunction each.
    DiagonalPair,
    /// Each step takes `n` chain members sharing one eigenvalue and depth.
    EqualBlocks,
    /// Coupled constant potential with mixed exponential chains.
    Random,
}

impl FromStr for ExampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "irreducible" => Ok(ExampleKind::Irreducible),
            "diagonal-pair" => Ok(ExampleKind::DiagonalPair),
            "equal-blocks" => Ok(ExampleKind::EqualBlocks),
            "random" => Ok(ExampleKind::Random),
            other => Err(bad(format!(
                "unsupported example kind '{other}' (irreducible, diagonal-pair, equal-blocks, random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub n: usize,
    pub order: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n: 2,
            order: 2,
            seed: 0,
            lambdas: vec![0.0, 1.0],
        }
    }
}

pub fn generate(kind: ExampleKind, p: &GenParams) -> Result<Scenario> {
    if p.n == 0 || p.order == 0 {
        return Err(bad("n and N must be positive"));
    }
    match kind {
        ExampleKind::Irreducible => irreducible_scenario(p.n, p.order, p.seed),
        ExampleKind::DiagonalPair => match p.lambdas[..] {
            [l1, l2] => Ok(diagonal_pair(l1, l2)),
            _ => Err(bad("diagonal-pair takes exactly two eigenvalues")),
        },
        ExampleKind::EqualBlocks => equal_blocks_scenario(p.n, p.order, p.seed),
        ExampleKind::Random => random_scenario(p.n, p.order, p.seed),
    }
}

fn base(name: String, seed: u64, construction: Construction, stages: Vec<Stage>) -> Scenario {
    Scenario {
        schema: SCHEMA_VERSION,
        name,
        seed,
        config: VerifyConfig::default(),
        construction,
        leading: None,
        ladder: None,
        planted: Vec::new(),
        stages,
    }
}

fn gaussian() -> ScalarExpr {
    ScalarExpr::mul(vec![ScalarExpr::real(-0.5), ScalarExpr::x().pow(2)]).exp()
}

/// `V_+ = diag(x^2 - 1 + l1, x^2 - 1 + l2)` with kernel `e^{-x^2/2} e_i` at
/// `l_i`, so that `Q = I d + x I`.
pub fn diagonal_pair(l1: f64, l2: f64) -> Scenario {
    let shifted = |l: f64| ScalarExpr::add(vec![ScalarExpr::x().pow(2), ScalarExpr::real(l - 1.0)]);
    let zero = ScalarExpr::real(0.0);
    let potential = ExprMatrix::new(2, 2, vec![shifted(l1), zero.clone(), zero.clone(), shifted(l2)]).unwrap();
    let chains = vec![
        ChainSpec {
            lambda: real(l1),
            members: vec![vec![gaussian(), zero.clone()]],
        },
        ChainSpec {
            lambda: real(l2),
            members: vec![vec![zero, gaussian()]],
        },
    ];
    base(
        "diagonal-pair".into(),
        0,
        Construction::Chains {
            potential,
            chains,
            ordering: None,
        },
        vec![
            Stage::Build,
            Stage::NegativeControl,
            Stage::Factorize,
            Stage::Minimize,
            Stage::Conjugate,
            Stage::Algebra,
        ],
    )
}

fn unit_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Branch weights `(a, b)` whose terms `a e^{kx}` and `b e^{-kx}` balance at
/// `|x|` in `[reach + 2.5, reach + 4.5]`; the branch that wins inside
/// `[-reach, reach]` has weight of order one.
fn branch_weights(rng: &mut ChaCha8Rng, level: f64, lambda: f64, reach: f64) -> (Complex64, Complex64) {
    let k = (level - lambda).sqrt();
    let growing_wins = rng.gen_bool(0.5);
    let balance = reach + rng.gen_range(2.5..4.5);
    let dominant = unit_complex(rng);
    let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
    let minor = dominant * phase * (-2.0 * k * balance).exp();
    if growing_wins {
        (dominant, minor)
    } else {
        (minor, dominant)
    }
}

const MAX_DRAWS: usize = 64;
const RADIUS_ORDER: usize = 12;

/// Half-width of the default window plus the required strip.
fn reach(n: usize, big_n: usize) -> f64 {
    VerifyConfig::default().window.1 + min_radius(n, big_n) - 1.0
}

/// Root-test estimate of the distance from `x` to the nearest singularity
/// of the coefficients of `q`.
fn coefficient_radius(q: &crate::diffop::operator::MatDiffOperator, x: f64) -> Result<f64> {
    let mut r = f64::INFINITY;
    for jet in &q.coeffs_at(real(x), RADIUS_ORDER)?[..q.order()] {
        let c = jet.coeffs();
        let scale = c[0].iter().map(|z| z.norm()).fold(1.0, f64::max);
        for (k, ck) in c.iter().enumerate().skip(RADIUS_ORDER / 2) {
            let size = ck.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if size > 0.0 {
                r = r.min((scale / size).powf(1.0 / k as f64));
            }
        }
    }
    Ok(r)
}

/// Strip half-width that keeps derivatives of order `2nN` of the
/// coefficients within `1e6` of their size: `(m! / 1e6)^{1/m}`, at least 1.
fn min_radius(n: usize, big_n: usize) -> f64 {
    let m = 2 * n * big_n;
    let log_fact: f64 = (2..=m).map(|i| (i as f64).ln()).sum();
    ((log_fact - 1e6f64.ln()) / m as f64).exp().max(1.0)
}

/// Coefficients of the built operator stay analytic in a strip of
/// half-width `min_radius` around the sampling window.
fn well_conditioned(sc: &Scenario) -> Result<bool> {
    let need = min_radius(sc.n(), sc.order());
    let q = match build_intertwiner(&sc.chain_set()?, sc.leading_matrix()) {
        Ok(q) => q,
        Err(e) if e.is_numerical() => return Ok(false),
        Err(e) => return Err(e),
    };
    let (a, b) = sc.config.window;
    for i in 0..=40 {
        match coefficient_radius(&q, a + (b - a) * i as f64 / 40.0) {
            Ok(r) if r >= need => {}
            Ok(_) => return Ok(false),
            Err(e) if e.is_numerical() => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Random composition of `total` into positive parts.
fn composition(rng: &mut ChaCha8Rng, total: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut left = total;
    while left > 0 {
        let part = rng.gen_range(1..=left);
        out.push(part);
        left -= part;
    }
    out
}

/// Constant coupled potential `S diag(c) S^{-1}` with real levels.
struct Coupling {
    levels: Vec<f64>,
    s: CMatrix,
}

impl Coupling {
    fn draw(rng: &mut ChaCha8Rng, n: usize) -> Coupling {
        let levels = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        loop {
            let s = CMatrix::from_fn(n, n, |i, j| {
                let d = if i == j { 1.0 } else { 0.0 };
                real(d + 0.3 * rng.gen_range(-1.0..1.0))
            });
            if s.determinant().norm() > 0.2 {
                return Coupling { levels, s };
            }
        }
    }

    fn potential(&self) -> ExprMatrix {
        let n = self.levels.len();
        let d = CMatrix::from_fn(n, n, |i, j| if i == j { real(self.levels[i]) } else { real(0.0) });
        let v = &self.s * d * self.s.clone().try_inverse().unwrap();
        ExprMatrix::new(n, n, (0..n * n).map(|k| ScalarExpr::real(v[(k / n, k % n)].re)).collect()).unwrap()
    }

    /// `S e_i phi` as a column of expressions.
    fn member(&self, i: usize, phi: &ScalarExpr) -> Vec<ScalarExpr> {
        (0..self.levels.len())
            .map(|r| ScalarExpr::mul(vec![ScalarExpr::real(self.s[(r, i)].re), phi.clone()]))
            .collect()
    }

    /// Eigenvalue below channel `i`'s level, separated from `used`.
    fn draw_lambda(&self, rng: &mut ChaCha8Rng, i: usize, used: &[f64]) -> f64 {
        loop {
            let l = self.levels[i] - rng.gen_range(0.5..3.5);
            if used.iter().all(|u| (u - l).abs() > 0.25) {
                return l;
            }
        }
    }
}

/// `n` channels of a coupled constant potential, each carrying `N` members
/// split into chains at distinct eigenvalues; members are interleaved across
/// channels one at a time.
pub fn random_scenario(n: usize, big_n: usize, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let sc = draw_random(&mut rng, n, big_n, seed)?;
        if well_conditioned(&sc)? {
            return Ok(sc);
        }
    }
    Err(bad(format!("no well-conditioned draw for seed {seed}")))
}

fn draw_random(rng: &mut ChaCha8Rng, n: usize, big_n: usize, seed: u64) -> Result<Scenario> {
    let cp = Coupling::draw(rng, n);
    let mut chains = Vec::new();
    let mut groups = vec![Vec::new(); n];
    let mut used = Vec::new();
    for (i, group) in groups.iter_mut().enumerate() {
        for len in composition(rng, big_n) {
            let lambda = cp.draw_lambda(rng, i, &used);
            used.push(lambda);
            let (a, b) = branch_weights(rng, cp.levels[i], lambda, reach(n, big_n));
            let phis = mixed_exponential_chain(real(cp.levels[i]), real(lambda), a, b, len)?;
            group.push(chains.len());
            chains.push(ChainSpec {
                lambda: real(lambda),
                members: phis.iter().map(|phi| cp.member(i, phi)).collect(),
            });
        }
    }
    let lengths: Vec<usize> = chains.iter().map(|c| c.members.len()).collect();
    let ordering = interleave_ordering(&lengths, &groups, 1);
    Ok(base(
        format!("random-n{n}-N{big_n}-s{seed}"),
        seed,
        Construction::Chains {
            potential: cp.potential(),
            chains,
            ordering: Some(ordering),
        },
        Vec::new(),
    ))
}

/// Steps of `n` members sharing one eigenvalue and chain depth: runs of
/// equal-length chains, one per channel, at each of several eigenvalues.
pub fn equal_blocks_scenario(n: usize, big_n: usize, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let sc = draw_equal_blocks(&mut rng, n, big_n, seed)?;
        if well_conditioned(&sc)? {
            return Ok(sc);
        }
    }
    Err(bad(format!("no well-conditioned draw for seed {seed}")))
}

fn draw_equal_blocks(rng: &mut ChaCha8Rng, n: usize, big_n: usize, seed: u64) -> Result<Scenario> {
    let cp = Coupling::draw(rng, n);
    let runs = composition(rng, big_n);
    let floor = cp.levels.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut chains = Vec::new();
    let mut ordering = Vec::new();
    let mut used: Vec<f64> = Vec::new();
    for &len in &runs {
        let lambda = loop {
            let l = floor - rng.gen_range(0.5..3.5);
            if used.iter().all(|u| (u - l).abs() > 0.25) {
                break l;
            }
        };
        used.push(lambda);
        let first = chains.len();
        for i in 0..n {
            let (a, b) = branch_weights(rng, cp.levels[i], lambda, reach(n, big_n));
            let phis = mixed_exponential_chain(real(cp.levels[i]), real(lambda), a, b, len)?;
            chains.push(ChainSpec {
                lambda: real(lambda),
                members: phis.iter().map(|phi| cp.member(i, phi)).collect(),
            });
        }
        for depth in 0..len {
            for i in 0..n {
                ordering.push((first + i, depth));
            }
        }
    }
    let stages = vec![
        Stage::Build,
        Stage::NegativeControl,
        Stage::Factorize,
        Stage::FirstOrder,
        Stage::Minimize,
        Stage::Conjugate,
        Stage::Algebra,
    ];
    Ok(base(
        format!("equal-blocks-n{n}-N{big_n}-s{seed}"),
        seed,
        Construction::Chains {
            potential: cp.potential(),
            chains,
            ordering: Some(ordering),
        },
        stages,
    ))
}

/// Length scale of the shifts in `irreducible_scenario`; the zeros of the
/// Wronskian scale with it. Channel `l` is weighted by `SHIFT_SCALE^{2lN}`
/// to even out the magnitudes of the stacked components.
const SHIFT_SCALE: f64 = 2.5;

/// Free channels with polynomial chains at `lambda = 0` and complex shifts,
/// redrawn until the coefficients are analytic near the window.
pub fn irreducible_scenario(n: usize, big_n: usize, seed: u64) -> Result<Scenario> {
    if n < 2 {
        return Err(bad("the irreducible family needs n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let sc = draw_irreducible(&mut rng, n, big_n, seed);
        if well_conditioned(&sc)? {
            return Ok(sc);
        }
    }
    Err(bad(format!("no well-conditioned draw for seed {seed}")))
}

fn draw_irreducible(rng: &mut ChaCha8Rng, n: usize, big_n: usize, seed: u64) -> Scenario {
    let chains = (0..n)
        .map(|l| {
            let len = big_n * (n - l);
            let shifts: Vec<(Complex64, Complex64)> = (1..len as i32)
                .map(|j| {
                    let a = unit_complex(rng) * SHIFT_SCALE.powi(2 * j - 1);
                    let b = unit_complex(rng) * SHIFT_SCALE.powi(2 * j);
                    (a, b)
                })
                .collect();
            let balance = real(SHIFT_SCALE.powi((2 * l * big_n) as i32));
            free_polynomial_chain(&shifts)
                .iter()
                .map(|p| ScalarExpr::polynomial(&p.iter().map(|c| c * balance).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    base(
        format!("irreducible-n{n}-N{big_n}-s{seed}"),
        seed,
        Construction::Stacked {
            order: big_n,
            lambda0: real(0.0),
            potentials: vec![ScalarExpr::real(0.0); n],
            chains,
        },
        vec![Stage::Build, Stage::Irreducible, Stage::Conjugate, Stage::Algebra],
    )
}
