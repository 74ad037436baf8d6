//! Conjugate intertwiners: the complement of `Q` and the first-order product
//! form available when every closure `U_0` is scalar.

use num_complex::Complex64;

use super::jordan::{compose_with_polynomial, jordan_of_conjugate, kappa_polynomial};
use super::minimize::{check_dimension, minimize_weak};
use crate::builder::partner_hamiltonian;
use crate::chains::chain::{ChainSet, JordanSpec};
use crate::diffop::division::right_divide;
use crate::diffop::hamiltonian::{poly_of_h, Hamiltonian, SpectralPolynomial};
use crate::diffop::operator::MatDiffOperator;
use crate::diffop::residual::{
    coefficient_residual, intertwining_residual, probe_battery, probe_residual, relative_difference,
};
use crate::error::{Error, Result};
use crate::factor::{first_order_chain, remainder_residual, FactorizationChain, FirstOrderStep};
use crate::jets::matrix::CMatrix;
use crate::verify::{regular_points_for, VerificationReport, VerifyConfig};

fn pt(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn sign(e: usize) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Tolerance for `U_0 = lambda I` in the first-order product form.
pub const SCALAR_CLOSURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Conjugate {
    pub q_plus: MatDiffOperator,
    /// `prod (lambda - lambda_l)^{kappa_l}`.
    pub poly: SpectralPolynomial,
    pub order: usize,
    pub remainder: f64,
    pub h_minus: Hamiltonian,
    pub points: Vec<f64>,
}

/// `Q^+` with `Q^+ Q = prod (H_+ - lambda_l)^{kappa_l}`, obtained as the exact
/// right quotient of that polynomial by `q`.
pub fn conjugate_general(
    q: &MatDiffOperator,
    js: &JordanSpec,
    h_plus: &Hamiltonian,
    config: &VerifyConfig,
) -> Result<Conjugate> {
    check_dimension(js, q)?;
    let poly = kappa_polynomial(js);
    let big_n = q.order();
    let n_prime = (2 * poly.degree())
        .checked_sub(big_n)
        .ok_or_else(|| Error::InvalidJordanSpec("largest blocks too small for the order".into()))?;
    assert_eq!((big_n + n_prime) % 2, 0, "orders of Q and its conjugate differ in parity");
    let h_minus = partner_hamiltonian(q, h_plus)?;
    let dividend = poly_of_h(h_plus, &poly);
    let (q_plus, r) = right_divide(&dividend, q)?;
    let points = regular_points_for(
        config,
        6,
        &[q.clone(), q_plus.clone()],
        std::slice::from_ref(h_minus.potential()),
    )?;
    let remainder = remainder_residual(&r, &dividend, &points)?;
    if !(remainder <= config.tol_accept) {
        return Err(Error::InconsistentJordanSpec { residual: remainder });
    }
    Ok(Conjugate {
        q_plus,
        poly,
        order: n_prime,
        remainder,
        h_minus,
        points,
    })
}

/// The complement of `q` with respect to `h_plus`.
pub fn complement(
    q: &MatDiffOperator,
    js: &JordanSpec,
    h_plus: &Hamiltonian,
    config: &VerifyConfig,
) -> Result<MatDiffOperator> {
    Ok(conjugate_general(q, js, h_plus, config)?.q_plus)
}

/// Largest deviation of the leading coefficient of `op` from `want`.
pub fn leading_deviation(op: &MatDiffOperator, want: &CMatrix, points: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in points {
        let c = op.values_at(pt(x))?;
        worst = worst.max(relative_difference(&c[op.order()], want));
    }
    Ok(worst)
}

/// Largest imaginary part among the coefficient values of `op`.
pub fn max_imaginary(op: &MatDiffOperator, points: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in points {
        for c in op.values_at(pt(x))? {
            worst = c.iter().map(|z| z.im.abs()).fold(worst, f64::max);
        }
    }
    Ok(worst)
}

/// Remainder, reverse intertwining, both product identities, order, parity
/// and leading coefficient of a conjugate.
pub fn verify_conjugate(
    q: &MatDiffOperator,
    conj: &Conjugate,
    h_plus: &Hamiltonian,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    let pts = &conj.points;
    let n = q.n();
    let probes = probe_battery(n);
    let tol = config.tol_accept;
    let mut rep = VerificationReport::new("conjugate");
    rep.below("conjugate.remainder", "P(H_+) = Q+ Q exactly", conj.remainder, tol, pts);
    rep.below(
        "conjugate.reverse-intertwining",
        "H_+ Q+ = Q+ H_-",
        intertwining_residual(&conj.q_plus, &conj.h_minus, h_plus, &probes, pts)?.max(),
        tol,
        pts,
    );
    let lower = MatDiffOperator::compose(&conj.q_plus, q)?;
    let p_plus = poly_of_h(h_plus, &conj.poly);
    rep.below(
        "conjugate.product-plus",
        "Q+ Q- = P(H_+)",
        probe_residual(&lower, &p_plus, &probes, pts)?.max(coefficient_residual(&lower, &p_plus, pts)?),
        tol,
        pts,
    );
    let upper = MatDiffOperator::compose(q, &conj.q_plus)?;
    let p_minus = poly_of_h(&conj.h_minus, &conj.poly);
    rep.below(
        "conjugate.product-minus",
        "Q- Q+ = P(H_-)",
        probe_residual(&upper, &p_minus, &probes, pts)?.max(coefficient_residual(&upper, &p_minus, pts)?),
        tol,
        pts,
    );
    let expected = 2 * conj.poly.degree() as i64 - q.order() as i64;
    rep.exact(
        "conjugate.order",
        "N' = 2 sum kappa_l - N",
        conj.q_plus.order() as i64 == expected && conj.order as i64 == expected,
        format!("N' = {}, formula {}", conj.q_plus.order(), expected),
    );
    rep.exact(
        "conjugate.parity",
        "N + N' even",
        (q.order() + conj.q_plus.order()).is_multiple_of(2),
        format!("N = {}, N' = {}", q.order(), conj.q_plus.order()),
    );
    let xn = q.values_at(pt(pts[0]))?[q.order()].clone();
    let want = xn
        .try_inverse()
        .ok_or_else(|| Error::Contract("leading coefficient is singular".into()))?
        * Complex64::new(sign(conj.poly.degree()), 0.0);
    rep.below(
        "conjugate.leading",
        "leading coefficient (-1)^{sum kappa} X_N^{-1}",
        leading_deviation(&conj.q_plus, &want, pts)?,
        1e-9,
        pts,
    );
    Ok(rep)
}

/// `Q^+ = Q^+_{1,1} ... Q^+_{1,N} X_N^{-1}` from a first-order factorization
/// whose closures `U_0` are the scalars `lambda_m` of the chain data.
pub fn first_order_conjugate(
    fc: &FactorizationChain,
    cs: &ChainSet,
    config: &VerifyConfig,
) -> Result<(MatDiffOperator, SpectralPolynomial, Vec<FirstOrderStep>, VerificationReport)> {
    let n = cs.n();
    let (steps, mut rep) = first_order_chain(fc, config)?;
    let mut lambdas = Vec::with_capacity(steps.len());
    for (m, step) in steps.iter().enumerate() {
        let lambda = cs.lambda_of(n * m);
        if (n * m..n * (m + 1)).any(|l| cs.lambda_of(l) != lambda) {
            return Err(Error::Contract(format!("step {} mixes spectral values", m + 1)));
        }
        let dev = step.distance_to_scalar(lambda, &fc.points)? / lambda.norm().max(1.0);
        if !(dev <= config.tol_accept) {
            return Err(Error::NonScalarClosure { step: m + 1, residual: dev });
        }
        rep.below(
            &format!("first-order.scalar-closure-{}", m + 1),
            "U_0 = lambda_m I",
            dev,
            SCALAR_CLOSURE_TOL,
            &fc.points,
        );
        lambdas.push(lambda);
    }
    let xn_inv = fc
        .leading
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Contract("leading coefficient is singular".into()))?;
    let mut ops: Vec<MatDiffOperator> = steps.iter().map(|s| s.q_plus.clone()).collect();
    ops.push(MatDiffOperator::constant(xn_inv));
    let q_plus = MatDiffOperator::compose_all(&ops)?;
    Ok((q_plus, SpectralPolynomial::from_roots(&lambdas), steps, rep))
}

/// Checks `(P)^c (K)^c = prod (H_+ - lambda_l)^{kappa_l1 + kappa_l2 - kappa_l} (K P)^c`
/// and that weak minimization of the left side yields `(K P)^c`.
#[allow(clippy::too_many_arguments)]
pub fn complement_composition_check(
    k: &MatDiffOperator,
    p: &MatDiffOperator,
    js_k: &JordanSpec,
    js_p: &JordanSpec,
    js_kp: &JordanSpec,
    h_plus: &Hamiltonian,
    h_m: &Hamiltonian,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    let n = p.n();
    let kp = MatDiffOperator::compose(k, p)?;
    let p_c = complement(p, js_p, h_plus, config)?;
    let k_c = complement(k, js_k, h_m, config)?;
    let kp_c = complement(&kp, js_kp, h_plus, config)?;

    let mut excess = Vec::new();
    for lambda in js_kp.lambdas() {
        let e = js_p.kappa(lambda) + js_k.kappa(lambda) - js_kp.kappa(lambda);
        if e > 0 {
            excess.push((lambda, e));
        }
    }
    let excess = SpectralPolynomial::new(excess)?;
    let lhs = MatDiffOperator::compose(&p_c, &k_c)?;
    let rhs = MatDiffOperator::compose(&poly_of_h(h_plus, &excess), &kp_c)?;
    let h_minus = partner_hamiltonian(&kp, h_plus)?;
    let pts = regular_points_for(
        config,
        8,
        &[p_c.clone(), k_c.clone(), kp_c.clone()],
        std::slice::from_ref(h_minus.potential()),
    )?;
    let probes = probe_battery(n);
    let mut rep = VerificationReport::new("complement-composition");
    rep.below(
        "complement.composition",
        "(P)^c (K)^c = prod (H_+ - lambda)^{excess} (KP)^c",
        probe_residual(&lhs, &rhs, &probes, &pts)?.max(coefficient_residual(&lhs, &rhs, &pts)?),
        config.tol_accept,
        &pts,
    );
    rep.exact(
        "complement.additivity",
        "(KP)^c = (P)^c (K)^c iff kappa_l1 + kappa_l2 = kappa_l",
        true,
        format!("excess degree {}", excess.degree()),
    );
    let js_lhs = compose_with_polynomial(&jordan_of_conjugate(js_kp, n)?, &excess, n)?;
    let minimized = minimize_weak(&lhs, &js_lhs, &h_minus, config)?;
    let signed = minimized.p.scale(Complex64::new(sign(excess.degree()), 0.0));
    rep.below(
        "complement.minimization",
        "(KP)^c is the weak minimization of (P)^c (K)^c",
        coefficient_residual(&signed, &kp_c, &pts)?,
        config.tol_accept,
        &pts,
    );
    Ok(rep)
}

/// Same chains with the eigenvalue groups of the ordering reversed; members
/// sharing an eigenvalue keep their relative order.
pub fn reverse_lambda_order(cs: &ChainSet) -> Result<ChainSet> {
    let mut groups: Vec<(Complex64, Vec<(usize, usize)>)> = Vec::new();
    for &(c, m) in cs.ordering() {
        let lambda = cs.chains()[c].lambda;
        match groups.iter_mut().find(|(l, _)| *l == lambda) {
            Some(g) => g.1.push((c, m)),
            None => groups.push((lambda, vec![(c, m)])),
        }
    }
    let ordering = groups.into_iter().rev().flat_map(|(_, g)| g).collect();
    ChainSet::with_ordering(cs.hamiltonian().clone(), cs.chains().to_vec(), ordering)
}

/// All exponent vectors of length `len` with total `total`.
fn compositions(len: usize, total: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(len - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Falsification sweep: no polynomial in `H_+` over the values of `js` of
/// degree below `(N + N') / 2` is divisible from the right by `q`. Candidates
/// are tried from the highest degree down, at most `limit` of them.
pub fn uniqueness_check(
    q: &MatDiffOperator,
    conj: &Conjugate,
    js: &JordanSpec,
    h_plus: &Hamiltonian,
    config: &VerifyConfig,
    limit: usize,
) -> Result<VerificationReport> {
    let big_n = q.order();
    let lambdas = js.lambdas();
    let mut rep = VerificationReport::new("uniqueness");
    let mut attempts = 0usize;
    let mut smallest = f64::INFINITY;
    let candidates = (big_n.div_ceil(2)..conj.poly.degree())
        .rev()
        .flat_map(|d| compositions(lambdas.len(), d).into_iter().map(move |e| (d, e)))
        .take(limit);
    for (degree, exps) in candidates {
        let roots: Vec<(Complex64, usize)> = lambdas
            .iter()
            .zip(&exps)
            .filter(|(_, &e)| e > 0)
            .map(|(&l, &e)| (l, e))
            .collect();
        let poly = SpectralPolynomial::new(roots)?;
        let dividend = poly_of_h(h_plus, &poly);
        let (_, r) = right_divide(&dividend, q)?;
        let res = remainder_residual(&r, &dividend, &conj.points)?;
        attempts += 1;
        smallest = smallest.min(res);
        rep.above(
            &format!(
                "uniqueness.degree-{degree}.m-{}",
                exps.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("-")
            ),
            "no conjugate of lower order",
            res,
            config.margin,
            &conj.points,
        );
    }
    rep.exact(
        "uniqueness.sweep",
        "no conjugate of lower order",
        true,
        format!("{attempts} candidate polynomials, smallest remainder {smallest:.3e}"),
    );
    Ok(rep)
}
