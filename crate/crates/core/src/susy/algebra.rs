//! The `2n x 2n` superalgebra and the determinant identity.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chains::chain::JordanSpec;
use crate::diffop::hamiltonian::{poly_of_h, Hamiltonian, SpectralPolynomial};
use crate::diffop::operator::MatDiffOperator;
use crate::diffop::residual::{coefficient_residual, probe_battery, probe_residual};
use crate::error::{Error, Result};
use crate::jets::function::{closure_fn, MatFn};
use crate::jets::matrix::{CMatrix, MatrixJet};
use crate::verify::{VerificationReport, VerifyConfig};

/// `[[a, b], [c, d]]` with `None` blocks identically zero.
pub fn block_operator(
    n: usize,
    blocks: [Option<&MatDiffOperator>; 4],
) -> Result<MatDiffOperator> {
    if blocks.iter().flatten().any(|b| b.n() != n) {
        return Err(Error::Contract("block sizes differ".into()));
    }
    let order = blocks.iter().flatten().map(|b| b.order()).max().unwrap_or(0);
    let owned: Vec<Option<MatDiffOperator>> = blocks.iter().map(|b| b.cloned()).collect();
    let singular: Vec<f64> = owned.iter().flatten().flat_map(|b| b.singular_set().to_vec()).collect();
    Ok(MatDiffOperator::from_fn(2 * n, order, None, singular, move |x0, k| {
        let mut coeffs = vec![vec![CMatrix::zeros(2 * n, 2 * n); k + 1]; order + 1];
        for (slot, b) in owned.iter().enumerate() {
            let Some(b) = b else { continue };
            let (r0, c0) = ((slot / 2) * n, (slot % 2) * n);
            for (j, jet) in b.coeffs_at(x0, k)?.iter().enumerate() {
                for (kk, m) in jet.coeffs().iter().enumerate() {
                    coeffs[j][kk].view_mut((r0, c0), (n, n)).copy_from(m);
                }
            }
        }
        Ok(coeffs.into_iter().map(|c| MatrixJet::from_coeffs(x0, c)).collect())
    }))
}

fn block_potential(a: &MatFn, b: &MatFn) -> MatFn {
    let n = a.dims().0;
    let (a, b) = (a.clone(), b.clone());
    let singular = a.singular_set().into_iter().chain(b.singular_set()).collect();
    closure_fn((2 * n, 2 * n), singular, move |x0, k| {
        let (ja, jb) = (a.eval(x0, k)?, b.eval(x0, k)?);
        let coeffs = ja
            .coeffs()
            .iter()
            .zip(jb.coeffs())
            .map(|(u, v)| {
                let mut m = CMatrix::zeros(2 * n, 2 * n);
                m.view_mut((0, 0), (n, n)).copy_from(u);
                m.view_mut((n, n), (n, n)).copy_from(v);
                m
            })
            .collect();
        Ok(MatrixJet::from_coeffs(x0, coeffs))
    })
}

fn exactly_zero(op: &MatDiffOperator, points: &[f64]) -> Result<bool> {
    for &x in points {
        for c in op.values_at(Complex64::new(x, 0.0))? {
            if c.iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `{Q, Qbar} = P(H)`, `[H, Q] = [H, Qbar] = 0` and `Q^2 = Qbar^2 = 0` for
/// `H = diag(H_+, H_-)`, `Q = [[0, Q+], [0, 0]]`, `Qbar = [[0, 0], [Q-, 0]]`.
pub fn susy_algebra(
    h_plus: &Hamiltonian,
    h_minus: &Hamiltonian,
    q_minus: &MatDiffOperator,
    q_plus: &MatDiffOperator,
    poly: &SpectralPolynomial,
    points: &[f64],
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    let n = h_plus.n();
    let big_h = Hamiltonian::new(block_potential(h_plus.potential(), h_minus.potential()))?;
    let h_op = big_h.operator();
    let q = block_operator(n, [None, Some(q_plus), None, None])?;
    let qbar = block_operator(n, [None, None, Some(q_minus), None])?;
    let probes = probe_battery(2 * n);
    let tol = config.tol_accept;
    let residual = |a: &MatDiffOperator, b: &MatDiffOperator| -> Result<f64> {
        Ok(probe_residual(a, b, &probes, points)?.max(coefficient_residual(a, b, points)?))
    };
    let mut rep = VerificationReport::new("susy-algebra");

    let anti = MatDiffOperator::compose(&q, &qbar)?.add(&MatDiffOperator::compose(&qbar, &q)?)?;
    rep.below("susy.anticommutator", "{Q, Qbar} = P(H)", residual(&anti, &poly_of_h(&big_h, poly))?, tol, points);
    rep.below(
        "susy.commutator-q",
        "[H, Q] = 0",
        residual(&MatDiffOperator::compose(&h_op, &q)?, &MatDiffOperator::compose(&q, &h_op)?)?,
        tol,
        points,
    );
    rep.below(
        "susy.commutator-qbar",
        "[H, Qbar] = 0",
        residual(&MatDiffOperator::compose(&h_op, &qbar)?, &MatDiffOperator::compose(&qbar, &h_op)?)?,
        tol,
        points,
    );
    rep.exact(
        "susy.nilpotent-q",
        "Q^2 = 0",
        exactly_zero(&MatDiffOperator::compose(&q, &q)?, points)?,
        "block structure",
    );
    rep.exact(
        "susy.nilpotent-qbar",
        "Qbar^2 = 0",
        exactly_zero(&MatDiffOperator::compose(&qbar, &qbar)?, points)?,
        "block structure",
    );
    Ok(rep)
}

/// `det(mu - T+) det(mu - T-) = P(mu)^{2n}` at random `mu`, and exactly as
/// multiplicities per root.
pub fn det_identity_check(
    js_plus: &JordanSpec,
    js_minus: &JordanSpec,
    poly: &SpectralPolynomial,
    n: usize,
    config: &VerifyConfig,
) -> VerificationReport {
    let mut rep = VerificationReport::new("det-identity");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(9);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mu = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let lhs = js_plus.characteristic(mu) * js_minus.characteristic(mu);
        let rhs = poly.eval(mu).powu(2 * n as u32);
        worst = worst.max((lhs - rhs).norm() / (lhs.norm() + rhs.norm()).max(f64::MIN_POSITIVE));
    }
    rep.below("det.random-points", "det(mu - T+) det(mu - T-) = P(mu)^{2n}", worst, 1e-9, &[]);
    let mut exact = true;
    let mut detail = Vec::new();
    for &(lambda, kappa) in &poly.roots {
        let total = js_plus.algebraic_multiplicity(lambda) + js_minus.algebraic_multiplicity(lambda);
        exact &= total == 2 * n * kappa;
        detail.push(format!("{lambda}: {total} vs {}", 2 * n * kappa));
    }
    let stray = js_plus
        .lambdas()
        .into_iter()
        .chain(js_minus.lambdas())
        .any(|l| poly.multiplicity(l) == 0);
    rep.exact(
        "det.multiplicities",
        "mult_+(lambda) + mult_-(lambda) = 2n kappa",
        exact && !stray,
        detail.join(", "),
    );
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::expr::ScalarExpr;
    use crate::jets::function::{const_fn, expr_fn, real, ExprMatrix};

    #[test]
    fn free_first_order_superalgebra() {
        let h = Hamiltonian::new(const_fn(CMatrix::zeros(2, 2))).unwrap();
        let q = MatDiffOperator::derivative(2);
        let qp = q.scale(real(-1.0));
        let poly = SpectralPolynomial::from_roots(&[real(0.0)]);
        let rep = susy_algebra(&h, &h, &q, &qp, &poly, &[0.3, -1.2], &VerifyConfig::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn oscillator_pair() {
        let vp = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::add(vec![ScalarExpr::x().pow(2), ScalarExpr::real(-1.0)])]));
        let vm = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::add(vec![ScalarExpr::x().pow(2), ScalarExpr::real(1.0)])]));
        let x = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::x()]));
        let qm = MatDiffOperator::from_coefficients(vec![x.clone(), const_fn(CMatrix::identity(1, 1))]).unwrap();
        let qp = MatDiffOperator::from_coefficients(vec![x, const_fn(-CMatrix::identity(1, 1))]).unwrap();
        let poly = SpectralPolynomial::from_roots(&[real(0.0)]);
        let rep = susy_algebra(
            &Hamiltonian::new(vp).unwrap(),
            &Hamiltonian::new(vm).unwrap(),
            &qm,
            &qp,
            &poly,
            &[0.3, -1.2, 2.5],
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        assert!(rep.max_residual("susy.") < 1e-9);
    }

    #[test]
    fn scalar_det_pairing() {
        let js = JordanSpec::new(vec![(real(2.0), vec![1])]).unwrap();
        let poly = SpectralPolynomial::from_roots(&[real(2.0)]);
        let rep = det_identity_check(&js, &js, &poly, 1, &VerifyConfig::default());
        assert!(rep.passed(), "{:?}", rep.failures());
    }
}
