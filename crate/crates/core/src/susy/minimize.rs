//! Weak minimization: stripping full block sets as a polynomial factor.

use num_complex::Complex64;

use super::jordan::{after_removal, order_formula, removable, OrderFormula};
use crate::builder::partner_hamiltonian;
use crate::chains::chain::JordanSpec;
use crate::diffop::division::right_divide;
use crate::diffop::hamiltonian::{poly_of_h, Hamiltonian, SpectralPolynomial};
use crate::diffop::operator::MatDiffOperator;
use crate::diffop::residual::{coefficient_residual, intertwining_residual, probe_battery, probe_residual, relative_difference};
use crate::error::{Error, Result};
use crate::factor::remainder_residual;
use crate::verify::{regular_points_for, VerificationReport, VerifyConfig};

#[derive(Debug, Clone)]
pub struct MinimizationResult {
    pub p: MatDiffOperator,
    /// `delta_l` per removed value.
    pub removed: SpectralPolynomial,
    pub formula: OrderFormula,
    pub remainder: f64,
    /// Jordan data of `P`.
    pub reduced: JordanSpec,
    pub points: Vec<f64>,
}

/// `prod (lambda_l I - H)^{delta_l}`.
pub fn removal_operator(h: &Hamiltonian, removed: &SpectralPolynomial) -> MatDiffOperator {
    let sign = if removed.degree().is_multiple_of(2) { 1.0 } else { -1.0 };
    poly_of_h(h, removed).scale(Complex64::new(sign, 0.0))
}

pub(crate) fn check_dimension(js: &JordanSpec, q: &MatDiffOperator) -> Result<()> {
    if js.dimension() != q.n() * q.order() {
        return Err(Error::InvalidJordanSpec(format!(
            "Jordan data of size {} for an operator with {}-dimensional kernel",
            js.dimension(),
            q.n() * q.order()
        )));
    }
    js.check_bound(q.n())
}

/// Writes `q = P prod (lambda_l I - H)^{delta_l}` over the values of `js`
/// with exactly `2n` blocks, `delta_l` the smallest block.
pub fn minimize_weak(
    q: &MatDiffOperator,
    js: &JordanSpec,
    source: &Hamiltonian,
    config: &VerifyConfig,
) -> Result<MinimizationResult> {
    check_dimension(js, q)?;
    let n = q.n();
    let formula = order_formula(js, n, q.order())?;
    let removed = removable(js, n)?;
    let reduced = after_removal(js, &removed)?;
    if removed.degree() == 0 {
        let points = regular_points_for(config, 5, std::slice::from_ref(q), &[])?;
        return Ok(MinimizationResult {
            p: q.clone(),
            removed,
            formula,
            remainder: 0.0,
            reduced,
            points,
        });
    }
    let d = removal_operator(source, &removed);
    let (p, r) = right_divide(q, &d)?;
    let points = regular_points_for(config, 5, &[q.clone(), p.clone()], &[])?;
    let remainder = remainder_residual(&r, q, &points)?;
    if !(remainder <= config.tol_accept) {
        return Err(Error::InconsistentJordanSpec { residual: remainder });
    }
    Ok(MinimizationResult {
        p,
        removed,
        formula,
        remainder,
        reduced,
        points,
    })
}

/// Recomposition, leading coefficient, intertwining of `P`, the order
/// formulas and the fixed-point property.
pub fn verify_minimization(
    q: &MatDiffOperator,
    res: &MinimizationResult,
    source: &Hamiltonian,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    let pts = &res.points;
    let n = q.n();
    let mut rep = VerificationReport::new("minimize");
    rep.below("minimize.remainder", "Q - P D = 0", res.remainder, config.tol_accept, pts);
    let d = removal_operator(source, &res.removed);
    let pd = MatDiffOperator::compose(&res.p, &d)?;
    rep.below(
        "minimize.recomposition",
        "Q = P prod (lambda_l I - H_+)^{delta_l}",
        probe_residual(q, &pd, &probe_battery(n), pts)?.max(coefficient_residual(q, &pd, pts)?),
        config.tol_accept,
        pts,
    );
    let expected = res.formula.by_removal;
    rep.exact(
        "minimize.order",
        "M = N - 2 sum delta_l",
        res.p.order() as i64 == expected,
        format!("order {} vs {}", res.p.order(), expected),
    );
    rep.exact(
        "minimize.order-formulas",
        "N - 2 sum delta_l = (1/n) sum k_l",
        res.formula.consistent(),
        format!("{:?}", res.formula),
    );
    let mut lead: f64 = 0.0;
    for &x in pts {
        let a = q.values_at(Complex64::new(x, 0.0))?;
        let b = res.p.values_at(Complex64::new(x, 0.0))?;
        lead = lead.max(relative_difference(&a[q.order()], &b[res.p.order()]));
    }
    rep.below("minimize.leading", "leading coefficient of P is X_N", lead, 1e-9, pts);
    let h_minus = partner_hamiltonian(q, source)?;
    rep.below(
        "minimize.intertwining",
        "P H_+ = H_- P",
        intertwining_residual(&res.p, source, &h_minus, &probe_battery(n), pts)?.max(),
        config.tol_accept,
        pts,
    );
    let again = removable(&res.reduced, n)?;
    rep.exact(
        "minimize.fixed-point",
        "P is weakly non-minimizable",
        again.degree() == 0,
        format!("{} removable values remain", again.roots.len()),
    );
    Ok(rep)
}
