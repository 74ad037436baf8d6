//! The intertwiner of order `N` with prescribed constant leading coefficient
//! whose kernel is spanned by `nN` given chain members.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chains::chain::ChainSet;
use crate::chains::wronskian::wronskian_matrix;
use crate::diffop::hamiltonian::{partner_potential, Hamiltonian};
use crate::diffop::operator::MatDiffOperator;
use crate::diffop::residual::{intertwining_residual, probe_battery};
use crate::error::{Error, Result};
use crate::jets::function::{add_fn, closure_fn, const_fn, MatFn};
use crate::jets::matrix::{mat_jet_solve, CMatrix, MatrixJet};
use crate::verify::{regular_points_for, VerificationReport, VerifyConfig};

/// Solves `sum_{j<N} X_j F_l^(j) = -X_N F_l^(N)` for all members at each point.
pub fn build_from_members(members: Vec<MatFn>, x_n: CMatrix) -> Result<MatDiffOperator> {
    let n = x_n.nrows();
    if members.is_empty() || !members.len().is_multiple_of(n) {
        return Err(Error::BadChainLengths(format!(
            "{} kernel members is not a positive multiple of n = {n}",
            members.len()
        )));
    }
    if x_n.clone().try_inverse().is_none() {
        return Err(Error::Contract("leading coefficient must be invertible".into()));
    }
    let big_n = members.len() / n;
    let singular: Vec<f64> = members.iter().flat_map(|m| m.singular_set()).collect();
    let xn = x_n.clone();
    Ok(MatDiffOperator::from_fn(n, big_n, Some(x_n), singular, move |x0, k| {
        let w = wronskian_matrix(&members, big_n, x0, k)?;
        let rows = members.len();
        let mut rhs = vec![CMatrix::zeros(rows, n); k + 1];
        for (l, f) in members.iter().enumerate() {
            let top = f.eval(x0, k + big_n)?.nth_derivative(big_n, k);
            for (kk, m) in rhs.iter_mut().enumerate() {
                let v = -(&xn * top.coeff(kk));
                for r in 0..n {
                    m[(l, r)] = v[(r, 0)];
                }
            }
        }
        let y = mat_jet_solve(&w, &MatrixJet::from_coeffs(x0, rhs))?;
        let mut out = Vec::with_capacity(big_n + 1);
        for j in 0..big_n {
            let coeffs = y
                .coeffs()
                .iter()
                .map(|m| m.view((j * n, 0), (n, n)).transpose())
                .collect();
            out.push(MatrixJet::from_coeffs(x0, coeffs));
        }
        out.push(MatrixJet::constant(x0, k, &xn));
        Ok(out)
    }))
}

/// Intertwiner whose kernel is spanned by every member of `cs`; the leading
/// coefficient defaults to the identity.
pub fn build_intertwiner(cs: &ChainSet, x_n: Option<CMatrix>) -> Result<MatDiffOperator> {
    let n = cs.n();
    build_from_members(cs.members(), x_n.unwrap_or_else(|| CMatrix::identity(n, n)))
}

/// Partner Hamiltonian `H_-` of `q` for the given `H_+`.
pub fn partner_hamiltonian(q: &MatDiffOperator, h_plus: &Hamiltonian) -> Result<Hamiltonian> {
    Hamiltonian::new(partner_potential(q, h_plus.potential())?)
}

/// Regular sample points for `q` and `H_-`.
pub fn regular_points(
    config: &VerifyConfig,
    salt: u64,
    q: &MatDiffOperator,
    h_minus: &Hamiltonian,
) -> Result<Vec<f64>> {
    regular_points_for(config, salt, std::slice::from_ref(q), std::slice::from_ref(h_minus.potential()))
}

/// `q` with `delta (1 + x)` added to coefficient `j`.
pub fn perturbed(q: &MatDiffOperator, j: usize, delta: &CMatrix) -> Result<MatDiffOperator> {
    let mut coeffs: Vec<MatFn> = (0..=q.order()).map(|i| q.coefficient(i)).collect();
    if let Some(lead) = q.leading_constant() {
        coeffs[q.order()] = const_fn(lead.clone());
    }
    let d = delta.clone();
    let ramp = closure_fn(d.shape(), Vec::new(), move |x0, k| {
        let mut c = vec![CMatrix::zeros(d.nrows(), d.ncols()); k + 1];
        c[0] = &d * (Complex64::new(1.0, 0.0) + x0);
        if k > 0 {
            c[1] = d.clone();
        }
        Ok(MatrixJet::from_coeffs(x0, c))
    });
    coeffs[j] = add_fn(&coeffs[j], &ramp);
    MatDiffOperator::from_coefficients(coeffs)
}

/// Random constant matrix with unit max-modulus entry.
pub fn unit_perturbation(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let s = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    m / Complex64::new(s, 0.0)
}

pub struct Certificate {
    pub report: VerificationReport,
    pub h_minus: Hamiltonian,
    pub points: Vec<f64>,
}

/// Builds `H_-` and checks `Q H_+ = H_- Q` on the probe battery and
/// coefficientwise at seeded points.
pub fn certify_intertwining(
    q: &MatDiffOperator,
    h_plus: &Hamiltonian,
    config: &VerifyConfig,
) -> Result<Certificate> {
    let h_minus = partner_hamiltonian(q, h_plus)?;
    let points = regular_points(config, 1, q, &h_minus)?;
    let r = intertwining_residual(q, h_plus, &h_minus, &probe_battery(q.n()), &points)?;
    let mut report = VerificationReport::new("build");
    report.below("intertwining.probe", "QH+ = H-Q", r.probe, config.tol_accept, &points);
    report.below(
        "intertwining.coefficients",
        "QH+ = H-Q",
        r.coefficientwise,
        config.tol_accept,
        &points,
    );
    Ok(Certificate {
        report,
        h_minus,
        points,
    })
}

/// Perturbs each coefficient in turn by `size` times a random unit matrix
/// and checks that the intertwining residual then exceeds the tolerance.
pub fn negative_control(
    q: &MatDiffOperator,
    h_plus: &Hamiltonian,
    h_minus: &Hamiltonian,
    points: &[f64],
    config: &VerifyConfig,
    size: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("negative-control");
    for j in 0..=q.order() {
        let delta = unit_perturbation(q.n(), config.seed ^ (0x9e37 + j as u64)) * Complex64::new(size, 0.0);
        let bad = perturbed(q, j, &delta)?;
        let r = intertwining_residual(&bad, h_plus, h_minus, &probe_battery(q.n()), points)?;
        report.above(
            &format!("negative-control.coefficient-{j}"),
            "perturbed Q fails QH+ = H-Q",
            r.max(),
            config.tol_accept,
            points,
        );
    }
    Ok(report)
}

/// Action of `q` on each member; all should vanish.
pub fn kernel_residual(q: &MatDiffOperator, members: &[MatFn], points: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in members {
        for &x in points {
            let z = Complex64::new(x, 0.0);
            let img = q.apply(f, z, 0)?;
            let fj = f.eval(z, q.order())?;
            let scale = fj.magnitude().max(1.0);
            let lead = q
                .values_at(z)?
                .iter()
                .map(|m| m.iter().map(|v| v.norm()).fold(0.0, f64::max))
                .fold(0.0, f64::max)
                .max(1.0);
            worst = worst.max(img.value_magnitude() / (scale * lead));
        }
    }
    Ok(worst)
}
