//! Factorization of an intertwiner into a chain of lower-order intertwiners
//! through intermediate Hamiltonians, regular reduction and the stacked
//! irreducible construction.

use num_complex::Complex64;

use crate::builder::{build_from_members, build_intertwiner, kernel_residual, partner_hamiltonian};
use crate::chains::chain::ChainSet;
use crate::chains::generators::assemble_diag;
use crate::chains::wronskian::{
    hadamard_scale, nonvanishing_ladder, prefix_wronskian, relative_wronskian, sign_change_scan,
    wronskian_matrix, wronskian_of,
};
use crate::diffop::division::right_divide;
use crate::diffop::hamiltonian::{monic_partner_potential, Hamiltonian};
use crate::diffop::operator::MatDiffOperator;
use crate::diffop::residual::{
    coefficient_residual, intertwining_residual, max_abs, operator_magnitude, probe_battery,
    probe_residual, relative_difference,
};
use crate::error::{Error, Result};
use crate::jets::function::{add_fn, const_fn, derivative_fn, mul_fn, sub_fn, MatFn};
use crate::jets::matrix::{mat_jet_det, CMatrix};
use crate::verify::{regular_points_for, sample_points, VerificationReport, VerifyConfig};

fn pt(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone)]
pub struct FactorizationChain {
    /// `Q_{N_1,1}, ..., Q_{N_M,M}` in order of application.
    pub factors: Vec<MatDiffOperator>,
    /// `H_0 = H_+, H_1, ..., H_M` with `H_M = X_N^{-1} H_- X_N`.
    pub intermediates: Vec<Hamiltonian>,
    pub ladder: Vec<usize>,
    pub singular_sets: Vec<Vec<f64>>,
    pub leading: CMatrix,
    /// Regular points shared by every factor and intermediate potential.
    pub points: Vec<f64>,
}

impl FactorizationChain {
    pub fn orders(&self) -> Vec<usize> {
        self.factors.iter().map(MatDiffOperator::order).collect()
    }

    /// `Q_{N_m,m} ... Q_{N_1,1}` for the first `m` factors.
    pub fn partial_product(&self, m: usize) -> Result<MatDiffOperator> {
        if m == 0 {
            return Ok(MatDiffOperator::identity(self.leading.nrows()));
        }
        let ops: Vec<MatDiffOperator> = self.factors[..m].iter().rev().cloned().collect();
        MatDiffOperator::compose_all(&ops)
    }

    /// `X_N Q_{N_M,M} ... Q_{N_1,1}`.
    pub fn recomposed(&self) -> Result<MatDiffOperator> {
        Ok(self.partial_product(self.factors.len())?.left_mul(&self.leading))
    }
}

/// Zero-test points for Wronskian ladders.
pub fn zero_test_points(config: &VerifyConfig) -> Vec<f64> {
    sample_points(config, config.zero_points, 7, &[], |_| Ok(())).expect("unconditional sampling")
}

/// Maximal ladder: every `j` with `W_j` not identically zero, then `N`.
pub fn default_ladder(cs: &ChainSet, config: &VerifyConfig) -> Result<Vec<usize>> {
    nonvanishing_ladder(cs, &zero_test_points(config), config.tol_zero)
}

fn check_ladder(ladder: &[usize], big_n: usize) -> Result<()> {
    let monotone = ladder.windows(2).all(|w| w[0] < w[1]);
    if ladder.is_empty() || !monotone || ladder[0] == 0 || *ladder.last().unwrap() != big_n {
        return Err(Error::Contract(format!(
            "ladder {ladder:?} must increase strictly from above 0 to {big_n}"
        )));
    }
    Ok(())
}

/// Largest remainder coefficient relative to the dividend.
pub(crate) fn remainder_residual(r: &MatDiffOperator, a: &MatDiffOperator, points: &[f64]) -> Result<f64> {
    let scale = operator_magnitude(a, points)?.max(1.0);
    Ok(operator_magnitude(r, points)? / scale)
}

/// Splits `q` along the ladder `j_1 < ... < j_M = N` of `cs`.
pub fn factorize(
    q: &MatDiffOperator,
    cs: &ChainSet,
    ladder: &[usize],
    config: &VerifyConfig,
) -> Result<FactorizationChain> {
    let n = cs.n();
    let big_n = q.order();
    if cs.total() != n * big_n {
        return Err(Error::BadChainLengths(format!(
            "{} members for an operator of order {big_n} and size {n}",
            cs.total()
        )));
    }
    check_ladder(ladder, big_n)?;
    let xn = q
        .leading_constant()
        .ok_or_else(|| Error::Contract("factorize needs a constant leading coefficient".into()))?
        .clone();
    let xn_inv = xn
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Contract("leading coefficient is singular".into()))?;
    let v_plus = cs.hamiltonian().potential().clone();
    let members = cs.members();

    let mut partials = vec![MatDiffOperator::identity(n)];
    for (m, &j) in ladder.iter().enumerate() {
        partials.push(if m + 1 == ladder.len() {
            q.left_mul(&xn_inv)
        } else {
            build_from_members(members[..n * j].to_vec(), CMatrix::identity(n, n))?
        });
    }
    let mut factors = Vec::with_capacity(ladder.len());
    let mut remainders = Vec::with_capacity(ladder.len());
    for m in 1..partials.len() {
        let (f, r) = right_divide(&partials[m], &partials[m - 1])?;
        factors.push(f);
        remainders.push(r);
    }
    let mut intermediates = vec![cs.hamiltonian().clone()];
    for p in &partials[1..] {
        intermediates.push(Hamiltonian::new(monic_partner_potential(p, &v_plus))?);
    }
    let potentials: Vec<MatFn> = intermediates.iter().map(|h| h.potential().clone()).collect();
    let points = regular_points_for(config, 2, &factors, &potentials)?;
    for (m, r) in remainders.iter().enumerate() {
        let res = remainder_residual(r, &partials[m + 1], &points)?;
        if !(res <= config.tol_accept) {
            return Err(Error::FactorizationResidual { residual: res });
        }
    }
    let singular_sets = factors.iter().map(|f| f.singular_set().to_vec()).collect();
    Ok(FactorizationChain {
        factors,
        intermediates,
        ladder: ladder.to_vec(),
        singular_sets,
        leading: xn,
        points,
    })
}

/// Checks orders, recomposition, chain intertwinings, intermediate potentials,
/// kernels of partial products and eigenvalue transport.
pub fn verify_factorization(
    fc: &FactorizationChain,
    q: &MatDiffOperator,
    cs: &ChainSet,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    let n = cs.n();
    let pts = &fc.points;
    let tol = config.tol_accept;
    let mut rep = VerificationReport::new("factorize");
    let orders = fc.orders();
    let steps: Vec<usize> = fc
        .ladder
        .iter()
        .scan(0, |prev, &j| {
            let d = j - *prev;
            *prev = j;
            Some(d)
        })
        .collect();
    rep.exact(
        "factorization.orders",
        "N_m = j_m - j_{m-1}, sum N_m = N",
        orders == steps && orders.iter().sum::<usize>() == q.order(),
        format!("orders {orders:?}, ladder {:?}", fc.ladder),
    );

    let probes = probe_battery(n);
    let recomposed = fc.recomposed()?;
    rep.below(
        "factorization.recomposition",
        "Q = X_N Q_M ... Q_1",
        probe_residual(q, &recomposed, &probes, pts)?.max(coefficient_residual(q, &recomposed, pts)?),
        tol,
        pts,
    );

    let h_minus = partner_hamiltonian(q, cs.hamiltonian())?;
    let final_target = h_minus.conjugate_by(&fc.leading.clone().try_inverse().unwrap())?;
    rep.below(
        "factorization.final-hamiltonian",
        "H_M = X_N^{-1} H_- X_N",
        potential_residual(fc.intermediates.last().unwrap().potential(), final_target.potential(), pts)?,
        tol,
        pts,
    );

    let members = cs.members();
    for (m, f) in fc.factors.iter().enumerate() {
        let r = intertwining_residual(f, &fc.intermediates[m], &fc.intermediates[m + 1], &probes, pts)?;
        rep.below(
            &format!("factorization.chain-{}", m + 1),
            "Q_m H_{m-1} = H_m Q_m",
            r.max(),
            tol,
            pts,
        );

        let step = monic_partner_potential(f, fc.intermediates[m].potential());
        rep.below(
            &format!("factorization.potential-{}", m + 1),
            "V_m = V_{m-1} + 2 X'_{N_m-1,m}",
            potential_residual(&step, fc.intermediates[m + 1].potential(), pts)?,
            tol,
            pts,
        );

        let p = fc.partial_product(m + 1)?;
        let kernel = kernel_residual(&p, &members[..n * fc.ladder[m]], pts)?;
        rep.below(
            &format!("factorization.kernel-{}", m + 1),
            "Q_m ... Q_1 kills the first n j_m members",
            kernel,
            tol,
            pts,
        );

        let prev = fc.partial_product(m)?;
        let lo = if m == 0 { 0 } else { n * fc.ladder[m - 1] };
        let hi = n * fc.ladder[m];
        let mut worst: f64 = 0.0;
        for l in lo..hi {
            let lam = cs.lambda_of(l);
            let lhs = MatDiffOperator::compose(&fc.intermediates[m].shifted(lam), &prev)?;
            for &x in pts {
                let a = lhs.apply(&members[l], pt(x), 0)?;
                let b = match cs.predecessor(l) {
                    Some(pl) => prev.apply(&members[pl], pt(x), 0)?.value().clone(),
                    None => CMatrix::zeros(n, 1),
                };
                worst = worst.max(relative_difference(a.value(), &b));
            }
        }
        rep.below(
            &format!("factorization.transport-{}", m + 1),
            "images of chain members keep their eigenvalue under H_{m-1}",
            worst,
            tol,
            pts,
        );
    }
    Ok(rep)
}

pub(crate) fn potential_residual(a: &MatFn, b: &MatFn, points: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in points {
        let u = a.eval(pt(x), 0)?;
        let v = b.eval(pt(x), 0)?;
        worst = worst.max(relative_difference(u.value(), v.value()));
    }
    Ok(worst)
}

/// One first-order step: `Q^- = I d + X_0`, `Q^+ = -I d + X_0`,
/// `U_0 = V_{j-1} - X_0^2 + X_0'`.
#[derive(Debug, Clone)]
pub struct FirstOrderStep {
    pub q_minus: MatDiffOperator,
    pub q_plus: MatDiffOperator,
    pub u0: MatFn,
}

impl FirstOrderStep {
    /// Largest distance of `U_0` from a multiple of the identity.
    pub fn off_identity(&self, points: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &x in points {
            let u = self.u0.eval(pt(x), 0)?.value().clone();
            let n = u.nrows();
            let mean = u.trace() / Complex64::new(n as f64, 0.0);
            worst = worst.max(max_abs(&(u - CMatrix::identity(n, n) * mean)));
        }
        Ok(worst)
    }

    /// Largest deviation of `U_0` from `lambda I`.
    pub fn distance_to_scalar(&self, lambda: Complex64, points: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &x in points {
            let u = self.u0.eval(pt(x), 0)?.value().clone();
            let n = u.nrows();
            worst = worst.max(max_abs(&(u - CMatrix::identity(n, n) * lambda)));
        }
        Ok(worst)
    }
}

/// Closure operators and `U_0` for a factorization into first-order steps.
pub fn first_order_chain(
    fc: &FactorizationChain,
    config: &VerifyConfig,
) -> Result<(Vec<FirstOrderStep>, VerificationReport)> {
    if fc.orders().iter().any(|&o| o != 1) {
        return Err(Error::Contract(format!(
            "first-order chain needs unit steps, got orders {:?}",
            fc.orders()
        )));
    }
    let n = fc.leading.nrows();
    let pts = &fc.points;
    let mut rep = VerificationReport::new("first-order-chain");
    let mut steps = Vec::with_capacity(fc.factors.len());
    for (j, f) in fc.factors.iter().enumerate() {
        let x0 = f.coefficient(0);
        let q_plus = MatDiffOperator::from_coefficients(vec![
            x0.clone(),
            const_fn(-CMatrix::identity(n, n)),
        ])?;
        let u0 = add_fn(
            &sub_fn(fc.intermediates[j].potential(), &mul_fn(&x0, &x0)),
            &derivative_fn(&x0),
        );
        let u_op = MatDiffOperator::from_coefficients(vec![u0.clone()])?;

        let below = MatDiffOperator::compose(&q_plus, f)?.add(&u_op)?;
        rep.below(
            &format!("first-order.lower-{}", j + 1),
            "H_{j-1} = Q+ Q- + U_0",
            coefficient_residual(&below, &fc.intermediates[j].operator(), pts)?,
            config.tol_accept,
            pts,
        );
        let above = MatDiffOperator::compose(f, &q_plus)?.add(&u_op)?;
        rep.below(
            &format!("first-order.upper-{}", j + 1),
            "H_j = Q- Q+ + U_0",
            coefficient_residual(&above, &fc.intermediates[j + 1].operator(), pts)?,
            config.tol_accept,
            pts,
        );
        let uq = MatDiffOperator::compose(&u_op, f)?;
        let qu = MatDiffOperator::compose(f, &u_op)?;
        rep.below(
            &format!("first-order.commutation-{}", j + 1),
            "[U_0, Q-] = 0",
            coefficient_residual(&uq, &qu, pts)?,
            config.tol_accept,
            pts,
        );
        steps.push(FirstOrderStep {
            q_minus: f.clone(),
            q_plus,
            u0,
        });
    }
    Ok((steps, rep))
}

/// Factors `X_N Q_m X_N^{-1}` and Hamiltonians `X_N H_m X_N^{-1}`.
pub fn mirror_factorization(fc: &FactorizationChain) -> Result<FactorizationChain> {
    let xn = &fc.leading;
    let factors = fc
        .factors
        .iter()
        .map(|f| f.conjugate_by(xn))
        .collect::<Result<Vec<_>>>()?;
    let intermediates = fc
        .intermediates
        .iter()
        .map(|h| h.conjugate_by(xn))
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorizationChain {
        singular_sets: fc.singular_sets.clone(),
        factors,
        intermediates,
        ladder: fc.ladder.clone(),
        leading: xn.clone(),
        points: fc.points.clone(),
    })
}

/// Checks `Q = Q~_M ... Q~_1 X_N`, the mirrored chain relations and
/// `H~_M = H_-`, `X_N H_+ = H~_0 X_N`.
pub fn verify_mirror(
    mirror: &FactorizationChain,
    q: &MatDiffOperator,
    h_plus: &Hamiltonian,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    let pts = &mirror.points;
    let n = q.n();
    let probes = probe_battery(n);
    let mut rep = VerificationReport::new("mirror");
    let product = MatDiffOperator::compose(&mirror.partial_product(mirror.factors.len())?, &MatDiffOperator::constant(mirror.leading.clone()))?;
    rep.below(
        "mirror.recomposition",
        "Q = Q~_M ... Q~_1 X_N",
        probe_residual(q, &product, &probes, pts)?,
        config.tol_accept,
        pts,
    );
    for (m, f) in mirror.factors.iter().enumerate() {
        let r = intertwining_residual(f, &mirror.intermediates[m], &mirror.intermediates[m + 1], &probes, pts)?;
        rep.below(
            &format!("mirror.chain-{}", m + 1),
            "Q~_m H~_{m-1} = H~_m Q~_m",
            r.max(),
            config.tol_accept,
            pts,
        );
    }
    let h_minus = partner_hamiltonian(q, h_plus)?;
    rep.below(
        "mirror.final-hamiltonian",
        "H~_M = H_-",
        potential_residual(mirror.intermediates.last().unwrap().potential(), h_minus.potential(), pts)?,
        config.tol_accept,
        pts,
    );
    let xn_op = MatDiffOperator::constant(mirror.leading.clone());
    let r = intertwining_residual(&xn_op, h_plus, &mirror.intermediates[0], &probes, pts)?;
    rep.below("mirror.initial", "X_N H_+ = H~_0 X_N", r.max(), config.tol_accept, pts);
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub k: MatDiffOperator,
    pub p: MatDiffOperator,
    pub h_m: Hamiltonian,
    pub report: VerificationReport,
}

/// Splits `q = K P` with `P` of order `m` built from the first `n m`
/// members of `cs`, provided their Wronskian has no zero on the window.
pub fn reduce(q: &MatDiffOperator, cs: &ChainSet, m: usize, config: &VerifyConfig) -> Result<Reduction> {
    let n = cs.n();
    if m == 0 || m > q.order() || n * m > cs.total() {
        return Err(Error::Contract(format!("reduce: order {m} out of range")));
    }
    let prefix = cs.prefix(n * m);
    for x in zero_test_points(config) {
        if !(relative_wronskian(&prefix, m, x)? > config.tol_zero) {
            return Err(Error::NotRegularlyReducible { m });
        }
    }
    let w = prefix_wronskian(cs, m)?;
    if !sign_change_scan(&w, config.window, config.scan_cells)?.is_empty() {
        return Err(Error::NotRegularlyReducible { m });
    }

    let p = build_from_members(prefix, CMatrix::identity(n, n))?;
    let (k, r) = right_divide(q, &p)?;
    let h_m = Hamiltonian::new(monic_partner_potential(&p, cs.hamiltonian().potential()))?;
    let h_minus = partner_hamiltonian(q, cs.hamiltonian())?;
    let pts = regular_points_for(config, 3, &[p.clone(), k.clone()], &[h_m.potential().clone(), h_minus.potential().clone()])?;
    let res = remainder_residual(&r, q, &pts)?;
    if !(res <= config.tol_accept) {
        return Err(Error::FactorizationResidual { residual: res });
    }

    let probes = probe_battery(n);
    let tol = config.tol_accept;
    let mut rep = VerificationReport::new("reduce");
    let kp = MatDiffOperator::compose(&k, &p)?;
    rep.below(
        "reduce.composition",
        "Q = K P",
        probe_residual(q, &kp, &probes, &pts)?.max(coefficient_residual(q, &kp, &pts)?),
        tol,
        &pts,
    );
    rep.below(
        "reduce.lower",
        "P H_+ = H_M P",
        intertwining_residual(&p, cs.hamiltonian(), &h_m, &probes, &pts)?.max(),
        tol,
        &pts,
    );
    rep.below(
        "reduce.upper",
        "K H_M = H_- K",
        intertwining_residual(&k, &h_m, &h_minus, &probes, &pts)?.max(),
        tol,
        &pts,
    );
    let finite = [&p, &k].iter().all(|o| {
        pts.iter()
            .all(|&x| o.values_at(pt(x)).is_ok_and(|c| c.iter().all(|m| m.iter().all(|z| z.is_finite()))))
    });
    rep.exact("reduce.smooth", "coefficients of K and P finite on the sample", finite, "pole-free at sample points");
    Ok(Reduction { k, p, h_m, report: rep })
}

/// Scalar data for the stacked diagonal construction: channel `l` has
/// potential `v_l` and a chain of `N (n - l + 1)` members at `lambda0`.
#[derive(Debug, Clone)]
pub struct StackedData {
    pub potentials: Vec<MatFn>,
    pub chains: Vec<Vec<MatFn>>,
    pub lambda0: Complex64,
}

#[derive(Debug, Clone)]
pub struct IrreducibleExample {
    pub h_plus: Hamiltonian,
    pub chain_set: ChainSet,
    pub q: MatDiffOperator,
    pub report: VerificationReport,
}

/// `(-1)^{n(n-1)N(N-1)/4}`.
pub fn stacked_sign(n: usize, big_n: usize) -> f64 {
    if (n * (n - 1) * big_n * (big_n - 1) / 4).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Builds the stacked example and certifies the factorization obstruction:
/// every proper prefix Wronskian vanishes identically at the sample points.
pub fn irreducible_example(n: usize, big_n: usize, data: &StackedData, config: &VerifyConfig) -> Result<IrreducibleExample> {
    if data.potentials.len() != n || big_n == 0 {
        return Err(Error::BadChainLengths(format!(
            "{} channels for n = {n}",
            data.potentials.len()
        )));
    }
    let cs = assemble_diag(&data.potentials, &data.chains, big_n, data.lambda0)?;
    let pts = sample_points(config, config.points, 4, &[], |_| Ok(()))?;
    for (l, chain) in data.chains.iter().enumerate() {
        for &x in &pts {
            if !(relative_wronskian(&chain[..big_n], big_n, x)? > config.tol_zero) {
                return Err(Error::BadScalarData { channel: l + 1, x0: x });
            }
        }
    }
    let q = build_intertwiner(&cs, None)?;
    let mut rep = VerificationReport::new("irreducible");

    let members = cs.members();
    let sign = stacked_sign(n, big_n);
    let mut worst: f64 = 0.0;
    for &x in &pts {
        let stacked = wronskian_of(&members, big_n, pt(x), 0)?.value();
        let mut product = Complex64::new(sign, 0.0);
        for chain in &data.chains {
            product *= wronskian_of(&chain[..big_n], big_n, pt(x), 0)?.value();
        }
        let scale = (stacked.norm() + product.norm()).max(f64::MIN_POSITIVE);
        worst = worst.max((stacked - product).norm() / scale);
    }
    rep.below(
        "irreducible.sign-identity",
        "W = (-1)^{n(n-1)N(N-1)/4} prod W_{l,N}",
        worst,
        config.tol_zero,
        &pts,
    );

    for m in 1..big_n {
        let mut largest: f64 = 0.0;
        for &x in &pts {
            let w = wronskian_matrix(&members[..n * m], m, pt(x), 0)?;
            let det = mat_jet_det(&w)?.value().norm();
            let scale = hadamard_scale(w.value());
            largest = largest.max(if scale == 0.0 { 0.0 } else { det / scale });
        }
        rep.below(
            &format!("irreducible.prefix-{m}"),
            "prefix Wronskian vanishes identically, so no regular factor of this order exists",
            largest,
            config.tol_zero,
            &pts,
        );
    }
    let cert = crate::builder::certify_intertwining(&q, cs.hamiltonian(), config)?;
    rep.extend(cert.report);
    Ok(IrreducibleExample {
        h_plus: cs.hamiltonian().clone(),
        chain_set: cs,
        q,
        report: rep,
    })
}
