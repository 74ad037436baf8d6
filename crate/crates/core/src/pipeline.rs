//! Staged execution of a scenario and the report it produces.

use num_complex::Complex64;
use serde::Serialize;

use crate::builder::{build_intertwiner, certify_intertwining, kernel_residual, negative_control};
use crate::chains::chain::{ChainSet, JordanSpec};
use crate::diffop::hamiltonian::{poly_of_h, Hamiltonian, SpectralPolynomial};
use crate::diffop::operator::MatDiffOperator;
use crate::diffop::residual::{coefficient_residual, probe_battery, probe_residual};
use crate::error::{Error, Result};
use crate::factor::{
    default_ladder, factorize, irreducible_example, mirror_factorization, reduce, verify_factorization,
    verify_mirror, FactorizationChain,
};
use crate::scenario::{Scenario, Stage, SCHEMA_VERSION};
use crate::susy::{
    complement, compose_with_polynomial, conjugate_general, det_identity_check, first_order_conjugate,
    jordan_of_conjugate, max_imaginary, minimize_weak, removable, removal_operator, reverse_lambda_order,
    susy_algebra, uniqueness_check, verify_conjugate, verify_minimization, Conjugate,
};
use crate::verify::{VerificationReport, VerifyConfig};

/// Size of each coefficient perturbation in the negative control.
pub const NEGATIVE_CONTROL_SIZE: f64 = 1e-3;
/// Coefficientwise agreement required of operators that must coincide.
pub const COINCIDENCE_TOL: f64 = 1e-8;
/// Candidates tried by the uniqueness sweep.
pub const UNIQUENESS_CANDIDATES: usize = 24;

/// Integer and structural outcomes of a run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Facts {
    pub n: usize,
    pub order: usize,
    pub jordan: Option<JordanSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_orders: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removed: Option<SpectralPolynomial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimized_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugate_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugate_polynomial: Option<SpectralPolynomial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugate_jordan: Option<JordanSpec>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
    /// Numerical failure class, as opposed to malformed input.
    pub numerical: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub schema: u32,
    pub scenario: String,
    pub seed: u64,
    pub config: VerifyConfig,
    pub stages: Vec<Stage>,
    pub passed: bool,
    pub facts: Facts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
    pub reports: Vec<VerificationReport>,
}

impl RunOutcome {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One line per check: stage, identity, anchor, residual, verdict.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for rep in &self.reports {
            for c in &rep.checks {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{:.3e}\t{}\n",
                    rep.stage,
                    c.identity,
                    c.anchor,
                    c.residual,
                    if c.verdict == crate::verify::Verdict::Pass { "pass" } else { "fail" }
                ));
            }
        }
        if let Some(f) = &self.failure {
            out.push_str(&format!("{}\terror\t{}\t-\tfail\n", f.stage, f.error));
        }
        out.push_str(if self.passed { "overall\tpass\n" } else { "overall\tfail\n" });
        out
    }
}

/// Real coordinate of the evaluation point behind a pointwise failure.
pub fn error_point(e: &Error) -> Option<f64> {
    match e {
        Error::SingularPoint { x0 }
        | Error::SingularWronskian { x0, .. }
        | Error::SingularLeadingCoefficient { x0 } => Some(x0.re),
        Error::IntegrationFailure { x, .. } => Some(x.re),
        Error::DegenerateBasis { x0 } | Error::BadScalarData { x0, .. } => Some(*x0),
        _ => None,
    }
}

struct Run<'a> {
    sc: &'a Scenario,
    config: VerifyConfig,
    stages: Vec<Stage>,
    cs: ChainSet,
    q: MatDiffOperator,
    h_minus: Hamiltonian,
    js: JordanSpec,
    points: Vec<f64>,
    fc: Option<FactorizationChain>,
    conj: Option<Conjugate>,
    facts: Facts,
    reports: Vec<VerificationReport>,
}

impl Run<'_> {
    fn n(&self) -> usize {
        self.cs.n()
    }

    fn h_plus(&self) -> &Hamiltonian {
        self.cs.hamiltonian()
    }

    fn factorization(&mut self) -> Result<&FactorizationChain> {
        if self.fc.is_none() {
            let ladder = match &self.sc.ladder {
                Some(l) => l.clone(),
                None => default_ladder(&self.cs, &self.config)?,
            };
            let fc = factorize(&self.q, &self.cs, &ladder, &self.config)?;
            self.facts.ladder = Some(fc.ladder.clone());
            self.facts.factor_orders = Some(fc.orders());
            self.fc = Some(fc);
        }
        Ok(self.fc.as_ref().unwrap())
    }

    fn conjugate(&mut self) -> Result<&Conjugate> {
        if self.conj.is_none() {
            let conj = conjugate_general(&self.q, &self.js, self.h_plus(), &self.config)?;
            self.facts.conjugate_order = Some(conj.order);
            self.facts.conjugate_polynomial = Some(conj.poly.clone());
            self.facts.conjugate_jordan = Some(jordan_of_conjugate(&self.js, self.n())?);
            self.conj = Some(conj);
        }
        Ok(self.conj.as_ref().unwrap())
    }

    fn stage(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Build => self.build(),
            Stage::NegativeControl => {
                let rep = negative_control(
                    &self.q,
                    self.h_plus(),
                    &self.h_minus,
                    &self.points,
                    &self.config,
                    NEGATIVE_CONTROL_SIZE,
                )?;
                self.reports.push(rep);
                Ok(())
            }
            Stage::Factorize => self.factorize(),
            Stage::FirstOrder => self.first_order(),
            Stage::Minimize => self.minimize(),
            Stage::Conjugate => self.conjugate_stage(),
            Stage::Algebra => self.algebra(),
            Stage::Irreducible => self.irreducible(),
        }
    }

    fn build(&mut self) -> Result<()> {
        let cert = certify_intertwining(&self.q, self.h_plus(), &self.config)?;
        let mut rep = cert.report;
        rep.below(
            "build.kernel",
            "Q annihilates every kernel member",
            kernel_residual(&self.q, &self.cs.members(), &self.points)?,
            self.config.tol_accept,
            &self.points,
        );
        self.reports.push(rep);
        Ok(())
    }

    fn factorize(&mut self) -> Result<()> {
        self.factorization()?;
        let fc = self.fc.as_ref().unwrap();
        let rep = verify_factorization(fc, &self.q, &self.cs, &self.config)?;
        let mirror = verify_mirror(&mirror_factorization(fc)?, &self.q, self.h_plus(), &self.config)?;
        self.reports.push(rep);
        self.reports.push(mirror);
        Ok(())
    }

    fn first_order(&mut self) -> Result<()> {
        let tol = self.config.tol_accept;
        self.factorization()?;
        let (q_plus, poly, _, mut rep) = first_order_conjugate(self.fc.as_ref().unwrap(), &self.cs, &self.config)?;
        let pts = self.fc.as_ref().unwrap().points.clone();
        let probes = probe_battery(self.n());
        let lower = MatDiffOperator::compose(&q_plus, &self.q)?;
        let target = poly_of_h(self.h_plus(), &poly);
        rep.below(
            "first-order.product-plus",
            "Q+ Q- = P_N(H_+)",
            probe_residual(&lower, &target, &probes, &pts)?.max(coefficient_residual(&lower, &target, &pts)?),
            tol,
            &pts,
        );
        let upper = MatDiffOperator::compose(&self.q, &q_plus)?;
        let target = poly_of_h(&self.h_minus, &poly);
        rep.below(
            "first-order.product-minus",
            "Q- Q+ = P_N(H_-)",
            probe_residual(&upper, &target, &probes, &pts)?.max(coefficient_residual(&upper, &target, &pts)?),
            tol,
            &pts,
        );

        let reversed = reverse_lambda_order(&self.cs)?;
        let q2 = build_intertwiner(&reversed, self.sc.leading_matrix())?;
        let fc2 = factorize(&q2, &reversed, &default_ladder(&reversed, &self.config)?, &self.config)?;
        let (q_plus2, _, _, _) = first_order_conjugate(&fc2, &reversed, &self.config)?;
        rep.below(
            "first-order.permutation",
            "Q+ independent of the eigenvalue order",
            coefficient_residual(&q_plus2, &q_plus, &pts)?,
            COINCIDENCE_TOL,
            &pts,
        );

        let conj = self.conjugate()?.q_plus.clone();
        rep.below(
            "first-order.matches-conjugate",
            "product form equals the general conjugate",
            coefficient_residual(&q_plus, &conj, &pts)?,
            COINCIDENCE_TOL,
            &pts,
        );
        self.reports.push(rep);
        Ok(())
    }

    fn minimize(&mut self) -> Result<()> {
        let n = self.n();
        let planted = self.sc.planted_polynomial();
        let (target, js) = if planted.degree() == 0 {
            (self.q.clone(), self.js.clone())
        } else {
            (
                MatDiffOperator::compose(&self.q, &removal_operator(self.h_plus(), &planted))?,
                compose_with_polynomial(&self.js, &planted, n)?,
            )
        };
        let res = minimize_weak(&target, &js, self.h_plus(), &self.config)?;
        let mut rep = verify_minimization(&target, &res, self.h_plus(), &self.config)?;
        if planted.degree() > 0 {
            rep.below(
                "minimize.recovered",
                "minimization of Q prod (lambda I - H_+)^delta returns Q",
                coefficient_residual(&res.p, &self.q, &res.points)?,
                self.config.tol_accept,
                &res.points,
            );
        }
        self.facts.removed = Some(res.removed.clone());
        self.facts.minimized_order = Some(res.p.order());
        self.reports.push(rep);
        Ok(())
    }

    fn conjugate_stage(&mut self) -> Result<()> {
        let n = self.n();
        self.conjugate()?;
        let conj = self.conj.as_ref().unwrap();
        let h_plus = self.cs.hamiltonian();
        let mut rep = verify_conjugate(&self.q, conj, h_plus, &self.config)?;
        let pts = conj.points.clone();

        let js_minus = jordan_of_conjugate(&self.js, n)?;
        let contained = js_minus.lambdas().iter().all(|l| self.js.kappa(*l) > 0);
        rep.exact(
            "conjugate.spectrum",
            "eigenvalues of T- lie among those of T+",
            contained,
            format!("{} of {} values retained", js_minus.entries.len(), self.js.entries.len()),
        );
        let twice = jordan_of_conjugate(&js_minus, n)?;
        let kappa_kept = twice.lambdas().iter().all(|l| twice.kappa(*l) == self.js.kappa(*l));
        rep.exact(
            "conjugate.double-kappa",
            "largest block per eigenvalue survives the double map",
            kappa_kept,
            format!("{:?}", twice.entries.iter().map(|e| e.blocks.clone()).collect::<Vec<_>>()),
        );
        if removable(&self.js, n)?.degree() == 0 {
            let back = complement(&conj.q_plus, &js_minus, &conj.h_minus, &self.config)?;
            rep.below(
                "conjugate.double-complement",
                "complement of the complement is Q",
                coefficient_residual(&back, &self.q, &pts)?,
                COINCIDENCE_TOL,
                &pts,
            );
        }
        if self.real_input(&pts)? {
            rep.below(
                "conjugate.reality",
                "real input gives a real conjugate",
                max_imaginary(&conj.q_plus, &pts)?,
                1e-9,
                &pts,
            );
        }
        self.reports.push(rep);
        let uniq = uniqueness_check(&self.q, conj, &self.js, h_plus, &self.config, UNIQUENESS_CANDIDATES)?;
        self.reports.push(uniq);
        Ok(())
    }

    /// Real potential, real `Q` and real eigenvalues at the sample points.
    fn real_input(&self, pts: &[f64]) -> Result<bool> {
        if self.js.lambdas().iter().any(|l| l.im != 0.0) || max_imaginary(&self.q, pts)? > 1e-12 {
            return Ok(false);
        }
        for &x in pts {
            let v = self.h_plus().potential().eval(Complex64::new(x, 0.0), 0)?;
            if v.value().iter().any(|z| z.im.abs() > 1e-12) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn algebra(&mut self) -> Result<()> {
        let n = self.n();
        self.conjugate()?;
        let conj = self.conj.as_ref().unwrap();
        let rep = susy_algebra(
            self.cs.hamiltonian(),
            &conj.h_minus,
            &self.q,
            &conj.q_plus,
            &conj.poly,
            &conj.points,
            &self.config,
        )?;
        let js_minus = jordan_of_conjugate(&self.js, n)?;
        let det = det_identity_check(&self.js, &js_minus, &conj.poly, n, &self.config);
        self.reports.push(rep);
        self.reports.push(det);
        Ok(())
    }

    fn irreducible(&mut self) -> Result<()> {
        let data = self
            .sc
            .stacked_data()
            .ok_or_else(|| Error::Scenario("the irreducible stage needs a stacked construction".into()))?;
        let big_n = self.sc.order();
        let ex = irreducible_example(self.n(), big_n, &data, &self.config)?;
        let mut rep = ex.report;
        for m in 1..big_n {
            let (pass, detail) = match reduce(&ex.q, &ex.chain_set, m, &self.config) {
                Err(Error::NotRegularlyReducible { m: got }) if got == m => (true, "prefix Wronskian vanishes".to_string()),
                Err(e) => (false, e.to_string()),
                Ok(_) => (false, "reduction succeeded".to_string()),
            };
            rep.exact(
                &format!("irreducible.reduce-{m}"),
                "no regular reduction of this order",
                pass,
                detail,
            );
        }
        self.reports.push(rep);
        Ok(())
    }
}

/// Runs `stages` (in canonical order) on the scenario. The operator is
/// always built; its certificate is reported only when `Build` is requested.
pub fn run(sc: &Scenario, stages: &[Stage], config: &VerifyConfig) -> RunOutcome {
    let mut stages = stages.to_vec();
    stages.sort();
    stages.dedup();
    let mut facts = Facts {
        n: sc.n(),
        order: sc.order(),
        ..Facts::default()
    };
    let outcome = |facts: Facts, reports: Vec<VerificationReport>, failure: Option<StageFailure>| {
        let passed = failure.is_none() && reports.iter().all(VerificationReport::passed);
        RunOutcome {
            schema: SCHEMA_VERSION,
            scenario: sc.name.clone(),
            seed: config.seed,
            config: config.clone(),
            stages: stages.clone(),
            passed,
            facts,
            failure,
            reports,
        }
    };
    let fail = |stage: Stage, e: Error| StageFailure {
        stage,
        point: error_point(&e),
        numerical: e.is_numerical(),
        error: e.to_string(),
    };

    let setup = (|| -> Result<(ChainSet, MatDiffOperator, Hamiltonian, JordanSpec, Vec<f64>)> {
        let cs = sc.chain_set()?;
        let js = cs.jordan_spec()?;
        let q = build_intertwiner(&cs, sc.leading_matrix())?;
        let cert = certify_intertwining(&q, cs.hamiltonian(), config)?;
        Ok((cs, q, cert.h_minus, js, cert.points))
    })();
    let (cs, q, h_minus, js, points) = match setup {
        Ok(v) => v,
        Err(e) => return outcome(facts, Vec::new(), Some(fail(Stage::Build, e))),
    };
    facts.jordan = Some(js.clone());
    let mut run = Run {
        sc,
        config: config.clone(),
        stages: stages.clone(),
        cs,
        q,
        h_minus,
        js,
        points,
        fc: None,
        conj: None,
        facts,
        reports: Vec::new(),
    };
    let mut failure = None;
    for st in run.stages.clone() {
        if let Err(e) = run.stage(st) {
            failure = Some(fail(st, e));
            break;
        }
    }
    outcome(run.facts, run.reports, failure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{diagonal_pair, irreducible_scenario};

    #[test]
    fn diagonal_pair_passes_with_order_three_conjugate() {
        let sc = diagonal_pair(0.0, 1.0);
        let out = run(&sc, &sc.stages(), &sc.verify_config());
        assert!(out.failure.is_none(), "{:?}", out.failure);
        for r in &out.reports {
            assert!(r.passed(), "{}: {:?}", r.stage, r.failures());
        }
        assert_eq!(out.facts.conjugate_order, Some(3));
        assert!(out.summary().ends_with("overall\tpass\n"));
    }

    #[test]
    fn report_is_deterministic() {
        let sc = diagonal_pair(0.0, 1.0);
        let stages = [Stage::Build, Stage::Conjugate];
        let a = run(&sc, &stages, &sc.verify_config()).to_json();
        let b = run(&sc, &stages, &sc.verify_config()).to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn stacked_example_is_certified() {
        let sc = irreducible_scenario(2, 2, 0).unwrap();
        let out = run(&sc, &[Stage::Build, Stage::Irreducible], &sc.verify_config());
        assert!(out.failure.is_none(), "{:?}", out.failure);
        assert!(out.passed, "{}", out.summary());
    }
}
