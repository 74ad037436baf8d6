//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use susy_matrix::builder::{build_intertwiner, certify_intertwining, negative_control, partner_hamiltonian};
use susy_matrix::chains::chain::{ChainSet, JordanSpec};
use susy_matrix::diffop::hamiltonian::SpectralPolynomial;
use susy_matrix::diffop::operator::MatDiffOperator;
use susy_matrix::diffop::residual::{coefficient_residual, intertwining_residual, probe_battery};
use susy_matrix::error::Error;
use susy_matrix::jets::function::real;
use susy_matrix::pipeline::{run, RunOutcome};
use susy_matrix::scenario::{
    diagonal_pair, equal_blocks_scenario, irreducible_scenario, random_scenario, Scenario, Stage,
};
use susy_matrix::susy::{compose_with_polynomial, conjugate_general, jordan_of_conjugate, minimize_weak};

use common::{all_specs, conjugate_type, lam};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T>(r: susy_matrix::Result<T>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

/// The twenty random scenarios: `(n, N)` cycles through `{1,2,3}^2`.
fn random_cases() -> Vec<(usize, usize, u64)> {
    (0..20u64).map(|s| (1 + s as usize % 3, 1 + (s as usize / 3) % 3, s)).collect()
}

fn parts(sc: &Scenario) -> Result<(ChainSet, MatDiffOperator), String> {
    let cs = ok(sc.chain_set(), &sc.name)?;
    let q = ok(build_intertwiner(&cs, sc.leading_matrix()), &sc.name)?;
    Ok((cs, q))
}

fn staged(sc: &Scenario, stages: &[Stage]) -> Result<RunOutcome, String> {
    let out = run(sc, stages, &sc.verify_config());
    if let Some(f) = &out.failure {
        return Err(format!("{}: stage {} failed: {}", sc.name, f.stage, f.error));
    }
    for rep in &out.reports {
        if let Some(c) = rep.failures().first() {
            return Err(format!("{}: {} = {:.3e} (tolerance {:.1e})", sc.name, c.identity, c.residual, c.tolerance));
        }
    }
    Ok(out)
}

fn construction_soundness() -> Outcome {
    let mut worst: f64 = 0.0;
    for (n, big_n, seed) in random_cases() {
        let sc = ok(random_scenario(n, big_n, seed), "generator")?;
        let (cs, q) = parts(&sc)?;
        let config = sc.verify_config();
        ensure(config.points == 12, || "expected 12 sample points".into())?;
        let cert = ok(certify_intertwining(&q, cs.hamiltonian(), &config), &sc.name)?;
        let probes = probe_battery(n);
        ensure(probes.len() == 6, || "expected a 6-probe battery".into())?;
        let r = ok(intertwining_residual(&q, cs.hamiltonian(), &cert.h_minus, &probes, &cert.points), &sc.name)?;
        ensure(r.probe < 1e-7, || format!("{}: probe residual {:.3e}", sc.name, r.probe))?;
        worst = worst.max(r.probe);
    }
    Ok(format!("20 scenarios, worst probe residual {worst:.2e}"))
}

fn recomposition() -> Outcome {
    let mut checks = 0;
    for (n, big_n, seed) in random_cases() {
        let sc = ok(random_scenario(n, big_n, seed), "generator")?;
        let out = staged(&sc, &[Stage::Build, Stage::Factorize])?;
        let names: Vec<&str> = out.reports.iter().flat_map(|r| r.checks.iter().map(|c| c.identity.as_str())).collect();
        ensure(names.contains(&"factorization.recomposition"), || "no recomposition check".into())?;
        ensure(names.iter().any(|s| s.starts_with("factorization.transport")), || "no transport check".into())?;
        checks += names.len();
    }
    Ok(format!("20 scenarios, {checks} checks"))
}

fn equal_blocks() -> Outcome {
    let mut count = 0;
    for (n, big_n, seed) in [(1, 1, 0), (1, 3, 1), (2, 1, 2), (2, 2, 3), (2, 3, 4), (3, 2, 5), (3, 3, 6)] {
        let sc = ok(equal_blocks_scenario(n, big_n, seed), "generator")?;
        let out = staged(&sc, &[Stage::Build, Stage::Factorize, Stage::FirstOrder])?;
        let fo = out.reports.iter().find(|r| r.stage.starts_with("first-order")).ok_or("no first-order report")?;
        for prefix in ["first-order.scalar-closure", "first-order.product-plus", "first-order.product-minus", "first-order.permutation"] {
            ensure(fo.checks.iter().any(|c| c.identity.starts_with(prefix)), || format!("missing {prefix}"))?;
        }
        count += 1;
    }
    Ok(format!("{count} scenarios"))
}

fn planted_recovery() -> Outcome {
    for seed in 0..10u64 {
        let (n, big_n) = (1 + seed as usize % 3, 1 + (seed as usize / 3) % 3);
        let mut sc = ok(random_scenario(n, big_n, seed), "generator")?;
        let (cs, _) = parts(&sc)?;
        let js = ok(cs.jordan_spec(), "jordan")?;
        let lambda = if seed % 2 == 0 { js.lambdas()[0] } else { real(-6.0 - seed as f64 * 0.1) };
        sc.planted = vec![(lambda, 1 + seed as usize % 2)];
        let out = staged(&sc, &[Stage::Build, Stage::Minimize])?;
        ensure(out.facts.minimized_order == Some(big_n), || format!("{}: order {:?}", sc.name, out.facts.minimized_order))?;
        ensure(out.facts.removed.as_ref().map(|p| p.roots.clone()) == Some(sc.planted.clone()), || {
            format!("{}: removed {:?}", sc.name, out.facts.removed)
        })?;
    }
    Ok("10 plants recovered".into())
}

fn conjugates() -> Outcome {
    for (n, big_n, seed) in random_cases() {
        let sc = ok(random_scenario(n, big_n, seed), "generator")?;
        let out = staged(&sc, &[Stage::Build, Stage::Conjugate])?;
        let js = out.facts.jordan.as_ref().ok_or("no Jordan data")?;
        let sum_kappa: usize = js.entries.iter().map(|e| e.blocks[0]).sum();
        let got = out.facts.conjugate_order.ok_or("no conjugate order")?;
        ensure(got + big_n == 2 * sum_kappa, || format!("{}: N' = {got}", sc.name))?;
        ensure((got + big_n) % 2 == 0, || "parity".into())?;
    }
    let mut checked = 0;
    for n in 1..=2 {
        for lists in all_specs(n, 4) {
            let js = ok(
                JordanSpec::new(lists.iter().enumerate().map(|(i, b)| (lam(i), b.clone())).collect()),
                "spec",
            )?;
            let got = ok(jordan_of_conjugate(&js, n), "jordan_of_conjugate")?;
            for (i, blocks) in lists.iter().enumerate() {
                let want = conjugate_type(blocks, n, 17 + i as u64);
                ensure(got.blocks(lam(i)) == want.as_slice(), || format!("n = {n}, {blocks:?}: {want:?}"))?;
            }
            checked += 1;
        }
    }
    Ok(format!("20 conjugates, {checked} Jordan specs against the oracle"))
}

fn gallery() -> Outcome {
    let sc = diagonal_pair(0.0, 1.0);
    let out = staged(&sc, &sc.stages())?;
    ensure(out.facts.conjugate_order == Some(3), || format!("N' = {:?}", out.facts.conjugate_order))?;
    let (cs, q) = parts(&sc)?;
    let config = sc.verify_config();
    let js = ok(cs.jordan_spec(), "jordan")?;
    let conj = ok(conjugate_general(&q, &js, cs.hamiltonian(), &config), "conjugate")?;
    for &x in &conj.points {
        for m in ok(conj.q_plus.values_at(real(x)), "values")? {
            ensure(m[(0, 1)].norm() == 0.0 && m[(1, 0)].norm() == 0.0, || format!("off-diagonal entry at {x}"))?;
        }
    }

    let sc = diagonal_pair(0.5, 0.5);
    let (cs, q) = parts(&sc)?;
    let js = ok(cs.jordan_spec(), "jordan")?;
    let conj = ok(conjugate_general(&q, &js, cs.hamiltonian(), &config), "conjugate")?;
    let h_minus = ok(partner_hamiltonian(&q, cs.hamiltonian()), "partner")?;
    let cubic = ok(MatDiffOperator::compose(&cs.hamiltonian().shifted(real(0.5)), &conj.q_plus), "compose")?;
    let poly = ok(SpectralPolynomial::new(vec![(real(0.5), 1)]), "poly")?;
    let js_cubic = ok(compose_with_polynomial(&ok(jordan_of_conjugate(&js, 2), "jordan")?, &poly, 2), "jordan")?;
    let res = ok(minimize_weak(&cubic, &js_cubic, &h_minus, &config), "minimize")?;
    ensure(res.p.order() == 1, || format!("minimized order {}", res.p.order()))?;
    let r = ok(coefficient_residual(&res.p, &conj.q_plus.scale(real(-1.0)), &res.points), "residual")?;
    ensure(r < 1e-7, || format!("minimized cubic differs by {r:.3e}"))?;
    Ok(format!("N' = 3, coincident values minimize to first order ({r:.1e})"))
}

fn irreducibility() -> Outcome {
    for (n, big_n) in [(2, 2), (2, 3), (3, 2)] {
        let sc = ok(irreducible_scenario(n, big_n, 0), "generator")?;
        let out = staged(&sc, &[Stage::Build, Stage::Irreducible])?;
        let rep = out.reports.iter().find(|r| r.stage == "irreducible").ok_or("no irreducible report")?;
        let has = |p: &str| rep.checks.iter().filter(|c| c.identity.starts_with(p)).count();
        ensure(has("irreducible.sign-identity") == 1, || "no sign identity".into())?;
        ensure(has("irreducible.prefix-") == big_n - 1, || "prefix checks missing".into())?;
        ensure(has("irreducible.reduce-") == big_n - 1, || "reduce checks missing".into())?;
    }
    Ok("(2,2), (2,3), (3,2)".into())
}

fn algebra() -> Outcome {
    let mut scenarios = vec![diagonal_pair(0.0, 1.0)];
    for (n, big_n, seed) in random_cases() {
        scenarios.push(ok(random_scenario(n, big_n, seed), "generator")?);
    }
    for (n, big_n) in [(2, 2), (3, 1)] {
        scenarios.push(ok(equal_blocks_scenario(n, big_n, 7), "generator")?);
    }
    for sc in &scenarios {
        let out = staged(sc, &[Stage::Build, Stage::Algebra])?;
        ensure(out.reports.iter().any(|r| r.stage == "det-identity"), || "no det identity".into())?;
    }
    Ok(format!("{} scenarios", scenarios.len()))
}

fn negative_controls() -> Outcome {
    for (n, big_n, seed) in random_cases() {
        let sc = ok(random_scenario(n, big_n, seed), "generator")?;
        let (cs, q) = parts(&sc)?;
        let config = sc.verify_config();
        let cert = ok(certify_intertwining(&q, cs.hamiltonian(), &config), &sc.name)?;
        ensure(cert.report.passed(), || format!("{}: unperturbed fails", sc.name))?;
        let rep = ok(negative_control(&q, cs.hamiltonian(), &cert.h_minus, &cert.points, &config, 1e-3), &sc.name)?;
        if let Some(c) = rep.failures().first() {
            return Err(format!("{}: {} only reached {:.3e}", sc.name, c.identity, c.residual));
        }
    }
    let sc = diagonal_pair(0.0, 1.0);
    let (cs, q) = parts(&sc)?;
    let wrong = ok(JordanSpec::new(vec![(real(0.0), vec![2])]), "spec")?;
    match conjugate_general(&q, &wrong, cs.hamiltonian(), &sc.verify_config()) {
        Err(Error::InconsistentJordanSpec { .. }) => Ok("all perturbations detected; inconsistent data rejected".into()),
        Err(e) => Err(format!("unexpected error {e}")),
        Ok(_) => Err("inconsistent Jordan data accepted".into()),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("construction soundness", construction_soundness),
        ("factorization recomposition", recomposition),
        ("equal-blocks product form", equal_blocks),
        ("planted minimization", planted_recovery),
        ("conjugate order and Jordan data", conjugates),
        ("diagonal-pair gallery", gallery),
        ("stacked irreducibility", irreducibility),
        ("polynomial SUSY algebra", algebra),
        ("negative controls", negative_controls),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{secs:.1}s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{secs:.1}s]", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
