//! Seeded sample points and verification reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::diffop::operator::MatDiffOperator;
use crate::error::{Error, Result};
use crate::jets::function::MatFn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    /// Carried by the scenario rather than the serialized config.
    #[serde(skip)]
    pub seed: u64,
    pub points: usize,
    pub window: (f64, f64),
    pub tol_accept: f64,
    pub tol_zero: f64,
    pub zero_points: usize,
    pub margin: f64,
    pub max_resamples: usize,
    pub scan_cells: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            points: 12,
            window: (-5.0, 5.0),
            tol_accept: 1e-7,
            tol_zero: 1e-9,
            zero_points: 7,
            margin: 1e-4,
            max_resamples: 16,
            scan_cells: 512,
        }
    }
}

/// True for failures tied to one evaluation point (poles, singular systems),
/// which sampling may step around.
pub fn is_pointwise(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularPoint { .. }
            | Error::SingularWronskian { .. }
            | Error::SingularLeadingCoefficient { .. }
    )
}

/// Deterministic stream of points in the window, one stream per `salt`.
pub struct PointStream {
    rng: ChaCha8Rng,
    window: (f64, f64),
}

impl PointStream {
    pub fn new(config: &VerifyConfig, salt: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(salt);
        PointStream {
            rng,
            window: config.window,
        }
    }

    pub fn next_point(&mut self) -> f64 {
        self.rng.gen_range(self.window.0..self.window.1)
    }
}

/// Draws `count` points, skipping declared singular points and any point
/// where `probe` fails pointwise. More than `max_resamples` rejections give
/// `PoleCluster`.
pub fn sample_points<F>(
    config: &VerifyConfig,
    count: usize,
    salt: u64,
    avoid: &[f64],
    probe: F,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<()>,
{
    let mut stream = PointStream::new(config, salt);
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0;
    while out.len() < count {
        let x = stream.next_point();
        let near_pole = avoid.iter().any(|p| (x - p).abs() < 1e-6);
        let ok = if near_pole {
            false
        } else {
            match probe(x) {
                Ok(()) => true,
                Err(e) if is_pointwise(&e) => false,
                Err(e) => return Err(e),
            }
        };
        if ok {
            out.push(x);
        } else {
            rejected += 1;
            if rejected > config.max_resamples {
                return Err(Error::PoleCluster { retries: rejected - 1 });
            }
        }
    }
    Ok(out)
}

/// `config.points` points where every operator coefficient and potential
/// can be evaluated.
pub fn regular_points_for(
    config: &VerifyConfig,
    salt: u64,
    ops: &[MatDiffOperator],
    potentials: &[MatFn],
) -> Result<Vec<f64>> {
    let avoid: Vec<f64> = ops
        .iter()
        .flat_map(|o| o.singular_set().to_vec())
        .chain(potentials.iter().flat_map(|p| p.singular_set()))
        .collect();
    sample_points(config, config.points, salt, &avoid, |x| {
        let z = Complex64::new(x, 0.0);
        for o in ops {
            o.coeffs_at(z, 2)?;
        }
        for p in potentials {
            p.eval(z, 2)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One verified identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub identity: String,
    pub anchor: String,
    pub residual: f64,
    pub tolerance: f64,
    /// `"<"`: pass when residual < tolerance; `">"`: pass when residual > tolerance;
    /// `"=="`: exact integer or structural check.
    pub relation: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VerificationReport {
    pub stage: String,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn new(stage: impl Into<String>) -> Self {
        VerificationReport {
            stage: stage.into(),
            checks: Vec::new(),
        }
    }

    pub fn below(&mut self, identity: &str, anchor: &str, residual: f64, tolerance: f64, points: &[f64]) -> bool {
        let pass = residual < tolerance;
        self.checks.push(Check {
            identity: identity.into(),
            anchor: anchor.into(),
            residual,
            tolerance,
            relation: "<".into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            points: points.to_vec(),
            detail: None,
        });
        pass
    }

    pub fn above(&mut self, identity: &str, anchor: &str, residual: f64, threshold: f64, points: &[f64]) -> bool {
        let pass = residual > threshold;
        self.checks.push(Check {
            identity: identity.into(),
            anchor: anchor.into(),
            residual,
            tolerance: threshold,
            relation: ">".into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            points: points.to_vec(),
            detail: None,
        });
        pass
    }

    pub fn exact(&mut self, identity: &str, anchor: &str, pass: bool, detail: impl Into<String>) -> bool {
        self.checks.push(Check {
            identity: identity.into(),
            anchor: anchor.into(),
            residual: if pass { 0.0 } else { 1.0 },
            tolerance: 0.0,
            relation: "==".into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            points: Vec::new(),
            detail: Some(detail.into()),
        });
        pass
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .collect()
    }

    pub fn max_residual(&self, identity_prefix: &str) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.identity.starts_with(identity_prefix))
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }
}
