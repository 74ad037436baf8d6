use num_complex::Complex64;
use thiserror::Error;

/// Failure classes shared by every stage of the pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular point at x0 = {x0}")]
    SingularPoint { x0: Complex64 },

    #[error("singular Wronskian system at x0 = {x0} (condition estimate {condition:.3e})")]
    SingularWronskian { x0: Complex64, condition: f64 },

    #[error("leading coefficient of the divisor is not invertible at x0 = {x0}")]
    SingularLeadingCoefficient { x0: Complex64 },

    #[error("ODE integration failed near x = {x}: {reason}")]
    IntegrationFailure { x: Complex64, reason: String },

    #[error("bad chain lengths: {0}")]
    BadChainLengths(String),

    #[error("degenerate basis: full Wronskian vanishes at x0 = {x0}")]
    DegenerateBasis { x0: f64 },

    #[error("chain relation violated for chain {chain}, member {member}: residual {residual:.3e}")]
    InvalidChain {
        chain: usize,
        member: usize,
        residual: f64,
    },

    #[error("sample points collide with factor poles after {retries} resamples")]
    PoleCluster { retries: usize },

    #[error("inexact right division during factorization: remainder {residual:.3e}")]
    FactorizationResidual { residual: f64 },

    #[error("prefix of {m} kernel blocks has an identically vanishing Wronskian; no regular reduction of that order")]
    NotRegularlyReducible { m: usize },

    #[error("scalar chain data for channel {channel} has a vanishing Wronskian at x = {x0}")]
    BadScalarData { channel: usize, x0: f64 },

    #[error("Jordan data contradicts the operator: division remainder {residual:.3e}")]
    InconsistentJordanSpec { residual: f64 },

    #[error("invalid Jordan data: {0}")]
    InvalidJordanSpec(String),

    #[error("closure potential of step {step} is not scalar: off-identity residual {residual:.3e}")]
    NonScalarClosure { step: usize, residual: f64 },

    #[error("scenario error: {0}")]
    Scenario(String),
}

impl Error {
    /// True for the numerical failure classes (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Scenario(_) | Error::BadChainLengths(_) | Error::InvalidJordanSpec(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
