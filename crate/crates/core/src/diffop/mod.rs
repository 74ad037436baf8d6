//! Matrix differential operators, Hamiltonians and right division.

pub mod division;
pub mod hamiltonian;
pub mod operator;
pub mod residual;

pub use division::right_divide;
pub use hamiltonian::{partner_potential, poly_of_h, Hamiltonian, SpectralPolynomial};
pub use operator::MatDiffOperator;
pub use residual::{intertwining_residual, probe_battery, IntertwiningResidual};
