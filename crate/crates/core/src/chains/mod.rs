//! Transformation data: chains of associated functions, Jordan data,
//! Wronskians and chain generators.

pub mod chain;
pub mod generators;
pub mod ode;
pub mod wronskian;

pub use chain::{chain_residual, t_matrix, Chain, ChainSet, JordanEntry, JordanSpec};
pub use generators::{assemble_diag, exponential_chain, free_polynomial_chain, mixed_exponential_chain};
pub use ode::{chain_from_scalar, ode_chain, Seed};
pub use wronskian::{nonvanishing_ladder, prefix_wronskian, wronskian_matrix, wronskian_of};
