//! Taylor-jet arithmetic for scalars and matrices, closed-form expressions,
//! and matrix-function evaluators.

pub mod expr;
pub mod function;
pub mod jet;
pub mod matrix;

pub use expr::ScalarExpr;
pub use function::{MatFn, MatrixFunction};
pub use jet::Jet;
pub use matrix::{mat_jet_det, mat_jet_solve, CMatrix, MatrixJet};
