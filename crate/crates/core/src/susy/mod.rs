//! Weak minimization, conjugate intertwiners, complements and the
//! polynomial superalgebra.

pub mod algebra;
pub mod conjugate;
pub mod jordan;
pub mod minimize;

pub use algebra::{block_operator, det_identity_check, susy_algebra};
pub use conjugate::{
    complement, complement_composition_check, conjugate_general, first_order_conjugate,
    leading_deviation, max_imaginary, reverse_lambda_order, uniqueness_check, verify_conjugate,
    Conjugate, SCALAR_CLOSURE_TOL,
};
pub use jordan::{
    after_removal, compose_with_polynomial, jordan_of_conjugate, kappa_polynomial, order_formula,
    removable, split_jordan_specs, OrderFormula,
};
pub use minimize::{minimize_weak, removal_operator, verify_minimization, MinimizationResult};
