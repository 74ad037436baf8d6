use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::MatDiffOperator;
use crate::error::{Error, Result};
use crate::jets::function::{
    add_fn, const_fn, derivative_fn, left_const_fn, right_const_fn, scale_fn, MatFn,
};
use crate::jets::matrix::CMatrix;

/// `H = -I d^2 + V(x)`.
#[derive(Clone)]
pub struct Hamiltonian {
    n: usize,
    potential: MatFn,
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Hamiltonian(n = {})", self.n)
    }
}

impl Hamiltonian {
    pub fn new(potential: MatFn) -> Result<Self> {
        let (r, c) = potential.dims();
        if r != c {
            return Err(Error::Contract("potential must be square".into()));
        }
        Ok(Hamiltonian { n: r, potential })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn potential(&self) -> &MatFn {
        &self.potential
    }

    pub fn operator(&self) -> MatDiffOperator {
        let n = self.n;
        MatDiffOperator::from_coefficients(vec![
            self.potential.clone(),
            const_fn(CMatrix::zeros(n, n)),
            const_fn(-CMatrix::identity(n, n)),
        ])
        .expect("Hamiltonian coefficients are n x n")
    }

    /// `H - lambda I` as an operator.
    pub fn shifted(&self, lambda: Complex64) -> MatDiffOperator {
        let n = self.n;
        let v = add_fn(
            &self.potential,
            &const_fn(CMatrix::identity(n, n) * (-lambda)),
        );
        MatDiffOperator::from_coefficients(vec![
            v,
            const_fn(CMatrix::zeros(n, n)),
            const_fn(-CMatrix::identity(n, n)),
        ])
        .expect("Hamiltonian coefficients are n x n")
    }

    /// `M H M^{-1}` for a constant invertible `M`.
    pub fn conjugate_by(&self, m: &CMatrix) -> Result<Hamiltonian> {
        let inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Contract("conjugation by a singular matrix".into()))?;
        Hamiltonian::new(right_const_fn(&left_const_fn(m, &self.potential), &inv))
    }
}

/// `P(lambda) = prod_l (lambda - lambda_l)^{m_l}` with distinct roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SpectralPolynomial {
    pub roots: Vec<(Complex64, usize)>,
}

impl SpectralPolynomial {
    /// Builds from a root list with repetitions, merging equal roots in
    /// order of first appearance.
    pub fn from_roots(list: &[Complex64]) -> Self {
        let mut roots: Vec<(Complex64, usize)> = Vec::new();
        for &l in list {
            match roots.iter_mut().find(|(r, _)| *r == l) {
                Some(e) => e.1 += 1,
                None => roots.push((l, 1)),
            }
        }
        SpectralPolynomial { roots }
    }

    pub fn new(roots: Vec<(Complex64, usize)>) -> Result<Self> {
        for (i, (a, m)) in roots.iter().enumerate() {
            if *m == 0 {
                return Err(Error::Contract("root multiplicity must be positive".into()));
            }
            if roots[..i].iter().any(|(b, _)| b == a) {
                return Err(Error::Contract("repeated root in spectral polynomial".into()));
            }
        }
        Ok(SpectralPolynomial { roots })
    }

    pub fn degree(&self) -> usize {
        self.roots.iter().map(|(_, m)| m).sum()
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.roots
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, (r, m)| {
                acc * (lambda - r).powu(*m as u32)
            })
    }

    pub fn multiplicity(&self, lambda: Complex64) -> usize {
        self.roots
            .iter()
            .find(|(r, _)| *r == lambda)
            .map_or(0, |(_, m)| *m)
    }

    /// Roots repeated by multiplicity.
    pub fn expanded(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .flat_map(|(r, m)| std::iter::repeat_n(*r, *m))
            .collect()
    }

    /// Product with another polynomial.
    pub fn times(&self, other: &SpectralPolynomial) -> SpectralPolynomial {
        let mut all = self.expanded();
        all.extend(other.expanded());
        SpectralPolynomial::from_roots(&all)
    }

    /// `P^e`.
    pub fn power(&self, e: usize) -> SpectralPolynomial {
        SpectralPolynomial {
            roots: self.roots.iter().map(|(r, m)| (*r, m * e)).collect(),
        }
    }
}

/// `prod_l (H - lambda_l I)^{m_l}`; the identity for the constant polynomial.
pub fn poly_of_h(h: &Hamiltonian, p: &SpectralPolynomial) -> MatDiffOperator {
    let factors: Vec<MatDiffOperator> = p.expanded().into_iter().map(|l| h.shifted(l)).collect();
    if factors.is_empty() {
        return MatDiffOperator::identity(h.n());
    }
    MatDiffOperator::compose_all(&factors).expect("factors share the matrix size")
}

/// `V_- = X_N V_+ X_N^{-1} + 2 X'_{N-1} X_N^{-1}` for an operator with constant
/// invertible leading coefficient.
pub fn partner_potential(q: &MatDiffOperator, v_plus: &MatFn) -> Result<MatFn> {
    let xn = q
        .leading_constant()
        .ok_or_else(|| Error::Contract("partner potential needs a constant leading coefficient".into()))?
        .clone();
    let xn_inv = xn
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Contract("leading coefficient is singular".into()))?;
    let conj = right_const_fn(&left_const_fn(&xn, v_plus), &xn_inv);
    if q.order() == 0 {
        return Ok(conj);
    }
    let sub = q.coefficient(q.order() - 1);
    let corr = scale_fn(
        &right_const_fn(&derivative_fn(&sub), &xn_inv),
        Complex64::new(2.0, 0.0),
    );
    Ok(add_fn(&conj, &corr))
}

/// Potential `V + 2 X'_{N-1}` for a monic operator, without constant-leading checks
/// (used when the leading coefficient is the identity by construction).
pub fn monic_partner_potential(q: &MatDiffOperator, v_plus: &MatFn) -> MatFn {
    if q.order() == 0 {
        return v_plus.clone();
    }
    let sub = q.coefficient(q.order() - 1);
    add_fn(v_plus, &scale_fn(&derivative_fn(&sub), Complex64::new(2.0, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::expr::ScalarExpr;
    use crate::jets::function::{expr_fn, real, ExprMatrix};

    #[test]
    fn free_hamiltonian_fixes_sine() {
        let h = Hamiltonian::new(const_fn(CMatrix::zeros(2, 2))).unwrap();
        let f = expr_fn(ExprMatrix::column(vec![ScalarExpr::x().sin(), ScalarExpr::real(0.0)]));
        for x in [0.3, 1.1, -2.0] {
            let r = h.operator().apply(&f, real(x), 2).unwrap();
            let want = f.eval(real(x), 2).unwrap();
            assert!(r.try_sub(&want).unwrap().magnitude() < 1e-14);
        }
    }

    #[test]
    fn linear_polynomial_of_free_hamiltonian() {
        let h = Hamiltonian::new(const_fn(CMatrix::zeros(2, 2))).unwrap();
        let p = SpectralPolynomial::new(vec![(real(0.0), 1)]).unwrap();
        let op = poly_of_h(&h, &p);
        assert_eq!(op.order(), 2);
        let v = op.values_at(real(0.4)).unwrap();
        assert_eq!(v[2], -CMatrix::identity(2, 2));
        assert_eq!(v[1], CMatrix::zeros(2, 2));
        assert_eq!(v[0], CMatrix::zeros(2, 2));
    }

    #[test]
    fn degree_two_sign_rule() {
        let v = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::x(), ScalarExpr::real(0.0)]));
        let h = Hamiltonian::new(v).unwrap();
        let p = SpectralPolynomial::new(vec![(real(1.0), 1), (real(-2.0), 1)]).unwrap();
        let op = poly_of_h(&h, &p);
        assert_eq!(op.order(), 4);
        assert_eq!(op.leading_constant(), Some(&CMatrix::identity(2, 2)));
    }

    #[test]
    fn product_of_shifts_matches_explicit_composition() {
        let v = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::x(), ScalarExpr::real(0.0)]));
        let h = Hamiltonian::new(v).unwrap();
        let (l1, l2) = (Complex64::new(0.5, 0.2), real(-1.5));
        let p = poly_of_h(&h, &SpectralPolynomial::new(vec![(l1, 1), (l2, 1)]).unwrap());
        let q = MatDiffOperator::compose(&h.shifted(l1), &h.shifted(l2)).unwrap();
        for i in 0..10 {
            let x = real(-4.5 + i as f64);
            let a = p.values_at(x).unwrap();
            let b = q.values_at(x).unwrap();
            for (ca, cb) in a.iter().zip(&b) {
                assert!((ca - cb).norm() <= 1e-10 * (1.0 + cb.norm()));
            }
        }
    }

    #[test]
    fn partner_of_constant_sub_leading_is_unchanged() {
        let v = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::x().pow(2)]));
        let k = CMatrix::from_element(1, 1, real(0.7));
        let q = MatDiffOperator::from_coefficients(vec![
            const_fn(-k),
            const_fn(CMatrix::identity(1, 1)),
        ])
        .unwrap();
        let vm = partner_potential(&q, &v).unwrap();
        let a = vm.eval(real(1.3), 3).unwrap();
        let b = v.eval(real(1.3), 3).unwrap();
        assert!(a.try_sub(&b).unwrap().magnitude() < 1e-15);
    }

    #[test]
    fn harmonic_darboux_partner() {
        // Q = d + x kills exp(-x^2/2); V_- = x^2 + 2
        let v = expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::x().pow(2)]));
        let q = MatDiffOperator::from_coefficients(vec![
            expr_fn(ExprMatrix::diagonal(vec![ScalarExpr::x()])),
            const_fn(CMatrix::identity(1, 1)),
        ])
        .unwrap();
        let vm = partner_potential(&q, &v).unwrap();
        for x in [-2.0, 0.0, 1.7] {
            let got = vm.eval(real(x), 0).unwrap().value()[(0, 0)];
            assert!((got - real(x * x + 2.0)).norm() < 1e-14);
        }
    }
}
