//! Matrices of jets, stored as a truncated power series of constant matrices.
//!
//! `coeffs[k]` is the matrix of k-th Taylor coefficients of every entry, so
//! entry `(i, j)` as a [`Jet`] is `[coeffs[0][(i,j)], coeffs[1][(i,j)], ...]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::jet::{Jet, EPS_PIVOT};
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Condition-estimate ceiling for linear solves over jets.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixJet {
    base: Complex64,
    rows: usize,
    cols: usize,
    coeffs: Vec<CMatrix>,
}

impl MatrixJet {
    pub fn from_coeffs(base: Complex64, coeffs: Vec<CMatrix>) -> Self {
        assert!(!coeffs.is_empty());
        let (rows, cols) = coeffs[0].shape();
        assert!(coeffs.iter().all(|m| m.shape() == (rows, cols)));
        MatrixJet {
            base,
            rows,
            cols,
            coeffs,
        }
    }

    pub fn zeros(base: Complex64, order: usize, rows: usize, cols: usize) -> Self {
        Self::from_coeffs(base, vec![CMatrix::zeros(rows, cols); order + 1])
    }

    pub fn constant(base: Complex64, order: usize, m: &CMatrix) -> Self {
        let mut coeffs = vec![CMatrix::zeros(m.nrows(), m.ncols()); order + 1];
        coeffs[0] = m.clone();
        Self::from_coeffs(base, coeffs)
    }

    pub fn identity(base: Complex64, order: usize, n: usize) -> Self {
        Self::constant(base, order, &CMatrix::identity(n, n))
    }

    /// Builds from a row-major grid of jets sharing base point and order.
    pub fn from_entries(rows: usize, cols: usize, entries: &[Jet]) -> Result<Self> {
        if entries.len() != rows * cols || entries.is_empty() {
            return Err(Error::Contract("entry count does not match dims".into()));
        }
        let base = entries[0].base();
        let order = entries[0].order();
        if entries
            .iter()
            .any(|e| e.base() != base || e.order() != order)
        {
            return Err(Error::Contract(
                "matrix jet entries must share base point and order".into(),
            ));
        }
        let coeffs = (0..=order)
            .map(|k| CMatrix::from_fn(rows, cols, |i, j| entries[i * cols + j].coeff(k)))
            .collect();
        Ok(Self::from_coeffs(base, coeffs))
    }

    pub fn base(&self) -> Complex64 {
        self.base
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &CMatrix {
        &self.coeffs[k]
    }

    pub fn value(&self) -> &CMatrix {
        &self.coeffs[0]
    }

    pub fn entry(&self, i: usize, j: usize) -> Jet {
        Jet::new(self.base, self.coeffs.iter().map(|m| m[(i, j)]).collect())
    }

    /// Row-major entries.
    pub fn entries(&self) -> Vec<Jet> {
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .map(|(i, j)| self.entry(i, j))
            .collect()
    }

    pub fn truncate(&self, order: usize) -> MatrixJet {
        assert!(order <= self.order(), "cannot extend a matrix jet by truncation");
        MatrixJet {
            base: self.base,
            rows: self.rows,
            cols: self.cols,
            coeffs: self.coeffs[..=order].to_vec(),
        }
    }

    /// Entrywise derivative; order drops by one.
    pub fn derivative(&self) -> MatrixJet {
        if self.order() == 0 {
            return MatrixJet::zeros(self.base, 0, self.rows, self.cols);
        }
        let coeffs = (0..self.order())
            .map(|k| &self.coeffs[k + 1] * Complex64::new((k + 1) as f64, 0.0))
            .collect();
        Self::from_coeffs(self.base, coeffs)
    }

    /// `r`-th derivative truncated to `order` (requires `self.order() >= order + r`).
    pub fn nth_derivative(&self, r: usize, order: usize) -> MatrixJet {
        assert!(self.order() >= order + r, "insufficient jet order for derivative");
        let coeffs = (0..=order)
            .map(|k| {
                let falling: f64 = (1..=r).map(|i| (k + i) as f64).product();
                &self.coeffs[k + r] * Complex64::new(falling, 0.0)
            })
            .collect();
        Self::from_coeffs(self.base, coeffs)
    }

    fn check_same(&self, other: &MatrixJet) -> Result<()> {
        if self.base != other.base || self.order() != other.order() {
            return Err(Error::Contract(format!(
                "matrix jet mismatch: ({}, K={}) vs ({}, K={})",
                self.base,
                self.order(),
                other.base,
                other.order()
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &MatrixJet) -> Result<MatrixJet> {
        self.check_same(other)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Contract("matrix jet add: dims differ".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self::from_coeffs(self.base, coeffs))
    }

    pub fn try_sub(&self, other: &MatrixJet) -> Result<MatrixJet> {
        self.try_add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> MatrixJet {
        Self::from_coeffs(self.base, self.coeffs.iter().map(|m| m * s).collect())
    }

    /// Truncated Cauchy product of matrix series.
    pub fn try_mul(&self, other: &MatrixJet) -> Result<MatrixJet> {
        self.check_same(other)?;
        if self.cols != other.rows {
            return Err(Error::Contract("matrix jet mul: inner dims differ".into()));
        }
        let k_max = self.order();
        let coeffs = (0..=k_max)
            .map(|k| {
                let mut acc = CMatrix::zeros(self.rows, other.cols);
                for i in 0..=k {
                    acc += &self.coeffs[i] * &other.coeffs[k - i];
                }
                acc
            })
            .collect();
        Ok(Self::from_coeffs(self.base, coeffs))
    }

    pub fn left_mul_const(&self, m: &CMatrix) -> MatrixJet {
        Self::from_coeffs(self.base, self.coeffs.iter().map(|c| m * c).collect())
    }

    pub fn right_mul_const(&self, m: &CMatrix) -> MatrixJet {
        Self::from_coeffs(self.base, self.coeffs.iter().map(|c| c * m).collect())
    }

    pub fn transpose(&self) -> MatrixJet {
        Self::from_coeffs(self.base, self.coeffs.iter().map(|c| c.transpose()).collect())
    }

    /// Largest entry modulus over all coefficients.
    pub fn magnitude(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest modulus among the constant terms.
    pub fn value_magnitude(&self) -> f64 {
        self.coeffs[0].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One-norm condition number of `a` after row and column equilibration.
pub fn equilibrated_condition(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        let r = m.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if r > 0.0 {
            m.row_mut(i).scale_mut(1.0 / r);
        }
    }
    for j in 0..n {
        let c = m.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if c > 0.0 {
            m.column_mut(j).scale_mut(1.0 / c);
        }
    }
    match m.clone().lu().try_inverse() {
        Some(inv) => one_norm(&m) * one_norm(&inv),
        None => f64::INFINITY,
    }
}

/// Solves `A X = B` over jets: LU with partial pivoting on the constant
/// term `A_0`, then order-by-order back-substitution
/// `A_0 X_k = B_k - sum_{i=1..k} A_i X_{k-i}`.
pub fn mat_jet_solve(a: &MatrixJet, b: &MatrixJet) -> Result<MatrixJet> {
    if a.rows() != a.cols() {
        return Err(Error::Contract("mat_jet_solve: A must be square".into()));
    }
    if a.rows() != b.rows() {
        return Err(Error::Contract("mat_jet_solve: row count mismatch".into()));
    }
    a.check_same(b)?;
    let x0 = a.base();
    let condition = equilibrated_condition(a.value());
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularWronskian { x0, condition });
    }
    let lu = a.value().clone().lu();
    let mut xs: Vec<CMatrix> = Vec::with_capacity(a.order() + 1);
    for k in 0..=a.order() {
        let mut rhs = b.coeff(k).clone();
        for i in 1..=k {
            rhs -= a.coeff(i) * &xs[k - i];
        }
        let xk = lu
            .solve(&rhs)
            .ok_or(Error::SingularWronskian { x0, condition })?;
        xs.push(xk);
    }
    Ok(MatrixJet::from_coeffs(x0, xs))
}

/// Inverse of a square matrix jet.
pub fn mat_jet_inverse(a: &MatrixJet) -> Result<MatrixJet> {
    mat_jet_solve(a, &MatrixJet::identity(a.base(), a.order(), a.rows()))
}

/// Determinant by Gaussian elimination over jets with partial pivoting on
/// constant terms. When a column has no usable pivot the remaining minor is
/// expanded by cofactors (dimension <= 4) or by a division-free
/// characteristic-polynomial recurrence.
pub fn mat_jet_det(a: &MatrixJet) -> Result<Jet> {
    if a.rows() != a.cols() {
        return Err(Error::Contract("mat_jet_det: A must be square".into()));
    }
    let n = a.rows();
    let base = a.base();
    let order = a.order();
    let mut m: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| a.entry(i, j)).collect())
        .collect();
    let mut det = Jet::one(base, order);
    for col in 0..n {
        let scale = m[col..]
            .iter()
            .flat_map(|row| row[col..].iter())
            .map(|e| e.value().norm())
            .fold(0.0, f64::max);
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, m[r][col].value().norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs == 0.0 || piv_abs <= EPS_PIVOT * scale {
            let minor: Vec<Vec<Jet>> = m[col..].iter().map(|row| row[col..].to_vec()).collect();
            let rest = if minor.len() <= 4 {
                cofactor_det(&minor)
            } else {
                division_free_det(&minor)
            };
            return Ok(&det * &rest);
        }
        if piv != col {
            m.swap(piv, col);
            det = -&det;
        }
        let p = m[col][col].clone();
        det = &det * &p;
        let p_inv = p.inv()?;
        for r in col + 1..n {
            let factor = &m[r][col] * &p_inv;
            for c in col..n {
                let t = &factor * &m[col][c];
                m[r][c] = &m[r][c] - &t;
            }
        }
    }
    Ok(det)
}

/// Laplace expansion along the first row.
pub(crate) fn cofactor_det(m: &[Vec<Jet>]) -> Jet {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let base = m[0][0].base();
    let order = m[0][0].order();
    let mut acc = Jet::zero(base, order);
    for j in 0..n {
        let minor: Vec<Vec<Jet>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, e)| e.clone())
                    .collect()
            })
            .collect();
        let term = &m[0][j] * &cofactor_det(&minor);
        acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    acc
}

/// Samuelson-Berkowitz determinant: ring operations only, so it is valid
/// over jets with non-invertible constant terms.
pub(crate) fn division_free_det(m: &[Vec<Jet>]) -> Jet {
    let n = m.len();
    let base = m[0][0].base();
    let order = m[0][0].order();
    let zero = || Jet::zero(base, order);
    let one = || Jet::one(base, order);
    // coefficients of the characteristic polynomial of the leading r x r block,
    // highest degree first
    let mut poly: Vec<Jet> = vec![one(), -&m[0][0]];
    for r in 1..n {
        let a_rr = &m[r][r];
        let row: Vec<&Jet> = (0..r).map(|j| &m[r][j]).collect();
        let col: Vec<&Jet> = (0..r).map(|i| &m[i][r]).collect();
        // powers: c_k = R * A^k * C for k = 0..r-1
        let mut v: Vec<Jet> = col.iter().map(|e| (*e).clone()).collect();
        let mut rak: Vec<Jet> = Vec::with_capacity(r);
        for _ in 0..r {
            let s = row
                .iter()
                .zip(&v)
                .fold(zero(), |acc, (a, b)| &acc + &(*a * b));
            rak.push(s);
            v = (0..r)
                .map(|i| (0..r).fold(zero(), |acc, j| &acc + &(&m[i][j] * &v[j])))
                .collect();
        }
        // Toeplitz column: [1, -a_rr, -R C, -R A C, ..., -R A^{r-1} C]
        let mut t = vec![one(), -a_rr];
        t.extend(rak.iter().map(|s| -s));
        let mut next = Vec::with_capacity(r + 2);
        for i in 0..r + 2 {
            let mut s = zero();
            for j in 0..=i.min(r) {
                if i - j < t.len() {
                    s = &s + &(&t[i - j] * &poly[j]);
                }
            }
            next.push(s);
        }
        poly = next;
    }
    let c_n = poly[n].clone();
    if n.is_multiple_of(2) {
        c_n
    } else {
        -&c_n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_jet_matrix(rng: &mut ChaCha8Rng, n: usize, order: usize, diag_boost: f64) -> MatrixJet {
        let coeffs = (0..=order)
            .map(|k| {
                CMatrix::from_fn(n, n, |i, j| {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if k == 0 && i == j {
                        v + diag_boost
                    } else {
                        v
                    }
                })
            })
            .collect();
        MatrixJet::from_coeffs(z(0.2), coeffs)
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_jet_matrix(&mut rng, 3, 4, 0.0);
        let i = MatrixJet::identity(z(0.2), 4, 3);
        assert_eq!(mat_jet_solve(&i, &b).unwrap(), b);
    }

    #[test]
    fn diagonal_inverse() {
        let e = [
            Jet::from_taylor(z(0.0), 3, &[z(1.0), z(1.0)]),
            Jet::zero(z(0.0), 3),
            Jet::zero(z(0.0), 3),
            Jet::constant(z(0.0), 3, z(2.0)),
        ];
        let a = MatrixJet::from_entries(2, 2, &e).unwrap();
        let inv = mat_jet_inverse(&a).unwrap();
        let d0: Vec<f64> = inv.entry(0, 0).coeffs().iter().map(|c| c.re).collect();
        let d1: Vec<f64> = inv.entry(1, 1).coeffs().iter().map(|c| c.re).collect();
        assert_eq!(d0, vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(d1, vec![0.5, 0.0, 0.0, 0.0]);
        assert_eq!(inv.entry(0, 1).magnitude(), 0.0);
    }

    #[test]
    fn random_solve_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_jet_matrix(&mut rng, 4, 6, 2.0);
            let b = random_jet_matrix(&mut rng, 4, 6, 0.0);
            let x = mat_jet_solve(&a, &b).unwrap();
            let r = a.try_mul(&x).unwrap().try_sub(&b).unwrap();
            assert!(r.magnitude() < 1e-10, "residual {}", r.magnitude());
        }
    }

    #[test]
    fn singular_constant_term_reports_wronskian_failure() {
        let a = MatrixJet::zeros(z(1.5), 2, 2, 2);
        let b = MatrixJet::identity(z(1.5), 2, 2);
        match mat_jet_solve(&a, &b) {
            Err(Error::SingularWronskian { x0, condition }) => {
                assert_eq!(x0, z(1.5));
                assert!(condition.is_infinite() || condition > MAX_CONDITION);
            }
            other => panic!("expected SingularWronskian, got {other:?}"),
        }
    }

    #[test]
    fn det_identity_and_one_minus_x_squared() {
        let i = MatrixJet::identity(z(0.0), 3, 4);
        let d = mat_jet_det(&i).unwrap();
        assert_eq!(d, Jet::one(z(0.0), 3));
        let x = Jet::variable(z(0.0), 2);
        let one = Jet::one(z(0.0), 2);
        let a = MatrixJet::from_entries(2, 2, &[one.clone(), x.clone(), x, one]).unwrap();
        let d = mat_jet_det(&a).unwrap();
        assert_eq!(d.coeffs(), &[z(1.0), z(0.0), z(-1.0)]);
    }

    #[test]
    fn det_falls_back_when_no_pivot() {
        // [[x, 1], [1, x]] at 0 has a pivot; [[x, x^2], [x^2, x]] has none: det = x^2 - x^4
        let x = Jet::variable(z(0.0), 4);
        let x2 = &x * &x;
        let a = MatrixJet::from_entries(2, 2, &[x.clone(), x2.clone(), x2, x]).unwrap();
        let d = mat_jet_det(&a).unwrap();
        let want = [0.0, 0.0, 1.0, 0.0, -1.0];
        for (g, w) in d.coeffs().iter().zip(want) {
            assert!((g - z(w)).norm() < 1e-15);
        }
    }

    #[test]
    fn division_free_matches_cofactor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=5 {
            let a = random_jet_matrix(&mut rng, n, 3, 0.0);
            let grid: Vec<Vec<Jet>> = (0..n)
                .map(|i| (0..n).map(|j| a.entry(i, j)).collect())
                .collect();
            let d1 = division_free_det(&grid);
            let d2 = cofactor_det(&grid);
            for k in 0..=3 {
                assert!((d1.coeff(k) - d2.coeff(k)).norm() < 1e-11, "n={n}");
            }
        }
    }

    #[test]
    fn six_by_six_polynomial_matrix_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = z(0.4);
        let order = 3;
        let entries: Vec<Jet> = (0..36)
            .map(|_| {
                let poly: Vec<Complex64> = (0..3)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                Jet::from_taylor(base, order, &poly)
            })
            .collect();
        let a = MatrixJet::from_entries(6, 6, &entries).unwrap();
        let grid: Vec<Vec<Jet>> = (0..6).map(|i| entries[i * 6..i * 6 + 6].to_vec()).collect();
        let got = mat_jet_det(&a).unwrap();
        let want = cofactor_det(&grid);
        for k in 0..=order {
            assert!((got.coeff(k) - want.coeff(k)).norm() < 1e-9);
        }
    }

    #[test]
    fn nth_derivative_matches_repeated_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_jet_matrix(&mut rng, 2, 6, 0.0);
        let twice = a.derivative().derivative().truncate(3);
        let direct = a.nth_derivative(2, 3);
        assert!(twice.try_sub(&direct).unwrap().magnitude() < 1e-14);
    }
}
