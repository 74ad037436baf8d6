use num_complex::Complex64;

use super::chain::ChainSet;
use crate::error::{Error, Result};
use crate::jets::function::{closure_fn, MatFn};
use crate::jets::jet::Jet;
use crate::jets::matrix::{mat_jet_det, CMatrix, MatrixJet};

/// Rows are members, columns run over derivative order `d < depth` and,
/// within each order, over components: entry `(l, d*n + c) = F_l^(d)_c`.
pub fn wronskian_matrix(
    members: &[MatFn],
    depth: usize,
    x0: Complex64,
    order: usize,
) -> Result<MatrixJet> {
    let n = members.first().map_or(0, |m| m.dims().0);
    let rows = members.len();
    let cols = depth * n;
    let mut coeffs = vec![CMatrix::zeros(rows, cols); order + 1];
    for (l, f) in members.iter().enumerate() {
        let jet = f.eval(x0, order + depth.saturating_sub(1))?;
        for d in 0..depth {
            let dj = jet.nth_derivative(d, order);
            for c in 0..n {
                for (k, m) in coeffs.iter_mut().enumerate() {
                    m[(l, d * n + c)] = dj.coeff(k)[(c, 0)];
                }
            }
        }
    }
    Ok(MatrixJet::from_coeffs(x0, coeffs))
}

/// Determinant of the square Wronskian matrix of `members` (`len = n * depth`).
pub fn wronskian_of(members: &[MatFn], depth: usize, x0: Complex64, order: usize) -> Result<Jet> {
    let w = wronskian_matrix(members, depth, x0, order)?;
    if w.rows() != w.cols() {
        return Err(Error::Contract(format!(
            "Wronskian of {} members to depth {depth} is not square",
            w.rows()
        )));
    }
    mat_jet_det(&w)
}

/// Evaluator of `W_j`, the Wronskian of the first `n j` members.
pub fn prefix_wronskian(cs: &ChainSet, j: usize) -> Result<MatFn> {
    let n = cs.n();
    if j == 0 || n * j > cs.total() {
        return Err(Error::Contract(format!("prefix Wronskian index {j} out of range")));
    }
    let members = cs.prefix(n * j);
    Ok(closure_fn((1, 1), Vec::new(), move |x0, k| {
        let d = wronskian_of(&members, j, x0, k)?;
        Ok(MatrixJet::from_coeffs(
            x0,
            d.coeffs().iter().map(|c| CMatrix::from_element(1, 1, *c)).collect(),
        ))
    }))
}

/// Product of the Euclidean row norms: an upper bound for `|det|`.
pub fn hadamard_scale(m: &CMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .product()
}

/// `|W| / hadamard_scale` of a prefix Wronskian at a point.
pub fn relative_wronskian(members: &[MatFn], depth: usize, x: f64) -> Result<f64> {
    let z = Complex64::new(x, 0.0);
    let w = wronskian_matrix(members, depth, z, 0)?;
    let det = mat_jet_det(&w)?.value().norm();
    let scale = hadamard_scale(w.value());
    Ok(if scale == 0.0 { 0.0 } else { det / scale })
}

/// Indices `j` with `W_j` not identically zero on `points` (relative
/// threshold `tol_zero`). `W_N` must be nonzero at every point.
pub fn nonvanishing_ladder(cs: &ChainSet, points: &[f64], tol_zero: f64) -> Result<Vec<usize>> {
    let n = cs.n();
    if !cs.total().is_multiple_of(n) {
        return Err(Error::BadChainLengths(format!(
            "{} members is not a multiple of n = {n}",
            cs.total()
        )));
    }
    let big_n = cs.total() / n;
    let members = cs.members();
    let mut ladder = Vec::new();
    for j in 1..big_n {
        let mut best: f64 = 0.0;
        for &x in points {
            best = best.max(relative_wronskian(&members[..n * j], j, x)?);
        }
        if best > tol_zero {
            ladder.push(j);
        }
    }
    for &x in points {
        if !(relative_wronskian(&members, big_n, x)? > tol_zero) {
            return Err(Error::DegenerateBasis { x0: x });
        }
    }
    ladder.push(big_n);
    Ok(ladder)
}

/// Sign-change scan of a complex Wronskian on a uniform grid: reports grid
/// cells where both the real and imaginary parts change sign (a possible zero).
pub fn sign_change_scan(w: &MatFn, window: (f64, f64), cells: usize) -> Result<Vec<(f64, f64)>> {
    let mut flagged = Vec::new();
    let step = (window.1 - window.0) / cells as f64;
    let value = |x: f64| -> Result<Complex64> { Ok(w.eval(Complex64::new(x, 0.0), 0)?.value()[(0, 0)]) };
    let mut prev = value(window.0)?;
    for i in 1..=cells {
        let x = window.0 + step * i as f64;
        let cur = value(x)?;
        let re_flip = prev.re * cur.re <= 0.0;
        let im_flip = prev.im * cur.im <= 0.0;
        if re_flip && im_flip {
            flagged.push((x - step, x));
        }
        prev = cur;
    }
    Ok(flagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::chain::Chain;
    use crate::diffop::hamiltonian::Hamiltonian;
    use crate::jets::expr::ScalarExpr;
    use crate::jets::function::{const_fn, expr_fn, real, ExprMatrix};

    #[test]
    fn single_scalar_wronskian_is_the_function() {
        let f = expr_fn(ExprMatrix::column(vec![ScalarExpr::x().sin()]));
        let w = wronskian_of(std::slice::from_ref(&f), 1, real(0.4), 3).unwrap();
        let direct = f.eval(real(0.4), 3).unwrap();
        for k in 0..=3 {
            assert_eq!(w.coeff(k), direct.coeff(k)[(0, 0)]);
        }
    }

    #[test]
    fn exponential_pair_wronskian() {
        // W(e^{ax}, e^{bx}) = (b - a) e^{(a+b)x}
        let (a, b) = (0.5, -1.2);
        let fa = expr_fn(ExprMatrix::column(vec![ScalarExpr::exp_poly(real(a), &[real(1.0)])]));
        let fb = expr_fn(ExprMatrix::column(vec![ScalarExpr::exp_poly(real(b), &[real(1.0)])]));
        let x = 0.8;
        let w = wronskian_of(&[fa, fb], 2, real(x), 0).unwrap();
        let want = (b - a) * ((a + b) * x).exp();
        assert!((w.value() - real(want)).norm() < 1e-14);
    }

    #[test]
    fn ladder_of_one_member() {
        let h = Hamiltonian::new(const_fn(CMatrix::zeros(1, 1))).unwrap();
        let chain = Chain::new(real(0.0), vec![expr_fn(ExprMatrix::column(vec![ScalarExpr::real(1.0)]))]);
        let cs = ChainSet::new(h, vec![chain]).unwrap();
        assert_eq!(nonvanishing_ladder(&cs, &[0.0, 1.0], 1e-9).unwrap(), vec![1]);
        let w = prefix_wronskian(&cs, 1).unwrap();
        assert_eq!(w.eval(real(2.0), 0).unwrap().value()[(0, 0)], real(1.0));
    }

    #[test]
    fn vanishing_full_wronskian_is_degenerate() {
        let h = Hamiltonian::new(const_fn(CMatrix::zeros(1, 1))).unwrap();
        let chain = Chain::new(real(0.0), vec![expr_fn(ExprMatrix::column(vec![ScalarExpr::x()]))]);
        let cs = ChainSet::new(h, vec![chain]).unwrap();
        assert!(matches!(
            nonvanishing_ladder(&cs, &[0.0, 1.0], 1e-9),
            Err(Error::DegenerateBasis { .. })
        ));
    }
}
