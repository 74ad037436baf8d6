use num_complex::Complex64;
use susy_matrix::builder::{build_from_members, build_intertwiner, partner_hamiltonian};
use susy_matrix::diffop::hamiltonian::poly_of_h;
use susy_matrix::diffop::operator::MatDiffOperator;
use susy_matrix::diffop::residual::{coefficient_residual, probe_battery, probe_residual};
use susy_matrix::factor::{
    default_ladder, factorize, first_order_chain, mirror_factorization, reduce, verify_factorization,
    verify_mirror,
};
use susy_matrix::jets::matrix::CMatrix;
use susy_matrix::scenario::{equal_blocks_scenario, random_scenario};
use susy_matrix::susy::first_order_conjugate;

#[test]
fn factorizations_recompose_and_transport_eigenvalues() {
    for (n, big_n, seed) in [(1, 3, 0), (2, 2, 1), (2, 3, 2), (3, 2, 3)] {
        let sc = random_scenario(n, big_n, seed).unwrap();
        let cs = sc.chain_set().unwrap();
        let config = sc.verify_config();
        let q = build_intertwiner(&cs, None).unwrap();
        let fc = factorize(&q, &cs, &default_ladder(&cs, &config).unwrap(), &config).unwrap();
        assert_eq!(fc.orders(), vec![1; big_n]);
        let rep = verify_factorization(&fc, &q, &cs, &config).unwrap();
        assert!(rep.passed(), "({n}, {big_n}): {:?}", rep.failures());
        let back = fc.recomposed().unwrap();
        assert!(probe_residual(&q, &back, &probe_battery(n), &fc.points).unwrap() < 1e-8);
    }
}

#[test]
fn coarse_ladder_splits_into_two_factors() {
    let sc = random_scenario(2, 3, 5).unwrap();
    let cs = sc.chain_set().unwrap();
    let config = sc.verify_config();
    let q = build_intertwiner(&cs, None).unwrap();
    let fc = factorize(&q, &cs, &[2, 3], &config).unwrap();
    assert_eq!(fc.orders(), vec![2, 1]);
    assert!(verify_factorization(&fc, &q, &cs, &config).unwrap().passed());
}

#[test]
fn equal_blocks_close_on_scalars_and_multiply_to_the_polynomial() {
    for (n, big_n, seed) in [(1, 2, 0), (2, 2, 1), (2, 3, 2), (3, 2, 0)] {
        let sc = equal_blocks_scenario(n, big_n, seed).unwrap();
        let cs = sc.chain_set().unwrap();
        let config = sc.verify_config();
        let q = build_intertwiner(&cs, None).unwrap();
        let fc = factorize(&q, &cs, &default_ladder(&cs, &config).unwrap(), &config).unwrap();
        let (q_plus, poly, steps, rep) = first_order_conjugate(&fc, &cs, &config).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        for (m, step) in steps.iter().enumerate() {
            let lambda = cs.lambda_of(n * m);
            assert!(step.distance_to_scalar(lambda, &fc.points).unwrap() < 1e-8);
        }
        let h_minus = partner_hamiltonian(&q, cs.hamiltonian()).unwrap();
        let lower = MatDiffOperator::compose(&q_plus, &q).unwrap();
        let upper = MatDiffOperator::compose(&q, &q_plus).unwrap();
        let pts = &fc.points;
        assert!(coefficient_residual(&lower, &poly_of_h(cs.hamiltonian(), &poly), pts).unwrap() < 1e-7);
        assert!(coefficient_residual(&upper, &poly_of_h(&h_minus, &poly), pts).unwrap() < 1e-7);
    }
}

#[test]
fn mixed_eigenvalue_steps_have_non_scalar_closure() {
    let sc = random_scenario(2, 2, 3).unwrap();
    let cs = sc.chain_set().unwrap();
    assert_ne!(cs.lambda_of(0), cs.lambda_of(1));
    let config = sc.verify_config();
    let q = build_intertwiner(&cs, None).unwrap();
    let fc = factorize(&q, &cs, &[1, 2], &config).unwrap();
    let (steps, rep) = first_order_chain(&fc, &config).unwrap();
    assert!(rep.passed(), "{:?}", rep.failures());
    assert!(steps[0].off_identity(&fc.points).unwrap() > 1e-3);
}

#[test]
fn mirrored_chain_with_general_leading_coefficient() {
    let sc = random_scenario(2, 2, 6).unwrap();
    let cs = sc.chain_set().unwrap();
    let config = sc.verify_config();
    let xn = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.3, 0.2),
            Complex64::new(-0.4, 0.0),
            Complex64::new(0.7, -0.1),
            Complex64::new(0.9, 0.0),
        ],
    );
    let q = build_intertwiner(&cs, Some(xn)).unwrap();
    let fc = factorize(&q, &cs, &[1, 2], &config).unwrap();
    assert!(verify_factorization(&fc, &q, &cs, &config).unwrap().passed());
    let rep = verify_mirror(&mirror_factorization(&fc).unwrap(), &q, cs.hamiltonian(), &config).unwrap();
    assert!(rep.passed(), "{:?}", rep.failures());
}

#[test]
fn first_order_reduction_matches_direct_construction() {
    let sc = random_scenario(2, 3, 8).unwrap();
    let cs = sc.chain_set().unwrap();
    let config = sc.verify_config();
    let q = build_intertwiner(&cs, None).unwrap();
    let red = reduce(&q, &cs, 1, &config).unwrap();
    assert!(red.report.passed(), "{:?}", red.report.failures());
    assert_eq!((red.p.order(), red.k.order()), (1, 2));
    let direct = build_from_members(cs.prefix(2), CMatrix::identity(2, 2)).unwrap();
    let fc = factorize(&q, &cs, &[1, 3], &config).unwrap();
    assert!(coefficient_residual(&red.p, &direct, &fc.points).unwrap() < 1e-10);
    assert!(coefficient_residual(&red.k, &fc.factors[1], &fc.points).unwrap() < 1e-8);
}
