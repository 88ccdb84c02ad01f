//! Integration tests for the sparse multivariate polynomial core.

use koopman::poly::{MonomialPoly, MultiIndex};
use koopman::Error;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Absolute tolerance for exact rational-coefficient operations.
const EXACT_TOL: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_poly(rng: &mut ChaCha8Rng, dim: usize, max_deg: u32, terms: usize) -> MonomialPoly {
    let mut p = MonomialPoly::zero_origin(dim);
    for _ in 0..terms {
        let exps: Vec<u32> = (0..dim).map(|_| rng.gen_range(0..=max_deg)).collect();
        p.add_term(&exps, c(rng.gen_range(-2.0..2.0)));
    }
    p
}

#[test]
fn eval_monomial_and_constant() {
    let p = MonomialPoly::monomial(2, &[2, 1], c(1.0)).unwrap();
    assert_eq!(p.eval(&[2.0, 3.0]).unwrap(), c(12.0));

    let five = MonomialPoly::constant(2, c(5.0));
    assert_eq!(five.eval(&[-7.0, 0.3]).unwrap(), c(5.0));

    let neg_x2 = MonomialPoly::from_real_terms(2, &[(&[0, 1], -1.0)]).unwrap();
    assert_eq!(neg_x2.eval(&[0.5, -1.0]).unwrap(), c(1.0));
}

#[test]
fn eval_rejects_wrong_dimension() {
    let p = MonomialPoly::monomial(2, &[1, 0], c(1.0)).unwrap();
    match p.eval(&[1.0]) {
        Err(Error::DimensionMismatch { expected: 2, got: 1 }) => {}
        other => panic!("expected dimension mismatch, got {other:?}"),
    }
}

#[test]
fn monomial_rejects_wrong_exponent_count() {
    assert!(MonomialPoly::monomial(2, &[1], c(1.0)).is_err());
}

#[test]
fn recenter_square_about_one() {
    // x² = 1 + 2(x−1) + (x−1)².
    let p = MonomialPoly::monomial(1, &[2], c(1.0)).unwrap();
    let q = p.recenter(&[1.0]).unwrap();
    assert_eq!(q.center(), &[1.0]);
    assert!((q.coeff(&[0]) - c(1.0)).norm() < EXACT_TOL);
    assert!((q.coeff(&[1]) - c(2.0)).norm() < EXACT_TOL);
    assert!((q.coeff(&[2]) - c(1.0)).norm() < EXACT_TOL);
    assert_eq!(q.term_count(), 3);
}

#[test]
fn recenter_at_equilibrium_kills_constant_term() {
    // Second component of the bistable duffing-type field: −2x₁ + x₁³/3 − x₂.
    // (√6, 0) is an equilibrium, so the recentered constant term vanishes.
    let f2 = MonomialPoly::from_real_terms(
        2,
        &[(&[1, 0], -2.0), (&[3, 0], 1.0 / 3.0), (&[0, 1], -1.0)],
    )
    .unwrap();
    let x_star = 6.0_f64.sqrt();
    let g = f2.recenter(&[x_star, 0.0]).unwrap();
    assert!(g.coeff(&[0, 0]).norm() < 1e-12);
    // Linear term in x₁ becomes −2 + x*² = 4.
    assert!((g.coeff(&[1, 0]) - c(4.0)).norm() < 1e-12);
}

#[test]
fn recenter_is_pointwise_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let p = random_poly(&mut rng, 3, 4, 8);
        let center: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let q = p.recenter(&center).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = p.eval(&x).unwrap();
            let b = q.eval(&x).unwrap();
            assert!(
                (a - b).norm() < 1e-10 * (1.0 + a.norm()),
                "recenter changed values: {a} vs {b}"
            );
        }
        // Round-trip back to the origin recovers the coefficients.
        let back = q.recenter(&[0.0; 3]).unwrap();
        for (k, coeff) in p.terms() {
            assert!((back.coeff(&k.0) - coeff).norm() < 1e-9);
        }
    }
}

#[test]
fn partial_derivative_power_rule() {
    let p = MonomialPoly::monomial(1, &[3], c(1.0)).unwrap();
    let dp = p.partial_derivative(0).unwrap();
    assert_eq!(dp.term_count(), 1);
    assert!((dp.coeff(&[2]) - c(3.0)).norm() < EXACT_TOL);

    let konst = MonomialPoly::constant(2, c(4.0));
    assert!(konst.partial_derivative(1).unwrap().is_zero());

    // f₂ = x₁ − x₂ + x₁²x₂ has ∂f₂/∂x₂ = −1 + x₁².
    let f2 = MonomialPoly::from_real_terms(
        2,
        &[(&[1, 0], 1.0), (&[0, 1], -1.0), (&[2, 1], 1.0)],
    )
    .unwrap();
    let d = f2.partial_derivative(1).unwrap();
    assert!((d.coeff(&[0, 0]) - c(-1.0)).norm() < EXACT_TOL);
    assert!((d.coeff(&[2, 0]) - c(1.0)).norm() < EXACT_TOL);
    assert_eq!(d.term_count(), 2);
}

#[test]
fn partial_derivative_axis_out_of_range() {
    let p = MonomialPoly::monomial(2, &[1, 1], c(1.0)).unwrap();
    match p.partial_derivative(2) {
        Err(Error::AxisOutOfRange { axis: 2, dim: 2 }) => {}
        other => panic!("expected axis error, got {other:?}"),
    }
}

#[test]
fn multiply_basic_identities() {
    // x·(1−x) = x − x².
    let x = MonomialPoly::monomial(1, &[1], c(1.0)).unwrap();
    let one_minus_x =
        MonomialPoly::from_real_terms(1, &[(&[0], 1.0), (&[1], -1.0)]).unwrap();
    let prod = x.multiply(&one_minus_x).unwrap();
    assert!((prod.coeff(&[1]) - c(1.0)).norm() < EXACT_TOL);
    assert!((prod.coeff(&[2]) - c(-1.0)).norm() < EXACT_TOL);
    assert_eq!(prod.term_count(), 2);

    // Multiplying by zero annihilates.
    let zero = MonomialPoly::zero_origin(1);
    assert!(x.multiply(&zero).unwrap().is_zero());
}

#[test]
fn multiply_matches_pointwise_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let p = random_poly(&mut rng, 2, 3, 6);
        let q = random_poly(&mut rng, 2, 3, 6);
        let pq = p.multiply(&q).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let lhs = pq.eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        }
    }
}

#[test]
fn multiply_is_commutative_and_distributive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_poly(&mut rng, 2, 3, 5);
    let q = random_poly(&mut rng, 2, 3, 5);
    let r = random_poly(&mut rng, 2, 3, 5);

    let pq = p.multiply(&q).unwrap();
    let qp = q.multiply(&p).unwrap();
    for (k, coeff) in pq.terms() {
        assert!((qp.coeff(&k.0) - coeff).norm() < EXACT_TOL);
    }

    let qr = q.add(&r).unwrap();
    let lhs = p.multiply(&qr).unwrap();
    let mut rhs = p.multiply(&q).unwrap();
    rhs.add_assign_scaled(&p.multiply(&r).unwrap(), c(1.0)).unwrap();
    for (k, coeff) in lhs.terms() {
        assert!((rhs.coeff(&k.0) - coeff).norm() < 1e-11);
    }
}

#[test]
fn product_rule_commutes_with_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_poly(&mut rng, 2, 4, 6);
    let q = random_poly(&mut rng, 2, 4, 6);
    for axis in 0..2 {
        let lhs = p.multiply(&q).unwrap().partial_derivative(axis).unwrap();
        let mut rhs = p
            .partial_derivative(axis)
            .unwrap()
            .multiply(&q)
            .unwrap();
        rhs.add_assign_scaled(&p.multiply(&q.partial_derivative(axis).unwrap()).unwrap(), c(1.0))
            .unwrap();
        for (k, coeff) in lhs.terms() {
            assert!((rhs.coeff(&k.0) - coeff).norm() < 1e-10);
        }
    }
}

#[test]
fn multiply_requires_matching_centers() {
    let p = MonomialPoly::monomial(1, &[1], c(1.0)).unwrap();
    let q = p.recenter(&[1.0]).unwrap();
    match p.multiply(&q) {
        Err(Error::CenterMismatch) => {}
        other => panic!("expected center mismatch, got {other:?}"),
    }
}

#[test]
fn affine_substitute_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = random_poly(&mut rng, 2, 4, 8);
    let offset = [0.3, -1.2];
    let scale = [2.0, 0.5];
    let q = p.affine_substitute(&offset, &scale).unwrap();
    for _ in 0..20 {
        let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..2).map(|i| offset[i] + scale[i] * u[i]).collect();
        let a = q.eval(&u).unwrap();
        let b = p.eval(&x).unwrap();
        assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
    }
}

#[test]
fn eval_truncated_keeps_low_degrees_only() {
    let p = MonomialPoly::from_real_terms(1, &[(&[0], 1.0), (&[1], 1.0), (&[2], 1.0)]).unwrap();
    let v = p.eval_truncated(&[2.0], 1).unwrap();
    assert!((v - c(3.0)).norm() < EXACT_TOL);
    let full = p.eval(&[2.0]).unwrap();
    assert!((full - c(7.0)).norm() < EXACT_TOL);
}

#[test]
fn homogeneous_part_and_degrees() {
    let p = MonomialPoly::from_real_terms(
        2,
        &[(&[0, 0], 1.0), (&[1, 1], 2.0), (&[3, 0], 4.0), (&[0, 2], -1.0)],
    )
    .unwrap();
    assert_eq!(p.total_degree(), 3);
    assert_eq!(p.axis_degree(0), 3);
    assert_eq!(p.axis_degree(1), 2);
    let h2 = p.homogeneous_part(2);
    assert_eq!(h2.term_count(), 2);
    assert!((h2.coeff(&[1, 1]) - c(2.0)).norm() < EXACT_TOL);
    assert!((h2.coeff(&[0, 2]) - c(-1.0)).norm() < EXACT_TOL);
    let t1 = p.truncate_degree(1);
    assert_eq!(t1.term_count(), 1);
}

#[test]
fn multi_index_orders_by_degree_first() {
    let lo = MultiIndex(vec![1, 0]);
    let hi = MultiIndex(vec![0, 2]);
    assert!(lo < hi, "graded order must compare total degree first");
    // Iteration over terms is in non-decreasing total degree.
    let p = MonomialPoly::from_real_terms(
        2,
        &[(&[0, 2], 1.0), (&[0, 0], 1.0), (&[1, 0], 1.0)],
    )
    .unwrap();
    let degs: Vec<u32> = p.terms().map(|(k, _)| k.degree()).collect();
    let mut sorted = degs.clone();
    sorted.sort_unstable();
    assert_eq!(degs, sorted);
}
