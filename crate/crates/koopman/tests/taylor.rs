//! Taylor eigenfunction solver: exactness on linear systems, scalar
//! recursion oracles, resonance handling, radius estimation, and products.

use ndarray::Array2;
use num_complex::Complex64;

use koopman::poly::MonomialPoly;
use koopman::presets;
use koopman::system::{jacobian_spectrum, DynamicalSystem};
use koopman::taylor::{
    estimate_radius, eval_taylor, pde_residual, product_eigenfunction, solve_taylor,
    TaylorEigenfunction,
};
use koopman::Error;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Defect polynomial `F·∇φ − λφ` in exact coefficient arithmetic; its
/// low-degree part must vanish when the graded recursion is correct.
fn symbolic_defect(sys: &DynamicalSystem, ef: &TaylorEigenfunction) -> MonomialPoly {
    let comps = sys.polynomial_components().unwrap();
    let mut defect = ef.poly().scale(-ef.eigenvalue());
    for (l, f) in comps.iter().enumerate() {
        let f_centered = f
            .recenter(ef.center())
            .unwrap()
            .reinterpret_center(&vec![0.0; sys.dim()])
            .unwrap()
            .reinterpret_center(ef.center())
            .unwrap();
        let dphi = ef.poly().partial_derivative(l).unwrap();
        defect
            .add_assign_scaled(&f_centered.multiply(&dphi).unwrap(), c(1.0))
            .unwrap();
    }
    defect
}

#[test]
fn linear_system_has_no_coefficients_above_order_one() {
    let a = Array2::from_shape_vec((2, 2), vec![-1.0, 0.3, 0.2, -2.0]).unwrap();
    let sys = presets::linear(&a);
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    for index in 0..2 {
        let ef = solve_taylor(&sys, &spec, index, 12).unwrap();
        for (k, coeff) in ef.coeffs() {
            if k.degree() >= 2 {
                assert!(
                    coeff.norm() < 1e-12,
                    "order-{} coefficient {} should vanish",
                    k.degree(),
                    coeff.norm()
                );
            }
        }
        // φ(x) = w·x for the linear system.
        let x = [0.4, -1.1];
        let w = ef.gradient_seed();
        let expected = w[0] * c(x[0]) + w[1] * c(x[1]);
        assert!((eval_taylor(&ef, &x, None).unwrap() - expected).norm() < 1e-12);
        // Polynomial eigenfunctions are entire.
        let ef20 = solve_taylor(&sys, &spec, index, 21).unwrap();
        assert_eq!(estimate_radius(&ef20).unwrap(), f64::INFINITY);
    }
}

#[test]
fn scalar_quadratic_field_reproduces_the_hand_recursion() {
    // ẋ = −x + x²: grading gives −k·φ_k + (k−1)φ_{k−1} = −φ_k, so every
    // coefficient equals the seed; φ(x) = Σ x^k = x/(1−x), radius 1.
    let f = MonomialPoly::from_real_terms(1, &[(&[1], -1.0), (&[2], 1.0)]).unwrap();
    let sys = DynamicalSystem::polynomial(vec![f]).unwrap();
    let spec = jacobian_spectrum(&sys, &[0.0]).unwrap();
    assert!((spec.eigenvalues[0] - c(-1.0)).norm() < 1e-14);
    let ef = solve_taylor(&sys, &spec, 0, 40).unwrap();
    let w0 = ef.gradient_seed()[0];
    for k in 1..=40u32 {
        assert!(
            (ef.coeff(&[k]) - w0).norm() < 1e-12,
            "coefficient {k} deviates from the seed"
        );
    }
    // Partial sums match the closed form inside the unit disk.
    let x = [0.3];
    let exact = w0 * c(0.3 * (1.0 - 0.3_f64.powi(40)) / 0.7);
    assert!((eval_taylor(&ef, &x, None).unwrap() - exact).norm() < 1e-15);
    let radius = estimate_radius(&ef).unwrap();
    assert!((radius - 1.0).abs() < 0.02, "radius {radius}");
}

#[test]
fn resonant_eigenvalue_fails_with_the_offending_order() {
    // diag(−1, −2): λ₂ = 2λ₁ makes the order-2 graded system singular for
    // the second eigenvalue, while the first stays solvable.
    let a = Array2::from_shape_vec((2, 2), vec![-1.0, 0.0, 0.0, -2.0]).unwrap();
    let sys = presets::linear(&a);
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    assert!(!spec.nonresonant);
    match solve_taylor(&sys, &spec, 1, 6) {
        Err(Error::Resonance { order: 2, .. }) => {}
        other => panic!("expected order-2 resonance, got {other:?}"),
    }
    let ef = solve_taylor(&sys, &spec, 0, 6).unwrap();
    for (k, coeff) in ef.coeffs() {
        assert!(k.degree() < 2 || coeff.norm() < 1e-12);
    }
}

#[test]
fn near_resonance_is_a_warning_not_an_error() {
    let a = Array2::from_shape_vec((2, 2), vec![-1.0, 0.0, 0.0, -1.99995]).unwrap();
    let sys = presets::linear(&a);
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    let ef = solve_taylor(&sys, &spec, 1, 4).unwrap();
    let warn = ef
        .near_resonances()
        .iter()
        .find(|w| w.order == 2)
        .expect("order-2 near resonance should be recorded");
    assert!((warn.margin - 5e-5).abs() < 1e-9);
    // The dominant eigenvalue sees no close combination.
    let ef0 = solve_taylor(&sys, &spec, 0, 4).unwrap();
    assert!(ef0.near_resonances().is_empty());
}

#[test]
fn eig_index_out_of_range_is_rejected() {
    let sys = presets::van_der_pol_reverse();
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    assert!(matches!(
        solve_taylor(&sys, &spec, 2, 5),
        Err(Error::EigIndexOutOfRange { index: 2, count: 2 })
    ));
}

#[test]
fn focus_pair_coefficients_satisfy_the_pde_symbolically() {
    // Independent oracle: form F·∇φ − λφ in exact polynomial arithmetic and
    // check every coefficient of total degree ≤ s_max vanishes (the defect
    // can only carry truncation terms of higher degree).
    let sys = presets::van_der_pol_reverse();
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    assert!(spec.nonresonant);
    let s_max = 8;
    let ef = solve_taylor(&sys, &spec, 0, s_max).unwrap();
    let defect = symbolic_defect(&sys, &ef);
    for (k, coeff) in defect.terms() {
        assert!(
            k.degree() > s_max || coeff.norm() < 1e-10,
            "degree-{} defect coefficient {:.3e}",
            k.degree(),
            coeff.norm()
        );
    }
}

#[test]
fn conjugate_eigenvalue_pairs_by_conjugation() {
    let sys = presets::van_der_pol_reverse();
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    // The focus pair sorts conjugates adjacently (ascending imaginary part).
    assert!((spec.eigenvalues[0] - spec.eigenvalues[1].conj()).norm() < 1e-12);
    let ef0 = solve_taylor(&sys, &spec, 0, 6).unwrap();
    let ef1 = solve_taylor(&sys, &spec, 1, 6).unwrap();
    let conj = ef0.conjugate();
    assert!((conj.eigenvalue() - ef1.eigenvalue()).norm() < 1e-12);
    for (k, coeff) in ef1.coeffs() {
        assert!(
            (conj.coeff(&k.0) - coeff).norm() < 1e-12,
            "conjugate coefficient mismatch at {:?}",
            k.0
        );
    }
}

#[test]
fn expansion_about_a_noncentral_fixed_point() {
    // The saddle at (√6, 0) has real spectrum; expanding there exercises
    // the recentering path (nonzero constant pruning, shifted evaluation).
    let sys = presets::twin_saddle();
    let x_star = koopman::system::find_fixed_point(&sys, &[2.4, 0.1]).unwrap();
    let spec = jacobian_spectrum(&sys, &x_star).unwrap();
    let ef = solve_taylor(&sys, &spec, 0, 10).unwrap();
    assert!(eval_taylor(&ef, &x_star, None).unwrap().norm() == 0.0);
    // The defect vanishes through the truncation order.
    let defect = symbolic_defect(&sys, &ef);
    for (k, coeff) in defect.terms() {
        assert!(
            k.degree() > 10 || coeff.norm() < 1e-9,
            "degree-{} defect {:.3e}",
            k.degree(),
            coeff.norm()
        );
    }
}

#[test]
fn synthetic_geometric_series_recovers_its_radius() {
    // Coefficients 3^{−s} have analyticity radius exactly 3.
    let terms: Vec<(Vec<u32>, Complex64)> = (1..=40u32)
        .map(|k| (vec![k], c(3.0_f64.powi(-(k as i32)))))
        .collect();
    let ef = TaylorEigenfunction::from_parts(
        vec![0.0],
        c(-1.0),
        40,
        &terms,
        vec![c(1.0 / 3.0)],
    )
    .unwrap();
    let r = estimate_radius(&ef).unwrap();
    assert!((r - 3.0).abs() < 0.06, "radius {r} should be 3 within 2%");
}

#[test]
fn radius_estimation_requires_enough_orders() {
    let sys = presets::van_der_pol_reverse();
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    let ef = solve_taylor(&sys, &spec, 0, 12).unwrap();
    assert!(matches!(
        estimate_radius(&ef),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn products_sum_eigenvalues_and_square_linear_solutions_exactly() {
    let a = Array2::from_shape_vec((2, 2), vec![-1.0, 0.3, 0.2, -2.0]).unwrap();
    let sys = presets::linear(&a);
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    let ef0 = solve_taylor(&sys, &spec, 0, 8).unwrap();
    let ef1 = solve_taylor(&sys, &spec, 1, 8).unwrap();

    // Power 1 reproduces the factor.
    let same = product_eigenfunction(&[&ef0], &[1]).unwrap();
    assert!((same.eigenvalue() - ef0.eigenvalue()).norm() < 1e-15);
    let x = [0.7, -0.2];
    assert!(
        (eval_taylor(&same, &x, None).unwrap() - eval_taylor(&ef0, &x, None).unwrap()).norm()
            < 1e-15
    );

    // φ₀² is an exact polynomial eigenfunction of 2λ₀.
    let sq = product_eigenfunction(&[&ef0], &[2]).unwrap();
    assert!((sq.eigenvalue() - ef0.eigenvalue() * 2.0).norm() < 1e-14);
    assert!(sq.gradient_seed().iter().all(|g| g.norm() == 0.0));
    for &pt in &[[0.5, 0.5], [-1.0, 0.3], [2.0, -2.0]] {
        assert!(pde_residual(&sys, &sq, &pt).unwrap().norm() < 1e-12);
    }

    // Mixed product φ₀φ₁ carries λ₀+λ₁.
    let mixed = product_eigenfunction(&[&ef0, &ef1], &[1, 1]).unwrap();
    assert!(
        (mixed.eigenvalue() - (ef0.eigenvalue() + ef1.eigenvalue())).norm() < 1e-14
    );
    for &pt in &[[0.5, 0.5], [-0.4, 0.9]] {
        assert!(pde_residual(&sys, &mixed, &pt).unwrap().norm() < 1e-12);
    }
}

#[test]
fn product_center_mismatch_is_rejected() {
    let sys = presets::twin_saddle();
    let spec0 = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    let ef0 = solve_taylor(&sys, &spec0, 0, 6).unwrap();
    let x_star = koopman::system::find_fixed_point(&sys, &[2.4, 0.1]).unwrap();
    let spec1 = jacobian_spectrum(&sys, &x_star).unwrap();
    let ef1 = solve_taylor(&sys, &spec1, 0, 6).unwrap();
    assert!(matches!(
        product_eigenfunction(&[&ef0, &ef1], &[1, 1]),
        Err(Error::CenterMismatch)
    ));
    assert!(matches!(
        product_eigenfunction(&[&ef0], &[0]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn coupled_cubic_order_75_matches_reported_behavior() {
    // Dominant eigenfunction of the coupled cubic system: the expansion is
    // accurate inside the unit ball, stable under truncation, and its
    // coefficient growth pins the analyticity radius near 1.21.
    let sys = presets::coupled_cubic();
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    assert!(spec.nonresonant);
    let ef = solve_taylor(&sys, &spec, 0, 75).unwrap();

    // PDE residual on a polar grid of the closed unit ball. The truncation
    // defect concentrates on the boundary circle (the series converges up
    // to radius ≈ 1.21, so the degree-76 tail decays like (r/1.21)^76):
    // at the boundary it floors near 1.9e−6 for the unit-norm gradient
    // seed, and collapses by two orders of magnitude a few percent inside.
    let mut max_res = 0.0_f64;
    let mut max_res_interior = 0.0_f64;
    for ir in 1..=20 {
        let r = ir as f64 / 20.0;
        for it in 0..24 {
            let t = std::f64::consts::TAU * it as f64 / 24.0;
            let x = [r * t.cos(), r * t.sin()];
            let res = pde_residual(&sys, &ef, &x).unwrap().norm();
            max_res = max_res.max(res);
            if r <= 0.95 {
                max_res_interior = max_res_interior.max(res);
            }
        }
    }
    assert!(max_res < 2.5e-6, "unit-ball residual {max_res:.3e}");
    assert!(
        max_res_interior < 1e-6,
        "interior residual {max_res_interior:.3e}"
    );

    // Truncation stability inside the analyticity disk.
    let x = [0.5, 0.5];
    let v60 = eval_taylor(&ef, &x, Some(60)).unwrap();
    let v75 = eval_taylor(&ef, &x, Some(75)).unwrap();
    assert!((v60 - v75).norm() < 1e-8);

    // Radius estimate within 10% of 1.212.
    let radius = estimate_radius(&ef).unwrap();
    assert!(
        (1.09..=1.33).contains(&radius),
        "estimated radius {radius}"
    );

    // Mixed product stays accurate on a smaller ball.
    let ef1 = solve_taylor(&sys, &spec, 1, 75).unwrap();
    let prod = product_eigenfunction(&[&ef, &ef1], &[1, 1]).unwrap();
    let mut max_prod = 0.0_f64;
    for it in 0..16 {
        let t = std::f64::consts::TAU * it as f64 / 16.0;
        let x = [0.8 * t.cos(), 0.8 * t.sin()];
        max_prod = max_prod.max(pde_residual(&sys, &prod, &x).unwrap().norm());
    }
    assert!(max_prod < 1e-5, "product residual {max_prod:.3e}");
}

#[test]
fn residual_decreases_monotonically_with_order() {
    // Checkpoint orders 10, 20, 40, 60: the max residual on a ring inside
    // the analyticity disk must not increase.
    let sys = presets::coupled_cubic();
    let spec = jacobian_spectrum(&sys, &[0.0, 0.0]).unwrap();
    let mut last = f64::INFINITY;
    for &order in &[10u32, 20, 40, 60] {
        let ef = solve_taylor(&sys, &spec, 0, order).unwrap();
        let mut max_res = 0.0_f64;
        for it in 0..16 {
            let t = std::f64::consts::TAU * it as f64 / 16.0;
            let x = [0.9 * t.cos(), 0.9 * t.sin()];
            max_res = max_res.max(pde_residual(&sys, &ef, &x).unwrap().norm());
        }
        assert!(
            max_res <= last * (1.0 + 1e-9),
            "residual {max_res:.3e} grew past {last:.3e} at order {order}"
        );
        last = max_res;
    }
    assert!(last < 1e-3);
}
