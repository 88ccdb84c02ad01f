//! Integration tests for the box-domain Bernstein fixed-point solver:
//! exact low-degree cases with known coefficients, structural checks on the
//! stacked system, convergence on the coupled cubic system, and the
//! residual dichotomy on a box that crosses the basin boundary.

use koopman::bernstein_fp::{
    assemble_fp_system, eval_bernstein, solve_fp, solve_fp_on_box, FpOptions,
};
use koopman::error::Error;
use koopman::poly::MonomialPoly;
use koopman::stability::{verify_semigroup, Eigenfunction};
use koopman::system::{
    find_fixed_point, jacobian_spectrum, pull_back_field, BoxMap, DynamicalSystem,
};
use koopman::{presets, Result};
use ndarray::arr2;
use num_complex::Complex64;

/// Pull a system back to the unit cube, polish the fixed point there, and
/// return the box system with its spectrum.
fn box_setup(
    sys: &DynamicalSystem,
    chart: &BoxMap,
    x_star: &[f64],
) -> Result<(DynamicalSystem, koopman::system::SpectrumReport)> {
    let sys_box = pull_back_field(sys, chart)?;
    let u_star = find_fixed_point(&sys_box, &chart.to_unit(x_star))?;
    let spec = jacobian_spectrum(&sys_box, &u_star)?;
    Ok((sys_box, spec))
}

#[test]
fn scalar_affine_field_is_solved_exactly_at_degree_three() {
    // ẋ = 1/2 − x on [0,1]: the chart is the identity, the fixed point is
    // 1/2, λ = −1, and the eigenfunction is x − 1/2, whose degree-3
    // control points are its values at 0, 1/3, 2/3, 1.
    let f = MonomialPoly::from_real_terms(1, &[(&[0], 0.5), (&[1], -1.0)]).unwrap();
    let sys = DynamicalSystem::polynomial(vec![f]).unwrap();
    let chart = BoxMap::new(vec![0.0], vec![1.0]).unwrap();
    let ef = solve_fp_on_box(&sys, &chart, &[0.4], 0, 3, &FpOptions::default()).unwrap();

    assert!(
        ef.lsq_residual() < 1e-12,
        "residual {:.3e}",
        ef.lsq_residual()
    );
    assert!(ef.certified());
    assert_eq!(ef.eigenvalue(), Complex64::new(-1.0, 0.0));

    let expected = [-0.5, -1.0 / 6.0, 1.0 / 6.0, 0.5];
    let got = &ef.coeffs().coeffs;
    assert_eq!(got.len(), 4);
    for (g, e) in got.iter().zip(expected) {
        assert!(
            (g - Complex64::new(e, 0.0)).norm() < 1e-12,
            "coefficient {g} vs {e}"
        );
    }

    let at = eval_bernstein(&ef, &[0.75]);
    assert!(at.inside);
    assert!((at.value - Complex64::new(0.25, 0.0)).norm() < 1e-12);

    // Value pinned to zero at the fixed point, gradient pinned to w = 1.
    assert!(ef.eval_unit(ef.fixed_point_box()).norm() < 10.0 * ef.lsq_residual() + 1e-15);
    let h = 1e-6;
    let fd = (ef.eval_unit(&[0.5 + h]) - ef.eval_unit(&[0.5 - h])) / (2.0 * h);
    assert!((fd - ef.seed()[0]).norm() < 1e-6);
}

#[test]
fn decoupled_linear_modes_stay_separable() {
    // ẋ = diag(−1,−2)x on [−1,1]²: for the dominant eigenvalue −1 the only
    // polynomial solution is a multiple of x₁, so the solved coefficients
    // must be affine along axis 1 and constant along axis 2.
    let sys = presets::linear(&arr2(&[[-1.0, 0.0], [0.0, -2.0]]));
    let chart = BoxMap::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let s = 4;
    let ef = solve_fp_on_box(&sys, &chart, &[0.0, 0.0], 0, s, &FpOptions::default()).unwrap();

    assert!(
        ef.lsq_residual() < 1e-10,
        "residual {:.3e}",
        ef.lsq_residual()
    );
    // In box coordinates the solution is u₁ − 1/2: control points i/s − 1/2
    // on axis 1, repeated across axis 2.
    let c = &ef.coeffs().coeffs;
    assert_eq!(c.len(), (s + 1) * (s + 1));
    for i in 0..=s {
        let expected = i as f64 / s as f64 - 0.5;
        for j in 0..=s {
            let v = c[i * (s + 1) + j];
            assert!(
                (v - Complex64::new(expected, 0.0)).norm() < 1e-10,
                "c[{i},{j}] = {v}, expected {expected}"
            );
        }
    }
}

#[test]
fn stacked_system_has_the_expected_shape() {
    // Coupled cubic on [−2,2]² at ansatz degree 75: the field has total
    // degree 3, so the product block lives in the degree-78 tensor basis.
    let sys = presets::coupled_cubic();
    let chart = BoxMap::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let (sys_box, spec) = box_setup(&sys, &chart, &[0.0, 0.0]).unwrap();
    let system = assemble_fp_system(&sys_box, &chart, &spec, 0, 75, &FpOptions::default()).unwrap();

    assert_eq!(system.degree(), 75);
    assert_eq!(system.field_degree(), 3);
    assert_eq!(system.pde_rows(), 79 * 79);
    assert_eq!(system.unknowns(), 76 * 76);
    assert_eq!(system.constraint_count(), 3);
    assert_eq!(system.rows(), 79 * 79 + 3);
    assert!((system.weight() - 79.0).abs() < 1e-12);

    // The weighted right-hand side carries only the normalization rows.
    let b = system.rhs();
    let head_norm: f64 = b[..system.pde_rows()].iter().map(|v| v.norm()).sum();
    assert_eq!(head_norm, 0.0);
    let tail: Vec<_> = b[system.pde_rows()..].to_vec();
    assert_eq!(tail[0], Complex64::new(0.0, 0.0));
    let w_norm: f64 = tail[1..].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    assert!((w_norm - system.weight()).abs() < 1e-9 * system.weight());
}

#[test]
fn coupled_cubic_residual_decreases_with_degree_and_certifies() {
    let sys = presets::coupled_cubic();
    let chart = BoxMap::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let (sys_box, spec) = box_setup(&sys, &chart, &[0.0, 0.0]).unwrap();

    let mut residuals = Vec::new();
    for &s in &[25usize, 50, 75] {
        let t0 = std::time::Instant::now();
        let system = assemble_fp_system(&sys_box, &chart, &spec, 0, s, &FpOptions::default())
            .unwrap();
        let ef = solve_fp(&system).unwrap();
        println!(
            "s = {s}: residual {:.3e} in {:.1?}",
            ef.lsq_residual(),
            t0.elapsed()
        );
        residuals.push(ef.lsq_residual());

        if s == 50 {
            // The normalization rows must actually hold on the solution:
            // value 0 and gradient w at the fixed point, up to the solver's
            // own residual scale.
            let tol = (100.0 * ef.lsq_residual()).max(1e-6);
            assert!(ef.eval_unit(ef.fixed_point_box()).norm() < tol);
            let h = 1e-6;
            let u = ef.fixed_point_box().to_vec();
            for axis in 0..2 {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[axis] += h;
                dn[axis] -= h;
                let fd = (ef.eval_unit(&up) - ef.eval_unit(&dn)) / (2.0 * h);
                let w = ef.seed()[axis];
                assert!(
                    (fd - w).norm() < tol * (1.0 + w.norm()),
                    "axis {axis}: gradient {fd} vs {w}"
                );
            }
        }
    }
    assert!(
        residuals[0] > residuals[1] && residuals[1] > residuals[2],
        "residuals not monotone: {residuals:?}"
    );
    assert!(
        residuals[2] < 1e-3,
        "degree-75 residual {:.3e} misses the certification threshold",
        residuals[2]
    );
}

#[test]
fn box_crossing_the_basin_boundary_never_certifies() {
    // The reversed van der Pol origin is stable but its basin is bounded;
    // [−3,3]² pokes outside it, so no continuous eigenfunction exists on
    // the box and the residual must stay high at every degree.
    let sys = presets::van_der_pol_reverse();
    let chart = BoxMap::new(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap();
    let (sys_box, spec) = box_setup(&sys, &chart, &[0.0, 0.0]).unwrap();

    for &s in &[20usize, 40] {
        let system = assemble_fp_system(&sys_box, &chart, &spec, 0, s, &FpOptions::default())
            .unwrap();
        let ef = solve_fp(&system).unwrap();
        println!("dichotomy s = {s}: residual {:.3e}", ef.lsq_residual());
        assert!(
            ef.lsq_residual() >= 1e-2,
            "s = {s}: residual {:.3e} below the dichotomy floor",
            ef.lsq_residual()
        );
        assert!(!ef.certified());
    }
}

#[test]
fn small_box_inside_the_basin_certifies() {
    // Shrinking the box to [−1,1]² keeps every point inside the reversed
    // van der Pol basin, and the same solver certifies.
    let sys = presets::van_der_pol_reverse();
    let chart = BoxMap::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let ef = solve_fp_on_box(&sys, &chart, &[0.0, 0.0], 0, 40, &FpOptions::default()).unwrap();
    println!("small box s = 40: residual {:.3e}", ef.lsq_residual());
    assert!(
        ef.lsq_residual() < 1e-3,
        "residual {:.3e}",
        ef.lsq_residual()
    );
    assert!(ef.certified());
}

#[test]
fn conjugate_solution_matches_the_conjugate_eigenvalue_solve() {
    let sys = presets::van_der_pol_reverse();
    let chart = BoxMap::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let a = solve_fp_on_box(&sys, &chart, &[0.0, 0.0], 0, 10, &FpOptions::default()).unwrap();
    let b = solve_fp_on_box(&sys, &chart, &[0.0, 0.0], 1, 10, &FpOptions::default()).unwrap();

    assert!((a.eigenvalue().conj() - b.eigenvalue()).norm() < 1e-12);
    let conj = a.conjugate();
    assert_eq!(conj.eigenvalue(), b.eigenvalue());
    let scale: f64 = b
        .coeffs()
        .coeffs
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    for (x, y) in conj.coeffs().coeffs.iter().zip(&b.coeffs().coeffs) {
        assert!(
            (x - y).norm() < 1e-8 * scale,
            "conjugate coefficients differ: {x} vs {y}"
        );
    }
}

#[test]
fn semigroup_holds_along_trajectories_of_the_exact_scalar_solve() {
    let f = MonomialPoly::from_real_terms(1, &[(&[0], 0.5), (&[1], -1.0)]).unwrap();
    let sys = DynamicalSystem::polynomial(vec![f]).unwrap();
    let chart = BoxMap::new(vec![0.0], vec![1.0]).unwrap();
    let ef = solve_fp_on_box(&sys, &chart, &[0.4], 0, 3, &FpOptions::default()).unwrap();

    // Trajectories started inside [0,1] contract toward 1/2 and stay in
    // the box, so nothing is skipped and the exact eigenfunction tracks
    // the flow to integrator accuracy.
    let points: Vec<Vec<f64>> = (0..50).map(|i| vec![0.05 + 0.9 * i as f64 / 49.0]).collect();
    let report = verify_semigroup(&ef, ef.eigenvalue(), &sys, &points, 1.0).unwrap();
    assert_eq!(report.skipped, 0);
    assert_eq!(report.checked, 50 * 8);
    assert!(
        report.max_rel_error < 1e-9,
        "max relative error {:.3e}",
        report.max_rel_error
    );
}

#[test]
fn points_outside_the_box_are_flagged_as_extrapolation() {
    let f = MonomialPoly::from_real_terms(1, &[(&[0], 0.5), (&[1], -1.0)]).unwrap();
    let sys = DynamicalSystem::polynomial(vec![f]).unwrap();
    let chart = BoxMap::new(vec![0.0], vec![1.0]).unwrap();
    let ef = solve_fp_on_box(&sys, &chart, &[0.4], 0, 3, &FpOptions::default()).unwrap();

    let out = eval_bernstein(&ef, &[1.5]);
    assert!(!out.inside);
    assert!(out.value.re.is_finite());
    // The polynomial extends: x − 1/2 evaluated at 1.5 is still 1.
    assert!((out.value - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    assert!(!ef.in_domain(&[1.5]));
    assert!(ef.in_domain(&[0.75]));
}

#[test]
fn ansatz_degrees_beyond_the_cap_are_rejected() {
    let sys = presets::coupled_cubic();
    let chart = BoxMap::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let (sys_box, spec) = box_setup(&sys, &chart, &[0.0, 0.0]).unwrap();
    let err = assemble_fp_system(&sys_box, &chart, &spec, 0, 398, &FpOptions::default())
        .err()
        .expect("degree 398 with a cubic field must exceed the cap");
    assert!(matches!(err, Error::DegreeCap { .. }), "got {err:?}");
}

#[test]
fn constraint_weight_override_is_respected() {
    let f = MonomialPoly::from_real_terms(1, &[(&[0], 0.5), (&[1], -1.0)]).unwrap();
    let sys = DynamicalSystem::polynomial(vec![f]).unwrap();
    let chart = BoxMap::new(vec![0.0], vec![1.0]).unwrap();
    let sys_box = pull_back_field(&sys, &chart).unwrap();
    let u_star = find_fixed_point(&sys_box, &[0.4]).unwrap();
    let spec = jacobian_spectrum(&sys_box, &u_star).unwrap();

    let opts = FpOptions {
        constraint_weight: Some(1.0),
        ..FpOptions::default()
    };
    let system = assemble_fp_system(&sys_box, &chart, &spec, 0, 3, &opts).unwrap();
    assert_eq!(system.weight(), 1.0);
    let ef = solve_fp(&system).unwrap();
    assert!(ef.lsq_residual() < 1e-12);
    let at = eval_bernstein(&ef, &[0.75]);
    assert!((at.value - Complex64::new(0.25, 0.0)).norm() < 1e-12);
}
