//! Ready-made benchmark systems used across tests, benches, and docs.

use ndarray::Array2;

use crate::poly::MonomialPoly;
use crate::system::{DynamicalSystem, TrigRadial};

fn poly2(terms: &[(&[u32], f64)]) -> MonomialPoly {
    MonomialPoly::from_real_terms(2, terms).expect("valid preset terms")
}

/// Time-reversed Van der Pol oscillator: `ẋ₁ = −x₂`,
/// `ẋ₂ = x₁ − x₂ + x₁²x₂`. The origin is a stable focus with eigenvalues
/// `(−1 ± i√3)/2`; the basin of attraction is bounded by an unstable limit
/// cycle.
pub fn van_der_pol_reverse() -> DynamicalSystem {
    let f1 = poly2(&[(&[0, 1], -1.0)]);
    let f2 = poly2(&[(&[1, 0], 1.0), (&[0, 1], -1.0), (&[2, 1], 1.0)]);
    DynamicalSystem::polynomial(vec![f1, f2]).expect("valid preset")
}

/// Van der Pol oscillator with unit damping: `ẋ₁ = x₂`,
/// `ẋ₂ = −x₁ + x₂ − x₁²x₂`. Has a stable limit cycle traversed clockwise
/// in the (x₁, x₂) plane.
pub fn van_der_pol() -> DynamicalSystem {
    let f1 = poly2(&[(&[0, 1], 1.0)]);
    let f2 = poly2(&[(&[1, 0], -1.0), (&[0, 1], 1.0), (&[2, 1], -1.0)]);
    DynamicalSystem::polynomial(vec![f1, f2]).expect("valid preset")
}

/// Duffing-type bistable system: `ẋ₁ = x₂`, `ẋ₂ = −2x₁ + x₁³/3 − x₂`.
/// The origin is a stable focus; saddle points sit at `(±√6, 0)` and their
/// stable manifolds bound the basin.
pub fn twin_saddle() -> DynamicalSystem {
    let f1 = poly2(&[(&[0, 1], 1.0)]);
    let f2 = poly2(&[(&[1, 0], -2.0), (&[3, 0], 1.0 / 3.0), (&[0, 1], -1.0)]);
    DynamicalSystem::polynomial(vec![f1, f2]).expect("valid preset")
}

/// Coupled cubic system with a globally stable origin on moderate boxes:
/// `ẋ₁ = −3/4 x₁ − 1/8 x₂ + 1/4 x₁x₂ − 1/4 x₂² − 1/2 x₁³`,
/// `ẋ₂ = −1/8 x₁ − x₂`.
pub fn coupled_cubic() -> DynamicalSystem {
    let f1 = poly2(&[
        (&[1, 0], -0.75),
        (&[0, 1], -0.125),
        (&[1, 1], 0.25),
        (&[0, 2], -0.25),
        (&[3, 0], -0.5),
    ]);
    let f2 = poly2(&[(&[1, 0], -0.125), (&[0, 1], -1.0)]);
    DynamicalSystem::polynomial(vec![f1, f2]).expect("valid preset")
}

/// Unit circle limit cycle with angle-modulated radial attraction:
/// `θ̇ = 1`, `ṙ = (2 + cos 6θ − cos 10θ) · r(1 − r²)`. The cycle `r = 1`
/// has period 2π and nontrivial Floquet exponent −4.
pub fn modulated_circle() -> DynamicalSystem {
    let g = TrigRadial::constant(2.0)
        .add_scaled(&TrigRadial::cosine(6, 1.0), 1.0)
        .add_scaled(&TrigRadial::cosine(10, 1.0), -1.0);
    let mut shape = TrigRadial::radial_power(1);
    shape.add_term(3, 0, num_complex::Complex64::new(-1.0, 0.0));
    let f_r = g.multiply(&shape);
    let omega = TrigRadial::constant(1.0);
    DynamicalSystem::polar(f_r, omega).expect("valid preset")
}

/// Rotationally symmetric circle attractor: `ṙ = r(1 − r)`, `θ̇ = 1`.
/// The radial equation decouples, giving closed-form references for the
/// limit-cycle pipeline (period 2π, Floquet exponent −1).
pub fn radial_circle() -> DynamicalSystem {
    let mut f_r = TrigRadial::radial_power(1);
    f_r.add_term(2, 0, num_complex::Complex64::new(-1.0, 0.0));
    let omega = TrigRadial::constant(1.0);
    DynamicalSystem::polar(f_r, omega).expect("valid preset")
}

/// Linear system `ẋ = Ax`.
pub fn linear(a: &Array2<f64>) -> DynamicalSystem {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let comps = (0..n)
        .map(|i| {
            let mut f = MonomialPoly::zero_origin(n);
            for j in 0..n {
                if a[[i, j]] != 0.0 {
                    let mut exps = vec![0u32; n];
                    exps[j] = 1;
                    f.add_term(&exps, num_complex::Complex64::new(a[[i, j]], 0.0));
                }
            }
            f
        })
        .collect();
    DynamicalSystem::polynomial(comps).expect("valid linear field")
}
