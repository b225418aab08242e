use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use vw_core::normalize::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `theta` with `|theta_n| radius^n` summing to `size`, geometric in `n`.
fn random_theta(seed: &[(f64, f64)], size: f64, radius: f64, order: usize) -> SeriesPoly {
    let mut coeffs: Vec<Complex64> = seed
        .iter()
        .enumerate()
        .map(|(i, &(m, a))| Complex64::from_polar(m * 0.5f64.powi(i as i32), a) / radius.powi(i as i32 + 1))
        .collect();
    coeffs.truncate(order);
    let mut s = SeriesPoly::from_coeffs(&coeffs, order, radius);
    let norm = s.norm();
    if norm > 0.0 {
        for v in s.coeffs.iter_mut() {
            *v *= size / norm;
        }
    }
    s
}

#[test]
fn trivial_problem_is_fixed() {
    let theta = SeriesPoly::zero(DEFAULT_ORDER, 0.5);
    let step = contraction_step(&SeriesPoly::zero(DEFAULT_ORDER, 0.5), &theta).unwrap();
    assert!(step.coeffs.iter().all(|z| *z == c(0.0)));
    let n = normalize_coordinate(&theta, 1e-12).unwrap();
    assert!(n.beta.coeffs.iter().all(|z| *z == c(0.0)));
}

#[test]
fn first_step_and_fixed_point_for_linear_theta() {
    let eps = 1e-3;
    let theta = SeriesPoly::from_coeffs(&[c(eps)], DEFAULT_ORDER, 1.0);
    let step = contraction_step(&SeriesPoly::zero(DEFAULT_ORDER, 1.0), &theta).unwrap();
    // Exact: sqrt(1 + eps u) - 1 has first coefficient eps / 2.
    assert!((step.coeff(1) - c(eps / 4.0)).norm() < 1e-18);
    let n = normalize_coordinate(&theta, 1e-14).unwrap();
    // Second-order correction to eps/5 is O(eps^2).
    assert!((n.beta.coeff(1) - c(eps / 5.0)).norm() < 1e-6 * eps);
    assert!(n.recursion_residual <= 1e-14);
}

#[test]
fn first_coefficient_matches_closed_form() {
    // At first order 2 b_1 = eps/2 - b_1/2 exactly, for any higher terms.
    let eps = 0.004;
    let theta = SeriesPoly::from_coeffs(&[c(eps), c(0.001)], DEFAULT_ORDER, 1.0);
    let n = normalize_coordinate(&theta, 1e-13).unwrap();
    assert!((n.beta.coeff(1) - c(eps / 5.0)).norm() < 1e-16);
}

#[test]
fn contraction_factor_in_regime() {
    let radius = 0.5;
    let theta = random_theta(&[(1.0, 0.3), (0.7, 1.1), (0.4, -2.0), (0.2, 0.5)], 0.01, radius, DEFAULT_ORDER);
    let n = normalize_coordinate(&theta, 1e-12).unwrap();
    assert!(n.contraction_factor <= 0.75, "factor {}", n.contraction_factor);
    let b2 = SeriesPoly::from_coeffs(&[Complex64::new(0.01, 0.02)], DEFAULT_ORDER, radius);
    let ratio = contraction_ratio(&n.beta, &b2, &theta).unwrap();
    assert!(ratio <= 0.75, "ratio {ratio}");
}

#[test]
fn coordinate_equation_on_circle() {
    let radius = 0.8;
    let theta = random_theta(&[(1.0, 0.0), (0.5, 1.0), (0.9, 2.5)], 0.01, radius, DEFAULT_ORDER);
    let n = normalize_coordinate(&theta, 1e-13).unwrap();
    let res = coordinate_residual(&n.beta, &theta, radius / 2.0, 64);
    assert!(res <= 1e-10, "residual {res:e}");
}

#[test]
fn truncation_converges() {
    let radius = 1.0;
    // Analytic on |u| < 2: theta = 0.01 u / (2 - u) expanded.
    let full: Vec<Complex64> = (1..=64).map(|n| c(0.01 * 0.5f64.powi(n))).collect();
    let t16 = SeriesPoly::from_coeffs(&full, 16, radius);
    let t32 = SeriesPoly::from_coeffs(&full, 32, radius);
    let n16 = normalize_coordinate(&t16, 1e-14).unwrap();
    let n32 = normalize_coordinate(&t32, 1e-14).unwrap();
    for k in 1..=8 {
        assert!((n16.beta.coeff(k) - n32.beta.coeff(k)).norm() < 1e-12);
    }
}

#[test]
fn rejects_oversized_orders() {
    let big = SeriesPoly::zero(MAX_ORDER + 1, 1.0);
    let small = SeriesPoly::zero(4, 1.0);
    assert!(matches!(contraction_step(&small, &big), Err(NormalizeError::TruncationOverflow { .. })));
}

#[test]
fn large_theta_is_not_contracting() {
    // theta = -1 + small: (1 + theta)^{1/2} near its branch point.
    let theta = SeriesPoly::from_coeffs(&[c(-40.0), c(-400.0)], DEFAULT_ORDER, 1.0);
    assert!(matches!(normalize_coordinate(&theta, 1e-12), Err(NormalizeError::NotContracting { .. })));
}

#[test]
fn phase_examples() {
    let p = alpha_phase_normalize(c(-1.0)).unwrap();
    assert_eq!(p.alpha_positive, 1.0);
    assert!((p.rotation - Complex64::from_polar(1.0, PI / 3.0)).norm() < 1e-15);
    let lead = p.rotation.powi(3) * c(-1.0);
    assert!(lead.re > 0.0 && lead.im.abs() < 1e-15);
    let q = alpha_phase_normalize(c(4.0)).unwrap();
    assert_eq!(q.alpha_positive, 4.0);
    assert_eq!(q.rotation, c(1.0));
    assert!(matches!(alpha_phase_normalize(c(0.0)), Err(NormalizeError::ZeroAlpha)));
}

proptest! {
    #[test]
    fn phase_rotation_makes_alpha_positive(m in 1e-3f64..1e3, a in -PI..PI) {
        let alpha = Complex64::from_polar(m, a);
        let p = alpha_phase_normalize(alpha).unwrap();
        prop_assert!((p.alpha_positive - alpha.norm()).abs() <= 1e-15 * m);
        prop_assert!((p.rotation.norm() - 1.0).abs() < 1e-15);
        prop_assert!(p.omega > -PI / 3.0 && p.omega <= PI / 3.0);
        let lead = alpha * p.rotation.powi(3);
        prop_assert!((lead - Complex64::new(p.alpha_positive, 0.0)).norm() < 1e-12 * m);
    }

    #[test]
    fn fixed_point_satisfies_recursion(
        seed in prop::collection::vec((0.0f64..1.0, -PI..PI), 1..6),
        size in 0.0f64..0.01,
        radius in 0.1f64..2.0,
    ) {
        let theta = random_theta(&seed, size, radius, DEFAULT_ORDER);
        let n = normalize_coordinate(&theta, 1e-12).unwrap();
        prop_assert!(n.contraction_factor <= 0.75);
        prop_assert!(recursion_residual(&n.beta, &theta) <= 1e-12);
        prop_assert!(coordinate_residual(&n.beta, &theta, radius / 2.0, 64) <= 1e-10);
    }
}
