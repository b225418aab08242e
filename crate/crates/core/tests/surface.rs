use proptest::prelude::*;
use std::f64::consts::PI;
use vw_core::surface::*;

fn zero_field(d: &TorusData) -> Vec<f64> {
    vec![0.0; d.n * d.n]
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn default_data_invariants() {
    let d = build_synthetic_q(&ZeroSpec::default()).unwrap();
    assert_eq!(d.zeros.iter().filter(|z| z.kind == ZeroKind::Plus).count(), 2);
    assert_eq!(d.zeros.iter().filter(|z| z.kind == ZeroKind::Minus).count(), 2);
    for k in 0..d.n * d.n {
        let prod = d.w_plus_sq[k] * d.w_minus_sq[k];
        let q2 = d.q_abs[k] * d.q_abs[k];
        assert!((prod - q2).abs() <= 1e-12 * q2.max(1.0));
        assert!((d.q1[k].norm() - d.q_abs[k]).abs() <= 1e-12 * d.q_abs[k].max(1.0));
    }
}

#[test]
fn zeros_are_simple() {
    let d = build_synthetic_q(&ZeroSpec::default()).unwrap();
    let n = d.n;
    for z in &d.zeros {
        assert_eq!(d.q_abs[z.node], 0.0);
        let (i0, j0) = (z.node % n, z.node / n);
        for (di, dj) in [(1usize, 0usize), (0, 1), (2, 1), (3, 3)] {
            let k = (i0 + di) % n + n * ((j0 + dj) % n);
            let dist = d.h * ((di * di + dj * dj) as f64).sqrt();
            let ratio = d.q_abs[k] / (z.alpha1 * dist);
            assert!((ratio - 1.0).abs() < 1e-2, "ratio {ratio}");
        }
    }
}

#[test]
fn mu_diamond_is_harmonic() {
    let d = build_synthetic_q(&ZeroSpec::default()).unwrap();
    let n = d.n;
    let mut worst: f64 = 0.0;
    for j in (0..n).step_by(8) {
        for i in (0..n).step_by(8) {
            let k = i + n * j;
            if d.theta_dist[k] > 0.5 {
                let lap = mu_diamond_laplacian(&d, i as f64 * d.h, j as f64 * d.h, 0.02);
                worst = worst.max(lap.abs());
            }
        }
    }
    assert!(worst < 1e-6, "laplacian {worst:e}");
}

#[test]
fn mu_diamond_log_singularity() {
    let d = build_synthetic_q(&ZeroSpec::default()).unwrap();
    let n = d.n;
    for z in d.zeros.iter().filter(|z| z.kind == ZeroKind::Plus) {
        let expected = 0.25 * (z.b / z.a).ln();
        let (i0, j0) = (z.node % n, z.node / n);
        for di in 1..4usize {
            let k = (i0 + di) % n + n * j0;
            let v = d.mu_diamond[k] + 0.5 * (di as f64 * d.h).ln();
            assert!((v - expected).abs() < 1e-2, "{v} vs {expected}");
        }
    }
}

#[test]
fn swap_negates_mu_diamond() {
    let d = build_synthetic_q(&ZeroSpec::default()).unwrap();
    let s = d.swapped();
    let spec = ZeroSpec::default();
    let rebuilt = build_synthetic_q(&ZeroSpec {
        zeros_plus: spec.zeros_minus.clone(),
        zeros_minus: spec.zeros_plus.clone(),
        ..spec
    })
    .unwrap();
    for k in 0..d.n * d.n {
        if d.mu_diamond[k].is_finite() {
            assert_eq!(s.mu_diamond[k], -d.mu_diamond[k]);
            assert!((rebuilt.mu_diamond[k] + d.mu_diamond[k]).abs() < 1e-13);
        }
    }
}

#[test]
fn rejects_bad_placements() {
    let h = 2.0 * PI / 64.0;
    let close = ZeroSpec {
        n: 64,
        zeros_plus: vec![[1.0, 1.0], [4.0, 4.0]],
        zeros_minus: vec![[1.0 + 5.0 * h, 1.0], [1.0, 4.0]],
        cap: 1.5,
    };
    assert!(matches!(build_synthetic_q(&close), Err(SurfaceError::ZerosTooClose { .. })));
    let unbalanced = ZeroSpec {
        n: 64,
        zeros_plus: vec![[1.0, 1.0], [4.0, 4.0], [1.0, 4.0]],
        zeros_minus: vec![[4.0, 1.0], [2.5, 2.5]],
        cap: 1.5,
    };
    assert!(matches!(build_synthetic_q(&unbalanced), Err(SurfaceError::BadSpec(_))));
    let d = build_synthetic_q(&ZeroSpec::checkerboard(64)).unwrap();
    assert!(matches!(solve_mu(&d, 1.0, &zero_field(&d), 1e-10), Err(SurfaceError::BadParams(_))));
    let mut bad = zero_field(&d);
    bad[3] = f64::NAN;
    assert!(matches!(solve_mu(&d, 10.0, &bad, 1e-10), Err(SurfaceError::BadParams(_))));
}

#[test]
fn uniqueness_and_minimizer_at_r20() {
    let d = build_synthetic_q(&ZeroSpec::default()).unwrap();
    let r = 20.0;
    let a = solve_mu(&d, r, &zero_field(&d), 1e-11).unwrap();
    let b = solve_mu(&d, r, &d.clamped_mu_diamond(r), 1e-11).unwrap();
    assert!(sup_diff(&a.mu, &b.mu) < 1e-8);
    for f in [&a, &b] {
        assert!(f.residual_max <= 1e-11);
        assert!(f.energy <= f.energy_zero);
        for w in f.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        assert_eq!(f.extremum_sign_violations(1e-9), 0);
    }
    let cell = d.h * d.h;
    let e0: f64 = d.w_plus_sq.iter().zip(&d.w_minus_sq).map(|(p, m)| 0.25 * r * r * (p + m) * cell).sum();
    assert!((a.energy_zero - e0).abs() < 1e-10 * e0);
}

#[test]
fn two_regimes_at_r40() {
    let d = build_synthetic_q(&ZeroSpec::default()).unwrap();
    let f40 = solve_mu(&d, 40.0, &zero_field(&d), 1e-11).unwrap();
    let f20 = solve_mu(&d, 20.0, &zero_field(&d), 1e-11).unwrap();
    let rep40 = two_regime_report(&f40).unwrap();
    let rep20 = two_regime_report(&f20).unwrap();
    assert!(rep40.decay.slope < 0.0 && rep40.decay.r_squared >= 0.85);
    let rel = (rep40.decay.slope - rep20.decay.slope).abs() / rep40.decay.slope.abs();
    assert!(rel < 0.25, "slopes {} {}", rep20.decay.slope, rep40.decay.slope);

    let theta_max = d.theta_dist.iter().copied().fold(0.0, f64::max);
    let far =
        (0..d.n * d.n).filter(|&k| d.theta_dist[k] > 0.5 * theta_max).map(|k| f40.eta[k].abs()).fold(0.0, f64::max);
    let at_zero = f40.mu[d.zeros[0].node].abs();
    assert!(far * 1e3 < at_zero, "far {far:e} zero {at_zero}");

    for (a, b) in rep20.near_zero.iter().zip(&rep40.near_zero) {
        assert!((a.value - b.value).abs() < 0.05);
        assert!((b.value - b.predicted).abs() < 0.1);
    }
    let json = vw_core::report::to_json(&rep40);
    assert!(json.contains("r_squared"));
}

#[test]
fn swap_and_translation_symmetry() {
    let d = build_synthetic_q(&ZeroSpec::checkerboard(128)).unwrap();
    let tol = 1e-11;
    for r in [10.0, 40.0] {
        assert!(swap_symmetry_check(&d, r, tol).unwrap() <= 2.0 * tol);
        let f = solve_mu(&d, r, &zero_field(&d), tol).unwrap();
        assert!(translation_antisymmetry(&f, d.n / 2, 0) <= 2.0 * tol);
        assert!(translation_antisymmetry(&f, 0, d.n / 2) <= 2.0 * tol);
    }
}

#[test]
fn mesh_convergence_is_second_order() {
    let r = 10.0;
    let sizes = [64usize, 128, 256];
    let fields: Vec<(usize, Vec<f64>)> = sizes
        .iter()
        .map(|&n| {
            let d = build_synthetic_q(&ZeroSpec::checkerboard(n)).unwrap();
            (n, solve_mu(&d, r, &zero_field(&d), 1e-12).unwrap().mu)
        })
        .collect();
    let diff = |c: &(usize, Vec<f64>), f: &(usize, Vec<f64>)| {
        let (m, n) = (c.0, f.0);
        let mut w: f64 = 0.0;
        for j in 0..m {
            for i in 0..m {
                w = w.max((c.1[i + m * j] - f.1[2 * i + n * 2 * j]).abs());
            }
        }
        w
    };
    let d1 = diff(&fields[0], &fields[1]);
    let d2 = diff(&fields[1], &fields[2]);
    let order = (d1 / d2).log2();
    assert!(order >= 1.8, "order {order}");
}

#[test]
fn csv_header_lists_zeros() {
    let d = build_synthetic_q(&ZeroSpec::checkerboard(32)).unwrap();
    let f = solve_mu(&d, 4.0, &zero_field(&d), 1e-11).unwrap();
    let csv = f.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# n=32"));
    assert!(lines.next().unwrap().starts_with("# r="));
    assert!(lines.next().unwrap().starts_with("# zeros_plus=("));
    assert!(lines.next().unwrap().starts_with("# zeros_minus=("));
    assert_eq!(lines.next(), Some("i,j,x,y,mu,eta"));
    assert_eq!(csv.lines().count(), 5 + 32 * 32);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_placements_satisfy_invariants(
        px in 0usize..8, py in 0usize..8, qx in 0usize..8, qy in 0usize..8, shift in 0usize..4,
    ) {
        // Zeros on a coarse lattice of spacing 12 cells on a 96 grid.
        let n = 96;
        let h = 2.0 * PI / n as f64;
        let at = |i: usize, j: usize| [(12 * i + shift) as f64 * h, (12 * j) as f64 * h];
        let mut cells = vec![(px, py), (qx, qy), ((px + 4) % 8, (py + 4) % 8), ((qx + 4) % 8, (qy + 4) % 8)];
        cells.sort();
        cells.dedup();
        prop_assume!(cells.len() == 4);
        let spec = ZeroSpec {
            n,
            zeros_plus: vec![at(px, py), at((px + 4) % 8, (py + 4) % 8)],
            zeros_minus: vec![at(qx, qy), at((qx + 4) % 8, (qy + 4) % 8)],
            cap: 1.5,
        };
        let d = build_synthetic_q(&spec).unwrap();
        for k in 0..n * n {
            let q2 = d.q_abs[k] * d.q_abs[k];
            prop_assert!((d.w_plus_sq[k] * d.w_minus_sq[k] - q2).abs() <= 1e-12 * q2.max(1.0));
            prop_assert!(d.theta_dist[k] >= 0.0 && d.theta_dist[k] <= d.cap);
        }
        let f = solve_mu(&d, 8.0, &zero_field(&d), 1e-11).unwrap();
        prop_assert!(f.energy <= f.energy_zero);
        let g = solve_mu(&d, 8.0, &d.clamped_mu_diamond(8.0), 1e-11).unwrap();
        prop_assert!(sup_diff(&f.mu, &g.mu) < 1e-8);
        let s = swap_symmetry_check(&d, 8.0, 1e-11).unwrap();
        prop_assert!(s <= 2e-11);
    }
}
