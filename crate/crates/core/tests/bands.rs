use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use vw_core::bands::*;

const Z_C: f64 = 17.0 * PI / 324.0;
const Z_K: f64 = 1.5610036415;

fn m1(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn swap2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

#[test]
fn weyl_examples() {
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
    let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.1, -0.1]));
    let rep = weyl_check(&s, &g).unwrap();
    assert!((rep.displacement - 0.1).abs() < 1e-15);
    assert!(!rep.violated);
    let zero = DMatrix::zeros(2, 2);
    assert_eq!(weyl_check(&s, &zero).unwrap().displacement, 0.0);
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(matches!(weyl_check(&asym, &zero), Err(BandsError::NotSymmetric(_))));
}

#[test]
fn weyl_suite_has_no_violations() {
    let rep = weyl_suite(1000, 8, 11);
    assert_eq!(rep.violations, 0);
    assert!(rep.worst <= 1.0 + 1e-12);
}

#[test]
fn block_split_examples() {
    let zero_l = BlockMatrix::new(m1(0.005), m1(2.0), DMatrix::zeros(1, 1)).unwrap();
    let rep = block_split_check(&zero_l, 4.0).unwrap();
    assert!(rep.pass && rep.max_distance() == 0.0);

    let two = BlockMatrix::new(m1(0.0), m1(1.0), m1(0.01)).unwrap();
    let rep = block_split_check(&two, 4.0).unwrap();
    assert!(rep.pass);
    // Closed form: (1 - sqrt(1 + 4 l^2)) / 2.
    let exact = 0.5 * (1.0 - (1.0f64 + 4e-4).sqrt());
    assert!(rep.small_distances[0] < 4e-4);
    assert!((rep.small_distances[0] - exact.abs()).abs() < 1e-15);

    let bad = BlockMatrix::new(m1(0.5), m1(2.0), m1(0.01)).unwrap();
    assert!(matches!(block_split_check(&bad, 4.0), Err(BandsError::HypothesisViolated(_))));
}

#[test]
fn block_split_suite_and_quadratic_shrinkage() {
    let rep = block_split_suite(1000, 4.0, 13);
    assert_eq!(rep.violations, 0);
    assert_eq!(rep.halving_violations, 0, "ratios {:?}", rep.halving_ratio);
    // The second-order bound with gap 3/4 is 4/3 |l|^2.
    assert!(rep.worst_ratio_to_bound <= 1.0 / 3.0 + 1e-9);
}

#[test]
fn band_counts_for_several_genera() {
    for g in [2usize, 3, 4] {
        let alphas: Vec<f64> = (0..4 * g - 4).map(|i| 0.5 + 0.1 * i as f64).collect();
        for coupling in [0.0, 1.0] {
            let model = assemble_band_model_with(g, 20.0, 0.01, &alphas, Z_C, Z_K, coupling, BAND_SEED).unwrap();
            assert_eq!(model.assembled.k, 6 * g - 6);
            let rep = band_report(&model);
            assert_eq!(rep.small_band, 2);
            assert_eq!(rep.large_band, 6 * g - 8);
            assert!(rep.min_eigenvalue > 0.0);
            assert!(rep.band_ratio >= 20f64.powf(4.0 / 3.0) / 10.0);
        }
    }
}

#[test]
fn band_slopes_in_r() {
    let rs = [10.0, 20.0, 40.0, 80.0];
    for g in [2usize, 3, 4] {
        let alphas: Vec<f64> = (0..4 * g - 4).map(|i| 1.0 + 0.25 * i as f64).collect();
        for coupling in [0.0, 1.0] {
            let reps: Vec<BandReport> = rs
                .iter()
                .map(|&r| band_report(&assemble_band_model_with(g, r, 0.01, &alphas, Z_C, Z_K, coupling, 3).unwrap()))
                .collect();
            let small: Vec<f64> = reps.iter().map(|b| b.eigenvalues[..2].iter().sum::<f64>() / 2.0).collect();
            let large: Vec<f64> = reps
                .iter()
                .map(|b| b.eigenvalues[2..].iter().sum::<f64>() / (b.eigenvalues.len() - 2) as f64)
                .collect();
            let s_small = log_log_slope(&rs, &small);
            let s_large = log_log_slope(&rs, &large);
            assert!((s_small + 2.0).abs() <= 0.1, "slope {s_small}");
            assert!((s_large + 2.0 / 3.0).abs() <= 0.05 * 2.0 / 3.0, "slope {s_large}");
        }
    }
}

#[test]
fn band_model_is_linear_in_m() {
    let alphas = [0.3, 0.7, 1.1, 2.0];
    let a = band_report(&assemble_band_model(2, 40.0, 0.01, &alphas, Z_C, Z_K).unwrap());
    let b = band_report(&assemble_band_model(2, 40.0, 0.02, &alphas, Z_C, Z_K).unwrap());
    for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
        assert_eq!(2.0 * x, *y);
    }
}

#[test]
fn band_model_rejects_bad_inputs() {
    assert!(matches!(
        assemble_band_model(2, 10.0, 0.01, &[1.0, 1.0, 1.0], Z_C, Z_K),
        Err(BandsError::BadDimensions(_))
    ));
    assert!(matches!(assemble_band_model(1, 10.0, 0.01, &[], Z_C, Z_K), Err(BandsError::BadDimensions(_))));
}

#[test]
fn elementary_flows() {
    let path = FlowPath::sample(|t| m1(t - 0.5), 0.0, 1.0, 10).unwrap();
    let rep = spectral_flow_report(&path).unwrap();
    assert_eq!(rep.flow, 1);
    assert_eq!(rep.crossings.len(), 1);
    assert!((rep.crossings[0].t - 0.5).abs() < 1e-6);
    assert_eq!(spectral_flow(&path.reversed()).unwrap(), -1);
    let kernel = FlowPath::sample(|t| m1(t), 0.0, 1.0, 4).unwrap();
    assert!(matches!(spectral_flow(&kernel), Err(BandsError::EndpointKernel { endpoint: 0, kernel_dim: 1 })));
}

#[test]
fn coarse_steps_are_rejected() {
    let f = |t: f64| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![t - 0.5, t - 0.45, t + 2.0]));
    let coarse = FlowPath::sample(f, 0.0, 1.0, 2).unwrap();
    assert!(matches!(spectral_flow(&coarse), Err(BandsError::StepTooCoarse { .. })));
    assert_eq!(flow_of_fn(f, 0.0, 1.0, 2).unwrap().flow, 2);
}

#[test]
fn gamma_pairing_examples() {
    let j = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let path = FlowPath::sample(|t| swap2() * (t - 0.5), 0.0, 1.0, 11).unwrap();
    assert_eq!(gamma_pairing_flow(&path, &j).unwrap(), 0);
    let onward = FlowPath::sample(|t| swap2() * (1.5 - t), 1.0, 2.0, 11).unwrap();
    let both = path.concat(&onward).unwrap();
    assert_eq!(gamma_pairing_flow(&both, &j).unwrap(), 0);
    let not_anti = FlowPath::sample(|t| DMatrix::identity(2, 2) * (t - 0.5), 0.0, 1.0, 11).unwrap();
    assert!(matches!(gamma_pairing_flow(&not_anti, &j), Err(BandsError::NotAnticommuting(_))));
}

#[test]
fn anticommuting_families_concatenate_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fam = AnticommutingFamily::random(&mut rng, 2);
    let j = fam.j();
    let first = adaptive_path(|t| fam.at(t), 0.0, 1.0, 32).unwrap();
    let second = adaptive_path(|t| fam.at(2.0 - t), 1.0, 2.0, 32).unwrap();
    let loop_path = first.concat(&second).unwrap();
    assert_eq!(gamma_pairing_flow(&loop_path, &j).unwrap(), 0);
}

#[test]
fn flow_suite_properties() {
    let rep = flow_suite(200, 200, 5, 17).unwrap();
    assert_eq!(rep.homotopy_mismatches, 0);
    assert_eq!(rep.reversal_failures, 0);
    assert_eq!(rep.gamma_nonzero, 0);
}

fn gamma_model(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i == j {
            if i < n {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    })
}

/// Symmetric `D = [[0, B], [B^T, 0]] + c` with `B` diagonal: eigenvalues `±b_i`,
/// plus a small commuting shift `c`.
fn d_model(b: &[f64], shift: f64) -> DMatrix<f64> {
    let n = b.len();
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for (i, &v) in b.iter().enumerate() {
        d[(i, n + i)] = v;
        d[(n + i, i)] = v;
        d[(i, i)] = shift;
        d[(n + i, n + i)] = shift;
    }
    d
}

#[test]
fn stage_path_examples() {
    let gamma = gamma_model(3);
    let d = d_model(&[1.5, 2.0, 3.0], 0.0);
    let zero = DMatrix::zeros(6, 6);
    let rep = stage_path_flow(&d, &zero, &gamma, 10.0).unwrap();
    assert_eq!(rep.total, 0);
    assert_eq!(rep.small_eigenvalues, 0);
    assert!(rep.pass);

    // Two small eigenvalues pushed to one side by a commuting shift.
    let d = d_model(&[0.05, 2.0, 3.0], 0.0);
    let eps = DMatrix::from_diagonal_element(6, 6, 0.2);
    let rep = stage_path_flow(&d, &eps, &gamma, 10.0).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.stages[2..], [0, 0, 0]);
    assert!(rep.total.unsigned_abs() as usize <= rep.small_eigenvalues);
    assert_eq!(rep.total, -1);

    let scaled = stage_path_flow(&(&d * 2.0), &(&eps * 2.0), &gamma, 20.0).unwrap();
    assert_eq!(scaled.stages, rep.stages);

    assert!(matches!(stage_path_flow(&d, &eps, &gamma, 1.0), Err(BandsError::BadParams(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_is_endpoint_inertia_difference(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_block_matrix(&mut rng, 2, 5, 0.3, 0.2);
        let a = m.assembled();
        let b = -a.clone() + DMatrix::from_diagonal_element(5, 5, 0.7);
        let rep = flow_of_fn(|t| &a * (1.0 - t) + &b * t, 0.0, 1.0, 16).unwrap();
        let neg = |x: &DMatrix<f64>| sorted_eigenvalues(x).iter().filter(|l| **l < 0.0).count() as i64;
        prop_assert_eq!(rep.flow, neg(&a) - neg(&b));
        let summed: i64 = rep.crossings.iter().map(|c| c.direction).sum();
        prop_assert_eq!(summed, rep.flow);
    }

    #[test]
    fn stage_flow_bounded_by_small_count(
        b in prop::collection::vec(0.01f64..3.0, 2..5),
        shift in -0.4f64..0.4,
        e in -0.4f64..0.4,
    ) {
        let n = b.len();
        let gamma = gamma_model(n);
        let d = d_model(&b, shift);
        let eps = DMatrix::from_diagonal_element(2 * n, 2 * n, e);
        let rep = stage_path_flow(&d, &eps, &gamma, 10.0);
        match rep {
            Ok(rep) => {
                prop_assert!(rep.pass);
                prop_assert_eq!(&rep.stages[2..], &[0, 0, 0]);
            }
            Err(BandsError::EndpointKernel { .. }) => {}
            Err(err) => prop_assert!(false, "{err}"),
        }
    }
}
