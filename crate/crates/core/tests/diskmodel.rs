use num_complex::Complex64;
use std::sync::OnceLock;
use std::time::Instant;
use vw_core::diskmodel::*;
use vw_core::fiducial::{solve_fiducial_with, FiducialOptions};
use vw_core::grid::GridSpec;
use vw_core::xi::{xi_from_f, Sign, XiProfile};

fn xi1() -> &'static XiProfile {
    static XI: OnceLock<XiProfile> = OnceLock::new();
    XI.get_or_init(|| xi_from_f(&model_profile(1.0).unwrap(), Sign::ThetaPlus))
}

fn xi_fine() -> &'static XiProfile {
    static XI: OnceLock<XiProfile> = OnceLock::new();
    XI.get_or_init(|| {
        let sol =
            solve_fiducial_with(1.0, GridSpec::default().halved(), 1e-10, FiducialOptions::extrapolated()).unwrap();
        xi_from_f(&sol, Sign::ThetaPlus)
    })
}

/// Least-squares line through `(x, y)`: slope and R^2.
fn fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

#[test]
fn remainder_decays_exponentially_in_r() {
    let rs = [4.0, 6.0, 8.0, 10.0];
    let mut sup = Vec::new();
    for &r in &rs {
        let t = Instant::now();
        let d = solve_v_disk(r, 1.0, 1.0).unwrap();
        assert!(t.elapsed().as_secs_f64() < 10.0);
        assert!(d.residual <= DISK_TOL);
        assert!(d.sup_y.is_finite());
        sup.push(d.sup_y);
    }
    assert!(sup[3] < 1e-3);
    for w in sup.windows(2) {
        assert!(w[1] <= 0.5 * w[0], "{sup:?}");
    }
    let logs: Vec<f64> = sup.iter().map(|v| v.ln()).collect();
    let (slope, r2) = fit(&rs, &logs);
    assert!(slope < 0.0 && r2 >= 0.9, "slope {slope}, R^2 {r2}");
}

#[test]
fn disk_boundary_and_energy() {
    for r0 in [1.0, 0.5] {
        let d = solve_v_disk(6.0, 1.0, r0).unwrap();
        assert_eq!(*d.v.last().unwrap() + 0.5 * r0.ln(), 0.0);
        assert!(d.energies.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(d.grid.s_max(), r0);
        assert_eq!(d.alpha, 36.0);
    }
    let csv = solve_v_disk(4.0, 1.0, 1.0).unwrap().to_csv();
    assert_eq!(csv.lines().next(), Some("s,v,y"));
}

#[test]
fn disk_rejects_bad_params() {
    assert!(matches!(solve_v_disk(1.0, 1.0, 1.0), Err(DiskError::BadParams(_))));
    assert!(matches!(solve_v_disk(4.0, 1.0, 1.5), Err(DiskError::BadParams(_))));
    assert!(matches!(solve_v_disk(4.0, -1.0, 1.0), Err(DiskError::BadParams(_))));
    assert!(matches!(solve_v_disk(4.0, 1.0, 0.0), Err(DiskError::BadParams(_))));
}

#[test]
fn exact_modes_converge_at_second_order() {
    for k in [-1, 0, 1, 2, 3] {
        let s_min = if k == -1 { 0.05 } else { 0.0 };
        let coarse = verify_exact_mode(xi1(), k, s_min).unwrap();
        let fine = verify_exact_mode(xi_fine(), k, s_min).unwrap();
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "k = {k}: ratio {ratio}");
        assert!(ratio.log2() >= 1.8);
    }
}

#[test]
fn laurent_coefficients() {
    let res = verify_exact_mode(xi1(), 1, 0.0).unwrap();
    assert!(res < 1e-4);
    assert_eq!(mode_coefficient(0), 1.0);
    assert_eq!(mode_coefficient(1), 0.6);
    assert_eq!(mode_coefficient(2), 3.0 / 7.0);
    assert_eq!(mode_coefficient(-1), 3.0);
}

#[test]
fn mode_input_validation() {
    assert!(matches!(verify_exact_mode(xi1(), -2, 0.1), Err(DiskError::BadParams(_))));
    assert!(matches!(verify_exact_mode(xi1(), -1, 0.0), Err(DiskError::BadParams(_))));
    assert!(matches!(verify_exact_mode(xi1(), 1, 0.1), Err(DiskError::BadParams(_))));
    let minus = xi_from_f(&xi1().source, Sign::ThetaMinus);
    assert!(matches!(verify_exact_mode(&minus, 0, 0.0), Err(DiskError::Xi(_))));
}

#[test]
fn bvp_matches_exact_model() {
    let one = Complex64::new(1.0, 0.0);
    for k in [0u32, 1, 2] {
        let m = solve_mode_bvp(xi1(), k, one).unwrap();
        let est = m.discretization_estimate.unwrap();
        assert!(m.deviation <= 5.0 * est, "k = {k}: {} vs {est}", m.deviation);
        if k >= 1 {
            assert_eq!(m.h[0], 0.0);
        }
        let s = m.grid.nodes();
        let half = 0.5 * m.r0;
        let lo = if k == 0 { 0.0 } else { 0.1 };
        for i in 0..s.len() {
            if s[i] >= lo && s[i] <= half {
                let ratio = m.h[i] / (s[i].powi(k as i32) * xi1().xi[i]);
                assert!((ratio - mode_coefficient(k as i32)).abs() <= 1e-3, "k = {k}, s = {}", s[i]);
            }
        }
    }
}

#[test]
fn bvp_is_linear_in_amplitude() {
    let m1 = solve_mode_bvp(xi1(), 1, Complex64::new(1.0, 0.0)).unwrap();
    let m2 = solve_mode_bvp(xi1(), 1, Complex64::new(2.0, 0.0)).unwrap();
    for (a, b) in m1.h.iter().zip(&m2.h) {
        assert!((b - 2.0 * a).abs() <= 1e-14 * a.abs().max(1e-300));
    }
    let mi = solve_mode_bvp(xi1(), 1, Complex64::new(0.0, 1.0)).unwrap();
    assert_eq!(mi.h, m1.h);
    assert_eq!(mi.amplitude(), Complex64::new(0.0, 1.0));
    assert_eq!(m1.to_csv().lines().next(), Some("s,h,exact,deviation"));
}

#[test]
fn disk_potential_changes_modes_by_a_small_amount() {
    let d = solve_v_disk(10.0, 0.01, 1.0).unwrap();
    let effect = mode_potential_effect(xi1(), 0, &d).unwrap();
    assert!(effect.is_finite() && effect < 0.1);
}

#[test]
fn sigma3_profile() {
    let m = sigma3_mode(xi1()).unwrap();
    assert_eq!(m.c[0], 1.0 / 6.0);
    assert!(m.residual <= 1e-6);
    assert!(m.c.iter().all(|&c| c >= 0.0));
    assert!(m.c.windows(2).all(|w| w[1] <= w[0]));
}
