//! The experiments behind `vwlab run`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Display;

use vw_core::bands::{self, BandReport};
use vw_core::diskmodel;
use vw_core::fiducial::{self, DecayFit, FiducialOptions, FiducialSolution, WKB_RATE};
use vw_core::grid::GridSpec;
use vw_core::report::{csv_table, fmt_f64, to_json, IdentityRecord};
use vw_core::surface::{self, TwoRegimeReport, ZeroSpec};
use vw_core::xi::{self, Sign, XiProfile};

use crate::config::{Experiment, RunConfig};
use crate::output::{Outputs, Status, Table};
use crate::CliError;

/// Relative tolerance on the exact integral identities.
pub const IDENTITY_TOL: f64 = 1e-4;
/// Nominal tolerance of the raw decay-rate fit.
pub const DECAY_TOL: f64 = 0.03;
/// Tolerance of the decay fit once the `s^{-3/4}` prefactor is divided out.
pub const DECAY_PREFACTOR_TOL: f64 = 5e-3;

fn solver<E: Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Solver { context: context.to_string(), message: e.to_string() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

/// Least-squares slope and R^2.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (sxy / sxx, r2)
}

pub fn run_experiment(cfg: &RunConfig, experiment: Experiment) -> Result<Outputs, CliError> {
    let mut out = Outputs::default();
    match experiment {
        Experiment::Fiducial => fiducial_exp(cfg, &mut out)?,
        Experiment::Identities => identities_exp(cfg, &mut out)?,
        Experiment::Modes => modes_exp(cfg, &mut out)?,
        Experiment::Disk => disk_exp(cfg, &mut out)?,
        Experiment::Torus => torus_exp(cfg, &mut out)?,
        Experiment::Bands => bands_exp(cfg, &mut out)?,
        Experiment::Flow => flow_exp(cfg, &mut out)?,
        Experiment::FullSuite => {
            for e in Experiment::SINGLE {
                let sub = run_experiment(cfg, e)?;
                out.absorb(e.name(), sub);
            }
        }
    }
    Ok(out)
}

fn fiducial_options(cfg: &RunConfig) -> FiducialOptions {
    FiducialOptions { richardson: cfg.flag("richardson"), ..FiducialOptions::default() }
}

fn solve_profile(cfg: &RunConfig, out: &mut Outputs) -> Result<FiducialSolution, CliError> {
    let spec = GridSpec::default().with_s_max(cfg.real("s_max"));
    out.timed("fiducial solve", || {
        fiducial::solve_fiducial_with(cfg.real("alpha"), spec, cfg.real("tol"), fiducial_options(cfg))
    })
    .map_err(solver("fiducial solve"))
}

#[derive(Serialize)]
struct FiducialReport {
    alpha: f64,
    f0: f64,
    residual_max: f64,
    newton_iterations: usize,
    nodes: usize,
    window: [f64; 2],
    wkb_rate: f64,
    decay_raw: DecayFit,
    decay_prefactor: DecayFit,
    decay_linear_power: DecayFit,
    /// Slopes rescaled to `alpha = 1`.
    scaled_slope_raw: f64,
    scaled_slope_prefactor: f64,
}

fn fiducial_exp(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let sol = solve_profile(cfg, out)?;
    let alpha = sol.alpha;
    let c = alpha.powf(-1.0 / 3.0);
    let window = [4.0 * c, 9.0 * c];
    let raw = fiducial::decay_rate_fit(&sol, window).map_err(solver("decay fit"))?;
    let pre = fiducial::decay_fit_with_prefactor(&sol, window, 1.5, 0.75).map_err(solver("decay fit"))?;
    let lin = fiducial::decay_fit_power(&sol, window, 1.0).map_err(solver("decay fit"))?;
    let scale = alpha.sqrt();
    let report = FiducialReport {
        alpha,
        f0: sol.f0,
        residual_max: sol.residual_max,
        newton_iterations: sol.newton_iterations,
        nodes: sol.grid.len(),
        window,
        wkb_rate: WKB_RATE,
        decay_raw: raw,
        decay_prefactor: pre,
        decay_linear_power: lin,
        scaled_slope_raw: raw.slope / scale,
        scaled_slope_prefactor: pre.slope / scale,
    };
    let e_raw = rel(report.scaled_slope_raw, WKB_RATE);
    let e_pre = rel(report.scaled_slope_prefactor, WKB_RATE);
    out.check(
        "residual",
        Status::from_bool(sol.residual_max <= cfg.real("tol")),
        format!("max residual {:.2e}", sol.residual_max),
    );
    let raw_status = if e_raw <= DECAY_TOL {
        Status::Pass
    } else if e_pre <= DECAY_PREFACTOR_TOL {
        Status::KnownFail
    } else {
        Status::Fail
    };
    out.check(
        "decay_exponent_raw",
        raw_status,
        format!("slope {:.6} vs {WKB_RATE:.6}, rel {e_raw:.2e}, limit {DECAY_TOL}", report.scaled_slope_raw),
    );
    out.check(
        "decay_exponent_prefactor",
        Status::from_bool(e_pre <= DECAY_PREFACTOR_TOL),
        format!("slope {:.6}, rel {e_pre:.2e}", report.scaled_slope_prefactor),
    );
    out.check(
        "decay_power_comparison",
        Status::from_bool(lin.rss > raw.rss),
        format!("rss s^(3/2) {:.3e}, s^1 {:.3e}", raw.rss, lin.rss),
    );
    let mut table = Table::new(&["alpha", "f0", "slope_raw", "slope_prefactor"]);
    table.push(vec![fmt_f64(alpha), fmt_f64(sol.f0), fmt_f64(raw.slope), fmt_f64(pre.slope)]);
    out.table = Some(table);
    out.file("fiducial_profile.csv", sol.to_csv());
    out.file("fiducial.json", to_json(&report));
    Ok(())
}

#[derive(Serialize)]
struct IdentityReport {
    alpha: f64,
    identities: Vec<IdentityRecord>,
    km1_lower_density: f64,
    km1_lower_gradient: f64,
}

fn xi_profile(cfg: &RunConfig, out: &mut Outputs) -> Result<XiProfile, CliError> {
    let sol = solve_profile(cfg, out)?;
    Ok(xi::xi_from_f(&sol, Sign::ThetaPlus))
}

fn identities_exp(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let xi = xi_profile(cfg, out)?;
    let tol = cfg.real("quad_tol");
    let lemma =
        out.timed("lemma integrals", || xi::lemma73_report_with(&xi, tol)).map_err(solver("lemma integrals"))?;
    let k0 = xi::pairing_integral_k0_with(&xi, tol).map_err(solver("k = 0 pairing"))?;
    let km1 = xi::pairing_integral_km1_with(&xi, tol).map_err(solver("k = -1 pairing"))?;
    let mut records = lemma.records.clone();
    records.push(IdentityRecord::new("k0 pairing", k0.total.value, Some(xi::K0_EXACT)));
    for (i, name) in ["k0 bracket part", "k0 density part", "k0 gradient part"].iter().enumerate() {
        records.push(IdentityRecord::new(name, k0.parts[i].value, Some(xi::K0_PARTS_EXACT[i])));
    }
    records.push(IdentityRecord::new("k=-1 pairing / alpha^(2/3)", km1.normalized, None));
    let mut table = Table::new(&["name", "computed", "exact", "rel_err"]);
    for r in &records {
        if let (Some(e), Some(re)) = (r.exact, r.rel_err) {
            out.check(
                &r.name,
                Status::from_bool(re <= IDENTITY_TOL),
                format!("{:.10} vs {e:.10}, rel {re:.2e}", r.computed),
            );
        }
        table.push(vec![
            r.name.clone(),
            fmt_f64(r.computed),
            r.exact.map(fmt_f64).unwrap_or_default(),
            r.rel_err.map(fmt_f64).unwrap_or_default(),
        ]);
    }
    let v = km1.value.value;
    out.check(
        "k=-1 positivity and lower bounds",
        Status::from_bool(v > 0.0 && v >= km1.lower_density && v >= km1.lower_gradient),
        format!("{v:.8} >= {:.6}, {:.6}", km1.lower_density, km1.lower_gradient),
    );
    let report = IdentityReport {
        alpha: xi.alpha,
        identities: records,
        km1_lower_density: km1.lower_density,
        km1_lower_gradient: km1.lower_gradient,
    };
    out.table = Some(table);
    out.file("xi_profile.csv", csv_table(&["s", "xi", "xi_prime"], &[xi.grid.nodes(), &xi.xi, &xi.xi_prime]));
    out.file("identities.json", to_json(&report));
    Ok(())
}

#[derive(Serialize)]
struct ModeRecord {
    k: i64,
    residual: f64,
    residual_halved: f64,
    order: f64,
}

#[derive(Serialize)]
struct BvpRecord {
    k: u32,
    coefficient: f64,
    deviation: f64,
    discretization_estimate: f64,
    coefficient_error: f64,
}

#[derive(Serialize)]
struct ModesReport {
    exact_modes: Vec<ModeRecord>,
    bvp: Vec<BvpRecord>,
    sigma3_origin: f64,
    sigma3_residual: f64,
}

fn modes_exp(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let coarse = xi_profile(cfg, out)?;
    let spec = GridSpec::default().with_s_max(cfg.real("s_max")).halved();
    let fine_sol = out
        .timed("refined fiducial solve", || {
            fiducial::solve_fiducial_with(cfg.real("alpha"), spec, cfg.real("tol"), fiducial_options(cfg))
        })
        .map_err(solver("refined fiducial solve"))?;
    let fine = xi::xi_from_f(&fine_sol, Sign::ThetaPlus);
    let mut exact_modes = Vec::new();
    let mut table = Table::new(&["k", "residual", "residual_halved", "order"]);
    for &k in cfg.ints("mode_ks") {
        let k32 = i32::try_from(k)
            .map_err(|_| CliError::Solver { context: "modes".into(), message: format!("mode {k} out of range") })?;
        let s_min = if k < 0 { cfg.real("mode_s_min") } else { 0.0 };
        let a = diskmodel::verify_exact_mode(&coarse, k32, s_min).map_err(solver("exact mode"))?;
        let b = diskmodel::verify_exact_mode(&fine, k32, s_min).map_err(solver("exact mode"))?;
        let order = (a / b).log2();
        out.check(&format!("mode k={k} order"), Status::from_bool(order >= 1.8), format!("order {order:.3}"));
        table.push(vec![k.to_string(), fmt_f64(a), fmt_f64(b), fmt_f64(order)]);
        exact_modes.push(ModeRecord { k, residual: a, residual_halved: b, order });
    }
    let mut bvp = Vec::new();
    for &k in cfg.ints("bvp_ks") {
        let ku = u32::try_from(k).map_err(|_| CliError::Solver {
            context: "mode bvp".into(),
            message: format!("boundary value problems need k >= 0, got {k}"),
        })?;
        let m = diskmodel::solve_mode_bvp(&coarse, ku, Complex64::new(1.0, 0.0)).map_err(solver("mode bvp"))?;
        let s = m.grid.nodes();
        let lo = if ku == 0 { 0.0 } else { 0.1 };
        let mut coeff_err: f64 = 0.0;
        for i in 0..s.len() {
            if s[i] >= lo && s[i] <= 0.5 * m.r0 {
                let ratio = m.h[i] / (s[i].powi(ku as i32) * coarse.xi[i]);
                coeff_err = coeff_err.max((ratio - m.predicted_coeff).abs());
            }
        }
        let est = m.discretization_estimate.unwrap_or(f64::NAN);
        out.check(
            &format!("bvp k={k}"),
            Status::from_bool(m.deviation <= 5.0 * est && coeff_err <= 1e-3),
            format!("deviation {:.2e} vs estimate {est:.2e}, coefficient error {coeff_err:.2e}", m.deviation),
        );
        out.file(format!("mode_k{k}.csv"), m.to_csv());
        bvp.push(BvpRecord {
            k: ku,
            coefficient: m.predicted_coeff,
            deviation: m.deviation,
            discretization_estimate: est,
            coefficient_error: coeff_err,
        });
    }
    let s3 = diskmodel::sigma3_mode(&coarse).map_err(solver("sigma3 mode"))?;
    out.check(
        "sigma3 mode",
        Status::from_bool(s3.residual <= 1e-6 && (s3.c[0] - 1.0 / 6.0).abs() < 1e-15),
        format!("c(0) = {:.15}, residual {:.2e}", s3.c[0], s3.residual),
    );
    out.table = Some(table);
    out.file(
        "modes.json",
        to_json(&ModesReport { exact_modes, bvp, sigma3_origin: s3.c[0], sigma3_residual: s3.residual }),
    );
    Ok(())
}

#[derive(Serialize)]
struct DiskRecord {
    r: f64,
    alpha: f64,
    sup_y: f64,
    newton_iterations: usize,
    residual: f64,
}

#[derive(Serialize)]
struct DiskReport {
    alpha1: f64,
    r0: f64,
    solves: Vec<DiskRecord>,
    log_slope: Option<f64>,
    r_squared: Option<f64>,
}

fn disk_exp(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let alpha1 = cfg.real("disk_alpha1");
    let r0 = cfg.real("disk_r0");
    let mut solves = Vec::new();
    let mut table = Table::new(&["r", "sup_y", "newton_iterations", "residual"]);
    for &r in cfg.reals("disk_r_list") {
        let d = out
            .timed(&format!("disk solve r={r}"), || diskmodel::solve_v_disk(r, alpha1, r0))
            .map_err(solver("disk solve"))?;
        out.file(format!("disk_r{r}.csv"), d.to_csv());
        table.push(vec![fmt_f64(r), fmt_f64(d.sup_y), d.newton_iterations.to_string(), fmt_f64(d.residual)]);
        solves.push(DiskRecord {
            r,
            alpha: d.alpha,
            sup_y: d.sup_y,
            newton_iterations: d.newton_iterations,
            residual: d.residual,
        });
    }
    let rs: Vec<f64> = solves.iter().map(|s| s.r).collect();
    let logs: Vec<f64> = solves.iter().map(|s| s.sup_y.ln()).collect();
    let (mut log_slope, mut r_squared) = (None, None);
    if solves.len() >= 2 {
        let decreasing = solves.windows(2).all(|w| w[1].sup_y < w[0].sup_y);
        out.check("sup_y decreasing", Status::from_bool(decreasing), format!("{} solves", solves.len()));
    }
    if solves.len() >= 3 {
        let (slope, r2) = line_fit(&rs, &logs);
        out.check(
            "sup_y log-linear",
            Status::from_bool(slope < 0.0 && r2 >= 0.9),
            format!("slope {slope:.4}, R^2 {r2:.4}"),
        );
        log_slope = Some(slope);
        r_squared = Some(r2);
    }
    if let Some(s) = solves.iter().find(|s| s.r == 10.0) {
        out.check("sup_y at r=10", Status::from_bool(s.sup_y < 1e-3), format!("{:.3e}", s.sup_y));
    }
    out.table = Some(table);
    out.file("disk.json", to_json(&DiskReport { alpha1, r0, solves, log_slope, r_squared }));
    Ok(())
}

#[derive(Serialize)]
struct TorusReport {
    n: usize,
    r: f64,
    uniqueness: f64,
    near_zero_drift: f64,
    newton_iterations: usize,
    residual_max: f64,
    energy: f64,
    energy_zero: f64,
    at_r: TwoRegimeReport,
    at_half_r: TwoRegimeReport,
}

fn torus_exp(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let n = cfg.count("torus_n");
    let r = cfg.real("torus_r");
    let tol = cfg.real("torus_tol");
    let data = surface::build_synthetic_q(&ZeroSpec::checkerboard(n)).map_err(solver("torus data"))?;
    let zero = vec![0.0; n * n];
    let a = out.timed("torus solve", || surface::solve_mu(&data, r, &zero, tol)).map_err(solver("torus solve"))?;
    let b = out
        .timed("torus solve from clamped mu_diamond", || surface::solve_mu(&data, r, &data.clamped_mu_diamond(r), tol))
        .map_err(solver("torus solve"))?;
    let half = out
        .timed("torus solve at r/2", || surface::solve_mu(&data, 0.5 * r, &zero, tol))
        .map_err(solver("torus solve"))?;
    let at_r = surface::two_regime_report(&a).map_err(solver("two-regime report"))?;
    let at_half_r = surface::two_regime_report(&half).map_err(solver("two-regime report"))?;
    let uniqueness = a.mu.iter().zip(&b.mu).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let near_zero_drift =
        at_half_r.near_zero.iter().zip(&at_r.near_zero).map(|(p, q)| (p.value - q.value).abs()).fold(0.0, f64::max);
    let prediction = at_r.near_zero.iter().map(|z| (z.value - z.predicted).abs()).fold(0.0, f64::max);
    out.check("uniqueness", Status::from_bool(uniqueness <= 1e-8), format!("sup difference {uniqueness:.2e}"));
    out.check(
        "near-zero stability",
        Status::from_bool(near_zero_drift < 0.05),
        format!("drift {near_zero_drift:.4} from r = {} to {r}", 0.5 * r),
    );
    out.check(
        "far-field decay fit",
        Status::from_bool(at_r.decay.slope < 0.0 && at_r.decay.r_squared >= 0.85),
        format!("slope {:.4}, R^2 {:.4}", at_r.decay.slope, at_r.decay.r_squared),
    );
    out.check(
        "near-zero prediction",
        Status::from_bool(prediction < 0.1),
        format!("max |value - predicted| {prediction:.4}"),
    );
    out.check(
        "minimizer",
        Status::from_bool(a.energy <= a.energy_zero),
        format!("energy {:.6} <= {:.6}", a.energy, a.energy_zero),
    );
    let mut table = Table::new(&["r", "slope", "r_squared", "uniqueness", "near_zero_drift"]);
    table.push(vec![
        fmt_f64(r),
        fmt_f64(at_r.decay.slope),
        fmt_f64(at_r.decay.r_squared),
        fmt_f64(uniqueness),
        fmt_f64(near_zero_drift),
    ]);
    out.table = Some(table);
    out.file("torus_field.csv", a.to_csv());
    out.file(
        "torus.json",
        to_json(&TorusReport {
            n,
            r,
            uniqueness,
            near_zero_drift,
            newton_iterations: a.newton_iters,
            residual_max: a.residual_max,
            energy: a.energy,
            energy_zero: a.energy_zero,
            at_r,
            at_half_r,
        }),
    );
    Ok(())
}

#[derive(Serialize)]
struct GenusBands {
    g: usize,
    reports: Vec<BandReport>,
    small_slope: Option<f64>,
    large_slope: Option<f64>,
    linear_in_m: bool,
}

#[derive(Serialize)]
struct BandsReport {
    z_c: f64,
    z_k: f64,
    m: f64,
    coupling: f64,
    seed: u64,
    genera: Vec<GenusBands>,
}

fn bands_exp(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    // The block constants come from the alpha = 1 integrals.
    let mut base = cfg.clone();
    base.set("alpha", "1").expect("alpha is a schema key");
    let xi1 = xi_profile(&base, out)?;
    let tol = cfg.real("quad_tol");
    let z_c = xi::pairing_integral_k0_with(&xi1, tol).map_err(solver("k = 0 pairing"))?.total.value;
    let z_k = xi::pairing_integral_km1_with(&xi1, tol).map_err(solver("k = -1 pairing"))?.normalized;
    let m = cfg.real("band_m");
    let coupling = cfg.real("band_coupling");
    let seed = cfg.seed();
    let rs = cfg.reals("band_r_list").to_vec();
    let mut genera = Vec::new();
    let mut table = Table::new(&["g", "r", "index", "eigenvalue"]);
    for &g in cfg.ints("genus_list") {
        let g = usize::try_from(g).map_err(|_| CliError::Solver {
            context: "band model".into(),
            message: format!("genus {g} is negative"),
        })?;
        let given = cfg.reals("alpha1_list");
        let alphas: Vec<f64> = (0..(4 * g).saturating_sub(4))
            .map(|i| if given.is_empty() { 1.0 + 0.25 * i as f64 } else { given[i % given.len()] })
            .collect();
        let mut reports = Vec::new();
        for &r in &rs {
            let model = bands::assemble_band_model_with(g, r, m, &alphas, z_c, z_k, coupling, seed)
                .map_err(solver("band model"))?;
            let rep = bands::band_report(&model);
            for (i, l) in rep.eigenvalues.iter().enumerate() {
                table.push(vec![g.to_string(), fmt_f64(r), i.to_string(), fmt_f64(*l)]);
            }
            reports.push(rep);
        }
        let counts = reports.iter().all(|b| b.small_band == 2 && b.large_band + 8 == 6 * g);
        out.check(&format!("g={g} band sizes"), Status::from_bool(counts), format!("2 and {}", 6 * g - 8));
        let (mut small_slope, mut large_slope) = (None, None);
        if rs.len() >= 2 {
            let small: Vec<f64> = reports.iter().map(|b| b.eigenvalues[..2].iter().sum::<f64>() / 2.0).collect();
            let large: Vec<f64> = reports
                .iter()
                .map(|b| b.eigenvalues[2..].iter().sum::<f64>() / (b.eigenvalues.len() - 2) as f64)
                .collect();
            let ss = bands::log_log_slope(&rs, &small);
            let sl = bands::log_log_slope(&rs, &large);
            out.check(&format!("g={g} small band slope"), Status::from_bool(rel(ss, -2.0) <= 0.05), format!("{ss:.4}"));
            out.check(
                &format!("g={g} large band slope"),
                Status::from_bool(rel(sl, -2.0 / 3.0) <= 0.05),
                format!("{sl:.4}"),
            );
            small_slope = Some(ss);
            large_slope = Some(sl);
        }
        let r = rs[0];
        let doubled = bands::band_report(
            &bands::assemble_band_model_with(g, r, 2.0 * m, &alphas, z_c, z_k, coupling, seed)
                .map_err(solver("band model"))?,
        );
        let linear_in_m = reports[0].eigenvalues.iter().zip(&doubled.eigenvalues).all(|(a, b)| 2.0 * a == *b);
        out.check(&format!("g={g} linear in m"), Status::from_bool(linear_in_m), format!("r = {r}"));
        genera.push(GenusBands { g, reports, small_slope, large_slope, linear_in_m });
    }
    out.table = Some(table.clone());
    out.file("bands.csv", table.to_csv());
    out.file("bands.json", to_json(&BandsReport { z_c, z_k, m, coupling, seed, genera }));
    Ok(())
}

#[derive(Serialize)]
struct FlowReport {
    seed: u64,
    weyl: bands::SuiteReport,
    split: bands::SplitSuiteReport,
    flows: bands::FlowSuiteReport,
    unit_flow: i64,
    unit_flow_reversed: i64,
    stages: bands::StageReport,
}

/// `D = [[0, B], [B, 0]]` with `B = diag(b)` and `Gamma = diag(1, -1)` blocks.
fn stage_model(b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = b.len();
    let gamma = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            0.0
        } else if i < n {
            1.0
        } else {
            -1.0
        }
    });
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for (i, &v) in b.iter().enumerate() {
        d[(i, n + i)] = v;
        d[(n + i, i)] = v;
    }
    (d, gamma)
}

fn flow_exp(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let seed = cfg.seed();
    let weyl = out.timed("weyl suite", || bands::weyl_suite(cfg.count("weyl_trials"), cfg.count("weyl_dim"), seed));
    let split = out.timed("block split suite", || {
        bands::block_split_suite(cfg.count("split_trials"), cfg.real("kappa"), seed.wrapping_add(1))
    });
    let flows = out
        .timed("flow suite", || {
            bands::flow_suite(
                cfg.count("flow_pairs"),
                cfg.count("flow_families"),
                cfg.count("flow_dim"),
                seed.wrapping_add(2),
            )
        })
        .map_err(solver("flow suite"))?;
    let unit =
        bands::FlowPath::sample(|t| DMatrix::from_element(1, 1, t - 0.5), 0.0, 1.0, 10).map_err(solver("unit path"))?;
    let unit_flow = bands::spectral_flow(&unit).map_err(solver("unit path"))?;
    let unit_flow_reversed = bands::spectral_flow(&unit.reversed()).map_err(solver("unit path"))?;
    let (d, gamma) = stage_model(&[0.05, 2.0, 3.0]);
    let eps = DMatrix::from_diagonal_element(6, 6, 0.2);
    let stages = bands::stage_path_flow(&d, &eps, &gamma, 10.0).map_err(solver("stage path"))?;
    out.check(
        "weyl",
        Status::from_bool(weyl.violations == 0),
        format!("{} violations in {} trials", weyl.violations, weyl.trials),
    );
    out.check(
        "block split",
        Status::from_bool(split.violations == 0 && split.halving_violations == 0),
        format!(
            "{} violations in {} trials, halving ratios {:.3} to {:.3}",
            split.violations, split.trials, split.halving_ratio[0], split.halving_ratio[1]
        ),
    );
    out.check(
        "homotopy invariance",
        Status::from_bool(flows.homotopy_mismatches == 0),
        format!("{} mismatches in {} pairs", flows.homotopy_mismatches, flows.homotopy_pairs),
    );
    out.check(
        "anticommuting families",
        Status::from_bool(flows.gamma_nonzero == 0),
        format!("{} nonzero flows in {} families", flows.gamma_nonzero, flows.gamma_families),
    );
    out.check(
        "reversal",
        Status::from_bool(unit_flow == 1 && unit_flow_reversed == -1 && flows.reversal_failures == 0),
        format!("{unit_flow} / {unit_flow_reversed}"),
    );
    out.check(
        "stage path",
        Status::from_bool(stages.pass),
        format!("stages {:?}, {} small eigenvalues", stages.stages, stages.small_eigenvalues),
    );
    let mut table = Table::new(&["suite", "trials", "failures"]);
    table.push(vec!["weyl".into(), weyl.trials.to_string(), weyl.violations.to_string()]);
    table.push(vec!["block_split".into(), split.trials.to_string(), split.violations.to_string()]);
    table.push(vec!["homotopy".into(), flows.homotopy_pairs.to_string(), flows.homotopy_mismatches.to_string()]);
    table.push(vec!["anticommuting".into(), flows.gamma_families.to_string(), flows.gamma_nonzero.to_string()]);
    out.table = Some(table);
    out.file("flow.json", to_json(&FlowReport { seed, weyl, split, flows, unit_flow, unit_flow_reversed, stages }));
    Ok(())
}
