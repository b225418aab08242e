//! Browser bindings for three `vw-core` computations. Each returns a JSON
//! string for the page in `www/` to render.

use serde::Serialize;
use vw_core::bands::{assemble_band_model_with, band_report, BAND_SEED};
use vw_core::diskmodel::solve_v_disk;
use vw_core::fiducial::{decay_fit_with_prefactor, solve_fiducial_with, FiducialOptions, WKB_RATE};
use vw_core::grid::GridSpec;
use vw_core::report::{to_json, IdentityRecord};
use vw_core::xi::{lemma73_report, pairing_integral_k0, pairing_integral_km1, xi_from_f, Sign, XiProfile};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct FiducialSummary {
    pub alpha: f64,
    pub f0: f64,
    pub decay_slope: f64,
    pub wkb_rate: f64,
    pub z1: f64,
    pub identities: Vec<IdentityRecord>,
    /// Every fourth node as `(s, f, xi)`, for plotting.
    pub profile: Vec<[f64; 3]>,
}

#[derive(Serialize)]
pub struct DiskSummary {
    pub r: f64,
    pub alpha: f64,
    pub sup_y: f64,
    pub newton_iterations: usize,
    /// `(s, y)` at every node.
    pub y: Vec<[f64; 2]>,
}

#[derive(Serialize)]
pub struct BandSummary {
    pub g: usize,
    pub r: f64,
    pub eigenvalues: Vec<f64>,
    pub small_band: usize,
    pub band_ratio: f64,
}

fn profile(alpha: f64) -> Result<XiProfile, String> {
    let s_max = (20.0 * alpha.powf(-1.0 / 3.0)).max(5.0);
    let sol = solve_fiducial_with(alpha, GridSpec::default().with_s_max(s_max), 1e-10, FiducialOptions::extrapolated())
        .map_err(|e| e.to_string())?;
    Ok(xi_from_f(&sol, Sign::ThetaPlus))
}

pub fn fiducial_summary(alpha: f64) -> Result<FiducialSummary, String> {
    let xi = profile(alpha)?;
    let sol = &xi.source;
    let c = alpha.powf(-1.0 / 3.0);
    let fit = decay_fit_with_prefactor(sol, [4.0 * c, 9.0 * c], 1.5, 0.75).map_err(|e| e.to_string())?;
    let lemma = lemma73_report(&xi).map_err(|e| e.to_string())?;
    let k0 = pairing_integral_k0(&xi).map_err(|e| e.to_string())?;
    let km1 = pairing_integral_km1(&xi).map_err(|e| e.to_string())?;
    let mut identities = lemma.records;
    identities.push(IdentityRecord::new("k0 pairing", k0.total.value, Some(vw_core::xi::K0_EXACT)));
    let s = xi.grid.nodes();
    let profile = (0..s.len()).step_by(4).map(|i| [s[i], sol.f[i], xi.xi[i]]).collect();
    Ok(FiducialSummary {
        alpha,
        f0: sol.f0,
        decay_slope: fit.slope / alpha.sqrt(),
        wkb_rate: WKB_RATE,
        z1: km1.normalized,
        identities,
        profile,
    })
}

pub fn disk_summary(r: f64, alpha1: f64) -> Result<DiskSummary, String> {
    let d = solve_v_disk(r, alpha1, 1.0).map_err(|e| e.to_string())?;
    Ok(DiskSummary {
        r,
        alpha: d.alpha,
        sup_y: d.sup_y,
        newton_iterations: d.newton_iterations,
        y: d.grid.nodes().iter().zip(&d.y).map(|(&s, &y)| [s, y]).collect(),
    })
}

/// `zK` at `alpha = 1`, computed once.
fn z_k() -> Result<f64, String> {
    use std::sync::OnceLock;
    static Z: OnceLock<Result<f64, String>> = OnceLock::new();
    Z.get_or_init(|| {
        let xi = profile(1.0)?;
        pairing_integral_km1(&xi).map(|p| p.normalized).map_err(|e| e.to_string())
    })
    .clone()
}

pub fn band_summary(g: usize, r: f64, m: f64, coupling: f64) -> Result<BandSummary, String> {
    let alphas: Vec<f64> = (0..(4 * g).saturating_sub(4)).map(|i| 1.0 + 0.25 * i as f64).collect();
    let model = assemble_band_model_with(g, r, m, &alphas, vw_core::xi::K0_EXACT, z_k()?, coupling, BAND_SEED)
        .map_err(|e| e.to_string())?;
    let rep = band_report(&model);
    Ok(BandSummary { g, r, small_band: rep.small_band, band_ratio: rep.band_ratio, eigenvalues: rep.eigenvalues })
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map(|v| to_json(&v)).map_err(|e| JsError::new(&e))
}

/// Fiducial profile, decay rate and integral identities for `alpha`.
#[wasm_bindgen(js_name = fiducial)]
pub fn fiducial_js(alpha: f64) -> Result<String, JsError> {
    js(fiducial_summary(alpha))
}

/// Departure of the unit-disk solution from the fiducial profile.
#[wasm_bindgen(js_name = disk)]
pub fn disk_js(r: f64, alpha1: f64) -> Result<String, JsError> {
    js(disk_summary(r, alpha1))
}

/// Sorted eigenvalues of the genus-`g` band model.
#[wasm_bindgen(js_name = bands)]
pub fn bands_js(g: usize, r: f64, m: f64, coupling: f64) -> Result<String, JsError> {
    js(band_summary(g, r, m, coupling))
}
