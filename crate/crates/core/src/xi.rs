//! The profile `Xi = -/+ (2/3)(s f' + 1/2)` built from a fiducial solution,
//! the model densities, and the radial integrals of the linearized theory.
//!
//! Every planar integral is taken as `2 pi * int_0^inf (.) s ds`.

use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::fiducial::{self, FiducialSolution, WKB_RATE};
use crate::grid::RadialGrid;
use crate::quadrature::{cumulative, simpson_estimate, Quadrature};
use crate::radial::{self, Parity};
use crate::report::IdentityRecord;

/// Relative tolerance on the Richardson quadrature estimate.
pub const DEFAULT_QUAD_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XiError {
    #[error("operation requires the Theta+ convention")]
    WrongConvention,
    #[error("quadrature for {name} unconverged: estimate {estimate:e} exceeds {tol:e}")]
    QuadratureUnconverged { name: String, estimate: f64, tol: f64 },
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

/// Which set of zeros the profile describes; fixes the overall sign of `Xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    ThetaPlus,
    ThetaMinus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiProfile {
    pub grid: RadialGrid,
    pub xi: Vec<f64>,
    pub xi_prime: Vec<f64>,
    pub sign_convention: Sign,
    pub alpha: f64,
    #[serde(skip)]
    pub source: FiducialSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDensities {
    pub grid: RadialGrid,
    /// `|phi|^2 = (alpha/4)(e^{2v} s^2 + e^{-2v})`.
    pub phi_sq: Vec<f64>,
    /// `(alpha/2)(e^{2v} s^2 - e^{-2v})`, negative everywhere.
    pub bracket: Vec<f64>,
    /// `2 |phi|^2 + bracket = alpha e^{2v} s^2`, evaluated without cancellation.
    pub sum: Vec<f64>,
}

/// Builds `Xi` from `s f' + 1/2` written through the equation for `f`,
/// `(s f')' = s N` with `N = (alpha/2)(e^{2f} s^2 - e^{-2f})`: as
/// `1/2 + int_0^s t N` near the origin (exactly `1/2` at `s = 0`) and as
/// `-int_s^inf t N`, with `t N = alpha t^2 sinh(2u)`, in the far field. The
/// two agree to the accuracy of the profile and are joined by a smooth step
/// over `alpha^{1/3} s` in `[1.5, 2.5]`. Integrating instead of
/// differentiating keeps the rounding of `f` out of the derivatives of `Xi`.
pub fn xi_from_f(sol: &FiducialSolution, sign: Sign) -> XiProfile {
    let s = sol.grid.nodes();
    let n = s.len();
    let a = sol.alpha;
    let sgn = match sign {
        Sign::ThetaPlus => -1.0,
        Sign::ThetaMinus => 1.0,
    };
    let q: Vec<f64> = (0..n)
        .map(|i| {
            if i >= sol.first_u {
                a * s[i] * s[i] * (2.0 * sol.u[i]).sinh()
            } else {
                let f = sol.f[i];
                0.5 * a * s[i] * ((2.0 * f).exp() * s[i] * s[i] - (-2.0 * f).exp())
            }
        })
        .collect();
    let inner = cumulative(s, &q);
    let rs: Vec<f64> = s.iter().rev().copied().collect();
    let rq: Vec<f64> = q.iter().rev().copied().collect();
    let outer = cumulative(&rs, &rq);
    let t_scale = a.cbrt();
    let xi: Vec<f64> = (0..n)
        .map(|i| {
            let x = ((t_scale * s[i] - 1.5) / 1.0).clamp(0.0, 1.0);
            let w = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
            let near = 0.5 + inner[i];
            let far = outer[n - 1 - i];
            let v = if w == 0.0 {
                near
            } else if w == 1.0 {
                far
            } else {
                (1.0 - w) * near + w * far
            };
            sgn * (2.0 / 3.0) * v
        })
        .collect();
    let xi_prime = radial::differentiate(s, &xi, Parity::Even, 1);
    XiProfile { grid: sol.grid.clone(), xi, xi_prime, sign_convention: sign, alpha: sol.alpha, source: sol.clone() }
}

impl XiProfile {
    /// The potential `v_f(s) = f(alpha^{1/3} s) + ln(alpha)/6`, which is the
    /// source solution itself.
    pub fn v_f(&self, s: f64) -> Option<f64> {
        fiducial::eval_f(&self.source, s).ok().map(|p| p.0)
    }

    fn require_plus(&self) -> Result<(), XiError> {
        if self.sign_convention == Sign::ThetaPlus {
            Ok(())
        } else {
            Err(XiError::WrongConvention)
        }
    }

    /// Second derivative of `Xi` (used for `Xi'/s` at the origin).
    fn xi_second(&self) -> Vec<f64> {
        radial::differentiate(self.grid.nodes(), &self.xi, Parity::Even, 2)
    }
}

pub fn model_densities(xi: &XiProfile) -> Result<ModelDensities, XiError> {
    xi.require_plus()?;
    let src = &xi.source;
    let s = xi.grid.nodes();
    let a = xi.alpha;
    let n = s.len();
    let mut phi_sq = vec![0.0; n];
    let mut bracket = vec![0.0; n];
    let mut sum = vec![0.0; n];
    for i in 0..n {
        if i >= src.first_u {
            let u = src.u[i];
            phi_sq[i] = 0.5 * a * s[i] * (2.0 * u).cosh();
            bracket[i] = a * s[i] * (2.0 * u).sinh();
            sum[i] = a * s[i] * (2.0 * u).exp();
        } else {
            let f = src.f[i];
            let p = (2.0 * f).exp() * s[i] * s[i];
            let m = (-2.0 * f).exp();
            phi_sq[i] = 0.25 * a * (p + m);
            bracket[i] = 0.5 * a * (p - m);
            sum[i] = a * p;
        }
    }
    Ok(ModelDensities { grid: xi.grid.clone(), phi_sq, bracket, sum })
}

/// `max |bracket + (3/2) Xi'/s|` over nodes with `s > 0`.
pub fn bracket_identity_residual(xi: &XiProfile) -> Result<f64, XiError> {
    let d = model_densities(xi)?;
    let s = xi.grid.nodes();
    let mut worst: f64 = 0.0;
    for i in 1..s.len() - 1 {
        worst = worst.max((d.bracket[i] + 1.5 * xi.xi_prime[i] / s[i]).abs());
    }
    Ok(worst / xi.alpha.powf(2.0 / 3.0))
}

/// Residual of the linear equation satisfied by `Xi`,
/// `-(1/s)(s Xi')' + alpha(A + B) Xi - alpha(A - B)` with `A = e^{2v} s^2`,
/// `B = e^{-2v}`, using five-point derivatives, divided by `alpha^{2/3}`.
pub fn xi_equation_residual(xi: &XiProfile) -> Result<f64, XiError> {
    Ok(xi_equation_residuals(xi)?.iter().fold(0.0, |a: f64, b| a.max(b.abs())))
}

/// Per-node version of [`xi_equation_residual`] (last node excluded).
pub fn xi_equation_residuals(xi: &XiProfile) -> Result<Vec<f64>, XiError> {
    let d = model_densities(xi)?;
    let s = xi.grid.nodes();
    let d2 = xi.xi_second();
    let scale = xi.alpha.powf(2.0 / 3.0);
    Ok((0..s.len() - 1)
        .map(|i| {
            let lap = if i == 0 { 2.0 * d2[0] } else { d2[i] + xi.xi_prime[i] / s[i] };
            (-lap + 4.0 * d.phi_sq[i] * xi.xi[i] - 2.0 * d.bracket[i]) / scale
        })
        .collect())
}

/// Sign checks: `Xi Xi' <= 0` at interior nodes, `-3x(4 + 9x) >= 0` for
/// every sampled value, and `Xi` in `[-1/3, 0]` with `|Xi|` non-increasing
/// (strictly where `|Xi|` is above roundoff).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiShape {
    pub product_violations: usize,
    pub quadratic_violations: usize,
    pub range_violations: usize,
    pub monotone_violations: usize,
}

pub fn shape_checks(xi: &XiProfile) -> Result<XiShape, XiError> {
    xi.require_plus()?;
    let n = xi.xi.len();
    let mut out =
        XiShape { product_violations: 0, quadratic_violations: 0, range_violations: 0, monotone_violations: 0 };
    for i in 1..n - 1 {
        if xi.xi[i] * xi.xi_prime[i] > 0.0 {
            out.product_violations += 1;
        }
    }
    for i in 0..n {
        let x = xi.xi[i];
        if -3.0 * x * (4.0 + 9.0 * x) < 0.0 {
            out.quadratic_violations += 1;
        }
        if !(-1.0 / 3.0..=0.0).contains(&x) {
            out.range_violations += 1;
        }
        if i + 1 < n && xi.xi[i + 1].abs() > xi.xi[i].abs() {
            out.monotone_violations += 1;
        }
    }
    Ok(out)
}

/// `2 pi int g s ds` with a tail bound obtained from the decay rate.
fn planar(xi: &XiProfile, integrand: &[f64], decay_power: f64) -> Quadrature {
    let s = xi.grid.nodes();
    let weighted: Vec<f64> = integrand.iter().zip(s).map(|(g, x)| g * x).collect();
    let mut q = simpson_estimate(s, &weighted);
    q.tail_bound = tail_bound(xi, weighted[s.len() - 1].abs(), decay_power);
    q.scaled(2.0 * PI)
}

/// Bound on `int_S^inf g` for `g(s) ~ g(S) exp(-p k (s^{3/2} - S^{3/2}))`,
/// where `k` is the decay rate of `Xi` and `p` the power of `Xi` in `g`.
fn tail_bound(xi: &XiProfile, g_end: f64, power: f64) -> f64 {
    let s_end = xi.grid.s_max();
    let window = [4.0 * xi.alpha.powf(-1.0 / 3.0), 9.0 * xi.alpha.powf(-1.0 / 3.0)];
    let rate = fiducial::decay_rate_fit(&xi.source, window).map(|f| f.slope).unwrap_or(WKB_RATE * xi.alpha.sqrt());
    // d/ds of the exponent is 1.5 p k s^{1/2}; the bound is g(S) / that rate.
    g_end / (1.5 * power * rate * s_end.sqrt())
}

fn check(name: &str, q: Quadrature, tol: f64) -> Result<Quadrature, XiError> {
    let rel = q.total_error() / q.value.abs().max(f64::MIN_POSITIVE);
    if rel > tol || !q.value.is_finite() {
        return Err(XiError::QuadratureUnconverged { name: name.into(), estimate: rel, tol });
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma73Report {
    pub xi0: f64,
    pub i_dxi: Quadrature,
    pub i_phixi: Quadrature,
    /// `I_dxi + 4 I_phixi`.
    pub combination: f64,
    pub records: Vec<IdentityRecord>,
}

pub const XI0_EXACT: f64 = -1.0 / 3.0;
pub const I_DXI_EXACT: f64 = 17.0 * PI / 162.0;
pub const I_PHIXI_EXACT: f64 = 37.0 * PI / 648.0;
pub const COMBINATION_EXACT: f64 = PI / 3.0;
pub const K0_EXACT: f64 = 17.0 * PI / 324.0;
pub const K0_PARTS_EXACT: [f64; 3] =
    [-(2.0 * PI / 18.0) * (19.0 / 24.0), (2.0 * PI / 18.0) * (37.0 / 36.0), (2.0 * PI / 18.0) * (17.0 / 72.0)];

pub fn lemma73_report(xi: &XiProfile) -> Result<Lemma73Report, XiError> {
    lemma73_report_with(xi, DEFAULT_QUAD_TOL)
}

pub fn lemma73_report_with(xi: &XiProfile, tol: f64) -> Result<Lemma73Report, XiError> {
    xi.require_plus()?;
    if xi.grid.s_max() < 15.0 * xi.alpha.powf(-1.0 / 3.0) * (1.0 - 1e-12) {
        return Err(XiError::BadParams("s_max below 15 alpha^(-1/3)".into()));
    }
    let d = model_densities(xi)?;
    let g1: Vec<f64> = xi.xi_prime.iter().map(|x| x * x).collect();
    let g2: Vec<f64> = d.phi_sq.iter().zip(&xi.xi).map(|(p, x)| p * x * x).collect();
    let i_dxi = check("I_dxi", planar(xi, &g1, 2.0), tol)?;
    let i_phixi = check("I_phixi", planar(xi, &g2, 2.0), tol)?;
    let combination = i_dxi.value + 4.0 * i_phixi.value;
    let xi0 = xi.xi[0];
    let records = vec![
        IdentityRecord::new("xi0", xi0, Some(XI0_EXACT)),
        IdentityRecord::new("I_dxi", i_dxi.value, Some(I_DXI_EXACT)),
        IdentityRecord::new("I_phixi", i_phixi.value, Some(I_PHIXI_EXACT)),
        IdentityRecord::new("I_dxi + 4 I_phixi", combination, Some(COMBINATION_EXACT)),
    ];
    Ok(Lemma73Report { xi0, i_dxi, i_phixi, combination, records })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairingK0 {
    pub total: Quadrature,
    /// Bracket term, density term, gradient term.
    pub parts: [Quadrature; 3],
}

pub fn pairing_integral_k0(xi: &XiProfile) -> Result<PairingK0, XiError> {
    pairing_integral_k0_with(xi, DEFAULT_QUAD_TOL)
}

pub fn pairing_integral_k0_with(xi: &XiProfile, tol: f64) -> Result<PairingK0, XiError> {
    let d = model_densities(xi)?;
    let n = xi.xi.len();
    let mut p1 = vec![0.0; n];
    let mut p2 = vec![0.0; n];
    let mut p3 = vec![0.0; n];
    for i in 0..n {
        let x = xi.xi[i];
        p1[i] = -0.5 * (x + x * x * x) * d.bracket[i];
        p2[i] = 2.0 * d.phi_sq[i] * x * x;
        p3[i] = 0.25 * xi.xi_prime[i] * xi.xi_prime[i];
    }
    let total: Vec<f64> = (0..n).map(|i| p1[i] + p2[i] + p3[i]).collect();
    Ok(PairingK0 {
        total: check("k0 pairing", planar(xi, &total, 2.0), tol)?,
        parts: [
            check("k0 bracket part", planar(xi, &p1, 2.0), tol)?,
            check("k0 density part", planar(xi, &p2, 2.0), tol)?,
            check("k0 gradient part", planar(xi, &p3, 2.0), tol)?,
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairingKm1 {
    pub value: Quadrature,
    /// Value divided by `alpha^{2/3}`.
    pub normalized: f64,
    /// `2 pi (3/2) int Xi^2 (2|phi|^2 + bracket) / s ds`.
    pub lower_density: f64,
    /// `2 pi (3/2) int (Xi')^2 / s ds`.
    pub lower_gradient: f64,
    /// The integrated-by-parts form, which should reproduce `value`.
    pub by_parts: f64,
}

pub fn pairing_integral_km1(xi: &XiProfile) -> Result<PairingKm1, XiError> {
    pairing_integral_km1_with(xi, DEFAULT_QUAD_TOL)
}

pub fn pairing_integral_km1_with(xi: &XiProfile, tol: f64) -> Result<PairingKm1, XiError> {
    let d = model_densities(xi)?;
    let src = &xi.source;
    let s = xi.grid.nodes();
    let n = s.len();
    let d2 = xi.xi_second();
    let mut g = vec![0.0; n];
    let mut lo_d = vec![0.0; n];
    let mut lo_g = vec![0.0; n];
    let mut parts = vec![0.0; n];
    for i in 0..n {
        let x = xi.xi[i];
        // 1 + 3 Xi = -2 s v_f', divided by s; regular at the origin.
        let one3_over_s =
            if i >= src.first_u { (1.0 - 2.0 * s[i] * src.u_prime[i]) / s[i] } else { -2.0 * src.f_prime[i] };
        // (2|phi|^2 + bracket) / s^2 = alpha e^{2v}
        let sum_over_s2 =
            if i >= src.first_u { xi.alpha * (2.0 * src.u[i]).exp() / s[i] } else { xi.alpha * (2.0 * src.f[i]).exp() };
        let dxi_over_s = if i == 0 { d2[0] } else { xi.xi_prime[i] / s[i] };
        g[i] = -0.5 * x * one3_over_s * one3_over_s * d.bracket[i]
            + 3.0 * sum_over_s2 * x * x
            + 2.25 * dxi_over_s * dxi_over_s;
        // The lower bounds and the by-parts form carry ds, i.e. (.)/s against s ds.
        lo_d[i] = 1.5 * x * x * sum_over_s2;
        lo_g[i] = 1.5 * dxi_over_s * dxi_over_s;
        let one3 = one3_over_s * s[i];
        parts[i] = 3.0 * x * x * (1.0 - 0.5 * one3) * sum_over_s2 + 0.75 * (2.0 - 6.0 * x) * dxi_over_s * dxi_over_s;
    }
    let value = check("k=-1 pairing", planar(xi, &g, 2.0), tol)?;
    Ok(PairingKm1 {
        normalized: value.value / xi.alpha.powf(2.0 / 3.0),
        lower_density: planar(xi, &lo_d, 2.0).value,
        lower_gradient: planar(xi, &lo_g, 2.0).value,
        by_parts: planar(xi, &parts, 2.0).value,
        value,
    })
}

/// Smooth step equal to 1 on `(-inf, 1/4]` and 0 on `[3/4, inf)`.
pub fn chi(x: f64) -> f64 {
    fn psi(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp()
        } else {
            0.0
        }
    }
    let a = psi(0.75 - x);
    let b = psi(x - 0.25);
    a / (a + b)
}

pub fn chi_prime(x: f64) -> f64 {
    fn psi(t: f64) -> (f64, f64) {
        if t > 0.0 {
            let e = (-1.0 / t).exp();
            (e, e / (t * t))
        } else {
            (0.0, 0.0)
        }
    }
    let (a, da) = psi(0.75 - x);
    let (b, db) = psi(x - 0.25);
    // d/dx a = -da, d/dx b = db
    let den = a + b;
    if den == 0.0 {
        return 0.0;
    }
    (-da * den - a * (-da + db)) / (den * den)
}

/// Radial cutoff used by the telescoping check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Cutoff {
    Identity,
    /// Equal to 1 for `s <= inner`, 0 for `s >= outer`.
    Bump {
        inner: f64,
        outer: f64,
    },
}

impl Cutoff {
    fn eval(&self, s: f64) -> (f64, f64) {
        match *self {
            Cutoff::Identity => (1.0, 0.0),
            Cutoff::Bump { inner, outer } => {
                let w = outer - inner;
                let x = 0.25 + 0.5 * (s - inner) / w;
                (chi(x), 0.5 / w * chi_prime(x))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Telescoping {
    /// `2 pi int chi d/ds[(s Xi')^2] ds`.
    pub value: f64,
    /// `-2 pi int chi' (s Xi')^2 ds`, equal to `value` when the boundary terms vanish.
    pub by_parts: f64,
}

pub fn telescoping_check(xi: &XiProfile, cutoff: Cutoff) -> Result<Telescoping, XiError> {
    let s = xi.grid.nodes();
    let q: Vec<f64> = s.iter().zip(&xi.xi_prime).map(|(a, b)| (a * b) * (a * b)).collect();
    let dq = radial::differentiate(s, &q, Parity::Even, 1);
    let n = s.len();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for i in 0..n {
        let (c, dc) = cutoff.eval(s[i]);
        g[i] = c * dq[i];
        h[i] = -dc * q[i];
    }
    let value = 2.0 * PI * simpson_estimate(s, &g).value;
    let by_parts = 2.0 * PI * simpson_estimate(s, &h).value;
    if !value.is_finite() {
        return Err(XiError::BadParams("non-finite telescoping integrand".into()));
    }
    Ok(Telescoping { value, by_parts })
}
