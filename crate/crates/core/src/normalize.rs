//! Normalizing coordinate near a simple zero: given `q = u (1 + theta(u)) du^2`,
//! find `z = u (1 + beta(u))` with `z (dz/du)^2 = u (1 + theta)`, by iterating
//! the contraction `T` on truncated power series.
//!
//! Substituting `z` gives `beta + u beta' = c` with
//! `c = (1 + theta)^{1/2} (1 + beta)^{-1/2} - 1`; in coefficients
//! `(n + 1) b_n = c_n`.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 32;
/// Largest truncation order accepted.
pub const MAX_ORDER: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalizeError {
    #[error("truncation order {requested} exceeds the maximum {max}")]
    TruncationOverflow { requested: usize, max: usize },
    #[error("iteration is not contracting: step ratio {ratio}")]
    NotContracting { ratio: f64 },
    #[error("alpha must be nonzero")]
    ZeroAlpha,
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

/// `sum_{n=1}^N b_n u^n`, valid on `|u| <= radius`. `coeffs[0]` is `b_1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoly {
    #[serde(serialize_with = "serialize_coeffs")]
    pub coeffs: Vec<Complex64>,
    pub radius: f64,
}

fn serialize_coeffs<S: serde::Serializer>(c: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(c.len()))?;
    for z in c {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl SeriesPoly {
    pub fn zero(order: usize, radius: f64) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); order], radius }
    }

    /// Series with the given leading coefficients, zero-padded to `order`.
    pub fn from_coeffs(leading: &[Complex64], order: usize, radius: f64) -> Self {
        let mut s = Self::zero(order, radius);
        for (dst, src) in s.coeffs.iter_mut().zip(leading) {
            *dst = *src;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of `u^n`; zero for `n = 0` and beyond the truncation.
    pub fn coeff(&self, n: usize) -> Complex64 {
        if n == 0 || n > self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[n - 1]
        }
    }

    /// `sum |b_n| radius^n`, a bound for the sup norm on the disk.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(i, c)| c.norm() * self.radius.powi(i as i32 + 1)).sum()
    }

    pub fn eval(&self, u: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| (acc + c) * u)
    }

    pub fn eval_derivative(&self, u: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * u + c * (i as f64 + 1.0);
        }
        acc
    }

    fn minus(&self, other: &Self) -> Self {
        let n = self.order().max(other.order());
        Self { coeffs: (1..=n).map(|k| self.coeff(k) - other.coeff(k)).collect(), radius: self.radius }
    }

    /// Same coefficients truncated or zero-padded to `order`.
    pub fn with_order(&self, order: usize) -> Self {
        Self::from_coeffs(&self.coeffs, order, self.radius)
    }
}

/// Coefficients `p_0..p_N` of `(1 + a)^e` for a series `a` with `a_0 = 0`.
fn power_series(a: &SeriesPoly, e: f64, order: usize) -> Vec<Complex64> {
    let mut p = vec![Complex64::new(0.0, 0.0); order + 1];
    p[0] = Complex64::new(1.0, 0.0);
    for n in 1..=order {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 1..=n {
            acc += a.coeff(k) * p[n - k] * ((e + 1.0) * k as f64 - n as f64);
        }
        p[n] = acc / n as f64;
    }
    p
}

/// The series `c = (1 + theta)^{1/2} (1 + beta)^{-1/2} - 1` to the order of `theta`.
pub fn c_series(beta: &SeriesPoly, theta: &SeriesPoly) -> Vec<Complex64> {
    let n = theta.order();
    let s = power_series(theta, 0.5, n);
    let t = power_series(beta, -0.5, n);
    (1..=n).map(|k| (0..=k).map(|j| s[j] * t[k - j]).sum()).collect()
}

/// One application of `T`: `b_n <- c_n / (n + 1)`. The output has the order
/// and radius of `theta`.
pub fn contraction_step(beta: &SeriesPoly, theta: &SeriesPoly) -> Result<SeriesPoly, NormalizeError> {
    for order in [beta.order(), theta.order()] {
        if order > MAX_ORDER {
            return Err(NormalizeError::TruncationOverflow { requested: order, max: MAX_ORDER });
        }
    }
    let c = c_series(beta, theta);
    Ok(SeriesPoly { coeffs: c.iter().enumerate().map(|(i, v)| v / (i as f64 + 2.0)).collect(), radius: theta.radius })
}

/// `|T b1 - T b2| / |b1 - b2|` in the series norm.
pub fn contraction_ratio(b1: &SeriesPoly, b2: &SeriesPoly, theta: &SeriesPoly) -> Result<f64, NormalizeError> {
    let d = b1.minus(b2).norm();
    if d == 0.0 {
        return Ok(0.0);
    }
    let t1 = contraction_step(b1, theta)?;
    let t2 = contraction_step(b2, theta)?;
    Ok(t1.minus(&t2).norm() / d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalization {
    pub beta: SeriesPoly,
    pub iterations: usize,
    /// Largest ratio of successive step norms observed.
    pub contraction_factor: f64,
    /// `max_n |(n + 1) b_n - c_n| radius^n`.
    pub recursion_residual: f64,
}

const MAX_ITER: usize = 500;

pub fn normalize_coordinate(theta: &SeriesPoly, tol: f64) -> Result<Normalization, NormalizeError> {
    if !(tol > 0.0) {
        return Err(NormalizeError::BadParams(format!("tol = {tol}")));
    }
    if !(theta.radius > 0.0 && theta.radius.is_finite()) {
        return Err(NormalizeError::BadParams(format!("radius = {}", theta.radius)));
    }
    let mut beta = SeriesPoly::zero(theta.order(), theta.radius);
    let mut prev_step: Option<f64> = None;
    let mut factor: f64 = 0.0;
    for it in 1..=MAX_ITER {
        let next = contraction_step(&beta, theta)?;
        let step = next.minus(&beta).norm();
        beta = next;
        if let Some(p) = prev_step {
            // Ratios of roundoff-level steps carry no information.
            if p > 0.0 && step > 1e3 * f64::EPSILON * beta.norm().max(f64::MIN_POSITIVE) {
                let ratio = step / p;
                factor = factor.max(ratio);
                if ratio > 1.0 {
                    return Err(NormalizeError::NotContracting { ratio });
                }
            }
        }
        prev_step = Some(step);
        // Stop once the step is at the roundoff level of the iterate.
        if step <= 1e-3 * tol || step <= 4.0 * f64::EPSILON * beta.norm() {
            let residual = recursion_residual(&beta, theta);
            if residual > tol {
                return Err(NormalizeError::NotContracting { ratio: factor });
            }
            return Ok(Normalization {
                beta,
                iterations: it,
                contraction_factor: factor,
                recursion_residual: residual,
            });
        }
    }
    Err(NormalizeError::NotContracting { ratio: factor })
}

/// `max_n |(n + 1) b_n - c_n(b, theta)| radius^n`, each coefficient weighted
/// as in the series norm.
pub fn recursion_residual(beta: &SeriesPoly, theta: &SeriesPoly) -> f64 {
    let c = c_series(beta, theta);
    c.iter()
        .enumerate()
        .map(|(i, cn)| (beta.coeff(i + 1) * (i as f64 + 2.0) - cn).norm() * theta.radius.powi(i as i32 + 1))
        .fold(0.0, f64::max)
}

/// `max |z (dz/du)^2 - u (1 + theta)|` over `samples` points of `|u| = rho`,
/// with `z = u (1 + beta)`.
pub fn coordinate_residual(beta: &SeriesPoly, theta: &SeriesPoly, rho: f64, samples: usize) -> f64 {
    (0..samples)
        .map(|j| {
            let u = Complex64::from_polar(rho, 2.0 * PI * j as f64 / samples as f64);
            let b = beta.eval(u);
            let z = u * (1.0 + b);
            let dz = 1.0 + b + u * beta.eval_derivative(u);
            (z * dz * dz - u * (1.0 + theta.eval(u))).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseNormalization {
    pub alpha_positive: f64,
    /// `omega` with `u -> e^{i omega} u`.
    pub omega: f64,
    #[serde(skip)]
    pub rotation: Complex64,
}

/// Rotation `u -> e^{i omega} u` making `alpha e^{3 i omega}` positive, with
/// `omega` in `(-pi/3, pi/3]`.
pub fn alpha_phase_normalize(alpha: Complex64) -> Result<PhaseNormalization, NormalizeError> {
    if alpha.norm() == 0.0 || !alpha.is_finite() {
        return Err(NormalizeError::ZeroAlpha);
    }
    let mut omega = -alpha.arg() / 3.0;
    if omega <= -PI / 3.0 {
        omega += 2.0 * PI / 3.0;
    }
    Ok(PhaseNormalization { alpha_positive: alpha.norm(), omega, rotation: Complex64::from_polar(1.0, omega) })
}
