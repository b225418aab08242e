//! The flatness equation `-Delta mu + (r^2/2)(e^{2 mu} |w+|^2 - e^{-2 mu} |w-|^2) = 0`
//! on the flat torus `[0, 2 pi)^2`, with synthetic data built from theta
//! functions, solved by damped Newton with preconditioned conjugate gradients.
//!
//! Near the zeros the unknown is `mu`; elsewhere it is `eta = mu - mu_diamond`,
//! whose equation `-Delta eta + r^2 |q| sinh(2 eta) = 0` no longer carries the
//! truncation error of the singular harmonic `mu_diamond`. The far field is
//! then resolved down to its exponentially small size.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::fiducial::{self, FiducialError, FiducialOptions};
use crate::grid::GridSpec;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("zeros {a} and {b} are closer than 10 grid cells")]
    ZerosTooClose { a: usize, b: usize },
    #[error("invalid zero placement: {0}")]
    BadSpec(String),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("Newton iteration diverged: residual {residual:e} after {iterations} iterations")]
    NewtonDiverged { residual: f64, iterations: usize },
    #[error("Jacobian not positive definite (internal error)")]
    SingularJacobian,
    #[error("only {found} nodes in the fit window")]
    InsufficientNodes { found: usize },
    #[error(transparent)]
    Fiducial(#[from] FiducialError),
}

/// Zero placement on an `n x n` periodic grid. Zeros are snapped to nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSpec {
    pub n: usize,
    pub zeros_plus: Vec<[f64; 2]>,
    pub zeros_minus: Vec<[f64; 2]>,
    /// Value at which the distance proxy `theta_dist` saturates.
    pub cap: f64,
}

impl ZeroSpec {
    /// Two zeros of each kind on a checkerboard; translation by `(pi, 0)`
    /// exchanges the two sets.
    pub fn checkerboard(n: usize) -> Self {
        let a = 0.5 * PI;
        let b = 1.5 * PI;
        Self { n, zeros_plus: vec![[a, a], [b, b]], zeros_minus: vec![[b, a], [a, b]], cap: 1.5 }
    }
}

impl Default for ZeroSpec {
    fn default() -> Self {
        Self::checkerboard(256)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZeroKind {
    Plus,
    Minus,
}

/// One zero of `q1` with its local coefficients: `|w_own|^2 ~ a |z - p|^2`
/// and `|w_other|^2 -> b` at the zero, so `|q1| ~ sqrt(a b) |z - p|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSite {
    pub kind: ZeroKind,
    pub node: usize,
    pub position: [f64; 2],
    pub a: f64,
    pub b: f64,
    /// `sqrt(a b)`, the linear coefficient of `|q1|`.
    pub alpha1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusData {
    pub n: usize,
    /// Grid spacing `2 pi / n`.
    pub h: f64,
    #[serde(skip)]
    pub q1: Vec<Complex64>,
    pub q_abs: Vec<f64>,
    pub zeros: Vec<ZeroSite>,
    pub w_plus_sq: Vec<f64>,
    pub w_minus_sq: Vec<f64>,
    /// `-ln(|w+| / |w-|) / 2`; `+inf` at plus zeros and `-inf` at minus zeros.
    pub mu_diamond: Vec<f64>,
    pub theta_dist: Vec<f64>,
    pub cap: f64,
}

/// Theta function `theta_1(z | i)`.
fn theta1(z: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..8 {
        let e = (k as f64 + 0.5).powi(2);
        let term = (-PI * e).exp() * ((2 * k + 1) as f64 * z).sin();
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    2.0 * sum
}

/// `theta_1'(0 | i)`.
fn theta1_prime0() -> f64 {
    let mut sum = 0.0;
    for k in 0..8 {
        let e = (k as f64 + 0.5).powi(2);
        let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sgn * (2 * k + 1) as f64 * (-PI * e).exp();
    }
    2.0 * sum
}

/// Periodic factor with a simple zero at `p`: the theta function in the
/// lattice coordinate `w = (z - p) / (2 pi)`, reduced to `|Re w|, |Im w| <= 1/2`,
/// times `e^{-pi (Im w)^2}` so that its modulus is doubly periodic.
/// Returns the complex theta value and `ln` of the periodic modulus.
fn factor(x: f64, y: f64, p: [f64; 2]) -> (Complex64, f64) {
    let mut u = (x - p[0]) / TWO_PI;
    let mut v = (y - p[1]) / TWO_PI;
    u -= u.round();
    v -= v.round();
    let t = theta1(Complex64::new(PI * u, PI * v));
    let gauss = (-PI * v * v).exp();
    (t * gauss, t.norm().ln() - PI * v * v)
}

fn periodic_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let mut dx = (a[0] - b[0]).abs() % TWO_PI;
    let mut dy = (a[1] - b[1]).abs() % TWO_PI;
    dx = dx.min(TWO_PI - dx);
    dy = dy.min(TWO_PI - dy);
    dx.hypot(dy)
}

/// Distance capped smoothly at `cap`: identity below `cap / 2`, constant
/// `cap` above `3 cap / 2`, twice continuously differentiable.
fn soft_cap(d: f64, cap: f64) -> f64 {
    let x = d / cap;
    if x <= 0.5 {
        d
    } else if x >= 1.5 {
        cap
    } else {
        let y = x - 0.5;
        cap * (0.5 + y - (y.powi(6) - 3.0 * y.powi(5) + 2.5 * y.powi(4)))
    }
}

/// `mu_diamond` at an arbitrary point.
pub fn mu_diamond_at(data: &TorusData, x: f64, y: f64) -> f64 {
    let mut acc = 0.0;
    for z in &data.zeros {
        let (_, l) = factor(x, y, z.position);
        match z.kind {
            ZeroKind::Plus => acc -= 0.5 * l,
            ZeroKind::Minus => acc += 0.5 * l,
        }
    }
    acc
}

/// Laplacian of `mu_diamond` at a point: five-point differences at steps
/// `delta` and `delta / 2` combined to fourth order.
pub fn mu_diamond_laplacian(data: &TorusData, x: f64, y: f64, delta: f64) -> f64 {
    let five = |d: f64| {
        let c = mu_diamond_at(data, x, y);
        (mu_diamond_at(data, x + d, y)
            + mu_diamond_at(data, x - d, y)
            + mu_diamond_at(data, x, y + d)
            + mu_diamond_at(data, x, y - d)
            - 4.0 * c)
            / (d * d)
    };
    (4.0 * five(0.5 * delta) - five(delta)) / 3.0
}

pub fn build_synthetic_q(spec: &ZeroSpec) -> Result<TorusData, SurfaceError> {
    let n = spec.n;
    if n < 16 {
        return Err(SurfaceError::BadSpec(format!("grid size {n} below 16")));
    }
    if spec.zeros_plus.len() < 2 || spec.zeros_minus.len() < 2 {
        return Err(SurfaceError::BadSpec("need at least two zeros of each kind".into()));
    }
    if spec.zeros_plus.len() != spec.zeros_minus.len() {
        return Err(SurfaceError::BadSpec("plus and minus zero sets differ in size".into()));
    }
    if !(spec.cap > 0.0) {
        return Err(SurfaceError::BadSpec(format!("cap {}", spec.cap)));
    }
    let h = TWO_PI / n as f64;
    let snap = |p: [f64; 2]| -> (usize, [f64; 2]) {
        let i = ((p[0].rem_euclid(TWO_PI) / h).round() as usize) % n;
        let j = ((p[1].rem_euclid(TWO_PI) / h).round() as usize) % n;
        (i + n * j, [i as f64 * h, j as f64 * h])
    };
    let mut sites: Vec<(ZeroKind, usize, [f64; 2])> = Vec::new();
    for &p in &spec.zeros_plus {
        let (k, q) = snap(p);
        sites.push((ZeroKind::Plus, k, q));
    }
    for &p in &spec.zeros_minus {
        let (k, q) = snap(p);
        sites.push((ZeroKind::Minus, k, q));
    }
    for a in 0..sites.len() {
        for b in a + 1..sites.len() {
            if periodic_dist(sites[a].2, sites[b].2) < 10.0 * h - 1e-12 {
                return Err(SurfaceError::ZerosTooClose { a, b });
            }
        }
    }
    let size = n * n;
    let mut q1 = vec![Complex64::new(1.0, 0.0); size];
    let mut ln_plus = vec![0.0; size];
    let mut ln_minus = vec![0.0; size];
    let mut theta_dist = vec![0.0; size];
    for j in 0..n {
        for i in 0..n {
            let k = i + n * j;
            let (x, y) = (i as f64 * h, j as f64 * h);
            let mut dmin = f64::INFINITY;
            for (kind, node, p) in &sites {
                dmin = dmin.min(periodic_dist([x, y], *p));
                if *node == k {
                    q1[k] = Complex64::new(0.0, 0.0);
                    match kind {
                        ZeroKind::Plus => ln_plus[k] = f64::NEG_INFINITY,
                        ZeroKind::Minus => ln_minus[k] = f64::NEG_INFINITY,
                    }
                    continue;
                }
                let (c, l) = factor(x, y, *p);
                q1[k] *= c;
                match kind {
                    ZeroKind::Plus => ln_plus[k] += l,
                    ZeroKind::Minus => ln_minus[k] += l,
                }
            }
            theta_dist[k] = soft_cap(dmin, spec.cap);
        }
    }
    let w_plus_sq: Vec<f64> = ln_plus.iter().map(|l| (2.0 * l).exp()).collect();
    let w_minus_sq: Vec<f64> = ln_minus.iter().map(|l| (2.0 * l).exp()).collect();
    let q_abs: Vec<f64> = ln_plus.iter().zip(&ln_minus).map(|(a, b)| (a + b).exp()).collect();
    let mu_diamond: Vec<f64> = ln_plus
        .iter()
        .zip(&ln_minus)
        .map(|(&a, &b)| {
            if a == f64::NEG_INFINITY {
                f64::INFINITY
            } else if b == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                -0.5 * (a - b)
            }
        })
        .collect();
    // Local coefficients: the own factor behaves like theta_1'(0) |z - p| / 2.
    let slope = 0.5 * theta1_prime0();
    let zeros = sites
        .iter()
        .map(|&(kind, node, p)| {
            let mut own = 2.0 * slope.ln();
            let mut other = 0.0;
            for &(k2, n2, p2) in &sites {
                if n2 == node {
                    continue;
                }
                let (_, l) = factor(p[0], p[1], p2);
                if k2 == kind {
                    own += 2.0 * l;
                } else {
                    other += 2.0 * l;
                }
            }
            let (a, b) = (own.exp(), other.exp());
            ZeroSite { kind, node, position: p, a, b, alpha1: (a * b).sqrt() }
        })
        .collect();
    Ok(TorusData { n, h, q1, q_abs, zeros, w_plus_sq, w_minus_sq, mu_diamond, theta_dist, cap: spec.cap })
}

impl TorusData {
    /// The same data with the roles of the two zero sets exchanged.
    pub fn swapped(&self) -> Self {
        let mut out = self.clone();
        std::mem::swap(&mut out.w_plus_sq, &mut out.w_minus_sq);
        for m in out.mu_diamond.iter_mut() {
            *m = -*m;
        }
        for z in out.zeros.iter_mut() {
            z.kind = match z.kind {
                ZeroKind::Plus => ZeroKind::Minus,
                ZeroKind::Minus => ZeroKind::Plus,
            };
        }
        out
    }

    /// Periodic distance to the nearest zero, uncapped.
    pub fn zero_distance(&self, k: usize) -> f64 {
        let n = self.n;
        let p = [(k % n) as f64 * self.h, (k / n) as f64 * self.h];
        self.zeros.iter().map(|z| periodic_dist(p, z.position)).fold(f64::INFINITY, f64::min)
    }

    fn neighbours(&self, k: usize) -> [usize; 4] {
        let n = self.n;
        let (i, j) = (k % n, k / n);
        [(i + 1) % n + n * j, (i + n - 1) % n + n * j, i + n * ((j + 1) % n), i + n * ((j + n - 1) % n)]
    }

    /// `mu_diamond` clamped to `[-L, L]` with `L = ln(r) / 3 + 1`, a finite
    /// starting field.
    pub fn clamped_mu_diamond(&self, r: f64) -> Vec<f64> {
        let l = r.ln() / 3.0 + 1.0;
        self.mu_diamond.iter().map(|m| m.clamp(-l, l)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusField {
    #[serde(skip)]
    pub data: TorusData,
    pub r: f64,
    pub mu: Vec<f64>,
    /// `mu - mu_diamond`; infinite at the zeros.
    pub eta: Vec<f64>,
    pub newton_iters: usize,
    pub cg_iters: usize,
    /// Discrete energy `sum_edges (d mu)^2 / 2 + h^2 sum (r^2/4)(e^{2 mu} w+^2 + e^{-2 mu} w-^2)`.
    pub energy: f64,
    /// The same energy at `mu = 0`.
    pub energy_zero: f64,
    /// Energy of the Newton functional after each accepted step.
    pub energies: Vec<f64>,
    pub residual_max: f64,
    /// Nodes carried as `mu` (the rest as `eta`).
    pub mu_form_nodes: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_newton: usize,
    pub max_cg: usize,
    /// Radius in units of `r^{-2/3}` within which the unknown is `mu`.
    pub mu_form_radius: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_newton: 100, max_cg: 5000, mu_form_radius: 2.0 }
    }
}

/// Discrete problem in mixed unknowns; all sums are per-node rows scaled by
/// the cell area, so the Jacobian is the graph Laplacian plus a diagonal.
struct Problem<'a> {
    data: &'a TorusData,
    r2: f64,
    mu_form: Vec<bool>,
    cell: f64,
}

impl<'a> Problem<'a> {
    fn new(data: &'a TorusData, r: f64, radius: f64) -> Self {
        // At least the zero and its neighbours, so that no eta row sees an
        // infinite mu_diamond.
        let rho = (radius * r.powf(-2.0 / 3.0)).max(1.5 * data.h);
        let mu_form = (0..data.n * data.n).map(|k| data.zero_distance(k) < rho).collect();
        Self { data, r2: r * r, mu_form, cell: data.h * data.h }
    }

    fn to_mu(&self, y: &[f64], k: usize) -> f64 {
        if self.mu_form[k] {
            y[k]
        } else {
            y[k] + self.data.mu_diamond[k]
        }
    }

    fn from_mu(&self, mu: &[f64]) -> Vec<f64> {
        (0..mu.len()).map(|k| if self.mu_form[k] { mu[k] } else { mu[k] - self.data.mu_diamond[k] }).collect()
    }

    /// Neighbour value in the representation of row `k`.
    fn seen_from(&self, y: &[f64], nb: usize, k: usize) -> f64 {
        match (self.mu_form[k], self.mu_form[nb]) {
            (true, false) => y[nb] + self.data.mu_diamond[nb],
            (false, true) => y[nb] - self.data.mu_diamond[nb],
            _ => y[nb],
        }
    }

    /// Nonlinearity, its derivative and energy density at node `k`.
    fn local(&self, y: &[f64], k: usize) -> (f64, f64, f64) {
        let d = self.data;
        let r2 = self.r2;
        if self.mu_form[k] {
            let p = (2.0 * y[k]).exp() * d.w_plus_sq[k];
            let m = (-2.0 * y[k]).exp() * d.w_minus_sq[k];
            (0.5 * r2 * (p - m), r2 * (p + m), 0.25 * r2 * (p + m))
        } else {
            let q = d.q_abs[k];
            let e = 2.0 * y[k];
            (r2 * q * e.sinh(), 2.0 * r2 * q * e.cosh(), 0.5 * r2 * q * e.cosh())
        }
    }

    /// Area-weighted residual and Jacobian diagonal.
    fn residual(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let size = y.len();
        let mut r = vec![0.0; size];
        let mut diag = vec![0.0; size];
        for k in 0..size {
            let mut lap = 0.0;
            for nb in self.data.neighbours(k) {
                lap += self.seen_from(y, nb, k) - y[k];
            }
            let (nl, dnl, _) = self.local(y, k);
            r[k] = -lap + self.cell * nl;
            diag[k] = 4.0 + self.cell * dnl;
        }
        (r, diag)
    }

    fn scaled_residual(&self, y: &[f64]) -> f64 {
        let (r, d) = self.residual(y);
        r.iter().zip(&d).map(|(a, b)| (a / b).abs()).fold(0.0, f64::max)
    }

    /// Convex functional whose gradient is the residual: edges measured in
    /// `mu` where either end is in `mu` form, plus a linear term on the
    /// `eta` end of every mixed edge.
    fn energy(&self, y: &[f64]) -> f64 {
        let d = self.data;
        let mut e = 0.0;
        let edge = |m: usize, j: usize| {
            // `m` in mu form, `j` in eta form.
            let t = y[j] + d.mu_diamond[j] - y[m];
            0.5 * t * t + (d.mu_diamond[m] - d.mu_diamond[j]) * y[j]
        };
        for k in 0..y.len() {
            let nbs = d.neighbours(k);
            for nb in [nbs[0], nbs[2]] {
                e += match (self.mu_form[k], self.mu_form[nb]) {
                    (true, false) => edge(k, nb),
                    (false, true) => edge(nb, k),
                    _ => 0.5 * (y[nb] - y[k]).powi(2),
                };
            }
            e += self.cell * self.local(y, k).2;
        }
        e
    }

    fn apply(&self, diag_extra: &[f64], x: &[f64], out: &mut [f64]) {
        for k in 0..x.len() {
            let nbs = self.data.neighbours(k);
            out[k] = (4.0 + diag_extra[k]) * x[k] - x[nbs[0]] - x[nbs[1]] - x[nbs[2]] - x[nbs[3]];
        }
    }

    /// Jacobi-preconditioned conjugate gradients; returns the iterate and
    /// the iteration count.
    fn pcg(
        &self,
        diag_extra: &[f64],
        b: &[f64],
        rel_tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, usize), SurfaceError> {
        let size = b.len();
        let mut x = vec![0.0; size];
        let mut r = b.to_vec();
        let minv: Vec<f64> = diag_extra.iter().map(|d| 1.0 / (4.0 + d)).collect();
        let mut z: Vec<f64> = r.iter().zip(&minv).map(|(a, m)| a * m).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b_norm == 0.0 {
            return Ok((x, 0));
        }
        let mut ap = vec![0.0; size];
        for it in 0..max_iter {
            self.apply(diag_extra, &p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(SurfaceError::SingularJacobian);
            }
            let step = rz / pap;
            for k in 0..size {
                x[k] += step * p[k];
                r[k] -= step * ap[k];
            }
            let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r_norm <= rel_tol * b_norm {
                return Ok((x, it + 1));
            }
            for k in 0..size {
                z[k] = r[k] * minv[k];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..size {
                p[k] = z[k] + beta * p[k];
            }
        }
        Ok((x, max_iter))
    }
}

/// Discrete energy of a `mu` field in plain form.
pub fn discrete_energy(data: &TorusData, r: f64, mu: &[f64]) -> f64 {
    let cell = data.h * data.h;
    let mut e = 0.0;
    for k in 0..mu.len() {
        let nbs = data.neighbours(k);
        for nb in [nbs[0], nbs[2]] {
            let t = mu[nb] - mu[k];
            e += 0.5 * t * t;
        }
        e +=
            cell * 0.25 * r * r * ((2.0 * mu[k]).exp() * data.w_plus_sq[k] + (-2.0 * mu[k]).exp() * data.w_minus_sq[k]);
    }
    e
}

pub fn solve_mu(data: &TorusData, r: f64, init: &[f64], tol: f64) -> Result<TorusField, SurfaceError> {
    solve_mu_with(data, r, init, tol, SolveOptions::default())
}

pub fn solve_mu_with(
    data: &TorusData,
    r: f64,
    init: &[f64],
    tol: f64,
    opts: SolveOptions,
) -> Result<TorusField, SurfaceError> {
    if !(r >= 2.0 && r.is_finite()) {
        return Err(SurfaceError::BadParams(format!("r = {r} must be at least 2")));
    }
    if init.len() != data.n * data.n || init.iter().any(|v| !v.is_finite()) {
        return Err(SurfaceError::BadParams("initial field must be finite on every node".into()));
    }
    if !(tol > 0.0) {
        return Err(SurfaceError::BadParams(format!("tol = {tol}")));
    }
    let prob = Problem::new(data, r, opts.mu_form_radius);
    let mut y = prob.from_mu(init);
    let size = y.len();
    let mut energy = prob.energy(&y);
    let mut energies = vec![energy];
    let mut cg_total = 0;
    let mut polish = 0;
    let mut prev_norm: Option<f64> = None;
    let mut forcing: f64 = 0.1;
    for it in 0..opts.max_newton {
        let (res, _) = prob.residual(&y);
        let scaled = prob.scaled_residual(&y);
        if scaled <= tol {
            polish += 1;
            if polish > 2 {
                return Ok(finish(data, r, &prob, y, it, cg_total, energies, scaled));
            }
        }
        let norm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
        if let Some(pn) = prev_norm {
            let ew = 0.9 * (norm / pn).powi(2);
            let guard = 0.9 * forcing * forcing;
            forcing = if guard > 0.1 { ew.max(guard) } else { ew };
            forcing = forcing.clamp(1e-12, 0.5);
        }
        prev_norm = Some(norm);
        let extra: Vec<f64> = (0..size).map(|k| prob.cell * prob.local(&y, k).1).collect();
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let (step, cg) = prob.pcg(&extra, &rhs, forcing, opts.max_cg)?;
        cg_total += cg;
        let slope: f64 = res.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + lambda * b).collect();
            let e = prob.energy(&trial);
            let roundoff = 1e-13 * energy.abs().max(1e-300);
            let armijo = e <= energy + 1e-4 * lambda * slope;
            let flat = e.is_finite() && (e - energy).abs() <= roundoff;
            if e.is_finite() && (armijo || (flat && prob.scaled_residual(&trial) < scaled)) {
                y = trial;
                energy = e.min(energy);
                energies.push(e);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            if scaled <= tol {
                return Ok(finish(data, r, &prob, y, it, cg_total, energies, scaled));
            }
            return Err(SurfaceError::NewtonDiverged { residual: scaled, iterations: it });
        }
    }
    let scaled = prob.scaled_residual(&y);
    if scaled <= tol {
        return Ok(finish(data, r, &prob, y, opts.max_newton, cg_total, energies, scaled));
    }
    Err(SurfaceError::NewtonDiverged { residual: scaled, iterations: opts.max_newton })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    data: &TorusData,
    r: f64,
    prob: &Problem<'_>,
    y: Vec<f64>,
    iters: usize,
    cg_iters: usize,
    energies: Vec<f64>,
    residual_max: f64,
) -> TorusField {
    let size = y.len();
    let mu: Vec<f64> = (0..size).map(|k| prob.to_mu(&y, k)).collect();
    let eta: Vec<f64> = (0..size).map(|k| if prob.mu_form[k] { mu[k] - data.mu_diamond[k] } else { y[k] }).collect();
    let zero = vec![0.0; size];
    TorusField {
        data: data.clone(),
        r,
        energy: discrete_energy(data, r, &mu),
        energy_zero: discrete_energy(data, r, &zero),
        mu,
        eta,
        newton_iters: iters,
        cg_iters,
        energies,
        residual_max,
        mu_form_nodes: prob.mu_form.iter().filter(|b| **b).count(),
    }
}

impl TorusField {
    /// Grid dump: `#` header lines with `n`, `r` and the zero lists, then
    /// `i, j, x, y, mu, eta` per node.
    pub fn to_csv(&self) -> String {
        let d = &self.data;
        let fmt = |kind: ZeroKind| {
            d.zeros
                .iter()
                .filter(|z| z.kind == kind)
                .map(|z| format!("({:.17e} {:.17e})", z.position[0], z.position[1]))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!(
            "# n={}\n# r={:.16e}\n# zeros_plus={}\n# zeros_minus={}\ni,j,x,y,mu,eta\n",
            d.n,
            self.r,
            fmt(ZeroKind::Plus),
            fmt(ZeroKind::Minus)
        );
        for k in 0..self.mu.len() {
            let (i, j) = (k % d.n, k / d.n);
            out.push_str(&format!(
                "{i},{j},{},{},{},{}\n",
                crate::report::fmt_f64(i as f64 * d.h),
                crate::report::fmt_f64(j as f64 * d.h),
                crate::report::fmt_f64(self.mu[k]),
                crate::report::fmt_f64(self.eta[k])
            ));
        }
        out
    }

    /// Number of discrete local extrema where the nonlinearity has the wrong
    /// sign (positive at a maximum or negative at a minimum) beyond `tol`,
    /// the discrete form of the maximum principle.
    pub fn extremum_sign_violations(&self, tol: f64) -> usize {
        let d = &self.data;
        let r2 = self.r * self.r;
        let mut bad = 0;
        for k in 0..self.mu.len() {
            let nbs = d.neighbours(k);
            let m = self.mu[k];
            let is_max = nbs.iter().all(|&b| self.mu[b] <= m);
            let is_min = nbs.iter().all(|&b| self.mu[b] >= m);
            if !(is_max || is_min) {
                continue;
            }
            let nl = 0.5 * r2 * ((2.0 * m).exp() * d.w_plus_sq[k] - (-2.0 * m).exp() * d.w_minus_sq[k]);
            if (is_max && nl > tol) || (is_min && nl < -tol) {
                bad += 1;
            }
        }
        bad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    LineFit { slope, intercept, r_squared: 1.0 - rss / syy, points: x.len() }
}

/// Value of `sign * mu_r(p) - ln(r)/3` at one zero with the prediction from
/// the fiducial profile, `f(0) + ln(alpha1)/6 + ln(b/a)/4`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearZero {
    pub kind: ZeroKind,
    pub node: usize,
    pub value: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoRegimeReport {
    pub r: f64,
    /// Fit window in `theta_dist`.
    pub window: [f64; 2],
    /// `ln |mu_r - mu_diamond|` against `r theta^{3/2}`.
    pub decay: LineFit,
    /// `ln |grad (mu_r - mu_diamond)|` against `r theta^{3/2}` (reported only).
    pub gradient_decay: LineFit,
    pub near_zero: Vec<NearZero>,
    pub fiducial_f0: f64,
}

pub fn two_regime_report(field: &TorusField) -> Result<TwoRegimeReport, SurfaceError> {
    let d = &field.data;
    let r = field.r;
    let theta_max = d.theta_dist.iter().copied().fold(0.0, f64::max);
    let window = [3.0 * r.powf(-2.0 / 3.0), 0.5 * theta_max];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut gx = Vec::new();
    let mut gy = Vec::new();
    for k in 0..field.eta.len() {
        let t = d.theta_dist[k];
        if t < window[0] || t > window[1] {
            continue;
        }
        let e = field.eta[k];
        if !(e.is_finite() && e != 0.0) {
            continue;
        }
        let x = r * t.powf(1.5);
        xs.push(x);
        ys.push(e.abs().ln());
        let nbs = d.neighbours(k);
        let ex = (field.eta[nbs[0]] - field.eta[nbs[1]]) / (2.0 * d.h);
        let ey = (field.eta[nbs[2]] - field.eta[nbs[3]]) / (2.0 * d.h);
        let g = ex.hypot(ey);
        if g.is_finite() && g > 0.0 {
            gx.push(x);
            gy.push(g.ln());
        }
    }
    if xs.len() < 10 {
        return Err(SurfaceError::InsufficientNodes { found: xs.len() });
    }
    let decay = line_fit(&xs, &ys);
    let gradient_decay = if gx.len() >= 10 { line_fit(&gx, &gy) } else { decay.clone() };
    let f0 = fiducial::solve_fiducial_with(1.0, GridSpec::default(), 1e-10, FiducialOptions::extrapolated())?.f0;
    let near_zero = d
        .zeros
        .iter()
        .map(|z| {
            let sign = match z.kind {
                ZeroKind::Plus => 1.0,
                ZeroKind::Minus => -1.0,
            };
            NearZero {
                kind: z.kind,
                node: z.node,
                value: sign * field.mu[z.node] - r.ln() / 3.0,
                predicted: f0 + z.alpha1.ln() / 6.0 + 0.25 * (z.b / z.a).ln(),
            }
        })
        .collect();
    Ok(TwoRegimeReport { r, window, decay, gradient_decay, near_zero, fiducial_f0: f0 })
}

/// `sup |mu_r[data] + mu_r[swapped]|`, both solved from zero.
pub fn swap_symmetry_check(data: &TorusData, r: f64, tol: f64) -> Result<f64, SurfaceError> {
    let zero = vec![0.0; data.n * data.n];
    let a = solve_mu(data, r, &zero, tol)?;
    let b = solve_mu(&data.swapped(), r, &zero, tol)?;
    Ok(a.mu.iter().zip(&b.mu).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max))
}

/// `sup |mu(x + shift) + mu(x)|` for an index shift `(di, dj)`.
pub fn translation_antisymmetry(field: &TorusField, di: usize, dj: usize) -> f64 {
    let n = field.data.n;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let k = i + n * j;
            let t = (i + di) % n + n * ((j + dj) % n);
            worst = worst.max((field.mu[k] + field.mu[t]).abs());
        }
    }
    worst
}
