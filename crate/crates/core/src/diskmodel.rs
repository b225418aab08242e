//! Local disk models: the radial equation for `v` on a disk of radius `r0`
//! with `alpha = r^2 alpha1`, and the linear mode equations whose model
//! solutions are `(3/(3+2k)) a_k s^k Xi`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::fiducial::{self, FiducialError, FiducialOptions, FiducialSolution};
use crate::grid::{GridError, GridSpec, RadialGrid};
use crate::radial::{self, NewtonFailure, Parity, RadialStencil, SinhProblem};
use crate::report::csv_table;
use crate::xi::{self, XiError, XiProfile};

/// Newton tolerance of the disk and fiducial solves (scaled residual).
pub const DISK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiskError {
    #[error("Newton iteration diverged: residual {residual:e} after {iterations} iterations")]
    NewtonDiverged { residual: f64, iterations: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("singular mode system")]
    SingularSystem,
    #[error(transparent)]
    Fiducial(#[from] FiducialError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Xi(#[from] XiError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiskVSolution {
    pub r: f64,
    pub alpha1: f64,
    /// `r^2 alpha1`.
    pub alpha: f64,
    pub r0: f64,
    pub grid: RadialGrid,
    pub v: Vec<f64>,
    /// `v - f_alpha(s)`, the departure from the fiducial profile.
    pub y: Vec<f64>,
    pub sup_y: f64,
    /// Discrete energy of the initial guess and after every accepted Newton step.
    pub energies: Vec<f64>,
    pub newton_iterations: usize,
    pub residual: f64,
}

impl DiskVSolution {
    /// CSV with columns `s, v, y`.
    pub fn to_csv(&self) -> String {
        csv_table(&["s", "v", "y"], &[self.grid.nodes(), &self.v, &self.y])
    }
}

/// Solves `-(v'' + v'/s) + (alpha/2)(e^{2v} s^2 - e^{-2v}) = 0` on `[0, r0]`
/// with `v'(0) = 0` and `v(r0) = -ln(r0)/2`, and compares with the fiducial
/// profile on the same nodes.
pub fn solve_v_disk(r: f64, alpha1: f64, r0: f64) -> Result<DiskVSolution, DiskError> {
    if !(r >= 2.0 && r.is_finite()) {
        return Err(DiskError::BadParams(format!("r = {r} must be at least 2")));
    }
    if !(alpha1 > 0.0 && alpha1.is_finite()) {
        return Err(DiskError::BadParams(format!("alpha1 = {alpha1} must be positive")));
    }
    if !(r0 > 0.0 && r0 <= 1.0) {
        return Err(DiskError::BadParams(format!("r0 = {r0} outside (0, 1]")));
    }
    let alpha = r * r * alpha1;
    let fid = fiducial::solve_fiducial_with(alpha, GridSpec::default(), DISK_TOL, FiducialOptions::default())?;
    let grid = fid.grid.truncated(r0)?;
    let switch = fid.grid.nodes()[fid.first_u];
    let prob = SinhProblem::new(&grid, alpha, switch, 0.0);
    let scale = alpha.powf(-1.0 / 3.0);
    let guess: Vec<f64> = grid.nodes().iter().map(|&s| -0.5 * s.max(scale).ln()).collect();
    let (sol, trace) = prob.solve(prob.from_f(&guess), DISK_TOL, 200).map_err(|e| match e {
        NewtonFailure::LineSearch { residual, iterations } | NewtonFailure::MaxIterations { residual, iterations } => {
            DiskError::NewtonDiverged { residual, iterations }
        }
        NewtonFailure::Singular => DiskError::NewtonDiverged { residual: f64::INFINITY, iterations: 0 },
    })?;
    let n = grid.len();
    let mut v = sol.f(&grid);
    v[n - 1] = -0.5 * r0.ln();
    // Both problems share nodes, switch and offset below the last node, so
    // the difference of the unknowns is `v - f` in either representation.
    let fy = fid.mixed().y;
    let mut y: Vec<f64> = (0..n - 1).map(|i| sol.y[i] - fy[i]).collect();
    let (f_r0, _) = fiducial::eval_f(&fid, r0)?;
    y.push(v[n - 1] - f_r0);
    let sup_y = y.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(DiskVSolution {
        r,
        alpha1,
        alpha,
        r0,
        grid,
        v,
        y,
        sup_y,
        energies: trace.energies,
        newton_iterations: trace.iterations,
        residual: trace.residual,
    })
}

/// `3 / (3 + 2k)`.
pub fn mode_coefficient(k: i32) -> f64 {
    3.0 / (3.0 + 2.0 * k as f64)
}

/// Potential `alpha(e^{2v} s^2 + e^{-2v})` and right-hand side density
/// `alpha(e^{2v} s^2 - e^{-2v})` of the mode equations.
fn potential_pair(alpha: f64, s: f64, v: f64) -> (f64, f64) {
    let p = (2.0 * v).exp() * s * s;
    let m = (-2.0 * v).exp();
    (alpha * (p + m), alpha * (p - m))
}

/// Node values of the model potential and source density on `xi`'s grid.
fn model_coefficients(xi: &XiProfile) -> Result<(Vec<f64>, Vec<f64>), DiskError> {
    let d = xi::model_densities(xi)?;
    let pot = d.phi_sq.iter().map(|p| 4.0 * p).collect();
    let src = d.bracket.iter().map(|b| 2.0 * b).collect();
    Ok((pot, src))
}

fn check_k(k: i32, s_min: f64) -> Result<(), DiskError> {
    if k < -1 {
        return Err(DiskError::BadParams(format!("mode k = {k} below -1")));
    }
    if k == -1 && s_min <= 0.0 {
        return Err(DiskError::BadParams("k = -1 needs s_min > 0".into()));
    }
    if k >= 0 && s_min != 0.0 {
        return Err(DiskError::BadParams(format!("k = {k} needs s_min = 0")));
    }
    Ok(())
}

/// Max residual of `h = (3/(3+2k)) s^k Xi` in the mode operator
/// `-(h'' + h'/s - k^2 h/s^2) + alpha(A + B) h - alpha(A - B) s^k` on `[s_min, 1]`.
/// The operator is discretized through `h = s^k w` as the conservative
/// stencil of `(1/s^{2k+1})(s^{2k+1} w')'`, which stays regular at the origin.
pub fn verify_exact_mode(xi: &XiProfile, k: i32, s_min: f64) -> Result<f64, DiskError> {
    verify_exact_mode_on(xi, k, s_min, 1.0)
}

pub fn verify_exact_mode_on(xi: &XiProfile, k: i32, s_min: f64, r0: f64) -> Result<f64, DiskError> {
    check_k(k, s_min)?;
    let s = xi.grid.nodes();
    if !(r0 > s_min && r0 < xi.grid.s_max()) {
        return Err(DiskError::BadParams(format!("r0 = {r0} outside ({s_min}, s_max)")));
    }
    let (pot, src) = model_coefficients(xi)?;
    // h = s^k w with w = (3/(3+2k)) Xi; the residual is reported for h.
    let c = mode_coefficient(k);
    let w: Vec<f64> = xi.xi.iter().map(|x| c * x).collect();
    let st = RadialStencil::weighted(&xi.grid, 2 * k + 1);
    let first = if k == -1 { s.iter().position(|&x| x >= s_min).unwrap_or(1).max(1) } else { 0 };
    let mut worst: f64 = 0.0;
    for i in first..s.len() - 1 {
        if s[i] > r0 {
            break;
        }
        let sk = if k == 0 { 1.0 } else { s[i].powi(k) };
        let r = sk * (-st.laplacian(&w, i) + pot[i] * w[i] - src[i]);
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Where the mode potential comes from.
#[derive(Debug, Clone, Copy)]
pub enum ModePotential<'a> {
    /// The exact model `v_f`.
    Model,
    /// The computed disk solution `v`; its grid must be `xi`'s grid truncated at `r0`.
    Disk(&'a DiskVSolution),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSolution {
    pub k: i32,
    pub a_re: f64,
    pub a_im: f64,
    pub r0: f64,
    pub grid: RadialGrid,
    pub h: Vec<f64>,
    /// `(3/(3+2k)) |a| s^k Xi`.
    pub exact: Vec<f64>,
    pub predicted_coeff: f64,
    /// `sup |h - exact|` over `s <= r0/2`.
    pub deviation: f64,
    /// `(4/3) sup |h - h_refined|` over `s <= r0/2`; absent for the disk potential.
    pub discretization_estimate: Option<f64>,
}

impl ModeSolution {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.a_re, self.a_im)
    }

    /// CSV with columns `s, h, exact, deviation`.
    pub fn to_csv(&self) -> String {
        let dev: Vec<f64> = self.h.iter().zip(&self.exact).map(|(a, b)| a - b).collect();
        csv_table(&["s", "h", "exact", "deviation"], &[self.grid.nodes(), &self.h, &self.exact, &dev])
    }
}

/// Mode BVP on the unit disk with the model potential.
pub fn solve_mode_bvp(xi: &XiProfile, k: u32, a: Complex64) -> Result<ModeSolution, DiskError> {
    solve_mode_bvp_with(xi, k, a, 1.0, ModePotential::Model)
}

/// `-(h'' + h'/s - k^2 h/s^2) + P h = |a| alpha(A - B) s^k` on `[0, r0]` with
/// `h(r0) = (3/(3+2k)) |a| r0^k Xi(r0)`; the phase of `a` factors out.
pub fn solve_mode_bvp_with(
    xi: &XiProfile,
    k: u32,
    a: Complex64,
    r0: f64,
    potential: ModePotential<'_>,
) -> Result<ModeSolution, DiskError> {
    if !(r0 > 0.0 && r0 < xi.grid.s_max()) {
        return Err(DiskError::BadParams(format!("r0 = {r0} outside (0, s_max)")));
    }
    let grid = xi.grid.truncated(r0)?;
    let n = grid.len();
    let s = grid.nodes();
    let amp = a.norm();
    let c = mode_coefficient(k as i32);
    let (x_r0, _) = xi_at(xi, r0)?;
    let outer = c * amp * r0.powi(k as i32) * x_r0;
    let (pot, src) = match potential {
        ModePotential::Model => {
            let (p, q) = model_coefficients(xi)?;
            (p[..n - 1].to_vec(), q[..n - 1].to_vec())
        }
        ModePotential::Disk(d) => {
            if d.grid.nodes() != s || (d.alpha - xi.alpha).abs() > 1e-12 * xi.alpha {
                return Err(DiskError::BadParams("disk solution does not match the profile grid".into()));
            }
            (0..n - 1).map(|i| potential_pair(d.alpha, s[i], d.v[i])).unzip()
        }
    };
    let h = mode_solve(&grid, k, &pot, &src, amp, outer)?;
    let mut exact: Vec<f64> = (0..n - 1).map(|i| c * amp * s[i].powi(k as i32) * xi.xi[i]).collect();
    exact.push(outer);
    let half = 0.5 * r0;
    let window = |i: usize| s[i] <= half;
    let deviation = (0..n).filter(|&i| window(i)).fold(0.0_f64, |m, i| m.max((h[i] - exact[i]).abs()));
    let discretization_estimate = match potential {
        ModePotential::Model => {
            let fine = grid.refined();
            let fs = fine.nodes();
            let mut fp = Vec::with_capacity(fs.len() - 1);
            let mut fq = Vec::with_capacity(fs.len() - 1);
            for (j, &sj) in fs[..fs.len() - 1].iter().enumerate() {
                if j % 2 == 0 {
                    fp.push(pot[j / 2]);
                    fq.push(src[j / 2]);
                } else {
                    let (f, _) = fiducial::eval_f(&xi.source, sj)?;
                    let (p, q) = potential_pair(xi.alpha, sj, f);
                    fp.push(p);
                    fq.push(q);
                }
            }
            let hf = mode_solve(&fine, k, &fp, &fq, amp, outer)?;
            let d = (0..n).filter(|&i| window(i)).fold(0.0_f64, |m, i| m.max((h[i] - hf[2 * i]).abs()));
            Some(4.0 / 3.0 * d)
        }
        ModePotential::Disk(_) => None,
    };
    Ok(ModeSolution {
        k: k as i32,
        a_re: a.re,
        a_im: a.im,
        r0,
        grid,
        h,
        exact,
        predicted_coeff: c,
        deviation,
        discretization_estimate,
    })
}

/// Solves for `w = h / s^k` and returns `h`.
fn mode_solve(
    grid: &RadialGrid,
    k: u32,
    pot: &[f64],
    src: &[f64],
    amp: f64,
    outer: f64,
) -> Result<Vec<f64>, DiskError> {
    let s = grid.nodes();
    let n = s.len();
    let rhs: Vec<f64> = src.iter().map(|q| amp * q).collect();
    let w_outer = outer / s[n - 1].powi(k as i32);
    let w = radial::solve_linear_mode(grid, k, pot, &rhs, w_outer).ok_or(DiskError::SingularSystem)?;
    Ok(w.iter().zip(s).map(|(w, &x)| if k == 0 { *w } else { w * x.powi(k as i32) }).collect())
}

/// `(Xi, Xi')` at `s` by cubic Hermite interpolation.
fn xi_at(xi: &XiProfile, s: f64) -> Result<(f64, f64), DiskError> {
    let x = xi.grid.nodes();
    if !(0.0..=xi.grid.s_max()).contains(&s) {
        return Err(DiskError::BadParams(format!("s = {s} outside the profile grid")));
    }
    let i = xi.grid.interval(s);
    if s == x[i] {
        return Ok((xi.xi[i], xi.xi_prime[i]));
    }
    Ok(radial::hermite(x[i], x[i + 1], xi.xi[i], xi.xi[i + 1], xi.xi_prime[i], xi.xi_prime[i + 1], s))
}

/// Sup difference between the mode solutions with the computed disk `v`
/// and with the model `v_f` as potential.
pub fn mode_potential_effect(xi: &XiProfile, k: u32, disk: &DiskVSolution) -> Result<f64, DiskError> {
    let a = Complex64::new(1.0, 0.0);
    let model = solve_mode_bvp_with(xi, k, a, disk.r0, ModePotential::Model)?;
    let computed = solve_mode_bvp_with(xi, k, a, disk.r0, ModePotential::Disk(disk))?;
    Ok(model.h.iter().zip(&computed.h).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs())))
}

/// The diagonal `sigma_3` mode `c = -Xi/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sigma3Mode {
    pub grid: RadialGrid,
    pub c: Vec<f64>,
    /// Max of `|-(1/s)(s c')' + alpha(A + B) c + (alpha/2)(A - B)|` with
    /// five-point derivatives, divided by `alpha^{2/3}` (last node excluded).
    pub residual: f64,
}

pub fn sigma3_mode(xi: &XiProfile) -> Result<Sigma3Mode, DiskError> {
    let (pot, src) = model_coefficients(xi)?;
    let s = xi.grid.nodes();
    let c: Vec<f64> = xi.xi.iter().map(|x| -0.5 * x).collect();
    let d1 = radial::differentiate(s, &c, Parity::Even, 1);
    let d2 = radial::differentiate(s, &c, Parity::Even, 2);
    let mut worst: f64 = 0.0;
    for i in 0..s.len() - 1 {
        let lap = if i == 0 { 2.0 * d2[0] } else { d2[i] + d1[i] / s[i] };
        worst = worst.max((-lap + pot[i] * c[i] + 0.5 * src[i]).abs());
    }
    Ok(Sigma3Mode { grid: xi.grid.clone(), c, residual: worst / xi.alpha.powf(2.0 / 3.0) })
}

/// Fiducial solution with the default grid and one Richardson pass, the
/// usual source for the mode checks.
pub fn model_profile(alpha: f64) -> Result<FiducialSolution, DiskError> {
    Ok(fiducial::solve_fiducial_with(alpha, GridSpec::default(), 1e-10, FiducialOptions::extrapolated())?)
}
