//! Finite-difference machinery shared by the radial solvers.
//!
//! The radial Laplacian `(1/s)(s g')'` is discretized in conservative form:
//! edge conductances `s_{i+1/2} / h_{i+1/2}` and annular control volumes `(s_{i+1/2}^2 - s_{i-1/2}^2) / 2`. Multiplying a row by its volume gives a
//! symmetric tridiagonal matrix, so every Newton system here is SPD.

use crate::grid::RadialGrid;

/// Conductances and control volumes of the conservative radial stencil.
#[derive(Debug, Clone)]
pub(crate) struct RadialStencil {
    /// `kappa[e]` couples nodes `e` and `e + 1`.
    pub kappa: Vec<f64>,
    pub volume: Vec<f64>,
}

impl RadialStencil {
    pub fn new(grid: &RadialGrid) -> Self {
        let s = grid.nodes();
        let n = s.len();
        let mid: Vec<f64> = s.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let kappa = s.windows(2).zip(&mid).map(|(w, &m)| m / (w[1] - w[0])).collect();
        let mut volume = vec![0.0; n];
        volume[0] = 0.5 * mid[0] * mid[0];
        for i in 1..n - 1 {
            volume[i] = 0.5 * (mid[i] * mid[i] - mid[i - 1] * mid[i - 1]);
        }
        // Half cell at the outer boundary; only used by quadrature-like sums.
        volume[n - 1] = 0.5 * (s[n - 1] * s[n - 1] - mid[n - 2] * mid[n - 2]);
        Self { kappa, volume }
    }

    /// Conservative stencil of `(1/s^p)(s^p g')'`: conductances
    /// `s_{i+1/2}^p / h_{i+1/2}`, volumes `int s^p ds` over each cell. For
    /// `p <= -1` the origin cell is unbounded and its volume is infinite.
    pub fn weighted(grid: &RadialGrid, p: i32) -> Self {
        let s = grid.nodes();
        let n = s.len();
        let mid: Vec<f64> = s.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let kappa = s.windows(2).zip(&mid).map(|(w, &m)| m.powi(p) / (w[1] - w[0])).collect();
        let cell = |a: f64, b: f64| {
            if p == -1 {
                (b / a).ln()
            } else {
                let q = (p + 1) as f64;
                (b.powi(p + 1) - a.powi(p + 1)) / q
            }
        };
        let mut volume = vec![0.0; n];
        volume[0] = if p <= -1 { f64::INFINITY } else { cell(0.0, mid[0]) };
        for i in 1..n - 1 {
            volume[i] = cell(mid[i - 1], mid[i]);
        }
        volume[n - 1] = cell(mid[n - 2], s[n - 1]);
        Self { kappa, volume }
    }

    /// Switches smoothly to the log-mean conductance `1 / ln(s_{i+1}/s_i)`,
    /// the exact flux of `ln s`, between `s_full / 2` and `s_full`. Beyond
    /// `s_full` the `f` and `u` forms of the radial Laplacian then coincide.
    pub fn blended(grid: &RadialGrid, s_full: f64) -> Self {
        let mut st = Self::new(grid);
        let s = grid.nodes();
        for (e, k) in st.kappa.iter_mut().enumerate() {
            let m = 0.5 * (s[e] + s[e + 1]);
            let x = ((m - 0.5 * s_full) / (0.5 * s_full)).clamp(0.0, 1.0);
            if x > 0.0 {
                let w = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
                *k = (1.0 - w) * *k + w / (s[e + 1] / s[e]).ln();
            }
        }
        st
    }

    /// Discrete `(1/s)(s g')'` at interior node `i` (including the origin).
    pub fn laplacian(&self, g: &[f64], i: usize) -> f64 {
        let right = self.kappa[i] * (g[i + 1] - g[i]);
        let left = if i == 0 { 0.0 } else { self.kappa[i - 1] * (g[i] - g[i - 1]) };
        (right - left) / self.volume[i]
    }
}

/// Thomas algorithm for a tridiagonal system; `lower[i]` multiplies `x[i-1]`
/// in row `i`, `upper[i]` multiplies `x[i+1]`.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Fornberg's recursion: weights `w[k][j]` such that the `k`-th derivative at
/// `z` is approximately `sum_j w[k][j] * f(x[j])`, for `k <= max_order`.
pub(crate) fn fornberg_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// Symmetry of a sampled radial function about `s = 0`, used to extend
/// stencils across the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Parity {
    Even,
    /// No reflection; stencils become one-sided near the origin.
    None,
}

/// Derivative of order `order` (1 or 2) at every node with five-point stencils.
pub(crate) fn differentiate(nodes: &[f64], values: &[f64], parity: Parity, order: usize) -> Vec<f64> {
    let n = nodes.len();
    let half = 2usize;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let (xs, ys) = stencil(nodes, values, parity, i, half);
        let w = fornberg_weights(nodes[i], &xs, order);
        out[i] = w[order].iter().zip(&ys).map(|(a, b)| a * b).sum();
    }
    if parity == Parity::Even && order == 1 {
        out[0] = 0.0;
    }
    out
}

fn stencil(nodes: &[f64], values: &[f64], parity: Parity, i: usize, half: usize) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len() as isize;
    let width = 2 * half as isize + 1;
    let mut lo = i as isize - half as isize;
    let mut hi = i as isize + half as isize;
    if parity == Parity::None && lo < 0 {
        lo = 0;
        hi = width - 1;
    }
    if hi > n - 1 {
        hi = n - 1;
        lo = if parity == Parity::Even { hi - width + 1 } else { (hi - width + 1).max(0) };
    }
    let mut xs = Vec::with_capacity(width as usize);
    let mut ys = Vec::with_capacity(width as usize);
    for j in lo..=hi {
        if j < 0 {
            // mirror image of node -j
            let m = (-j) as usize;
            xs.push(-nodes[m]);
            ys.push(values[m]);
        } else {
            xs.push(nodes[j as usize]);
            ys.push(values[j as usize]);
        }
    }
    (xs, ys)
}

/// Cubic Hermite interpolation on one interval.
pub(crate) fn hermite(s0: f64, s1: f64, y0: f64, y1: f64, d0: f64, d1: f64, s: f64) -> (f64, f64) {
    let h = s1 - s0;
    let t = (s - s0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let deriv = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, deriv)
}

/// Linear mode problem in the reduced variable `w = h / s^k`:
/// `-(1/s^{2k+1})(s^{2k+1} w')' + potential w = rhs` with `w(s_max) = outer`
/// and `w'(0) = 0`. The reduced operator is regular at the origin, so the
/// centrifugal term never meets the graded spacing there.
pub(crate) fn solve_linear_mode(
    grid: &RadialGrid,
    k: u32,
    potential: &[f64],
    rhs: &[f64],
    outer: f64,
) -> Option<Vec<f64>> {
    let st = RadialStencil::weighted(grid, 2 * k as i32 + 1);
    let m = grid.len() - 1;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut b = vec![0.0; m];
    for i in 0..m {
        let left = if i == 0 { 0.0 } else { st.kappa[i - 1] };
        let right = st.kappa[i];
        diag[i] = left + right + st.volume[i] * potential[i];
        lower[i] = -left;
        upper[i] = -right;
        b[i] = st.volume[i] * rhs[i];
    }
    b[m - 1] += st.kappa[m - 1] * outer;
    let mut w = solve_tridiagonal(&lower, &diag, &upper, &b)?;
    w.push(outer);
    Some(w)
}

/// Nonlinear radial problem `-(1/s)(s f')' + (alpha/2)(e^{2f} s^2 - e^{-2f}) = 0`
/// with `f'(0) = 0` and `f + ln(s)/2 = outer_u` at the last node.
///
/// Unknowns are `g = f - ln(alpha)/6` below `switch` and `u = f + ln(s)/2`
/// from `switch` on. `g` is the scale-free profile, so its rounding does not
/// grow with `alpha`, and `u` keeps the exponentially small far field at full
/// relative precision. Both are per-node shifts, so the Newton matrix is the
/// same in either form.
pub(crate) struct SinhProblem<'a> {
    grid: &'a RadialGrid,
    stencil: RadialStencil,
    alpha: f64,
    first_u: usize,
    half_log: Vec<f64>,
    /// `ln(alpha)/6`.
    offset: f64,
    outer_u: f64,
}

/// A mixed-representation profile: `y[i]` is `f - offset` for
/// `i < first_u`, else `u`.
#[derive(Debug, Clone)]
pub(crate) struct MixedProfile {
    pub y: Vec<f64>,
    pub first_u: usize,
    pub offset: f64,
}

impl MixedProfile {
    pub fn f(&self, grid: &RadialGrid) -> Vec<f64> {
        let c = self.offset;
        self.centered(grid).into_iter().map(|g| g + c).collect()
    }

    /// `f - offset` at every node.
    pub fn centered(&self, grid: &RadialGrid) -> Vec<f64> {
        let s = grid.nodes();
        let c = self.offset;
        self.y.iter().enumerate().map(|(i, &y)| if i < self.first_u { y } else { y - 0.5 * s[i].ln() - c }).collect()
    }

    /// `u` at every node; `-inf` at the origin.
    pub fn u(&self, grid: &RadialGrid) -> Vec<f64> {
        let s = grid.nodes();
        self.y
            .iter()
            .enumerate()
            .map(|(i, &y)| if i < self.first_u { y + self.offset + 0.5 * s[i].ln() } else { y })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonTrace {
    pub iterations: usize,
    /// Discrete energy after each accepted step, starting with the initial guess.
    pub energies: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum NewtonFailure {
    LineSearch { residual: f64, iterations: usize },
    MaxIterations { residual: f64, iterations: usize },
    Singular,
}

impl<'a> SinhProblem<'a> {
    pub fn new(grid: &'a RadialGrid, alpha: f64, switch: f64, outer_u: f64) -> Self {
        let s = grid.nodes();
        let first_u = s.iter().position(|&x| x >= switch).unwrap_or(s.len() - 1).max(1);
        let half_log = s.iter().map(|&x| if x > 0.0 { 0.5 * x.ln() } else { 0.0 }).collect();
        Self {
            grid,
            stencil: RadialStencil::blended(grid, switch),
            alpha,
            first_u,
            half_log,
            offset: alpha.ln() / 6.0,
            outer_u,
        }
    }

    fn profile(&self, y: Vec<f64>) -> MixedProfile {
        MixedProfile { y, first_u: self.first_u, offset: self.offset }
    }

    /// `f + ln(s)/2 - (f - offset)` at node `j`.
    fn lift(&self, j: usize) -> f64 {
        self.half_log[j] + self.offset
    }

    /// Converts an `f` profile into the mixed representation, imposing the
    /// outer boundary value.
    pub fn from_f(&self, f: &[f64]) -> MixedProfile {
        let n = f.len();
        let mut y: Vec<f64> =
            (0..n).map(|i| if i < self.first_u { f[i] - self.offset } else { f[i] + self.half_log[i] }).collect();
        y[n - 1] = self.boundary_value();
        self.profile(y)
    }

    /// Builds the mixed profile from `f` on the inner nodes and `u` on the outer ones.
    pub fn from_fu(&self, f: &[f64], u: &[f64]) -> MixedProfile {
        let n = f.len();
        let mut y: Vec<f64> = (0..n).map(|i| if i < self.first_u { f[i] - self.offset } else { u[i] }).collect();
        y[n - 1] = self.boundary_value();
        self.profile(y)
    }

    fn boundary_value(&self) -> f64 {
        let n = self.grid.len();
        if n - 1 >= self.first_u {
            self.outer_u
        } else {
            self.outer_u - self.lift(n - 1)
        }
    }

    /// Value at node `j` in the representation of row `row`.
    fn value_as(&self, y: &[f64], j: usize, row: usize) -> f64 {
        match (row >= self.first_u, j >= self.first_u) {
            (true, false) => y[j] + self.lift(j),
            (false, true) => y[j] - self.lift(j),
            _ => y[j],
        }
    }

    /// `(right - centre, centre - left)` differences seen by row `i`, each in
    /// the row's own representation.
    fn row_diffs(&self, y: &[f64], i: usize) -> (f64, f64) {
        let c = y[i];
        let right = self.value_as(y, i + 1, i) - c;
        let left = if i == 0 { 0.0 } else { c - self.value_as(y, i - 1, i) };
        (right, left)
    }

    /// Nonlinear term, its derivative, and the energy density at node `i`.
    fn local(&self, y: &[f64], i: usize) -> (f64, f64, f64) {
        let s = self.grid.nodes()[i];
        let a = self.alpha;
        if i < self.first_u {
            let f = y[i] + self.offset;
            let p = (2.0 * f).exp() * s * s;
            let m = (-2.0 * f).exp();
            (0.5 * a * (p - m), a * (p + m), 0.25 * a * (p + m))
        } else {
            let u = y[i];
            let sh = u.sinh();
            (a * s * (2.0 * u).sinh(), 2.0 * a * s * (2.0 * u).cosh(), a * s * sh * sh)
        }
    }

    /// Residual and the diagonal of the (volume-normalized) Jacobian at the
    /// unknown nodes.
    pub fn residual(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = &self.stencil.kappa;
        let v = &self.stencil.volume;
        let m = y.len() - 1;
        let mut r = vec![0.0; m];
        let mut diag = vec![0.0; m];
        for i in 0..m {
            let (nl, dnl, _) = self.local(y, i);
            let (right, left) = self.row_diffs(y, i);
            let left_flux = if i == 0 { 0.0 } else { k[i - 1] * left };
            let left_k = if i == 0 { 0.0 } else { k[i - 1] };
            r[i] = -(k[i] * right - left_flux) / v[i] + nl;
            diag[i] = (k[i] + left_k) / v[i] + dnl;
        }
        (r, diag)
    }

    /// Max over unknown nodes of `|R_i| / J_ii`, i.e. the size of a local
    /// Jacobi correction.
    pub fn scaled_residual(&self, y: &[f64]) -> f64 {
        let (r, d) = self.residual(y);
        r.iter().zip(&d).map(|(a, b)| (a / b).abs()).fold(0.0, f64::max)
    }

    /// Convex energy whose gradient is the volume-weighted residual. The
    /// edge joining the two representations is measured in `f`; the linear
    /// term restores the `u`-form flux seen by the first `u` row.
    pub fn energy(&self, y: &[f64]) -> f64 {
        let k = &self.stencil.kappa;
        let mut e = 0.0;
        for i in 0..y.len() - 1 {
            let d = self.row_diffs(y, i).0;
            e += 0.5 * k[i] * d * d;
        }
        let j = self.first_u;
        if j >= 1 && j < y.len() - 1 {
            e += k[j - 1] * (self.half_log[j] - self.half_log[j - 1]) * y[j];
        }
        for i in 0..y.len() - 1 {
            e += self.stencil.volume[i] * self.local(y, i).2;
        }
        e
    }

    /// Damped Newton with Armijo backtracking on the energy.
    pub fn solve(
        &self,
        init: MixedProfile,
        tol: f64,
        max_iter: usize,
    ) -> Result<(MixedProfile, NewtonTrace), NewtonFailure> {
        let mut y = init.y;
        let n = y.len();
        y[n - 1] = self.boundary_value();
        let m = n - 1;
        let k = &self.stencil.kappa;
        let v = &self.stencil.volume;
        let mut energy = self.energy(&y);
        let mut energies = vec![energy];
        let mut polish = 0;
        for it in 0..max_iter {
            let (r, _) = self.residual(&y);
            let res = self.scaled_residual(&y);
            if res <= tol {
                polish += 1;
                if polish > 2 {
                    return Ok((self.profile(y), NewtonTrace { iterations: it, energies, residual: res }));
                }
            }
            let mut lower = vec![0.0; m];
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                let left = if i == 0 { 0.0 } else { k[i - 1] };
                diag[i] = left + k[i] + v[i] * self.local(&y, i).1;
                lower[i] = -left;
                upper[i] = if i + 1 < m { -k[i] } else { 0.0 };
                rhs[i] = -v[i] * r[i];
            }
            let step = solve_tridiagonal(&lower, &diag, &upper, &rhs).ok_or(NewtonFailure::Singular)?;
            let slope: f64 = rhs.iter().zip(&step).map(|(a, b)| -a * b).sum();
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = (0..n).map(|i| if i < m { y[i] + lambda * step[i] } else { y[i] }).collect();
                let e = self.energy(&trial);
                let roundoff = 1e-13 * energy.abs().max(1e-300) + 1e-300;
                let armijo = e <= energy + 1e-4 * lambda * slope;
                let flat = e.is_finite() && (e - energy).abs() <= roundoff;
                let better = flat && self.scaled_residual(&trial) < res;
                if e.is_finite() && (armijo || better) {
                    y = trial;
                    energy = e.min(energy);
                    energies.push(e);
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                // Converged to roundoff: no descent direction left.
                if res <= tol {
                    return Ok((self.profile(y), NewtonTrace { iterations: it, energies, residual: res }));
                }
                return Err(NewtonFailure::LineSearch { residual: res, iterations: it });
            }
        }
        let res = self.scaled_residual(&y);
        if res <= tol {
            return Ok((self.profile(y), NewtonTrace { iterations: max_iter, energies, residual: res }));
        }
        Err(NewtonFailure::MaxIterations { residual: res, iterations: max_iter })
    }
}
