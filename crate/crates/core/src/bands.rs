//! Finite-dimensional eigenvalue tools: Weyl displacement, the block
//! splitting of a matrix with a small and a gapped diagonal block, the
//! two-band model of the small eigenvalues, and spectral flow along paths of
//! symmetric matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandsError {
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: {0}")]
    BadDimensions(String),
    #[error("block hypotheses violated: {0}")]
    HypothesisViolated(String),
    #[error("endpoint {endpoint} has a kernel of dimension {kernel_dim}")]
    EndpointKernel { endpoint: usize, kernel_dim: usize },
    #[error("step {step} too coarse: eigenvalue motion {motion:e} against gap {gap:e}")]
    StepTooCoarse { step: usize, motion: f64, gap: f64 },
    #[error("family does not anticommute with J (defect {0:e})")]
    NotAnticommuting(f64),
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

const SYM_TOL: f64 = 1e-14;

/// Spectral norm.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), BandsError> {
    if !m.is_square() {
        return Err(BandsError::BadDimensions(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let a = asymmetry(m);
    if a > SYM_TOL * m.amax().max(1.0) {
        return Err(BandsError::NotSymmetric(a));
    }
    Ok(())
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylReport {
    pub displacement: f64,
    pub bound: f64,
    pub violated: bool,
}

/// `max_i |lambda_i(S + G) - lambda_i(S)|` against `|G|`.
pub fn weyl_check(s: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<WeylReport, BandsError> {
    check_symmetric(s)?;
    check_symmetric(g)?;
    if s.shape() != g.shape() {
        return Err(BandsError::BadDimensions(format!("{:?} vs {:?}", s.shape(), g.shape())));
    }
    let a = sorted_eigenvalues(s);
    let b = sorted_eigenvalues(&(s + g));
    let displacement = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let bound = op_norm(g);
    Ok(WeylReport {
        displacement,
        bound,
        // Roundoff allowance of the two eigensolves.
        violated: displacement > bound + 64.0 * f64::EPSILON * (op_norm(s) + bound),
    })
}

/// `M = [[s, l], [l^T, S]]` with `s` of size `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub d: usize,
    pub k: usize,
    pub s_block: DMatrix<f64>,
    pub big_block: DMatrix<f64>,
    pub l_block: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hypotheses {
    pub symmetric: bool,
    pub small_block_bounded: bool,
    pub large_block_gapped: bool,
    pub coupling_bounded: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.symmetric && self.small_block_bounded && self.large_block_gapped && self.coupling_bounded
    }
}

impl BlockMatrix {
    pub fn new(s_block: DMatrix<f64>, big_block: DMatrix<f64>, l_block: DMatrix<f64>) -> Result<Self, BandsError> {
        let d = s_block.nrows();
        let rest = big_block.nrows();
        if !s_block.is_square() || !big_block.is_square() || l_block.shape() != (d, rest) || d == 0 {
            return Err(BandsError::BadDimensions(format!(
                "s {:?}, S {:?}, l {:?}",
                s_block.shape(),
                big_block.shape(),
                l_block.shape()
            )));
        }
        check_symmetric(&s_block)?;
        check_symmetric(&big_block)?;
        Ok(Self { d, k: d + rest, s_block, big_block, l_block })
    }

    pub fn assembled(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.k, self.k);
        let d = self.d;
        let rest = self.k - d;
        m.view_mut((0, 0), (d, d)).copy_from(&self.s_block);
        m.view_mut((d, d), (rest, rest)).copy_from(&self.big_block);
        m.view_mut((0, d), (d, rest)).copy_from(&self.l_block);
        m.view_mut((d, 0), (rest, d)).copy_from(&self.l_block.transpose());
        m
    }

    pub fn hypotheses(&self, kappa: f64) -> Hypotheses {
        let big = sorted_eigenvalues(&self.big_block);
        Hypotheses {
            symmetric: asymmetry(&self.s_block) <= SYM_TOL && asymmetry(&self.big_block) <= SYM_TOL,
            small_block_bounded: op_norm(&self.s_block) <= 1.0 / kappa,
            large_block_gapped: big.iter().all(|l| l.abs() >= 1.0),
            coupling_bounded: op_norm(&self.l_block) <= 1.0 / (kappa * kappa),
        }
    }

    /// The same matrix with the coupling scaled by `f`.
    pub fn with_coupling_scaled(&self, f: f64) -> Self {
        Self { l_block: &self.l_block * f, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    /// Distances of the eigenvalues matched to the small block.
    pub small_distances: Vec<f64>,
    pub large_distances: Vec<f64>,
    pub small_count: usize,
    pub large_count: usize,
    /// `kappa |l|^2`.
    pub bound: f64,
    pub pass: bool,
}

impl SplitReport {
    pub fn max_distance(&self) -> f64 {
        self.small_distances.iter().chain(&self.large_distances).copied().fold(0.0, f64::max)
    }
}

fn matched_distances(eigs: &[f64], reference: &[f64]) -> Vec<f64> {
    eigs.iter().zip(reference).map(|(a, b)| (a - b).abs()).collect()
}

/// Splits the spectrum of the assembled matrix into the eigenvalues nearest
/// `spec(s)` and those nearest `spec(S)`, and compares each group with the
/// sorted reference spectrum.
pub fn block_split_check(m: &BlockMatrix, kappa: f64) -> Result<SplitReport, BandsError> {
    if !(kappa > 1.0) {
        return Err(BandsError::BadParams(format!("kappa = {kappa}")));
    }
    let h = m.hypotheses(kappa);
    if !h.all() {
        return Err(BandsError::HypothesisViolated(format!("{h:?}")));
    }
    let small_ref = sorted_eigenvalues(&m.s_block);
    let large_ref = sorted_eigenvalues(&m.big_block);
    let eigs = sorted_eigenvalues(&m.assembled());
    let dist = |x: f64, set: &[f64]| set.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
    let (mut small, mut large) = (Vec::new(), Vec::new());
    for &e in &eigs {
        if dist(e, &small_ref) <= dist(e, &large_ref) {
            small.push(e);
        } else {
            large.push(e);
        }
    }
    let bound = kappa * op_norm(&m.l_block).powi(2);
    let counts_ok = small.len() == m.d && large.len() == m.k - m.d;
    let (small_distances, large_distances) = if counts_ok {
        (matched_distances(&small, &small_ref), matched_distances(&large, &large_ref))
    } else {
        (vec![f64::INFINITY], vec![f64::INFINITY])
    };
    let slack = 64.0 * f64::EPSILON * op_norm(&m.assembled()).max(1.0);
    let pass = counts_ok && small_distances.iter().chain(&large_distances).all(|d| *d <= bound + slack);
    Ok(SplitReport {
        small_count: small.len(),
        large_count: large.len(),
        small_distances,
        large_distances,
        bound,
        pass,
    })
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn scaled_to(m: DMatrix<f64>, norm: f64) -> DMatrix<f64> {
    let n = op_norm(&m);
    if n == 0.0 {
        m
    } else {
        m * (norm / n)
    }
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest observed value of the suite's monitored quantity.
    pub worst: f64,
}

/// Random symmetric `dim x dim` pairs with perturbations of random size.
pub fn weyl_suite(trials: usize, dim: usize, seed: u64) -> SuiteReport {
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let s = random_symmetric(&mut rng, dim) * rng.random_range(0.1..10.0);
        let size = 10f64.powf(rng.random_range(-6.0..1.0));
        let g = scaled_to(random_symmetric(&mut rng, dim), size);
        let rep = weyl_check(&s, &g).expect("symmetric by construction");
        worst = worst.max(rep.displacement / rep.bound);
        if rep.violated {
            violations += 1;
        }
    }
    SuiteReport { name: "weyl".into(), trials, violations, worst }
}

/// A random block matrix with `|s| <= s_norm`, `spec(S)` outside `(-1, 1)`
/// and `|l| = l_norm`.
pub fn random_block_matrix(rng: &mut ChaCha8Rng, d: usize, k: usize, s_norm: f64, l_norm: f64) -> BlockMatrix {
    let rest = k - d;
    let s = scaled_to(random_symmetric(rng, d), s_norm);
    let q = random_orthogonal(rng, rest);
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(rest, |_, _| {
        let v: f64 = rng.random_range(1.0..4.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    }));
    let big = &q * diag * q.transpose();
    let big = (&big + big.transpose()) * 0.5;
    let l = scaled_to(DMatrix::from_fn(d, rest, |_, _| rng.random_range(-1.0..1.0)), l_norm);
    BlockMatrix::new(s, big, l).expect("consistent by construction")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSuiteReport {
    pub trials: usize,
    pub violations: usize,
    /// Worst `max distance / bound`.
    pub worst_ratio_to_bound: f64,
    /// Range of `distance(l) / distance(l / 2)` over the trials.
    pub halving_ratio: [f64; 2],
    pub halving_violations: usize,
}

pub fn block_split_suite(trials: usize, kappa: f64, seed: u64) -> SplitSuiteReport {
    let mut violations = 0;
    let mut halving_violations = 0;
    let mut worst: f64 = 0.0;
    let mut range = [f64::INFINITY, 0.0f64];
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let d = rng.random_range(1..=4);
        let k = d + rng.random_range(1..=6);
        let s_norm = rng.random_range(0.0..0.01);
        let l_norm = rng.random_range(1e-3..0.01);
        let m = random_block_matrix(&mut rng, d, k, s_norm, l_norm);
        let full = block_split_check(&m, kappa).expect("hypotheses hold by construction");
        let half = block_split_check(&m.with_coupling_scaled(0.5), kappa).expect("hypotheses hold by construction");
        if !full.pass || !half.pass {
            violations += 1;
        }
        worst = worst.max(full.max_distance() / full.bound);
        let ratio = full.max_distance() / half.max_distance();
        range[0] = range[0].min(ratio);
        range[1] = range[1].max(ratio);
        if !(3.0..=5.0).contains(&ratio) {
            halving_violations += 1;
        }
    }
    SplitSuiteReport { trials, violations, worst_ratio_to_bound: worst, halving_ratio: range, halving_violations }
}

/// Default seed for the coupling block of the band model.
pub const BAND_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct BandModel {
    pub g: usize,
    pub r: f64,
    pub m: f64,
    pub alpha1_list: Vec<f64>,
    pub z_c: f64,
    pub z_k: f64,
    pub assembled: BlockMatrix,
}

/// Block model of the `6g - 6` small eigenvalues: two copies of
/// `m zC (4g - 4) r^{-2}`, then `6g - 8` entries `m zK alpha_p^{2/3} r^{-2/3}`
/// cycling through `alpha1_list`, coupled by a fixed-seed block of norm
/// `coupling * 0.5 m r^{-2}` with `coupling` in `[0, 1]`.
pub fn assemble_band_model(
    g: usize,
    r: f64,
    m: f64,
    alpha1_list: &[f64],
    z_c: f64,
    z_k: f64,
) -> Result<BandModel, BandsError> {
    assemble_band_model_with(g, r, m, alpha1_list, z_c, z_k, 1.0, BAND_SEED)
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_band_model_with(
    g: usize,
    r: f64,
    m: f64,
    alpha1_list: &[f64],
    z_c: f64,
    z_k: f64,
    coupling: f64,
    seed: u64,
) -> Result<BandModel, BandsError> {
    if g < 2 {
        return Err(BandsError::BadDimensions(format!("genus {g} below 2")));
    }
    if alpha1_list.len() != 4 * g - 4 {
        return Err(BandsError::BadDimensions(format!(
            "{} zero coefficients for genus {g}, need {}",
            alpha1_list.len(),
            4 * g - 4
        )));
    }
    for (name, v) in [("r", r), ("m", m), ("zC", z_c), ("zK", z_k)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(BandsError::BadParams(format!("{name} = {v}")));
        }
    }
    if alpha1_list.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(BandsError::BadParams("zero coefficients must be positive".into()));
    }
    if !(0.0..=1.0).contains(&coupling) {
        return Err(BandsError::BadParams(format!("coupling = {coupling}")));
    }
    let rest = 6 * g - 8;
    let c_val = m * z_c * (4 * g - 4) as f64 / (r * r);
    let s_block = DMatrix::from_diagonal_element(2, 2, c_val);
    let k_diag = nalgebra::DVector::from_fn(rest, |i, _| {
        m * z_k * alpha1_list[i % alpha1_list.len()].powf(2.0 / 3.0) * r.powf(-2.0 / 3.0)
    });
    let big_block = DMatrix::from_diagonal(&k_diag);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(2, rest, |_, _| rng.random_range(-1.0..1.0));
    let l_block = scaled_to(raw, 1.0) * (coupling * 0.5 * m / (r * r));
    Ok(BandModel {
        g,
        r,
        m,
        alpha1_list: alpha1_list.to_vec(),
        z_c,
        z_k,
        assembled: BlockMatrix::new(s_block, big_block, l_block)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandReport {
    pub g: usize,
    pub r: f64,
    pub m: f64,
    pub eigenvalues: Vec<f64>,
    /// Size of the lower band, split at the largest gap in `ln lambda`.
    pub small_band: usize,
    pub large_band: usize,
    /// Smallest eigenvalue of the upper band over largest of the lower.
    pub band_ratio: f64,
    pub min_eigenvalue: f64,
}

pub fn band_report(model: &BandModel) -> BandReport {
    let eigenvalues = sorted_eigenvalues(&model.assembled.assembled());
    let mut split = 1;
    let mut best = f64::NEG_INFINITY;
    for i in 1..eigenvalues.len() {
        let gap = (eigenvalues[i] / eigenvalues[i - 1]).ln();
        if gap > best {
            best = gap;
            split = i;
        }
    }
    BandReport {
        g: model.g,
        r: model.r,
        m: model.m,
        small_band: split,
        large_band: eigenvalues.len() - split,
        band_ratio: eigenvalues[split] / eigenvalues[split - 1],
        min_eigenvalue: eigenvalues[0],
        eigenvalues,
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Sampled path of symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub params: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
}

impl FlowPath {
    pub fn new(params: Vec<f64>, matrices: Vec<DMatrix<f64>>) -> Result<Self, BandsError> {
        if params.len() != matrices.len() || params.len() < 2 {
            return Err(BandsError::BadDimensions("need matching params and at least two matrices".into()));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(BandsError::BadParams("parameters must increase".into()));
        }
        let n = matrices[0].nrows();
        for m in &matrices {
            if m.nrows() != n {
                return Err(BandsError::BadDimensions("matrix sizes differ along the path".into()));
            }
            check_symmetric(m)?;
        }
        Ok(Self { params, matrices })
    }

    /// Uniform samples of `f` on `[t0, t1]`.
    pub fn sample<F: Fn(f64) -> DMatrix<f64>>(f: F, t0: f64, t1: f64, steps: usize) -> Result<Self, BandsError> {
        let params: Vec<f64> = (0..=steps).map(|i| t0 + (t1 - t0) * i as f64 / steps as f64).collect();
        let matrices = params.iter().map(|&t| f(t)).collect();
        Self::new(params, matrices)
    }

    /// The same matrices traversed backwards, parametrized by `-t`.
    pub fn reversed(&self) -> Self {
        Self {
            params: self.params.iter().rev().map(|t| -t).collect(),
            matrices: self.matrices.iter().rev().cloned().collect(),
        }
    }

    /// `self` followed by `other`, whose first matrix must equal the last of `self`.
    pub fn concat(&self, other: &Self) -> Result<Self, BandsError> {
        let last = self.matrices.last().expect("nonempty");
        if (last - &other.matrices[0]).amax() > SYM_TOL * last.amax().max(1.0) {
            return Err(BandsError::BadParams("paths do not join".into()));
        }
        let t_end = *self.params.last().expect("nonempty");
        let shift = t_end - other.params[0];
        let mut params = self.params.clone();
        let mut matrices = self.matrices.clone();
        params.extend(other.params.iter().skip(1).map(|t| t + shift));
        matrices.extend(other.matrices.iter().skip(1).cloned());
        Ok(Self { params, matrices })
    }
}

/// A located zero crossing: `direction` is the net change of the number of
/// positive eigenvalues across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub direction: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub flow: i64,
    pub crossings: Vec<Crossing>,
}

fn negatives(eigs: &[f64]) -> i64 {
    eigs.iter().filter(|l| **l < 0.0).count() as i64
}

fn kernel_dim(eigs: &[f64]) -> usize {
    let scale = eigs.iter().map(|l| l.abs()).fold(0.0, f64::max);
    eigs.iter().filter(|l| l.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)).count()
}

/// Checks that no eigenvalue able to reach zero within the step has a
/// same-sign neighbour closer than twice the step's eigenvalue motion.
/// Degenerate pairs and pairs straddling zero are exempt: the negative count
/// does not depend on how they are matched.
fn step_motion_check(step: usize, a: &[f64], b: &[f64]) -> Result<(), BandsError> {
    let motion = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|l| l.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut gap = f64::INFINITY;
    for eigs in [a, b] {
        for w in eigs.windows(2) {
            let reachable = w[0].abs() <= motion || w[1].abs() <= motion;
            let same_sign = (w[0] < 0.0) == (w[1] < 0.0);
            let d = w[1] - w[0];
            if reachable && same_sign && d > 1e-9 * scale {
                gap = gap.min(d);
            }
        }
    }
    if motion >= 0.5 * gap {
        return Err(BandsError::StepTooCoarse { step, motion, gap });
    }
    Ok(())
}

fn lerp(a: &DMatrix<f64>, b: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    a * (1.0 - s) + b * s
}

/// Locates the net crossings between two samples by bisecting on the
/// negative count of the linearly interpolated matrix.
fn locate(a: &DMatrix<f64>, b: &DMatrix<f64>, t0: f64, t1: f64, out: &mut Vec<Crossing>) {
    let na = negatives(&sorted_eigenvalues(a));
    let nb = negatives(&sorted_eigenvalues(b));
    fn rec(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        (s0, n0): (f64, i64),
        (s1, n1): (f64, i64),
        t: (f64, f64),
        depth: usize,
        out: &mut Vec<Crossing>,
    ) {
        if n0 == n1 {
            return;
        }
        if depth == 0 {
            let s = 0.5 * (s0 + s1);
            out.push(Crossing { t: t.0 + (t.1 - t.0) * s, direction: n0 - n1 });
            return;
        }
        let sm = 0.5 * (s0 + s1);
        let nm = negatives(&sorted_eigenvalues(&lerp(a, b, sm)));
        rec(a, b, (s0, n0), (sm, nm), t, depth - 1, out);
        rec(a, b, (sm, nm), (s1, n1), t, depth - 1, out);
    }
    rec(a, b, (0.0, na), (1.0, nb), (t0, t1), 30, out);
}

/// Net signed count of zero crossings; negative to positive counts `+1`.
pub fn spectral_flow(path: &FlowPath) -> Result<i64, BandsError> {
    Ok(spectral_flow_report(path)?.flow)
}

pub fn spectral_flow_report(path: &FlowPath) -> Result<FlowReport, BandsError> {
    let eigs: Vec<Vec<f64>> = path.matrices.iter().map(sorted_eigenvalues).collect();
    let last = eigs.len() - 1;
    for (endpoint, idx) in [(0, 0), (1, last)] {
        let k = kernel_dim(&eigs[idx]);
        if k > 0 {
            return Err(BandsError::EndpointKernel { endpoint, kernel_dim: k });
        }
    }
    let mut crossings = Vec::new();
    for j in 0..last {
        step_motion_check(j, &eigs[j], &eigs[j + 1])?;
        if negatives(&eigs[j]) != negatives(&eigs[j + 1]) {
            locate(&path.matrices[j], &path.matrices[j + 1], path.params[j], path.params[j + 1], &mut crossings);
        }
    }
    let flow = crossings.iter().map(|c| c.direction).sum();
    Ok(FlowReport { flow, crossings })
}

/// Samples `f` on `[t0, t1]` starting from `steps` uniform steps, halving any
/// step that fails the motion check.
pub fn adaptive_path<F: Fn(f64) -> DMatrix<f64>>(f: F, t0: f64, t1: f64, steps: usize) -> Result<FlowPath, BandsError> {
    let mut params: Vec<f64> = (0..=steps).map(|i| t0 + (t1 - t0) * i as f64 / steps as f64).collect();
    let min_step = (t1 - t0).abs() * 1e-9;
    let mut mats: Vec<DMatrix<f64>> = params.iter().map(|&t| f(t)).collect();
    let mut eigs: Vec<Vec<f64>> = mats.iter().map(sorted_eigenvalues).collect();
    let mut j = 0;
    while j + 1 < params.len() {
        match step_motion_check(j, &eigs[j], &eigs[j + 1]) {
            Ok(()) => j += 1,
            Err(e) => {
                if params[j + 1] - params[j] <= min_step {
                    return Err(e);
                }
                let tm = 0.5 * (params[j] + params[j + 1]);
                let m = f(tm);
                eigs.insert(j + 1, sorted_eigenvalues(&m));
                mats.insert(j + 1, m);
                params.insert(j + 1, tm);
            }
        }
    }
    FlowPath::new(params, mats)
}

pub fn flow_of_fn<F: Fn(f64) -> DMatrix<f64>>(f: F, t0: f64, t1: f64, steps: usize) -> Result<FlowReport, BandsError> {
    spectral_flow_report(&adaptive_path(f, t0, t1, steps)?)
}

/// Flow of a path required to anticommute with `j` (`j^T j = 1`, `j^2 = -1`).
pub fn gamma_pairing_flow(path: &FlowPath, j: &DMatrix<f64>) -> Result<i64, BandsError> {
    let n = j.nrows();
    if !j.is_square() || n != path.matrices[0].nrows() {
        return Err(BandsError::BadDimensions("J does not match the path".into()));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let structure = (j.transpose() * j - &id).amax().max((j * j + &id).amax());
    if structure > 1e-12 {
        return Err(BandsError::BadParams(format!("J is not an orthogonal complex structure ({structure:e})")));
    }
    for m in &path.matrices {
        let defect = (j * m + m * j).amax();
        if defect > 1e-12 * m.amax().max(1.0) {
            return Err(BandsError::NotAnticommuting(defect));
        }
    }
    spectral_flow(path)
}

/// Family `t -> [[A(t), B(t)], [B(t), -A(t)]]` in a rotated orthogonal
/// frame, with `A`, `B` symmetric and linear in `t` on `[0, 1]`. It
/// anticommutes with the rotated standard complex structure.
#[derive(Debug, Clone, PartialEq)]
pub struct AnticommutingFamily {
    half: usize,
    frame: DMatrix<f64>,
    ends: [DMatrix<f64>; 4],
}

impl AnticommutingFamily {
    pub fn random(rng: &mut ChaCha8Rng, half: usize) -> Self {
        let frame = random_orthogonal(rng, 2 * half);
        let ends = std::array::from_fn(|_| random_symmetric(rng, half));
        Self { half, frame, ends }
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let h = self.half;
        let a = &self.ends[0] * (1.0 - t) + &self.ends[1] * t;
        let b = &self.ends[2] * (1.0 - t) + &self.ends[3] * t;
        let mut m = DMatrix::zeros(2 * h, 2 * h);
        m.view_mut((0, 0), (h, h)).copy_from(&a);
        m.view_mut((h, h), (h, h)).copy_from(&(-&a));
        m.view_mut((0, h), (h, h)).copy_from(&b);
        m.view_mut((h, 0), (h, h)).copy_from(&b);
        let m = &self.frame * m * self.frame.transpose();
        (&m + m.transpose()) * 0.5
    }

    pub fn j(&self) -> DMatrix<f64> {
        let h = self.half;
        let mut j0 = DMatrix::zeros(2 * h, 2 * h);
        for i in 0..h {
            j0[(i, h + i)] = -1.0;
            j0[(h + i, i)] = 1.0;
        }
        &self.frame * j0 * self.frame.transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    /// Flow of stages 1 to 5.
    pub stages: [i64; 5],
    pub total: i64,
    /// Eigenvalues of `D + eps` in `(-1, 1)`.
    pub small_eigenvalues: usize,
    pub pass: bool,
}

/// Five-stage deformation: remove `eps`; grow `R Gamma`; remove the part of
/// `D` commuting with `Gamma`; deform the anticommuting part to a fixed
/// invertible anticommuting reference; shrink `R` to zero.
pub fn stage_path_flow(
    d: &DMatrix<f64>,
    eps: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    r_max: f64,
) -> Result<StageReport, BandsError> {
    check_symmetric(d)?;
    check_symmetric(eps)?;
    check_symmetric(gamma)?;
    let n = d.nrows();
    if eps.nrows() != n || gamma.nrows() != n {
        return Err(BandsError::BadDimensions("D, eps and Gamma differ in size".into()));
    }
    let id = DMatrix::<f64>::identity(n, n);
    if (gamma * gamma - &id).amax() > 1e-12 {
        return Err(BandsError::BadParams("Gamma is not an involution".into()));
    }
    let norm_d = op_norm(d).max(op_norm(&(d + eps)));
    if !(r_max > 2.0 * norm_d) {
        return Err(BandsError::BadParams(format!("R_max = {r_max} must exceed 2 |D| = {}", 2.0 * norm_d)));
    }
    let anti = (d - gamma * d * gamma) * 0.5;
    let commuting = d - &anti;
    if op_norm(&(&commuting + eps)) >= 1.0 {
        return Err(BandsError::HypothesisViolated(
            "part of D + eps commuting with Gamma must have norm below 1".into(),
        ));
    }
    // Reference: swaps the two eigenspaces of Gamma.
    let ge = SymmetricEigen::new(gamma.clone());
    let plus: Vec<usize> = (0..n).filter(|&i| ge.eigenvalues[i] > 0.0).collect();
    let minus: Vec<usize> = (0..n).filter(|&i| ge.eigenvalues[i] < 0.0).collect();
    if plus.len() != minus.len() {
        return Err(BandsError::BadDimensions("Gamma eigenspaces differ in dimension".into()));
    }
    let c = op_norm(&anti).max(f64::MIN_POSITIVE).min(0.25 * r_max);
    let mut reference = DMatrix::zeros(n, n);
    for (&p, &m) in plus.iter().zip(&minus) {
        let up = ge.eigenvectors.column(p);
        let um = ge.eigenvectors.column(m);
        reference += (up * um.transpose() + um * up.transpose()) * c;
    }
    let steps = 64;
    let s1 = flow_of_fn(|t| d + eps * (1.0 - t), 0.0, 1.0, steps)?.flow;
    let s2 = flow_of_fn(|t| d + gamma * (r_max * t), 0.0, 1.0, steps)?.flow;
    let s3 = flow_of_fn(|t| &anti + &commuting * (1.0 - t) + gamma * r_max, 0.0, 1.0, steps)?.flow;
    let s4 = flow_of_fn(|t| lerp(&anti, &reference, t) + gamma * r_max, 0.0, 1.0, steps)?.flow;
    let s5 = flow_of_fn(|t| &reference + gamma * (r_max * (1.0 - t)), 0.0, 1.0, steps)?.flow;
    let stages = [s1, s2, s3, s4, s5];
    let total = stages.iter().sum();
    let small = sorted_eigenvalues(&(d + eps)).iter().filter(|l| l.abs() < 1.0).count();
    Ok(StageReport {
        stages,
        total,
        small_eigenvalues: small,
        pass: s3 == 0 && s4 == 0 && s5 == 0 && (total as i64).unsigned_abs() as usize <= small,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSuiteReport {
    pub homotopy_pairs: usize,
    pub homotopy_mismatches: usize,
    pub gamma_families: usize,
    pub gamma_nonzero: usize,
    pub reversal_failures: usize,
}

/// Random `dim x dim` endpoint pairs joined by a straight path and by a path
/// through a random interior matrix; random anticommuting families.
pub fn flow_suite(pairs: usize, families: usize, dim: usize, seed: u64) -> Result<FlowSuiteReport, BandsError> {
    let mut mismatches = 0;
    let mut reversal_failures = 0;
    for t in 0..pairs {
        let mut rng = trial_rng(seed, t);
        let a = random_symmetric(&mut rng, dim) * 2.0;
        let b = random_symmetric(&mut rng, dim) * 2.0;
        let c = random_symmetric(&mut rng, dim) * 4.0;
        let straight = flow_of_fn(|s| lerp(&a, &b, s), 0.0, 1.0, 32)?;
        let bent = flow_of_fn(
            |s| {
                if s <= 0.5 {
                    lerp(&a, &c, 2.0 * s)
                } else {
                    lerp(&c, &b, 2.0 * s - 1.0)
                }
            },
            0.0,
            1.0,
            64,
        )?;
        if straight.flow != bent.flow {
            mismatches += 1;
        }
        let back = flow_of_fn(|s| lerp(&b, &a, s), 0.0, 1.0, 32)?;
        if back.flow != -straight.flow {
            reversal_failures += 1;
        }
    }
    let mut nonzero = 0;
    for t in 0..families {
        let mut rng = trial_rng(seed ^ 0xA5A5, t);
        let family = AnticommutingFamily::random(&mut rng, (dim / 2).max(1));
        let path = adaptive_path(|s| family.at(s), 0.0, 1.0, 32)?;
        if gamma_pairing_flow(&path, &family.j())? != 0 {
            nonzero += 1;
        }
    }
    Ok(FlowSuiteReport {
        homotopy_pairs: pairs,
        homotopy_mismatches: mismatches,
        gamma_families: families,
        gamma_nonzero: nonzero,
        reversal_failures,
    })
}
