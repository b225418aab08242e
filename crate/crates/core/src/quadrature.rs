//! Composite Simpson quadrature on nonuniform nodes.

use serde::Serialize;

/// A quadrature value with its error bars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// Richardson estimate `|S_h - S_2h| / 15`.
    pub error_estimate: f64,
    /// Bound on the omitted tail beyond the last node. Never added to `value`.
    pub tail_bound: f64,
}

impl Quadrature {
    pub fn total_error(&self) -> f64 {
        self.error_estimate + self.tail_bound
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            value: c * self.value,
            error_estimate: c.abs() * self.error_estimate,
            tail_bound: c.abs() * self.tail_bound,
        }
    }
}

/// Composite Simpson rule over `x` (strictly increasing). An odd trailing
/// interval is integrated with the quadratic through the last three nodes.
pub fn simpson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
    }
    let intervals = n - 1;
    let pairs = intervals / 2;
    let mut sum = 0.0;
    for p in 0..pairs {
        let i = 2 * p;
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let hs = h0 + h1;
        sum += hs / 6.0 * ((2.0 - h1 / h0) * y[i] + hs * hs / (h0 * h1) * y[i + 1] + (2.0 - h0 / h1) * y[i + 2]);
    }
    if intervals % 2 == 1 {
        let i = n - 3;
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let w0 = -h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        let w1 = h1 * (h1 + 3.0 * h0) / (6.0 * h0);
        let w2 = h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1));
        sum += w0 * y[i] + w1 * y[i + 1] + w2 * y[i + 2];
    }
    sum
}

/// Simpson on all nodes and on every other node, with the Richardson estimate.
pub fn simpson_estimate(x: &[f64], y: &[f64]) -> Quadrature {
    let fine = simpson(x, y);
    let mut xc: Vec<f64> = x.iter().step_by(2).copied().collect();
    let mut yc: Vec<f64> = y.iter().step_by(2).copied().collect();
    if (x.len() - 1) % 2 == 1 {
        xc.push(*x.last().unwrap());
        yc.push(*y.last().unwrap());
    }
    let coarse = simpson(&xc, &yc);
    Quadrature { value: fine, error_estimate: (fine - coarse).abs() / 15.0, tail_bound: 0.0 }
}

/// Running integral `C_i = int_{x_0}^{x_i} y`, exact for cubics: each
/// interval integrates the cubic through the four surrounding nodes.
pub fn cumulative(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 4, "cumulative quadrature needs four nodes");
    // Two-point Gauss-Legendre abscissae on [0, 1].
    let g = 0.5 / 3.0_f64.sqrt();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let j0 = i.saturating_sub(1).min(n - 4);
        let (a, b) = (x[i], x[i + 1]);
        let h = b - a;
        let mut sum = 0.0;
        for t in [0.5 - g, 0.5 + g] {
            let p = a + t * h;
            let mut v = 0.0;
            for j in j0..j0 + 4 {
                let mut l = 1.0;
                for m in j0..j0 + 4 {
                    if m != j {
                        l *= (p - x[m]) / (x[j] - x[m]);
                    }
                }
                v += l * y[j];
            }
            sum += v;
        }
        out[i + 1] = out[i] + 0.5 * h * sum;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics_on_uniform_pairs() {
        let x: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|t| t * t * t - t).collect();
        assert!((simpson(&x, &y) - (0.25 - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn exact_for_quadratics_on_graded_nodes_with_odd_tail() {
        let x: Vec<f64> = (0..12).map(|i| (i as f64 / 11.0).powi(2)).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t * t + 2.0 * t + 1.0).collect();
        assert!((simpson(&x, &y) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn cumulative_exact_for_cubics_on_graded_nodes() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 / 19.0).powf(1.5) * 2.0).collect();
        let y: Vec<f64> = x.iter().map(|t| t * t * t - 2.0 * t + 0.5).collect();
        let c = cumulative(&x, &y);
        for (t, v) in x.iter().zip(&c) {
            let exact = t.powi(4) / 4.0 - t * t + 0.5 * t;
            assert!((v - exact).abs() < 1e-13, "{t}: {v} vs {exact}");
        }
    }

    #[test]
    fn estimate_tracks_true_error() {
        let x: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|t| (-t * t).exp()).collect();
        let q = simpson_estimate(&x, &y);
        let exact = 0.882_081_390_762_421_4; // sqrt(pi)/2 * erf(2)
        let err = (q.value - exact).abs();
        assert!(err < 5.0 * q.error_estimate + 1e-15, "{err} vs {}", q.error_estimate);
    }
}
