//! Graded radial grids on `[0, s_max]`.
//!
//! Nodes are the images of a uniform lattice in a stretched coordinate
//! `xi(t) = t + knee * ln(1 + t / eps)`, so spacing is geometric near the
//! origin (finest spacing `h_min`) and tends to `h_max` beyond `knee`.
//! Because the map is smooth, halving the lattice step gives a nested grid
//! on which second-order errors drop by four, which is what the Richardson
//! passes elsewhere in the crate rely on.
//!
//! Grids are built in the scale-free coordinate `t = alpha^(1/3) s` and then
//! rescaled, so solves at different `alpha` share node positions exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid parameters: {0}")]
    BadSpec(String),
    #[error("grid invariant violated: {0}")]
    BadGrid(String),
}

/// Grid descriptor, expressed in the scale-free radial coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub s_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub knee: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { s_max: 20.0, h_min: 1e-4, h_max: 0.01, knee: 1.0 }
    }
}

impl GridSpec {
    pub fn with_s_max(mut self, s_max: f64) -> Self {
        self.s_max = s_max;
        self
    }

    /// The same stretching with the lattice step halved in both limits.
    pub fn halved(self) -> Self {
        Self { h_min: self.h_min / 2.0, h_max: self.h_max / 2.0, ..self }
    }

    fn validate(&self) -> Result<(), GridError> {
        let ok = self.s_max.is_finite()
            && self.s_max > 0.0
            && self.h_min > 0.0
            && self.h_max > self.h_min
            && self.knee > 0.0
            && self.h_max < self.s_max;
        if ok {
            Ok(())
        } else {
            Err(GridError::BadSpec(format!("{self:?}")))
        }
    }
}

/// Smooth stretching map between the radial coordinate and the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Stretch {
    knee: f64,
    eps: f64,
}

impl Stretch {
    fn forward(&self, t: f64) -> f64 {
        t + self.knee * (t / self.eps).ln_1p()
    }

    fn inverse(&self, xi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        // forward is increasing and concave; Newton from the right converges monotonically.
        let mut t = xi;
        for _ in 0..100 {
            let g = self.forward(t) - xi;
            let dg = 1.0 + self.knee / (t + self.eps);
            let next = (t - g / dg).max(0.0);
            if (next - t).abs() <= 1e-16 * (1.0 + t) {
                return next;
            }
            t = next;
        }
        t
    }
}

/// How a grid's nodes were produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Grading {
    Stretched {
        spec: GridSpec,
        /// Physical radius per unit of the scale-free coordinate.
        scale: f64,
        /// Lattice step in the stretched coordinate.
        step: f64,
        eps: f64,
    },
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    grading: Grading,
}

impl RadialGrid {
    /// Builds the stretched grid for `spec`, rescaled by `scale`
    /// (physical `s = scale * t`).
    pub fn stretched(spec: GridSpec, scale: f64) -> Result<Self, GridError> {
        spec.validate()?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(GridError::BadSpec(format!("scale {scale}")));
        }
        let step = spec.h_max;
        let eps = spec.h_min * spec.knee / (spec.h_max - spec.h_min);
        let map = Stretch { knee: spec.knee, eps };
        let xi_end = map.forward(spec.s_max);
        let mut count = (xi_end / step).floor() as usize;
        if xi_end - count as f64 * step < 0.5 * step {
            count -= 1;
        }
        let mut nodes: Vec<f64> = (0..=count).map(|i| scale * map.inverse(i as f64 * step)).collect();
        nodes[0] = 0.0;
        nodes.push(scale * spec.s_max);
        let grid = Self { nodes, grading: Grading::Stretched { spec, scale, step, eps } };
        grid.check()?;
        Ok(grid)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, GridError> {
        let grid = Self { nodes, grading: Grading::Explicit };
        grid.check()?;
        Ok(grid)
    }

    /// Inserts the stretched-coordinate midpoint of every interval.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        match self.grading {
            Grading::Stretched { spec, scale, step, eps } => {
                let map = Stretch { knee: spec.knee, eps };
                for w in self.nodes.windows(2) {
                    let a = map.forward(w[0] / scale);
                    let b = map.forward(w[1] / scale);
                    nodes.push(w[0]);
                    nodes.push(scale * map.inverse(0.5 * (a + b)));
                }
                nodes.push(*self.nodes.last().unwrap());
                Self { nodes, grading: Grading::Stretched { spec: spec.halved(), scale, step: step / 2.0, eps } }
            }
            Grading::Explicit => {
                for w in self.nodes.windows(2) {
                    nodes.push(w[0]);
                    nodes.push(0.5 * (w[0] + w[1]));
                }
                nodes.push(*self.nodes.last().unwrap());
                Self { nodes, grading: Grading::Explicit }
            }
        }
    }

    /// Keeps the nodes below `radius` and ends the grid exactly at `radius`.
    pub fn truncated(&self, radius: f64) -> Result<Self, GridError> {
        if !(radius > 0.0 && radius <= self.s_max()) {
            return Err(GridError::BadSpec(format!("truncation radius {radius} outside (0, {}]", self.s_max())));
        }
        let mut nodes: Vec<f64> = self.nodes.iter().copied().filter(|&s| s < radius).collect();
        if nodes.len() >= 2 {
            let n = nodes.len();
            let prev = nodes[n - 1] - nodes[n - 2];
            if radius - nodes[n - 1] < 0.5 * prev {
                nodes.pop();
            }
        }
        nodes.push(radius);
        let grid = Self { nodes, grading: self.grading };
        grid.check()?;
        Ok(grid)
    }

    fn check(&self) -> Result<(), GridError> {
        let n = &self.nodes;
        if n.len() < 5 {
            return Err(GridError::BadGrid("fewer than 5 nodes".into()));
        }
        if n[0] != 0.0 {
            return Err(GridError::BadGrid("first node is not 0".into()));
        }
        for w in n.windows(2) {
            if !(w[1] > w[0]) {
                return Err(GridError::BadGrid(format!("nodes not increasing at {}", w[0])));
            }
        }
        for w in n.windows(3) {
            let ratio = (w[2] - w[1]) / (w[1] - w[0]);
            if !(0.5..=2.0).contains(&ratio) {
                return Err(GridError::BadGrid(format!("spacing ratio {ratio:.3} at s = {}", w[1])));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn s_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    /// Index of the node equal to `s`, if any.
    pub fn node_index(&self, s: f64) -> Option<usize> {
        self.nodes.binary_search_by(|x| x.partial_cmp(&s).unwrap()).ok()
    }

    /// Index `i` with `nodes[i] <= s < nodes[i + 1]` (clamped to the last interval).
    pub fn interval(&self, s: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Largest spacing between adjacent nodes.
    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_meets_invariants() {
        let g = RadialGrid::stretched(GridSpec::default(), 1.0).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.s_max(), 20.0);
        let h0 = g.nodes()[1];
        assert!((h0 - 1e-4).abs() < 2e-6, "finest spacing {h0}");
        assert!(g.max_spacing() < 0.0151);
    }

    #[test]
    fn refinement_is_nested() {
        let g = RadialGrid::stretched(GridSpec::default().with_s_max(5.0), 1.0).unwrap();
        let f = g.refined();
        assert_eq!(f.len(), 2 * g.len() - 1);
        for (i, &s) in g.nodes().iter().enumerate() {
            assert_eq!(f.nodes()[2 * i], s);
        }
    }

    #[test]
    fn refined_matches_halved_spec_on_the_regular_part() {
        let spec = GridSpec::default().with_s_max(5.0);
        let f = RadialGrid::stretched(spec, 1.0).unwrap().refined();
        let h = RadialGrid::stretched(spec.halved(), 1.0).unwrap();
        for i in 0..f.len() - 4 {
            assert!((f.nodes()[i] - h.nodes()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_maps_nodes_exactly() {
        let spec = GridSpec::default().with_s_max(24.0);
        let a = RadialGrid::stretched(GridSpec::default(), 1.0).unwrap();
        let b = RadialGrid::stretched(spec, 0.5).unwrap();
        for i in 0..a.len() - 3 {
            assert_eq!(a.nodes()[i] * 0.5, b.nodes()[i]);
        }
    }

    #[test]
    fn truncation_ends_on_radius() {
        let g = RadialGrid::stretched(GridSpec::default(), 1.0).unwrap();
        let t = g.truncated(1.0).unwrap();
        assert_eq!(t.s_max(), 1.0);
        assert!(t.len() < g.len());
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(RadialGrid::from_nodes(vec![0.0, 1.0, 0.5, 2.0, 3.0]).is_err());
        assert!(RadialGrid::from_nodes(vec![0.1, 0.2, 0.3, 0.4, 0.5]).is_err());
        assert!(RadialGrid::from_nodes(vec![0.0, 0.1, 0.5, 0.6, 0.7]).is_err());
    }
}
