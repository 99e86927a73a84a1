//! Size distributions: grids in the cluster-size variable `s`, discrete
//! measures approximating `c(s, t) ds`, and their moments.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Geometric,
    Custom,
}

/// Strictly increasing positive cluster sizes `s_0 < ... < s_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
}

impl SizeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        Self::checked(nodes, Spacing::Custom)
    }

    pub fn linear(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n}")));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
        nodes[n - 1] = hi;
        Self::checked(nodes, Spacing::Linear)
    }

    pub fn geometric(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n}")));
        }
        if !(lo > 0.0) {
            return Err(Error::InvalidGrid(format!("geometric grid needs lo > 0, got {lo}")));
        }
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
        nodes[0] = lo;
        nodes[n - 1] = hi;
        Self::checked(nodes, Spacing::Geometric)
    }

    /// Geometric grid with 400 nodes on `[1e-3, 50]`.
    pub fn default_geometric() -> Self {
        Self::geometric(1e-3, 50.0, 400).expect("static grid parameters are valid")
    }

    fn checked(nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidGrid("sizes must be finite and positive".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("sizes must be strictly increasing".into()));
        }
        Ok(Self { nodes, spacing })
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

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Trapezoidal cell widths: half cells at both ends.
    pub fn cell_widths(&self) -> Vec<f64> {
        let s = &self.nodes;
        let n = s.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { s[i] - s[i - 1] } else { 0.0 };
                let right = if i + 1 < n { s[i + 1] - s[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Index `l` with `s_l <= s < s_{l+1}`, or `None` outside `[s_0, s_max]`.
    /// The top node maps to the last cell.
    pub fn bracket(&self, s: f64) -> Option<usize> {
        let n = self.nodes.len();
        if !(s >= self.nodes[0]) || s > self.nodes[n - 1] {
            return None;
        }
        let upper = self.nodes.partition_point(|&v| v <= s);
        Some(upper.saturating_sub(1).min(n - 2))
    }
}

/// Fixture distributions used across tests and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureKind {
    /// Atom of weight `w` at size `s0`.
    Point { s0: f64, w: f64 },
    /// Density `m b^2 e^{-b s}`, whose first moment is `m`.
    Exponential { m: f64, b: f64 },
}

/// Nonnegative weights on a [`SizeGrid`]; `w_i ~ c(s_i) * ds_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Arc<SizeGrid>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: Arc<SizeGrid>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} grid nodes",
                weights.len(),
                grid.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidDensity {
                at: grid.nodes()[i],
                value: *w,
            });
        }
        Ok(Self { grid, weights })
    }

    pub fn zeros(grid: Arc<SizeGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            weights: vec![0.0; n],
        }
    }

    /// Samples a density on the grid with trapezoidal cell widths.
    pub fn from_density(f: impl Fn(f64) -> f64, grid: Arc<SizeGrid>) -> Result<Self> {
        let widths = grid.cell_widths();
        let mut weights = Vec::with_capacity(grid.len());
        for (&s, &ds) in grid.nodes().iter().zip(&widths) {
            let v = f(s);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDensity { at: s, value: v });
            }
            weights.push(v * ds);
        }
        Ok(Self { grid, weights })
    }

    /// Builds one of the fixture distributions on `grid`.
    ///
    /// A point mass that does not sit on a node is split between the two
    /// bracketing nodes so that both `m_0` and `m_1` are exact.
    pub fn canonical(kind: MeasureKind, grid: Arc<SizeGrid>) -> Result<Self> {
        match kind {
            MeasureKind::Point { s0, w } => {
                if !(s0 > 0.0) || !(w >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "point({s0}, {w}) needs s0 > 0 and w >= 0"
                    )));
                }
                let l = grid.bracket(s0).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "point mass at {s0} lies outside [{}, {}]",
                        grid.min(),
                        grid.max()
                    ))
                })?;
                let s = grid.nodes();
                let mut weights = vec![0.0; grid.len()];
                let scale = s0.abs().max(1.0) * 1e-12;
                if (s[l] - s0).abs() <= scale {
                    weights[l] = w;
                } else if (s[l + 1] - s0).abs() <= scale {
                    weights[l + 1] = w;
                } else {
                    let alpha = (s[l + 1] - s0) / (s[l + 1] - s[l]);
                    weights[l] = w * alpha;
                    weights[l + 1] = w * (1.0 - alpha);
                }
                Ok(Self { grid, weights })
            }
            MeasureKind::Exponential { m, b } => {
                if !(m > 0.0) || !(b > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exponential({m}, {b}) needs positive parameters"
                    )));
                }
                Self::from_density(|s| m * b * b * (-b * s).exp(), grid)
            }
        }
    }

    pub fn grid(&self) -> &SizeGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<SizeGrid> {
        Arc::clone(&self.grid)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sizes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// `sum_i s_i^k w_i`.
    pub fn moment(&self, k: u32) -> f64 {
        debug_assert!(k <= 4, "moments above 4 are not used");
        self.sizes()
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s.powi(k as i32) * w)
            .sum()
    }

    /// `alpha * self + beta * other` for nonnegative coefficients on a shared grid.
    pub fn combine(&self, alpha: f64, other: &DiscreteMeasure, beta: f64) -> Result<Self> {
        if self.grid.nodes() != other.grid.nodes() {
            return Err(Error::InvalidGrid("measures live on different grids".into()));
        }
        if !(alpha >= 0.0) || !(beta >= 0.0) {
            return Err(Error::InvalidParameter(
                "combination coefficients must be nonnegative".into(),
            ));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            weights,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_csv(
            out,
            &["s", "w"],
            self.sizes()
                .iter()
                .zip(&self.weights)
                .map(|(s, w)| vec![*s, *w]),
        )
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }

    pub fn read_csv<R: std::io::BufRead>(input: R) -> Result<Self> {
        let rows = io::read_csv(input, &["s", "w"])?;
        let (nodes, weights) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
        Self::new(Arc::new(SizeGrid::from_nodes(nodes)?), weights)
    }
}
