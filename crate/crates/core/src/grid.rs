//! Uniform time grids `t_k = kT/n` and processes sampled on them.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    n: usize,
    horizon: f64,
}

impl PathGrid {
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(Self { n, horizon })
    }

    /// Number of steps; the grid has `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.n as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.t(k)).collect()
    }
}

/// Values of a process on the nodes of a [`PathGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: PathGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: PathGrid, values: Vec<f64>) -> Result<Self> {
        check_len("sample path values", grid.n() + 1, values.len())?;
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: PathGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=grid.n()).map(|k| f(grid.t(k))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: PathGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n() + 1],
        }
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.grid.n()]
    }

    pub fn max_abs_diff(&self, other: &SamplePath) -> Result<f64> {
        check_len("compared path", self.values.len(), other.values.len())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

impl std::ops::Index<usize> for SamplePath {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}
