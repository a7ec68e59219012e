//! Riemann–Liouville fractional integrals and derivatives on uniform grids.
//!
//! `I^β f = K_{1,β} ⋆ f` is computed with exact power-kernel cell integrals against an
//! interpolant of `f` (see [`ProductRule`]); `D^β f = d/dt I^{1-β} f` differentiates that
//! with forward differences (backward at the last node). The first node of `D^β f` is the
//! least accurate one.

use crate::error::{Error, Result};
use crate::grid::{PathGrid, SamplePath};
use crate::kernels::{Kernel, ProductRule, ProductWeights};

/// A fractional order `β ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid(format!("fractional order must lie in (0, 1], got {beta}")));
        }
        Ok(Self(beta))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// `1 - β`, if it is itself a valid order.
    pub fn complement(&self) -> Option<FracOrder> {
        FracOrder::new(1.0 - self.0).ok()
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;

    fn try_from(beta: f64) -> Result<Self> {
        FracOrder::new(beta)
    }
}

fn check_grid(f: &SamplePath, grid: &PathGrid) -> Result<()> {
    if f.grid() != grid {
        return Err(Error::invalid("path is not sampled on the requested grid"));
    }
    Ok(())
}

/// `I^β f` with the product trapezoidal rule; for `β = 1` this is the running trapezoidal
/// integral of `f`.
pub fn frac_integral(beta: FracOrder, f: &SamplePath, grid: &PathGrid) -> Result<SamplePath> {
    frac_integral_with(beta, f, grid, ProductRule::Trapezoidal)
}

pub fn frac_integral_with(
    beta: FracOrder,
    f: &SamplePath,
    grid: &PathGrid,
    rule: ProductRule,
) -> Result<SamplePath> {
    check_grid(f, grid)?;
    let kernel = Kernel::fractional(1.0, beta.value())?;
    let weights = ProductWeights::new(&kernel, grid, rule);
    SamplePath::new(*grid, weights.apply(f.values())?)
}

/// `D^β f = d/dt I^{1-β} f`; for `β = 1` the ordinary difference quotient of `f`.
pub fn frac_derivative(beta: FracOrder, f: &SamplePath, grid: &PathGrid) -> Result<SamplePath> {
    frac_derivative_with(beta, f, grid, ProductRule::Trapezoidal)
}

pub fn frac_derivative_with(
    beta: FracOrder,
    f: &SamplePath,
    grid: &PathGrid,
    rule: ProductRule,
) -> Result<SamplePath> {
    check_grid(f, grid)?;
    let integrated = match beta.complement() {
        Some(order) => frac_integral_with(order, f, grid, rule)?,
        None => f.clone(),
    };
    SamplePath::new(*grid, difference_quotient(integrated.values(), grid.step()))
}

/// Forward differences, with a backward difference at the last node.
pub(crate) fn difference_quotient(g: &[f64], h: f64) -> Vec<f64> {
    let n = g.len() - 1;
    (0..=n)
        .map(|k| {
            if k < n {
                (g[k + 1] - g[k]) / h
            } else {
                (g[n] - g[n - 1]) / h
            }
        })
        .collect()
}
