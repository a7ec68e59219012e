//! The Markovian memory process `ξ` and its Euler scheme.
//!
//! With `b̃(u, x) = e^{ρu} b(u, e^{-ρu} x)` and `σ̃` defined likewise, the memory process solves
//!
//! `ξ_t = ξ⁰ κ̃(t) + ∫_0^t b̃(s, ξ_s) ds + ∫_0^t σ̃(s, ξ_s) dW_s`,  `κ̃(t) = e^{ρt} φ̃(t)`.
//!
//! The deterministic term `ξ⁰ κ̃(t)` is the memory burst. The scheme splits `ξ̄` into that
//! burst, evaluated in closed form at every node, and the Euler part `Y²` that accumulates
//! the frozen drift and diffusion increments.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{PathGrid, SamplePath};
use crate::kernels::{log_spaced, verify_pseudo_inverse_at, CoKernel, Kernel};

/// A coefficient `(t, x) ↦ f(t, x)`.
pub type CoefficientFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift and diffusion of the Volterra equation, with their declared regularity.
#[derive(Clone)]
pub struct Coefficients {
    drift: CoefficientFn,
    diffusion: CoefficientFn,
    gamma: f64,
    lip_b: f64,
    lip_sigma: f64,
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients")
            .field("gamma", &self.gamma)
            .field("lip_b", &self.lip_b)
            .field("lip_sigma", &self.lip_sigma)
            .finish_non_exhaustive()
    }
}

impl Coefficients {
    /// `gamma` is the time-Hölder exponent, `lip_b` and `lip_sigma` the space Lipschitz
    /// constants.
    pub fn new(
        drift: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gamma: f64,
        lip_b: f64,
        lip_sigma: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid(format!("time exponent gamma must lie in (0, 1], got {gamma}")));
        }
        for (name, v) in [("lip_b", lip_b), ("lip_sigma", lip_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a nonnegative real, got {v}")));
            }
        }
        Ok(Self {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            gamma,
            lip_b,
            lip_sigma,
        })
    }

    /// `b = σ = 0`.
    pub fn zero() -> Self {
        Self::new(|_, _| 0.0, |_, _| 0.0, 1.0, 0.0, 0.0).expect("valid constants")
    }

    /// Mean-reverting drift `μ - λx` with a constant diffusion `sigma`.
    pub fn mean_reverting(mu: f64, lambda: f64, sigma: f64) -> Result<Self> {
        Self::new(move |_, x| mu - lambda * x, move |_, _| sigma, 1.0, lambda.abs(), 0.0)
    }

    pub fn drift(&self, t: f64, x: f64) -> f64 {
        (self.drift)(t, x)
    }

    pub fn diffusion(&self, t: f64, x: f64) -> f64 {
        (self.diffusion)(t, x)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lip_b(&self) -> f64 {
        self.lip_b
    }

    pub fn lip_sigma(&self) -> f64 {
        self.lip_sigma
    }

    /// Spot-checks the declared Lipschitz constants on `trials` random triples `(t, x, y)`
    /// with `t ∈ [0, horizon]`, `x, y ∈ [-radius, radius]`, and checks that
    /// `|b(t, 0)| + |σ(t, 0)|` is finite on a time grid.
    pub fn check(&self, horizon: f64, radius: f64, trials: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let t = rng.random_range(0.0..=horizon);
            let x = rng.random_range(-radius..=radius);
            let y = rng.random_range(-radius..=radius);
            let dx = (x - y).abs();
            let slack = 1e-9 * (1.0 + dx);
            let db = (self.drift(t, x) - self.drift(t, y)).abs();
            if db > self.lip_b * dx + slack {
                return Err(Error::invalid(format!(
                    "drift is not {}-Lipschitz at t = {t}: |b(x) - b(y)| = {db} for |x - y| = {dx}",
                    self.lip_b
                )));
            }
            let ds = (self.diffusion(t, x) - self.diffusion(t, y)).abs();
            if ds > self.lip_sigma * dx + slack {
                return Err(Error::invalid(format!(
                    "diffusion is not {}-Lipschitz at t = {t}: |σ(x) - σ(y)| = {ds} for |x - y| = {dx}",
                    self.lip_sigma
                )));
            }
        }
        for k in 0..=256 {
            let t = horizon * k as f64 / 256.0;
            let v = self.drift(t, 0.0).abs() + self.diffusion(t, 0.0).abs();
            if !v.is_finite() {
                return Err(Error::invalid(format!("coefficients are not finite at (t, x) = ({t}, 0)")));
            }
        }
        Ok(())
    }
}

/// `b̃(u, x) = e^{ρu} b(u, e^{-ρu} x)` and the same for `σ`.
///
/// The Lipschitz constants are scaled by `e^{ρT}` so that they hold uniformly on `[0, T]`.
/// For `ρ = 0` the coefficients are returned unchanged.
pub fn transform_coefficients(coeffs: &Coefficients, rho: f64, horizon: f64) -> Coefficients {
    if rho == 0.0 {
        return coeffs.clone();
    }
    let b = coeffs.drift.clone();
    let s = coeffs.diffusion.clone();
    let scale = (rho * horizon).exp();
    Coefficients {
        drift: Arc::new(move |u, x| {
            let e = (rho * u).exp();
            e * b(u, x / e)
        }),
        diffusion: Arc::new(move |u, x| {
            let e = (rho * u).exp();
            e * s(u, x / e)
        }),
        gamma: coeffs.gamma,
        lip_b: coeffs.lip_b * scale,
        lip_sigma: coeffs.lip_sigma * scale,
    }
}

/// Law of the initial value `ξ⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Point { value: f64 },
    Gaussian { mean: f64, std_dev: f64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Point { value: 0.0 }
    }
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialCondition::Point { value } if value.is_finite() => Ok(()),
            InitialCondition::Gaussian { mean, std_dev } if mean.is_finite() && std_dev >= 0.0 && std_dev.is_finite() => {
                Ok(())
            }
            other => Err(Error::invalid(format!("invalid initial condition {other:?}"))),
        }
    }

    /// The realisation attached to a standard normal draw `z`.
    pub fn sample(&self, z: f64) -> f64 {
        match *self {
            InitialCondition::Point { value } => value,
            InitialCondition::Gaussian { mean, std_dev } => mean + std_dev * z,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InitialCondition::Point { value } => value,
            InitialCondition::Gaussian { mean, .. } => mean,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, InitialCondition::Gaussian { std_dev, .. } if *std_dev > 0.0)
    }
}

/// Everything needed to simulate the memory process.
#[derive(Debug, Clone)]
pub struct MemoryProcessSpec {
    xi0: InitialCondition,
    kernel: Kernel,
    co_kernel: CoKernel,
    coeffs: Coefficients,
    horizon: f64,
}

/// Largest tolerated `|K⋆K̃ - e^{-ρt}|` when a pair is accepted.
pub const PAIR_TOLERANCE: f64 = 1e-6;

impl MemoryProcessSpec {
    /// Validates `horizon > 0` and that `co_kernel` is the pseudo-inverse of `kernel`.
    pub fn new(
        xi0: InitialCondition,
        kernel: Kernel,
        co_kernel: CoKernel,
        coeffs: Coefficients,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        xi0.validate()?;
        if co_kernel.rho() != kernel.rho() {
            return Err(Error::invalid(format!(
                "co-kernel decay {} differs from kernel decay {}",
                co_kernel.rho(),
                kernel.rho()
            )));
        }
        let points = log_spaced(horizon * 1e-3, horizon, 12);
        let err = verify_pseudo_inverse_at(&kernel, &co_kernel, &points)?;
        if !(err <= PAIR_TOLERANCE) {
            return Err(Error::invalid(format!(
                "co-kernel is not the pseudo-inverse of the kernel (max error {err:e})"
            )));
        }
        Ok(Self { xi0, kernel, co_kernel, coeffs, horizon })
    }

    /// Pairs `kernel` with its own co-kernel.
    pub fn with_kernel(xi0: InitialCondition, kernel: Kernel, coeffs: Coefficients, horizon: f64) -> Result<Self> {
        Self::new(xi0, kernel, kernel.co_kernel(), coeffs, horizon)
    }

    pub fn xi0(&self) -> &InitialCondition {
        &self.xi0
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn co_kernel(&self) -> &CoKernel {
        &self.co_kernel
    }

    pub fn coeffs(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rho(&self) -> f64 {
        self.kernel.rho()
    }
}

/// `ξ⁰ e^{ρt} φ̃(t)`.
pub fn memory_burst(ck: &CoKernel, rho: f64, xi0: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("memory burst needs t >= 0, got {t}")));
    }
    Ok(xi0 * ((rho * t).exp() * ck.phi_tilde_unchecked(t)))
}

/// The Euler scheme of `ξ` on one grid, with the burst profile `κ̃(t_k)` cached.
#[derive(Debug, Clone)]
pub struct XiScheme {
    grid: PathGrid,
    coeffs: Coefficients,
    burst_profile: Vec<f64>,
}

impl XiScheme {
    pub fn new(spec: &MemoryProcessSpec, grid: PathGrid) -> Result<Self> {
        check_horizon(spec, &grid)?;
        let rho = spec.rho();
        let burst_profile = grid
            .times()
            .into_iter()
            .map(|t| memory_burst(spec.co_kernel(), rho, 1.0, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            coeffs: transform_coefficients(spec.coeffs(), rho, spec.horizon()),
            burst_profile,
        })
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    /// `κ̃(t_k)` at every node.
    pub fn burst_profile(&self) -> &[f64] {
        &self.burst_profile
    }

    /// Writes `ξ̄` at the `n + 1` nodes into `out`.
    pub fn run_into(&self, dw: &[f64], xi0: f64, out: &mut [f64]) -> Result<()> {
        let n = self.grid.n();
        check_len("Brownian increments", n, dw.len())?;
        check_len("output buffer", n + 1, out.len())?;
        let h = self.grid.step();
        let mut euler_part = 0.0;
        out[0] = xi0 * self.burst_profile[0];
        for k in 0..n {
            let t = self.grid.t(k);
            let x = out[k];
            euler_part += h * self.coeffs.drift(t, x) + self.coeffs.diffusion(t, x) * dw[k];
            out[k + 1] = xi0 * self.burst_profile[k + 1] + euler_part;
        }
        Ok(())
    }

    pub fn run(&self, dw: &[f64], xi0: f64) -> Result<SamplePath> {
        let mut out = vec![0.0; self.grid.n() + 1];
        self.run_into(dw, xi0, &mut out)?;
        SamplePath::new(self.grid, out)
    }
}

pub(crate) fn check_horizon(spec: &MemoryProcessSpec, grid: &PathGrid) -> Result<()> {
    let (a, b) = (spec.horizon(), grid.horizon());
    if (a - b).abs() > 1e-12 * a.max(b) {
        return Err(Error::invalid(format!("grid horizon {b} differs from model horizon {a}")));
    }
    Ok(())
}

/// Euler scheme of the memory process:
///
/// `ξ̄_{k+1} - ξ̄_k = ξ⁰(κ̃(t_{k+1}) - κ̃(t_k)) + h b̃(t_k, ξ̄_k) + σ̃(t_k, ξ̄_k) ΔW_{k+1}`,
/// started from `ξ̄_0 = ξ⁰ κ̃(0)`, which is zero whenever the co-kernel has no atom.
pub fn euler_xi(spec: &MemoryProcessSpec, grid: &PathGrid, dw: &[f64], xi0: f64) -> Result<SamplePath> {
    XiScheme::new(spec, *grid)?.run(dw, xi0)
}

/// Splits a simulated `ξ̄` into the burst `ξ⁰κ̃(t_k)` and the Euler part `Y²_k`.
pub fn lifted_components(scheme: &XiScheme, xi: &SamplePath, xi0: f64) -> Result<(SamplePath, SamplePath)> {
    if xi.grid() != scheme.grid() {
        return Err(Error::invalid("path is not sampled on the scheme grid"));
    }
    let burst: Vec<f64> = scheme.burst_profile.iter().map(|k| xi0 * k).collect();
    let rest: Vec<f64> = xi.values().iter().zip(&burst).map(|(x, b)| x - b).collect();
    Ok((SamplePath::new(scheme.grid, burst)?, SamplePath::new(scheme.grid, rest)?))
}
