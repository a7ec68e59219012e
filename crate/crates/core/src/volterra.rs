//! Euler schemes for the Volterra process `X` and the transforms between `X` and `ξ`.
//!
//! All variants freeze the coefficients at the left end of each step, evaluated at the
//! simulated memory state `(K̃⋆X)_{t_ℓ} = e^{-ρ t_ℓ} ξ̄_ℓ`:
//!
//! `X̄_k = ξ⁰ + Σ_{ℓ<k} D_{k-1-ℓ} b_ℓ + (diffusion sum)`.
//!
//! They differ in the kernel weights:
//!
//! * [`SchemeVariant::FrozenKernel`] uses `D_m = h K((m+1)h)` and `K((m+1)h) ΔW_ℓ`.
//! * [`SchemeVariant::SemiIntegratedDrift`] integrates the kernel exactly over each drift cell.
//! * [`SchemeVariant::HybridDiffusion`] also approximates the Wiener integrals
//!   `∫ K(t_k - s) σ_ℓ dW_s` on the finest level of the supplied noise: older fine cells use
//!   the cell-mean kernel and the most recent one the exact Gaussian pair
//!   `(ΔW, ∫_0^{h_f} K(h_f - s) dW_s)` completed by an auxiliary normal.
//!
//! Weight tables depend only on `(kernel, n, variant)` and are shared across paths.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fracops::difference_quotient;
use crate::grid::{PathGrid, SamplePath};
use crate::kernels::{convolve, CoKernel, Kernel, KernelKind};
use crate::noise::FabricPath;
use crate::sde::{check_horizon, Coefficients, MemoryProcessSpec, XiScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeVariant {
    #[default]
    FrozenKernel,
    SemiIntegratedDrift,
    HybridDiffusion,
}

#[derive(Debug, Clone)]
pub struct VolterraSpec {
    memory: MemoryProcessSpec,
    variant: SchemeVariant,
}

impl VolterraSpec {
    /// Requires a square-integrable kernel, i.e. `α > 1/2` for singular kernels.
    pub fn new(memory: MemoryProcessSpec, variant: SchemeVariant) -> Result<Self> {
        let k = memory.kernel();
        if k.is_singular() && !k.is_square_integrable() {
            return Err(Error::invalid(format!(
                "kernel exponent alpha = {} must exceed 1/2",
                k.alpha()
            )));
        }
        Ok(Self { memory, variant })
    }

    pub fn memory(&self) -> &MemoryProcessSpec {
        &self.memory
    }

    pub fn variant(&self) -> SchemeVariant {
        self.variant
    }

    pub fn kernel(&self) -> &Kernel {
        self.memory.kernel()
    }
}

/// Cached weights of one X scheme on one grid.
#[derive(Debug, Clone)]
pub struct XScheme {
    grid: PathGrid,
    variant: SchemeVariant,
    coeffs: Coefficients,
    rho: f64,
    ratio: usize,
    drift_rev: Vec<f64>,
    diffusion_rev: Vec<f64>,
    corr: f64,
}

impl XScheme {
    /// `noise_fine` is the number of fine increments of the noise that will drive the scheme;
    /// only [`SchemeVariant::HybridDiffusion`] looks below the grid's own level.
    pub fn new(spec: &VolterraSpec, grid: PathGrid, noise_fine: usize) -> Result<Self> {
        check_horizon(spec.memory(), &grid)?;
        let n = grid.n();
        let h = grid.step();
        let k = *spec.kernel();
        let frozen = |m: usize| k.eval_unchecked((m + 1) as f64 * h);
        let drift: Vec<f64> = match spec.variant {
            SchemeVariant::FrozenKernel => (0..n).map(|m| h * frozen(m)).collect(),
            _ => (0..n).map(|m| k.cell_integral(h, m)).collect(),
        };
        let (ratio, diffusion, corr) = match spec.variant {
            SchemeVariant::HybridDiffusion => {
                if noise_fine < n || !noise_fine.is_multiple_of(n) {
                    return Err(Error::invalid(format!(
                        "hybrid scheme on {n} steps cannot use noise with {noise_fine} fine steps"
                    )));
                }
                let r = noise_fine / n;
                let hf = h / r as f64;
                let w: Vec<f64> = (0..n * r).map(|m| k.cell_integral(hf, m) / hf).collect();
                let var = k.square_integral(0.0, hf)?;
                let corr = (var - hf * w[0] * w[0]).max(0.0).sqrt();
                (r, w, corr)
            }
            _ => (1, (0..n).map(frozen).collect(), 0.0),
        };
        Ok(Self {
            grid,
            variant: spec.variant,
            coeffs: spec.memory().coeffs().clone(),
            rho: spec.memory().rho(),
            ratio,
            drift_rev: drift.into_iter().rev().collect(),
            diffusion_rev: diffusion.into_iter().rev().collect(),
            corr,
        })
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn variant(&self) -> SchemeVariant {
        self.variant
    }

    /// Per-path inputs of the weighted sums: drift values and weighted increments.
    fn inputs<'a>(&self, noise: &'a FabricPath, xi_bar: &[f64]) -> Result<Inputs<'a>> {
        let n = self.grid.n();
        check_len("memory path", n + 1, xi_bar.len())?;
        let h = self.grid.step();
        let mut drift = Vec::with_capacity(n);
        let mut sigma = Vec::with_capacity(n);
        for (l, &xi) in xi_bar.iter().take(n).enumerate() {
            let t = l as f64 * h;
            let state = if self.rho == 0.0 { xi } else { (-self.rho * t).exp() * xi };
            drift.push(self.coeffs.drift(t, state));
            sigma.push(self.coeffs.diffusion(t, state));
        }
        let (dw, aux) = if self.variant == SchemeVariant::HybridDiffusion {
            let dw = noise.increments(n * self.ratio)?;
            let aux = noise
                .aux()
                .ok_or_else(|| Error::invalid("hybrid scheme needs auxiliary normals"))?;
            let aux = if aux.len() == dw.len() {
                aux
            } else {
                return Err(Error::invalid("hybrid scheme needs auxiliary normals on the finest level"));
            };
            (dw, Some(aux))
        } else {
            (noise.increments(n)?, None)
        };
        let r = self.ratio;
        let weighted: Vec<f64> = dw.iter().enumerate().map(|(j, d)| sigma[j / r] * d).collect();
        Ok(Inputs { drift, sigma, weighted, aux })
    }

    fn node(&self, inp: &Inputs<'_>, xi0: f64, k: usize) -> f64 {
        if k == 0 {
            return xi0;
        }
        let n = self.grid.n();
        let r = self.ratio;
        let kf = k * r;
        let nf = n * r;
        let mut x = xi0 + dot(&self.drift_rev[n - k..], &inp.drift[..k]);
        x += dot(&self.diffusion_rev[nf - kf..], &inp.weighted[..kf]);
        if let Some(aux) = inp.aux {
            x += self.corr * inp.sigma[k - 1] * aux[kf - 1];
        }
        x
    }

    /// `X̄` at nodes `0, stride, 2·stride, …, n`; `stride` must divide `n`.
    pub fn nodes(&self, noise: &FabricPath, xi_bar: &[f64], xi0: f64, stride: usize) -> Result<Vec<f64>> {
        let n = self.grid.n();
        if stride == 0 || !n.is_multiple_of(stride) {
            return Err(Error::invalid(format!("stride {stride} does not divide {n}")));
        }
        let inp = self.inputs(noise, xi_bar)?;
        Ok((0..=n / stride).map(|i| self.node(&inp, xi0, i * stride)).collect())
    }

    /// The whole path; `O(n²)` operations.
    pub fn path(&self, noise: &FabricPath, xi_bar: &[f64], xi0: f64) -> Result<SamplePath> {
        SamplePath::new(self.grid, self.nodes(noise, xi_bar, xi0, 1)?)
    }

    /// `X̄_T` alone; `O(n)` operations given `ξ̄`.
    pub fn endpoint(&self, noise: &FabricPath, xi_bar: &[f64], xi0: f64) -> Result<f64> {
        let inp = self.inputs(noise, xi_bar)?;
        Ok(self.node(&inp, xi0, self.grid.n()))
    }
}

struct Inputs<'a> {
    drift: Vec<f64>,
    sigma: Vec<f64>,
    weighted: Vec<f64>,
    aux: Option<&'a [f64]>,
}

/// Dot product with a fixed four-lane summation order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0f64; 4];
    let chunks = len / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..len {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// The Euler path of `X` driven by `noise`, given the memory path `ξ̄` on the same grid.
pub fn euler_x(
    spec: &VolterraSpec,
    grid: &PathGrid,
    noise: &FabricPath,
    xi_bar: &SamplePath,
    xi0: f64,
) -> Result<SamplePath> {
    if xi_bar.grid() != grid {
        return Err(Error::invalid("memory path is not sampled on the requested grid"));
    }
    XScheme::new(spec, *grid, noise.n_fine())?.path(noise, xi_bar.values(), xi0)
}

/// Simulates `ξ̄` and then `X̄` on `grid`.
pub fn simulate(spec: &VolterraSpec, grid: &PathGrid, noise: &FabricPath, xi0: f64) -> Result<(SamplePath, SamplePath)> {
    let xi = XiScheme::new(spec.memory(), *grid)?.run(noise.increments(grid.n())?, xi0)?;
    let x = euler_x(spec, grid, noise, &xi, xi0)?;
    Ok((xi, x))
}

/// `ξ_t = e^{ρt} (K̃⋆x)_t` on the grid of `x`.
pub fn memory_of_x(x: &SamplePath, ck: &CoKernel) -> Result<SamplePath> {
    let grid = *x.grid();
    let rho = ck.rho();
    let conv = match ck.density() {
        Some(d) => convolve(d, x, &grid)?.into_values(),
        None => vec![0.0; grid.n() + 1],
    };
    let values = conv
        .iter()
        .zip(x.values())
        .enumerate()
        .map(|(k, (c, xv))| {
            let v = c + ck.atom_weight() * xv;
            if rho == 0.0 { v } else { (rho * grid.t(k)).exp() * v }
        })
        .collect();
    SamplePath::new(grid, values)
}

/// `X_t = e^{-ρt} d/dt ((e^{ρ·}K)⋆ξ)_t`, differentiated with forward differences; the first
/// node is the least accurate.
pub fn reconstruct_x(xi: &SamplePath, k: &Kernel) -> Result<SamplePath> {
    let grid = *xi.grid();
    let undamped = k.without_decay();
    let rho = k.rho();
    let raw = if undamped.kind() == KernelKind::Constant {
        xi.values().iter().map(|v| undamped.c() * v).collect()
    } else {
        let g = convolve(&undamped, xi, &grid)?;
        difference_quotient(g.values(), grid.step())
    };
    let values = raw
        .into_iter()
        .enumerate()
        .map(|(i, v): (usize, f64)| if rho == 0.0 { v } else { (-rho * grid.t(i)).exp() * v })
        .collect();
    SamplePath::new(grid, values)
}
