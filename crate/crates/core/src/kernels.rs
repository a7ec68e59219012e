//! The Gamma kernel family `K_{c,α,ρ}(t) = c e^{-ρt} t^{α-1} / Γ(α)`, its ρ-pseudo-inverse
//! co-kernels, Laplace transforms, and singularity-aware product quadrature for `K⋆f`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{PathGrid, SamplePath};
use crate::special::{gamma, gamma_integral, integrate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Constant,
    Fractional,
    Exponential,
    Gamma,
}

/// A member of the Gamma kernel family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    c: f64,
    alpha: f64,
    rho: f64,
}

impl Kernel {
    /// Validates the parameters against `kind`: constant kernels have `α = 1, ρ = 0`,
    /// fractional ones `ρ = 0`, exponential ones `α = 1`.
    pub fn new(kind: KernelKind, c: f64, alpha: f64, rho: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("kernel scale c must be positive, got {c}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("kernel order alpha must lie in (0, 1], got {alpha}")));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("kernel decay rho must be nonnegative, got {rho}")));
        }
        let consistent = match kind {
            KernelKind::Constant => alpha == 1.0 && rho == 0.0,
            KernelKind::Fractional => rho == 0.0,
            KernelKind::Exponential => alpha == 1.0,
            KernelKind::Gamma => true,
        };
        if !consistent {
            return Err(Error::invalid(format!(
                "{kind:?} kernel cannot have alpha = {alpha}, rho = {rho}"
            )));
        }
        Ok(Self { kind, c, alpha, rho })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(KernelKind::Constant, c, 1.0, 0.0)
    }

    pub fn fractional(c: f64, alpha: f64) -> Result<Self> {
        Self::new(KernelKind::Fractional, c, alpha, 0.0)
    }

    pub fn exponential(c: f64, rho: f64) -> Result<Self> {
        Self::new(KernelKind::Exponential, c, 1.0, rho)
    }

    pub fn gamma(c: f64, alpha: f64, rho: f64) -> Result<Self> {
        Self::new(KernelKind::Gamma, c, alpha, rho)
    }

    /// The rough-volatility kernel `K_{1, H+1/2, 0}`.
    pub fn from_hurst(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 0.5) {
            return Err(Error::invalid(format!("Hurst index must lie in (0, 1/2), got {hurst}")));
        }
        Self::fractional(1.0, hurst + 0.5)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `K(t) → ∞` as `t → 0⁺`.
    pub fn is_singular(&self) -> bool {
        self.alpha < 1.0
    }

    pub fn is_square_integrable(&self) -> bool {
        self.alpha > 0.5
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || (t == 0.0 && self.is_singular()) || t.is_nan() {
            return Err(Error::domain(format!("kernel {self:?} evaluated at t = {t}")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        self.c * (-self.rho * t).exp() * t.powf(self.alpha - 1.0) / gamma(self.alpha)
    }

    /// `∫_lo^hi K(u) du`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.c * gamma_integral(self.alpha, self.rho, lo, hi)
    }

    /// `∫_lo^hi u K(u) du`.
    pub fn first_moment(&self, lo: f64, hi: f64) -> f64 {
        self.c * self.alpha * gamma_integral(self.alpha + 1.0, self.rho, lo, hi)
    }

    /// `∫_lo^hi K(u)² du`; requires `α > 1/2`.
    pub fn square_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        if !self.is_square_integrable() {
            return Err(Error::domain(format!("kernel with alpha = {} is not square integrable", self.alpha)));
        }
        let a2 = 2.0 * self.alpha - 1.0;
        let g = gamma(self.alpha);
        Ok(self.c * self.c * gamma(a2) / (g * g) * gamma_integral(a2, 2.0 * self.rho, lo, hi))
    }

    /// `∫_{m h}^{(m+1) h} K(u) du` evaluated in unit-lag coordinates, so that integer lags stay
    /// exact for `α = 1`.
    pub fn cell_integral(&self, h: f64, m: usize) -> f64 {
        self.c * h.powf(self.alpha) * gamma_integral(self.alpha, self.rho * h, m as f64, m as f64 + 1.0)
    }

    /// `L_K(t) = ∫_0^∞ e^{-tu} K(u) du = c (t + ρ)^{-α}`.
    pub fn laplace(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("Laplace transform needs t > 0, got {t}")));
        }
        Ok(self.c * (t + self.rho).powf(-self.alpha))
    }

    /// The ρ-pseudo-inverse co-kernel, satisfying `K⋆K̃ = e^{-ρt}`.
    pub fn co_kernel(&self) -> CoKernel {
        match self.kind {
            // δ₀/c, and c⁻¹e^{ρu}δ₀(du) which is the same atom since it sits at u = 0
            KernelKind::Constant | KernelKind::Exponential => CoKernel {
                atom_weight: 1.0 / self.c,
                density: None,
                rho: self.rho,
            },
            KernelKind::Fractional | KernelKind::Gamma => CoKernel {
                atom_weight: 0.0,
                density: Some(Kernel {
                    kind: self.kind,
                    c: 1.0 / self.c,
                    alpha: 1.0 - self.alpha,
                    rho: self.rho,
                }),
                rho: self.rho,
            },
        }
    }

    /// `u ↦ e^{ρu} K(u)`, i.e. the same kernel without exponential decay.
    pub fn without_decay(&self) -> Kernel {
        let kind = match self.kind {
            KernelKind::Exponential => KernelKind::Constant,
            KernelKind::Gamma => KernelKind::Fractional,
            k => k,
        };
        Kernel { kind, c: self.c, alpha: self.alpha, rho: 0.0 }
    }

    /// Integrability and shift-Hölder metadata of the kernel on `[0, horizon]`.
    ///
    /// Power kernels need `α > 1/2`; `β` is the midpoint of `(1, 1/(2(1-α)))` and the shift
    /// exponent follows from scaling, `θ = α - 1 + 1/(2β)`.
    pub fn regularity(&self, horizon: f64) -> Option<KernelRegularity> {
        if !self.is_singular() {
            let beta = 2.0;
            let theta = 0.5;
            // Lipschitz kernel: ‖K(·+δ) - K‖_{2β} ≤ cρ δ T^{1/(2β)} ≤ cρ T^{1/(2β)+1-θ} δ^θ
            let lip = self.c * self.rho.max(f64::EPSILON);
            let c_shift = lip * horizon.powf(1.0 / (2.0 * beta) + 1.0 - theta);
            return Some(KernelRegularity { beta, theta, c_shift });
        }
        if !self.is_square_integrable() {
            return None;
        }
        let beta = 0.5 * (1.0 + 1.0 / (2.0 * (1.0 - self.alpha)));
        let theta = self.alpha - 1.0 + 1.0 / (2.0 * beta);
        let a = self.alpha;
        let p = 2.0 * beta;
        let shape = integrate(
            |y: f64| {
                let v = y.exp();
                v * (v.powf(a - 1.0) - (1.0 + v).powf(a - 1.0)).abs().powf(p)
            },
            -60.0,
            60.0,
            1e-12,
        );
        let c_shift = self.c / gamma(a) * shape.powf(1.0 / p);
        Some(KernelRegularity { beta, theta, c_shift })
    }
}

/// `(β, θ, C_K)` with `∫ K^{2β} < ∞` and `‖K(·+δ) - K‖_{L^{2β}} ≤ C_K δ^θ`. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRegularity {
    pub beta: f64,
    pub theta: f64,
    pub c_shift: f64,
}

/// A co-kernel: a Dirac atom at zero plus an optional Gamma-family density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoKernel {
    atom_weight: f64,
    density: Option<Kernel>,
    rho: f64,
}

impl CoKernel {
    pub fn new(atom_weight: f64, density: Option<Kernel>, rho: f64) -> Result<Self> {
        if !(atom_weight >= 0.0 && atom_weight.is_finite()) {
            return Err(Error::invalid(format!("atom weight must be nonnegative, got {atom_weight}")));
        }
        if atom_weight == 0.0 && density.is_none() {
            return Err(Error::invalid("co-kernel needs an atom or a density"));
        }
        if !(rho >= 0.0) {
            return Err(Error::invalid(format!("co-kernel decay rho must be nonnegative, got {rho}")));
        }
        Ok(Self { atom_weight, density, rho })
    }

    pub fn atom_weight(&self) -> f64 {
        self.atom_weight
    }

    pub fn density(&self) -> Option<&Kernel> {
        self.density.as_ref()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn is_pure_density(&self) -> bool {
        self.atom_weight == 0.0 && self.density.is_some()
    }

    /// Laplace transform of the measure `K̃`; an atom at zero contributes its weight.
    pub fn laplace(&self, t: f64) -> Result<f64> {
        let dens = match &self.density {
            Some(k) => k.laplace(t)?,
            None if t > 0.0 => 0.0,
            None => return Err(Error::domain(format!("Laplace transform needs t > 0, got {t}"))),
        };
        Ok(self.atom_weight + dens)
    }

    /// `φ̃(t) = (K̃⋆1)(t)`: the atom weight plus the running integral of the density.
    pub fn phi_tilde(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("phi_tilde needs t >= 0, got {t}")));
        }
        Ok(self.phi_tilde_unchecked(t))
    }

    pub(crate) fn phi_tilde_unchecked(&self, t: f64) -> f64 {
        self.atom_weight + self.density.map_or(0.0, |k| k.integral(0.0, t))
    }
}

/// How the sampled integrand is interpolated between grid nodes in product quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductRule {
    /// Piecewise-linear interpolant (product trapezoidal rule).
    #[default]
    Trapezoidal,
    /// Left-point piecewise-constant interpolant (product rectangle rule), first order.
    Rectangle,
}

// 8-point Gauss–Legendre on [0, 1]
const GL_X: [f64; 8] = [
    0.019_855_071_751_231_856,
    0.101_666_761_293_186_63,
    0.237_233_795_041_835_5,
    0.408_282_678_752_175_1,
    0.591_717_321_247_824_9,
    0.762_766_204_958_164_5,
    0.898_333_238_706_813_4,
    0.980_144_928_248_768_2,
];
const GL_W: [f64; 8] = [
    0.050_614_268_145_188_13,
    0.111_190_517_226_687_24,
    0.156_853_322_938_943_64,
    0.181_341_891_689_180_99,
    0.181_341_891_689_180_99,
    0.156_853_322_938_943_64,
    0.111_190_517_226_687_24,
    0.050_614_268_145_188_13,
];

/// Lag-indexed product-quadrature weights of a kernel on a uniform grid.
///
/// Lag cell `m` covers `u ∈ [mh, (m+1)h]`; at node `k` it pairs with the grid cell
/// `[t_j, t_{j+1}]`, `j = k - 1 - m`. The weights integrate the kernel exactly against the
/// interpolant of `f`: `older[m]` multiplies `f_j`, `newer[m]` multiplies `f_{j+1}`.
#[derive(Debug, Clone)]
pub struct ProductWeights {
    older: Vec<f64>,
    newer: Vec<f64>,
}

impl ProductWeights {
    pub fn new(kernel: &Kernel, grid: &PathGrid, rule: ProductRule) -> Self {
        let n = grid.n();
        let h = grid.step();
        let mut older = Vec::with_capacity(n);
        let mut newer = Vec::with_capacity(n);
        for m in 0..n {
            let mass = kernel.cell_integral(h, m);
            match rule {
                ProductRule::Rectangle => {
                    older.push(mass);
                    newer.push(0.0);
                }
                ProductRule::Trapezoidal => {
                    let far = far_end_share(kernel, h, m);
                    older.push(far);
                    newer.push(mass - far);
                }
            }
        }
        Self { older, newer }
    }

    /// `(K⋆f)` at every node of the grid the weights were built for.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.older.len();
        check_len("integrand samples", n + 1, f.len())?;
        let mut out = vec![0.0; n + 1];
        for (k, slot) in out.iter_mut().enumerate().skip(1) {
            let mut acc = 0.0;
            for j in 0..k {
                let m = k - 1 - j;
                acc += self.older[m] * f[j] + self.newer[m] * f[j + 1];
            }
            *slot = acc;
        }
        Ok(out)
    }
}

/// `(1/h) ∫_{mh}^{(m+1)h} (u - mh) K(u) du`: the share of the cell mass carried by the node
/// furthest in the past.
fn far_end_share(kernel: &Kernel, h: f64, m: usize) -> f64 {
    let (a, rho_h) = (kernel.alpha, kernel.rho * h);
    let scale = kernel.c * h.powf(a);
    let mf = m as f64;
    if m < 2 {
        // closed form through the first moment; no cancellation this close to the origin
        let g0 = gamma_integral(a, rho_h, mf, mf + 1.0);
        let g1 = a * gamma_integral(a + 1.0, rho_h, mf, mf + 1.0);
        return scale * (g1 - mf * g0);
    }
    let mut acc = 0.0;
    for (x, w) in GL_X.iter().zip(GL_W.iter()) {
        let v = mf + x;
        acc += w * x * v.powf(a - 1.0) * (-rho_h * v).exp();
    }
    scale * acc / gamma(a)
}

/// `(K⋆f)(t_k) = ∫_0^{t_k} K(t_k - s) f(s) ds` on the nodes of `grid`, with exact kernel
/// integrals against the piecewise-linear interpolant of `f`.
pub fn convolve(kernel: &Kernel, f: &SamplePath, grid: &PathGrid) -> Result<SamplePath> {
    convolve_with(kernel, f, grid, ProductRule::Trapezoidal)
}

pub fn convolve_with(
    kernel: &Kernel,
    f: &SamplePath,
    grid: &PathGrid,
    rule: ProductRule,
) -> Result<SamplePath> {
    if f.grid() != grid {
        return Err(Error::invalid("integrand is not sampled on the requested grid"));
    }
    let weights = ProductWeights::new(kernel, grid, rule);
    SamplePath::new(*grid, weights.apply(f.values())?)
}

/// `(K⋆K̃)(t)` for a kernel and a co-kernel.
///
/// When both are power kernels with the same decay rate the exponentials factor out and the
/// Beta identity gives `c c̃ e^{-ρt} t^{α+α̃-1} B(α, α̃) / (Γ(α)Γ(α̃))`; any other pair goes
/// through [`convolution_quadrature`].
pub fn kernel_co_kernel_product(kernel: &Kernel, co: &CoKernel, t: f64) -> Result<f64> {
    let mut value = 0.0;
    if co.atom_weight > 0.0 {
        value += co.atom_weight * kernel.eval(t)?;
    }
    if let Some(d) = &co.density {
        if !(t > 0.0) {
            return Ok(value);
        }
        value += if d.rho == kernel.rho {
            let (a1, a2) = (kernel.alpha, d.alpha);
            let beta_fn = gamma(a1) * gamma(a2) / gamma(a1 + a2);
            kernel.c * d.c * (-kernel.rho * t).exp() * t.powf(a1 + a2 - 1.0) * beta_fn
                / (gamma(a1) * gamma(a2))
        } else {
            convolution_quadrature(kernel, d, t)
        };
    }
    Ok(value)
}

/// `∫_0^t K₁(t-s) K₂(s) ds` by adaptive quadrature, after substitutions that remove the
/// power singularities at both ends.
pub fn convolution_quadrature(k1: &Kernel, k2: &Kernel, t: f64) -> f64 {
    let mid = 0.5 * t;
    // s = v^{1/α₂} on [0, t/2]
    let a2 = k2.alpha;
    let left = integrate(
        |v: f64| {
            let s = v.powf(1.0 / a2);
            k1.eval_unchecked(t - s) * k2.c * (-k2.rho * s).exp() / (a2 * gamma(a2))
        },
        0.0,
        mid.powf(a2),
        1e-14,
    );
    // t - s = w^{1/α₁} on [t/2, t]
    let a1 = k1.alpha;
    let right = integrate(
        |w: f64| {
            let u = w.powf(1.0 / a1);
            k2.eval_unchecked(t - u) * k1.c * (-k1.rho * u).exp() / (a1 * gamma(a1))
        },
        0.0,
        (t - mid).powf(a1),
        1e-14,
    );
    left + right
}

/// Outcome of [`verify_pseudo_inverse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoInverseCheck {
    pub max_abs_error: f64,
    pub tolerance: f64,
}

impl PseudoInverseCheck {
    pub fn passed(&self) -> bool {
        self.max_abs_error <= self.tolerance
    }
}

/// Max over the grid nodes of `|(K⋆K̃)(t) - e^{-ρt}|`. The node `t = 0` is skipped whenever
/// the product is not defined there.
pub fn verify_pseudo_inverse(
    kernel: &Kernel,
    co: &CoKernel,
    grid: &PathGrid,
    tol: f64,
) -> Result<PseudoInverseCheck> {
    let skip_origin = co.density.is_some() || kernel.is_singular();
    let mut worst: f64 = 0.0;
    for k in usize::from(skip_origin)..=grid.n() {
        let t = grid.t(k);
        let value = kernel_co_kernel_product(kernel, co, t)?;
        worst = worst.max((value - (-co.rho * t).exp()).abs());
    }
    Ok(PseudoInverseCheck { max_abs_error: worst, tolerance: tol })
}

/// Same check on an arbitrary set of evaluation points (all must be positive).
pub fn verify_pseudo_inverse_at(kernel: &Kernel, co: &CoKernel, points: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in points {
        let value = kernel_co_kernel_product(kernel, co, t)?;
        worst = worst.max((value - (-co.rho * t).exp()).abs());
    }
    Ok(worst)
}

/// `max |L_K(t) L_{K̃}(t) - 1/(t+ρ)|` over the given points.
pub fn laplace_product_error(kernel: &Kernel, points: &[f64]) -> Result<f64> {
    let co = kernel.co_kernel();
    let mut worst: f64 = 0.0;
    for &t in points {
        let prod = kernel.laplace(t)? * co.laplace(t)?;
        worst = worst.max((prod - 1.0 / (t + kernel.rho)).abs());
    }
    Ok(worst)
}

/// `count` logarithmically spaced points between `lo` and `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t: f64) -> PathGrid {
        PathGrid::new(n, t).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Kernel::constant(2.0).unwrap().eval(5.0).unwrap(), 2.0);
        let one = Kernel::fractional(1.0, 1.0).unwrap();
        for &t in &[0.1, 1.0, 7.5] {
            assert_eq!(one.eval(t).unwrap(), 1.0);
        }
        let frac = Kernel::fractional(1.0, 0.6).unwrap();
        // Γ(0.6) from the Euler reflection Γ(0.6)Γ(0.4) = π / sin(0.6π), Γ(0.4) = 2.218159543757688
        let g06 = std::f64::consts::PI / ((0.6 * std::f64::consts::PI).sin() * 2.218_159_543_757_688);
        assert!((frac.eval(1.0).unwrap() - 1.0 / g06).abs() < 1e-13);
    }

    #[test]
    fn singular_kernel_rejects_origin() {
        let frac = Kernel::fractional(1.0, 0.6).unwrap();
        assert!(matches!(frac.eval(0.0), Err(Error::Domain(_))));
        assert!(frac.eval(-1.0).is_err());
        assert_eq!(Kernel::constant(3.0).unwrap().eval(0.0).unwrap(), 3.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(Kernel::gamma(0.0, 0.5, 1.0).is_err());
        assert!(Kernel::gamma(1.0, 1.5, 1.0).is_err());
        assert!(Kernel::gamma(1.0, 0.5, -1.0).is_err());
        assert!(Kernel::new(KernelKind::Constant, 1.0, 0.5, 0.0).is_err());
        assert!(Kernel::new(KernelKind::Fractional, 1.0, 0.5, 0.3).is_err());
        assert!(Kernel::from_hurst(0.5).is_err());
    }

    #[test]
    fn co_kernel_table() {
        let ck = Kernel::fractional(1.0, 0.6).unwrap().co_kernel();
        let d = ck.density().unwrap();
        assert_eq!(ck.atom_weight(), 0.0);
        assert_eq!((d.c(), d.rho()), (1.0, 0.0));
        assert!((d.alpha() - 0.4).abs() < 1e-15);

        let ck = Kernel::constant(2.0).unwrap().co_kernel();
        assert_eq!(ck.atom_weight(), 0.5);
        assert!(ck.density().is_none());

        let ck = Kernel::gamma(3.0, 0.7, 1.2).unwrap().co_kernel();
        let d = ck.density().unwrap();
        assert!((d.c() - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.alpha() - 0.3).abs() < 1e-15);
        assert_eq!(d.rho(), 1.2);

        let ck = Kernel::exponential(4.0, 0.7).unwrap().co_kernel();
        assert_eq!(ck.atom_weight(), 0.25);
        assert_eq!(ck.rho(), 0.7);
    }

    #[test]
    fn co_kernel_pairing_is_involutive() {
        for &a in &[0.1, 0.55, 0.9] {
            let k = Kernel::fractional(2.5, a).unwrap();
            let back = k.co_kernel().density().unwrap().co_kernel();
            let d = back.density().unwrap();
            assert!((d.c() - 2.5).abs() < 1e-14);
            assert!((d.alpha() - a).abs() < 1e-14);
        }
    }

    #[test]
    fn laplace_examples() {
        let k = Kernel::gamma(1.0, 0.5, 1.0).unwrap();
        assert!((k.laplace(3.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(Kernel::constant(2.0).unwrap().laplace(4.0).unwrap(), 0.5);
        assert!(k.laplace(0.0).is_err());
        let g = Kernel::gamma(2.0, 0.3, 0.8).unwrap();
        for &t in &[0.01, 1.0, 50.0] {
            let prod = g.laplace(t).unwrap() * g.co_kernel().laplace(t).unwrap();
            assert!((prod - 1.0 / (t + 0.8)).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_matches_numerical_transform() {
        let k = Kernel::gamma(1.5, 0.7, 0.4).unwrap();
        let t = 2.0;
        // u = v^{1/α}
        let num = integrate(
            |v: f64| {
                let u = v.powf(1.0 / 0.7);
                1.5 * (-(t + 0.4) * u).exp() / (0.7 * gamma(0.7))
            },
            0.0,
            60f64.powf(0.7),
            1e-14,
        );
        assert!((num - k.laplace(t).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn phi_tilde_examples() {
        let ck = Kernel::fractional(1.0, 0.6).unwrap().co_kernel();
        assert!((ck.phi_tilde(1.0).unwrap() - 1.0 / gamma(1.4)).abs() < 1e-15);
        assert_eq!(ck.phi_tilde(0.0).unwrap(), 0.0);
        let atom = Kernel::constant(2.0).unwrap().co_kernel();
        for &t in &[0.0, 0.3, 10.0] {
            assert_eq!(atom.phi_tilde(t).unwrap(), 0.5);
        }
        // (K⋆K̃)(t) = 1 for the constant pair
        let g = grid(10, 1.0);
        let check = verify_pseudo_inverse(&Kernel::constant(2.0).unwrap(), &atom, &g, 0.0).unwrap();
        assert_eq!(check.max_abs_error, 0.0);
        assert!(ck.phi_tilde(-1.0).is_err());
    }

    #[test]
    fn phi_tilde_monotone_and_concave() {
        for ck in [
            Kernel::fractional(1.0, 0.6).unwrap().co_kernel(),
            Kernel::gamma(0.5, 0.8, 2.0).unwrap().co_kernel(),
        ] {
            let vals: Vec<f64> = (0..=200).map(|k| ck.phi_tilde(k as f64 * 0.02).unwrap()).collect();
            for w in vals.windows(3) {
                assert!(w[1] >= w[0]);
                assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-14);
            }
        }
    }

    #[test]
    fn convolve_constant_kernel_with_one() {
        let g = grid(50, 2.0);
        let out = convolve(&Kernel::constant(3.0).unwrap(), &SamplePath::constant(g, 1.0), &g).unwrap();
        for k in 0..=50 {
            assert!((out[k] - 3.0 * g.t(k)).abs() < 1e-13);
        }
    }

    #[test]
    fn convolve_integrates_linear_functions_exactly() {
        // (K_{1,α} ⋆ s)(t) = t^{α+1}/Γ(α+2) and the integrand is its own interpolant
        let g = grid(64, 1.5);
        let k = Kernel::fractional(1.0, 0.35).unwrap();
        let out = convolve(&k, &SamplePath::from_fn(g, |s| s), &g).unwrap();
        for i in 0..=64 {
            let t = g.t(i);
            assert!((out[i] - t.powf(1.35) / gamma(2.35)).abs() < 1e-12, "node {i}");
        }
    }

    #[test]
    fn convolve_gamma_kernel_against_quadrature() {
        let g = grid(32, 2.0);
        let k = Kernel::gamma(1.3, 0.45, 0.9).unwrap();
        let out = convolve(&k, &SamplePath::from_fn(g, |s| 1.0 + 2.0 * s), &g).unwrap();
        let t: f64 = 2.0;
        let exact = integrate(
            |v: f64| {
                let u = v.powf(1.0 / 0.45);
                1.3 * (-0.9 * u).exp() * (1.0 + 2.0 * (t - u)) / (0.45 * gamma(0.45))
            },
            0.0,
            t.powf(0.45),
            1e-14,
        );
        assert!((out.terminal() - exact).abs() < 1e-11);
    }

    #[test]
    fn fractional_pairs_convolve_to_one() {
        let pts: Vec<f64> = (1..=500).map(|i| 0.01 * i as f64).collect();
        for &a in &[0.55, 0.6, 0.9] {
            let k = Kernel::fractional(1.0, a).unwrap();
            assert!(verify_pseudo_inverse_at(&k, &k.co_kernel(), &pts).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn quadrature_route_agrees_with_beta_identity() {
        let k = Kernel::gamma(1.0, 0.6, 1.2).unwrap();
        let d = *k.co_kernel().density().unwrap();
        for &t in &[0.01, 0.3, 1.0, 5.0] {
            let q = convolution_quadrature(&k, &d, t);
            assert!((q - (-1.2 * t).exp()).abs() < 1e-9, "t = {t}: {q}");
        }
    }

    #[test]
    fn mismatched_decay_uses_quadrature() {
        let k = Kernel::gamma(1.0, 0.6, 1.2).unwrap();
        let wrong = CoKernel::new(0.0, Some(Kernel::gamma(1.0, 0.4, 0.3).unwrap()), 1.2).unwrap();
        let g = grid(20, 1.0);
        let check = verify_pseudo_inverse(&k, &wrong, &g, 1e-6).unwrap();
        assert!(!check.passed());
    }

    #[test]
    fn trapezoidal_weights_split_cell_mass() {
        let g = grid(16, 1.0);
        let k = Kernel::gamma(1.0, 0.3, 0.5).unwrap();
        let w = ProductWeights::new(&k, &g, ProductRule::Trapezoidal);
        for m in 0..16 {
            let mass = k.cell_integral(g.step(), m);
            assert!((w.older[m] + w.newer[m] - mass).abs() < 1e-15);
            let expect = (k.first_moment(m as f64 / 16.0, (m + 1) as f64 / 16.0)
                - m as f64 / 16.0 * mass)
                * 16.0;
            assert!((w.older[m] - expect).abs() < 1e-12 * mass.max(1e-3), "m = {m}");
        }
    }

    #[test]
    fn regularity_metadata() {
        let r = Kernel::fractional(1.0, 0.6).unwrap().regularity(1.0).unwrap();
        assert!(r.beta > 1.0 && r.beta < 1.0 / 0.8);
        assert!(r.theta > 0.0 && r.theta < 1.0);
        assert!(r.c_shift > 0.0 && r.c_shift.is_finite());
        assert!(Kernel::fractional(1.0, 0.4).unwrap().regularity(1.0).is_none());
        let e = Kernel::exponential(1.0, 2.0).unwrap().regularity(1.0).unwrap();
        assert!(e.theta > 0.0 && e.theta < 1.0);
    }

    #[test]
    fn log_spacing() {
        let p = log_spaced(1e-3, 1e3, 7);
        assert_eq!(p.len(), 7);
        assert!((p[0] - 1e-3).abs() < 1e-18);
        assert!((p[3] - 1.0).abs() < 1e-14);
        assert!((p[6] - 1e3).abs() < 1e-9);
    }
}
