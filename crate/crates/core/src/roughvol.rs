//! A rough-volatility model driven by a fractional memory process.
//!
//! With `α = H + 1/2` and `K = K_{1,α}`, the process `Z` solves the Volterra equation
//! `Z_t = ξ⁰ + ∫ K(t-s)(μ - λY_s) ds + ∫ K(t-s) σ(Y_s) dW_s` whose memory process is
//! `Y = I^{1/2-H} Z`. The variance is `V = a(Y - b)² + c = σ(Y)²` and the asset follows
//! `dS = S(r dt + √V dW)`.
//!
//! [`RoughVolScheme::Scheme1`] is the frozen-kernel Euler scheme,
//! [`RoughVolScheme::Scheme2`] integrates the kernel exactly over the drift cells and
//! [`RoughVolScheme::Hybrid`] also treats the most recent diffusion cell exactly. All share
//! the Euler scheme of `Y`, whose burst increments are `ξ⁰(t_k^{1/2-H} - t_{k-1}^{1/2-H})/Γ(3/2-H)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{PathGrid, SamplePath};
use crate::kernels::Kernel;
use crate::noise::FabricPath;
use crate::sde::{Coefficients, InitialCondition, MemoryProcessSpec, XiScheme};
use crate::volterra::{SchemeVariant, VolterraSpec, XScheme};

/// Model and grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
/// Missing fields in a config take their [`Default`] values.
#[serde(default, deny_unknown_fields)]
pub struct RoughVolParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
    pub hurst: f64,
    pub xi0: f64,
    pub r: f64,
    pub s0: f64,
    pub horizon: f64,
    pub n: usize,
}

impl Default for RoughVolParams {
    fn default() -> Self {
        Self {
            a: 0.384,
            b: 0.095,
            c: 0.0025,
            lambda: 1.2,
            mu: 2.0,
            hurst: 0.1,
            xi0: 2.0 / 1.2,
            r: 0.01,
            s0: 100.0,
            horizon: 30.0,
            n: 8192,
        }
    }
}

impl RoughVolParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(msg));
        if !(self.a > 0.0) {
            return fail(format!("a must be positive, got {}", self.a));
        }
        if !(self.b >= 0.0 && self.c >= 0.0) {
            return fail(format!("b and c must be nonnegative, got b = {}, c = {}", self.b, self.c));
        }
        if !(self.hurst > 0.0 && self.hurst < 0.5) {
            return fail(format!("hurst must lie in (0, 1/2), got {}", self.hurst));
        }
        if !(self.s0 > 0.0) {
            return fail(format!("s0 must be positive, got {}", self.s0));
        }
        if !(self.r >= 0.0) {
            return fail(format!("r must be nonnegative, got {}", self.r));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return fail(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.n == 0 {
            return fail("n must be positive".to_string());
        }
        if ![self.lambda, self.mu, self.xi0].iter().all(|v| v.is_finite()) {
            return fail("lambda, mu and xi0 must be finite".to_string());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PathGrid> {
        PathGrid::new(self.n, self.horizon)
    }

    /// `K_{1, H+1/2}`.
    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::from_hurst(self.hurst)
    }

    /// `b(x) = μ - λx` and `σ(x) = √(a(x - b)² + c)`.
    pub fn coefficients(&self) -> Result<Coefficients> {
        let p = *self;
        Coefficients::new(
            move |_, x| p.mu - p.lambda * x,
            move |_, x| sigma_v(x, &p),
            1.0,
            p.lambda.abs(),
            p.a.sqrt(),
        )
    }

    pub fn volterra_spec(&self, scheme: RoughVolScheme) -> Result<VolterraSpec> {
        self.validate()?;
        let memory = MemoryProcessSpec::with_kernel(
            InitialCondition::Point { value: self.xi0 },
            self.kernel()?,
            self.coefficients()?,
            self.horizon,
        )?;
        VolterraSpec::new(memory, scheme.variant())
    }
}

/// `σ(x) = √(a(x - b)² + c)`.
pub fn sigma_v(x: f64, p: &RoughVolParams) -> f64 {
    variance_of(x, p).sqrt()
}

fn variance_of(y: f64, p: &RoughVolParams) -> f64 {
    let d = y - p.b;
    p.a * d * d + p.c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoughVolScheme {
    #[default]
    Scheme1,
    Scheme2,
    /// Needs auxiliary normals in the noise.
    Hybrid,
}

impl RoughVolScheme {
    pub fn variant(self) -> SchemeVariant {
        match self {
            RoughVolScheme::Scheme1 => SchemeVariant::FrozenKernel,
            RoughVolScheme::Scheme2 => SchemeVariant::SemiIntegratedDrift,
            RoughVolScheme::Hybrid => SchemeVariant::HybridDiffusion,
        }
    }
}

/// Cached weights for repeated simulation of `(Y, Z)` with one scheme.
#[derive(Debug, Clone)]
pub struct RoughVolSimulator {
    params: RoughVolParams,
    grid: PathGrid,
    y_scheme: XiScheme,
    z_scheme: XScheme,
}

impl RoughVolSimulator {
    pub fn new(params: RoughVolParams, scheme: RoughVolScheme) -> Result<Self> {
        let spec = params.volterra_spec(scheme)?;
        let grid = params.grid()?;
        Ok(Self {
            params,
            grid,
            y_scheme: XiScheme::new(spec.memory(), grid)?,
            z_scheme: XScheme::new(&spec, grid, params.n)?,
        })
    }

    pub fn params(&self) -> &RoughVolParams {
        &self.params
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    /// `Y` alone, `O(n)`.
    pub fn y_path(&self, dw: &[f64]) -> Result<SamplePath> {
        self.y_scheme.run(dw, self.params.xi0)
    }

    /// `(Y, Z)` on the whole grid; `O(n²)` because of `Z`.
    pub fn run(&self, noise: &FabricPath) -> Result<(SamplePath, SamplePath)> {
        let y = self.y_path(noise.increments(self.grid.n())?)?;
        let z = self.z_scheme.path(noise, y.values(), self.params.xi0)?;
        Ok((y, z))
    }

    /// `(Y_T, Z_T)` in `O(n)` operations.
    pub fn terminal(&self, noise: &FabricPath) -> Result<(f64, f64)> {
        let y = self.y_path(noise.increments(self.grid.n())?)?;
        let z = self.z_scheme.endpoint(noise, y.values(), self.params.xi0)?;
        Ok((y.terminal(), z))
    }
}

fn run_plain(p: &RoughVolParams, scheme: RoughVolScheme, dw: &[f64]) -> Result<(SamplePath, SamplePath)> {
    check_len("Brownian increments", p.n, dw.len())?;
    let noise = FabricPath::from_increments(p.horizon, dw.to_vec(), None)?;
    RoughVolSimulator::new(*p, scheme)?.run(&noise)
}

pub fn scheme1(p: &RoughVolParams, dw: &[f64]) -> Result<(SamplePath, SamplePath)> {
    run_plain(p, RoughVolScheme::Scheme1, dw)
}

pub fn scheme2(p: &RoughVolParams, dw: &[f64]) -> Result<(SamplePath, SamplePath)> {
    run_plain(p, RoughVolScheme::Scheme2, dw)
}

/// `V_k = a(Y_k - b)² + c`.
pub fn variance_path(p: &RoughVolParams, y: &SamplePath) -> SamplePath {
    let values = y.values().iter().map(|&v| variance_of(v, p)).collect();
    SamplePath::new(*y.grid(), values).expect("same length as y")
}

/// Log-Euler scheme `log S_{k+1} = log S_k + (r - V_k/2)h + √V_k ΔW_k`.
pub fn simulate_asset(p: &RoughVolParams, y: &SamplePath, dw_asset: &[f64]) -> Result<SamplePath> {
    let grid = *y.grid();
    let n = grid.n();
    check_len("asset increments", n, dw_asset.len())?;
    let h = grid.step();
    let mut out = Vec::with_capacity(n + 1);
    out.push(p.s0);
    let mut log_growth = 0.0;
    for k in 0..n {
        let v = variance_of(y[k], p);
        log_growth += (p.r - 0.5 * v) * h + v.sqrt() * dw_asset[k];
        out.push(p.s0 * log_growth.exp());
    }
    SamplePath::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::BrownianFabric;
    use crate::special::gamma;

    fn small(n: usize, horizon: f64) -> RoughVolParams {
        RoughVolParams { n, horizon, ..RoughVolParams::default() }
    }

    #[test]
    fn sigma_examples() {
        let p = RoughVolParams::default();
        assert!((sigma_v(p.b, &p) - 0.05).abs() <= 1e-16);
        let q = RoughVolParams { a: 1.0, b: 0.0, c: 0.0, ..p };
        assert_eq!(sigma_v(3.0, &q), 3.0);
        let x: f64 = 5.0 / 3.0;
        let by_hand = (0.384 * (x - 0.095) * (x - 0.095) + 0.0025f64).sqrt();
        assert!((sigma_v(x, &p) - by_hand).abs() <= 1e-15);
        assert!((sigma_v(x, &p) - 0.975_208_832_336_267_8).abs() <= 1e-14);
    }

    #[test]
    fn validation() {
        assert!(RoughVolParams::default().validate().is_ok());
        assert!(RoughVolParams { hurst: 0.5, ..Default::default() }.validate().is_err());
        assert!(RoughVolParams { a: 0.0, ..Default::default() }.validate().is_err());
        assert!(RoughVolParams { s0: 0.0, ..Default::default() }.validate().is_err());
        assert!(RoughVolParams { n: 0, ..Default::default() }.validate().is_err());
        assert!(scheme1(&small(0, 1.0), &[]).is_err());
    }

    /// The Scheme-1 recursion written out with plain loops.
    fn scheme1_by_hand(p: &RoughVolParams, dw: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = dw.len();
        let h = p.horizon / n as f64;
        let t = |k: usize| k as f64 * h;
        let e = 0.5 - p.hurst;
        let mut y = vec![0.0; n + 1];
        let mut z = vec![p.xi0; n + 1];
        let mut delta = vec![0.0; n + 1];
        for k in 1..=n {
            let d0 = p.xi0 / gamma(1.5 - p.hurst) * (t(k).powf(e) - t(k - 1).powf(e));
            let s = (p.a * (y[k - 1] - p.b).powi(2) + p.c).sqrt();
            delta[k] = (p.mu - p.lambda * y[k - 1]) * h + s * dw[k - 1];
            y[k] = y[k - 1] + d0 + delta[k];
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (t(k) - t(j - 1)).powf(p.hurst - 0.5) * delta[j];
            }
            z[k] = p.xi0 + acc / gamma(p.hurst + 0.5);
        }
        (y, z)
    }

    fn scheme2_by_hand(p: &RoughVolParams, dw: &[f64]) -> Vec<f64> {
        let n = dw.len();
        let h = p.horizon / n as f64;
        let t = |k: usize| k as f64 * h;
        let al = p.hurst + 0.5;
        let (y, _) = scheme1_by_hand(p, dw);
        let mut z = vec![p.xi0; n + 1];
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                let yj = y[j - 1];
                let s = (p.a * (yj - p.b).powi(2) + p.c).sqrt();
                let w = ((t(k) - t(j - 1)).powf(al) - (t(k) - t(j)).powf(al)) / (al * gamma(al));
                acc += w * (p.mu - p.lambda * yj) + (t(k) - t(j - 1)).powf(al - 1.0) / gamma(al) * s * dw[j - 1];
            }
            z[k] = p.xi0 + acc;
        }
        z
    }

    #[test]
    fn schemes_follow_their_recursions() {
        let p = small(64, 2.0);
        let fabric = BrownianFabric::new(4, 64, 3, 2.0).unwrap();
        for i in 0..3 {
            let noise = fabric.path(i);
            let dw = noise.fine();
            let (y1, z1) = scheme1(&p, dw).unwrap();
            let (y_ref, z_ref) = scheme1_by_hand(&p, dw);
            let (y2, z2) = scheme2(&p, dw).unwrap();
            let z2_ref = scheme2_by_hand(&p, dw);
            for k in 0..=64 {
                assert!((y1[k] - y_ref[k]).abs() <= 1e-12, "Y at {k}");
                assert!((z1[k] - z_ref[k]).abs() <= 1e-11, "Z1 at {k}: {} vs {}", z1[k], z_ref[k]);
                assert!((z2[k] - z2_ref[k]).abs() <= 1e-11, "Z2 at {k}");
                assert_eq!(y1[k], y2[k]);
            }
            assert_eq!(z1[0], p.xi0);
            assert_eq!(z2[0], p.xi0);
            assert_eq!(y1[0], 0.0);
        }
    }

    #[test]
    fn deterministic_y_without_reversion() {
        let p = RoughVolParams { lambda: 0.0, ..small(128, 3.0) };
        let (y, _) = scheme1(&p, &[0.0; 128]).unwrap();
        for k in 0..=128 {
            let t = y.grid().t(k);
            let exact = p.xi0 * t.powf(0.5 - p.hurst) / gamma(1.5 - p.hurst) + p.mu * t;
            assert!((y[k] - exact).abs() <= 1e-12 * (1.0 + exact), "{k}");
        }
    }

    #[test]
    fn deterministic_schemes_for_small_grids() {
        // zero noise, constant drift μ: Z_k = ξ⁰ + μ Σ_j w_{kj}, with exact cell integrals for
        // Scheme 2 and left-point kernel values for Scheme 1
        for n in 1..=8 {
            let p = RoughVolParams { lambda: 0.0, mu: 0.7, xi0: 1.0, ..small(n, 1.0) };
            let (_, z1) = scheme1(&p, &vec![0.0; n]).unwrap();
            let (_, z2) = scheme2(&p, &vec![0.0; n]).unwrap();
            let al = p.hurst + 0.5;
            let h = 1.0 / n as f64;
            for k in 0..=n {
                let t = k as f64 * h;
                let exact2 = 1.0 + 0.7 * t.powf(al) / gamma(al + 1.0);
                assert!((z2[k] - exact2).abs() <= 1e-13, "n={n} k={k}");
                let riemann: f64 = (1..=k).map(|j| ((k - j + 1) as f64 * h).powf(al - 1.0)).sum::<f64>() * h;
                assert!((z1[k] - (1.0 + 0.7 * riemann / gamma(al))).abs() <= 1e-13);
                assert!((z1[k] - z2[k]).abs() <= 2.0 * h.powf(0.5 - p.hurst));
            }
        }
        let p = RoughVolParams { lambda: 0.0, mu: 0.0, xi0: 1.0, ..small(8, 1.0) };
        let (_, z1) = scheme1(&p, &[0.0; 8]).unwrap();
        let (_, z2) = scheme2(&p, &[0.0; 8]).unwrap();
        assert_eq!(z1.values(), z2.values());
    }

    #[test]
    fn terminal_matches_full_run() {
        let p = small(256, 5.0);
        let fabric = BrownianFabric::new(12, 256, 1, 5.0).unwrap();
        let noise = fabric.path_with_aux(0);
        for s in [RoughVolScheme::Scheme1, RoughVolScheme::Scheme2, RoughVolScheme::Hybrid] {
            let sim = RoughVolSimulator::new(p, s).unwrap();
            let (y, z) = sim.run(&noise).unwrap();
            assert_eq!(sim.terminal(&noise).unwrap(), (y.terminal(), z.terminal()));
        }
    }

    #[test]
    fn asset_without_variance_grows_at_the_rate() {
        let p = RoughVolParams { a: 1.0, b: 0.0, c: 0.0, r: 0.03, ..small(100, 2.0) };
        let grid = p.grid().unwrap();
        let y = SamplePath::constant(grid, 0.0);
        let s = simulate_asset(&p, &y, &[0.4; 100]).unwrap();
        for k in 0..=100 {
            let exact = p.s0 * (p.r * grid.t(k)).exp();
            assert!((s[k] - exact).abs() <= 1e-13 * exact);
        }
    }

    #[test]
    fn asset_is_a_martingale_without_rate() {
        // V ≡ v through a constant Y with a = 1, c = 0: Y = b + √v
        let v: f64 = 0.09;
        let p = RoughVolParams { a: 1.0, b: 0.0, c: 0.0, r: 0.0, ..small(50, 1.0) };
        let grid = p.grid().unwrap();
        let y = SamplePath::constant(grid, v.sqrt());
        let paths = 10_000;
        let fabric = BrownianFabric::new(31, 64, paths, 1.0).unwrap();
        let terminal: Vec<f64> = (0..paths)
            .map(|i| {
                let dw: Vec<f64> = fabric.normals(i, crate::noise::NoiseStream::Asset, 50).iter().map(|z| z * 0.02f64.sqrt()).collect();
                simulate_asset(&p, &y, &dw).unwrap().terminal()
            })
            .collect();
        let m = paths as f64;
        let mean = terminal.iter().sum::<f64>() / m;
        let var = terminal.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        assert!((mean - p.s0).abs() <= 3.0 * (var / m).sqrt(), "{mean}");
    }

    #[test]
    fn variance_floor_and_positive_asset() {
        let p = small(512, 30.0);
        let fabric = BrownianFabric::new(77, 512, 20, 30.0).unwrap();
        for i in 0..20 {
            let dw = fabric.path(i).fine().to_vec();
            let (y, _) = scheme1(&p, &dw).unwrap();
            assert!(variance_path(&p, &y).values().iter().all(|&v| v >= p.c));
            let s = simulate_asset(&p, &y, &dw).unwrap();
            assert!(s.values().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn z_paths_have_the_prescribed_roughness() {
        // the left-point kernel underweights the newest cell, which bends the structure
        // function of frozen-kernel paths at the smallest lags; the hybrid scheme does not
        let p = RoughVolParams::default();
        let sim = RoughVolSimulator::new(p, RoughVolScheme::Hybrid).unwrap();
        let paths = 100;
        let fabric = BrownianFabric::new(2023, p.n, paths, p.horizon).unwrap();
        let lags = [1usize, 2, 4, 8, 16, 32];
        let mut moments = [0.0; 6];
        for i in 0..paths {
            let (_, z) = sim.run(&fabric.path_with_aux(i)).unwrap();
            for (slot, &lag) in moments.iter_mut().zip(&lags) {
                let zs = z.values();
                let m = (0..zs.len() - lag).map(|k| (zs[k + lag] - zs[k]).abs()).sum::<f64>();
                *slot += m / (zs.len() - lag) as f64;
            }
        }
        let xs: Vec<f64> = lags.iter().map(|&l| (l as f64).ln()).collect();
        let ys: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 6.0;
        let my = ys.iter().sum::<f64>() / 6.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope > p.hurst - 0.05 && slope < p.hurst + 0.10, "slope {slope}");
    }
}
