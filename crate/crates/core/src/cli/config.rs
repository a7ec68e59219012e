//! Strict TOML experiment configuration. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelKind};
use crate::roughvol::{RoughVolParams, RoughVolScheme};
use crate::sde::{Coefficients, InitialCondition, MemoryProcessSpec};
use crate::volterra::{SchemeVariant, VolterraSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub roughvol: RoughVolParams,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub kernel_check: KernelCheckConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }
}

/// A kernel from the Gamma family; give either `alpha` or `hurst` (`α = H + 1/2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelKind,
    #[serde(default = "one")]
    pub c: f64,
    pub alpha: Option<f64>,
    pub hurst: Option<f64>,
    #[serde(default)]
    pub rho: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { kind: KernelKind::Fractional, c: 1.0, alpha: None, hurst: Some(0.1), rho: 0.0 }
    }
}

impl KernelConfig {
    pub fn build(&self) -> Result<Kernel> {
        let alpha = match (self.alpha, self.hurst) {
            (Some(_), Some(_)) => return Err(Error::invalid("kernel: give alpha or hurst, not both")),
            (Some(a), None) => a,
            (None, Some(h)) => h + 0.5,
            (None, None) => match self.kind {
                KernelKind::Constant | KernelKind::Exponential => 1.0,
                _ => return Err(Error::invalid("kernel: alpha or hurst is required for power kernels")),
            },
        };
        Kernel::new(self.kind, self.c, alpha, self.rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftConfig {
    Constant { value: f64 },
    /// `μ - λx`.
    MeanReverting { mu: f64, lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffusionConfig {
    Constant { value: f64 },
    /// `√(a(x - b)² + c)`.
    RoughVol { a: f64, b: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub drift: DriftConfig,
    pub diffusion: DiffusionConfig,
    pub xi0: InitialCondition,
}

impl Default for CoefficientsConfig {
    fn default() -> Self {
        let p = RoughVolParams::default();
        Self {
            drift: DriftConfig::MeanReverting { mu: p.mu, lambda: p.lambda },
            diffusion: DiffusionConfig::RoughVol { a: p.a, b: p.b, c: p.c },
            xi0: InitialCondition::Point { value: p.mu / p.lambda },
        }
    }
}

impl CoefficientsConfig {
    pub fn build(&self) -> Result<Coefficients> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        let (drift, lip_b): (Box<dyn Fn(f64, f64) -> f64 + Send + Sync>, f64) = match self.drift {
            DriftConfig::Constant { value } if finite(&[value]) => (Box::new(move |_, _| value), 0.0),
            DriftConfig::MeanReverting { mu, lambda } if finite(&[mu, lambda]) => {
                (Box::new(move |_, x| mu - lambda * x), lambda.abs())
            }
            d => return Err(Error::invalid(format!("coefficients: invalid drift {d:?}"))),
        };
        let (diffusion, lip_s): (Box<dyn Fn(f64, f64) -> f64 + Send + Sync>, f64) = match self.diffusion {
            DiffusionConfig::Constant { value } if finite(&[value]) => (Box::new(move |_, _| value), 0.0),
            DiffusionConfig::RoughVol { a, b, c } if a >= 0.0 && c >= 0.0 && finite(&[a, b, c]) => (
                Box::new(move |_, x| (a * (x - b) * (x - b) + c).sqrt()),
                a.sqrt(),
            ),
            d => return Err(Error::invalid(format!("coefficients: invalid diffusion {d:?}"))),
        };
        Coefficients::new(drift, diffusion, 1.0, lip_b, lip_s)
    }

    pub fn volterra_spec(&self, kernel: Kernel, horizon: f64, variant: SchemeVariant) -> Result<VolterraSpec> {
        let memory = MemoryProcessSpec::with_kernel(self.xi0, kernel, self.build()?, horizon)?;
        VolterraSpec::new(memory, variant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// `ξ` and `X` from the `[kernel]` and `[coefficients]` sections.
    Volterra,
    /// `Y`, `Z`, `V` and `S` from the `[roughvol]` section.
    #[default]
    Roughvol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimProcess {
    Xi,
    X,
    Y,
    Z,
    V,
    S,
}

impl SimProcess {
    pub fn label(self) -> &'static str {
        match self {
            SimProcess::Xi => "xi",
            SimProcess::X => "x",
            SimProcess::Y => "y",
            SimProcess::Z => "z",
            SimProcess::V => "v",
            SimProcess::S => "s",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub model: Model,
    pub processes: Option<Vec<SimProcess>>,
    #[serde(default = "one_path")]
    pub paths: usize,
    /// Grid size and horizon of the `volterra` model; `roughvol` takes both from its section.
    #[serde(default = "default_sim_n")]
    pub n: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub variant: SchemeVariant,
    #[serde(default)]
    pub scheme: RoughVolScheme,
    #[serde(default)]
    pub independent_asset_noise: bool,
}

fn one_path() -> usize {
    1
}

fn default_sim_n() -> usize {
    1024
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: Model::default(),
            processes: None,
            paths: 1,
            n: default_sim_n(),
            horizon: 1.0,
            variant: SchemeVariant::default(),
            scheme: RoughVolScheme::default(),
            independent_asset_noise: false,
        }
    }
}

impl SimulateConfig {
    pub fn processes(&self) -> Vec<SimProcess> {
        self.processes.clone().unwrap_or_else(|| match self.model {
            Model::Volterra => vec![SimProcess::Xi, SimProcess::X],
            Model::Roughvol => vec![SimProcess::Y, SimProcess::Z],
        })
    }

    pub fn validate(&self, roughvol: &RoughVolParams) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::invalid("simulate: paths must be positive"));
        }
        let procs = self.processes();
        if procs.is_empty() {
            return Err(Error::invalid("simulate: no processes requested"));
        }
        let allowed: &[SimProcess] = match self.model {
            Model::Volterra => &[SimProcess::Xi, SimProcess::X],
            Model::Roughvol => &[SimProcess::Y, SimProcess::Z, SimProcess::V, SimProcess::S],
        };
        if let Some(p) = procs.iter().find(|p| !allowed.contains(p)) {
            return Err(Error::invalid(format!("simulate: process {} is not part of the {:?} model", p.label(), self.model)));
        }
        let n = match self.model {
            Model::Volterra => {
                if !(self.horizon > 0.0 && self.horizon.is_finite()) {
                    return Err(Error::invalid("simulate: horizon must be positive"));
                }
                self.n
            }
            Model::Roughvol => {
                roughvol.validate()?;
                roughvol.n
            }
        };
        if !n.is_power_of_two() {
            return Err(Error::invalid(format!("simulate: n = {n} must be a power of two")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default = "default_rate_processes")]
    pub processes: Vec<crate::mc::Process>,
    /// Fractional kernels `K_{1, H+1/2}`; when absent the `[kernel]` section is used.
    pub hurst: Option<Vec<f64>>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    pub n_ref: Option<usize>,
    #[serde(default = "default_rate_paths")]
    pub paths: usize,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub variant: SchemeVariant,
}

fn default_rate_processes() -> Vec<crate::mc::Process> {
    vec![crate::mc::Process::Xi]
}

fn default_n_list() -> Vec<usize> {
    vec![16, 32, 64, 128, 256, 512, 1024]
}

fn default_rate_paths() -> usize {
    2000
}

fn two() -> f64 {
    2.0
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            processes: default_rate_processes(),
            hurst: None,
            n_list: default_n_list(),
            n_ref: None,
            paths: default_rate_paths(),
            p: 2.0,
            horizon: 1.0,
            variant: SchemeVariant::default(),
        }
    }
}

impl RatesConfig {
    /// `n_ref`, defaulting to 16 times the largest step count.
    pub fn n_ref(&self) -> usize {
        self.n_ref.unwrap_or_else(|| 16 * self.n_list.iter().copied().max().unwrap_or(0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::invalid("rates: n_list is empty"));
        }
        if self.processes.is_empty() {
            return Err(Error::invalid("rates: no processes requested"));
        }
        if let Some(hs) = &self.hurst {
            if hs.is_empty() {
                return Err(Error::invalid("rates: hurst list is empty"));
            }
            if let Some(h) = hs.iter().find(|h| !(**h > 0.0 && **h < 0.5)) {
                return Err(Error::invalid(format!("rates: hurst {h} is outside (0, 1/2)")));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("rates: horizon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    #[serde(default = "default_check_kernels")]
    pub kernels: Vec<KernelConfig>,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_conv_tol")]
    pub convolution_tolerance: f64,
    #[serde(default = "default_laplace_tol")]
    pub laplace_tolerance: f64,
}

fn default_check_kernels() -> Vec<KernelConfig> {
    vec![
        KernelConfig { kind: KernelKind::Constant, c: 1.0, alpha: None, hurst: None, rho: 0.0 },
        KernelConfig { kind: KernelKind::Fractional, c: 1.0, alpha: Some(0.6), hurst: None, rho: 0.0 },
        KernelConfig { kind: KernelKind::Exponential, c: 1.0, alpha: None, hurst: None, rho: 1.2 },
        KernelConfig { kind: KernelKind::Gamma, c: 1.0, alpha: Some(0.7), hurst: None, rho: 1.2 },
    ]
}

fn default_t_min() -> f64 {
    0.01
}

fn default_t_max() -> f64 {
    5.0
}

fn default_points() -> usize {
    200
}

fn default_conv_tol() -> f64 {
    1e-6
}

fn default_laplace_tol() -> f64 {
    1e-10
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        Self {
            kernels: default_check_kernels(),
            t_min: default_t_min(),
            t_max: default_t_max(),
            points: default_points(),
            convolution_tolerance: default_conv_tol(),
            laplace_tolerance: default_laplace_tol(),
        }
    }
}

impl KernelCheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(Error::invalid("kernel_check: no kernels listed"));
        }
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(Error::invalid("kernel_check: need 0 < t_min < t_max"));
        }
        if self.points < 2 {
            return Err(Error::invalid("kernel_check: need at least 2 points"));
        }
        if !(self.convolution_tolerance >= 0.0 && self.laplace_tolerance >= 0.0) {
            return Err(Error::invalid("kernel_check: tolerances must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_bench_n")]
    pub n_list: Vec<usize>,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub variant: SchemeVariant,
}

fn default_bench_n() -> Vec<usize> {
    vec![4096, 8192, 16384]
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { n_list: default_bench_n(), horizon: 1.0, variant: SchemeVariant::default() }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::invalid("bench: n_list must be nonempty and positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("bench: horizon must be positive"));
        }
        Ok(())
    }
}
