//! Monte Carlo engine: coupled strong-error estimation, rate fits, mean estimates and the
//! endpoint-versus-whole-path timing benchmark.
//!
//! Every path is simulated from its own keyed noise streams and per-path results are
//! collected in path order before any reduction, so results do not depend on the number of
//! worker threads.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::PathGrid;
use crate::noise::{BrownianFabric, FabricPath, NoiseStream};
use crate::sde::XiScheme;
use crate::volterra::{SchemeVariant, VolterraSpec, XScheme};

/// Brownian fabric on `[0, horizon]` with `n_fine` steps per path.
pub fn make_fabric(seed: u64, n_fine: usize, n_paths: usize, horizon: f64) -> Result<BrownianFabric> {
    BrownianFabric::new(seed, n_fine, n_paths, horizon)
}

/// Which process a strong-error experiment measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Process {
    /// The memory process `ξ`.
    Xi,
    /// The Volterra process `X`.
    X,
}

impl Process {
    pub fn label(self) -> &'static str {
        match self {
            Process::Xi => "xi",
            Process::X => "x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub h: f64,
    pub error: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Settings of one strong-error experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorConfig {
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub n_paths: usize,
    pub p: f64,
    pub seed: u64,
}

impl StrongErrorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::invalid("n_list is empty"));
        }
        let max_n = *self.n_list.iter().max().unwrap();
        for &n in &self.n_list {
            if n == 0 || !self.n_ref.is_multiple_of(n) {
                return Err(Error::invalid(format!("step count {n} does not divide n_ref = {}", self.n_ref)));
            }
        }
        if self.n_ref < 8 * max_n {
            return Err(Error::invalid(format!(
                "n_ref = {} must be at least 8 times the largest step count {max_n}",
                self.n_ref
            )));
        }
        if !self.n_ref.is_power_of_two() {
            return Err(Error::invalid(format!("n_ref = {} must be a power of two", self.n_ref)));
        }
        if self.n_paths < 2 {
            return Err(Error::invalid("at least two paths are needed"));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::invalid(format!("error exponent p must be at least 1, got {}", self.p)));
        }
        Ok(())
    }
}

/// Number of bootstrap resamples behind [`RatePoint::se`].
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Outcome of [`strong_error`]: one point per step count plus a hash of all consumed noise.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorRun {
    pub points: Vec<RatePoint>,
    pub noise_checksum: u64,
}

struct Level {
    n: usize,
    xi: XiScheme,
    x: Option<XScheme>,
}

impl Level {
    fn new(spec: &VolterraSpec, process: Process, n: usize, n_ref: usize) -> Result<Self> {
        let grid = PathGrid::new(n, spec.memory().horizon())?;
        let x = match process {
            Process::Xi => None,
            Process::X => Some(XScheme::new(spec, grid, n_ref)?),
        };
        Ok(Self { n, xi: XiScheme::new(spec.memory(), grid)?, x })
    }

    /// Values at nodes `0, stride, …, n`.
    fn run(&self, noise: &FabricPath, xi0: f64, stride: usize) -> Result<Vec<f64>> {
        let xi = self.xi.run(noise.increments(self.n)?, xi0)?;
        match &self.x {
            None => Ok(xi.values().iter().step_by(stride).copied().collect()),
            Some(x) => x.nodes(noise, xi.values(), xi0, stride),
        }
    }
}

/// `(E sup_k |P^{(n)}_{t_k} - P^{(ref)}_{t_k}|^p)^{1/p}` for every `n` in the list, with both
/// runs driven by the same fabric path.
///
/// The reference is compared on the nodes of the coarse grid only.
pub fn strong_error(spec: &VolterraSpec, process: Process, cfg: &StrongErrorConfig) -> Result<StrongErrorRun> {
    cfg.validate()?;
    let horizon = spec.memory().horizon();
    let fabric = make_fabric(cfg.seed, cfg.n_ref, cfg.n_paths, horizon)?;
    let mut n_sorted = cfg.n_list.clone();
    n_sorted.sort_unstable();
    n_sorted.dedup();
    let max_n = *n_sorted.last().unwrap();
    let levels = n_sorted
        .iter()
        .map(|&n| Level::new(spec, process, n, cfg.n_ref))
        .collect::<Result<Vec<_>>>()?;
    let reference = Level::new(spec, process, cfg.n_ref, cfg.n_ref)?;
    let with_aux = process == Process::X && spec.variant() == SchemeVariant::HybridDiffusion;
    let xi0_law = *spec.memory().xi0();

    let per_path: Vec<Result<(Vec<f64>, u64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let noise = if with_aux { fabric.path_with_aux(i) } else { fabric.path(i) };
            let z = if xi0_law.is_random() {
                fabric.normals(i, NoiseStream::InitialCondition, 1)[0]
            } else {
                0.0
            };
            let xi0 = xi0_law.sample(z);
            let ref_nodes = reference.run(&noise, xi0, cfg.n_ref / max_n)?;
            let mut out = Vec::with_capacity(levels.len());
            for level in &levels {
                let coarse = level.run(&noise, xi0, 1)?;
                let step = max_n / level.n;
                let sup = coarse
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (v - ref_nodes[k * step]).abs())
                    .fold(0.0, f64::max);
                out.push(sup.powf(cfg.p));
            }
            Ok((out, noise.checksum()))
        })
        .collect();

    let mut samples = vec![Vec::with_capacity(cfg.n_paths); levels.len()];
    let mut checksum: u64 = 0;
    for r in per_path {
        let (vals, c) = r?;
        for (slot, v) in samples.iter_mut().zip(vals) {
            slot.push(v);
        }
        checksum = checksum.rotate_left(5) ^ c;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5bd1_e995_9e37_79b9);
    let points = n_sorted
        .iter()
        .zip(&samples)
        .map(|(&n, s)| {
            let error = mean(s).powf(1.0 / cfg.p);
            let se = bootstrap_se(s, cfg.p, &mut rng);
            RatePoint { n, h: horizon / n as f64, error, se }
        })
        .collect();
    Ok(StrongErrorRun { points, noise_checksum: checksum })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn bootstrap_se(samples: &[f64], p: f64, rng: &mut ChaCha8Rng) -> f64 {
    let m = samples.len();
    let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let s: f64 = (0..m).map(|_| samples[rng.random_range(0..m)]).sum();
            (s / m as f64).powf(1.0 / p)
        })
        .collect();
    let mu = mean(&stats);
    (stats.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (stats.len() - 1) as f64).sqrt()
}

/// Least squares of `ln(error)` on `ln(h)`.
pub fn fit_rate(points: &[RatePoint]) -> Result<RateReport> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(bad) = points.iter().find(|p| !(p.error > 0.0 && p.error.is_finite() && p.h > 0.0)) {
        return Err(Error::invalid(format!("rate fit needs positive errors and steps, got {bad:?}")));
    }
    let mut points = points.to_vec();
    points.sort_by_key(|p| p.n);
    let xs: Vec<f64> = points.iter().map(|p| p.h.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct step sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateReport { points, slope, intercept, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Sample mean, standard error `s/√m` and the normal-approximation interval at `confidence`.
pub fn estimate_mean(values: &[f64], confidence: f64) -> Result<MeanEstimate> {
    if values.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 values, got {}", values.len())));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let m = values.len() as f64;
    let mu = mean(values);
    let var = values.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (m - 1.0);
    let se = (var / m).sqrt();
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * confidence);
    Ok(MeanEstimate { mean: mu, se, lower: mu - z * se, upper: mu + z * se })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchVariant {
    Endpoint,
    WholePath,
}

impl BenchVariant {
    pub fn label(self) -> &'static str {
        match self {
            BenchVariant::Endpoint => "endpoint",
            BenchVariant::WholePath => "whole-path",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub variant: BenchVariant,
    pub n: usize,
    pub median_seconds: f64,
}

/// Timed samples per `(variant, n)`.
pub const BENCH_SAMPLES: usize = 5;

/// Median wall time of one simulation of `X̄_T` alone and of the whole path `X̄`, both
/// including the memory path `ξ̄`. Weight tables and noise are prepared outside the timed
/// region and one untimed warm-up run precedes the samples.
pub fn bench_endpoint(spec: &VolterraSpec, n_list: &[usize], seed: u64) -> Result<Vec<Timing>> {
    let horizon = spec.memory().horizon();
    let xi0 = spec.memory().xi0().mean();
    let mut out = Vec::with_capacity(2 * n_list.len());
    for &n in n_list {
        let grid = PathGrid::new(n, horizon)?;
        let fabric = BrownianFabric::new(seed, n.next_power_of_two(), 1, horizon)?;
        let noise = if n.is_power_of_two() {
            fabric.path_with_aux(0)
        } else {
            let raw = fabric.normals(0, NoiseStream::Brownian, n);
            let scale = grid.step().sqrt();
            let aux = fabric.normals(0, NoiseStream::Auxiliary, n);
            FabricPath::from_increments(horizon, raw.iter().map(|z| z * scale).collect(), Some(aux))?
        };
        let xs = XiScheme::new(spec.memory(), grid)?;
        let x = XScheme::new(spec, grid, n)?;
        let dw = noise.increments(n)?;
        for variant in [BenchVariant::Endpoint, BenchVariant::WholePath] {
            let run = || -> Result<f64> {
                let xi = xs.run(dw, xi0)?;
                match variant {
                    BenchVariant::Endpoint => x.endpoint(&noise, xi.values(), xi0),
                    BenchVariant::WholePath => Ok(x.path(&noise, xi.values(), xi0)?.terminal()),
                }
            };
            let work = match variant {
                BenchVariant::Endpoint => n as f64,
                BenchVariant::WholePath => (n as f64) * (n as f64),
            };
            let reps = ((1u64 << 16) as f64 / work).ceil().max(1.0) as usize;
            std::hint::black_box(run()?);
            let mut samples = Vec::with_capacity(BENCH_SAMPLES);
            for _ in 0..BENCH_SAMPLES {
                let start = Instant::now();
                for _ in 0..reps {
                    std::hint::black_box(run()?);
                }
                samples.push(start.elapsed().as_secs_f64() / reps as f64);
            }
            samples.sort_by(f64::total_cmp);
            out.push(Timing { variant, n, median_seconds: samples[BENCH_SAMPLES / 2] });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use crate::sde::{Coefficients, InitialCondition, MemoryProcessSpec};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn point(n: usize, error: f64) -> RatePoint {
        RatePoint { n, h: 1.0 / n as f64, error, se: 0.0 }
    }

    #[test]
    fn fabric_requires_power_of_two() {
        assert!(make_fabric(1, 96, 2, 1.0).is_err());
        assert!(make_fabric(1, 128, 2, 1.0).is_ok());
    }

    #[test]
    fn exact_square_root_law() {
        let pts: Vec<RatePoint> = [16, 32, 64, 128].iter().map(|&n| point(n, (1.0 / n as f64).sqrt())).collect();
        let r = fit_rate(&pts).unwrap();
        assert!((r.slope - 0.5).abs() <= 1e-14);
        assert!((r.r_squared - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn fit_input_checks() {
        assert!(fit_rate(&[point(2, 0.5), point(4, 0.25)]).is_err());
        assert!(fit_rate(&[point(2, 0.5), point(4, 0.0), point(8, 0.1)]).is_err());
        let r = fit_rate(&[point(8, 8.0), point(2, 2.0), point(4, 4.0)]).unwrap();
        assert!((r.slope + 1.0).abs() <= 1e-14);
        assert_eq!(r.points.iter().map(|p| p.n).collect::<Vec<_>>(), vec![2, 4, 8]);
    }

    #[test]
    fn noisy_square_root_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        let pts: Vec<RatePoint> = (4..11)
            .map(|e| {
                let n = 1usize << e;
                let z: f64 = rng.sample(StandardNormal);
                point(n, 3.0 * (1.0 / n as f64).sqrt() * (1.0 + 0.05 * z))
            })
            .collect();
        let r = fit_rate(&pts).unwrap();
        // textbook normal equations as an independent regression
        let m = pts.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for p in &pts {
            let (x, y) = (p.h.ln(), p.error.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        assert!((r.slope - slope).abs() <= 1e-10);
        assert!((0.45..=0.55).contains(&r.slope), "{}", r.slope);
    }

    proptest! {
        #[test]
        fn fit_is_scale_invariant(scale in 1e-6f64..1e6, e1 in 0.01f64..1.0, e2 in 0.01f64..1.0, e3 in 0.01f64..1.0) {
            let pts = vec![point(8, e1), point(16, e2), point(32, e3)];
            let scaled: Vec<RatePoint> = pts.iter().map(|p| RatePoint { error: p.error * scale, ..*p }).collect();
            let a = fit_rate(&pts).unwrap();
            let b = fit_rate(&scaled).unwrap();
            prop_assert!((a.slope - b.slope).abs() <= 1e-9 * (1.0 + a.slope.abs()));
            prop_assert!((b.intercept - a.intercept - scale.ln()).abs() <= 1e-9 * (1.0 + scale.ln().abs()));
        }

        #[test]
        fn coarsening_sums_fine_blocks(seed in any::<u64>(), path in 0usize..64, shift in 1u32..5) {
            let fabric = make_fabric(seed, 64, 64, 1.0).unwrap();
            let p = fabric.path(path);
            let n = 64 >> shift;
            let coarse = p.increments(n).unwrap();
            let block = 1usize << shift;
            for k in 0..n {
                let mut pair = p.fine()[k * block..(k + 1) * block].to_vec();
                while pair.len() > 1 {
                    pair = pair.chunks_exact(2).map(|c| c[0] + c[1]).collect();
                }
                prop_assert_eq!(coarse[k].to_bits(), pair[0].to_bits());
            }
        }
    }

    #[test]
    fn mean_estimates() {
        let c = estimate_mean(&[2.0; 5], 0.95).unwrap();
        assert_eq!((c.mean, c.se, c.lower, c.upper), (2.0, 0.0, 2.0, 2.0));
        let two = estimate_mean(&[0.0, 1.0], 0.95).unwrap();
        assert_eq!(two.mean, 0.5);
        assert!((two.se - 0.5).abs() <= 1e-15);
        assert!((two.upper - two.mean - 1.959_963_984_540_054 * 0.5).abs() <= 1e-9);
        assert!(estimate_mean(&[1.0], 0.95).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let e = estimate_mean(&draws, 0.95).unwrap();
        assert!(e.mean.abs() <= 3.0 / (1e5f64).sqrt());
    }

    fn spec(sigma: f64, alpha: f64) -> VolterraSpec {
        let c = Coefficients::new(move |_, x| 2.0 - 1.2 * x, move |_, _| sigma, 1.0, 1.2, 0.0).unwrap();
        with_coeffs(c, alpha)
    }

    fn rough_spec(alpha: f64) -> VolterraSpec {
        let sigma = |x: f64| (0.384 * (x - 0.095) * (x - 0.095) + 0.0025).sqrt();
        let c = Coefficients::new(|_, x| 2.0 - 1.2 * x, move |_, x| sigma(x), 1.0, 1.2, 0.62).unwrap();
        with_coeffs(c, alpha)
    }

    fn with_coeffs(c: Coefficients, alpha: f64) -> VolterraSpec {
        let m = MemoryProcessSpec::with_kernel(
            InitialCondition::Point { value: 5.0 / 3.0 },
            Kernel::fractional(1.0, alpha).unwrap(),
            c,
            1.0,
        )
        .unwrap();
        VolterraSpec::new(m, SchemeVariant::FrozenKernel).unwrap()
    }

    #[test]
    fn config_validation() {
        let good = StrongErrorConfig { n_list: vec![8, 16], n_ref: 128, n_paths: 4, p: 2.0, seed: 1 };
        assert!(good.validate().is_ok());
        assert!(StrongErrorConfig { n_list: vec![], ..good.clone() }.validate().is_err());
        assert!(StrongErrorConfig { n_ref: 64, ..good.clone() }.validate().is_err());
        assert!(StrongErrorConfig { n_list: vec![8, 12], ..good.clone() }.validate().is_err());
        assert!(StrongErrorConfig { n_paths: 1, ..good }.validate().is_err());
    }

    #[test]
    fn deterministic_linear_drift() {
        // σ = 0 with a fixed ξ⁰: every path equals the deterministic Euler path
        let cfg = StrongErrorConfig { n_list: vec![16, 32, 64], n_ref: 1024, n_paths: 3, p: 2.0, seed: 3 };
        let run = strong_error(&spec(0.0, 0.6), Process::Xi, &cfg).unwrap();
        for p in &run.points {
            assert!(p.error <= 2.0 / p.n as f64, "{p:?}");
            assert!(p.se <= 1e-12);
        }
        let fit = fit_rate(&run.points).unwrap();
        assert!(fit.slope >= 0.9, "{}", fit.slope);
    }

    #[test]
    fn errors_decrease_with_n() {
        let cfg = StrongErrorConfig {
            n_list: vec![16, 32, 64, 128, 256],
            n_ref: 2048,
            n_paths: 400,
            p: 2.0,
            seed: 10,
        };
        let run = strong_error(&rough_spec(0.6), Process::Xi, &cfg).unwrap();
        for w in run.points.windows(2) {
            assert!(w[0].error - w[1].error > 3.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt(), "{w:?}");
        }
        let ratios: Vec<f64> = run.points.windows(2).map(|w| w[0].error / w[1].error).collect();
        let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((1.25..=1.60).contains(&avg), "{ratios:?}");
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let cfg = StrongErrorConfig { n_list: vec![8, 16, 32], n_ref: 256, n_paths: 50, p: 2.0, seed: 77 };
        let s = spec(0.4, 0.7);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| strong_error(&s, Process::X, &cfg)).unwrap();
        let b = four.install(|| strong_error(&s, Process::X, &cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bench_smoke() {
        let t = bench_endpoint(&spec(0.3, 0.6), &[1, 64], 1).unwrap();
        assert_eq!(t.len(), 4);
        let at = |v, n| t.iter().find(|x| x.variant == v && x.n == n).unwrap().median_seconds;
        let ratio = at(BenchVariant::WholePath, 1) / at(BenchVariant::Endpoint, 1);
        assert!((0.1..=10.0).contains(&ratio), "{ratio}");
        assert!(t.iter().all(|x| x.median_seconds > 0.0));
    }
}
