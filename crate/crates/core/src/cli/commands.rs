//! The four subcommands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Model, SimProcess};
use super::csv::{self, fmt_f64};
use super::{CliError, Command};
use crate::grid::PathGrid;
use crate::kernels::{laplace_product_error, log_spaced, verify_pseudo_inverse_at, Kernel};
use crate::mc::{bench_endpoint, fit_rate, strong_error, RateReport, StrongErrorConfig, Timing};
use crate::noise::{BrownianFabric, FabricPath, NoiseStream};
use crate::roughvol::{simulate_asset, variance_path, RoughVolScheme, RoughVolSimulator};
use crate::sde::XiScheme;
use crate::volterra::{SchemeVariant, XScheme};

/// Evaluation points of the Laplace-product check.
const LAPLACE_T_MIN: f64 = 1e-3;
const LAPLACE_T_MAX: f64 = 1e3;
const LAPLACE_POINTS: usize = 100;

/// Validates the sections a command uses before anything is written.
pub fn validate(command: Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    match command {
        Command::Simulate => {
            cfg.simulate.validate(&cfg.roughvol)?;
            if cfg.simulate.model == Model::Volterra {
                cfg.coefficients.volterra_spec(cfg.kernel.build()?, cfg.simulate.horizon, cfg.simulate.variant)?;
            }
        }
        Command::Rates => {
            cfg.rates.validate()?;
            for (_, kernel) in rate_kernels(cfg)? {
                cfg.coefficients.volterra_spec(kernel, cfg.rates.horizon, cfg.rates.variant)?;
            }
            rate_config(cfg, 0).validate()?;
        }
        Command::KernelCheck => {
            cfg.kernel_check.validate()?;
            for k in &cfg.kernel_check.kernels {
                k.build()?;
            }
        }
        Command::Bench => {
            cfg.bench.validate()?;
            cfg.coefficients.volterra_spec(cfg.kernel.build()?, cfg.bench.horizon, cfg.bench.variant)?;
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_paths(out: &Path, process: SimProcess, grid: &PathGrid, columns: &[Vec<f64>]) -> Result<PathBuf, CliError> {
    let dir = out.join(process.label());
    create_dir(&dir)?;
    let names: Vec<String> = (0..columns.len()).map(|i| format!("path_{i}")).collect();
    let mut header = vec!["t"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = (0..=grid.n())
        .map(|k| {
            let mut row = Vec::with_capacity(columns.len() + 1);
            row.push(fmt_f64(grid.t(k)));
            row.extend(columns.iter().map(|c| fmt_f64(c[k])));
            row
        })
        .collect();
    let path = dir.join("paths.csv");
    csv::write(&path, &header, &rows)?;
    Ok(path)
}

/// The memory path of one sample and, if requested, its Volterra path.
type XiAndX = (Vec<f64>, Option<Vec<f64>>);

/// Simulates the requested processes and writes one `paths.csv` per process.
pub fn run_simulate(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sim = &cfg.simulate;
    sim.validate(&cfg.roughvol)?;
    let procs = sim.processes();
    let wants = |p: SimProcess| procs.contains(&p);
    let mut series: Vec<(SimProcess, Vec<Vec<f64>>)> = Vec::new();
    let grid;
    match sim.model {
        Model::Volterra => {
            let spec = cfg.coefficients.volterra_spec(cfg.kernel.build()?, sim.horizon, sim.variant)?;
            grid = PathGrid::new(sim.n, sim.horizon)?;
            let fabric = BrownianFabric::new(seed, sim.n, sim.paths, sim.horizon)?;
            let xs = XiScheme::new(spec.memory(), grid)?;
            let x_scheme = if wants(SimProcess::X) { Some(XScheme::new(&spec, grid, sim.n)?) } else { None };
            let law = *spec.memory().xi0();
            let hybrid = sim.variant == SchemeVariant::HybridDiffusion;
            let per_path: Vec<crate::Result<XiAndX>> = (0..sim.paths)
                .into_par_iter()
                .map(|i| {
                    let noise = if hybrid { fabric.path_with_aux(i) } else { fabric.path(i) };
                    let xi0 = law.sample(fabric.normals(i, NoiseStream::InitialCondition, 1)[0]);
                    let xi = xs.run(noise.increments(sim.n)?, xi0)?;
                    let x = match &x_scheme {
                        Some(s) => Some(s.path(&noise, xi.values(), xi0)?.into_values()),
                        None => None,
                    };
                    Ok((xi.into_values(), x))
                })
                .collect();
            let mut xi_cols = Vec::with_capacity(sim.paths);
            let mut x_cols = Vec::with_capacity(sim.paths);
            for r in per_path {
                let (xi, x) = r?;
                xi_cols.push(xi);
                if let Some(x) = x {
                    x_cols.push(x);
                }
            }
            for p in &procs {
                match p {
                    SimProcess::Xi => series.push((*p, std::mem::take(&mut xi_cols))),
                    SimProcess::X => series.push((*p, std::mem::take(&mut x_cols))),
                    _ => unreachable!("validated"),
                }
            }
        }
        Model::Roughvol => {
            let params = cfg.roughvol;
            grid = params.grid()?;
            let simulator = RoughVolSimulator::new(params, sim.scheme)?;
            let fabric = BrownianFabric::new(seed, params.n, sim.paths, params.horizon)?;
            let hybrid = sim.scheme == RoughVolScheme::Hybrid;
            let need_z = wants(SimProcess::Z);
            let scale = grid.step().sqrt();
            type Row = [Option<Vec<f64>>; 4];
            let per_path: Vec<crate::Result<Row>> = (0..sim.paths)
                .into_par_iter()
                .map(|i| {
                    let noise: FabricPath = if hybrid { fabric.path_with_aux(i) } else { fabric.path(i) };
                    let dw = noise.increments(params.n)?;
                    let (y, z) = if need_z {
                        let (y, z) = simulator.run(&noise)?;
                        (y, Some(z.into_values()))
                    } else {
                        (simulator.y_path(dw)?, None)
                    };
                    let v = wants(SimProcess::V).then(|| variance_path(&params, &y).into_values());
                    let s = if wants(SimProcess::S) {
                        let asset_dw: Vec<f64> = if sim.independent_asset_noise {
                            fabric.normals(i, NoiseStream::Asset, params.n).iter().map(|z| z * scale).collect()
                        } else {
                            dw.to_vec()
                        };
                        Some(simulate_asset(&params, &y, &asset_dw)?.into_values())
                    } else {
                        None
                    };
                    Ok([Some(y.into_values()), z, v, s])
                })
                .collect();
            let mut cols: [Vec<Vec<f64>>; 4] = Default::default();
            for r in per_path {
                for (slot, v) in cols.iter_mut().zip(r?) {
                    if let Some(v) = v {
                        slot.push(v);
                    }
                }
            }
            for p in &procs {
                let idx = match p {
                    SimProcess::Y => 0,
                    SimProcess::Z => 1,
                    SimProcess::V => 2,
                    SimProcess::S => 3,
                    _ => unreachable!("validated"),
                };
                series.push((*p, std::mem::take(&mut cols[idx])));
            }
        }
    }
    series.into_iter().map(|(p, cols)| write_paths(out, p, &grid, &cols)).collect()
}

fn rate_kernels(cfg: &ExperimentConfig) -> Result<Vec<(f64, Kernel)>, CliError> {
    match &cfg.rates.hurst {
        Some(hs) => hs.iter().map(|&h| Ok((h, Kernel::from_hurst(h)?))).collect(),
        None => {
            let k = cfg.kernel.build()?;
            Ok(vec![(k.alpha() - 0.5, k)])
        }
    }
}

fn rate_config(cfg: &ExperimentConfig, seed: u64) -> StrongErrorConfig {
    StrongErrorConfig {
        n_list: cfg.rates.n_list.clone(),
        n_ref: cfg.rates.n_ref(),
        n_paths: cfg.rates.paths,
        p: cfg.rates.p,
        seed,
    }
}

/// One fitted rate per `(process, kernel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub process: &'static str,
    pub hurst: f64,
    pub report: RateReport,
}

/// Runs the strong-error experiments and writes `rates.csv` and `slopes.csv`.
pub fn run_rates(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Vec<RateRow>, CliError> {
    cfg.rates.validate()?;
    let se_cfg = rate_config(cfg, seed);
    let mut rows = Vec::new();
    for (hurst, kernel) in rate_kernels(cfg)? {
        let spec = cfg.coefficients.volterra_spec(kernel, cfg.rates.horizon, cfg.rates.variant)?;
        for &process in &cfg.rates.processes {
            let run = strong_error(&spec, process, &se_cfg)?;
            let report = fit_rate(&run.points)?;
            rows.push(RateRow { process: process.label(), hurst, report });
        }
    }
    let mut rate_lines = Vec::new();
    let mut slope_lines = Vec::new();
    for r in &rows {
        let h = fmt_f64(r.hurst);
        for p in &r.report.points {
            rate_lines.push(vec![
                r.process.to_string(),
                h.clone(),
                p.n.to_string(),
                fmt_f64(p.h),
                fmt_f64(p.error),
                fmt_f64(p.se),
            ]);
        }
        slope_lines.push(vec![r.process.to_string(), h, fmt_f64(r.report.slope), fmt_f64(r.report.r_squared)]);
        println!("{} H={}: slope {:.4} (R² {:.4})", r.process, r.hurst, r.report.slope, r.report.r_squared);
    }
    csv::write(&out.join("rates.csv"), &["process", "H", "n", "h", "error", "se"], &rate_lines)?;
    csv::write(&out.join("slopes.csv"), &["process", "H", "slope", "r_squared"], &slope_lines)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckRow {
    pub kernel: Kernel,
    pub convolution_error: f64,
    pub laplace_error: f64,
    pub passed: bool,
}

/// Writes `kernel_check.csv`; any row above tolerance turns into [`CliError::Tolerance`].
pub fn run_kernel_check(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<KernelCheckRow>, CliError> {
    let kc = &cfg.kernel_check;
    kc.validate()?;
    let conv_points = log_spaced(kc.t_min, kc.t_max, kc.points);
    let laplace_points = log_spaced(LAPLACE_T_MIN, LAPLACE_T_MAX, LAPLACE_POINTS);
    let mut rows = Vec::new();
    for kcfg in &kc.kernels {
        let kernel = kcfg.build()?;
        let convolution_error = verify_pseudo_inverse_at(&kernel, &kernel.co_kernel(), &conv_points)?;
        let laplace_error = laplace_product_error(&kernel, &laplace_points)?;
        let passed = convolution_error <= kc.convolution_tolerance && laplace_error <= kc.laplace_tolerance;
        println!(
            "{:?} c={} alpha={} rho={}: convolution {:e}, laplace {:e} [{}]",
            kernel.kind(),
            kernel.c(),
            kernel.alpha(),
            kernel.rho(),
            convolution_error,
            laplace_error,
            if passed { "ok" } else { "FAIL" }
        );
        rows.push(KernelCheckRow { kernel, convolution_error, laplace_error, passed });
    }
    let lines: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                kind_label(&r.kernel).to_string(),
                fmt_f64(r.kernel.c()),
                fmt_f64(r.kernel.alpha()),
                fmt_f64(r.kernel.rho()),
                fmt_f64(r.convolution_error),
                fmt_f64(r.laplace_error),
                r.passed.to_string(),
            ]
        })
        .collect();
    csv::write(
        &out.join("kernel_check.csv"),
        &["kind", "c", "alpha", "rho", "convolution_error", "laplace_error", "passed"],
        &lines,
    )?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Tolerance(format!("{failed} kernel(s) above tolerance")));
    }
    Ok(rows)
}

fn kind_label(k: &Kernel) -> &'static str {
    use crate::kernels::KernelKind::*;
    match k.kind() {
        Constant => "constant",
        Fractional => "fractional",
        Exponential => "exponential",
        Gamma => "gamma",
    }
}

/// Times endpoint-only and whole-path simulation and writes `timings.csv`.
pub fn run_bench(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Vec<Timing>, CliError> {
    cfg.bench.validate()?;
    let spec = cfg.coefficients.volterra_spec(cfg.kernel.build()?, cfg.bench.horizon, cfg.bench.variant)?;
    let timings = bench_endpoint(&spec, &cfg.bench.n_list, seed)?;
    let lines: Vec<Vec<String>> = timings
        .iter()
        .map(|t| vec![t.variant.label().to_string(), t.n.to_string(), fmt_f64(t.median_seconds)])
        .collect();
    for t in &timings {
        println!("{} n={}: {:.3e} s", t.variant.label(), t.n, t.median_seconds);
    }
    csv::write(&out.join("timings.csv"), &["variant", "n", "median_seconds"], &lines)?;
    Ok(timings)
}
