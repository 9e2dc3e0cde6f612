use std::sync::Arc;
use std::time::Instant;

use langevin_core::detect::{
    count_symbol_errors, ml_oracle, mmse_detect, vblast_detect, LangevinDetector,
};
use langevin_core::model::{db_to_linear, real_noise_std, sample_channel, sigma0_from_snr};
use langevin_core::sampler::{compile_scheme, derive_seed};
use langevin_core::verify::{
    fdt_check, gaussian_channel_toy, sample_stationary, ChannelToyConfig, FdtConfig,
    StationaryConfig,
};
use langevin_core::{DynamicsParams, ForwardModel, LinearChannel, Order};
use log::info;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Task};
use crate::error::{CliError, CliResult};
use crate::output::ResultRow;

/// Dispatches on `cfg.task` after validating the whole config.
pub fn run_task(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    cfg.validate()?;
    match cfg.task {
        Task::DetectSweep => run_detect_sweep(cfg),
        Task::StationaryTest => run_stationary_test(cfg),
        Task::ChannelToy => run_channel_toy(cfg),
        Task::FdtTest => run_fdt_test(cfg),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    errors: u64,
    symbols: u64,
    ns: u128,
}

fn ns_per(cfg: &ExperimentConfig, ns: u128, n: u64) -> f64 {
    if cfg.timing && n > 0 {
        ns as f64 / n as f64
    } else {
        0.0
    }
}

/// SER per SNR and method. Every channel draws its data from its own seed, so
/// all methods see identical channels and symbols and the output does not
/// depend on the worker count.
pub fn run_detect_sweep(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    cfg.validate()?;
    let spec = cfg.model.channel_spec()?;
    let constellation = cfg.model.constellation()?;
    let sampler = &cfg.sampler;
    let detector = LangevinDetector {
        schedule: sampler.schedule_config()?,
        params: sampler.dynamics()?,
        scheme: sampler.scheme_spec()?,
        trajectories: sampler.trajectories,
        constellation: constellation.clone(),
    };
    let methods = &cfg.sweep.methods;
    let uses_langevin = methods.iter().any(|m| m == "langevin");
    let mut rows = Vec::new();
    if cfg.sweep.n_channels == 0 || cfg.sweep.symbols_per_channel == 0 {
        return Ok(rows);
    }
    for (si, &snr_db) in cfg.sweep.snr_db.iter().enumerate() {
        let sigma0 = real_noise_std(sigma0_from_snr(db_to_linear(snr_db), &spec, &constellation));
        let per_channel: Vec<CliResult<Vec<Tally>>> = (0..cfg.sweep.n_channels)
            .into_par_iter()
            .map(|ci| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, si as u64, ci as u64]));
                let setup = Instant::now();
                let h = sample_channel(&spec, &mut rng)?;
                let channel = Arc::new(LinearChannel::from_complex(&h, sigma0)?);
                let schedule = if uses_langevin {
                    Some(detector.schedule_for(&channel)?)
                } else {
                    None
                };
                let setup_ns = setup.elapsed().as_nanos();
                let mut tallies = vec![Tally::default(); methods.len()];
                for k in 0..cfg.sweep.symbols_per_channel {
                    let x = constellation.random_symbols(spec.n_u, &mut rng);
                    let y = channel.apply_forward(&x, &mut rng)?;
                    let model = ForwardModel::with_channel(channel.clone(), y.clone())?;
                    for (tally, method) in tallies.iter_mut().zip(methods) {
                        let start = Instant::now();
                        let decision = match method.as_str() {
                            "langevin" => {
                                let seed = derive_seed(&[cfg.seed, si as u64, ci as u64, k as u64]);
                                let schedule = schedule.as_ref().expect("built when requested");
                                detector.detect(&channel, schedule, &y, seed, false)?.xhat
                            }
                            "mmse" => mmse_detect(&model, &constellation, constellation.energy())?,
                            "vblast" => vblast_detect(&model, &constellation)?,
                            "ml" => ml_oracle(
                                &model,
                                &constellation,
                                cfg.sweep.ml_max_candidates as u128,
                            )?,
                            other => {
                                return Err(CliError::Config(format!(
                                    "unknown detection method `{other}`"
                                )))
                            }
                        };
                        tally.ns += start.elapsed().as_nanos();
                        let (e, n) = count_symbol_errors(&[decision], std::slice::from_ref(&x))?;
                        tally.errors += e as u64;
                        tally.symbols += n as u64;
                    }
                }
                if !cfg.sweep.amortize_svd {
                    for (tally, method) in tallies.iter_mut().zip(methods) {
                        if method == "langevin" {
                            tally.ns += setup_ns;
                        }
                    }
                }
                Ok(tallies)
            })
            .collect();
        let mut totals = vec![Tally::default(); methods.len()];
        for result in per_channel {
            for (t, c) in totals.iter_mut().zip(result?) {
                t.errors += c.errors;
                t.symbols += c.symbols;
                t.ns += c.ns;
            }
        }
        for (method, t) in methods.iter().zip(&totals) {
            let langevin = method == "langevin";
            let ser = t.errors as f64 / t.symbols as f64;
            info!(
                "snr {snr_db} dB {method}: SER {ser:.3e} ({} / {})",
                t.errors, t.symbols
            );
            rows.push(ResultRow {
                task: Task::DetectSweep.name().into(),
                snr_db: Some(snr_db),
                method: if langevin {
                    sampler.method_name().into()
                } else {
                    method.clone()
                },
                scheme: if langevin {
                    detector.scheme.name().into()
                } else {
                    String::new()
                },
                levels: if langevin { sampler.levels } else { 0 },
                t_inner: if langevin { sampler.t_inner } else { 0 },
                trajectories: if langevin { sampler.trajectories } else { 0 },
                n_symbols: t.symbols,
                errors: t.errors,
                ser_or_nmse: ser,
                wall_ns_per_symbol: ns_per(cfg, t.ns, t.symbols),
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

fn order_of(scheme: &str) -> CliResult<Order> {
    [Order::First, Order::Second, Order::Third]
        .into_iter()
        .find(|&o| compile_scheme(scheme, o).is_ok())
        .ok_or_else(|| CliError::Config(format!("unknown scheme `{scheme}`")))
}

fn params_for(cfg: &ExperimentConfig, order: Order) -> DynamicsParams {
    let s = &cfg.sampler;
    match order {
        Order::First => DynamicsParams::overdamped(),
        Order::Second => DynamicsParams::underdamped(s.gamma),
        Order::Third => DynamicsParams::third_order(s.gamma, s.lambda, s.alpha),
    }
}

/// Long fixed-level runs on `x^T Lambda x / 2`, one row per moment and scheme.
pub fn run_stationary_test(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    cfg.validate()?;
    let st = &cfg.stationary;
    let results: Vec<CliResult<Vec<ResultRow>>> = st
        .schemes
        .par_iter()
        .enumerate()
        .map(|(i, name)| {
            let order = order_of(name)?;
            let scheme = compile_scheme(name, order)?;
            let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&st.lambda));
            let params = match order {
                Order::First => DynamicsParams::overdamped(),
                Order::Second => DynamicsParams::underdamped(st.gamma),
                Order::Third => DynamicsParams::third_order(st.gamma, st.coupling, st.alpha),
            };
            let mut sc = StationaryConfig::with_spectral_mass(
                scheme.clone(),
                params,
                lambda,
                DVector::from_column_slice(&st.precond),
                st.tau,
                st.eps,
                st.n_samples,
            );
            if let Some(b) = st.burn_in {
                sc.burn_in = b;
            }
            sc.tolerance = st.tolerance;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, i as u64]));
            let start = Instant::now();
            let report = sample_stationary(&sc, &mut rng)?;
            let ns = start.elapsed().as_nanos();
            let steps = (sc.burn_in + sc.n_samples) as u64;
            let moments = [
                ("x-covariance", Some(&report.x)),
                ("v-covariance", report.v.as_ref()),
                ("z-covariance", report.z.as_ref()),
            ];
            Ok(moments
                .into_iter()
                .filter_map(|(label, r)| r.map(|r| (label, r)))
                .map(|(label, r)| {
                    info!(
                        "{} {label}: relative error {:.4} (pass: {})",
                        scheme.name(),
                        r.max_rel_err_vs_target,
                        r.pass
                    );
                    ResultRow {
                        task: Task::StationaryTest.name().into(),
                        snr_db: None,
                        method: label.into(),
                        scheme: scheme.name().into(),
                        levels: 1,
                        t_inner: steps as usize,
                        trajectories: 1,
                        n_symbols: r.n_samples as u64,
                        errors: u64::from(!r.pass),
                        ser_or_nmse: r.max_rel_err_vs_target,
                        wall_ns_per_symbol: ns_per(cfg, ns, steps),
                        seed: cfg.seed,
                    }
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Sampler and analytic MMSE NMSE (dB) per SNR on the Gaussian channel problem.
pub fn run_channel_toy(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    cfg.validate()?;
    let sampler = &cfg.sampler;
    let schedule = sampler.schedule_config()?;
    let params = sampler.dynamics()?;
    let scheme = sampler.scheme_spec()?;
    let results: Vec<CliResult<Vec<ResultRow>>> = cfg
        .sweep
        .snr_db
        .par_iter()
        .enumerate()
        .map(|(si, &snr_db)| {
            let toy = ChannelToyConfig {
                n_r: cfg.model.n_r,
                n_u: cfg.model.n_u,
                alpha_p: cfg.toy.alpha_p,
                snr_db,
                schedule: schedule.clone(),
                params,
                scheme: scheme.clone(),
                trials: cfg.toy.trials,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, si as u64]));
            let start = Instant::now();
            let r = gaussian_channel_toy(&toy, &mut rng)?;
            let ns = start.elapsed().as_nanos();
            info!(
                "snr {snr_db} dB: sampler {:.2} dB, MMSE {:.2} dB",
                r.nmse_db, r.mmse_nmse_db
            );
            let entries = (r.trials * cfg.model.n_r * cfg.model.n_u) as u64;
            let row = |method: &str, scheme: &str, value: f64, wall: f64| ResultRow {
                task: Task::ChannelToy.name().into(),
                snr_db: Some(snr_db),
                method: method.into(),
                scheme: scheme.into(),
                levels: sampler.levels,
                t_inner: sampler.t_inner,
                trajectories: 1,
                n_symbols: entries,
                errors: 0,
                ser_or_nmse: value,
                wall_ns_per_symbol: wall,
                seed: cfg.seed,
            };
            Ok(vec![
                row(
                    "sampler",
                    scheme.name(),
                    r.nmse_db,
                    ns_per(cfg, ns, entries),
                ),
                row("mmse", "", r.mmse_nmse_db, 0.0),
            ])
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// O-substep checks for orders 2 and 3; `errors` is 1 on a failed row.
pub fn run_fdt_test(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    cfg.validate()?;
    let f = &cfg.fdt;
    let results: Vec<CliResult<Vec<ResultRow>>> = [Order::Second, Order::Third]
        .par_iter()
        .map(|&order| {
            let fc = FdtConfig {
                order,
                params: params_for(cfg, order),
                m: DVector::from_column_slice(&f.mass),
                tau: cfg.sampler.tau,
                dt: f.dt,
                n: f.n,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, order.as_u8() as u64]));
            let start = Instant::now();
            let checks = fdt_check(&fc, &mut rng)?;
            let ns = start.elapsed().as_nanos();
            Ok(checks
                .into_iter()
                .map(|c| {
                    info!(
                        "{}: {:.5} vs {:.5} (pass: {})",
                        c.name, c.statistic, c.target, c.pass
                    );
                    ResultRow {
                        task: Task::FdtTest.name().into(),
                        snr_db: None,
                        method: c.name,
                        scheme: "O".into(),
                        levels: 1,
                        t_inner: 1,
                        trajectories: f.n,
                        n_symbols: f.n as u64,
                        errors: u64::from(!c.pass),
                        ser_or_nmse: c.statistic,
                        wall_ns_per_symbol: ns_per(cfg, ns, f.n as u64),
                        seed: cfg.seed,
                    }
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}
