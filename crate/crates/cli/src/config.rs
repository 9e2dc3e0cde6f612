//! Experiment configuration: a TOML file with one table per concern,
//! overridable from the command line.
//!
//! ```toml
//! task = "detect-sweep"
//! seed = 7
//!
//! [model]
//! n_r = 64
//! n_u = 32
//! rho = 0.6
//!
//! [sampler]
//! order = 3
//! levels = 5
//!
//! [sweep]
//! snr_db = [12.0, 16.0]
//! methods = ["langevin", "mmse"]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use langevin_core::sampler::{compile_scheme, default_scheme};
use langevin_core::schedule::{table1_preset, table1_presets, PresetMethod, StepRule, TablePreset};
use langevin_core::{
    ChannelModel, ChannelSpec, Constellation, DynamicsParams, MassMode, Order, PrecondMode,
    ScheduleConfig, SchemeSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    DetectSweep,
    StationaryTest,
    ChannelToy,
    FdtTest,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Self::DetectSweep => "detect-sweep",
            Self::StationaryTest => "stationary-test",
            Self::ChannelToy => "channel-toy",
            Self::FdtTest => "fdt-test",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "detect-sweep" => Ok(Self::DetectSweep),
            "stationary-test" => Ok(Self::StationaryTest),
            "channel-toy" => Ok(Self::ChannelToy),
            "fdt-test" => Ok(Self::FdtTest),
            other => Err(CliError::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_r: usize,
    pub n_u: usize,
    pub rho: f64,
    /// `iid-rayleigh` or `kronecker-exponential`.
    pub channel: String,
    pub constellation: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_r: 64,
            n_u: 32,
            rho: 0.6,
            channel: "kronecker-exponential".into(),
            constellation: "QAM16".into(),
        }
    }
}

impl ModelConfig {
    pub fn channel_spec(&self) -> CliResult<ChannelSpec> {
        let model: ChannelModel = self.channel.parse()?;
        Ok(ChannelSpec::new(self.n_r, self.n_u, self.rho, model)?)
    }

    pub fn constellation(&self) -> CliResult<Constellation> {
        Ok(self.constellation.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// 1, 2 or 3.
    pub order: u8,
    /// Defaults to ULA, ABO or BCOABC by order.
    pub scheme: Option<String>,
    pub levels: usize,
    pub sigma1: f64,
    pub sigma_last: f64,
    pub eps0: f64,
    pub t_inner: usize,
    pub tau: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Trajectories per observation (`U`).
    pub trajectories: usize,
    pub mass_mode: String,
    pub precond: String,
    pub step_rule: String,
    pub max_iters: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let mut s = Self {
            order: 3,
            scheme: None,
            levels: 5,
            sigma1: 0.0,
            sigma_last: 0.0,
            eps0: 0.0,
            t_inner: 0,
            tau: 0.0,
            gamma: 1.0,
            lambda: 1.0,
            alpha: 1.2,
            trajectories: 20,
            mass_mode: "matched".into(),
            precond: "spectral".into(),
            step_rule: "constant".into(),
            max_iters: None,
        };
        s.apply_table(&table1_preset(PresetMethod::ThirdOrder, 5).expect("preset exists"));
        s
    }
}

impl SamplerConfig {
    fn apply_table(&mut self, p: &TablePreset) {
        self.order = p.method.order().as_u8();
        self.scheme = None;
        self.levels = p.levels;
        self.sigma1 = p.sigma1;
        self.sigma_last = p.sigma_last;
        self.eps0 = p.eps0;
        self.t_inner = p.t_inner;
        self.tau = p.tau;
        self.gamma = 1.0;
        self.lambda = 1.0;
        self.alpha = 1.2;
        self.step_rule = "constant".into();
        self.precond = "spectral".into();
        self.max_iters = None;
    }

    pub fn order(&self) -> CliResult<Order> {
        match self.order {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            3 => Ok(Order::Third),
            o => Err(CliError::Config(format!(
                "order must be 1, 2 or 3, got {o}"
            ))),
        }
    }

    pub fn dynamics(&self) -> CliResult<DynamicsParams> {
        let p = DynamicsParams {
            order: self.order()?,
            gamma: self.gamma,
            lambda: self.lambda,
            alpha: self.alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn scheme_spec(&self) -> CliResult<SchemeSpec> {
        let order = self.order()?;
        match &self.scheme {
            Some(name) => Ok(compile_scheme(name, order)?),
            None => Ok(default_scheme(order)),
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self.order {
            1 => "langevin-overdamped",
            2 => "langevin-underdamped",
            _ => "langevin-third",
        }
    }

    pub fn schedule_config(&self) -> CliResult<ScheduleConfig> {
        let mass_mode: MassMode = self.mass_mode.parse()?;
        let precond: PrecondMode = self.precond.parse()?;
        let step_rule: StepRule = self.step_rule.parse()?;
        Ok(ScheduleConfig {
            levels: self.levels,
            sigma1: self.sigma1,
            sigma_last: self.sigma_last,
            eps0: self.eps0,
            step_rule,
            t_inner: self.t_inner,
            tau: self.tau,
            mass_mode,
            precond,
            max_iters: self.max_iters,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub n_channels: usize,
    /// Symbol vectors (channel uses) drawn per channel realization.
    pub symbols_per_channel: usize,
    /// Any of `langevin`, `mmse`, `vblast`, `ml`.
    pub methods: Vec<String>,
    /// Exhaustive search limit for `ml`.
    pub ml_max_candidates: u64,
    /// Exclude channel generation and SVD from the per-symbol time.
    pub amortize_svd: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![16.0],
            n_channels: 10,
            symbols_per_channel: 10,
            methods: vec!["langevin".into(), "mmse".into()],
            ml_max_candidates: 1 << 20,
            amortize_svd: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub alpha_p: f64,
    pub trials: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            alpha_p: 0.6,
            trials: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryTaskConfig {
    pub schemes: Vec<String>,
    /// Diagonal of the quadratic precision.
    pub lambda: Vec<f64>,
    /// Diagonal pre-conditioner; the mass follows as `(gamma^2 / 4) C^-1`.
    pub precond: Vec<f64>,
    pub gamma: f64,
    /// Prony coupling and decay for third-order schemes.
    pub coupling: f64,
    pub alpha: f64,
    pub tau: f64,
    pub eps: f64,
    pub n_samples: usize,
    pub burn_in: Option<usize>,
    pub tolerance: f64,
}

impl Default for StationaryTaskConfig {
    fn default() -> Self {
        Self {
            schemes: vec!["BAOAB".into(), "BACOCAB".into()],
            lambda: vec![1.0, 4.0],
            precond: vec![2.0, 0.5],
            gamma: 1.0,
            coupling: 3.0,
            alpha: 4.0,
            tau: 1.0,
            eps: 0.01,
            n_samples: 1_000_000,
            burn_in: None,
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdtTaskConfig {
    pub dt: f64,
    pub n: usize,
    pub mass: Vec<f64>,
}

impl Default for FdtTaskConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            n: 100_000,
            mass: vec![1.0, 2.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// When false, `wall_ns_per_symbol` is written as 0 so output is reproducible byte for byte.
    pub timing: bool,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    pub sweep: SweepConfig,
    pub toy: ToyConfig,
    pub stationary: StationaryTaskConfig,
    pub fdt: FdtTaskConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::DetectSweep,
            seed: 0,
            out: None,
            timing: true,
            model: ModelConfig::default(),
            sampler: SamplerConfig::default(),
            sweep: SweepConfig::default(),
            toy: ToyConfig::default(),
            stationary: StationaryTaskConfig::default(),
            fdt: FdtTaskConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Overwrites sampler (and for `channel-toy`, model) settings with a named preset.
    pub fn apply_preset(&mut self, name: &str) -> CliResult<()> {
        if name == CHANNEL_TOY_PRESET {
            self.task = Task::ChannelToy;
            self.model.n_r = 16;
            self.model.n_u = 16;
            self.toy = ToyConfig::default();
            self.sweep.snr_db = vec![10.0];
            self.sampler = channel_toy_sampler();
            return Ok(());
        }
        let preset = table1_presets()
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| {
                CliError::Config(format!("unknown preset `{name}` (see `preset --list`)"))
            })?;
        self.sampler.apply_table(&preset);
        Ok(())
    }

    /// Checks every enum and count before any work starts.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.sampler.dynamics()?;
        self.sampler.scheme_spec()?;
        self.sampler.schedule_config()?;
        if self.sampler.levels == 0 || self.sampler.t_inner == 0 || self.sampler.trajectories == 0 {
            return bad("levels, t_inner and trajectories must be positive".into());
        }
        if !(self.sampler.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.sampler.tau));
        }
        match self.task {
            Task::DetectSweep => {
                self.model.channel_spec()?;
                self.model.constellation()?;
                if self.sweep.snr_db.is_empty() {
                    return bad("sweep.snr_db must not be empty".into());
                }
                for m in &self.sweep.methods {
                    if !["langevin", "mmse", "vblast", "ml"].contains(&m.as_str()) {
                        return bad(format!("unknown detection method `{m}`"));
                    }
                }
            }
            Task::ChannelToy => {
                if self.sweep.snr_db.is_empty() {
                    return bad("sweep.snr_db must not be empty".into());
                }
                if !(self.toy.alpha_p > 0.0 && self.toy.alpha_p <= 1.0) {
                    return bad(format!(
                        "toy.alpha_p must lie in (0, 1], got {}",
                        self.toy.alpha_p
                    ));
                }
                if self.toy.trials == 0 || self.model.n_r == 0 || self.model.n_u == 0 {
                    return bad("toy trials and model sizes must be positive".into());
                }
            }
            Task::StationaryTest => {
                let s = &self.stationary;
                if s.lambda.is_empty() || s.lambda.len() != s.precond.len() {
                    return bad(
                        "stationary.lambda and stationary.precond need equal nonzero lengths"
                            .into(),
                    );
                }
                if s.lambda.iter().chain(&s.precond).any(|v| !(*v > 0.0)) {
                    return bad("stationary.lambda and stationary.precond must be positive".into());
                }
                if !(s.gamma > 0.0 && s.alpha > 0.0) {
                    return bad("stationary.gamma and stationary.alpha must be positive".into());
                }
                if s.n_samples < 2 || !(s.eps > 0.0) || !(s.tau > 0.0) || s.schemes.is_empty() {
                    return bad(
                        "stationary test needs n_samples >= 2, eps > 0, tau > 0 and a scheme"
                            .into(),
                    );
                }
            }
            Task::FdtTest => {
                let f = &self.fdt;
                if f.n == 0
                    || !(f.dt > 0.0)
                    || f.mass.is_empty()
                    || f.mass.iter().any(|m| !(*m > 0.0))
                {
                    return bad("fdt test needs n > 0, dt > 0 and positive masses".into());
                }
            }
        }
        Ok(())
    }
}

/// Channel-estimation settings: BAOAB, proportional steps, identity pre-conditioner.
pub const CHANNEL_TOY_PRESET: &str = "channel-toy";

fn channel_toy_sampler() -> SamplerConfig {
    SamplerConfig {
        order: 2,
        scheme: Some("BAOAB".into()),
        levels: 58,
        sigma1: 1.0,
        sigma_last: 0.01,
        eps0: 1e-4,
        t_inner: 20,
        tau: 0.1,
        gamma: 1.0,
        lambda: 1.0,
        alpha: 2.0,
        trajectories: 1,
        mass_mode: "scalar:1".into(),
        precond: "identity".into(),
        step_rule: "proportional".into(),
        max_iters: None,
    }
}

/// Every preset name accepted by `--preset`.
pub fn preset_names() -> Vec<String> {
    let mut v: Vec<String> = table1_presets().iter().map(|p| p.name()).collect();
    v.push(CHANNEL_TOY_PRESET.into());
    v
}

/// Detection sweep configured with the `(method, L)` table preset.
pub fn run_table1_preset(method: &str, levels: usize) -> CliResult<ExperimentConfig> {
    let method: PresetMethod = method.parse()?;
    let preset = table1_preset(method, levels)?;
    let mut cfg = ExperimentConfig::default();
    cfg.sampler.apply_table(&preset);
    Ok(cfg)
}
