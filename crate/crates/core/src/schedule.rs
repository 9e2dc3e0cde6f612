//! Annealing schedules: noise levels, per-level step sizes, diagonal
//! pre-conditioners, mass matrices and temperature.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Order of the Langevin dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    /// Overdamped (position only).
    First,
    /// Underdamped (position and momentum).
    Second,
    /// Generalized Langevin with one Prony mode (position, momentum, auxiliary).
    Third,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Self::First => 1,
            Self::Second => 2,
            Self::Third => 3,
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            3 => Ok(Self::Third),
            _ => Err(Error::InvalidParameter(format!(
                "order must be 1, 2 or 3, got {v}"
            ))),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Friction and Prony-mode parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub order: Order,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl DynamicsParams {
    pub fn overdamped() -> Self {
        Self {
            order: Order::First,
            gamma: 1.0,
            lambda: 0.0,
            alpha: 1.0,
        }
    }

    pub fn underdamped(gamma: f64) -> Self {
        Self {
            order: Order::Second,
            gamma,
            lambda: 0.0,
            alpha: 1.0,
        }
    }

    /// `gamma` still enters the spectral mass `M = (gamma^2 / 4) C^-1`.
    pub fn third_order(gamma: f64, lambda: f64, alpha: f64) -> Self {
        Self {
            order: Order::Third,
            gamma,
            lambda,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidParameter(format!(
                "{what} must be positive and finite, got {v}"
            )))
        };
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", self.gamma);
        }
        if self.order == Order::Third {
            if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                return bad("alpha", self.alpha);
            }
            if !self.lambda.is_finite() {
                return Err(Error::InvalidParameter("lambda must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Geometric noise levels `sigma1 ... sigma_last` followed by a trailing zero.
pub fn geometric_sigmas(sigma1: f64, sigma_last: f64, levels: usize) -> Result<Vec<f64>> {
    if levels == 0 {
        return Err(Error::InvalidParameter(
            "at least one noise level is required".into(),
        ));
    }
    if levels == 1 {
        if !(sigma1 > 0.0) {
            return Err(Error::InvalidParameter("sigma1 must be positive".into()));
        }
        return Ok(vec![sigma1, 0.0]);
    }
    if !(sigma1 > sigma_last && sigma_last > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise levels need sigma1 > sigmaL > 0, got {sigma1} and {sigma_last}"
        )));
    }
    let ratio = sigma_last / sigma1;
    let mut out: Vec<f64> = (0..levels)
        .map(|l| sigma1 * ratio.powf(l as f64 / (levels - 1) as f64))
        .collect();
    out.push(0.0);
    Ok(out)
}

fn annealed_levels(sigmas: &[f64]) -> Result<&[f64]> {
    match sigmas.split_last() {
        Some((_, head)) if !head.is_empty() => Ok(head),
        _ => Err(Error::InvalidParameter(
            "noise sequence must hold at least one level".into(),
        )),
    }
}

/// Same step `eps0 / sigma_L^2` on every level.
pub fn detection_step_sizes(eps0: f64, sigmas: &[f64]) -> Result<Vec<f64>> {
    if !(eps0 > 0.0) {
        return Err(Error::InvalidParameter("eps0 must be positive".into()));
    }
    let levels = annealed_levels(sigmas)?;
    let last = levels[levels.len() - 1];
    Ok(vec![eps0 / (last * last); levels.len()])
}

/// Steps `eps0 sigma_l^2 / sigma_L^2`.
pub fn estimation_step_sizes(eps0: f64, sigmas: &[f64]) -> Result<Vec<f64>> {
    if !(eps0 > 0.0) {
        return Err(Error::InvalidParameter("eps0 must be positive".into()));
    }
    let levels = annealed_levels(sigmas)?;
    let last = levels[levels.len() - 1];
    Ok(levels
        .iter()
        .map(|s| eps0 * s * s / (last * last))
        .collect())
}

/// Spectral pre-conditioner diagonal for one noise level.
///
/// Coordinates past `singular.len()` are treated as zero singular values.
/// Entries are floored at `1e-12 sigma_l^2` where both branches vanish.
pub fn spectral_preconditioner(
    sigma_l: f64,
    sigma0: f64,
    singular: &[f64],
    dim: usize,
) -> Result<DVector<f64>> {
    if !(sigma_l > 0.0) || !(sigma0 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pre-conditioner needs sigma_l > 0 and sigma0 >= 0, got {sigma_l}, {sigma0}"
        )));
    }
    let s2 = sigma_l * sigma_l;
    let floor = 1e-12 * s2;
    let mut out = DVector::zeros(dim);
    for j in 0..dim {
        let sj = singular.get(j).copied().unwrap_or(0.0);
        let c = if sigma_l * sj <= sigma0 {
            if sj == 0.0 {
                if sigma0 == 0.0 {
                    return Err(Error::DegenerateNoise);
                }
                s2
            } else {
                s2 * (1.0 - s2 * sj * sj / (sigma0 * sigma0))
            }
        } else {
            s2 - sigma0 * sigma0 / (sj * sj)
        };
        out[j] = c.max(floor);
    }
    Ok(out)
}

/// `M = (gamma^2 / 4) C^-1` for a diagonal pre-conditioner.
pub fn mass_from_preconditioner(c: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    if let Some(bad) = c.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "pre-conditioner entries must be positive, found {bad}"
        )));
    }
    let k = gamma * gamma / 4.0;
    Ok(c.map(|v| k / v))
}

/// How the per-level step size is derived from `eps0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `eps0 / sigma_L^2` on every level (symbol detection).
    Constant,
    /// `eps0 sigma_l^2 / sigma_L^2` (channel estimation).
    Proportional,
}

impl FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" => Ok(Self::Constant),
            "proportional" => Ok(Self::Proportional),
            other => Err(Error::InvalidParameter(format!(
                "step rule must be `constant` or `proportional`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Proportional => "proportional",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassMode {
    /// `(gamma^2 / 4) C_l^-1`.
    Spectral,
    /// `(4 / gamma^2) C_l`, critically damped in the pre-conditioned metric.
    Matched,
    /// `xi I`.
    Scalar(f64),
}

impl FromStr for MassMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("spectral") {
            return Ok(Self::Spectral);
        }
        if s.eq_ignore_ascii_case("matched") {
            return Ok(Self::Matched);
        }
        if let Some(v) = s.strip_prefix("scalar:") {
            let xi: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad scalar mass `{v}`")))?;
            if xi > 0.0 && xi.is_finite() {
                return Ok(Self::Scalar(xi));
            }
        }
        Err(Error::InvalidParameter(format!(
            "mass mode must be `spectral`, `matched` or `scalar:<positive value>`, got `{s}`"
        )))
    }
}

impl fmt::Display for MassMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Spectral => f.write_str("spectral"),
            Self::Matched => f.write_str("matched"),
            Self::Scalar(xi) => write!(f, "scalar:{xi}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondMode {
    Spectral,
    Identity,
}

impl FromStr for PrecondMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spectral" => Ok(Self::Spectral),
            "identity" => Ok(Self::Identity),
            other => Err(Error::InvalidParameter(format!(
                "pre-conditioner must be `spectral` or `identity`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for PrecondMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Spectral => "spectral",
            Self::Identity => "identity",
        })
    }
}

/// Everything needed to build an [`AnnealSchedule`] once the channel is known.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub levels: usize,
    pub sigma1: f64,
    pub sigma_last: f64,
    pub eps0: f64,
    pub step_rule: StepRule,
    pub t_inner: usize,
    pub tau: f64,
    pub mass_mode: MassMode,
    pub precond: PrecondMode,
    /// Total inner-iteration budget across levels (early stopping).
    pub max_iters: Option<usize>,
}

/// Per-level sampler parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    /// `L + 1` noise levels, the last one zero.
    pub sigmas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub precond: Vec<DVector<f64>>,
    pub mass: Vec<DVector<f64>>,
    pub tau: f64,
    pub t_inner: usize,
    pub max_iters: Option<usize>,
}

impl AnnealSchedule {
    /// Builds the schedule for a problem of dimension `dim` whose channel has
    /// the given singular values and per-real noise std `sigma0`.
    pub fn build(
        cfg: &ScheduleConfig,
        gamma: f64,
        dim: usize,
        singular: &[f64],
        sigma0: f64,
    ) -> Result<Self> {
        let sigmas = geometric_sigmas(cfg.sigma1, cfg.sigma_last, cfg.levels)?;
        let epsilons = match cfg.step_rule {
            StepRule::Constant => detection_step_sizes(cfg.eps0, &sigmas)?,
            StepRule::Proportional => estimation_step_sizes(cfg.eps0, &sigmas)?,
        };
        let mut precond = Vec::with_capacity(cfg.levels);
        let mut mass = Vec::with_capacity(cfg.levels);
        for &sigma in &sigmas[..cfg.levels] {
            let c = match cfg.precond {
                PrecondMode::Spectral => spectral_preconditioner(sigma, sigma0, singular, dim)?,
                PrecondMode::Identity => DVector::from_element(dim, 1.0),
            };
            let m = match cfg.mass_mode {
                MassMode::Spectral => mass_from_preconditioner(&c, gamma)?,
                MassMode::Matched => c.map(|ci| 4.0 * ci / (gamma * gamma)),
                MassMode::Scalar(xi) => DVector::from_element(dim, xi),
            };
            precond.push(c);
            mass.push(m);
        }
        let schedule = Self {
            sigmas,
            epsilons,
            precond,
            mass,
            tau: cfg.tau,
            t_inner: cfg.t_inner,
            max_iters: cfg.max_iters,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Single-level schedule with fixed matrices, no annealing.
    pub fn fixed(
        sigma: f64,
        eps: f64,
        c: DVector<f64>,
        m: DVector<f64>,
        tau: f64,
        t_inner: usize,
    ) -> Result<Self> {
        let s = Self {
            sigmas: vec![sigma, 0.0],
            epsilons: vec![eps],
            precond: vec![c],
            mass: vec![m],
            tau,
            t_inner,
            max_iters: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn levels(&self) -> usize {
        self.epsilons.len()
    }

    pub fn dim(&self) -> usize {
        self.precond.first().map_or(0, |c| c.len())
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.epsilons.len();
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if l == 0 {
            return invalid("schedule has no levels".into());
        }
        if self.sigmas.len() != l + 1 || self.precond.len() != l || self.mass.len() != l {
            return invalid("schedule arrays have inconsistent lengths".into());
        }
        if self.sigmas[l] != 0.0 {
            return invalid("last noise level must be zero".into());
        }
        if self.sigmas[..l].windows(2).any(|w| !(w[0] > w[1])) || !(self.sigmas[l - 1] >= 0.0) {
            return invalid("noise levels must be strictly decreasing".into());
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return invalid("step sizes must be positive".into());
        }
        let dim = self.dim();
        for (c, m) in self.precond.iter().zip(&self.mass) {
            if c.len() != dim || m.len() != dim {
                return invalid("pre-conditioner and mass dimensions differ".into());
            }
            if c.iter()
                .chain(m.iter())
                .any(|v| !(*v > 0.0 && v.is_finite()))
            {
                return invalid("pre-conditioner and mass entries must be positive".into());
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return invalid(format!("temperature must be positive, got {}", self.tau));
        }
        Ok(())
    }
}

/// Method column of the Langevin hyperparameter table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetMethod {
    Overdamped,
    Underdamped,
    ThirdOrder,
}

impl PresetMethod {
    pub const ALL: [Self; 3] = [Self::Overdamped, Self::Underdamped, Self::ThirdOrder];

    pub fn order(self) -> Order {
        match self {
            Self::Overdamped => Order::First,
            Self::Underdamped => Order::Second,
            Self::ThirdOrder => Order::Third,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Overdamped => "overdamped",
            Self::Underdamped => "underdamped",
            Self::ThirdOrder => "third",
        }
    }
}

impl FromStr for PresetMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "overdamped" | "first" => Ok(Self::Overdamped),
            "underdamped" | "second" => Ok(Self::Underdamped),
            "third" | "third-order" => Ok(Self::ThirdOrder),
            other => Err(Error::InvalidParameter(format!(
                "unknown preset method `{other}`"
            ))),
        }
    }
}

/// One column of the detection hyperparameter table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TablePreset {
    pub method: PresetMethod,
    pub levels: usize,
    pub sigma1: f64,
    pub sigma_last: f64,
    pub eps0: f64,
    pub t_inner: usize,
    pub tau: f64,
}

impl TablePreset {
    pub fn name(&self) -> String {
        format!("{}-L{}", self.method.name(), self.levels)
    }

    /// Detection schedule config with the given mass and pre-conditioner modes.
    pub fn schedule_config(&self, mass_mode: MassMode, precond: PrecondMode) -> ScheduleConfig {
        ScheduleConfig {
            levels: self.levels,
            sigma1: self.sigma1,
            sigma_last: self.sigma_last,
            eps0: self.eps0,
            step_rule: StepRule::Constant,
            t_inner: self.t_inner,
            tau: self.tau,
            mass_mode,
            precond,
            max_iters: None,
        }
    }
}

/// Detection hyperparameters for `(method, L)` with `L` in {5, 10, 20}.
pub fn table1_preset(method: PresetMethod, levels: usize) -> Result<TablePreset> {
    let (sigma1, sigma_last, t_inner) = match levels {
        5 => (0.4, 0.02, 30),
        10 | 20 => (1.0, 0.01, 70),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "no preset for L = {levels} (available: 5, 10, 20)"
            )))
        }
    };
    let (eps0, tau) = match (method, levels) {
        (PresetMethod::ThirdOrder, 5) => (2.2e-4, 0.023),
        (PresetMethod::ThirdOrder, _) => (5e-5, 0.084),
        (_, 5) => (6e-4, 0.01),
        _ => (3e-5, 0.5),
    };
    Ok(TablePreset {
        method,
        levels,
        sigma1,
        sigma_last,
        eps0,
        t_inner,
        tau,
    })
}

/// Every `(method, L)` pair with a preset.
pub fn table1_presets() -> Vec<TablePreset> {
    let mut out = Vec::new();
    for method in PresetMethod::ALL {
        for levels in [5, 10, 20] {
            out.push(table1_preset(method, levels).expect("preset exists"));
        }
    }
    out
}
