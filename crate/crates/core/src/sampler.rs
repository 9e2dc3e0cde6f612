//! Splitting integrators for first-, second- and third-order Langevin
//! dynamics, the annealed outer loop, and trajectory ensembles.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::schedule::{AnnealSchedule, DynamicsParams, Order};
use crate::score::ScoreModel;

/// Position, momentum and auxiliary variables of one trajectory.
///
/// `v` and `z` are kept at full dimension for every order; unused ones stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub z: DVector<f64>,
    pub level: usize,
    pub iter: usize,
}

impl SamplerState {
    pub fn new(x: DVector<f64>) -> Self {
        let n = x.len();
        Self {
            x,
            v: DVector::zeros(n),
            z: DVector::zeros(n),
            level: 0,
            iter: 0,
        }
    }

    /// `x ~ N(0, sigma_1^2 I)`, with `v, z ~ N(0, tau M_1)` where the order uses them.
    pub fn initial<R: Rng + ?Sized>(schedule: &AnnealSchedule, order: Order, rng: &mut R) -> Self {
        let n = schedule.dim();
        let s1 = schedule.sigmas[0];
        let x = DVector::from_fn(n, |_, _| s1 * rng.sample::<f64, _>(StandardNormal));
        let mut state = Self::new(x);
        let m = &schedule.mass[0];
        let tau = schedule.tau;
        if order != Order::First {
            state.v = DVector::from_fn(n, |i, _| {
                (tau * m[i]).sqrt() * rng.sample::<f64, _>(StandardNormal)
            });
        }
        if order == Order::Third {
            state.z = DVector::from_fn(n, |i, _| {
                (tau * m[i]).sqrt() * rng.sample::<f64, _>(StandardNormal)
            });
        }
        state
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.v.iter())
            .chain(self.z.iter())
            .all(|v| v.is_finite())
    }
}

/// Sub-flow labels. `E` is the full overdamped Euler-Maruyama step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    A,
    B,
    C,
    O,
    E,
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Self::A => 'A',
            Self::B => 'B',
            Self::C => 'C',
            Self::O => 'O',
            Self::E => 'E',
        };
        write!(f, "{c}")
    }
}

/// A compiled splitting scheme: sub-flows in application order, each with its
/// fraction of the step size.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    name: String,
    order: Order,
    steps: Vec<(Letter, f64)>,
}

impl SchemeSpec {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn steps(&self) -> &[(Letter, f64)] {
        &self.steps
    }

    /// Summed fraction per distinct letter.
    pub fn letter_totals(&self) -> Vec<(Letter, f64)> {
        let mut out: Vec<(Letter, f64)> = Vec::new();
        for &(l, f) in &self.steps {
            match out.iter_mut().find(|(k, _)| *k == l) {
                Some((_, t)) => *t += f,
                None => out.push((l, f)),
            }
        }
        out
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Known scheme names, in the canonical spelling.
pub const SCHEMES: [&str; 5] = ["ULA", "ABO", "BAOAB", "BCOABC", "BACOCAB"];

/// Resolves a scheme name for the given dynamics order.
///
/// `(BC)OA(BC)` is accepted as an alias of `BCOABC`.
pub fn compile_scheme(name: &str, order: Order) -> Result<SchemeSpec> {
    use Letter::*;
    let canonical = name.trim().to_ascii_uppercase().replace(['(', ')'], "");
    let (required, steps) = match canonical.as_str() {
        "ULA" => (Order::First, vec![(E, 1.0)]),
        "ABO" => (Order::Second, vec![(A, 1.0), (B, 1.0), (O, 1.0)]),
        "BAOAB" => (
            Order::Second,
            vec![(B, 0.5), (A, 0.5), (O, 1.0), (A, 0.5), (B, 0.5)],
        ),
        "BCOABC" => (
            Order::Third,
            vec![(B, 0.5), (C, 0.5), (A, 1.0), (O, 1.0), (B, 0.5), (C, 0.5)],
        ),
        "BACOCAB" => (
            Order::Third,
            vec![
                (B, 0.5),
                (A, 0.5),
                (C, 0.5),
                (O, 1.0),
                (C, 0.5),
                (A, 0.5),
                (B, 0.5),
            ],
        ),
        _ => return Err(Error::UnknownScheme(name.to_string())),
    };
    if required != order {
        return Err(Error::SchemeOrderMismatch {
            scheme: canonical,
            order: order.as_u8(),
        });
    }
    Ok(SchemeSpec {
        name: canonical,
        order,
        steps,
    })
}

/// Default scheme of each order: ULA, ABO and (BC)OA(BC).
pub fn default_scheme(order: Order) -> SchemeSpec {
    let name = match order {
        Order::First => "ULA",
        Order::Second => "ABO",
        Order::Third => "BCOABC",
    };
    compile_scheme(name, order).expect("default schemes are valid")
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `x <- x + dt C M^{-1} v`.
pub fn flow_a(state: &mut SamplerState, dt: f64, c: &DVector<f64>, m: &DVector<f64>) {
    for i in 0..state.x.len() {
        state.x[i] += dt * c[i] * state.v[i] / m[i];
    }
}

/// `v <- v + dt C score`.
pub fn flow_b(
    state: &mut SamplerState,
    dt: f64,
    c: &DVector<f64>,
    score: &DVector<f64>,
) -> Result<()> {
    check_dim("score length", state.v.len(), score.len())?;
    if score.iter().any(|s| !s.is_finite()) {
        return Err(Error::Divergence {
            level: state.level,
            iter: state.iter,
        });
    }
    for i in 0..state.v.len() {
        state.v[i] += dt * c[i] * score[i];
    }
    Ok(())
}

/// `v <- v + dt lambda z`.
pub fn flow_c(state: &mut SamplerState, dt: f64, lambda: f64) {
    state.v.axpy(dt * lambda, &state.z, 1.0);
}

/// Exact Ornstein-Uhlenbeck update of the momentum.
pub fn flow_o2<R: Rng + ?Sized>(
    state: &mut SamplerState,
    dt: f64,
    gamma: f64,
    tau: f64,
    m: &DVector<f64>,
    rng: &mut R,
) {
    let decay = (-gamma * dt).exp();
    let amp = (tau * (1.0 - decay * decay)).sqrt();
    for i in 0..state.v.len() {
        state.v[i] = decay * state.v[i] + amp * m[i].sqrt() * standard_normal(rng);
    }
}

/// Exact update of the auxiliary variable at frozen momentum.
pub fn flow_o3<R: Rng + ?Sized>(
    state: &mut SamplerState,
    dt: f64,
    lambda: f64,
    alpha: f64,
    tau: f64,
    m: &DVector<f64>,
    rng: &mut R,
) {
    let theta = (-alpha * dt).exp();
    let kappa = (1.0 - theta * theta).sqrt();
    let drift = (1.0 - theta) * lambda / alpha;
    let amp = kappa * tau.sqrt();
    for i in 0..state.z.len() {
        state.z[i] =
            theta * state.z[i] - drift * state.v[i] + amp * m[i].sqrt() * standard_normal(rng);
    }
}

/// Overdamped step `x <- x + (dt / 2) C score + sqrt(dt tau C) w`.
pub fn flow_ula<R: Rng + ?Sized>(
    state: &mut SamplerState,
    dt: f64,
    c: &DVector<f64>,
    score: &DVector<f64>,
    tau: f64,
    rng: &mut R,
) -> Result<()> {
    check_dim("score length", state.x.len(), score.len())?;
    if score.iter().any(|s| !s.is_finite()) {
        return Err(Error::Divergence {
            level: state.level,
            iter: state.iter,
        });
    }
    for i in 0..state.x.len() {
        state.x[i] += 0.5 * dt * c[i] * score[i] + (dt * tau * c[i]).sqrt() * standard_normal(rng);
    }
    Ok(())
}

/// Score buffer that is recomputed only when `x` or the level has changed.
#[derive(Debug, Clone)]
pub struct ScoreCache {
    value: DVector<f64>,
    level: Option<usize>,
}

impl ScoreCache {
    pub fn new(dim: usize) -> Self {
        Self {
            value: DVector::zeros(dim),
            level: None,
        }
    }

    pub fn invalidate(&mut self) {
        self.level = None;
    }

    pub fn get<S: ScoreModel + ?Sized>(
        &mut self,
        score: &S,
        x: &DVector<f64>,
        level: usize,
    ) -> &DVector<f64> {
        if self.level != Some(level) {
            score.score_into(x, level, &mut self.value);
            self.level = Some(level);
        }
        &self.value
    }
}

/// Applies one composed step of `scheme` at the state's current level.
#[allow(clippy::too_many_arguments)]
pub fn scheme_step<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    state: &mut SamplerState,
    scheme: &SchemeSpec,
    params: &DynamicsParams,
    schedule: &AnnealSchedule,
    score: &S,
    cache: &mut ScoreCache,
    rng: &mut R,
) -> Result<()> {
    let l = state.level;
    let eps = schedule.epsilons[l];
    let c = &schedule.precond[l];
    let m = &schedule.mass[l];
    for &(letter, frac) in &scheme.steps {
        let dt = frac * eps;
        match letter {
            Letter::A => {
                flow_a(state, dt, c, m);
                cache.invalidate();
            }
            Letter::B => {
                let g = cache.get(score, &state.x, l);
                flow_b(state, dt, c, g)?;
            }
            Letter::C => flow_c(state, dt, params.lambda),
            Letter::O => match scheme.order {
                Order::Third => {
                    flow_o3(state, dt, params.lambda, params.alpha, schedule.tau, m, rng)
                }
                _ => flow_o2(state, dt, params.gamma, schedule.tau, m, rng),
            },
            Letter::E => {
                let g = cache.get(score, &state.x, l).clone();
                flow_ula(state, dt, c, &g, schedule.tau, rng)?;
                cache.invalidate();
            }
        }
    }
    if !state.is_finite() {
        return Err(Error::Divergence {
            level: state.level,
            iter: state.iter,
        });
    }
    Ok(())
}

fn check_run_inputs<S: ScoreModel + ?Sized>(
    schedule: &AnnealSchedule,
    params: &DynamicsParams,
    scheme: &SchemeSpec,
    score: &S,
    init: &SamplerState,
) -> Result<()> {
    params.validate()?;
    if scheme.order != params.order {
        return Err(Error::SchemeOrderMismatch {
            scheme: scheme.name.clone(),
            order: params.order.as_u8(),
        });
    }
    check_dim("schedule dimension", score.dim(), schedule.dim())?;
    check_dim("initial x", score.dim(), init.x.len())?;
    check_dim("initial v", score.dim(), init.v.len())?;
    check_dim("initial z", score.dim(), init.z.len())
}

/// Annealed run that calls `observe` after every inner step.
pub fn anneal_run_observed<S, R, F>(
    schedule: &AnnealSchedule,
    params: &DynamicsParams,
    scheme: &SchemeSpec,
    score: &S,
    rng: &mut R,
    init: SamplerState,
    mut observe: F,
) -> Result<SamplerState>
where
    S: ScoreModel + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(&SamplerState),
{
    check_run_inputs(schedule, params, scheme, score, &init)?;
    let mut state = init;
    let mut cache = ScoreCache::new(score.dim());
    let budget = schedule.max_iters.unwrap_or(usize::MAX);
    let mut total = 0usize;
    'levels: for l in 0..schedule.levels() {
        state.level = l;
        cache.invalidate();
        for k in 0..schedule.t_inner {
            if total >= budget {
                break 'levels;
            }
            state.iter = k;
            scheme_step(&mut state, scheme, params, schedule, score, &mut cache, rng)?;
            total += 1;
            observe(&state);
        }
    }
    Ok(state)
}

/// Runs the annealed sampler from `init` and returns the final state.
pub fn anneal_run<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    schedule: &AnnealSchedule,
    params: &DynamicsParams,
    scheme: &SchemeSpec,
    score: &S,
    rng: &mut R,
    init: SamplerState,
) -> Result<SamplerState> {
    anneal_run_observed(schedule, params, scheme, score, rng, init, |_| {})
}

/// Mixes a sequence of integers into one seed (splitmix64 finalizer chain).
pub fn derive_seed(parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(0x5EED_u64, |acc, &p| mix(acc ^ mix(p)))
}

/// Candidates from an ensemble of independent trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    /// Final positions of surviving trajectories, in trajectory order.
    pub candidates: Vec<DVector<f64>>,
    /// Indices of trajectories that diverged, with the error each raised.
    pub diverged: Vec<(usize, Error)>,
}

/// Runs `u` independent annealed trajectories seeded by
/// `derive_seed(&[seed, index])`. Output is identical for serial and
/// parallel execution.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_run<S: ScoreModel + ?Sized>(
    schedule: &AnnealSchedule,
    params: &DynamicsParams,
    scheme: &SchemeSpec,
    score: &S,
    u: usize,
    seed: u64,
    parallel: bool,
) -> Result<EnsembleOutput> {
    if u == 0 {
        return Err(Error::InvalidParameter(
            "ensemble size must be at least 1".into(),
        ));
    }
    let run_one = |t: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, t as u64]));
        let init = SamplerState::initial(schedule, params.order, &mut rng);
        anneal_run(schedule, params, scheme, score, &mut rng, init).map(|s| s.x)
    };
    let results: Vec<Result<DVector<f64>>> = if parallel {
        (0..u).into_par_iter().map(run_one).collect()
    } else {
        (0..u).map(run_one).collect()
    };
    let mut out = EnsembleOutput {
        candidates: Vec::with_capacity(u),
        diverged: Vec::new(),
    };
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(x) => out.candidates.push(x),
            Err(e @ Error::Divergence { .. }) => out.diverged.push((t, e)),
            Err(e) => return Err(e),
        }
    }
    if out.candidates.is_empty() {
        return Err(Error::EnsembleDiverged(u));
    }
    Ok(out)
}
