//! Statistical checks of the samplers: stationary moments, OU/FDT exactness,
//! agreement with the generic `(D, Q)` drift form, and a Gaussian channel
//! estimation problem with a closed-form posterior.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::model::{psd_sqrt, ComplexMatrix, C64};
use crate::sampler::{
    anneal_run, anneal_run_observed, ensemble_run, flow_o2, flow_o3, scheme_step, SamplerState,
    SchemeSpec, ScoreCache,
};
use crate::schedule::{AnnealSchedule, DynamicsParams, Order, ScheduleConfig};
use crate::score::{
    complex_matrix_to_vec, vec_to_complex_matrix, ChannelEstimationScore, LinearGaussianScore,
    QuadraticScore,
};

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub statistic: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Passes when `|statistic - target| <= tolerance * |target|`.
    pub fn relative(name: impl Into<String>, statistic: f64, target: f64, tolerance: f64) -> Self {
        let pass = (statistic - target).abs() <= tolerance * target.abs();
        Self {
            name: name.into(),
            statistic,
            target,
            tolerance,
            pass,
        }
    }

    /// Passes when `statistic <= target + tolerance`.
    pub fn at_most(name: impl Into<String>, statistic: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            target,
            tolerance,
            pass: statistic <= target + tolerance,
        }
    }

    /// Passes when `statistic >= target - tolerance`.
    pub fn at_least(name: impl Into<String>, statistic: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            target,
            tolerance,
            pass: statistic >= target - tolerance,
        }
    }
}

/// Streaming mean and covariance with batch-means standard errors.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    dim: usize,
    batch_len: usize,
    n: usize,
    sum: DVector<f64>,
    outer: DMatrix<f64>,
    batch_n: usize,
    batch_sum: DVector<f64>,
    batch_outer: DMatrix<f64>,
    batches: Vec<DMatrix<f64>>,
}

impl MomentAccumulator {
    /// `batch_len` samples form one batch for the standard-error estimate.
    pub fn new(dim: usize, batch_len: usize) -> Self {
        Self {
            dim,
            batch_len: batch_len.max(2),
            n: 0,
            sum: DVector::zeros(dim),
            outer: DMatrix::zeros(dim, dim),
            batch_n: 0,
            batch_sum: DVector::zeros(dim),
            batch_outer: DMatrix::zeros(dim, dim),
            batches: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        self.sum += x;
        self.outer.ger(1.0, x, x, 1.0);
        self.batch_n += 1;
        self.batch_sum += x;
        self.batch_outer.ger(1.0, x, x, 1.0);
        if self.batch_n == self.batch_len {
            let k = self.batch_n as f64;
            let mean = &self.batch_sum / k;
            let cov = (&self.batch_outer - &mean * mean.transpose() * k) / (k - 1.0);
            self.batches.push(cov);
            self.batch_n = 0;
            self.batch_sum.fill(0.0);
            self.batch_outer.fill(0.0);
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Summarizes against `target`, passing when the Frobenius-relative
    /// covariance error is within `tolerance`.
    pub fn report(&self, target: &DMatrix<f64>, tolerance: f64) -> Result<MomentReport> {
        if self.n < 2 {
            return Err(Error::InvalidParameter("need at least two samples".into()));
        }
        check_dim("target covariance size", self.dim, target.nrows())?;
        let k = self.n as f64;
        let mean = &self.sum / k;
        let mut covariance = (&self.outer - &mean * mean.transpose() * k) / (k - 1.0);
        covariance = (&covariance + covariance.transpose()) * 0.5;
        let b = self.batches.len();
        let covariance_se = if b >= 2 {
            let avg = self
                .batches
                .iter()
                .fold(DMatrix::zeros(self.dim, self.dim), |a, c| a + c)
                / b as f64;
            let var = self
                .batches
                .iter()
                .fold(DMatrix::zeros(self.dim, self.dim), |a, c| {
                    a + (c - &avg).map(|d| d * d)
                })
                / (b as f64 - 1.0);
            var.map(|v| (v / b as f64).sqrt())
        } else {
            DMatrix::from_element(self.dim, self.dim, f64::NAN)
        };
        let rel = (&covariance - target).norm() / target.norm();
        Ok(MomentReport {
            mean,
            covariance,
            covariance_se,
            n_samples: self.n,
            max_rel_err_vs_target: rel,
            tolerance,
            pass: rel <= tolerance,
        })
    }
}

/// Empirical moments against an analytic covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Batch-means standard error of each covariance entry.
    pub covariance_se: DMatrix<f64>,
    pub n_samples: usize,
    /// Frobenius-relative covariance error.
    pub max_rel_err_vs_target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Largest entrywise z-score between two independent covariance estimates.
pub fn covariance_z_score(a: &MomentReport, b: &MomentReport) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.covariance.nrows() {
        for j in i..a.covariance.ncols() {
            let se = (a.covariance_se[(i, j)].powi(2) + b.covariance_se[(i, j)].powi(2)).sqrt();
            let z = (a.covariance[(i, j)] - b.covariance[(i, j)]).abs() / se;
            worst = worst.max(z);
        }
    }
    worst
}

/// Two-sided standard normal quantile for a given significance level.
pub fn normal_quantile_two_sided(significance: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(1.0 - significance / 2.0)
}

/// Fixed-level sampling of the quadratic potential `x^T Lambda x / 2`.
#[derive(Debug, Clone)]
pub struct StationaryConfig {
    pub scheme: SchemeSpec,
    pub params: DynamicsParams,
    pub lambda: DMatrix<f64>,
    pub c: DVector<f64>,
    pub m: DVector<f64>,
    pub tau: f64,
    pub eps: f64,
    /// Recorded steps after burn-in.
    pub n_samples: usize,
    pub burn_in: usize,
    pub tolerance: f64,
}

impl StationaryConfig {
    /// `C = c`, `M = (gamma^2 / 4) C^-1`, burn-in of 20% of all steps.
    pub fn with_spectral_mass(
        scheme: SchemeSpec,
        params: DynamicsParams,
        lambda: DMatrix<f64>,
        c: DVector<f64>,
        tau: f64,
        eps: f64,
        n_samples: usize,
    ) -> Self {
        let k = params.gamma * params.gamma / 4.0;
        let m = c.map(|ci| k / ci);
        Self {
            scheme,
            params,
            lambda,
            c,
            m,
            tau,
            eps,
            n_samples,
            burn_in: n_samples / 4,
            tolerance: 0.05,
        }
    }
}

/// Moments of `x`, `v` and (third order) `z` against `tau Lambda^-1`, `tau M`, `tau M`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    pub x: MomentReport,
    pub v: Option<MomentReport>,
    pub z: Option<MomentReport>,
}

impl StationaryReport {
    pub fn pass(&self) -> bool {
        self.x.pass
            && self.v.as_ref().is_none_or(|r| r.pass)
            && self.z.as_ref().is_none_or(|r| r.pass)
    }
}

pub fn sample_stationary<R: Rng + ?Sized>(
    cfg: &StationaryConfig,
    rng: &mut R,
) -> Result<StationaryReport> {
    let n = cfg.lambda.nrows();
    if cfg.n_samples < 2 {
        return Err(Error::InvalidParameter(
            "need at least two recorded steps".into(),
        ));
    }
    let score = QuadraticScore::new(cfg.lambda.clone())?;
    let inv = cfg
        .lambda
        .clone()
        .try_inverse()
        .ok_or(Error::Singular("target precision"))?;
    let total = cfg.burn_in + cfg.n_samples;
    let schedule =
        AnnealSchedule::fixed(1.0, cfg.eps, cfg.c.clone(), cfg.m.clone(), cfg.tau, total)?;
    let batch = (cfg.n_samples / 50).max(2);
    let mut ax = MomentAccumulator::new(n, batch);
    let mut av = MomentAccumulator::new(n, batch);
    let mut az = MomentAccumulator::new(n, batch);
    let order = cfg.params.order;
    let init = SamplerState::initial(&schedule, order, rng);
    let mut step = 0usize;
    anneal_run_observed(
        &schedule,
        &cfg.params,
        &cfg.scheme,
        &score,
        rng,
        init,
        |s| {
            step += 1;
            if step > cfg.burn_in {
                ax.push(&s.x);
                if order != Order::First {
                    av.push(&s.v);
                }
                if order == Order::Third {
                    az.push(&s.z);
                }
            }
        },
    )?;
    let tm = DMatrix::from_diagonal(&(&cfg.m * cfg.tau));
    Ok(StationaryReport {
        x: ax.report(&(inv * cfg.tau), cfg.tolerance)?,
        v: if order != Order::First {
            Some(av.report(&tm, cfg.tolerance)?)
        } else {
            None
        },
        z: if order == Order::Third {
            Some(az.report(&tm, cfg.tolerance)?)
        } else {
            None
        },
    })
}

/// `dX = -(D + Q) grad H dt + sqrt(2 tau D) dW` on the stacked state.
type GradFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

pub struct GenericForm {
    pub d: DMatrix<f64>,
    pub q: DMatrix<f64>,
    d_sqrt: DMatrix<f64>,
    grad_h: GradFn,
}

impl std::fmt::Debug for GenericForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenericForm")
            .field("d", &self.d)
            .field("q", &self.q)
            .finish()
    }
}

impl GenericForm {
    pub fn new(d: DMatrix<f64>, q: DMatrix<f64>, grad_h: GradFn) -> Result<Self> {
        if d.shape() != q.shape() || !d.is_square() {
            return Err(Error::InvalidParameter(
                "D and Q must be square and equally sized".into(),
            ));
        }
        if (&q + q.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidParameter("Q must be antisymmetric".into()));
        }
        let d_sqrt = psd_sqrt(&d)?;
        Ok(Self {
            d,
            q,
            d_sqrt,
            grad_h,
        })
    }

    /// Blocks `D = blkdiag(0, gamma M)`, `Q = [[0, -C], [C, 0]]`, `H = U(x) + v^T M^-1 v / 2`.
    pub fn order2_quadratic(
        lambda: &DMatrix<f64>,
        c: &DVector<f64>,
        m: &DVector<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let n = lambda.nrows();
        let mut d = DMatrix::zeros(2 * n, 2 * n);
        let mut q = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            d[(n + i, n + i)] = gamma * m[i];
            q[(i, n + i)] = -c[i];
            q[(n + i, i)] = c[i];
        }
        let (lambda, m) = (lambda.clone(), m.clone());
        Self::new(
            d,
            q,
            Box::new(move |s: &DVector<f64>| {
                let mut g = DVector::zeros(2 * n);
                g.rows_mut(0, n).copy_from(&(&lambda * s.rows(0, n)));
                for i in 0..n {
                    g[n + i] = s[n + i] / m[i];
                }
                g
            }),
        )
    }

    /// Blocks `D = blkdiag(0, 0, alpha M)` and
    /// `Q = [[0, -C, 0], [C, 0, -lambda M], [0, lambda M, 0]]`.
    pub fn order3_quadratic(
        lambda: &DMatrix<f64>,
        c: &DVector<f64>,
        m: &DVector<f64>,
        coupling: f64,
        alpha: f64,
    ) -> Result<Self> {
        let n = lambda.nrows();
        let mut d = DMatrix::zeros(3 * n, 3 * n);
        let mut q = DMatrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            d[(2 * n + i, 2 * n + i)] = alpha * m[i];
            q[(i, n + i)] = -c[i];
            q[(n + i, i)] = c[i];
            q[(n + i, 2 * n + i)] = -coupling * m[i];
            q[(2 * n + i, n + i)] = coupling * m[i];
        }
        let (lambda, m) = (lambda.clone(), m.clone());
        Self::new(
            d,
            q,
            Box::new(move |s: &DVector<f64>| {
                let mut g = DVector::zeros(3 * n);
                g.rows_mut(0, n).copy_from(&(&lambda * s.rows(0, n)));
                for i in 0..n {
                    g[n + i] = s[n + i] / m[i];
                    g[2 * n + i] = s[2 * n + i] / m[i];
                }
                g
            }),
        )
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn grad_h(&self, state: &DVector<f64>) -> DVector<f64> {
        (self.grad_h)(state)
    }

    /// Deterministic part `-(D + Q) grad H`.
    pub fn drift(&self, state: &DVector<f64>) -> DVector<f64> {
        -(&self.d + &self.q) * self.grad_h(state)
    }
}

/// One Euler-Maruyama step of the generic form.
pub fn generic_form_step<R: Rng + ?Sized>(
    gform: &GenericForm,
    state: &DVector<f64>,
    dt: f64,
    tau: f64,
    rng: &mut R,
) -> DVector<f64> {
    let w = DVector::from_fn(gform.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    state + gform.drift(state) * dt + &gform.d_sqrt * w * (2.0 * tau * dt).sqrt()
}

fn stack(state: &SamplerState, order: Order) -> DVector<f64> {
    let mut parts: Vec<f64> = state.x.iter().copied().collect();
    if order != Order::First {
        parts.extend(state.v.iter());
    }
    if order == Order::Third {
        parts.extend(state.z.iter());
    }
    DVector::from_vec(parts)
}

fn unstack(v: &DVector<f64>, n: usize, order: Order) -> SamplerState {
    let mut s = SamplerState::new(v.rows(0, n).into_owned());
    if order != Order::First {
        s.v = v.rows(n, n).into_owned();
    }
    if order == Order::Third {
        s.z = v.rows(2 * n, n).into_owned();
    }
    s
}

/// Quadratic-target comparison between one composed scheme step and one
/// generic-form step.
#[derive(Debug, Clone)]
pub struct GenericFormCheck {
    pub scheme: SchemeSpec,
    pub params: DynamicsParams,
    pub lambda: DMatrix<f64>,
    pub c: DVector<f64>,
    pub m: DVector<f64>,
    pub tau: f64,
}

impl GenericFormCheck {
    pub fn generic_form(&self) -> Result<GenericForm> {
        match self.params.order {
            Order::Second => {
                GenericForm::order2_quadratic(&self.lambda, &self.c, &self.m, self.params.gamma)
            }
            Order::Third => GenericForm::order3_quadratic(
                &self.lambda,
                &self.c,
                &self.m,
                self.params.lambda,
                self.params.alpha,
            ),
            Order::First => Err(Error::InvalidParameter(
                "generic form needs order 2 or 3".into(),
            )),
        }
    }

    fn composed_step<R: Rng + ?Sized>(
        &self,
        state: &DVector<f64>,
        eps: f64,
        tau: f64,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let n = self.lambda.nrows();
        let order = self.params.order;
        // Built directly: the schedule validator rejects the zero temperature
        // used for exact one-step means.
        let schedule = AnnealSchedule {
            sigmas: vec![1.0, 0.0],
            epsilons: vec![eps],
            precond: vec![self.c.clone()],
            mass: vec![self.m.clone()],
            tau,
            t_inner: 1,
            max_iters: None,
        };
        let score = QuadraticScore::new(self.lambda.clone())?;
        let mut s = unstack(state, n, order);
        let mut cache = ScoreCache::new(n);
        scheme_step(
            &mut s,
            &self.scheme,
            &self.params,
            &schedule,
            &score,
            &mut cache,
            rng,
        )?;
        Ok(stack(&s, order))
    }

    /// Difference of one-step means at step `eps`.
    ///
    /// The target is quadratic, so both one-step maps are affine in the
    /// injected Gaussian noise and their means equal the noise-free maps.
    pub fn mean_gap(&self, state: &DVector<f64>, eps: f64) -> Result<f64> {
        let gform = self.generic_form()?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let composed = self.composed_step(state, eps, 0.0, &mut rng)?;
        let euler = state + gform.drift(state) * eps;
        Ok((composed - euler).norm())
    }

    /// Monte Carlo one-step means of the composed and generic steps.
    pub fn sampled_means<R: Rng + ?Sized>(
        &self,
        state: &DVector<f64>,
        eps: f64,
        replicates: usize,
        rng: &mut R,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let gform = self.generic_form()?;
        let mut a = DVector::zeros(state.len());
        let mut b = DVector::zeros(state.len());
        for _ in 0..replicates {
            a += self.composed_step(state, eps, self.tau, rng)?;
            b += generic_form_step(&gform, state, eps, self.tau, rng);
        }
        Ok((a / replicates as f64, b / replicates as f64))
    }
}

/// Ensemble mean of annealed samples against the closed-form posterior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMeanReport {
    pub empirical_mean: DVector<f64>,
    pub exact_mean: DVector<f64>,
    /// Standard error of each coordinate, `sqrt(tau Sigma_ii / n)`.
    pub standard_error: DVector<f64>,
    pub n_samples: usize,
    pub max_abs_z: f64,
    pub pass: bool,
}

/// Runs `u` independent trajectories and passes when every coordinate of
/// the sample mean lies within `z_limit` standard errors of the exact mean.
#[allow(clippy::too_many_arguments)]
pub fn posterior_mean_check(
    score: &LinearGaussianScore,
    schedule: &AnnealSchedule,
    params: &DynamicsParams,
    scheme: &SchemeSpec,
    u: usize,
    seed: u64,
    z_limit: f64,
) -> Result<PosteriorMeanReport> {
    let (exact_mean, cov) = score.exact_posterior()?;
    let out = ensemble_run(schedule, params, scheme, score, u, seed, true)?;
    let n = out.candidates.len();
    let empirical_mean = out
        .candidates
        .iter()
        .fold(DVector::zeros(exact_mean.len()), |a, c| a + c)
        / n as f64;
    let standard_error = DVector::from_fn(exact_mean.len(), |i, _| {
        (schedule.tau * cov[(i, i)] / n as f64).sqrt()
    });
    let max_abs_z = (&empirical_mean - &exact_mean)
        .component_div(&standard_error)
        .amax();
    Ok(PosteriorMeanReport {
        empirical_mean,
        exact_mean,
        standard_error,
        n_samples: n,
        max_abs_z,
        pass: max_abs_z <= z_limit,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_dim("slope sample count", xs.len(), ys.len())?;
    if xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(
            "slope needs two or more positive points".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Parameters of an O-substep check.
#[derive(Debug, Clone)]
pub struct FdtConfig {
    pub order: Order,
    pub params: DynamicsParams,
    pub m: DVector<f64>,
    pub tau: f64,
    pub dt: f64,
    /// Independent draws.
    pub n: usize,
}

/// Checks the O-substep against its exact Ornstein-Uhlenbeck law.
///
/// Order 2: one update from `v = 0` has covariance `tau (1 - e^{-2 gamma dt}) M` (3%).
/// Order 3: with `v = 0`, `n` independent chains run to stationarity give
/// covariance `tau M` (3%) and lag-`k` autocorrelation `e^{-alpha k dt}` for
/// `k` in {1, 5, 10} (5%).
pub fn fdt_check<R: Rng + ?Sized>(cfg: &FdtConfig, rng: &mut R) -> Result<Vec<CheckRow>> {
    let dim = cfg.m.len();
    let mut rows = Vec::new();
    match cfg.order {
        Order::Second => {
            let mut acc = DVector::zeros(dim);
            for _ in 0..cfg.n {
                let mut s = SamplerState::new(DVector::zeros(dim));
                flow_o2(&mut s, cfg.dt, cfg.params.gamma, cfg.tau, &cfg.m, rng);
                acc += s.v.component_mul(&s.v);
            }
            let factor = 1.0 - (-2.0 * cfg.params.gamma * cfg.dt).exp();
            for (i, sum) in acc.iter().enumerate() {
                let target = cfg.tau * factor * cfg.m[i];
                let stat = sum / cfg.n as f64;
                rows.push(fdt_row(
                    format!("o2_update_variance[{i}]"),
                    stat,
                    target,
                    0.03,
                ));
            }
        }
        Order::Third => {
            let theta = (-cfg.params.alpha * cfg.dt).exp();
            let burn = ((20.0 / (cfg.params.alpha * cfg.dt)).ceil() as usize).max(10);
            let lags = [1usize, 5, 10];
            let mut var = vec![0.0; dim];
            let mut cross = vec![[0.0; 3]; dim];
            for _ in 0..cfg.n {
                let mut s = SamplerState::new(DVector::zeros(dim));
                for _ in 0..burn {
                    flow_o3(
                        &mut s,
                        cfg.dt,
                        cfg.params.lambda,
                        cfg.params.alpha,
                        cfg.tau,
                        &cfg.m,
                        rng,
                    );
                }
                let z0 = s.z.clone();
                let mut k = 0;
                for (li, &lag) in lags.iter().enumerate() {
                    while k < lag {
                        flow_o3(
                            &mut s,
                            cfg.dt,
                            cfg.params.lambda,
                            cfg.params.alpha,
                            cfg.tau,
                            &cfg.m,
                            rng,
                        );
                        k += 1;
                    }
                    for i in 0..dim {
                        cross[i][li] += z0[i] * s.z[i];
                    }
                }
                for i in 0..dim {
                    var[i] += z0[i] * z0[i];
                }
            }
            for i in 0..dim {
                let stat = var[i] / cfg.n as f64;
                rows.push(fdt_row(
                    format!("o3_stationary_variance[{i}]"),
                    stat,
                    cfg.tau * cfg.m[i],
                    0.03,
                ));
                for (li, &lag) in lags.iter().enumerate() {
                    let rho = cross[i][li] / var[i];
                    let target = theta.powi(lag as i32);
                    rows.push(fdt_row(
                        format!("o3_autocorrelation_lag{lag}[{i}]"),
                        rho,
                        target,
                        0.05,
                    ));
                }
            }
        }
        Order::First => {
            return Err(Error::InvalidParameter(
                "the O-substep needs order 2 or 3".into(),
            ))
        }
    }
    Ok(rows)
}

fn fdt_row(name: String, stat: f64, target: f64, tol: f64) -> CheckRow {
    if target == 0.0 {
        CheckRow::at_most(name, stat.abs(), 0.0, 1e-12)
    } else {
        CheckRow::relative(name, stat, target, tol)
    }
}

/// First `n_p` columns of the unitary `n_u`-point DFT matrix.
pub fn dft_pilots(n_u: usize, n_p: usize) -> ComplexMatrix {
    let scale = 1.0 / (n_u as f64).sqrt();
    ComplexMatrix::from_fn(n_u, n_p, |i, j| {
        let phase = -2.0 * std::f64::consts::PI * (i * j) as f64 / n_u as f64;
        C64::from_polar(scale, phase)
    })
}

/// Posterior mean of `H` given `Y = H P + Z` with i.i.d. circular Gaussian
/// prior and noise. Variances are per real dimension.
pub fn channel_mmse_estimate(
    y: &ComplexMatrix,
    p: &ComplexMatrix,
    sigma0: f64,
    prior_var: f64,
) -> Result<ComplexMatrix> {
    check_dim("pilot count", y.ncols(), p.ncols())?;
    let n_u = p.nrows();
    let ratio = C64::new(sigma0 * sigma0 / prior_var, 0.0);
    let gram = p * p.adjoint() + ComplexMatrix::identity(n_u, n_u) * ratio;
    let inv = gram
        .try_inverse()
        .ok_or(Error::Singular("pilot Gram matrix"))?;
    Ok(y * p.adjoint() * inv)
}

/// Channel-estimation problem with an i.i.d. `CN(0, 1)` channel prior.
#[derive(Debug, Clone)]
pub struct ChannelToyConfig {
    pub n_r: usize,
    pub n_u: usize,
    pub alpha_p: f64,
    pub snr_db: f64,
    pub schedule: ScheduleConfig,
    pub params: DynamicsParams,
    pub scheme: SchemeSpec,
    /// Independent channel draws pooled into one NMSE.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelToyResult {
    pub nmse_db: f64,
    pub mmse_nmse_db: f64,
    pub n_pilots: usize,
    pub trials: usize,
}

/// Per-real-dimension variance of the channel prior.
pub const CHANNEL_PRIOR_VAR: f64 = 0.5;

/// Runs the annealed sampler on `trials` random instances and pools
/// `||H_hat - H||_F^2 / ||H||_F^2` into dB, alongside the analytic MMSE.
pub fn gaussian_channel_toy<R: Rng + ?Sized>(
    cfg: &ChannelToyConfig,
    rng: &mut R,
) -> Result<ChannelToyResult> {
    if !(cfg.alpha_p > 0.0 && cfg.alpha_p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "pilot ratio must lie in (0, 1], got {}",
            cfg.alpha_p
        )));
    }
    if cfg.trials == 0 || cfg.n_r == 0 || cfg.n_u == 0 {
        return Err(Error::InvalidParameter(
            "channel toy needs positive sizes and trials".into(),
        ));
    }
    let n_p = ((cfg.alpha_p * cfg.n_u as f64).round() as usize).max(1);
    // Unit-norm pilot columns and unit-variance entries give unit received
    // power per antenna and pilot, so the complex noise variance is 1 / SNR.
    let snr = 10f64.powf(cfg.snr_db / 10.0);
    let sigma0 = (0.5 / snr).sqrt();
    let dim = 2 * cfg.n_r * cfg.n_u;
    let schedule = AnnealSchedule::build(&cfg.schedule, cfg.params.gamma, dim, &[], sigma0)?;
    let (mut err, mut err_mmse, mut energy) = (0.0, 0.0, 0.0);
    for _ in 0..cfg.trials {
        let s = CHANNEL_PRIOR_VAR.sqrt();
        let h = ComplexMatrix::from_fn(cfg.n_r, cfg.n_u, |_, _| {
            C64::new(
                s * rng.sample::<f64, _>(StandardNormal),
                s * rng.sample::<f64, _>(StandardNormal),
            )
        });
        let p = dft_pilots(cfg.n_u, n_p);
        let z = ComplexMatrix::from_fn(cfg.n_r, n_p, |_, _| {
            C64::new(
                sigma0 * rng.sample::<f64, _>(StandardNormal),
                sigma0 * rng.sample::<f64, _>(StandardNormal),
            )
        });
        let y = &h * &p + z;
        let score = ChannelEstimationScore::new(
            y.clone(),
            p.clone(),
            sigma0,
            CHANNEL_PRIOR_VAR,
            schedule.sigmas.clone(),
        )?;
        let init = SamplerState::initial(&schedule, cfg.params.order, rng);
        let out = anneal_run(&schedule, &cfg.params, &cfg.scheme, &score, rng, init)?;
        let hhat = vec_to_complex_matrix(&out.x, cfg.n_r, cfg.n_u)?;
        let mmse = channel_mmse_estimate(&y, &p, sigma0, CHANNEL_PRIOR_VAR)?;
        err += (&hhat - &h).norm_squared();
        err_mmse += (&mmse - &h).norm_squared();
        energy += complex_matrix_to_vec(&h).norm_squared();
    }
    Ok(ChannelToyResult {
        nmse_db: 10.0 * (err / energy).log10(),
        mmse_nmse_db: 10.0 * (err_mmse / energy).log10(),
        n_pilots: n_p,
        trials: cfg.trials,
    })
}
