//! Symbol decisions, candidate selection, baseline detectors and error counting.
//!
//! All detectors work on the real-valued stacked form `[Re; Im]`, so complex
//! symbol `j` of an `n_u`-user vector occupies real coordinates `j` and `j + n_u`.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::model::{Constellation, ForwardModel, LinearChannel};
use crate::sampler::{default_scheme, ensemble_run, SchemeSpec};
use crate::schedule::{
    AnnealSchedule, DynamicsParams, MassMode, Order, PrecondMode, ScheduleConfig, TablePreset,
};
use crate::score::SpectralDetectionScore;

/// Outcome of a detector on one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub xhat: DVector<f64>,
    /// `||y - H xhat||_2`.
    pub residual: f64,
    pub trajectories_used: usize,
    pub runtime_ns: u128,
}

/// Elementwise nearest constellation point.
pub fn project_constellation(x: &DVector<f64>, constellation: &Constellation) -> DVector<f64> {
    x.map(|v| constellation.nearest(v))
}

/// Picks the candidate with the smallest residual, preferring the lowest index on ties.
pub fn select_candidate(
    candidates: &[DVector<f64>],
    model: &ForwardModel,
) -> Result<DetectionResult> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        check_dim("candidate length", model.dim(), c.len())?;
        let r = model.residual_sq(c);
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((i, r));
        }
    }
    let (i, r) = best.ok_or(Error::EmptyCandidates)?;
    Ok(DetectionResult {
        xhat: candidates[i].clone(),
        residual: r.sqrt(),
        trajectories_used: candidates.len(),
        runtime_ns: 0,
    })
}

/// Linear MMSE estimate followed by projection. `es` is the average
/// complex-symbol energy, so the per-real regularizer is `2 sigma0^2 / es`.
pub fn mmse_detect(
    model: &ForwardModel,
    constellation: &Constellation,
    es: f64,
) -> Result<DVector<f64>> {
    if !(es > 0.0) {
        return Err(Error::InvalidParameter(
            "symbol energy must be positive".into(),
        ));
    }
    let h = model.h();
    let reg = 2.0 * model.sigma0() * model.sigma0() / es;
    let mut gram = h.tr_mul(h);
    for i in 0..gram.nrows() {
        gram[(i, i)] += reg;
    }
    let rhs = h.tr_mul(model.y());
    let est = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular("MMSE system"))?,
    };
    Ok(project_constellation(&est, constellation))
}

fn pseudo_inverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = h.tr_mul(h);
    let scale = gram.diagonal().amax().max(f64::MIN_POSITIVE);
    let svd = gram.clone().svd(false, false);
    if svd.singular_values.min() <= 1e-12 * scale {
        return Err(Error::Singular("V-BLAST channel is rank deficient"));
    }
    let inv = gram
        .try_inverse()
        .ok_or(Error::Singular("V-BLAST channel is rank deficient"))?;
    Ok(inv * h.transpose())
}

/// Ordered successive interference cancellation with zero-forcing nulling.
///
/// At each stage the undecided coordinate whose pseudo-inverse row has the
/// smallest norm is detected, then its contribution is subtracted.
pub fn vblast_detect(model: &ForwardModel, constellation: &Constellation) -> Result<DVector<f64>> {
    let h = model.h();
    let (n_obs, n) = h.shape();
    if n_obs < n {
        return Err(Error::InvalidParameter(format!(
            "V-BLAST needs at least as many observations ({n_obs}) as unknowns ({n})"
        )));
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut y = model.y().clone();
    let mut xhat = DVector::zeros(n);
    while !remaining.is_empty() {
        let sub = h.select_columns(&remaining);
        let g = pseudo_inverse(&sub)?;
        let (k, _) = (0..remaining.len())
            .map(|r| (r, g.row(r).norm_squared()))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            );
        let col = remaining[k];
        let est = g.row(k).dot(&y.transpose());
        let sym = constellation.nearest(est);
        xhat[col] = sym;
        y.axpy(-sym, &h.column(col), 1.0);
        remaining.remove(k);
    }
    Ok(xhat)
}

/// Exhaustive maximum-likelihood search. Fails when `|alphabet|^dim` exceeds `max_candidates`.
pub fn ml_oracle(
    model: &ForwardModel,
    constellation: &Constellation,
    max_candidates: u128,
) -> Result<DVector<f64>> {
    let n = model.dim();
    let m = constellation.points().len();
    let size = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > max_candidates {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: max_candidates,
        });
    }
    let h = model.h();
    let pts = constellation.points();
    let mut idx = vec![0usize; n];
    let mut x = DVector::from_element(n, pts[0]);
    // Residual r = y - H x, updated incrementally as digits change.
    let mut r = model.y() - h * &x;
    let mut best = (r.norm_squared(), x.clone());
    loop {
        let mut d = 0;
        loop {
            if d == n {
                return Ok(best.1);
            }
            let old = pts[idx[d]];
            idx[d] = (idx[d] + 1) % m;
            let new = pts[idx[d]];
            r.axpy(old - new, &h.column(d), 1.0);
            x[d] = new;
            if idx[d] != 0 {
                break;
            }
            d += 1;
        }
        let e = r.norm_squared();
        if e < best.0 {
            best = (e, x.clone());
        }
    }
}

/// Counts complex-symbol errors; each vector holds `[Re; Im]` coordinates.
pub fn count_symbol_errors(
    decisions: &[DVector<f64>],
    truths: &[DVector<f64>],
) -> Result<(usize, usize)> {
    check_dim("number of decisions", truths.len(), decisions.len())?;
    let (mut errors, mut total) = (0, 0);
    for (d, t) in decisions.iter().zip(truths) {
        check_dim("decision length", t.len(), d.len())?;
        if t.len() % 2 != 0 {
            return Err(Error::InvalidParameter(
                "symbol vectors must have even length".into(),
            ));
        }
        let k = t.len() / 2;
        for j in 0..k {
            if d[j] != t[j] || d[j + k] != t[j + k] {
                errors += 1;
            }
        }
        total += k;
    }
    Ok((errors, total))
}

/// Fraction of complex symbols decided incorrectly.
pub fn symbol_error_rate(decisions: &[DVector<f64>], truths: &[DVector<f64>]) -> Result<f64> {
    let (e, n) = count_symbol_errors(decisions, truths)?;
    if n == 0 {
        return Err(Error::InvalidParameter("no symbols to score".into()));
    }
    Ok(e as f64 / n as f64)
}

/// Annealed Langevin detector run as an ensemble in spectral coordinates.
#[derive(Debug, Clone)]
pub struct LangevinDetector {
    pub schedule: ScheduleConfig,
    pub params: DynamicsParams,
    pub scheme: SchemeSpec,
    pub trajectories: usize,
    pub constellation: Constellation,
}

impl LangevinDetector {
    /// Table preset with `gamma = 1` and, for third order, `lambda = 1`, `alpha = 1.2`.
    pub fn from_preset(
        preset: &TablePreset,
        mass_mode: MassMode,
        trajectories: usize,
        constellation: Constellation,
    ) -> Self {
        let order = preset.method.order();
        let params = match order {
            Order::First => DynamicsParams::overdamped(),
            Order::Second => DynamicsParams::underdamped(1.0),
            Order::Third => DynamicsParams::third_order(1.0, 1.0, 1.2),
        };
        Self {
            schedule: preset.schedule_config(mass_mode, PrecondMode::Spectral),
            params,
            scheme: default_scheme(order),
            trajectories,
            constellation,
        }
    }

    /// Per-channel schedule; build once and reuse across observations.
    pub fn schedule_for(&self, channel: &LinearChannel) -> Result<AnnealSchedule> {
        AnnealSchedule::build(
            &self.schedule,
            self.params.gamma,
            channel.dim(),
            channel.svd().s.as_slice(),
            channel.sigma0(),
        )
    }

    pub fn detect(
        &self,
        channel: &Arc<LinearChannel>,
        schedule: &AnnealSchedule,
        y: &DVector<f64>,
        seed: u64,
        parallel: bool,
    ) -> Result<DetectionResult> {
        let start = Instant::now();
        let score = SpectralDetectionScore::new(
            channel.clone(),
            y,
            self.constellation.clone(),
            schedule.sigmas.clone(),
        )?;
        let out = ensemble_run(
            schedule,
            &self.params,
            &self.scheme,
            &score,
            self.trajectories,
            seed,
            parallel,
        )?;
        let candidates: Vec<DVector<f64>> = out
            .candidates
            .iter()
            .map(|chi| project_constellation(&score.to_signal(chi), &self.constellation))
            .collect();
        let model = ForwardModel::with_channel(channel.clone(), y.clone())?;
        let mut res = select_candidate(&candidates, &model)?;
        res.runtime_ns = start.elapsed().as_nanos();
        Ok(res)
    }
}
