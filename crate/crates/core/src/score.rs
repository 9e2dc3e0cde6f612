//! Annealed posterior scores: likelihood and prior components in spectral
//! (symbol detection) and direct (channel estimation) coordinates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::model::{ComplexMatrix, Constellation, LinearChannel, C64};

/// Level-indexed score function. `level` indexes the annealing schedule
/// (0 is the noisiest level).
pub trait ScoreModel: Send + Sync {
    fn dim(&self) -> usize;

    fn score_into(&self, state: &DVector<f64>, level: usize, out: &mut DVector<f64>);

    fn score(&self, state: &DVector<f64>, level: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.score_into(state, level, &mut out);
        out
    }
}

impl<S: ScoreModel + ?Sized> ScoreModel for Arc<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn score_into(&self, state: &DVector<f64>, level: usize, out: &mut DVector<f64>) {
        (**self).score_into(state, level, out)
    }
}

impl<S: ScoreModel + ?Sized> ScoreModel for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn score_into(&self, state: &DVector<f64>, level: usize, out: &mut DVector<f64>) {
        (**self).score_into(state, level, out)
    }
}

fn pinv_threshold(sigma0: f64) -> f64 {
    1e-12 * (sigma0 * sigma0).max(1e-30)
}

/// Spectral likelihood score
/// `Sigma^T |sigma0^2 I - sigma_l^2 Sigma Sigma^T|^+ (eta - Sigma chi)`.
///
/// Coordinates of `chi` beyond `s.len()` receive zero.
pub fn spectral_likelihood_score(
    chi: &DVector<f64>,
    eta: &DVector<f64>,
    s: &[f64],
    sigma0: f64,
    sigma_l: f64,
) -> DVector<f64> {
    let mut out = DVector::zeros(chi.len());
    spectral_likelihood_into(chi, eta, s, sigma0, sigma_l, &mut out);
    out
}

fn spectral_likelihood_into(
    chi: &DVector<f64>,
    eta: &DVector<f64>,
    s: &[f64],
    sigma0: f64,
    sigma_l: f64,
    out: &mut DVector<f64>,
) {
    let (v0, vl) = (sigma0 * sigma0, sigma_l * sigma_l);
    let thresh = pinv_threshold(sigma0);
    let rank = s.len().min(chi.len()).min(eta.len());
    out.fill(0.0);
    for j in 0..rank {
        let d = (v0 - vl * s[j] * s[j]).abs();
        if d >= thresh {
            out[j] = s[j] * (eta[j] - s[j] * chi[j]) / d;
        }
    }
}

/// `E[x | x_tilde]` for a uniform prior over the alphabet and Gaussian
/// smoothing of std `sigma_l`. Stable at small `sigma_l`.
pub fn gmm_conditional_expectation(
    xtilde: f64,
    sigma_l: f64,
    constellation: &Constellation,
) -> f64 {
    let pts = constellation.points();
    let inv = 1.0 / (2.0 * sigma_l * sigma_l);
    let max_logit = pts
        .iter()
        .map(|p| -(xtilde - p) * (xtilde - p) * inv)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for &p in pts {
        let w = (-(xtilde - p) * (xtilde - p) * inv - max_logit).exp();
        num += w * p;
        den += w;
    }
    num / den
}

/// Prior score `(E[x | x_tilde] - x_tilde) / sigma_l^2`, elementwise.
pub fn tweedie_prior_score(
    xtilde: &DVector<f64>,
    sigma_l: f64,
    constellation: &Constellation,
) -> DVector<f64> {
    let v = sigma_l * sigma_l;
    xtilde.map(|x| (gmm_conditional_expectation(x, sigma_l, constellation) - x) / v)
}

/// Prior score in spectral coordinates: `V^T score(V chi)`.
pub fn spectral_prior_score(
    chi: &DVector<f64>,
    v: &DMatrix<f64>,
    sigma_l: f64,
    constellation: &Constellation,
) -> DVector<f64> {
    let direct = tweedie_prior_score(&(v * chi), sigma_l, constellation);
    v.tr_mul(&direct)
}

/// Stacks a complex matrix as `[vec(Re H); vec(Im H)]` (column-major).
pub fn complex_matrix_to_vec(h: &ComplexMatrix) -> DVector<f64> {
    let n = h.len();
    DVector::from_fn(2 * n, |i, _| if i < n { h[i].re } else { h[i - n].im })
}

/// Inverse of [`complex_matrix_to_vec`].
pub fn vec_to_complex_matrix(v: &DVector<f64>, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    check_dim("vectorized complex matrix", 2 * rows * cols, v.len())?;
    let n = rows * cols;
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        let k = i + j * rows;
        C64::new(v[k], v[k + n])
    }))
}

/// Channel-estimation likelihood score `(Y - H P) P^H / (sigma0^2 + gamma_l^2)`,
/// returned in the real layout of [`complex_matrix_to_vec`]. `sigma0` is the
/// per-real-dimension noise std.
pub fn annealed_channel_likelihood_score(
    h_tilde: &DVector<f64>,
    y: &ComplexMatrix,
    p: &ComplexMatrix,
    sigma0: f64,
    gamma_l: f64,
) -> Result<DVector<f64>> {
    let (n_r, n_p) = y.shape();
    let n_u = p.nrows();
    check_dim("pilot count", n_p, p.ncols())?;
    let h = vec_to_complex_matrix(h_tilde, n_r, n_u)?;
    let resid = y - h * p;
    let g = resid * p.adjoint();
    Ok(complex_matrix_to_vec(&g) / (sigma0 * sigma0 + gamma_l * gamma_l))
}

/// Score of a diagonal Gaussian, `-(x - mean) / cov`.
pub fn gaussian_prior_score(
    x: &DVector<f64>,
    mean: &DVector<f64>,
    cov_diag: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| -(x[i] - mean[i]) / cov_diag[i])
}

/// Posterior score as the sum of likelihood and prior scores.
pub fn posterior_score(likelihood: &DVector<f64>, prior: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("prior score length", likelihood.len(), prior.len())?;
    Ok(likelihood + prior)
}

/// Annealed posterior score for symbol detection, expressed in the spectral
/// coordinates `chi = V^T x_tilde`.
#[derive(Debug, Clone)]
pub struct SpectralDetectionScore {
    channel: Arc<LinearChannel>,
    eta: DVector<f64>,
    constellation: Constellation,
    sigmas: Vec<f64>,
}

impl SpectralDetectionScore {
    pub fn new(
        channel: Arc<LinearChannel>,
        y: &DVector<f64>,
        constellation: Constellation,
        sigmas: Vec<f64>,
    ) -> Result<Self> {
        check_dim("observation length", channel.n_obs(), y.len())?;
        let eta = channel.svd().u.tr_mul(y);
        Ok(Self {
            channel,
            eta,
            constellation,
            sigmas,
        })
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    /// Maps spectral coordinates back to the signal domain.
    pub fn to_signal(&self, chi: &DVector<f64>) -> DVector<f64> {
        &self.channel.svd().v * chi
    }
}

impl ScoreModel for SpectralDetectionScore {
    fn dim(&self) -> usize {
        self.channel.dim()
    }

    fn score_into(&self, chi: &DVector<f64>, level: usize, out: &mut DVector<f64>) {
        let sigma_l = self.sigmas[level];
        let svd = self.channel.svd();
        spectral_likelihood_into(
            chi,
            &self.eta,
            svd.s.as_slice(),
            self.channel.sigma0(),
            sigma_l,
            out,
        );
        let mut x = DVector::zeros(chi.len());
        x.gemv(1.0, &svd.v, chi, 0.0);
        let v2 = sigma_l * sigma_l;
        for xi in x.iter_mut() {
            *xi = (gmm_conditional_expectation(*xi, sigma_l, &self.constellation) - *xi) / v2;
        }
        out.gemv_tr(1.0, &svd.v, &x, 1.0);
    }
}

/// Linear-Gaussian posterior with a diagonal Gaussian prior, annealed by
/// widening both the noise and the prior variance by `sigma_l^2`.
#[derive(Debug, Clone)]
pub struct LinearGaussianScore {
    h: DMatrix<f64>,
    y: DVector<f64>,
    sigma0: f64,
    prior_mean: DVector<f64>,
    prior_var: DVector<f64>,
    sigmas: Vec<f64>,
}

impl LinearGaussianScore {
    pub fn new(
        h: DMatrix<f64>,
        y: DVector<f64>,
        sigma0: f64,
        prior_mean: DVector<f64>,
        prior_var: DVector<f64>,
        sigmas: Vec<f64>,
    ) -> Result<Self> {
        check_dim("observation length", h.nrows(), y.len())?;
        check_dim("prior mean length", h.ncols(), prior_mean.len())?;
        check_dim("prior variance length", h.ncols(), prior_var.len())?;
        if prior_var.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(
                "prior variances must be positive".into(),
            ));
        }
        Ok(Self {
            h,
            y,
            sigma0,
            prior_mean,
            prior_var,
            sigmas,
        })
    }

    /// Closed-form posterior `(mean, covariance)` at zero annealing noise.
    pub fn exact_posterior(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let v0 = self.sigma0 * self.sigma0;
        let mut precision = self.h.tr_mul(&self.h) / v0;
        for i in 0..precision.nrows() {
            precision[(i, i)] += 1.0 / self.prior_var[i];
        }
        let cov = precision
            .try_inverse()
            .ok_or(Error::Singular("posterior precision"))?;
        let rhs = self.h.tr_mul(&self.y) / v0 + self.prior_mean.component_div(&self.prior_var);
        Ok((&cov * rhs, cov))
    }
}

impl ScoreModel for LinearGaussianScore {
    fn dim(&self) -> usize {
        self.h.ncols()
    }

    fn score_into(&self, x: &DVector<f64>, level: usize, out: &mut DVector<f64>) {
        let v = self.sigmas[level] * self.sigmas[level];
        let resid = &self.y - &self.h * x;
        out.gemv_tr(1.0 / (self.sigma0 * self.sigma0 + v), &self.h, &resid, 0.0);
        for i in 0..out.len() {
            out[i] -= (x[i] - self.prior_mean[i]) / (self.prior_var[i] + v);
        }
    }
}

/// Channel-estimation posterior: annealed pilot likelihood plus an i.i.d.
/// Gaussian prior on the real and imaginary parts of the channel.
#[derive(Debug, Clone)]
pub struct ChannelEstimationScore {
    y: ComplexMatrix,
    p: ComplexMatrix,
    sigma0: f64,
    prior_var: f64,
    sigmas: Vec<f64>,
}

impl ChannelEstimationScore {
    pub fn new(
        y: ComplexMatrix,
        p: ComplexMatrix,
        sigma0: f64,
        prior_var: f64,
        sigmas: Vec<f64>,
    ) -> Result<Self> {
        check_dim("pilot count", y.ncols(), p.ncols())?;
        if !(prior_var > 0.0) {
            return Err(Error::InvalidParameter(
                "prior variance must be positive".into(),
            ));
        }
        Ok(Self {
            y,
            p,
            sigma0,
            prior_var,
            sigmas,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.y.nrows(), self.p.nrows())
    }
}

impl ScoreModel for ChannelEstimationScore {
    fn dim(&self) -> usize {
        2 * self.y.nrows() * self.p.nrows()
    }

    fn score_into(&self, h: &DVector<f64>, level: usize, out: &mut DVector<f64>) {
        let sigma_l = self.sigmas[level];
        let lik = annealed_channel_likelihood_score(h, &self.y, &self.p, self.sigma0, sigma_l)
            .expect("state dimension fixed at construction");
        let var = self.prior_var + sigma_l * sigma_l;
        for i in 0..out.len() {
            out[i] = lik[i] - h[i] / var;
        }
    }
}

/// Score of the quadratic potential `U(x) = x^T Lambda x / 2`, independent of level.
#[derive(Debug, Clone)]
pub struct QuadraticScore {
    lambda: DMatrix<f64>,
}

impl QuadraticScore {
    pub fn new(lambda: DMatrix<f64>) -> Result<Self> {
        if !lambda.is_square() {
            return Err(Error::InvalidParameter(
                "potential matrix must be square".into(),
            ));
        }
        Ok(Self { lambda })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self {
            lambda: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }
}

impl ScoreModel for QuadraticScore {
    fn dim(&self) -> usize {
        self.lambda.nrows()
    }

    fn score_into(&self, x: &DVector<f64>, _level: usize, out: &mut DVector<f64>) {
        out.gemv(-1.0, &self.lambda, x, 0.0);
    }
}

/// Adapts a closure into a [`ScoreModel`].
pub struct FnScore<F> {
    dim: usize,
    f: F,
}

impl<F> FnScore<F>
where
    F: Fn(&DVector<f64>, usize) -> DVector<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> ScoreModel for FnScore<F>
where
    F: Fn(&DVector<f64>, usize) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_into(&self, state: &DVector<f64>, level: usize, out: &mut DVector<f64>) {
        out.copy_from(&(self.f)(state, level));
    }
}
