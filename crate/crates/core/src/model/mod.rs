//! Linear observation model `y = Hx + z`, its real-valued form, symbol
//! alphabets and random channel generation.
//!
//! Conventions used throughout the crate:
//!
//! * complex quantities are mapped to real ones by stacking real parts on
//!   top of imaginary parts, so a complex `N_r x N_u` channel becomes the
//!   `2N_r x 2N_u` block matrix `[[Re H, -Im H], [Im H, Re H]]`;
//! * `sigma0` stored on a [`LinearChannel`] is the noise standard deviation
//!   per *real* dimension, i.e. the complex noise std divided by `sqrt(2)`;
//! * constellations have unit average complex-symbol energy.

mod ensemble_io;

pub use ensemble_io::{read_channel_ensemble, write_channel_ensemble};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Maps a complex matrix to its `2m x 2n` real block representation.
pub fn complex_matrix_to_real(h: &ComplexMatrix) -> DMatrix<f64> {
    let (m, n) = h.shape();
    let mut out = DMatrix::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let c = h[(i, j)];
            out[(i, j)] = c.re;
            out[(i, j + n)] = -c.im;
            out[(i + m, j)] = c.im;
            out[(i + m, j + n)] = c.re;
        }
    }
    out
}

/// Stacks `[Re v; Im v]`.
pub fn complex_vector_to_real(v: &ComplexVector) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`complex_vector_to_real`].
pub fn real_to_complex_vector(x: &DVector<f64>) -> Result<ComplexVector> {
    if x.len() % 2 == 1 {
        return Err(Error::DimensionMismatch {
            what: "real vector length must be even",
            expected: x.len() + 1,
            got: x.len(),
        });
    }
    let n = x.len() / 2;
    Ok(DVector::from_fn(n, |i, _| C64::new(x[i], x[i + n])))
}

/// Inverse of [`complex_matrix_to_real`]; reads the left block column.
pub fn real_to_complex_matrix(h: &DMatrix<f64>) -> Result<ComplexMatrix> {
    let (rows, cols) = h.shape();
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "real block matrix must have even shape, got {rows}x{cols}"
        )));
    }
    let (m, n) = (rows / 2, cols / 2);
    Ok(DMatrix::from_fn(m, n, |i, j| {
        C64::new(h[(i, j)], h[(i + m, j)])
    }))
}

/// Real-valued representation of a complex observation `(H, y)`.
pub fn complex_to_real(
    hbar: &ComplexMatrix,
    ybar: &ComplexVector,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_dim(
        "observation length vs channel rows",
        hbar.nrows(),
        ybar.len(),
    )?;
    Ok((complex_matrix_to_real(hbar), complex_vector_to_real(ybar)))
}

/// Finite symbol alphabet, described per real dimension.
///
/// A square QAM constellation is the Cartesian product of a PAM alphabet
/// with itself, so only the `sqrt(M)` PAM levels are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    name: String,
    points: Vec<f64>,
    energy: f64,
}

impl Constellation {
    /// Builds a named square constellation (`QPSK`, `QAM16`, `QAM64`),
    /// normalized to unit average complex-symbol energy.
    pub fn new(name: &str) -> Result<Self> {
        let (canonical, levels) = match name.to_ascii_uppercase().replace(['-', '_'], "").as_str() {
            "QPSK" | "QAM4" | "4QAM" => ("QPSK", 2usize),
            "QAM16" | "16QAM" => ("QAM16", 4),
            "QAM64" | "64QAM" => ("QAM64", 8),
            _ => return Err(Error::UnknownConstellation(name.to_string())),
        };
        let m = levels as f64;
        // Mean of |a + ib|^2 over the grid of odd integers is 2 (m^2 - 1) / 3.
        let scale = (2.0 * (m * m - 1.0) / 3.0).sqrt();
        let points: Vec<f64> = (0..levels)
            .map(|i| (2.0 * i as f64 - (m - 1.0)) / scale)
            .collect();
        let energy = 2.0 * points.iter().map(|p| p * p).sum::<f64>() / m;
        Ok(Self {
            name: canonical.to_string(),
            points,
            energy,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Per-real-dimension alphabet, sorted ascending.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Average energy of the complex constellation.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Modulation order of the complex constellation.
    pub fn order(&self) -> usize {
        self.points.len() * self.points.len()
    }

    /// Index of the closest point; ties go to the lower index.
    ///
    /// Decides against the midpoints of adjacent (sorted) points, so an input
    /// exactly on a midpoint maps to the lower point.
    pub fn nearest_index(&self, x: f64) -> usize {
        self.points
            .windows(2)
            .take_while(|w| x > 0.5 * (w[0] + w[1]))
            .count()
    }

    pub fn nearest(&self, x: f64) -> f64 {
        self.points[self.nearest_index(x)]
    }

    /// Draws `n` uniformly distributed complex symbols in real form (`2n` entries).
    pub fn random_symbols<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        let k = self.points.len();
        DVector::from_fn(2 * n, |_, _| self.points[rng.random_range(0..k)])
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Named constructor kept for symmetry with the other model operations.
pub fn make_constellation(name: &str) -> Result<Constellation> {
    Constellation::new(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    IidRayleigh,
    KroneckerExponential,
}

impl FromStr for ChannelModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iid-rayleigh" | "iid" | "rayleigh" => Ok(Self::IidRayleigh),
            "kronecker-exponential" | "kronecker" => Ok(Self::KroneckerExponential),
            other => Err(Error::InvalidParameter(format!(
                "unknown channel model `{other}`"
            ))),
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::IidRayleigh => "iid-rayleigh",
            Self::KroneckerExponential => "kronecker-exponential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub n_r: usize,
    pub n_u: usize,
    pub rho: f64,
    pub model: ChannelModel,
}

impl ChannelSpec {
    pub fn new(n_r: usize, n_u: usize, rho: f64, model: ChannelModel) -> Result<Self> {
        let spec = Self {
            n_r,
            n_u,
            rho,
            model,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 || self.n_u == 0 {
            return Err(Error::InvalidParameter(
                "antenna counts must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!(
                "correlation coefficient must lie in [0, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Exponential correlation matrix `[R]_ij = rho^|i-j|`.
pub fn exponential_correlation(n: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// Symmetric square root of a symmetric PSD matrix.
///
/// Eigenvalues that dip below zero by rounding are clamped to zero; a
/// clearly negative eigenvalue is an error.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut roots = eig.eigenvalues.clone();
    for l in roots.iter_mut() {
        if *l < -1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "matrix is not positive semidefinite (eigenvalue {l})"
            )));
        }
        *l = l.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws `H = R_r^{1/2} H_e R_u^{1/2}` with `H_e` i.i.d. `CN(0, 1)`.
pub fn sample_channel<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> Result<ComplexMatrix> {
    spec.validate()?;
    let he = DMatrix::from_fn(spec.n_r, spec.n_u, |_, _| standard_complex_normal(rng));
    if spec.model == ChannelModel::IidRayleigh || spec.rho == 0.0 {
        return Ok(he);
    }
    let rr = psd_sqrt(&exponential_correlation(spec.n_r, spec.rho))?.map(|v| C64::new(v, 0.0));
    let ru = psd_sqrt(&exponential_correlation(spec.n_u, spec.rho))?.map(|v| C64::new(v, 0.0));
    Ok(rr * he * ru)
}

/// Complex noise std `sigma0` that realizes `snr_linear = E||Hx||^2 / E||z||^2`
/// under unit-variance channel entries, averaging jointly over `H`, `x` and `z`.
pub fn sigma0_from_snr(snr_linear: f64, spec: &ChannelSpec, constellation: &Constellation) -> f64 {
    assert!(snr_linear > 0.0, "SNR must be positive");
    // E||Hx||^2 = N_r N_u Es and E||z||^2 = N_r sigma0^2.
    (spec.n_u as f64 * constellation.energy() / snr_linear).sqrt()
}

/// Per-real-dimension noise std for a complex noise std.
pub fn real_noise_std(sigma0_complex: f64) -> f64 {
    sigma0_complex * std::f64::consts::FRAC_1_SQRT_2
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Full singular value decomposition `H = U diag(s) V^T` with square
/// orthogonal `U` and `V` and `s` sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        let (m, n) = h.shape();
        let mut svd = SVD::new(h.clone(), true, true);
        svd.sort_by_singular_values();
        let thin_u = svd
            .u
            .take()
            .ok_or(Error::Singular("SVD did not converge"))?;
        let v_t = svd
            .v_t
            .take()
            .ok_or(Error::Singular("SVD did not converge"))?;
        Ok(Self {
            u: complete_basis(&thin_u, m),
            s: svd.singular_values,
            v: complete_basis(&v_t.transpose(), n),
        })
    }

    /// Singular value for spectral coordinate `j`, zero beyond the rank.
    pub fn singular(&self, j: usize) -> f64 {
        if j < self.s.len() {
            self.s[j]
        } else {
            0.0
        }
    }
}

/// Extends orthonormal columns to a full orthogonal basis of `R^m`.
fn complete_basis(thin: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let k = thin.ncols();
    if k >= m {
        return thin.clone();
    }
    let mut aug = DMatrix::zeros(m, k + m);
    aug.view_mut((0, 0), (m, k)).copy_from(thin);
    aug.view_mut((0, k), (m, m)).fill_with_identity();
    let q = aug.qr().q();
    let mut out = q.clone();
    out.view_mut((0, 0), (m, k)).copy_from(thin);
    out
}

/// Real-valued linear channel with its SVD computed once.
#[derive(Debug, Clone)]
pub struct LinearChannel {
    h: DMatrix<f64>,
    sigma0: f64,
    svd: Svd,
}

impl LinearChannel {
    /// `sigma0` is the noise std per real dimension.
    pub fn new(h: DMatrix<f64>, sigma0: f64) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::InvalidParameter("channel must be nonempty".into()));
        }
        if !h.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "channel has non-finite entries".into(),
            ));
        }
        if !(sigma0 >= 0.0 && sigma0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma0 must be >= 0, got {sigma0}"
            )));
        }
        let svd = Svd::new(&h)?;
        Ok(Self { h, sigma0, svd })
    }

    pub fn from_complex(hbar: &ComplexMatrix, sigma0: f64) -> Result<Self> {
        Self::new(complex_matrix_to_real(hbar), sigma0)
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn svd(&self) -> &Svd {
        &self.svd
    }

    /// Signal dimension (columns of `h`).
    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.h.nrows()
    }

    /// `y = Hx + z`, `z ~ N(0, sigma0^2 I)`.
    pub fn apply_forward<R: Rng + ?Sized>(
        &self,
        x: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        check_dim("signal length", self.dim(), x.len())?;
        let mut y = &self.h * x;
        if self.sigma0 > 0.0 {
            for yi in y.iter_mut() {
                let w: f64 = rng.sample(StandardNormal);
                *yi += self.sigma0 * w;
            }
        }
        Ok(y)
    }
}

/// Channel plus one observation.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    channel: Arc<LinearChannel>,
    y: DVector<f64>,
}

impl ForwardModel {
    pub fn new(h: DMatrix<f64>, y: DVector<f64>, sigma0: f64) -> Result<Self> {
        Self::with_channel(Arc::new(LinearChannel::new(h, sigma0)?), y)
    }

    /// Shares an already decomposed channel, e.g. across a coherence block.
    pub fn with_channel(channel: Arc<LinearChannel>, y: DVector<f64>) -> Result<Self> {
        check_dim("observation length", channel.n_obs(), y.len())?;
        Ok(Self { channel, y })
    }

    pub fn channel(&self) -> &Arc<LinearChannel> {
        &self.channel
    }

    pub fn h(&self) -> &DMatrix<f64> {
        self.channel.h()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma0(&self) -> f64 {
        self.channel.sigma0()
    }

    pub fn svd(&self) -> &Svd {
        self.channel.svd()
    }

    pub fn dim(&self) -> usize {
        self.channel.dim()
    }

    /// `||y - Hx||_2^2`.
    pub fn residual_sq(&self, x: &DVector<f64>) -> f64 {
        (&self.y - self.h() * x).norm_squared()
    }
}
