//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use langevin_core::model::{real_noise_std, sample_channel, sigma0_from_snr};
use langevin_core::{ChannelModel, ChannelSpec, Constellation, LinearChannel, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One correlated channel with a received QAM16 vector.
pub struct DetectionFixture {
    pub channel: Arc<LinearChannel>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub constellation: Constellation,
}

/// Kronecker channel, `rho = 0.6`, QAM16 at `snr_db`.
pub fn detection_fixture(
    n_r: usize,
    n_u: usize,
    snr_db: f64,
    seed: u64,
) -> Result<DetectionFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = ChannelSpec::new(n_r, n_u, 0.6, ChannelModel::KroneckerExponential)?;
    let constellation = Constellation::new("QAM16")?;
    let hbar = sample_channel(&spec, &mut rng)?;
    let sigma_c = sigma0_from_snr(10f64.powf(snr_db / 10.0), &spec, &constellation);
    let channel = Arc::new(LinearChannel::from_complex(&hbar, real_noise_std(sigma_c))?);
    let x = constellation.random_symbols(n_u, &mut rng);
    let y = channel.apply_forward(&x, &mut rng)?;
    Ok(DetectionFixture {
        channel,
        x,
        y,
        constellation,
    })
}
