//! Linear MMSE channel estimation from a single aged pilot, and the SINR of
//! data detected with that estimate.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{autocorrelation, complex_normal, LinkParams};
use crate::error::{invalid, Result};

/// Received pilot `value` observed `age` slots ago.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotObservation {
    pub value: Complex64,
    pub age: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub estimate: Complex64,
    /// Conditional second moment of the estimate given the pilot.
    pub estimate_variance: f64,
    /// Variance of h_t - estimate; depends on the age only.
    pub error_variance: f64,
}

/// sqrt(P_p) rho_h(age) / (P_p rho0 + sigma_n^2). Age 0 is the fresh-pilot limit.
pub fn mmse_gain(age: u32, params: &LinkParams) -> f64 {
    params.pilot_power.sqrt() * autocorrelation(age, params) / params.pilot_power_mean()
}

/// rho0 - P_p |rho_h(age)|^2 / (P_p rho0 + sigma_n^2), clamped into [0, rho0].
pub fn error_variance(age: u32, params: &LinkParams) -> f64 {
    let rho = autocorrelation(age, params);
    let explained = params.pilot_power * rho * rho / params.pilot_power_mean();
    (params.channel_variance - explained).clamp(0.0, params.channel_variance)
}

pub fn estimate_channel(obs: &PilotObservation, params: &LinkParams) -> ChannelEstimate {
    let gain = mmse_gain(obs.age, params);
    ChannelEstimate {
        estimate: obs.value * gain,
        estimate_variance: gain * gain * obs.value.norm_sqr(),
        error_variance: error_variance(obs.age, params),
    }
}

/// Factor such that sinr(age, y) = sinr_gain(age) * |y|^2.
pub fn sinr_gain(age: u32, params: &LinkParams) -> Result<f64> {
    if !(params.noise_variance > 0.0) {
        return Err(invalid("noise_variance", "SINR requires a positive noise variance"));
    }
    let gain = mmse_gain(age, params);
    let denom = params.data_power * error_variance(age, params) + params.noise_variance;
    Ok(params.data_power * gain * gain / denom)
}

/// SINR of a data slot decoded with the estimate built from pilot `y` of age `age`.
pub fn sinr(age: u32, y: Complex64, params: &LinkParams) -> Result<f64> {
    Ok(sinr_gain(age, params)? * y.norm_sqr())
}

/// Monte Carlo statistic for the orthogonality of estimate and error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityCheck {
    /// Sample mean of estimate * conj(error).
    pub mean: Complex64,
    /// Standard error of that mean (real and imaginary parts combined).
    pub std_error: f64,
    /// Sample mean of the error power |h_t - estimate|^2.
    pub error_power: f64,
    /// Sample mean of the conditional estimate variance.
    pub estimate_power: f64,
    pub draws: usize,
}

impl OrthogonalityCheck {
    pub fn within_sigmas(&self, sigmas: f64) -> bool {
        self.mean.norm() <= sigmas * self.std_error
    }
}

/// Draws (h_{t-age}, h_t) jointly Gaussian with the Jakes covariance, forms the
/// pilot and its MMSE estimate, and accumulates estimate * conj(error).
pub fn orthogonality_check(age: u32, params: &LinkParams, draws: usize, seed: u64) -> OrthogonalityCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho0 = params.channel_variance;
    let rho = autocorrelation(age, params);
    let innovation = (rho0 - rho * rho / rho0).max(0.0).sqrt();
    let gain = mmse_gain(age, params);
    let sqrt_pp = params.pilot_power.sqrt();
    let sigma = params.noise_variance.sqrt();

    let (mut sum, mut sq_re, mut sq_im) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    let (mut err_power, mut est_power) = (0.0, 0.0);
    for _ in 0..draws {
        let past = complex_normal(&mut rng) * rho0.sqrt();
        let now = past * (rho / rho0) + complex_normal(&mut rng) * innovation;
        let y = past * sqrt_pp + complex_normal(&mut rng) * sigma;
        let estimate = y * gain;
        let error = now - estimate;
        let product = estimate * error.conj();
        sum += product;
        sq_re += product.re * product.re;
        sq_im += product.im * product.im;
        err_power += error.norm_sqr();
        est_power += estimate.norm_sqr();
    }
    let n = draws as f64;
    let mean = sum / n;
    let var_re = (sq_re / n - mean.re * mean.re).max(0.0);
    let var_im = (sq_im / n - mean.im * mean.im).max(0.0);
    OrthogonalityCheck {
        mean,
        std_error: ((var_re + var_im) / n).sqrt(),
        error_power: err_power / n,
        estimate_power: est_power / n,
        draws,
    }
}
