//! Link constants, Jakes autocorrelation, and Rayleigh fading synthesis.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bessel::j0;
use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// International mile per hour in m/s (exact).
pub const MPS_PER_MPH: f64 = 0.44704;

/// Physical constants of a single point-to-point link. Powers and variances
/// are linear, frequencies in Hz, the sample period in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub pilot_power: f64,
    pub data_power: f64,
    pub noise_variance: f64,
    /// rho_h(0), the channel power.
    pub channel_variance: f64,
    pub doppler_hz: f64,
    pub sample_period: f64,
}

impl Default for LinkParams {
    /// 15 mph at 2.4 GHz, 1 ms slots, unit powers, 20 dB SNR.
    fn default() -> Self {
        let mobility = MobilityParams::from_mph(15.0, 2.4e9);
        Self {
            pilot_power: 1.0,
            data_power: 1.0,
            noise_variance: 0.01,
            channel_variance: 1.0,
            doppler_hz: doppler_frequency(&mobility),
            sample_period: 1e-3,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pilot_power", self.pilot_power),
            ("data_power", self.data_power),
            ("noise_variance", self.noise_variance),
            ("channel_variance", self.channel_variance),
            ("sample_period", self.sample_period),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.doppler_hz.is_finite() && self.doppler_hz >= 0.0) {
            return Err(invalid(
                "doppler_hz",
                format!("must be finite and >= 0, got {}", self.doppler_hz),
            ));
        }
        let nd = self.normalized_doppler();
        if nd >= 0.5 {
            return Err(Error::DopplerTooHigh(nd));
        }
        Ok(())
    }

    /// f_d * T_s.
    pub fn normalized_doppler(&self) -> f64 {
        self.doppler_hz * self.sample_period
    }

    /// Average SNR P_d * rho0 / sigma_n^2, in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.data_power * self.channel_variance / self.noise_variance).log10()
    }

    /// Sets the noise variance so that P_d * rho0 / sigma_n^2 equals `snr_db`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.noise_variance = self.data_power * self.channel_variance / 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn with_doppler_hz(mut self, doppler_hz: f64) -> Self {
        self.doppler_hz = doppler_hz;
        self
    }

    /// Variance of a received pilot, P_p * rho0 + sigma_n^2. |y|^2 is
    /// exponentially distributed with this mean.
    pub fn pilot_power_mean(&self) -> f64 {
        self.pilot_power * self.channel_variance + self.noise_variance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub speed_mps: f64,
    pub carrier_hz: f64,
}

impl MobilityParams {
    pub fn from_mph(speed_mph: f64, carrier_hz: f64) -> Self {
        Self {
            speed_mps: speed_mph * MPS_PER_MPH,
            carrier_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mps.is_finite() && (0.0..SPEED_OF_LIGHT).contains(&self.speed_mps)) {
            return Err(invalid(
                "speed_mps",
                format!("must lie in [0, c), got {}", self.speed_mps),
            ));
        }
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(invalid(
                "carrier_hz",
                format!("must be finite and > 0, got {}", self.carrier_hz),
            ));
        }
        Ok(())
    }
}

/// Maximum Doppler shift v * f_c / c.
pub fn doppler_frequency(mobility: &MobilityParams) -> f64 {
    mobility.speed_mps * mobility.carrier_hz / SPEED_OF_LIGHT
}

/// rho_h(lag) = rho0 * J0(2 pi f_d T_s lag).
pub fn autocorrelation(lag: u32, params: &LinkParams) -> f64 {
    params.channel_variance * unit_autocorrelation(lag as f64, params.normalized_doppler())
}

fn unit_autocorrelation(lag: f64, normalized_doppler: f64) -> f64 {
    j0(2.0 * PI * normalized_doppler * lag)
}

/// A realization of the fading process h_t.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingTrace {
    pub samples: Vec<Complex64>,
    pub params: LinkParams,
    pub seed: u64,
}

impl FadingTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// Spectral synthesis of a zero-mean circularly-symmetric complex Gaussian
/// sequence with autocovariance rho0 * J0(2 pi f_d T_s lag).
///
/// The process is synthesized on a circular grid of at least twice the
/// requested length: the target autocovariance is wrapped onto the grid,
/// transformed to a discrete power spectrum, clipped at zero (truncating the
/// Bessel tail leaves small negative ripples), and used to shape white
/// complex Gaussian coefficients. The output is scaled so its sample power is
/// exactly rho0. With `f_d = 0` the process is a single draw repeated
/// `length` times.
pub fn generate_fading_trace(params: &LinkParams, length: usize, seed: u64) -> Result<FadingTrace> {
    params.validate()?;
    if length == 0 {
        return Err(invalid("length", "fading trace length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = params.channel_variance.sqrt();
    let nd = params.normalized_doppler();

    let samples = if nd == 0.0 {
        vec![complex_normal(&mut rng) * scale; length]
    } else {
        let n = (2 * length).next_power_of_two().max(1024);
        let mut spectrum: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(unit_autocorrelation(k.min(n - k) as f64, nd), 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut spectrum);

        let power: Vec<f64> = spectrum.iter().map(|c| c.re.max(0.0)).collect();

        // x_t = n^{-1/2} sum_k sqrt(S_k) w_k e^{+2 pi i k t / n}
        let mut shaped: Vec<Complex64> = power
            .iter()
            .map(|p| complex_normal(&mut rng) * p.sqrt())
            .collect();
        planner.plan_fft_inverse(n).process(&mut shaped);
        shaped.truncate(length);
        let power = shaped.iter().map(|h| h.norm_sqr()).sum::<f64>() / length as f64;
        let gain = scale / power.sqrt();
        shaped.iter_mut().for_each(|h| *h *= gain);
        shaped
    };

    Ok(FadingTrace {
        samples,
        params: *params,
        seed,
    })
}

/// Sample autocovariance Re{ mean_t h_t conj(h_{t-lag}) } for lag = 0..=max_lag,
/// averaging over the N - lag available products.
pub fn empirical_autocorrelation(trace: &FadingTrace, max_lag: usize) -> Result<Vec<f64>> {
    let n = trace.samples.len();
    let required = 10 * max_lag;
    if max_lag == 0 || n <= required {
        return Err(Error::TraceTooShort {
            length: n,
            max_lag,
            required,
        });
    }
    let h = &trace.samples;
    Ok((0..=max_lag)
        .map(|lag| {
            let sum: f64 = h[lag..]
                .iter()
                .zip(h)
                .map(|(now, past)| (now * past.conj()).re)
                .sum();
            sum / (n - lag) as f64
        })
        .collect())
}
