//! JSON experiment configuration. Users speak mph and dB; everything handed to
//! the core library is SI and linear.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use aocsi::{
    doppler_frequency, load_bler_table, LinkParams, McsRates, McsTable, MobilityParams,
    QuadratureConfig, RewardCurve, RewardMode,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedUnit {
    Mph,
    Mps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mobility {
    pub speed: f64,
    pub unit: SpeedUnit,
    pub carrier_hz: f64,
}

impl Default for Mobility {
    fn default() -> Self {
        Self {
            speed: 15.0,
            unit: SpeedUnit::Mph,
            carrier_hz: 2.4e9,
        }
    }
}

impl Mobility {
    pub fn params(&self) -> MobilityParams {
        match self.unit {
            SpeedUnit::Mph => MobilityParams::from_mph(self.speed, self.carrier_hz),
            SpeedUnit::Mps => MobilityParams {
                speed_mps: self.speed,
                carrier_hz: self.carrier_hz,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub speed_mph: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: (-5..=25).step_by(5).map(f64::from).collect(),
            speed_mph: vec![2.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub trace_length: usize,
    pub autocorrelation_lags: usize,
    pub orthogonality_draws: usize,
    pub monte_carlo_samples: usize,
    pub quadrature_points: usize,
    pub random_curves: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            trace_length: 1_000_000,
            autocorrelation_lags: 100,
            orthogonality_draws: 1_000_000,
            monte_carlo_samples: 10_000_000,
            quadrature_points: 10,
            random_curves: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub pilot_power: f64,
    pub data_power: f64,
    /// Linear noise variance; exclusive with `snr_db`.
    #[serde(default)]
    pub noise_variance: Option<f64>,
    /// Average SNR P_d rho0 / sigma_n^2 in dB; exclusive with `noise_variance`. Files must set
    /// exactly one of the two; the in-code default is 20 dB.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub channel_variance: f64,
    pub mobility: Mobility,
    pub sample_period_s: f64,
    /// CQI -> rate JSON; the bundled LTE table when absent.
    pub mcs_config: Option<PathBuf>,
    /// `default` for the logistic model, otherwise a `cqi,snr_db,bler` CSV.
    pub bler_table: String,
    /// Synthetic `age,reward` curve for `solve`, replacing the physical one.
    pub reward_csv: Option<PathBuf>,
    pub delta_max: usize,
    pub tau_max: usize,
    pub quadrature_nodes: usize,
    pub solver_tol: f64,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub baseline_period: usize,
    pub mode: RewardMode,
    pub sweep: SweepConfig,
    pub validate: ValidateConfig,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pilot_power: 1.0,
            data_power: 1.0,
            noise_variance: None,
            snr_db: Some(20.0),
            channel_variance: 1.0,
            mobility: Mobility::default(),
            sample_period_s: 1e-3,
            mcs_config: None,
            bler_table: "default".into(),
            reward_csv: None,
            delta_max: 200,
            tau_max: aocsi::scheduler::DEFAULT_TAU_MAX,
            quadrature_nodes: 64,
            solver_tol: 1e-12,
            horizon: 1_000_000,
            seeds: vec![1, 2, 3, 4, 5],
            baseline_period: 2,
            mode: RewardMode::Expected,
            sweep: SweepConfig::default(),
            validate: ValidateConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.mcs_config.as_mut().map(resolve);
        config.reward_csv.as_mut().map(resolve);
        if config.bler_table != "default" {
            let mut p = PathBuf::from(&config.bler_table);
            resolve(&mut p);
            config.bler_table = p.to_string_lossy().into_owned();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.noise_variance, self.snr_db) {
            (Some(_), Some(_)) => bail!("config: give only one of `noise_variance` and `snr_db`"),
            (None, None) => bail!("config: one of `noise_variance` or `snr_db` is required"),
            _ => {}
        }
        if self.delta_max < 2 {
            bail!("config: `delta_max` must be at least 2, got {}", self.delta_max);
        }
        if self.tau_max == 0 {
            bail!("config: `tau_max` must be at least 1");
        }
        if self.seeds.is_empty() {
            bail!("config: `seeds` must not be empty");
        }
        if self.baseline_period == 0 {
            bail!("config: `baseline_period` must be at least 1");
        }
        self.mobility
            .params()
            .validate()
            .context("config field `mobility`")?;
        self.link_params().map(|_| ())
    }

    pub fn link_params(&self) -> Result<LinkParams> {
        let doppler_hz = doppler_frequency(&self.mobility.params());
        let mut params = LinkParams {
            pilot_power: self.pilot_power,
            data_power: self.data_power,
            noise_variance: self.noise_variance.unwrap_or(1.0),
            channel_variance: self.channel_variance,
            doppler_hz,
            sample_period: self.sample_period_s,
        };
        if let Some(snr) = self.snr_db {
            params = params.with_snr_db(snr);
        }
        params.validate().context("config link parameters")?;
        Ok(params)
    }

    /// Link parameters with the speed replaced by `speed_mph`.
    pub fn link_params_at_speed(&self, speed_mph: f64) -> Result<LinkParams> {
        let mobility = MobilityParams::from_mph(speed_mph, self.mobility.carrier_hz);
        mobility
            .validate()
            .with_context(|| format!("speed grid point {speed_mph} mph"))?;
        let params = self.link_params()?.with_doppler_hz(doppler_frequency(&mobility));
        params
            .validate()
            .with_context(|| format!("speed grid point {speed_mph} mph"))?;
        Ok(params)
    }

    pub fn mcs_rates(&self) -> Result<McsRates> {
        match &self.mcs_config {
            None => Ok(McsRates::lte_default()),
            Some(path) => Ok(McsRates::from_json_file(path)?),
        }
    }

    pub fn mcs_table(&self) -> Result<McsTable> {
        let rates = self.mcs_rates()?;
        if self.bler_table == "default" {
            Ok(McsTable::with_default_curves(&rates)?)
        } else {
            Ok(load_bler_table(Path::new(&self.bler_table), &rates)?)
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            nodes: self.quadrature_nodes,
        }
    }

    /// Ages tabulated for the solver: the index needs `tau_max - 1` ages of
    /// lookahead beyond `delta_max`.
    pub fn solver_ages(&self) -> usize {
        self.delta_max + self.tau_max - 1
    }

    pub fn synthetic_curve(&self) -> Result<Option<RewardCurve>> {
        self.reward_csv
            .as_ref()
            .map(|p| Ok(RewardCurve::from_csv_file(p)?.zero_padded(self.solver_ages())))
            .transpose()
    }
}
