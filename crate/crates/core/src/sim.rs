//! Closed-loop slot simulation of pilot policies over a fading realization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_normal, generate_fading_trace, FadingTrace, LinkParams};
use crate::error::{invalid, Error, Result};
use crate::estimation::sinr_gain;
use crate::link::{max_goodput, McsTable};
use crate::reward::RewardCurve;
use crate::scheduler::{self, Action, IndexFunction, ThresholdSolution};

pub const MIN_HORIZON: usize = 1_000;
const CACHED_AGES: usize = 4096;
const BATCHES: usize = 100;

const NOISE_STREAM: u64 = 1;
const DECODING_STREAM: u64 = 2;

/// How a data slot is scored once the MCS is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// R (1 - BLER) at the slot's SINR.
    Expected,
    /// R on a successful decode drawn with probability 1 - BLER, else 0.
    Realized,
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardMode::Expected => "expected",
            RewardMode::Realized => "realized",
        })
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expected" => Ok(RewardMode::Expected),
            "realized" => Ok(RewardMode::Realized),
            other => Err(invalid("mode", format!("expected `expected` or `realized`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    /// Age of the stored pilot at this slot.
    pub age: u32,
    pub last_pilot: Option<Complex64>,
    pub slot: u64,
}

impl SchedulerState {
    pub fn initial() -> Self {
        Self {
            age: 1,
            last_pilot: None,
            slot: 0,
        }
    }
}

pub trait Policy: Send + Sync {
    fn decide(&self, state: &SchedulerState) -> Action;
    fn label(&self) -> String;
}

/// Open-loop baseline: pilot at every slot t with t mod period = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicPolicy {
    period: u64,
}

pub fn periodic_policy(period: usize) -> Result<PeriodicPolicy> {
    if period == 0 {
        return Err(invalid("period", "must be at least 1"));
    }
    Ok(PeriodicPolicy {
        period: period as u64,
    })
}

impl PeriodicPolicy {
    pub fn period(&self) -> usize {
        self.period as usize
    }
}

impl Policy for PeriodicPolicy {
    fn decide(&self, state: &SchedulerState) -> Action {
        if state.slot % self.period == 0 {
            Action::Pilot
        } else {
            Action::Data
        }
    }

    fn label(&self) -> String {
        format!("periodic-{}", self.period)
    }
}

/// Closed-loop rule: pilot once the index of the current age drops to beta.
#[derive(Debug, Clone)]
pub struct ThresholdPolicy {
    solution: ThresholdSolution,
    index: IndexFunction,
}

pub fn threshold_policy(solution: &ThresholdSolution, curve: &RewardCurve) -> Result<ThresholdPolicy> {
    Ok(ThresholdPolicy {
        solution: *solution,
        index: IndexFunction::new(curve, solution.tau_max)?,
    })
}

impl ThresholdPolicy {
    pub fn solution(&self) -> &ThresholdSolution {
        &self.solution
    }
}

impl Policy for ThresholdPolicy {
    fn decide(&self, state: &SchedulerState) -> Action {
        scheduler::decide(state.age as usize, &self.solution, &self.index)
    }

    fn label(&self) -> String {
        "threshold".into()
    }
}

/// Random inputs of one run, shared by every policy evaluated on it: the fading
/// trace, unit-variance pilot noise per slot, and one uniform per slot for
/// decoding outcomes. Each comes from its own seeded stream.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub fading: FadingTrace,
    pub pilot_noise: Vec<Complex64>,
    pub decoding_draws: Vec<f64>,
}

impl ChannelRealization {
    pub fn generate(params: &LinkParams, length: usize, seed: u64) -> Result<Self> {
        let fading = generate_fading_trace(params, length, seed)?;
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(NOISE_STREAM);
        let pilot_noise = (0..length).map(|_| complex_normal(&mut noise_rng)).collect();
        let mut decoding_rng = ChaCha8Rng::seed_from_u64(seed);
        decoding_rng.set_stream(DECODING_STREAM);
        let decoding_draws = (0..length).map(|_| decoding_rng.random::<f64>()).collect();
        Ok(Self {
            fading,
            pilot_noise,
            decoding_draws,
        })
    }

    pub fn len(&self) -> usize {
        self.fading.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fading.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.fading.seed
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub action: Action,
    /// Reward under the simulator's mode.
    pub reward: f64,
    /// R (1 - BLER) of the chosen MCS; 0 for pilots and infeasible slots.
    pub expected_reward: f64,
    /// Variance of the realized reward given the SINR, R^2 BLER (1 - BLER).
    pub decoding_variance: f64,
}

pub struct Simulator<'a> {
    realization: &'a ChannelRealization,
    params: LinkParams,
    table: &'a McsTable,
    mode: RewardMode,
    gains: Vec<f64>,
}

impl<'a> Simulator<'a> {
    /// `params` may differ from the realization's in powers and noise, but not
    /// in the fading statistics the trace was drawn with.
    pub fn new(
        realization: &'a ChannelRealization,
        params: &LinkParams,
        table: &'a McsTable,
        mode: RewardMode,
    ) -> Result<Self> {
        params.validate()?;
        let trace = &realization.fading.params;
        if trace.channel_variance != params.channel_variance
            || trace.normalized_doppler() != params.normalized_doppler()
        {
            return Err(invalid(
                "params",
                "channel variance and normalized Doppler must match the fading realization",
            ));
        }
        let gains = (1..=CACHED_AGES as u32)
            .map(|age| sinr_gain(age, params))
            .collect::<Result<_>>()?;
        Ok(Self {
            realization,
            params: *params,
            table,
            mode,
            gains,
        })
    }

    fn gain(&self, age: u32) -> Result<f64> {
        match self.gains.get(age as usize - 1) {
            Some(g) => Ok(*g),
            None => sinr_gain(age, &self.params),
        }
    }

    pub fn step(&self, state: &SchedulerState, action: Action) -> Result<(SchedulerState, SlotOutcome)> {
        let t = state.slot as usize;
        if t >= self.realization.len() {
            return Err(invalid(
                "slot",
                format!("slot {t} beyond realization of length {}", self.realization.len()),
            ));
        }
        match action {
            Action::Pilot => {
                let y = self.realization.fading.samples[t] * self.params.pilot_power.sqrt()
                    + self.realization.pilot_noise[t] * self.params.noise_variance.sqrt();
                let next = SchedulerState {
                    age: 1,
                    last_pilot: Some(y),
                    slot: state.slot + 1,
                };
                let outcome = SlotOutcome {
                    action,
                    reward: 0.0,
                    expected_reward: 0.0,
                    decoding_variance: 0.0,
                };
                Ok((next, outcome))
            }
            Action::Data => {
                let y = state.last_pilot.ok_or(Error::DataBeforePilot(state.slot))?;
                let sinr = self.gain(state.age)? * y.norm_sqr();
                let (goodput, entry) = max_goodput(sinr, self.table);
                let (reward, variance) = match entry {
                    None => (0.0, 0.0),
                    Some(e) => {
                        let b = e.curve.eval(sinr);
                        let variance = e.rate * e.rate * b * (1.0 - b);
                        let reward = match self.mode {
                            RewardMode::Expected => goodput,
                            RewardMode::Realized => {
                                if self.realization.decoding_draws[t] >= b {
                                    e.rate
                                } else {
                                    0.0
                                }
                            }
                        };
                        (reward, variance)
                    }
                };
                let next = SchedulerState {
                    age: state.age + 1,
                    last_pilot: Some(y),
                    slot: state.slot + 1,
                };
                Ok((
                    next,
                    SlotOutcome {
                        action,
                        reward,
                        expected_reward: goodput,
                        decoding_variance: variance,
                    },
                ))
            }
        }
    }

    /// Runs `policy` for `horizon` slots from a forced pilot at slot 0. With a
    /// reward curve, also averages r(age) over the data slots visited.
    pub fn run(
        &self,
        policy: &dyn Policy,
        horizon: usize,
        curve: Option<&RewardCurve>,
    ) -> Result<SimulationResult> {
        if horizon < MIN_HORIZON {
            return Err(invalid("horizon", format!("must be at least {MIN_HORIZON}, got {horizon}")));
        }
        if horizon > self.realization.len() {
            return Err(invalid(
                "horizon",
                format!("{horizon} slots exceed the realization length {}", self.realization.len()),
            ));
        }
        let batch_len = horizon / BATCHES;
        let mut state = SchedulerState::initial();
        let mut histogram: BTreeMap<u32, u64> = BTreeMap::new();
        let (mut total, mut expected_total, mut variance_total) = (0.0, 0.0, 0.0);
        let mut model_total = Some(0.0);
        let mut pilots = 0usize;
        let mut batch_means = Vec::with_capacity(BATCHES);
        let mut batch_sum = 0.0;

        for t in 0..horizon {
            let action = if state.last_pilot.is_none() {
                Action::Pilot
            } else {
                policy.decide(&state)
            };
            *histogram.entry(state.age).or_default() += 1;
            if action == Action::Data {
                if let (Some(acc), Some(c)) = (model_total.as_mut(), curve) {
                    match c.values().get(state.age as usize - 1) {
                        Some(r) => *acc += r,
                        None => model_total = None,
                    }
                }
            } else {
                pilots += 1;
            }
            let (next, outcome) = self.step(&state, action)?;
            total += outcome.reward;
            expected_total += outcome.expected_reward;
            variance_total += outcome.decoding_variance;
            batch_sum += outcome.reward;
            if (t + 1) % batch_len == 0 && batch_means.len() < BATCHES {
                batch_means.push(batch_sum / batch_len as f64);
                batch_sum = 0.0;
            }
            state = next;
        }

        let n = horizon as f64;
        let batch_mean = batch_means.iter().sum::<f64>() / batch_means.len() as f64;
        let batch_var = batch_means
            .iter()
            .map(|m| (m - batch_mean).powi(2))
            .sum::<f64>()
            / (batch_means.len() - 1) as f64;
        Ok(SimulationResult {
            policy: policy.label(),
            mode: self.mode,
            seed: self.realization.seed(),
            horizon,
            avg_goodput: total / n,
            pilot_count: pilots,
            pilot_fraction: pilots as f64 / n,
            age_histogram: histogram,
            conditional_goodput: expected_total / n,
            decoding_std_error: match self.mode {
                RewardMode::Expected => 0.0,
                RewardMode::Realized => variance_total.sqrt() / n,
            },
            batch_std_error: (batch_var / batch_means.len() as f64).sqrt(),
            model_goodput: curve.and(model_total.map(|m| m / n)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub policy: String,
    pub mode: RewardMode,
    pub seed: u64,
    pub horizon: usize,
    /// Time-averaged reward under `mode`.
    pub avg_goodput: f64,
    pub pilot_count: usize,
    pub pilot_fraction: f64,
    /// Age at every slot, pilots included.
    pub age_histogram: BTreeMap<u32, u64>,
    /// Time-averaged R (1 - BLER); equals `avg_goodput` in expected mode.
    pub conditional_goodput: f64,
    /// Standard error of the decoding draws around `conditional_goodput`
    /// (realized mode only).
    pub decoding_std_error: f64,
    /// Batch-means standard error of `avg_goodput`.
    pub batch_std_error: f64,
    /// Time average of r(age) over data slots, the long-run objective the
    /// threshold maximizes, when a reward curve was supplied.
    pub model_goodput: Option<f64>,
}

/// Draws a fresh realization from `seed` and runs `policy` on it.
pub fn run_policy(
    policy: &dyn Policy,
    params: &LinkParams,
    table: &McsTable,
    horizon: usize,
    seed: u64,
    mode: RewardMode,
) -> Result<SimulationResult> {
    if horizon < MIN_HORIZON {
        return Err(invalid("horizon", format!("must be at least {MIN_HORIZON}, got {horizon}")));
    }
    let realization = ChannelRealization::generate(params, horizon, seed)?;
    Simulator::new(&realization, params, table, mode)?.run(policy, horizon, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::build_reward_curve;
    use crate::quadrature::QuadratureConfig;
    use crate::scheduler::solve_threshold;

    fn setup(len: usize) -> (ChannelRealization, LinkParams, McsTable) {
        let params = LinkParams::default();
        (
            ChannelRealization::generate(&params, len, 7).unwrap(),
            params,
            McsTable::lte_default(),
        )
    }

    #[test]
    fn pilot_slot_earns_nothing_and_resets_age() {
        let (real, params, table) = setup(100);
        let sim = Simulator::new(&real, &params, &table, RewardMode::Expected).unwrap();
        let state = SchedulerState {
            age: 9,
            last_pilot: Some(Complex64::new(1.0, 0.0)),
            slot: 3,
        };
        let (next, out) = sim.step(&state, Action::Pilot).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(next.age, 1);
        assert_eq!(next.slot, 4);
        let expected_y = real.fading.samples[3] + real.pilot_noise[3] * params.noise_variance.sqrt();
        assert_eq!(next.last_pilot, Some(expected_y));
    }

    #[test]
    fn data_slot_ages_the_pilot() {
        let (real, params, table) = setup(100);
        let sim = Simulator::new(&real, &params, &table, RewardMode::Expected).unwrap();
        let state = SchedulerState {
            age: 5,
            last_pilot: Some(Complex64::new(1.0, 0.5)),
            slot: 10,
        };
        let (next, _) = sim.step(&state, Action::Data).unwrap();
        assert_eq!(next.age, 6);
    }

    #[test]
    fn data_before_first_pilot_is_rejected() {
        let (real, params, table) = setup(100);
        let sim = Simulator::new(&real, &params, &table, RewardMode::Expected).unwrap();
        assert!(matches!(
            sim.step(&SchedulerState::initial(), Action::Data),
            Err(Error::DataBeforePilot(0))
        ));
    }

    #[test]
    fn realized_slot_reward_matches_expected_in_mean() {
        // One slot, many independent decoding draws.
        let params = LinkParams::default();
        let table = McsTable::lte_default();
        let y = Complex64::new(0.9, 0.2);
        let age = 2;
        let sinr = sinr_gain(age, &params).unwrap() * y.norm_sqr();
        let (goodput, entry) = max_goodput(sinr, &table);
        let entry = entry.unwrap();
        let b = entry.curve.eval(sinr);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| if rng.random::<f64>() >= b { entry.rate } else { 0.0 })
            .sum::<f64>()
            / n as f64;
        let se = entry.rate * (b * (1.0 - b) / n as f64).sqrt();
        assert!((mean - goodput).abs() <= 3.0 * se.max(1e-12), "{mean} vs {goodput}");
    }

    #[test]
    fn run_rejects_short_or_oversized_horizon() {
        let (real, params, table) = setup(5000);
        let sim = Simulator::new(&real, &params, &table, RewardMode::Expected).unwrap();
        let p = periodic_policy(2).unwrap();
        assert!(sim.run(&p, 999, None).is_err());
        assert!(sim.run(&p, 5001, None).is_err());
        assert!(sim.run(&p, 5000, None).is_ok());
    }

    #[test]
    fn simulator_rejects_mismatched_fading() {
        let (real, params, table) = setup(100);
        let other = params.with_doppler_hz(10.0);
        assert!(Simulator::new(&real, &other, &table, RewardMode::Expected).is_err());
        let louder = params.with_snr_db(5.0);
        assert!(Simulator::new(&real, &louder, &table, RewardMode::Expected).is_ok());
    }

    #[test]
    fn periodic_policies() {
        let (real, params, table) = setup(10_000);
        let sim = Simulator::new(&real, &params, &table, RewardMode::Expected).unwrap();
        let every = sim.run(&periodic_policy(1).unwrap(), 10_000, None).unwrap();
        assert_eq!(every.avg_goodput, 0.0);
        assert_eq!(every.pilot_fraction, 1.0);
        let two = sim.run(&periodic_policy(2).unwrap(), 10_000, None).unwrap();
        assert!((two.pilot_fraction - 0.5).abs() <= 1.0 / 10_000.0);
        assert!(periodic_policy(0).is_err());
    }

    #[test]
    fn periodic_actions_do_not_depend_on_seed() {
        let p = periodic_policy(3).unwrap();
        let a: Vec<_> = (0..30u64)
            .map(|slot| p.decide(&SchedulerState { age: 1, last_pilot: None, slot }))
            .collect();
        let b: Vec<_> = (0..30u64)
            .map(|slot| {
                p.decide(&SchedulerState {
                    age: 7,
                    last_pilot: Some(Complex64::new(3.0, 1.0)),
                    slot,
                })
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn histogram_and_counts_are_consistent() {
        let (real, params, table) = setup(20_000);
        let sim = Simulator::new(&real, &params, &table, RewardMode::Realized).unwrap();
        let r = sim.run(&periodic_policy(5).unwrap(), 20_000, None).unwrap();
        assert_eq!(r.age_histogram.values().sum::<u64>(), 20_000);
        assert!(!r.age_histogram.contains_key(&0));
        assert_eq!(*r.age_histogram.keys().next().unwrap(), 1);
        assert!((r.pilot_fraction * 20_000.0 - r.pilot_count as f64).abs() < 1e-9);
    }

    #[test]
    fn runs_are_deterministic() {
        let params = LinkParams::default();
        let table = McsTable::lte_default();
        let p = periodic_policy(3).unwrap();
        let a = run_policy(&p, &params, &table, 5000, 9, RewardMode::Realized).unwrap();
        let b = run_policy(&p, &params, &table, 5000, 9, RewardMode::Realized).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_policy_replays_its_period() {
        let params = LinkParams::default();
        let table = McsTable::lte_default();
        let curve = build_reward_curve(&params, &table, 200, &QuadratureConfig::default()).unwrap();
        let sol = solve_threshold(&curve, 1e-12, 100).unwrap();
        let threshold = threshold_policy(&sol, &curve).unwrap();
        let periodic = periodic_policy(sol.period).unwrap();
        let real = ChannelRealization::generate(&params, 10_000, 3).unwrap();
        let sim = Simulator::new(&real, &params, &table, RewardMode::Expected).unwrap();
        let mut state = SchedulerState::initial();
        for _ in 0..10_000 {
            let a = if state.last_pilot.is_none() {
                Action::Pilot
            } else {
                threshold.decide(&state)
            };
            assert_eq!(a, periodic.decide(&state), "slot {}", state.slot);
            state = sim.step(&state, a).unwrap().0;
        }
    }

    #[test]
    fn threshold_actions_depend_on_age_only() {
        let curve = RewardCurve::new(vec![1.0, 1.0, 1.0]).unwrap().zero_padded(60);
        let sol = solve_threshold(&curve, 1e-12, 20).unwrap();
        let policy = threshold_policy(&sol, &curve).unwrap();
        for age in 1..10 {
            let early = SchedulerState { age, last_pilot: Some(Complex64::new(1.0, 0.0)), slot: 5 };
            let late = SchedulerState { age, last_pilot: Some(Complex64::new(-2.0, 0.3)), slot: 987_654 };
            assert_eq!(policy.decide(&early), policy.decide(&late));
        }
    }

    #[test]
    fn all_zero_curve_means_always_pilot() {
        let curve = RewardCurve::new(vec![0.0; 30]).unwrap();
        let sol = solve_threshold(&curve, 1e-12, 10).unwrap();
        let policy = threshold_policy(&sol, &curve).unwrap();
        for age in 1..15 {
            let s = SchedulerState { age, last_pilot: Some(Complex64::new(1.0, 0.0)), slot: 1 };
            assert_eq!(policy.decide(&s), Action::Pilot);
        }
    }

    #[test]
    fn mode_parses() {
        assert_eq!("expected".parse::<RewardMode>().unwrap(), RewardMode::Expected);
        assert_eq!("realized".parse::<RewardMode>().unwrap(), RewardMode::Realized);
        assert!("both".parse::<RewardMode>().is_err());
    }
}
