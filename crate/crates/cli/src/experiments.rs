//! The experiments behind each CLI command, returning plain data so the
//! binary and the tests share one code path.

use std::io::Write;

use anyhow::{bail, Context, Result};
use aocsi::{
    brute_force_optimal_period, build_reward_curve, periodic_policy, relative_value_iteration,
    solve_threshold, threshold_policy, ChannelRealization, LinkParams, McsTable, RewardCurve,
    RewardMode, SimulationResult, Simulator, ThresholdSolution,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// Largest gap allowed between the threshold solver and either oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

/// Span tolerance for value iteration; far below `ORACLE_TOLERANCE`.
pub const VALUE_ITERATION_TOL: f64 = 1e-10;

/// r(1..=delta_max) at the configured operating point.
pub fn goodput_curve(config: &ExperimentConfig) -> Result<RewardCurve> {
    Ok(build_reward_curve(
        &config.link_params()?,
        &config.mcs_table()?,
        config.delta_max,
        &config.quadrature(),
    )?)
}

/// The curve the solver works on: the synthetic one if configured, otherwise
/// the physical curve over `solver_ages()` ages.
pub fn solver_curve(config: &ExperimentConfig) -> Result<RewardCurve> {
    if let Some(curve) = config.synthetic_curve()? {
        return Ok(curve);
    }
    physical_curve(config, &config.link_params()?, &config.mcs_table()?)
}

fn physical_curve(config: &ExperimentConfig, params: &LinkParams, table: &McsTable) -> Result<RewardCurve> {
    Ok(build_reward_curve(
        params,
        table,
        config.solver_ages(),
        &config.quadrature(),
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub source: String,
    pub beta: f64,
    pub hitting_age: usize,
    pub period: usize,
    pub tau_max: usize,
    pub bisection_iterations: usize,
    pub brute_force_period: usize,
    pub brute_force_average: f64,
    pub brute_force_deviation: f64,
    pub value_iteration_gain: f64,
    pub value_iteration_deviation: f64,
    pub value_iteration_iterations: usize,
    pub tolerance: f64,
    pub agree: bool,
}

/// Solves for the threshold and checks it against exhaustive period search
/// (periods up to `delta_max`) and value iteration truncated at `delta_max`.
pub fn solve_and_check(
    curve: &RewardCurve,
    delta_max: usize,
    tau_max: usize,
    tol: f64,
    source: &str,
) -> Result<SolveReport> {
    let solution = solve_threshold(curve, tol, tau_max)?;
    let (bf_period, bf_avg) = brute_force_optimal_period(curve, delta_max.min(curve.len() + 1))?;
    let mdp = relative_value_iteration(curve, delta_max.min(curve.len()), VALUE_ITERATION_TOL)?;
    let bf_dev = (bf_avg - solution.beta).abs();
    let vi_dev = (mdp.gain - solution.beta).abs();
    Ok(SolveReport {
        source: source.to_string(),
        beta: solution.beta,
        hitting_age: solution.hitting_age,
        period: solution.period,
        tau_max: solution.tau_max,
        bisection_iterations: solution.iterations,
        brute_force_period: bf_period,
        brute_force_average: bf_avg,
        brute_force_deviation: bf_dev,
        value_iteration_gain: mdp.gain,
        value_iteration_deviation: vi_dev,
        value_iteration_iterations: mdp.iterations,
        tolerance: ORACLE_TOLERANCE,
        agree: bf_dev <= ORACLE_TOLERANCE && vi_dev <= ORACLE_TOLERANCE,
    })
}

pub fn solve(config: &ExperimentConfig) -> Result<SolveReport> {
    let curve = solver_curve(config)?;
    let source = match &config.reward_csv {
        Some(p) => p.display().to_string(),
        None => "physical".to_string(),
    };
    solve_and_check(&curve, config.delta_max, config.tau_max, config.solver_tol, &source)
}

/// One policy at one sweep point, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// SNR in dB or speed in mph, depending on the sweep.
    pub point: f64,
    pub policy: String,
    pub avg_goodput: f64,
    pub pilot_fraction: f64,
    pub period: usize,
    /// The threshold policy's predicted average goodput at this point.
    pub beta: f64,
    /// Seed-averaged r(age) over data slots.
    pub model_goodput: f64,
    /// Batch-means standard error of `avg_goodput`, combined over seeds.
    pub std_error: f64,
}

struct SweepPoint {
    value: f64,
    params: LinkParams,
    curve: RewardCurve,
    solution: ThresholdSolution,
}

fn prepare_point(config: &ExperimentConfig, value: f64, params: LinkParams, table: &McsTable) -> Result<SweepPoint> {
    let curve = physical_curve(config, &params, table)?;
    let solution = solve_threshold(&curve, config.solver_tol, config.tau_max)?;
    Ok(SweepPoint {
        value,
        params,
        curve,
        solution,
    })
}

fn run_point(
    config: &ExperimentConfig,
    point: &SweepPoint,
    realization: &ChannelRealization,
    table: &McsTable,
) -> Result<[SimulationResult; 2]> {
    let sim = Simulator::new(realization, &point.params, table, config.mode)?;
    let threshold = threshold_policy(&point.solution, &point.curve)?;
    let periodic = periodic_policy(config.baseline_period)?;
    Ok([
        sim.run(&threshold, config.horizon, Some(&point.curve))?,
        sim.run(&periodic, config.horizon, Some(&point.curve))?,
    ])
}

fn aggregate(points: &[SweepPoint], runs: Vec<Vec<[SimulationResult; 2]>>, baseline_period: usize) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (i, point) in points.iter().enumerate() {
        for which in 0..2 {
            let results: Vec<&SimulationResult> = runs.iter().map(|per_seed| &per_seed[i][which]).collect();
            let n = results.len() as f64;
            let mean = |f: &dyn Fn(&SimulationResult) -> f64| results.iter().map(|r| f(r)).sum::<f64>() / n;
            rows.push(SweepRow {
                point: point.value,
                policy: results[0].policy.clone(),
                avg_goodput: mean(&|r| r.avg_goodput),
                pilot_fraction: mean(&|r| r.pilot_fraction),
                period: if which == 0 { point.solution.period } else { baseline_period },
                beta: point.solution.beta,
                model_goodput: mean(&|r| r.model_goodput.unwrap_or(f64::NAN)),
                std_error: results.iter().map(|r| r.batch_std_error.powi(2)).sum::<f64>().sqrt() / n,
            });
        }
    }
    rows.sort_by(|a, b| a.point.total_cmp(&b.point).then_with(|| a.policy.cmp(&b.policy)));
    rows
}

/// Threshold vs the periodic baseline across `sweep.snr_db`. Every SNR point
/// runs on the same fading, pilot-noise and decoding draws for a given seed.
pub fn sweep_snr(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let base = config.link_params()?;
    let table = config.mcs_table()?;
    let points = config
        .sweep
        .snr_db
        .par_iter()
        .map(|&snr| {
            prepare_point(config, snr, base.with_snr_db(snr), &table)
                .with_context(|| format!("SNR grid point {snr} dB"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let realization = ChannelRealization::generate(&base, config.horizon, seed)?;
        runs.push(
            points
                .par_iter()
                .map(|p| run_point(config, p, &realization, &table))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(aggregate(&points, runs, config.baseline_period))
}

/// Threshold vs the periodic baseline across `sweep.speed_mph`.
pub fn sweep_mobility(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let table = config.mcs_table()?;
    let points = config
        .sweep
        .speed_mph
        .par_iter()
        .map(|&speed| {
            let params = config.link_params_at_speed(speed)?;
            prepare_point(config, speed, params, &table).with_context(|| format!("speed grid point {speed} mph"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        runs.push(
            points
                .par_iter()
                .map(|p| {
                    let realization = ChannelRealization::generate(&p.params, config.horizon, seed)?;
                    run_point(config, p, &realization, &table)
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(aggregate(&points, runs, config.baseline_period))
}

pub fn write_snr_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["snr_db", "policy", "avg_goodput", "pilot_fraction"])?;
    for r in rows {
        w.write_record([
            r.point.to_string(),
            r.policy.clone(),
            r.avg_goodput.to_string(),
            r.pilot_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_mobility_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["speed_mph", "policy", "avg_goodput", "period"])?;
    for r in rows {
        w.write_record([
            r.point.to_string(),
            r.policy.clone(),
            r.avg_goodput.to_string(),
            r.period.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub solution: ThresholdSolution,
    pub baseline_period: usize,
    pub results: Vec<SimulationResult>,
}

/// Threshold policy and the periodic baseline at the configured point, one
/// pair of runs per seed on shared draws.
pub fn simulate(config: &ExperimentConfig) -> Result<SimulateReport> {
    let params = config.link_params()?;
    let table = config.mcs_table()?;
    let point = prepare_point(config, 0.0, params, &table)?;
    let mut results = Vec::new();
    for &seed in &config.seeds {
        let realization = ChannelRealization::generate(&params, config.horizon, seed)?;
        results.extend(run_point(config, &point, &realization, &table)?);
    }
    Ok(SimulateReport {
        solution: point.solution,
        baseline_period: config.baseline_period,
        results,
    })
}

/// Applies the command-line overrides on top of a loaded config.
pub fn apply_overrides(config: &mut ExperimentConfig, seed: Option<u64>, mode: Option<RewardMode>) {
    if let Some(seed) = seed {
        config.seeds = vec![seed];
    }
    if let Some(mode) = mode {
        config.mode = mode;
    }
}

pub fn ensure_horizon(config: &ExperimentConfig) -> Result<()> {
    if config.horizon < aocsi::sim::MIN_HORIZON {
        bail!(
            "config: `horizon` must be at least {}, got {}",
            aocsi::sim::MIN_HORIZON,
            config.horizon
        );
    }
    Ok(())
}
