//! Pilot scheduling: the forward-window index, the optimal threshold and its
//! period, and two independent optimality checks (exhaustive period search and
//! relative value iteration on the age MDP).
//!
//! Ages follow the closed-loop dynamics: the slot after a pilot has age 1, so a
//! cycle of period `p` carries data at ages 1..p-1 and a pilot at age p, with
//! average reward (r(1) + ... + r(p-1)) / p.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::reward::RewardCurve;

pub const DEFAULT_TAU_MAX: usize = 512;
pub const BISECTION_MAX_ITERATIONS: usize = 200;
pub const VALUE_ITERATION_MAX_ITERATIONS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Pilot,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    /// Threshold, equal to the optimal long-run average goodput.
    pub beta: f64,
    /// Smallest age whose index is at or below `beta`.
    pub hitting_age: usize,
    /// Slots per cycle; equals `hitting_age`.
    pub period: usize,
    /// Window length the index was computed with.
    pub tau_max: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSolution {
    pub gain: f64,
    /// h(1..=max_age), normalized so h(1) = 0.
    pub relative_values: Vec<f64>,
    /// Greedy action at ages 1..=max_age.
    pub policy: Vec<Action>,
    pub iterations: usize,
}

/// gamma(age) = max over tau in 1..=tau_max of the mean of r(age..age+tau-1).
pub fn index_gamma(age: usize, curve: &RewardCurve, tau_max: usize) -> Result<f64> {
    if age == 0 || tau_max == 0 {
        return Err(invalid("age", "age and tau_max must be at least 1"));
    }
    let end = age + tau_max - 1;
    if end > curve.len() {
        return Err(Error::WindowOutOfRange {
            end,
            len: curve.len(),
        });
    }
    Ok(window_max(&curve.values()[age - 1..end]).0)
}

fn window_max(values: &[f64]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.iter().enumerate() {
        sum += v;
        let avg = sum / (i + 1) as f64;
        if avg > best.0 {
            best = (avg, i + 1);
        }
    }
    best
}

/// gamma precomputed for every age whose full window fits in the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexFunction {
    gammas: Vec<f64>,
    tau_max: usize,
}

impl IndexFunction {
    pub fn new(curve: &RewardCurve, tau_max: usize) -> Result<Self> {
        if tau_max == 0 {
            return Err(invalid("tau_max", "must be at least 1"));
        }
        if curve.len() < tau_max {
            return Err(Error::WindowOutOfRange {
                end: tau_max,
                len: curve.len(),
            });
        }
        let values = curve.values();
        let ages = curve.len() - tau_max + 1;
        let mut boundary_hits = 0usize;
        let gammas = (0..ages)
            .map(|start| {
                let (gamma, tau) = window_max(&values[start..start + tau_max]);
                if tau == tau_max && tau_max > 1 && gamma > 0.0 {
                    boundary_hits += 1;
                }
                gamma
            })
            .collect();
        if boundary_hits > 0 {
            warn!("index window maximum reached tau_max = {tau_max} at {boundary_hits} ages; consider a longer window");
        }
        Ok(Self { gammas, tau_max })
    }

    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    /// Largest age with a computed index.
    pub fn max_age(&self) -> usize {
        self.gammas.len()
    }

    pub fn gamma(&self, age: usize) -> Option<f64> {
        age.checked_sub(1).and_then(|i| self.gammas.get(i)).copied()
    }

    pub fn hitting_age(&self, beta: f64) -> Result<usize> {
        self.gammas
            .iter()
            .position(|g| *g <= beta)
            .map(|i| i + 1)
            .ok_or(Error::HorizonExhausted {
                beta,
                searched: self.gammas.len(),
            })
    }
}

/// min { age >= 1 : gamma(age) <= beta }.
pub fn hitting_age(beta: f64, curve: &RewardCurve, tau_max: usize) -> Result<usize> {
    IndexFunction::new(curve, tau_max)?.hitting_age(beta)
}

/// Finds the threshold by bisection on
/// g(beta) = r(1) + ... + r(H(beta) - 1) - beta * H(beta), H the hitting age,
/// over [0, max r], then snaps beta to the exact cycle average of its period.
///
/// g is the upper envelope of the lines S(H-1) - beta*H, hence continuous and
/// strictly decreasing with a single root. Where no hitting age exists inside
/// the tabulated range, beta is below the root.
pub fn solve_threshold(curve: &RewardCurve, tol: f64, tau_max: usize) -> Result<ThresholdSolution> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    let index = IndexFunction::new(curve, tau_max)?;
    let sums = curve.prefix_sums();
    let top = curve.max();
    if top == 0.0 {
        return Ok(ThresholdSolution {
            beta: 0.0,
            hitting_age: 1,
            period: 1,
            tau_max,
            iterations: 0,
        });
    }

    let residual = |beta: f64| -> Option<(f64, usize)> {
        let h = index.hitting_age(beta).ok()?;
        Some((sums[h - 1] - beta * h as f64, h))
    };

    let (mut lo, mut hi) = (0.0, top);
    let mut found = None;
    let mut iterations = 0;
    while iterations < BISECTION_MAX_ITERATIONS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match residual(mid) {
            None => lo = mid,
            Some((g, h)) => {
                if g.abs() <= tol || mid <= lo || mid >= hi {
                    found = Some(h);
                    break;
                }
                if g > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    let mut h = found.ok_or(Error::NoConvergence {
        what: "threshold bisection",
        iterations,
    })?;

    // Fixed-point polish: beta <- S(H-1)/H increases monotonically to the
    // root and stops once the hitting age is stable.
    let mut beta = sums[h - 1] / h as f64;
    for _ in 0..index.max_age() {
        let next = index.hitting_age(beta)?;
        if next == h {
            break;
        }
        h = next;
        beta = sums[h - 1] / h as f64;
    }

    Ok(ThresholdSolution {
        beta,
        hitting_age: h,
        period: h,
        tau_max,
        iterations,
    })
}

/// Best fixed period p in 1..=p_max by direct enumeration; ties go to the
/// smaller period.
pub fn brute_force_optimal_period(curve: &RewardCurve, p_max: usize) -> Result<(usize, f64)> {
    if p_max == 0 || p_max > curve.len() + 1 {
        return Err(invalid(
            "p_max",
            format!("must lie in 1..={}, got {p_max}", curve.len() + 1),
        ));
    }
    let sums = curve.prefix_sums();
    let mut best = (1, 0.0);
    for p in 2..=p_max {
        let avg = sums[p - 1] / p as f64;
        if avg > best.1 {
            best = (p, avg);
        }
    }
    Ok(best)
}

/// Relative value iteration on the age MDP truncated at `max_age`.
///
/// Pilot earns nothing and moves to age 1; data earns r(age) and moves to
/// min(age + 1, max_age). The deterministic cycles make the plain operator
/// periodic, so iteration runs on the aperiodic mixture h <- (h + Th) / 2,
/// which has the same gain and optimal policy. Converged when the span of
/// Th - h is below `tol`; the gain is then bracketed within `tol`.
pub fn relative_value_iteration(curve: &RewardCurve, max_age: usize, tol: f64) -> Result<MdpSolution> {
    if max_age < 2 || max_age > curve.len() {
        return Err(invalid(
            "max_age",
            format!("must lie in 2..={}, got {max_age}", curve.len()),
        ));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    const MIX: f64 = 0.5;
    let r = &curve.values()[..max_age];
    let mut h = vec![0.0_f64; max_age];
    let mut diff = vec![0.0_f64; max_age];

    for iteration in 1..=VALUE_ITERATION_MAX_ITERATIONS {
        let restart = h[0];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..max_age {
            let next = (s + 1).min(max_age - 1);
            let best = restart.max(r[s] + h[next]);
            diff[s] = best - h[s];
            lo = lo.min(diff[s]);
            hi = hi.max(diff[s]);
        }
        if hi - lo < tol {
            let gain = 0.5 * (lo + hi);
            let policy = (0..max_age)
                .map(|s| {
                    let next = (s + 1).min(max_age - 1);
                    if h[0] >= r[s] + h[next] {
                        Action::Pilot
                    } else {
                        Action::Data
                    }
                })
                .collect();
            return Ok(MdpSolution {
                gain,
                relative_values: h,
                policy,
                iterations: iteration,
            });
        }
        for s in 0..max_age {
            h[s] += MIX * diff[s];
        }
        let reference = h[0];
        h.iter_mut().for_each(|v| *v -= reference);
    }
    Err(Error::NoConvergence {
        what: "relative value iteration",
        iterations: VALUE_ITERATION_MAX_ITERATIONS,
    })
}

/// Pilot iff gamma(age) <= beta; ages without a computed index fall back to a pilot.
pub fn decide(age: usize, solution: &ThresholdSolution, index: &IndexFunction) -> Action {
    match index.gamma(age) {
        Some(g) if g > solution.beta => Action::Data,
        Some(_) => Action::Pilot,
        None => {
            warn!("age {age} outside the indexed range 1..={}; sending pilot", index.max_age());
            Action::Pilot
        }
    }
}
