//! Pilot-or-data scheduling over a time-correlated Rayleigh fading link.
//!
//! The receiver estimates the channel from the most recent pilot, whose age
//! (slots since it was received) sets the quality of the estimate. The crate
//! covers the whole chain: Jakes-correlated fading synthesis, aged-pilot MMSE
//! estimation and SINR, BLER-constrained MCS selection with the expected
//! goodput r(age), the optimal threshold pilot policy with independent
//! optimality checks, and a closed-loop slot simulator.

pub mod bessel;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod link;
pub mod quadrature;
pub mod reward;
pub mod scheduler;
pub mod sim;

pub use channel::{
    autocorrelation, doppler_frequency, empirical_autocorrelation, generate_fading_trace,
    FadingTrace, LinkParams, MobilityParams,
};
pub use error::{Error, Result};
pub use estimation::{estimate_channel, mmse_gain, sinr, sinr_gain, ChannelEstimate, PilotObservation};
pub use link::{
    bler, build_reward_curve, expected_goodput, load_bler_table, max_goodput, BlerCurve, McsEntry,
    McsRates, McsTable,
};
pub use quadrature::QuadratureConfig;
pub use reward::RewardCurve;
pub use scheduler::{
    brute_force_optimal_period, decide, hitting_age, index_gamma, relative_value_iteration,
    solve_threshold, Action, IndexFunction, MdpSolution, ThresholdSolution,
};
pub use sim::{
    periodic_policy, run_policy, threshold_policy, ChannelRealization, PeriodicPolicy, Policy,
    RewardMode, SchedulerState, SimulationResult, Simulator, ThresholdPolicy,
};
