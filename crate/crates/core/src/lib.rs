//! Independent agents search the same 0/1 knapsack instance with genetic
//! algorithms while every solution they exercise draws down shared resource
//! reserves.
//!
//! Knapsack evaluation, the exact solvers and the metrics are generic over
//! [`Scalar`] (`f32` or `f64`); the simulation itself runs in `f64`, and the
//! aliases below name the types it uses.

pub mod error;
pub mod ga;
pub mod io;
pub mod knapsack;
pub mod metrics;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use ga::{crossover, mutate, select_feasible, GaConfig, Selection};
pub use knapsack::{evaluate, is_feasible, reference_instance, solve_bruteforce, solve_dp};
pub use metrics::{
    consumer_utility, exponential_utility, group_divide, linear_utility, max_resource_series, producer_utility,
    solution_entropy, GroupDivide, MetricsReport, UtilitySettings,
};
pub use scalar::Scalar;
pub use sim::{
    run_scenario, run_scenario_with, satisfaction_sweep, scenario_presets, Execution, GenerationRecord, Preset,
    ResourceLedger, RunOutput, ScenarioConfig, SweepTable,
};

pub type ProblemInstance = knapsack::ProblemInstance<f64>;
pub type Solution = knapsack::Solution<f64>;
pub type OptimumCertificate = knapsack::OptimumCertificate<f64>;
pub type AgentState = ga::AgentState<f64>;
pub type UtilityParams = metrics::UtilityParams<f64>;
