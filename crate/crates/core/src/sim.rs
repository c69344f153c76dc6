//! Scenario orchestration: N independent agents, one shared ledger.
//!
//! Every generation all agents are stepped (possibly in parallel), then each
//! agent's incumbent is charged to the ledger in agent-id order. An agent with
//! no incumbent consumes nothing.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ga::{scenario_stream, AgentState, GaConfig};
use crate::knapsack::{reference_instance, solve_dp, OptimumCertificate, ProblemInstance};
use crate::metrics::{solution_entropy, UtilitySettings};

/// Generation at which a fully converged baseline exhausts the default reserves.
pub const DEFAULT_RESERVE_GENERATIONS: f64 = 1600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub agent_count: usize,
    pub generations: usize,
    pub instance: ProblemInstance<f64>,
    pub ga: GaConfig,
    pub master_seed: u64,
    pub satisfaction_fractions: Vec<f64>,
    pub accelerations: Vec<u32>,
    pub reserves: Vec<f64>,
    #[serde(default)]
    pub halt_on_tragedy: bool,
    #[serde(default)]
    pub utility: UtilitySettings,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agent_count == 0 {
            return Err(invalid("agent_count: must be positive"));
        }
        self.ga.validate()?;
        if self.satisfaction_fractions.len() != self.agent_count {
            return Err(invalid(format!(
                "satisfaction_fractions: expected {} entries, found {}",
                self.agent_count,
                self.satisfaction_fractions.len()
            )));
        }
        if self.accelerations.len() != self.agent_count {
            return Err(invalid(format!(
                "accelerations: expected {} entries, found {}",
                self.agent_count,
                self.accelerations.len()
            )));
        }
        if let Some(j) = self.satisfaction_fractions.iter().position(|&s| !(s > 0.0 && s <= 1.0)) {
            return Err(invalid(format!("satisfaction_fractions[{j}]: must be within (0, 1]")));
        }
        if let Some(j) = self.accelerations.iter().position(|&a| a == 0) {
            return Err(invalid(format!("accelerations[{j}]: must be positive")));
        }
        if self.reserves.len() != self.instance.item_count() {
            return Err(invalid(format!(
                "reserves: expected {} entries, found {}",
                self.instance.item_count(),
                self.reserves.len()
            )));
        }
        if let Some(i) = self.reserves.iter().position(|&t| !(t.is_finite() && t >= 0.0)) {
            return Err(invalid(format!("reserves[{i}]: must be a non-negative finite number")));
        }
        if self.instance.integer_weights().is_none() {
            return Err(Error::Unsupported("scenario instance weights must be integers".into()));
        }
        self.utility.validate()
    }

    /// One reserve level for every resource, sized so that `agent_count`
    /// agents all exercising the optimum exhaust its heaviest resource after
    /// [`DEFAULT_RESERVE_GENERATIONS`].
    pub fn default_reserves(instance: &ProblemInstance<f64>, agent_count: usize) -> Vec<f64> {
        let heaviest = solve_dp(instance)
            .ok()
            .and_then(|opt| {
                opt.solution
                    .bits
                    .iter()
                    .zip(instance.weights())
                    .filter(|(&x, _)| x)
                    .map(|(_, &w)| w)
                    .reduce(f64::max)
            })
            .unwrap_or_else(|| instance.weights().iter().copied().fold(0.0, f64::max));
        vec![heaviest * agent_count as f64 * DEFAULT_RESERVE_GENERATIONS; instance.item_count()]
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn with_uniform_satisfaction(mut self, level: f64) -> Self {
        self.satisfaction_fractions = vec![level; self.agent_count];
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Optimal,
    Satisficing,
    Accelerated,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Optimal, Preset::Satisficing, Preset::Accelerated];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Optimal => "optimal",
            Preset::Satisficing => "satisficing",
            Preset::Accelerated => "accelerated",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid(format!("unknown preset {s:?} (expected optimal, satisficing or accelerated)")))
    }
}

pub const PRESET_AGENTS: usize = 25;
pub const PRESET_GENERATIONS: usize = 2000;
pub const ACCELERATED_SHARE: f64 = 0.2;
pub const ACCELERATION_FACTOR: u32 = 5;
pub const SATISFICING_RANGE: (f64, f64) = (0.5, 0.9);

pub fn scenario_presets(preset: Preset, master_seed: u64) -> ScenarioConfig {
    let instance = reference_instance::<f64>();
    let n = PRESET_AGENTS;
    let reserves = ScenarioConfig::default_reserves(&instance, n);
    let mut rng = scenario_stream(master_seed);
    let mut satisfaction_fractions = vec![1.0; n];
    let mut accelerations = vec![1; n];
    match preset {
        Preset::Optimal => {}
        Preset::Satisficing => {
            let (lo, hi) = SATISFICING_RANGE;
            for s in satisfaction_fractions.iter_mut() {
                *s = rng.gen_range(lo..=hi);
            }
        }
        Preset::Accelerated => {
            let fast = (ACCELERATED_SHARE * n as f64).round() as usize;
            for j in sample(&mut rng, n, fast) {
                accelerations[j] = ACCELERATION_FACTOR;
            }
        }
    }
    ScenarioConfig {
        agent_count: n,
        generations: PRESET_GENERATIONS,
        instance,
        ga: GaConfig::default(),
        master_seed,
        satisfaction_fractions,
        accelerations,
        reserves,
        halt_on_tragedy: false,
        utility: UtilitySettings::default(),
    }
}

/// Cumulative per-resource consumption against the finite reserves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub cumulative: Vec<u64>,
    pub reserves: Vec<f64>,
    pub crossing_generation: Vec<Option<usize>>,
}

impl ResourceLedger {
    pub fn new(reserves: Vec<f64>) -> Self {
        let m = reserves.len();
        Self { cumulative: vec![0; m], reserves, crossing_generation: vec![None; m] }
    }

    /// Adds one generation's charge and records first crossings.
    pub fn charge(&mut self, consumed: &[u64], generation: usize) {
        for (i, &c) in consumed.iter().enumerate() {
            self.cumulative[i] += c;
            if self.crossing_generation[i].is_none() && self.cumulative[i] as f64 > self.reserves[i] {
                self.crossing_generation[i] = Some(generation);
            }
        }
    }

    pub fn any_crossed(&self) -> bool {
        self.crossing_generation.iter().any(Option::is_some)
    }

    /// Index of the largest cumulative consumption, smallest index on ties.
    pub fn max_resource(&self) -> usize {
        argmax_first(&self.cumulative)
    }
}

pub(crate) fn argmax_first(xs: &[u64]) -> usize {
    xs.iter().enumerate().fold(0, |best, (i, &x)| if x > xs[best] { i } else { best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub per_resource_consumed: Vec<u64>,
    pub per_resource_cumulative: Vec<u64>,
    pub entropy: f64,
    pub agents_at_optimum: usize,
    pub per_agent_value: Vec<f64>,
    pub per_agent_at_optimum: Vec<bool>,
    /// Each agent's exercised (incumbent) vector, `None` before it has one.
    pub per_agent_bits: Vec<Option<Vec<bool>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<GenerationRecord>,
    pub ledger: ResourceLedger,
    pub optimum: OptimumCertificate<f64>,
}

impl RunOutput {
    /// Crossing generation of the resource with the largest final consumption.
    pub fn max_resource_crossing(&self) -> Option<usize> {
        self.ledger.crossing_generation[self.ledger.max_resource()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    run_scenario_with(config, Execution::Parallel)
}

pub fn run_scenario_with(config: &ScenarioConfig, execution: Execution) -> Result<RunOutput> {
    config.validate()?;
    let instance = &config.instance;
    let weights = instance.integer_weights().expect("validated");
    let optimum = solve_dp(instance)?;
    let mut agents: Vec<AgentState<f64>> = (0..config.agent_count)
        .map(|j| {
            AgentState::new(j + 1, config.master_seed, config.satisfaction_fractions[j], config.accelerations[j])
        })
        .collect();

    let mut ledger = ResourceLedger::new(config.reserves.clone());
    let mut records = Vec::with_capacity(config.generations);
    if config.generations == 0 {
        return Ok(RunOutput { records, ledger, optimum });
    }

    for_each_agent(&mut agents, execution, |a| a.init_population(instance, &config.ga))?;

    for generation in 1..=config.generations {
        for_each_agent(&mut agents, execution, |a| a.step_generation(instance, &config.ga, &optimum, generation))?;

        let mut consumed = vec![0u64; weights.len()];
        for agent in &agents {
            if let Some(inc) = &agent.incumbent {
                for (c, (&w, &x)) in consumed.iter_mut().zip(weights.iter().zip(&inc.bits)) {
                    if x {
                        *c += w;
                    }
                }
            }
        }
        ledger.charge(&consumed, generation);

        let per_agent_bits: Vec<Option<Vec<bool>>> =
            agents.iter().map(|a| a.incumbent.as_ref().map(|s| s.bits.clone())).collect();
        let per_agent_value: Vec<f64> = agents.iter().map(|a| a.incumbent_value().unwrap_or(0.0)).collect();
        let per_agent_at_optimum: Vec<bool> = agents
            .iter()
            .map(|a| a.incumbent_value().is_some_and(|v| optimum.is_optimal_value(v)))
            .collect();
        records.push(GenerationRecord {
            generation,
            per_resource_consumed: consumed,
            per_resource_cumulative: ledger.cumulative.clone(),
            entropy: solution_entropy::<f64, _>(&per_agent_bits)?,
            agents_at_optimum: per_agent_at_optimum.iter().filter(|&&b| b).count(),
            per_agent_value,
            per_agent_at_optimum,
            per_agent_bits,
        });

        if config.halt_on_tragedy && ledger.any_crossed() {
            break;
        }
    }
    Ok(RunOutput { records, ledger, optimum })
}

fn for_each_agent<F>(agents: &mut [AgentState<f64>], execution: Execution, f: F) -> Result<()>
where
    F: Fn(&mut AgentState<f64>) -> Result<()> + Sync + Send,
{
    match execution {
        Execution::Serial => agents.iter_mut().try_for_each(f),
        Execution::Parallel => {
            // Collect every outcome so the reported failure is the lowest agent id.
            let outcomes: Vec<Result<()>> = agents.par_iter_mut().map(f).collect();
            outcomes.into_iter().collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub level: f64,
    pub seed: u64,
    pub max_resource: usize,
    pub max_resource_consumption: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLevel {
    pub level: f64,
    pub runs: usize,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub runs: Vec<SweepRun>,
    pub levels: Vec<SweepLevel>,
}

/// Runs `base` once per `(level, seed)` with every agent's satisfaction set to
/// `level` and aggregates the end-of-run consumption of the most consumed
/// resource.
pub fn satisfaction_sweep(levels: &[f64], base: &ScenarioConfig, seeds: &[u64]) -> Result<SweepTable> {
    if levels.is_empty() {
        return Err(invalid("levels: must not be empty"));
    }
    if seeds.is_empty() {
        return Err(invalid("seeds: must not be empty"));
    }
    if let Some(l) = levels.iter().find(|&&l| !(l > 0.0 && l <= 1.0)) {
        return Err(invalid(format!("level {l} is outside (0, 1]")));
    }
    let jobs: Vec<(f64, u64)> = levels.iter().flat_map(|&l| seeds.iter().map(move |&s| (l, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(level, seed)| {
            let config = base.clone().with_seed(seed).with_uniform_satisfaction(level);
            let out = run_scenario_with(&config, Execution::Serial)?;
            let i = out.ledger.max_resource();
            Ok(SweepRun { level, seed, max_resource: i, max_resource_consumption: out.ledger.cumulative[i] })
        })
        .collect::<Result<Vec<_>>>()?;

    let levels = levels
        .iter()
        .map(|&level| {
            let xs: Vec<f64> =
                runs.iter().filter(|r| r.level == level).map(|r| r.max_resource_consumption as f64).collect();
            let (mean, stddev) = mean_stddev(&xs);
            SweepLevel { level, runs: xs.len(), mean, stddev }
        })
        .collect();
    Ok(SweepTable { runs, levels })
}

/// Mean and sample standard deviation (zero for a single observation).
pub fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
