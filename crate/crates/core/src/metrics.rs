//! Derived quantities over a run: solution entropy, optimality utilities,
//! consumer/producer utilities of the most consumed resource and group
//! divides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::sim::{argmax_first, GenerationRecord, ScenarioConfig};

/// Utility knobs as they appear in a scenario file. Unset fields are derived
/// from the run: `exp_scale` defaults to a tenth of the generation count and
/// `reserve_total` to the reserve of the most consumed resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilitySettings {
    pub per_use_utility: f64,
    pub exp_scale: Option<f64>,
    pub consumer_factor: f64,
    pub producer_factor: f64,
    pub discount: f64,
    pub reserve_total: Option<f64>,
}

impl Default for UtilitySettings {
    fn default() -> Self {
        Self {
            per_use_utility: 1.0,
            exp_scale: None,
            consumer_factor: 0.5,
            producer_factor: 0.5,
            discount: 0.99,
            reserve_total: None,
        }
    }
}

impl UtilitySettings {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.per_use_utility > 0.0) {
            return Err(invalid("utility.per_use_utility: must be positive"));
        }
        if self.exp_scale.is_some_and(|a| !(a > 0.0)) {
            return Err(invalid("utility.exp_scale: must be positive"));
        }
        if !unit(self.consumer_factor) || !unit(self.producer_factor) || !unit(self.discount) {
            return Err(invalid("utility: consumer_factor, producer_factor and discount must be within [0, 1]"));
        }
        Ok(())
    }

    pub fn resolve<T: Scalar>(&self, generations: usize, reserve_of_max: f64) -> UtilityParams<T> {
        UtilityParams {
            per_use_utility: T::lit(self.per_use_utility),
            exp_scale: T::lit(self.exp_scale.unwrap_or(generations as f64 / 10.0)),
            consumer_factor: T::lit(self.consumer_factor),
            producer_factor: T::lit(self.producer_factor),
            discount: T::lit(self.discount),
            reserve_total: T::lit(self.reserve_total.unwrap_or(reserve_of_max)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams<T: Scalar> {
    pub per_use_utility: T,
    pub exp_scale: T,
    pub consumer_factor: T,
    pub producer_factor: T,
    pub discount: T,
    pub reserve_total: T,
}

impl<T: Scalar> Default for UtilityParams<T> {
    fn default() -> Self {
        UtilitySettings::default().resolve(2000, 0.0)
    }
}

/// Normalized Shannon entropy (base 2) of the empirical distribution of
/// distinct solutions: 0 when all agents agree, 1 when all differ.
pub fn solution_entropy<T: Scalar, K: Ord>(solutions: &[K]) -> Result<T> {
    let n = solutions.len();
    if n == 0 {
        return Err(invalid("entropy of an empty solution set"));
    }
    if n == 1 {
        return Ok(T::zero());
    }
    let mut counts: BTreeMap<&K, usize> = BTreeMap::new();
    for s in solutions {
        *counts.entry(s).or_default() += 1;
    }
    if counts.len() == n {
        return Ok(T::one());
    }
    let total = T::lit(n as f64);
    let h: T = counts
        .values()
        .map(|&c| {
            let p = T::lit(c as f64) / total;
            -p * p.log2()
        })
        .sum();
    Ok((h / total.log2()).max(T::zero()).min(T::one()))
}

/// `|S| * U`: utility of using the optimum in `generations_at_optimum`
/// generations.
pub fn linear_utility<T: Scalar>(generations_at_optimum: usize, params: &UtilityParams<T>) -> T {
    T::lit(generations_at_optimum as f64) * params.per_use_utility
}

/// `sum over l in S of U * exp((N_g - l) / a)`.
pub fn exponential_utility<T: Scalar>(
    optimum_generations: impl IntoIterator<Item = usize>,
    total_generations: usize,
    params: &UtilityParams<T>,
) -> T {
    let ng = T::lit(total_generations as f64);
    optimum_generations
        .into_iter()
        .map(|l| params.per_use_utility * ((ng - T::lit(l as f64)) / params.exp_scale).exp())
        .sum()
}

/// Most consumed resource (by final cumulative consumption, smallest index on
/// ties) and its per-generation consumption.
pub fn max_resource_series(records: &[GenerationRecord]) -> Result<(usize, Vec<u64>)> {
    let last = records.last().ok_or_else(|| invalid("no generation records"))?;
    let i = argmax_first(&last.per_resource_cumulative);
    Ok((i, records.iter().map(|r| r.per_resource_consumed[i]).collect()))
}

pub fn consumer_utility<T: Scalar>(consumed: T, params: &UtilityParams<T>) -> T {
    params.consumer_factor * consumed
}

/// Producer payoff at generation `k`: sales of this generation's consumption
/// plus the discounted value of what remains in reserve. The reserve term is
/// not clamped and turns negative once consumption has passed the reserve.
pub fn producer_utility<T: Scalar>(consumed: T, k: usize, prior_consumption: T, params: &UtilityParams<T>) -> T {
    let beta = params.producer_factor;
    let discount = params.discount.powi(k as i32 + 1);
    beta * consumed + discount * beta * (params.reserve_total - prior_consumption)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupDivide<T> {
    pub bottom_count: usize,
    pub top_count: usize,
    pub bottom_sum: T,
    pub top_sum: T,
    /// `(top_mean - bottom_mean) / bottom_mean`; `None` when the bottom group
    /// has zero utility.
    pub relative_gap: Option<T>,
    /// `(top_sum - bottom_sum) / bottom_sum`; `None` when the bottom group
    /// has zero utility.
    pub sum_gap: Option<T>,
}

/// Sorts ascending and splits into the lowest `floor(bottom_fraction * N)`
/// agents and the rest. `0.5` gives halves, `0.8` gives the top 20% against
/// the remaining 80%.
pub fn group_divide<T: Scalar>(utilities: &[T], bottom_fraction: f64) -> Result<GroupDivide<T>> {
    let n = utilities.len();
    if n < 2 {
        return Err(invalid("group divide needs at least two agents"));
    }
    if !(bottom_fraction > 0.0 && bottom_fraction < 1.0) {
        return Err(invalid("split fraction must be within (0, 1)"));
    }
    let mut sorted = utilities.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("utilities are not NaN"));
    let bottom_count = ((bottom_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let top_count = n - bottom_count;
    let bottom_sum: T = sorted[..bottom_count].iter().copied().sum();
    let top_sum: T = sorted[bottom_count..].iter().copied().sum();
    let (relative_gap, sum_gap) = if bottom_sum == T::zero() {
        (None, None)
    } else {
        let bottom_mean = bottom_sum / T::lit(bottom_count as f64);
        let top_mean = top_sum / T::lit(top_count as f64);
        (Some((top_mean - bottom_mean) / bottom_mean), Some((top_sum - bottom_sum) / bottom_sum))
    };
    Ok(GroupDivide { bottom_count, top_count, bottom_sum, top_sum, relative_gap, sum_gap })
}

/// Per-agent sets of generations at which the incumbent was optimal.
pub fn optimum_generation_sets(records: &[GenerationRecord]) -> Vec<Vec<usize>> {
    let n = records.first().map_or(0, |r| r.per_agent_at_optimum.len());
    (0..n)
        .map(|j| records.iter().filter(|r| r.per_agent_at_optimum[j]).map(|r| r.generation).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentUtility {
    pub agent: usize,
    pub generations_at_optimum: usize,
    pub first_optimum_generation: Option<usize>,
    pub linear: f64,
    pub exponential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divides {
    pub linear_50_50: Option<GroupDivide<f64>>,
    pub linear_20_80: Option<GroupDivide<f64>>,
    pub exponential_50_50: Option<GroupDivide<f64>>,
    pub exponential_20_80: Option<GroupDivide<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceUtilityRow {
    pub generation: usize,
    pub consumed: u64,
    pub consumer: f64,
    pub consumer_cumulative: f64,
    pub producer: f64,
    pub producer_cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub generations: usize,
    pub max_resource: Option<usize>,
    pub entropy: Vec<f64>,
    /// Share of generations with entropy within `[0.5, 0.8]`.
    pub entropy_band_occupancy: Option<f64>,
    pub agents: Vec<AgentUtility>,
    pub divides: Divides,
    pub resource_utility: Vec<ResourceUtilityRow>,
}

pub fn build_report(config: &ScenarioConfig, records: &[GenerationRecord]) -> Result<MetricsReport> {
    let entropy: Vec<f64> = records.iter().map(|r| r.entropy).collect();
    let band = (!entropy.is_empty())
        .then(|| entropy.iter().filter(|e| (0.5..=0.8).contains(*e)).count() as f64 / entropy.len() as f64);

    let Ok((i_max, series)) = max_resource_series(records) else {
        return Ok(MetricsReport {
            generations: 0,
            max_resource: None,
            entropy,
            entropy_band_occupancy: band,
            agents: Vec::new(),
            divides: Divides { linear_50_50: None, linear_20_80: None, exponential_50_50: None, exponential_20_80: None },
            resource_utility: Vec::new(),
        });
    };
    let params: UtilityParams<f64> = config.utility.resolve(config.generations, config.reserves[i_max]);

    let agents: Vec<AgentUtility> = optimum_generation_sets(records)
        .into_iter()
        .enumerate()
        .map(|(j, set)| AgentUtility {
            agent: j + 1,
            generations_at_optimum: set.len(),
            first_optimum_generation: set.first().copied(),
            linear: linear_utility(set.len(), &params),
            exponential: exponential_utility(set.iter().copied(), config.generations, &params),
        })
        .collect();
    let linear: Vec<f64> = agents.iter().map(|a| a.linear).collect();
    let exponential: Vec<f64> = agents.iter().map(|a| a.exponential).collect();
    let divides = Divides {
        linear_50_50: group_divide(&linear, 0.5).ok(),
        linear_20_80: group_divide(&linear, 0.8).ok(),
        exponential_50_50: group_divide(&exponential, 0.5).ok(),
        exponential_20_80: group_divide(&exponential, 0.8).ok(),
    };

    let mut resource_utility = Vec::with_capacity(series.len());
    let (mut prior, mut consumer_cumulative, mut producer_cumulative) = (0.0, 0.0, 0.0);
    for (r, &consumed) in records.iter().zip(&series) {
        let x = consumed as f64;
        let consumer = consumer_utility(x, &params);
        let producer = producer_utility(x, r.generation, prior, &params);
        consumer_cumulative += consumer;
        producer_cumulative += producer;
        prior += x;
        resource_utility.push(ResourceUtilityRow {
            generation: r.generation,
            consumed,
            consumer,
            consumer_cumulative,
            producer,
            producer_cumulative,
        });
    }

    Ok(MetricsReport {
        generations: records.len(),
        max_resource: Some(i_max),
        entropy,
        entropy_band_occupancy: band,
        agents,
        divides,
        resource_utility,
    })
}
