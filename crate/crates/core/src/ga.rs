//! One agent's generational trial-and-error search over selection vectors.
//!
//! Each agent owns its population, its incumbent (best feasible vector seen so
//! far) and a private ChaCha stream derived from `(master_seed, agent_id)`, so
//! agents can be stepped in any order or in parallel without changing results.

use std::collections::BTreeSet;

use rand::distributions::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::knapsack::{evaluate, rank_by_value, OptimumCertificate, ProblemInstance, Solution};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub selection_size: usize,
    /// Per-bit flip probability; `None` means `1 / item_count`.
    pub mutation_rate: Option<f64>,
    pub elitism: bool,
    pub max_reseed_attempts: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 45,
            selection_size: 45,
            mutation_rate: None,
            elitism: true,
            max_reseed_attempts: 100,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(invalid("ga.population_size: must be positive"));
        }
        if self.selection_size == 0 || self.selection_size > self.population_size {
            return Err(invalid("ga.selection_size: must be in 1..=population_size"));
        }
        if let Some(rate) = self.mutation_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(invalid("ga.mutation_rate: must be within [0, 1]"));
            }
        }
        if self.max_reseed_attempts == 0 {
            return Err(invalid("ga.max_reseed_attempts: must be positive"));
        }
        Ok(())
    }

    pub fn effective_mutation_rate(&self, item_count: usize) -> f64 {
        self.mutation_rate.unwrap_or(1.0 / item_count as f64)
    }
}

/// Deterministic random stream for one agent. Stream 0 is reserved for
/// scenario-level draws.
pub fn agent_stream(master_seed: u64, agent_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(agent_id as u64);
    rng
}

pub fn scenario_stream(master_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(0);
    rng
}

#[derive(Debug, Clone)]
pub struct AgentState<T: Scalar> {
    pub agent_id: usize,
    pub population: Vec<Vec<bool>>,
    pub incumbent: Option<Solution<T>>,
    pub satisfaction_fraction: T,
    pub acceleration: u32,
    pub frozen: bool,
    pub optimum_generations: BTreeSet<usize>,
    rng: ChaCha8Rng,
}

/// Outcome of feasibility selection.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection<T: Scalar> {
    /// At least two feasible members, best first, at most `selection_size`.
    Parents(Vec<Solution<T>>),
    /// Fewer than two feasible members; the caller should draw a new population.
    Reseed,
}

pub fn random_vector<R: Rng + ?Sized>(item_count: usize, rng: &mut R) -> Vec<bool> {
    (0..item_count).map(|_| rng.gen_bool(0.5)).collect()
}

/// Keeps the feasible members; when more than `selection_size` qualify, keeps
/// the highest-valued ones (ties by ascending bit order).
pub fn select_feasible<T: Scalar>(
    population: &[Vec<bool>],
    instance: &ProblemInstance<T>,
    config: &GaConfig,
) -> Result<Selection<T>> {
    if population.is_empty() {
        return Err(invalid("population is empty"));
    }
    let mut feasible = Vec::with_capacity(population.len());
    for bits in population {
        let s = evaluate(instance, bits)?;
        if s.is_feasible(instance) {
            feasible.push(s);
        }
    }
    if feasible.len() < 2 {
        return Ok(Selection::Reseed);
    }
    feasible.sort_by(rank_by_value);
    feasible.truncate(config.selection_size);
    Ok(Selection::Parents(feasible))
}

/// First `ceil(M/2)` bits of `parent_m` followed by the last `floor(M/2)` bits
/// of `parent_n`.
pub fn crossover(parent_m: &[bool], parent_n: &[bool]) -> Result<Vec<bool>> {
    if parent_m.len() != parent_n.len() {
        return Err(invalid(format!(
            "crossover parents differ in length ({} vs {})",
            parent_m.len(),
            parent_n.len()
        )));
    }
    let split = parent_m.len().div_ceil(2);
    Ok(parent_m[..split].iter().chain(&parent_n[split..]).copied().collect())
}

/// Flips each bit independently with probability `rate`.
pub fn mutate<R: Rng + ?Sized>(mut child: Vec<bool>, rate: f64, rng: &mut R) -> Result<Vec<bool>> {
    let flip = Bernoulli::new(rate).map_err(|_| invalid("mutation rate must be within [0, 1]"))?;
    for bit in child.iter_mut() {
        if flip.sample(rng) {
            *bit = !*bit;
        }
    }
    Ok(child)
}

impl<T: Scalar> AgentState<T> {
    pub fn new(agent_id: usize, master_seed: u64, satisfaction_fraction: T, acceleration: u32) -> Self {
        Self {
            agent_id,
            population: Vec::new(),
            incumbent: None,
            satisfaction_fraction,
            acceleration,
            frozen: false,
            optimum_generations: BTreeSet::new(),
            rng: agent_stream(master_seed, agent_id),
        }
    }

    pub fn incumbent_value(&self) -> Option<T> {
        self.incumbent.as_ref().map(|s| s.total_value)
    }

    /// Draws a fresh random population, redrawing up to `max_reseed_attempts`
    /// times while fewer than two members are feasible, then offers its best
    /// feasible member to the incumbent.
    pub fn init_population(&mut self, instance: &ProblemInstance<T>, config: &GaConfig) -> Result<()> {
        let m = instance.item_count();
        let draws = config.max_reseed_attempts + 1;
        for _ in 0..draws {
            let population: Vec<Vec<bool>> =
                (0..config.population_size).map(|_| random_vector(m, &mut self.rng)).collect();
            let mut feasible = Vec::new();
            for bits in &population {
                let s = evaluate(instance, bits)?;
                if s.is_feasible(instance) {
                    feasible.push(s);
                }
            }
            if feasible.len() >= 2 {
                feasible.sort_by(rank_by_value);
                self.offer(feasible.swap_remove(0));
                self.population = population;
                return Ok(());
            }
        }
        Err(Error::SeedingFailure { agent_id: self.agent_id, attempts: draws })
    }

    fn offer(&mut self, candidate: Solution<T>) {
        let better = match &self.incumbent {
            Some(current) => candidate.total_value > current.total_value,
            None => true,
        };
        if better {
            self.incumbent = Some(candidate);
        }
    }

    fn satisfied(&self, optimum: &OptimumCertificate<T>) -> bool {
        let threshold = self.satisfaction_fraction * optimum.optimal_value - T::value_tolerance();
        self.incumbent_value().is_some_and(|v| v >= threshold)
    }

    /// One selection / crossover / mutation pass producing the next population.
    fn search_iteration(&mut self, instance: &ProblemInstance<T>, config: &GaConfig) -> Result<()> {
        let parents = match select_feasible(&self.population, instance, config)? {
            Selection::Parents(p) => p,
            Selection::Reseed => {
                self.init_population(instance, config)?;
                match select_feasible(&self.population, instance, config)? {
                    Selection::Parents(p) => p,
                    Selection::Reseed => unreachable!("fresh population has two feasible members"),
                }
            }
        };

        let rate = config.effective_mutation_rate(instance.item_count());
        let mut next = Vec::with_capacity(config.population_size + 1);
        for _ in 0..config.population_size {
            let a = self.rng.gen_range(0..parents.len());
            let mut b = self.rng.gen_range(0..parents.len() - 1);
            if b >= a {
                b += 1;
            }
            let child = crossover(&parents[a].bits, &parents[b].bits)?;
            let child = mutate(child, rate, &mut self.rng)?;
            let s = evaluate(instance, &child)?;
            if s.is_feasible(instance) {
                self.offer(s);
            }
            next.push(child);
        }
        if config.elitism {
            if let Some(inc) = &self.incumbent {
                next.push(inc.bits.clone());
            }
        }
        self.population = next;
        Ok(())
    }

    /// Advances the agent by one global generation: up to `acceleration`
    /// search passes, stopping as soon as the incumbent meets the agent's
    /// satisfaction threshold. Records `generation` when the incumbent is
    /// optimal.
    pub fn step_generation(
        &mut self,
        instance: &ProblemInstance<T>,
        config: &GaConfig,
        optimum: &OptimumCertificate<T>,
        generation: usize,
    ) -> Result<()> {
        if self.population.is_empty() {
            self.init_population(instance, config)?;
        }
        if !self.frozen && self.satisfied(optimum) {
            self.frozen = true;
        }
        if !self.frozen {
            for _ in 0..self.acceleration {
                self.search_iteration(instance, config)?;
                if self.satisfied(optimum) {
                    self.frozen = true;
                    break;
                }
            }
        }
        if self.incumbent_value().is_some_and(|v| optimum.is_optimal_value(v)) {
            self.optimum_generations.insert(generation);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knapsack::{reference_instance, solve_dp};

    fn bits(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn crossover_examples() {
        let m = bits(&[1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        let n = bits(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(crossover(&m, &n).unwrap(), vec![true; 10]);
        assert_eq!(crossover(&m, &m).unwrap(), m);
        assert_eq!(crossover(&bits(&[1, 0, 1]), &bits(&[0, 1, 0])).unwrap(), bits(&[1, 0, 0]));
        assert!(crossover(&m, &bits(&[1])).is_err());
    }

    #[test]
    fn mutate_extremes() {
        let mut rng = agent_stream(1, 1);
        let x = bits(&[1, 0, 1, 1, 0, 0, 1, 0, 1, 0]);
        assert_eq!(mutate(x.clone(), 0.0, &mut rng).unwrap(), x);
        let flipped: Vec<bool> = x.iter().map(|b| !b).collect();
        assert_eq!(mutate(x, 1.0, &mut rng).unwrap(), flipped);
        assert!(mutate(vec![true], 1.5, &mut rng).is_err());
    }

    #[test]
    fn mutate_mean_flip_count() {
        let mut rng = agent_stream(7, 3);
        let trials = 100_000;
        let total: usize = (0..trials)
            .map(|_| mutate(vec![false; 10], 0.1, &mut rng).unwrap().iter().filter(|&&b| b).count())
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 1.0).abs() <= 0.02, "mean flips {mean}");
    }

    #[test]
    fn select_keeps_feasible_by_value() {
        let inst = reference_instance::<f64>();
        let opt = bits(&[1, 1, 0, 1, 1, 0, 0, 1, 0, 0]);
        let pop = vec![vec![false; 10], vec![true; 10], opt.clone()];
        match select_feasible(&pop, &inst, &GaConfig::default()).unwrap() {
            Selection::Parents(p) => {
                let kept: Vec<_> = p.iter().map(|s| s.bits.clone()).collect();
                assert_eq!(kept, vec![opt, vec![false; 10]]);
            }
            Selection::Reseed => panic!("two feasible members"),
        }
    }

    #[test]
    fn select_signals_reseed() {
        let inst = reference_instance::<f64>();
        let pop = vec![vec![true; 10]; 5];
        assert_eq!(select_feasible(&pop, &inst, &GaConfig::default()).unwrap(), Selection::Reseed);
        assert!(select_feasible::<f64>(&[], &inst, &GaConfig::default()).is_err());
    }

    #[test]
    fn select_truncates_to_best() {
        let inst = reference_instance::<f64>().with_capacity(1e9).unwrap();
        let mut rng = agent_stream(11, 1);
        let pop: Vec<Vec<bool>> = (0..50).map(|_| random_vector(10, &mut rng)).collect();
        let config = GaConfig { selection_size: 45, population_size: 50, ..GaConfig::default() };
        let Selection::Parents(kept) = select_feasible(&pop, &inst, &config).unwrap() else {
            panic!("all members feasible");
        };
        assert_eq!(kept.len(), 45);
        let min_kept = kept.iter().map(|s| s.total_value).fold(f64::INFINITY, f64::min);
        let mut excluded = pop.clone();
        for s in &kept {
            let pos = excluded.iter().position(|b| *b == s.bits).unwrap();
            excluded.swap_remove(pos);
        }
        for b in &excluded {
            assert!(evaluate(&inst, b).unwrap().total_value <= min_kept);
        }
    }

    #[test]
    fn init_unconstrained_takes_best_member() {
        let inst = reference_instance::<f64>().with_capacity(1e9).unwrap();
        let config = GaConfig::default();
        let mut agent = AgentState::<f64>::new(1, 5, 1.0, 1);
        agent.init_population(&inst, &config).unwrap();
        assert_eq!(agent.population.len(), 45);
        assert!(agent.population.iter().all(|b| b.len() == 10));
        let best = agent
            .population
            .iter()
            .map(|b| evaluate(&inst, b).unwrap().total_value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(agent.incumbent_value(), Some(best));
    }

    #[test]
    fn init_zero_capacity_success_rate() {
        // Two items, capacity 0: only the all-zeros vector fits (p = 1/4).
        // Four members per draw, two draws per init.
        let inst = ProblemInstance::new(vec![1.0, 2.0], vec![1.0, 1.0], 0.0).unwrap();
        let config = GaConfig { population_size: 4, selection_size: 4, max_reseed_attempts: 1, ..GaConfig::default() };
        let p: f64 = 0.25;
        let q = 1.0 - p;
        let per_draw = 1.0 - q.powi(4) - 4.0 * p * q.powi(3);
        let expected = 1.0 - (1.0 - per_draw).powi(2);

        let trials = 20_000;
        let mut ok = 0;
        for seed in 0..trials {
            let mut agent = AgentState::<f64>::new(1, seed, 1.0, 1);
            match agent.init_population(&inst, &config) {
                Ok(()) => {
                    ok += 1;
                    assert_eq!(agent.incumbent.as_ref().unwrap().bits, vec![false, false]);
                }
                Err(Error::SeedingFailure { agent_id: 1, attempts: 2 }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        let rate = ok as f64 / trials as f64;
        assert!((rate - expected).abs() < 0.015, "rate {rate} expected {expected}");
    }

    #[test]
    fn frozen_at_optimum_is_absorbing() {
        let inst = reference_instance::<f64>();
        let opt = solve_dp(&inst).unwrap();
        let config = GaConfig::default();
        let mut agent = AgentState::<f64>::new(1, 9, 1.0, 1);
        agent.init_population(&inst, &config).unwrap();
        agent.incumbent = Some(opt.solution.clone());
        let population = agent.population.clone();
        for g in 1..=20 {
            agent.step_generation(&inst, &config, &opt, g).unwrap();
            assert!(agent.frozen);
            assert_eq!(agent.incumbent.as_ref(), Some(&opt.solution));
        }
        assert_eq!(agent.population, population);
        assert_eq!(agent.optimum_generations, (1..=20).collect());
    }

    #[test]
    fn acceleration_replays_plain_steps() {
        let inst = reference_instance::<f64>();
        let opt = solve_dp(&inst).unwrap();
        let config = GaConfig::default();
        for seed in 0..30 {
            let mut fast = AgentState::<f64>::new(2, seed, 1.0, 5);
            let mut slow = AgentState::<f64>::new(2, seed, 1.0, 1);
            fast.init_population(&inst, &config).unwrap();
            slow.init_population(&inst, &config).unwrap();
            fast.step_generation(&inst, &config, &opt, 1).unwrap();
            for g in 1..=5 {
                slow.step_generation(&inst, &config, &opt, g).unwrap();
            }
            assert_eq!(fast.incumbent, slow.incumbent, "seed {seed}");
            assert_eq!(fast.frozen, slow.frozen);
        }
    }
}
