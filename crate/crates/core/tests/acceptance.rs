//! Acceptance suite. Each test checks one exit criterion and prints a single
//! `PASS`/`FAIL` line with the measured quantities.
//!
//! Monte Carlo runs are shared between criteria: baseline, accelerated and
//! satisficing presets over seeds 1..=50, reduced to small digests.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use commons_core::io::write_generations_csv;
use commons_core::knapsack::ProblemInstance;
use commons_core::metrics::{self, group_divide, optimum_generation_sets, UtilityParams};
use commons_core::{
    run_scenario_with, satisfaction_sweep, scenario_presets, solution_entropy, solve_bruteforce, solve_dp,
    Execution, Preset, RunOutput, ScenarioConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const PAIRED_SEEDS: u64 = 50;
const CONVERGENCE_SEEDS: u64 = 20;
const SWEEP_SEEDS: u64 = 30;
const VALUE_TOL: f64 = 1e-9;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("[criterion {id}] {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// What the criteria need from one scenario run.
#[derive(Debug, Clone)]
struct Digest {
    max_crossing: Option<usize>,
    any_crossing: bool,
    /// Agents whose incumbent reached the optimum at some generation.
    agents_reaching_optimum: usize,
    agent_count: usize,
    entropy: Vec<f64>,
    linear: Vec<f64>,
    exponential: Vec<f64>,
    /// Consumer utility per generation after every agent sits at the optimum.
    consumer_after_unanimity: Vec<f64>,
    expected_consumer_increment: f64,
}

fn digest(out: &RunOutput, config: &ScenarioConfig) -> Digest {
    let generations = config.generations;
    let n = out.records.first().map_or(0, |r| r.per_agent_at_optimum.len());
    let sets = optimum_generation_sets(&out.records);
    let (i_max, series) = metrics::max_resource_series(&out.records).unwrap();
    let params: UtilityParams<f64> =
        commons_core::UtilitySettings::default().resolve(generations, out.ledger.reserves[i_max]);
    let unanimous_from = out.records.iter().position(|r| r.agents_at_optimum == n);
    let consumer_after_unanimity = unanimous_from
        .map(|k| series[k..].iter().map(|&r| metrics::consumer_utility(r as f64, &params)).collect())
        .unwrap_or_default();
    let w_max = if out.optimum.solution.bits[i_max] { config.instance.weights()[i_max] } else { 0.0 };
    Digest {
        max_crossing: out.max_resource_crossing(),
        any_crossing: out.ledger.any_crossed(),
        agents_reaching_optimum: sets.iter().filter(|s| !s.is_empty()).count(),
        agent_count: n,
        entropy: out.records.iter().map(|r| r.entropy).collect(),
        linear: sets.iter().map(|s| metrics::linear_utility(s.len(), &params)).collect(),
        exponential: sets
            .iter()
            .map(|s| metrics::exponential_utility(s.iter().copied(), generations, &params))
            .collect(),
        consumer_after_unanimity,
        expected_consumer_increment: params.consumer_factor * n as f64 * w_max,
    }
}

fn run_preset(preset: Preset, seeds: std::ops::RangeInclusive<u64>) -> Vec<Digest> {
    seeds
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&seed| {
            let config = scenario_presets(preset, seed);
            let out = run_scenario_with(&config, Execution::Serial).expect("preset runs");
            digest(&out, &config)
        })
        .collect()
}

fn baseline() -> &'static Vec<Digest> {
    static RUNS: OnceLock<Vec<Digest>> = OnceLock::new();
    RUNS.get_or_init(|| run_preset(Preset::Optimal, 1..=PAIRED_SEEDS))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn crossing_or_never(c: Option<usize>) -> f64 {
    c.map_or(f64::INFINITY, |g| g as f64)
}

#[test]
fn criterion_1_dp_table_instance() {
    let start = Instant::now();
    let inst = ProblemInstance::<f64>::load(repo_root().join("instances/reference10.json")).unwrap();
    let cert = solve_dp(&inst).unwrap();
    let elapsed = start.elapsed();
    let expected = [true, true, false, true, true, false, false, true, false, false];
    let pass = cert.solution.bits == expected
        && (cert.optimal_value - 261.95623014).abs() <= 1e-6
        && cert.solution.total_weight == 3369.0
        && elapsed < Duration::from_secs(1);
    report(
        1,
        "DP optimum of the table instance",
        pass,
        format!(
            "bits {} value {:.8} weight {} in {:?}",
            cert.solution.bit_string(),
            cert.optimal_value,
            cert.solution.total_weight,
            elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..200 {
        let m = rng.gen_range(1..=15);
        let inst = ProblemInstance::<f64>::random(m, &mut rng).unwrap();
        let dp = solve_dp(&inst).unwrap();
        let bf = solve_bruteforce(&inst).unwrap();
        if dp.optimal_value != bf.optimal_value || dp.solution.bits != bf.solution.bits {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(30);
    report(2, "DP equals brute force on 200 random instances", pass, format!("{mismatches} mismatches in {elapsed:?}"));
    assert!(pass);
}

#[test]
fn criterion_3_convergence() {
    let start = Instant::now();
    let runs = run_preset(Preset::Optimal, 1..=CONVERGENCE_SEEDS);
    let elapsed = start.elapsed();
    let good = runs
        .iter()
        .filter(|d| d.agents_reaching_optimum as f64 >= 0.9 * d.agent_count as f64)
        .count();
    let pass = good >= 18 && elapsed < Duration::from_secs(300);
    let reached: Vec<usize> = runs.iter().map(|d| d.agents_reaching_optimum).collect();
    report(
        3,
        "baseline agents reach the optimum",
        pass,
        format!("{good}/20 runs with >= 90% of agents at the optimum (per run: {reached:?}) in {elapsed:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_tragedy_ordering() {
    let start = Instant::now();
    let base = baseline();
    let fast = run_preset(Preset::Accelerated, 1..=PAIRED_SEEDS);
    let slow = run_preset(Preset::Satisficing, 1..=PAIRED_SEEDS);
    let elapsed = start.elapsed();

    let earlier = base
        .iter()
        .zip(&fast)
        .filter(|(b, a)| crossing_or_never(a.max_crossing) < crossing_or_never(b.max_crossing))
        .count();
    let med_base = median(base.iter().map(|d| crossing_or_never(d.max_crossing)).collect());
    let med_fast = median(fast.iter().map(|d| crossing_or_never(d.max_crossing)).collect());
    let satisficing_crossings = slow.iter().filter(|d| d.any_crossing).count();
    let pass = med_fast < med_base
        && earlier as f64 >= 0.9 * PAIRED_SEEDS as f64
        && satisficing_crossings == 0
        && elapsed < Duration::from_secs(900);
    report(
        4,
        "acceleration brings the tragedy forward, satisficing avoids it",
        pass,
        format!(
            "median crossing accelerated {med_fast} < baseline {med_base}; earlier in {earlier}/{PAIRED_SEEDS} pairs; \
             satisficing runs with a crossing: {satisficing_crossings}/{PAIRED_SEEDS}; {elapsed:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_satisfaction_monotonicity() {
    let levels = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let seeds: Vec<u64> = (1..=SWEEP_SEEDS).collect();
    let table = satisfaction_sweep(&levels, &scenario_presets(Preset::Optimal, 0), &seeds).unwrap();
    let means: Vec<f64> = table.levels.iter().map(|l| l.mean).collect();
    let weakly_increasing = means.windows(2).all(|w| w[0] <= w[1]);
    let strict_top = means[5] > means[4];
    let pass = weakly_increasing && strict_top;
    report(
        5,
        "consumption grows with the satisfaction level",
        pass,
        format!("means by level {levels:?}: {means:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_entropy() {
    let same = vec![vec![true, false, true]; 25];
    let distinct: Vec<Vec<bool>> = (0..25u32).map(|x| (0..5).map(|b| x >> b & 1 == 1).collect()).collect();
    let zero = solution_entropy::<f64, _>(&same).unwrap();
    let one = solution_entropy::<f64, _>(&distinct).unwrap();
    let extremes = zero == 0.0 && one == 1.0;

    let runs = baseline();
    let decaying = runs
        .iter()
        .filter(|d| {
            let tenth = d.entropy.len() / 10;
            let head = d.entropy[..tenth].iter().sum::<f64>() / tenth as f64;
            let tail = d.entropy[d.entropy.len() - tenth..].iter().sum::<f64>() / tenth as f64;
            tail < head
        })
        .count();
    let pass = extremes && decaying == runs.len();
    report(
        6,
        "entropy extremes and decay",
        pass,
        format!("unanimity {zero}, all-distinct {one}; decay in {decaying}/{} baseline runs", runs.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_7_economic_divide() {
    let runs = baseline();
    let mut top_beats_bottom = 0;
    let mut exp_dominates = 0;
    let mut sample = Vec::new();
    for d in runs {
        let lin = group_divide(&d.linear, 0.5).unwrap();
        let exp = group_divide(&d.exponential, 0.8).unwrap();
        if lin.top_sum > lin.bottom_sum {
            top_beats_bottom += 1;
        }
        let (lin_gap, exp_gap) = (lin.relative_gap.unwrap(), exp.relative_gap.unwrap());
        if exp_gap >= lin_gap {
            exp_dominates += 1;
        }
        if sample.len() < 3 {
            sample.push(format!("lin50 {lin_gap:.3} / exp20 {exp_gap:.3}"));
        }
    }
    let n = runs.len();
    let pass = top_beats_bottom == n && exp_dominates as f64 >= 0.9 * n as f64;
    report(
        7,
        "economic divide",
        pass,
        format!(
            "top-50% above bottom-50% in {top_beats_bottom}/{n}; exponential 20/80 gap >= linear 50/50 gap in \
             {exp_dominates}/{n} (e.g. {})",
            sample.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_utility_formulas() {
    let close = |a: f64, b: f64| (a - b).abs() <= VALUE_TOL;
    let p = UtilityParams::<f64> {
        per_use_utility: 1.0,
        exp_scale: 200.0,
        consumer_factor: 0.5,
        producer_factor: 0.5,
        discount: 0.99,
        reserve_total: 1000.0,
    };
    let mut checks = vec![
        ("linear empty", metrics::linear_utility(0, &p) == 0.0),
        ("linear 400", close(metrics::linear_utility(400, &p), 400.0)),
        ("linear frozen tail", close(metrics::linear_utility((600..=2000).count(), &p), 1401.0)),
        ("exp empty", metrics::exponential_utility(std::iter::empty(), 2000, &p) == 0.0),
        ("exp at horizon", close(metrics::exponential_utility([2000], 2000, &p), 1.0)),
        ("exp one scale back", close(metrics::exponential_utility([1800], 2000, &p), std::f64::consts::E)),
        ("consumer alpha 0", metrics::consumer_utility(5.0, &UtilityParams { consumer_factor: 0.0, ..p }) == 0.0),
        ("consumer 12450", close(metrics::consumer_utility(24_900.0, &p), 12_450.0)),
        ("consumer alpha 1", metrics::consumer_utility(42.0, &UtilityParams { consumer_factor: 1.0, ..p }) == 42.0),
        (
            "producer gamma 0",
            metrics::producer_utility(321.0, 7, 50.0, &UtilityParams { discount: 0.0, ..p }) == 0.5 * 321.0,
        ),
        (
            "producer 1100",
            close(
                metrics::producer_utility(100.0, 1, 0.0, &UtilityParams { producer_factor: 1.0, discount: 1.0, ..p }),
                1100.0,
            ),
        ),
    ];

    let runs = baseline();
    let saturated = runs
        .iter()
        .filter(|d| !d.consumer_after_unanimity.is_empty())
        .all(|d| d.consumer_after_unanimity.iter().all(|&u| u == d.expected_consumer_increment));
    let unanimous_runs = runs.iter().filter(|d| !d.consumer_after_unanimity.is_empty()).count();
    checks.push(("consumer increments saturate", saturated && unanimous_runs > 0));
    let increment = runs[0].expected_consumer_increment;

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let pass = failed.is_empty() && increment == 0.5 * 25.0 * 996.0;
    report(
        8,
        "utility formulas",
        pass,
        format!(
            "{} checks, failed {failed:?}; consumer increment {increment} after unanimity in {unanimous_runs} runs",
            checks.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let config = scenario_presets(Preset::Accelerated, 42);
    let csv_for = |threads: usize, execution: Execution| -> Vec<u8> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| run_scenario_with(&config, execution)).unwrap();
        let mut bytes = Vec::new();
        write_generations_csv(&out.records, config.instance.item_count(), &mut bytes).unwrap();
        bytes
    };
    let a = csv_for(1, Execution::Parallel);
    let b = csv_for(1, Execution::Parallel);
    let c = csv_for(8, Execution::Parallel);
    let d = csv_for(1, Execution::Serial);
    let pass = a == b && a == c && a == d;
    report(
        9,
        "byte-identical CSV across repeats and thread counts",
        pass,
        format!("{} bytes; repeat {}, 8 threads {}, serial {}", a.len(), a == b, a == c, a == d),
    );
    assert!(pass);
}
