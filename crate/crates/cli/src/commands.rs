use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use commons_core::io::{self, RunManifest, RunSummary};
use commons_core::knapsack::{solve_bruteforce, solve_dp, ProblemInstance};
use commons_core::metrics::{build_report, GroupDivide};
use commons_core::{run_scenario, satisfaction_sweep, scenario_presets, Error, Preset, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const THREADS_ENV: &str = "COMMONS_SIM_THREADS";

pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().with_context(|| format!("{THREADS_ENV}={raw:?} is not a number"))?;
    if threads == 0 {
        bail!("{THREADS_ENV} must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

/// Parses `a..b` (inclusive), a comma list, or a single seed.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let trimmed = text.trim();
    if let Some((a, b)) = trimmed.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range start in {trimmed:?}"))?;
        let b: u64 = b.trim().trim_start_matches('=').parse().with_context(|| format!("bad seed range end in {trimmed:?}"))?;
        if b < a {
            bail!("empty seed range {trimmed:?}");
        }
        return Ok((a..=b).collect());
    }
    trimmed.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed {s:?}")))
        .collect()
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn preset(name: &str, seed: u64) -> Result<()> {
    let preset: Preset = name.parse()?;
    print_json(&scenario_presets(preset, seed))
}

pub fn solve(path: &Path, exact_only: bool) -> Result<()> {
    let instance = ProblemInstance::<f64>::load(path)?;
    let (cert, method) = match solve_dp(&instance) {
        Ok(cert) => (cert, "dp"),
        Err(e @ Error::Unsupported(_)) if exact_only => return Err(e.into()),
        Err(Error::Unsupported(_)) => (solve_bruteforce(&instance)?, "enumeration"),
        Err(e) => return Err(e.into()),
    };
    println!(
        "{} weight {} value {:.8} ({method})",
        cert.solution.bit_string(),
        cert.solution.total_weight,
        cert.optimal_value
    );
    Ok(())
}

fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn run_one(config: &ScenarioConfig, dir: &Path) -> Result<RunSummary> {
    let started_at = timestamp();
    let out = run_scenario(config).map_err(|e| match e {
        Error::SeedingFailure { agent_id, .. } => anyhow::Error::new(e).context(format!("agent {agent_id} could not be seeded")),
        e => e.into(),
    })?;
    let paths = io::write_run(dir, config, &out)?;
    let summary = RunSummary::new(config, &out);
    let manifest = RunManifest {
        schema: io::MANIFEST_SCHEMA.into(),
        config_hash: summary.config_hash.clone(),
        master_seed: config.master_seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: timestamp(),
        config_file: io::SCENARIO_FILE.into(),
        output_paths: paths
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .chain([io::MANIFEST_FILE.to_string()])
            .collect(),
    };
    io::write_manifest(dir, &manifest)?;
    Ok(summary)
}

#[derive(Serialize)]
struct SeedsSummary {
    seeds: Vec<u64>,
    max_resource_crossing: Vec<Option<usize>>,
    /// Median over seeds; runs without a crossing count as later than any crossing.
    median_crossing: Option<f64>,
    runs_with_crossing: usize,
}

fn median_crossing(crossings: &[Option<usize>]) -> Option<f64> {
    let mut xs: Vec<f64> = crossings.iter().map(|c| c.map_or(f64::INFINITY, |g| g as f64)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let m = if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 };
    m.is_finite().then_some(m)
}

pub fn simulate(scenario: &Path, out: &Path, seed: Option<u64>, seeds: Option<&str>) -> Result<()> {
    let base = io::load_scenario(scenario)?;
    let Some(seeds) = seeds else {
        let config = match seed {
            Some(s) => base.with_seed(s),
            None => base,
        };
        let summary = run_one(&config, out)?;
        println!(
            "seed {} max resource r{} crossing {} -> {}",
            summary.master_seed,
            summary.max_resource.map_or("-".into(), |i| i.to_string()),
            summary.max_resource_crossing.map_or("none".into(), |g| g.to_string()),
            out.display()
        );
        return Ok(());
    };

    let seeds = parse_seeds(seeds)?;
    fs::create_dir_all(out)?;
    let mut table = csv_writer(&out.join("seeds.csv"))?;
    table.write_record(["seed", "max_resource", "max_resource_crossing", "agents_at_optimum_final"])?;
    let mut crossings = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        let summary = run_one(&base.clone().with_seed(s), &out.join(format!("seed-{s}")))?;
        table.write_record([
            s.to_string(),
            summary.max_resource.map_or(String::new(), |i| i.to_string()),
            summary.max_resource_crossing.map_or(String::new(), |g| g.to_string()),
            summary.agents_at_optimum_final.to_string(),
        ])?;
        crossings.push(summary.max_resource_crossing);
    }
    table.flush()?;
    let summary = SeedsSummary {
        median_crossing: median_crossing(&crossings),
        runs_with_crossing: crossings.iter().flatten().count(),
        max_resource_crossing: crossings,
        seeds,
    };
    write_json(&out.join("seeds_summary.json"), &summary)?;
    println!(
        "{} runs, {} with a crossing, median crossing generation {}",
        summary.seeds.len(),
        summary.runs_with_crossing,
        summary.median_crossing.map_or("none".into(), |m| m.to_string())
    );
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn sweep(levels: &[f64], scenario: &Path, seeds: &str, out: &Path) -> Result<()> {
    if let Some(l) = levels.iter().find(|&&l| !(l > 0.0 && l <= 1.0)) {
        bail!("level {l} is outside (0, 1]");
    }
    let base = io::load_scenario(scenario)?;
    let seeds = parse_seeds(seeds)?;
    let table = satisfaction_sweep(levels, &base, &seeds)?;
    let mut w = csv_writer(out)?;
    w.write_record(["kind", "level", "seed", "max_resource", "consumption", "mean", "stddev"])?;
    for r in &table.runs {
        w.write_record([
            "run".to_string(),
            r.level.to_string(),
            r.seed.to_string(),
            (r.max_resource + 1).to_string(),
            r.max_resource_consumption.to_string(),
            String::new(),
            String::new(),
        ])?;
    }
    for l in &table.levels {
        w.write_record([
            "aggregate".to_string(),
            l.level.to_string(),
            String::new(),
            String::new(),
            String::new(),
            l.mean.to_string(),
            l.stddev.to_string(),
        ])?;
        println!("level {:<5} mean {:>14.1} stddev {:>12.1} over {} seeds", l.level, l.mean, l.stddev, l.runs);
    }
    w.flush()?;
    Ok(())
}

pub fn report(run_dir: &Path, out: Option<&Path>) -> Result<()> {
    let run = io::load_run(run_dir).with_context(|| format!("cannot load run from {}", run_dir.display()))?;
    let report = build_report(&run.config, &run.records)?;
    let out = out.map_or_else(|| run_dir.join("report"), Path::to_path_buf);
    fs::create_dir_all(&out)?;
    write_json(&out.join("report.json"), &report)?;

    let mut w = csv_writer(&out.join("entropy.csv"))?;
    w.write_record(["generation", "entropy"])?;
    for (r, e) in run.records.iter().zip(&report.entropy) {
        w.write_record([r.generation.to_string(), e.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("agent_utilities.csv"))?;
    w.write_record(["agent", "generations_at_optimum", "first_optimum_generation", "linear", "exponential"])?;
    for a in &report.agents {
        w.write_record([
            a.agent.to_string(),
            a.generations_at_optimum.to_string(),
            a.first_optimum_generation.map_or(String::new(), |g| g.to_string()),
            a.linear.to_string(),
            a.exponential.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("divides.csv"))?;
    w.write_record(["utility", "split", "bottom_count", "top_count", "bottom_sum", "top_sum", "relative_gap", "sum_gap"])?;
    let d = &report.divides;
    let rows: [(&str, &str, &Option<GroupDivide<f64>>); 4] = [
        ("linear", "50/50", &d.linear_50_50),
        ("linear", "20/80", &d.linear_20_80),
        ("exponential", "50/50", &d.exponential_50_50),
        ("exponential", "20/80", &d.exponential_20_80),
    ];
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for (utility, split, g) in rows {
        if let Some(g) = g {
            w.write_record([
                utility.to_string(),
                split.to_string(),
                g.bottom_count.to_string(),
                g.top_count.to_string(),
                g.bottom_sum.to_string(),
                g.top_sum.to_string(),
                opt(g.relative_gap),
                opt(g.sum_gap),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("resource_utility.csv"))?;
    w.write_record(["generation", "consumed", "consumer", "consumer_cumulative", "producer", "producer_cumulative"])?;
    for r in &report.resource_utility {
        w.write_record([
            r.generation.to_string(),
            r.consumed.to_string(),
            r.consumer.to_string(),
            r.consumer_cumulative.to_string(),
            r.producer.to_string(),
            r.producer_cumulative.to_string(),
        ])?;
    }
    w.flush()?;

    match (&d.linear_50_50, &d.exponential_20_80) {
        (Some(lin), Some(exp)) => println!(
            "{} generations; linear 50/50 gap {}; exponential 20/80 gap {} -> {}",
            report.generations,
            opt(lin.relative_gap),
            opt(exp.relative_gap),
            out.display()
        ),
        _ => println!("{} generations -> {}", report.generations, out.display()),
    }
    Ok(())
}

pub fn gen_instance(items: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instance = ProblemInstance::<f64>::random(items, &mut rng)?;
    match out {
        Some(path) => write_json(path, &instance),
        None => print_json(&instance),
    }
}
