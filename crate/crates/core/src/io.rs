//! On-disk formats for runs: generations CSV, per-agent CSV, summary and
//! manifest JSON, and the canonical JSON used for config hashing.
//!
//! Resource numbers in file formats are 1-based (`r1..rM`), agent numbers are
//! the 1-based agent ids.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::knapsack::{bits_to_string, parse_bits};
use crate::sim::{GenerationRecord, RunOutput, ScenarioConfig};

pub const GENERATIONS_SCHEMA: &str = "generations/v1";
pub const AGENTS_SCHEMA: &str = "agents/v1";
pub const SUMMARY_SCHEMA: &str = "summary/v1";
pub const MANIFEST_SCHEMA: &str = "manifest/v1";

pub const SCENARIO_FILE: &str = "scenario.json";
pub const GENERATIONS_FILE: &str = "generations.csv";
pub const AGENTS_FILE: &str = "agents.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Serializes with sorted object keys, integers verbatim and every other
/// number in exponent form with 9 significant digits.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                write!(out, "{:.8e}", n.as_f64().unwrap()).unwrap();
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
    }
}

/// Hex SHA-256 of the canonical JSON form of `config`.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let value = serde_json::to_value(config).expect("scenario config serializes");
    hex::encode(Sha256::digest(canonical_json(&value).as_bytes()))
}

pub fn generations_header(items: usize) -> Vec<String> {
    let mut h = vec!["generation".to_string()];
    h.extend((1..=items).map(|i| format!("consumed_r{i}")));
    h.extend((1..=items).map(|i| format!("cumulative_r{i}")));
    h.push("entropy".into());
    h.push("agents_at_optimum".into());
    h
}

pub const AGENTS_HEADER: [&str; 5] = ["generation", "agent", "value", "at_optimum", "bits"];

pub fn write_generations_csv<W: Write>(records: &[GenerationRecord], items: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(generations_header(items))?;
    for r in records {
        let mut row = vec![r.generation.to_string()];
        row.extend(r.per_resource_consumed.iter().map(u64::to_string));
        row.extend(r.per_resource_cumulative.iter().map(u64::to_string));
        row.push(r.entropy.to_string());
        row.push(r.agents_at_optimum.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_agents_csv<W: Write>(records: &[GenerationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGENTS_HEADER)?;
    for r in records {
        for (j, value) in r.per_agent_value.iter().enumerate() {
            let bits = r.per_agent_bits[j].as_deref().map_or_else(|| "-".to_string(), bits_to_string);
            w.write_record([
                r.generation.to_string(),
                (j + 1).to_string(),
                value.to_string(),
                u8::from(r.per_agent_at_optimum[j]).to_string(),
                bits,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn malformed(file: &str, reason: impl Into<String>) -> Error {
    Error::Malformed { file: file.to_string(), reason: reason.into() }
}

fn field<T: std::str::FromStr>(file: &str, row: &csv::StringRecord, idx: usize, line: u64) -> Result<T> {
    let raw = row.get(idx).ok_or_else(|| malformed(file, format!("line {line}: missing column {}", idx + 1)))?;
    raw.parse().map_err(|_| malformed(file, format!("line {line}, column {}: cannot parse {raw:?}", idx + 1)))
}

/// Rebuilds generation records from the two CSV files of a run.
pub fn read_records<R1: Read, R2: Read>(generations: R1, agents: R2) -> Result<Vec<GenerationRecord>> {
    let gfile = GENERATIONS_FILE;
    let mut rdr = csv::Reader::from_reader(generations);
    let header = rdr.headers()?.clone();
    if header.len() < 4 || (header.len() - 3) % 2 != 0 {
        return Err(malformed(gfile, "unexpected column count"));
    }
    let m = (header.len() - 3) / 2;
    let expected = generations_header(m);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(malformed(gfile, format!("header does not match {GENERATIONS_SCHEMA}")));
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let consumed = (0..m).map(|i| field(gfile, &row, 1 + i, line)).collect::<Result<Vec<u64>>>()?;
        let cumulative = (0..m).map(|i| field(gfile, &row, 1 + m + i, line)).collect::<Result<Vec<u64>>>()?;
        records.push(GenerationRecord {
            generation: field(gfile, &row, 0, line)?,
            per_resource_consumed: consumed,
            per_resource_cumulative: cumulative,
            entropy: field(gfile, &row, 1 + 2 * m, line)?,
            agents_at_optimum: field(gfile, &row, 2 + 2 * m, line)?,
            per_agent_value: Vec::new(),
            per_agent_at_optimum: Vec::new(),
            per_agent_bits: Vec::new(),
        });
    }

    let afile = AGENTS_FILE;
    let mut rdr = csv::Reader::from_reader(agents);
    if rdr.headers()?.iter().ne(AGENTS_HEADER) {
        return Err(malformed(afile, format!("header does not match {AGENTS_SCHEMA}")));
    }
    let mut cursor = 0usize;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let generation: usize = field(afile, &row, 0, line)?;
        let agent: usize = field(afile, &row, 1, line)?;
        while cursor < records.len() && records[cursor].generation != generation {
            cursor += 1;
        }
        let rec = records
            .get_mut(cursor)
            .ok_or_else(|| malformed(afile, format!("line {line}: generation {generation} not in {gfile}")))?;
        if agent != rec.per_agent_value.len() + 1 {
            return Err(malformed(afile, format!("line {line}: agents out of order")));
        }
        let at_opt: u8 = field(afile, &row, 3, line)?;
        let bits = match row.get(4) {
            Some("-") => None,
            Some(s) => Some(parse_bits(s).map_err(|e| malformed(afile, format!("line {line}: {e}")))?),
            None => return Err(malformed(afile, format!("line {line}: missing bits"))),
        };
        rec.per_agent_value.push(field(afile, &row, 2, line)?);
        rec.per_agent_at_optimum.push(at_opt == 1);
        rec.per_agent_bits.push(bits);
    }
    let n = records.first().map_or(0, |r| r.per_agent_value.len());
    if records.iter().any(|r| r.per_agent_value.len() != n) {
        return Err(malformed(afile, "agent rows missing for some generations"));
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub generations_run: usize,
    pub optimal_value: f64,
    pub optimal_bits: String,
    /// 1-based number of the most consumed resource; absent for an empty run.
    pub max_resource: Option<usize>,
    pub max_resource_crossing: Option<usize>,
    pub crossing_generation: Vec<Option<usize>>,
    pub cumulative: Vec<u64>,
    pub reserves: Vec<f64>,
    pub agents_at_optimum_final: usize,
}

impl RunSummary {
    pub fn new(config: &ScenarioConfig, out: &RunOutput) -> Self {
        let ran = !out.records.is_empty();
        Self {
            schema: SUMMARY_SCHEMA.into(),
            master_seed: config.master_seed,
            config_hash: config_hash(config),
            generations_run: out.records.len(),
            optimal_value: out.optimum.optimal_value,
            optimal_bits: out.optimum.solution.bit_string(),
            max_resource: ran.then(|| out.ledger.max_resource() + 1),
            max_resource_crossing: if ran { out.max_resource_crossing() } else { None },
            crossing_generation: out.ledger.crossing_generation.clone(),
            cumulative: out.ledger.cumulative.clone(),
            reserves: out.ledger.reserves.clone(),
            agents_at_optimum_final: out.records.last().map_or(0, |r| r.agents_at_optimum),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub config_file: String,
    pub output_paths: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the scenario copy, both CSVs and the summary into `dir`, returning
/// the paths written.
pub fn write_run(dir: &Path, config: &ScenarioConfig, out: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let scenario = dir.join(SCENARIO_FILE);
    write_json(&scenario, config)?;

    let generations = dir.join(GENERATIONS_FILE);
    write_generations_csv(&out.records, config.instance.item_count(), fs::File::create(&generations)?)?;
    let agents = dir.join(AGENTS_FILE);
    write_agents_csv(&out.records, fs::File::create(&agents)?)?;

    let summary = dir.join(SUMMARY_FILE);
    write_json(&summary, &RunSummary::new(config, out))?;
    Ok(vec![scenario, generations, agents, summary])
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, manifest)?;
    Ok(path)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| malformed(&path.display().to_string(), e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// A completed run read back from its directory.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub config: ScenarioConfig,
    pub records: Vec<GenerationRecord>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let config = load_scenario(&dir.join(SCENARIO_FILE))?;
    let records = read_records(fs::File::open(dir.join(GENERATIONS_FILE))?, fs::File::open(dir.join(AGENTS_FILE))?)?;
    if records.iter().any(|r| r.per_resource_consumed.len() != config.instance.item_count()) {
        return Err(malformed(GENERATIONS_FILE, "resource columns do not match the scenario"));
    }
    if records.iter().any(|r| r.per_agent_value.len() != config.agent_count) {
        return Err(malformed(AGENTS_FILE, "agent count does not match the scenario"));
    }
    Ok(LoadedRun { config, records })
}
