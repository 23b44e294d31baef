//! Per-cell CSV artifacts, the run manifest and the sweep summary.
//!
//! Column orders:
//! - `lambda_trace.csv`: `epoch, lambda_0, …` (rows for `λ_0 … λ_K`)
//! - `metrics.csv`: `t, running_avg_cost_0, …, running_avg_reward_0, …`
//!   where `t` is the number of steps averaged
//! - `slackness.csv`: `epoch, partial_average` with `epoch = 1..=K`
//! - `occupancy.csv`: `state, count`
//! - `occupancy_grid.csv` (grid games): `agent, row, col, count`

use std::collections::BTreeMap;
use std::path::Path;

use cmg_core::dynamics::{occupancy_counts, EpisodeRecord};
use cmg_core::ConstrainedMarkovGame;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{EnvConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::runner::{Cell, CellSummary, Summary};

pub const MANIFEST: &str = "run_manifest.json";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// The configuration narrowed to this cell.
    pub config: RunConfig,
    pub seed: u64,
    pub start_state: usize,
    pub summary: CellSummary,
    /// File name to lowercase hex SHA-256.
    pub checksums: BTreeMap<String, String>,
}

type Rows = Vec<Vec<String>>;

fn write_csv(path: &Path, header: &[String], rows: Rows) -> Result<()> {
    let io = |e: csv::Error| CliError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |k| format!("{prefix}_{k}"))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes the CSVs and the manifest of one finished cell into `dir`.
pub fn write_cell(
    dir: &Path,
    cfg: &RunConfig,
    cell: &Cell,
    game: &ConstrainedMarkovGame,
    record: &EpisodeRecord,
    summary: &CellSummary,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let m = record.thresholds.len();
    let n = game.num_agents();
    let mut files = Vec::new();

    let mut header = vec!["epoch".to_string()];
    header.extend(columns("lambda", m));
    let rows = record
        .lambda_trace
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let mut row = vec![k.to_string()];
            row.extend(l.values().iter().map(f64::to_string));
            row
        })
        .collect();
    write_csv(&dir.join("lambda_trace.csv"), &header, rows)?;
    files.push("lambda_trace.csv");

    let mut header = vec!["t".to_string()];
    header.extend(columns("running_avg_cost", m));
    header.extend(columns("running_avg_reward", n));
    let mt = &record.metrics;
    let rows = (0..record.num_steps())
        .map(|t| {
            let mut row = vec![(t + 1).to_string()];
            row.extend(mt.running_avg_cost[t * m..(t + 1) * m].iter().map(f64::to_string));
            row.extend(mt.running_avg_reward[t * n..(t + 1) * n].iter().map(f64::to_string));
            row
        })
        .collect();
    write_csv(&dir.join("metrics.csv"), &header, rows)?;
    files.push("metrics.csv");

    let header = vec!["epoch".to_string(), "partial_average".to_string()];
    let rows = mt
        .slackness_partial
        .iter()
        .enumerate()
        .map(|(k, v)| vec![(k + 1).to_string(), v.to_string()])
        .collect();
    write_csv(&dir.join("slackness.csv"), &header, rows)?;
    files.push("slackness.csv");

    let occ = occupancy_counts(game, record);
    let header = vec!["state".to_string(), "count".to_string()];
    let rows = occ
        .per_state
        .iter()
        .enumerate()
        .map(|(s, c)| vec![s.to_string(), c.to_string()])
        .collect();
    write_csv(&dir.join("occupancy.csv"), &header, rows)?;
    files.push("occupancy.csv");

    if let (Some(cells), Some(layout)) = (&occ.per_agent_cell, game.layout()) {
        let header = ["agent", "row", "col", "count"].map(String::from).to_vec();
        let rows = cells
            .iter()
            .enumerate()
            .flat_map(|(i, counts)| {
                counts.iter().enumerate().map(move |(c, k)| {
                    vec![
                        i.to_string(),
                        (c / layout.cols).to_string(),
                        (c % layout.cols).to_string(),
                        k.to_string(),
                    ]
                })
            })
            .collect();
        write_csv(&dir.join("occupancy_grid.csv"), &header, rows)?;
        files.push("occupancy_grid.csv");
    }

    let mut checksums = BTreeMap::new();
    for f in files {
        checksums.insert(f.to_string(), sha256_file(&dir.join(f))?);
    }
    let mut config = cfg.clone();
    config.seeds = vec![cell.seed];
    if let (EnvConfig::Shr(p), Some(b)) = (&mut config.env, cell.threshold) {
        p.thresholds = vec![b];
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        seed: cell.seed,
        start_state: record.start_state,
        summary: summary.clone(),
        checksums,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

pub fn write_summary(out: &Path, summary: &Summary) -> Result<()> {
    write_json(&out.join(SUMMARY), summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    read_json(&dir.join(MANIFEST))
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    read_json(&dir.join(SUMMARY))
}

/// Names of files whose contents no longer match the manifest.
pub fn verify_checksums(dir: &Path) -> Result<Vec<String>> {
    let manifest = read_manifest(dir)?;
    let mut bad = Vec::new();
    for (name, sum) in &manifest.checksums {
        if sha256_file(&dir.join(name))? != *sum {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}
