//! Expands a run configuration into sweep cells and plays each one.

use std::path::{Path, PathBuf};

use cmg_core::dynamics::{
    feasibility_curve, final_window_reward, play, slackness_bound, slackness_metric, EpisodeRecord,
    PlayConfig, StartState,
};
use cmg_core::envs::{build_chain_game, build_shr, ChainGameParams, ShrConfig};
use cmg_core::oracle::{
    BruteForceOracle, NashOracle, OptimisticPolicyIteration, RelativeValueIteration,
};
use cmg_core::ConstrainedMarkovGame;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{write_cell, write_summary};
use crate::config::{EnvConfig, InitialState, OracleConfig, OracleKind, RunConfig};
use crate::error::{from_core, CliError, Result};
use crate::gamefile::read_game;

/// One (threshold, seed) combination of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub name: String,
    pub seed: u64,
    /// Rest threshold for grid sweeps; `None` keeps the game's thresholds.
    pub threshold: Option<f64>,
}

pub fn cells(cfg: &RunConfig) -> Vec<Cell> {
    match &cfg.env {
        EnvConfig::Shr(p) => p
            .thresholds
            .iter()
            .flat_map(|&b| {
                cfg.seeds.iter().map(move |&seed| Cell {
                    name: format!("b{b}_seed{seed}"),
                    seed,
                    threshold: Some(b),
                })
            })
            .collect(),
        _ => cfg
            .seeds
            .iter()
            .map(|&seed| Cell {
                name: format!("seed{seed}"),
                seed,
                threshold: None,
            })
            .collect(),
    }
}

pub fn make_oracle(cfg: &OracleConfig) -> Box<dyn NashOracle + Send + Sync> {
    let settings = cfg.settings();
    match cfg.kind {
        OracleKind::Rvi => Box::new(RelativeValueIteration { settings }),
        OracleKind::OptimisticPi => Box::new(OptimisticPolicyIteration { settings }),
        OracleKind::BruteForce => Box::new(BruteForceOracle),
    }
}

/// The game of one cell, with the grid configuration when there is one.
pub fn build_env(cfg: &RunConfig, cell: &Cell) -> Result<(ConstrainedMarkovGame, Option<ShrConfig>)> {
    match &cfg.env {
        EnvConfig::Shr(p) => {
            let shr = p.to_config(cell.threshold.unwrap_or(p.thresholds[0]));
            let game = build_shr(&shr).map_err(|e| CliError::config("env", e.to_string()))?;
            Ok((game, Some(shr)))
        }
        EnvConfig::File { path } => {
            let game = read_game(path)?;
            if game.num_constraints() != cfg.lambda0.len() {
                return Err(CliError::config("lambda0", "length must equal the game's constraint count"));
            }
            Ok((game, None))
        }
        EnvConfig::Synthetic {
            num_states,
            action_counts,
            num_constraints,
            identical_interest,
            seed,
        } => {
            let params = ChainGameParams {
                num_states: *num_states,
                action_counts: action_counts.clone(),
                num_constraints: *num_constraints,
                identical_interest: *identical_interest,
                seed: *seed,
            };
            let game = build_chain_game(&params)
                .map_err(|e| CliError::config("env", e.to_string()))?
                .game;
            Ok((game, None))
        }
    }
}

pub fn start_state(cfg: &RunConfig, game: &ConstrainedMarkovGame, shr: Option<&ShrConfig>) -> Result<StartState> {
    let s = match (&cfg.initial_state, shr) {
        (InitialState::Keyword(_), _) => return Ok(StartState::Uniform),
        (InitialState::State(s), _) => *s,
        (InitialState::Cells(c), Some(shr)) => shr.joint_state(c[0], c[1]),
        (InitialState::Cells(_), None) => {
            return Err(CliError::config("initial_state", "cell coordinates need a grid environment"))
        }
    };
    if s >= game.num_states() {
        return Err(CliError::config(
            "initial_state",
            format!("state {s} out of range 0..{}", game.num_states()),
        ));
    }
    Ok(StartState::Fixed(s))
}

pub fn play_config(cfg: &RunConfig, start: StartState) -> PlayConfig {
    PlayConfig {
        epochs: cfg.epochs,
        epoch_length: cfg.epoch_length,
        step_size: cfg.eta,
        lambda0: cfg.lambda0.clone(),
        start,
        best_response: cfg.oracle.track_best_response.then(|| cfg.oracle.settings()),
    }
}

/// Plays one cell.
pub fn run_cell(cfg: &RunConfig, cell: &Cell) -> Result<(ConstrainedMarkovGame, EpisodeRecord)> {
    let (game, shr) = build_env(cfg, cell)?;
    let start = start_state(cfg, &game, shr.as_ref())?;
    let oracle = make_oracle(&cfg.oracle);
    let record = play(&game, &play_config(cfg, start), oracle.as_ref(), cell.seed).map_err(from_core)?;
    Ok((game, record))
}

/// Headline numbers of one finished cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub name: String,
    pub seed: u64,
    pub thresholds: Vec<f64>,
    pub start_state: usize,
    pub epochs: usize,
    pub epoch_length: usize,
    /// Mean cost per constraint over the last quarter of steps.
    pub window_cost: Vec<f64>,
    pub feasible: Vec<bool>,
    /// Mean base reward per agent over the last quarter of steps.
    pub window_reward: Vec<f64>,
    pub final_running_cost: Vec<f64>,
    pub final_lambda: Vec<f64>,
    pub max_lambda_norm: f64,
    pub slackness: f64,
    pub slackness_bound: f64,
}

impl CellSummary {
    pub fn new(name: &str, record: &EpisodeRecord, feasibility_tol: f64) -> Self {
        let feas = feasibility_curve(record, feasibility_tol);
        let m = record.thresholds.len();
        let steps = record.num_steps();
        Self {
            name: name.to_string(),
            seed: record.seed,
            thresholds: record.thresholds.clone(),
            start_state: record.start_state,
            epochs: record.num_epochs(),
            epoch_length: record.config.epoch_length,
            window_cost: feas.window_average.clone(),
            feasible: feas.feasible.clone(),
            window_reward: final_window_reward(record),
            final_running_cost: record.metrics.running_avg_cost[(steps - 1) * m..steps * m].to_vec(),
            final_lambda: record.lambda_trace.last().map(|l| l.values().to_vec()).unwrap_or_default(),
            max_lambda_norm: record.metrics.max_lambda_norm.last().copied().unwrap_or(0.0),
            slackness: slackness_metric(record),
            slackness_bound: slackness_bound(record),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    pub all_feasible: bool,
}

/// Runs every cell on a pool of `threads` workers (all cores when `None`),
/// writes each cell's artifacts into its own directory under `out`, then the
/// top-level summary.
pub fn run(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Result<Summary> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config("threads", e.to_string()))?;
    let cells = cells(cfg);
    let results: Vec<Result<CellSummary>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let (game, record) = run_cell(cfg, cell)?;
                let summary = CellSummary::new(&cell.name, &record, cfg.feasibility_tol);
                let dir: PathBuf = out.join(&cell.name);
                write_cell(&dir, cfg, cell, &game, &record, &summary)?;
                Ok(summary)
            })
            .collect()
    });
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = Summary {
        all_feasible: cells.iter().all(|c| c.feasible.iter().all(|&f| f)),
        cells,
    };
    write_summary(out, &summary)?;
    Ok(summary)
}
