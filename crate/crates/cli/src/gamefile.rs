//! JSON game files.
//!
//! Tables are flat, row-major, with the joint action fastest:
//! `reward[(i * S + s) * J + a]`, `cost[(j * S + s) * J + a]`. The kernel is
//! either `kernel[s * J + a] = [[next, p], ...]` or, for deterministic games,
//! the compact `next_state[s * J + a]`. `allowed` defaults to every action.

use std::path::Path;

use cmg_core::{ConstrainedMarkovGame, ControlCost, GameParts, GridLayout};
use serde::{Deserialize, Serialize};

use crate::config::KlSign;
use crate::error::{CliError, Result};

pub const GAME_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub schema_version: u32,
    pub num_states: usize,
    pub action_counts: Vec<usize>,
    /// `allowed[s * N + i]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<Vec<usize>>>,
    pub reward: Vec<f64>,
    #[serde(default)]
    pub cost: Vec<f64>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<(usize, f64)>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_state: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub rows: usize,
    pub cols: usize,
    /// `cell_of[agent][state]`, 0-based cells.
    pub cell_of: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlFile {
    pub weight: f64,
    pub sign: KlSign,
    /// `natural[agent][cell] = [[cell, p], ...]`.
    pub natural: Vec<Vec<Vec<(usize, f64)>>>,
    /// `destination[agent][cell][action]`.
    pub destination: Vec<Vec<Vec<usize>>>,
}

impl GameFile {
    pub fn from_game(game: &ConstrainedMarkovGame) -> Self {
        let p = game.parts();
        let deterministic = p.kernel.iter().all(|row| row.len() == 1 && row[0].1 == 1.0);
        let full = (0..p.num_states).all(|s| {
            (0..p.action_counts.len()).all(|i| game.allowed(s, i).len() == p.action_counts[i])
        });
        GameFile {
            schema_version: GAME_SCHEMA_VERSION,
            num_states: p.num_states,
            action_counts: p.action_counts.clone(),
            allowed: (!full).then(|| p.allowed.clone()),
            reward: p.reward.clone(),
            cost: p.cost.clone(),
            thresholds: p.thresholds.clone(),
            kernel: (!deterministic).then(|| p.kernel.clone()),
            next_state: deterministic.then(|| p.kernel.iter().map(|row| row[0].0).collect()),
            layout: p.layout.as_ref().map(|l| LayoutFile {
                rows: l.rows,
                cols: l.cols,
                cell_of: l.cell_of.clone(),
            }),
            control: p.control.as_ref().map(|c| ControlFile {
                weight: c.weight,
                sign: c.sign.into(),
                natural: c.natural.clone(),
                destination: c.destination.clone(),
            }),
        }
    }

    pub fn into_game(self) -> Result<ConstrainedMarkovGame> {
        if self.schema_version != GAME_SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("game file schema {} unsupported", self.schema_version),
            ));
        }
        let kernel = match (self.kernel, self.next_state) {
            (Some(k), None) => k,
            (None, Some(n)) => n.into_iter().map(|t| vec![(t, 1.0)]).collect(),
            _ => {
                return Err(CliError::config(
                    "kernel",
                    "give exactly one of `kernel` and `next_state`",
                ))
            }
        };
        let allowed = self.allowed.unwrap_or_else(|| {
            (0..self.num_states)
                .flat_map(|_| self.action_counts.iter().map(|&c| (0..c).collect()))
                .collect()
        });
        let parts = GameParts {
            num_states: self.num_states,
            action_counts: self.action_counts,
            allowed,
            reward: self.reward,
            cost: self.cost,
            thresholds: self.thresholds,
            kernel,
            layout: self.layout.map(|l| GridLayout {
                rows: l.rows,
                cols: l.cols,
                cell_of: l.cell_of,
            }),
            control: self.control.map(|c| ControlCost {
                weight: c.weight,
                sign: c.sign.into(),
                natural: c.natural,
                destination: c.destination,
            }),
        };
        let game = ConstrainedMarkovGame::new(parts).map_err(|e| CliError::config("game", e.to_string()))?;
        let report = game.validate();
        if !report.is_valid() {
            return Err(CliError::config("game", report.violations.join("; ")));
        }
        Ok(game)
    }
}

pub fn read_game(path: &Path) -> Result<ConstrainedMarkovGame> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: GameFile =
        serde_json::from_str(&text).map_err(|e| CliError::config("game", format!("{}: {e}", path.display())))?;
    file.into_game()
}

pub fn write_game(path: &Path, game: &ConstrainedMarkovGame) -> Result<()> {
    let text = serde_json::to_string(&GameFile::from_game(game)).expect("game serializes");
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cmg_core::envs::{build_chain_game, build_shr, ChainGameParams, ShrConfig};

    fn round_trip(game: &ConstrainedMarkovGame) -> ConstrainedMarkovGame {
        let text = serde_json::to_string(&GameFile::from_game(game)).unwrap();
        serde_json::from_str::<GameFile>(&text).unwrap().into_game().unwrap()
    }

    #[test]
    fn shr_round_trips_through_compact_kernel() {
        let game = build_shr(&ShrConfig::default()).unwrap();
        let file = GameFile::from_game(&game);
        assert!(file.next_state.is_some() && file.kernel.is_none());
        assert!(round_trip(&game) == game);
    }

    #[test]
    fn stochastic_game_round_trips() {
        let game = build_chain_game(&ChainGameParams {
            num_states: 3,
            action_counts: vec![2, 2],
            num_constraints: 1,
            identical_interest: false,
            seed: 4,
        })
        .unwrap()
        .game;
        assert!(round_trip(&game) == game);
    }

    #[test]
    fn bad_kernel_row_is_a_config_error() {
        let text = r#"{"schema_version":1,"num_states":1,"action_counts":[1,1],
            "reward":[0,0],"kernel":[[[0,0.5]]]}"#;
        let err = serde_json::from_str::<GameFile>(text).unwrap().into_game().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
