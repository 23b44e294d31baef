//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//! epochs = 200
//! epoch_length = 100
//! eta = 0.1
//! lambda0 = [5.0]
//! seeds = [0, 1, 2, 3, 4]
//! initial_state = "random"        # or a state index, or [cell_1, cell_2] for shr
//! output_dir = "runs/shr"
//! feasibility_tol = 0.05
//!
//! [env]
//! kind = "shr"
//! thresholds = [0.25, 0.5, 0.75]
//!
//! [oracle]
//! kind = "rvi"
//! tol = 1e-9
//! max_iter = 200000
//! ```

use std::path::{Path, PathBuf};

use cmg_core::dynamics::FEASIBILITY_TOL;
use cmg_core::envs::ShrConfig;
use cmg_core::oracle::OracleSettings;
use cmg_core::ControlSign;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Number of epochs `K`.
    pub epochs: usize,
    /// Steps per epoch `T0`.
    pub epoch_length: usize,
    pub eta: f64,
    pub lambda0: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_initial_state")]
    pub initial_state: InitialState,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_feasibility_tol")]
    pub feasibility_tol: f64,
    pub env: EnvConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

fn default_initial_state() -> InitialState {
    InitialState::Keyword(StartKeyword::Random)
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_feasibility_tol() -> f64 {
    FEASIBILITY_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKeyword {
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Keyword(StartKeyword),
    State(usize),
    /// 1-based grid cells, one per agent.
    Cells(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Shr(ShrParams),
    /// A JSON game file; see [`crate::gamefile`].
    File { path: PathBuf },
    /// A seeded random chain game.
    Synthetic {
        num_states: usize,
        action_counts: Vec<usize>,
        num_constraints: usize,
        #[serde(default = "yes")]
        identical_interest: bool,
        seed: u64,
    },
}

fn yes() -> bool {
    true
}

/// Stag-Hare-Rest parameters. Missing fields take the standard values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrParams {
    /// One sweep cell per rest threshold.
    pub thresholds: Vec<f64>,
    pub grid_side: usize,
    pub hare_cells: Vec<usize>,
    pub stag_cells: Vec<usize>,
    pub rest_cells: Vec<usize>,
    pub stag_reward: f64,
    pub hare_reward: f64,
    pub kl_weight: f64,
    pub kl_sign: KlSign,
    pub natural_stay_prob: f64,
}

impl Default for ShrParams {
    fn default() -> Self {
        let d = ShrConfig::default();
        Self {
            thresholds: vec![0.25, 0.5, 0.75],
            grid_side: d.grid_side,
            hare_cells: d.hare_cells,
            stag_cells: d.stag_cells,
            rest_cells: d.rest_cells,
            stag_reward: d.stag_reward,
            hare_reward: d.hare_reward,
            kl_weight: d.kl_weight,
            kl_sign: KlSign::Penalty,
            natural_stay_prob: d.natural_stay_prob,
        }
    }
}

impl ShrParams {
    pub fn to_config(&self, threshold: f64) -> ShrConfig {
        ShrConfig {
            grid_side: self.grid_side,
            hare_cells: self.hare_cells.clone(),
            stag_cells: self.stag_cells.clone(),
            rest_cells: self.rest_cells.clone(),
            stag_reward: self.stag_reward,
            hare_reward: self.hare_reward,
            rest_threshold: threshold,
            kl_weight: self.kl_weight,
            kl_sign: self.kl_sign.into(),
            natural_stay_prob: self.natural_stay_prob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlSign {
    Penalty,
    Bonus,
}

impl From<KlSign> for ControlSign {
    fn from(s: KlSign) -> Self {
        match s {
            KlSign::Penalty => ControlSign::Penalty,
            KlSign::Bonus => ControlSign::Bonus,
        }
    }
}

impl From<ControlSign> for KlSign {
    fn from(s: ControlSign) -> Self {
        match s {
            ControlSign::Penalty => KlSign::Penalty,
            ControlSign::Bonus => KlSign::Bonus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Rvi,
    OptimisticPi,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub tol: f64,
    pub max_iter: usize,
    /// Evaluation sweeps between improvements (optimistic PI).
    pub sweeps: usize,
    pub td_step: f64,
    /// Record each agent's best-response residual every epoch.
    pub track_best_response: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let s = OracleSettings::default();
        Self {
            kind: OracleKind::Rvi,
            tol: s.tol,
            max_iter: s.max_iter,
            sweeps: s.sweeps,
            td_step: s.td_step,
            track_best_response: false,
        }
    }
}

impl OracleConfig {
    pub fn settings(&self) -> OracleSettings {
        OracleSettings {
            tol: self.tol,
            max_iter: self.max_iter,
            sweeps: self.sweeps,
            td_step: self.td_step,
        }
    }
}

impl RunConfig {
    /// The standard Stag-Hare-Rest sweep.
    pub fn shr_default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            epochs: 200,
            epoch_length: 100,
            eta: 0.1,
            lambda0: vec![5.0],
            seeds: vec![0, 1, 2, 3, 4],
            initial_state: default_initial_state(),
            output_dir: default_output_dir(),
            feasibility_tol: FEASIBILITY_TOL,
            env: EnvConfig::Shr(ShrParams::default()),
            oracle: OracleConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // relative game files resolve against the config's directory
        if let EnvConfig::File { path: game } = &mut cfg.env {
            if game.is_relative() {
                if let Some(dir) = path.parent() {
                    *game = dir.join(&*game);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            CliError::config(field_of(&message), message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: &str| Err(CliError::config(field, msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail("schema_version", &format!("expected {SCHEMA_VERSION}"));
        }
        if self.epochs == 0 {
            return fail("epochs", "must be at least 1");
        }
        if self.epoch_length == 0 {
            return fail("epoch_length", "must be at least 1");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return fail("eta", "must be positive and finite");
        }
        if self.lambda0.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return fail("lambda0", "entries must be finite and nonnegative");
        }
        if self.seeds.is_empty() {
            return fail("seeds", "must list at least one seed");
        }
        if !(self.feasibility_tol >= 0.0) {
            return fail("feasibility_tol", "must be nonnegative");
        }
        if !(self.oracle.tol >= 0.0) || self.oracle.max_iter == 0 {
            return fail("oracle", "tol must be nonnegative and max_iter positive");
        }
        match &self.env {
            EnvConfig::Shr(p) => {
                if p.thresholds.is_empty() {
                    return fail("env.thresholds", "must list at least one threshold");
                }
                if self.lambda0.len() != 1 {
                    return fail("lambda0", "the stag-hare-rest game has one constraint");
                }
                for &b in &p.thresholds {
                    p.to_config(b)
                        .validate()
                        .map_err(|e| CliError::config("env", e.to_string()))?;
                }
                if let InitialState::Cells(c) = &self.initial_state {
                    let n = p.grid_side * p.grid_side;
                    if c.len() != 2 || c.iter().any(|&x| x == 0 || x > n) {
                        return fail("initial_state", &format!("expected two cells in 1..={n}"));
                    }
                }
            }
            EnvConfig::Synthetic {
                num_states,
                action_counts,
                num_constraints,
                ..
            } => {
                if *num_states == 0 || action_counts.len() < 2 || action_counts.contains(&0) {
                    return fail("env", "need states, at least two agents and nonempty action sets");
                }
                if self.lambda0.len() != *num_constraints {
                    return fail("lambda0", "length must equal num_constraints");
                }
            }
            EnvConfig::File { .. } => {}
        }
        if let (InitialState::Cells(_), false) = (&self.initial_state, matches!(self.env, EnvConfig::Shr(_))) {
            return fail("initial_state", "cell coordinates need a grid environment");
        }
        Ok(())
    }
}

/// Pulls the offending field name out of a deserializer message.
fn field_of(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .filter(|s| !s.is_empty())
        .unwrap_or("config")
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
epochs = 3
epoch_length = 4
eta = 0.1
lambda0 = [0.0]
seeds = [1]

[env]
kind = "synthetic"
num_states = 2
action_counts = [1, 1]
num_constraints = 1
seed = 0
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.initial_state, InitialState::Keyword(StartKeyword::Random));
        assert_eq!(cfg.oracle.kind, OracleKind::Rvi);
        assert_eq!(cfg.feasibility_tol, 0.05);
    }

    #[test]
    fn missing_eta_names_the_field() {
        let text = MINIMAL.replace("eta = 0.1\n", "");
        match RunConfig::parse(&text) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "eta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        for (from, to, field) in [
            ("eta = 0.1", "eta = 0.0", "eta"),
            ("epochs = 3", "epochs = 0", "epochs"),
            ("seeds = [1]", "seeds = []", "seeds"),
            ("lambda0 = [0.0]", "lambda0 = [-1.0]", "lambda0"),
            ("lambda0 = [0.0]", "lambda0 = [0.0, 1.0]", "lambda0"),
        ] {
            match RunConfig::parse(&MINIMAL.replace(from, to)) {
                Err(CliError::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{to}: {other:?}"),
            }
        }
    }

    #[test]
    fn initial_state_forms() {
        let cfg = RunConfig::parse(&MINIMAL.replace("seeds = [1]", "seeds = [1]\ninitial_state = 1")).unwrap();
        assert_eq!(cfg.initial_state, InitialState::State(1));
        let mut shr = RunConfig::shr_default();
        shr.initial_state = InitialState::Cells(vec![12, 14]);
        assert_eq!(RunConfig::parse(&shr.to_toml()).unwrap(), shr);
    }

    #[test]
    fn shr_default_round_trips() {
        let cfg = RunConfig::shr_default();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
