//! Property suites behind `cmg verify`.

use cmg_core::diagnostics::{danskin_sweep, oracle_equivalence, unbiased_rollout, PropertyReport};
use cmg_core::envs::{build_shr, ShrConfig};
use cmg_core::oracle::OracleSettings;
use cmg_core::ProductPolicy;
use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyEntry {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    pub failures: usize,
    pub measured: f64,
    pub detail: String,
}

impl From<PropertyReport> for PropertyEntry {
    fn from(r: PropertyReport) -> Self {
        Self {
            name: r.name.to_string(),
            passed: r.passed(),
            trials: r.trials,
            failures: r.failures,
            measured: r.measured,
            detail: r.detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub level: String,
    pub properties: Vec<PropertyEntry>,
    pub failures: usize,
}

pub const ROLLOUT_STEPS: usize = 100_000;

/// Quick: oracle against enumeration on 10 games. Full adds 100 Danskin
/// trials and a long uniform-policy rollout on the grid game.
pub fn verify(level: Level, settings: &OracleSettings) -> Result<VerifyReport> {
    let mut properties: Vec<PropertyEntry> = vec![oracle_equivalence(10, 0, settings)?.into()];
    if level == Level::Full {
        properties.push(danskin_sweep(100, 1, settings)?.into());
        let cfg = ShrConfig::default();
        let game = build_shr(&cfg)?;
        let pi = ProductPolicy::uniform(&game);
        let chk = unbiased_rollout(&game, &pi, 0, cfg.joint_state(12, 14), ROLLOUT_STEPS, 100, 0)?;
        properties.push(PropertyEntry {
            name: "unbiased_rollout".into(),
            passed: chk.within(3.0),
            trials: 1,
            failures: usize::from(!chk.within(3.0)),
            measured: chk.z_score(),
            detail: format!(
                "mean {:.5} vs exact {:.5}, {:.2} standard errors",
                chk.mean,
                chk.exact,
                chk.z_score()
            ),
        });
    }
    let failures = properties.iter().map(|p| p.failures).sum();
    Ok(VerifyReport {
        level: format!("{level:?}").to_lowercase(),
        properties,
        failures,
    })
}
