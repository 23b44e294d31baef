//! Seeded property suites: oracle against enumeration, the Danskin
//! inequality at oracle policies, and rollout means against exact
//! stationary values.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::rollout_epoch;
use crate::envs::{build_chain_game, ChainGameParams};
use crate::error::Result;
use crate::game::{evaluate_from, ConstrainedMarkovGame, ProductPolicy};
use crate::lagrangian::build_lagrangian_game;
use crate::oracle::{
    best_deterministic_gain, danskin_check, NashOracle, OracleSettings, RelativeValueIteration,
};

/// Largest allowed gap between the oracle gain and the enumerated optimum.
pub const EQUIVALENCE_TOL: f64 = 1e-6;

/// Outcome of one property suite.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Worst measured value of the suite's statistic.
    pub measured: f64,
    pub detail: String,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Small identical-interest game drawn for trial `seed`: 2 to 4 states,
/// 2 or 3 actions per agent.
fn small_game(seed: u64, constraints: usize) -> Result<ConstrainedMarkovGame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let params = ChainGameParams {
        num_states: rng.gen_range(2..=4),
        action_counts: (0..2).map(|_| rng.gen_range(2..=3)).collect(),
        num_constraints: constraints,
        identical_interest: true,
        seed,
    };
    Ok(build_chain_game(&params)?.game)
}

/// Compares the relative-value-iteration gain with the best enumerated
/// deterministic policy on `trials` random games.
pub fn oracle_equivalence(trials: usize, seed: u64, settings: &OracleSettings) -> Result<PropertyReport> {
    let oracle = RelativeValueIteration { settings: *settings };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for k in 0..trials {
        let game = small_game(seed.wrapping_add(k as u64), 1)?;
        let lambda = [rng.gen_range(0.0..2.0)];
        let lgame = build_lagrangian_game(&game, &lambda)?;
        let res = oracle.solve(&lgame, None)?;
        let (_, best) = best_deterministic_gain(&lgame, 0, 0)?;
        let gap = (res.gain[0] - best).abs();
        worst = worst.max(gap);
        if !res.converged || gap > EQUIVALENCE_TOL {
            failures += 1;
        }
    }
    Ok(PropertyReport {
        name: "oracle_equivalence",
        trials,
        failures,
        measured: worst,
        detail: format!("max |rvi - enumeration| = {worst:.3e} (tol {EQUIVALENCE_TOL:e})"),
    })
}

/// Checks the Danskin inequality for every agent on `trials` random
/// (game, λ_k, λ⁺) triples. Even trials use the default `λ⁺ = 0`.
pub fn danskin_sweep(trials: usize, seed: u64, settings: &OracleSettings) -> Result<PropertyReport> {
    let oracle = RelativeValueIteration { settings: *settings };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for k in 0..trials {
        let game = small_game(seed.wrapping_add(k as u64), 2)?;
        let lk: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..3.0)).collect();
        let lp: Vec<f64> = if k % 2 == 0 {
            alloc::vec![0.0; 2]
        } else {
            (0..2).map(|_| rng.gen_range(0.0..3.0)).collect()
        };
        let lgame = build_lagrangian_game(&game, &lk)?;
        let res = oracle.solve(&lgame, None)?;
        for r in danskin_check(&game, &lk, &lp, &res.policy, 0, settings)? {
            worst = worst.min(r.lhs - r.rhs);
            if !r.satisfied {
                failures += 1;
            }
        }
    }
    Ok(PropertyReport {
        name: "danskin",
        trials,
        failures,
        measured: worst,
        detail: format!("min (lhs - rhs) = {worst:.3e}"),
    })
}

/// Rollout mean of one constraint cost against its exact value.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutCheck {
    pub exact: f64,
    pub mean: f64,
    /// Batch-means standard error of `mean`.
    pub standard_error: f64,
    pub steps: usize,
}

impl RolloutCheck {
    /// `|mean − exact|` in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.exact).abs() / self.standard_error
    }

    pub fn within(&self, sigmas: f64) -> bool {
        (self.mean - self.exact).abs() <= sigmas * self.standard_error
    }
}

/// Rolls `policy` out for `steps` steps from `start` and compares the mean
/// of constraint `j` with the exact long-run value from the same start.
/// The standard error uses `batches` non-overlapping batch means, which
/// accounts for autocorrelation along the trajectory.
#[allow(clippy::too_many_arguments)]
pub fn unbiased_rollout(
    game: &ConstrainedMarkovGame,
    policy: &ProductPolicy,
    constraint: usize,
    start: usize,
    steps: usize,
    batches: usize,
    seed: u64,
) -> Result<RolloutCheck> {
    let exact = evaluate_from(game, policy, start)?.gain_per_constraint[constraint];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rollout_epoch(game, policy, start, steps, 0, &mut rng)?;
    let m = game.num_constraints();
    let values: Vec<f64> = (0..steps).map(|t| r.costs[t * m + constraint]).collect();
    let mean = values.iter().sum::<f64>() / steps as f64;
    let size = steps / batches.max(2);
    let used = size * batches.max(2);
    let means: Vec<f64> = values[..used]
        .chunks(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>() / (means.len() - 1) as f64;
    Ok(RolloutCheck {
        exact,
        mean,
        standard_error: libm::sqrt(var / means.len() as f64),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_shr, ShrConfig};

    #[test]
    fn equivalence_suite_passes() {
        let rep = oracle_equivalence(10, 0, &OracleSettings::default()).unwrap();
        assert!(rep.passed(), "{}", rep.detail);
        assert_eq!(rep.trials, 10);
    }

    #[test]
    fn corrupted_tolerance_is_reported() {
        let settings = OracleSettings {
            tol: 10.0,
            ..OracleSettings::default()
        };
        let rep = oracle_equivalence(10, 0, &settings).unwrap();
        assert!(rep.failures > 0);
    }

    #[test]
    fn danskin_suite_passes() {
        let settings = OracleSettings {
            tol: 1e-11,
            ..OracleSettings::default()
        };
        let rep = danskin_sweep(20, 7, &settings).unwrap();
        assert!(rep.passed(), "{}", rep.detail);
    }

    #[test]
    fn shr_uniform_rollout_is_unbiased() {
        let cfg = ShrConfig::default();
        let game = build_shr(&cfg).unwrap();
        let pi = ProductPolicy::uniform(&game);
        let chk = unbiased_rollout(&game, &pi, 0, cfg.joint_state(12, 14), 100_000, 100, 3).unwrap();
        assert!(chk.within(3.0), "z = {}", chk.z_score());
    }
}
