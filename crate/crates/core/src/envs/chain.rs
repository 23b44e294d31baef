//! Random small games with full-support kernels, so every stationary policy
//! induces an irreducible aperiodic chain.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{evaluate_stationary, ConstrainedMarkovGame, GameParts, ProductPolicy};

/// Planted policy satisfies every constraint with at least this margin.
pub const SLATER_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainGameParams {
    pub num_states: usize,
    pub action_counts: Vec<usize>,
    pub num_constraints: usize,
    /// All agents share agent 0's reward table.
    pub identical_interest: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainGame {
    pub game: ConstrainedMarkovGame,
    /// Deterministic policy with `U(π†) = b + SLATER_MARGIN`.
    pub planted: ProductPolicy,
}

/// Random unichain game with rewards and costs in `[-1, 1]`. Thresholds are
/// set from a planted deterministic policy so that it is strictly feasible.
pub fn build_chain_game(params: &ChainGameParams) -> Result<ChainGame> {
    let s = params.num_states;
    let n = params.action_counts.len();
    if s == 0 || n == 0 || params.action_counts.contains(&0) {
        return Err(Error::InvalidArgument("chain game needs states, agents and actions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let j: usize = params.action_counts.iter().product();
    let kernel: Vec<Vec<(usize, f64)>> = (0..s * j)
        .map(|_| {
            let w: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
            let z: f64 = w.iter().sum();
            w.iter().enumerate().map(|(t, x)| (t, x / z)).collect()
        })
        .collect();
    let mut reward: Vec<f64> = (0..n * s * j).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    if params.identical_interest {
        let per = s * j;
        let (first, rest) = reward.split_at_mut(per);
        for chunk in rest.chunks_mut(per) {
            chunk.copy_from_slice(first);
        }
    }
    let cost: Vec<f64> = (0..params.num_constraints * s * j)
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    let choices: Vec<Vec<usize>> = params
        .action_counts
        .iter()
        .map(|&c| (0..s).map(|_| rng.gen_range(0..c)).collect())
        .collect();
    let planted = ProductPolicy::deterministic(s, &params.action_counts, &choices)?;

    let parts = GameParts {
        num_states: s,
        action_counts: params.action_counts.clone(),
        allowed: (0..s)
            .flat_map(|_| params.action_counts.iter().map(|&c| (0..c).collect::<Vec<_>>()))
            .collect(),
        reward,
        cost,
        thresholds: vec![0.0; params.num_constraints],
        kernel,
        layout: None,
        control: None,
    };
    let draft = ConstrainedMarkovGame::new(parts)?;
    let u = evaluate_stationary(&draft, &planted)?.gain_per_constraint;
    let thresholds = u.iter().map(|u| u - SLATER_MARGIN).collect();
    let game = draft.with_thresholds(thresholds)?;
    Ok(ChainGame { game, planted })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> ChainGameParams {
        ChainGameParams {
            num_states: 3,
            action_counts: vec![2, 3],
            num_constraints: 2,
            identical_interest: false,
            seed,
        }
    }

    #[test]
    fn seeded_construction_is_reproducible() {
        assert_eq!(build_chain_game(&params(5)).unwrap(), build_chain_game(&params(5)).unwrap());
        assert_ne!(build_chain_game(&params(5)).unwrap(), build_chain_game(&params(6)).unwrap());
    }

    #[test]
    fn planted_policy_is_strictly_feasible() {
        for seed in 0..20 {
            let cg = build_chain_game(&params(seed)).unwrap();
            let u = evaluate_stationary(&cg.game, &cg.planted).unwrap().gain_per_constraint;
            for (u, b) in u.iter().zip(cg.game.thresholds()) {
                assert!(*u >= b + SLATER_MARGIN - 1e-9);
            }
            assert!(cg.game.validate().is_valid());
        }
    }

    #[test]
    fn two_state_fixture_matches_balance_equations() {
        let cg = build_chain_game(&ChainGameParams {
            num_states: 2,
            action_counts: vec![2, 2],
            num_constraints: 1,
            identical_interest: true,
            seed: 3,
        })
        .unwrap();
        let g = &cg.game;
        let space = g.joint_actions();
        let a0 = space.encode(&[cg.planted.action(0, 0).unwrap(), cg.planted.action(1, 0).unwrap()]);
        let a1 = space.encode(&[cg.planted.action(0, 1).unwrap(), cg.planted.action(1, 1).unwrap()]);
        let p01 = g.transitions(0, a0)[1].1;
        let p10 = g.transitions(1, a1)[0].1;
        // balance: μ0 p01 = μ1 p10
        let mu0 = p10 / (p01 + p10);
        let mu1 = 1.0 - mu0;
        let v = mu0 * g.reward(0, 0, a0) + mu1 * g.reward(0, 1, a1);
        let u = mu0 * g.cost(0, 0, a0) + mu1 * g.cost(0, 1, a1);
        let ev = evaluate_stationary(g, &cg.planted).unwrap();
        assert!((ev.gain_per_agent[0] - v).abs() < 1e-13);
        assert!((ev.gain_per_agent[1] - v).abs() < 1e-13);
        assert!((ev.gain_per_constraint[0] - u).abs() < 1e-13);
        assert!((u - g.thresholds()[0] - SLATER_MARGIN).abs() < 1e-12);
    }
}
