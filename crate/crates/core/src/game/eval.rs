use alloc::vec;
use alloc::vec::Vec;

use super::chain::{induced_chain, LimitStructure};
use super::{ConstrainedMarkovGame, ProductPolicy};
use crate::error::{Error, Result};

/// Long-run averages of a stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryEvaluation {
    /// Limiting state distribution `μ(s)`.
    pub state_distribution: Vec<f64>,
    /// `occupation[s * J + a] = μ(s) · π(a | s)`.
    pub occupation: Vec<f64>,
    /// `V_i(π)`, including any control-cost adjustment.
    pub gain_per_agent: Vec<f64>,
    /// `U_j(π)`.
    pub gain_per_constraint: Vec<f64>,
}

/// Average reward and cost of a stationary policy whose induced chain is
/// unichain. Values do not depend on the initial state.
pub fn evaluate_stationary(
    game: &ConstrainedMarkovGame,
    policy: &ProductPolicy,
) -> Result<StationaryEvaluation> {
    policy.check(game)?;
    let chain = induced_chain(game, policy)?;
    let mu = super::chain::stationary_distribution(&chain)?;
    evaluate_with(game, game.reward_table(), policy, mu)
}

/// Cesàro-limit averages from a fixed initial state. Works for multichain
/// induced chains: the limit mixes the recurrent classes reachable from
/// `start` by their absorption probabilities.
pub fn evaluate_from(
    game: &ConstrainedMarkovGame,
    policy: &ProductPolicy,
    start: usize,
) -> Result<StationaryEvaluation> {
    policy.check(game)?;
    let mu = limiting_distribution(game, policy, start)?;
    evaluate_with(game, game.reward_table(), policy, mu)
}

pub(crate) fn limiting_distribution(
    game: &ConstrainedMarkovGame,
    policy: &ProductPolicy,
    start: usize,
) -> Result<Vec<f64>> {
    let chain = induced_chain(game, policy)?;
    let limits = LimitStructure::analyze(&chain, Some(start))?;
    Ok(limits
        .limiting_distribution(start)
        .expect("start state is always analyzed"))
}

/// Expected per-step reward of every agent at every state under `policy`,
/// `r_π[i][s]`, using the flat `rewards` table (same layout as the game's).
pub(crate) fn policy_rewards(
    game: &ConstrainedMarkovGame,
    rewards: &[f64],
    policy: &ProductPolicy,
) -> Result<Vec<Vec<f64>>> {
    let n = game.num_agents();
    let s_count = game.num_states();
    let j = game.num_joint_actions();
    let space = game.joint_actions();
    let mut out = vec![vec![0.0; s_count]; n];
    for s in 0..s_count {
        let adjust = match (game.control(), game.layout()) {
            (Some(control), Some(layout)) => control.state_adjustment(layout, s, policy)?,
            _ => 0.0,
        };
        let support = policy.joint_support(space, s);
        for (i, row) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(a, p) in &support {
                acc += p * rewards[(i * s_count + s) * j + a];
            }
            row[s] = acc + adjust;
        }
    }
    Ok(out)
}

pub(crate) fn evaluate_with(
    game: &ConstrainedMarkovGame,
    rewards: &[f64],
    policy: &ProductPolicy,
    mu: Vec<f64>,
) -> Result<StationaryEvaluation> {
    let n = game.num_agents();
    let m = game.num_constraints();
    let s_count = game.num_states();
    let j = game.num_joint_actions();
    let space = game.joint_actions();
    let mut occupation = vec![0.0; s_count * j];
    let mut gain_per_agent = vec![0.0; n];
    let mut gain_per_constraint = vec![0.0; m];
    for s in 0..s_count {
        if mu[s] == 0.0 {
            continue;
        }
        let adjust = match (game.control(), game.layout()) {
            (Some(control), Some(layout)) => control.state_adjustment(layout, s, policy)?,
            _ => 0.0,
        };
        for g in gain_per_agent.iter_mut() {
            *g += mu[s] * adjust;
        }
        for (a, p) in policy.joint_support(space, s) {
            let w = mu[s] * p;
            occupation[s * j + a] = w;
            for (i, g) in gain_per_agent.iter_mut().enumerate() {
                *g += w * rewards[(i * s_count + s) * j + a];
            }
            for (c, g) in gain_per_constraint.iter_mut().enumerate() {
                *g += w * game.cost(c, s, a);
            }
        }
    }
    Ok(StationaryEvaluation {
        state_distribution: mu,
        occupation,
        gain_per_agent,
        gain_per_constraint,
    })
}

/// Per-start gains `[start][agent]` for the given reward table; handles
/// multichain policies through absorption probabilities.
pub(crate) fn gains_all_starts(
    game: &ConstrainedMarkovGame,
    rewards: &[f64],
    policy: &ProductPolicy,
) -> Result<Vec<Vec<f64>>> {
    let chain = induced_chain(game, policy)?;
    let limits = LimitStructure::analyze(&chain, None)?;
    let r_pi = policy_rewards(game, rewards, policy)?;
    let n = game.num_agents();
    let class_gains: Vec<Vec<f64>> = limits
        .classes
        .iter()
        .zip(&limits.class_distributions)
        .map(|(class, dist)| {
            (0..n)
                .map(|i| class.iter().zip(dist).map(|(&s, &p)| p * r_pi[i][s]).sum())
                .collect()
        })
        .collect();
    (0..game.num_states())
        .map(|s| {
            let w = limits.class_weights(s).ok_or(Error::Singular)?;
            Ok((0..n)
                .map(|i| w.iter().zip(&class_gains).map(|(wc, g)| wc * g[i]).sum())
                .collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::{chain_game, uniform_parts};
    use crate::game::ConstrainedMarkovGame;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_reward_single_state() {
        let mut parts = uniform_parts(1, &[2, 2], vec![vec![(0, 1.0)]; 4]);
        parts.reward = vec![1.0; 8];
        let game = ConstrainedMarkovGame::new(parts).unwrap();
        let ev = evaluate_stationary(&game, &ProductPolicy::uniform(&game)).unwrap();
        assert_eq!(ev.gain_per_agent, vec![1.0, 1.0]);
    }

    #[test]
    fn deterministic_cycle_average() {
        let game = chain_game([[0.0, 1.0], [1.0, 0.0]], [0.0, 2.0]);
        let ev = evaluate_stationary(&game, &ProductPolicy::uniform(&game)).unwrap();
        assert!((ev.gain_per_agent[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_solved_chain() {
        let game = chain_game([[0.9, 0.1], [0.3, 0.7]], [4.0, 0.0]);
        let ev = evaluate_stationary(&game, &ProductPolicy::uniform(&game)).unwrap();
        assert!((ev.gain_per_agent[0] - 3.0).abs() < 1e-13);
        let total: f64 = ev.occupation.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multichain_policy_errors_but_evaluates_from_start() {
        let game = chain_game([[1.0, 0.0], [0.0, 1.0]], [1.0, 5.0]);
        let pi = ProductPolicy::uniform(&game);
        assert!(matches!(
            evaluate_stationary(&game, &pi),
            Err(Error::Multichain { .. })
        ));
        assert_eq!(evaluate_from(&game, &pi, 1).unwrap().gain_per_agent[0], 5.0);
        let all = gains_all_starts(&game, game.reward_table(), &pi).unwrap();
        assert_eq!(all, vec![vec![1.0, 1.0], vec![5.0, 5.0]]);
    }

    /// Random 4-state, 2x2-action game with full-support kernel.
    fn random_game(seed: u64) -> (ConstrainedMarkovGame, ProductPolicy) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 4;
        let counts = [2usize, 2];
        let j = 4;
        let kernel = (0..s * j)
            .map(|_| {
                let w: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
                let z: f64 = w.iter().sum();
                w.iter().enumerate().map(|(t, x)| (t, x / z)).collect()
            })
            .collect();
        let mut parts = uniform_parts(s, &counts, kernel);
        parts.reward = (0..2 * s * j).map(|_| rng.gen_range(-1.0..1.0)).collect();
        parts.cost = (0..s * j).map(|_| rng.gen_range(0.0..1.0)).collect();
        parts.thresholds = vec![0.5];
        let game = ConstrainedMarkovGame::new(parts).unwrap();
        let probs = counts
            .iter()
            .map(|&c| {
                (0..s)
                    .flat_map(|_| {
                        let w: Vec<f64> = (0..c).map(|_| rng.gen_range(0.05..1.0)).collect();
                        let z: f64 = w.iter().sum();
                        w.into_iter().map(move |x| x / z)
                    })
                    .collect()
            })
            .collect();
        let pi = ProductPolicy::from_tables(s, counts.to_vec(), probs).unwrap();
        (game, pi)
    }

    /// Relabels states by `perm` (new index of old state s is perm[s]).
    fn permute(game: &ConstrainedMarkovGame, pi: &ProductPolicy, perm: &[usize]) -> (ConstrainedMarkovGame, ProductPolicy) {
        let s = game.num_states();
        let j = game.num_joint_actions();
        let mut parts = game.parts().clone();
        for old in 0..s {
            let new = perm[old];
            for a in 0..j {
                parts.kernel[new * j + a] = game
                    .transitions(old, a)
                    .iter()
                    .map(|&(t, p)| (perm[t], p))
                    .collect();
                for i in 0..game.num_agents() {
                    parts.reward[(i * s + new) * j + a] = game.reward(i, old, a);
                }
                parts.cost[new * j + a] = game.cost(0, old, a);
            }
        }
        let probs = (0..pi.num_agents())
            .map(|i| {
                let c = pi.action_counts()[i];
                let mut t = vec![0.0; s * c];
                for old in 0..s {
                    t[perm[old] * c..(perm[old] + 1) * c].copy_from_slice(pi.dist(i, old));
                }
                t
            })
            .collect();
        (
            ConstrainedMarkovGame::new(parts).unwrap(),
            ProductPolicy::from_tables(s, pi.action_counts().to_vec(), probs).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn evaluation_is_invariant_to_state_relabeling(seed in any::<u64>(), perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
            let (game, pi) = random_game(seed);
            let (pgame, ppi) = permute(&game, &pi, &perm);
            let a = evaluate_stationary(&game, &pi).unwrap();
            let b = evaluate_stationary(&pgame, &ppi).unwrap();
            for i in 0..2 {
                prop_assert!((a.gain_per_agent[i] - b.gain_per_agent[i]).abs() < 1e-12);
            }
            prop_assert!((a.gain_per_constraint[0] - b.gain_per_constraint[0]).abs() < 1e-12);
        }

        #[test]
        fn gains_are_bounded_and_occupation_normalized(seed in any::<u64>()) {
            let (game, pi) = random_game(seed);
            let ev = evaluate_stationary(&game, &pi).unwrap();
            let total: f64 = ev.occupation.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            let r = game.reward_bound();
            let b = game.cost_bound();
            for g in &ev.gain_per_agent {
                prop_assert!(g.abs() <= r + 1e-12);
            }
            let u = ev.gain_per_constraint[0];
            prop_assert!(u >= game.thresholds()[0] - b - 1e-12 && u <= game.thresholds()[0] + b + 1e-12);
        }
    }

    #[test]
    fn long_rollout_matches_exact_average() {
        // Empirical time average of agent 0's reward over 1e6 steps.
        let (game, pi) = random_game(7);
        let ev = evaluate_stationary(&game, &pi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let space = game.joint_actions();
        let steps = 1_000_000usize;
        let mut s = 0usize;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..steps {
            let mut joint = 0;
            for i in 0..2 {
                let u: f64 = rng.gen();
                let d = pi.dist(i, s);
                let mut acc = 0.0;
                let mut pick = d.len() - 1;
                for (a, &p) in d.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = a;
                        break;
                    }
                }
                joint = space.with_component(joint, i, pick);
            }
            let r = game.reward(0, s, joint);
            sum += r;
            sum_sq += r * r;
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let row = game.transitions(s, joint);
            let mut next = row[row.len() - 1].0;
            for &(t, p) in row {
                acc += p;
                if u < acc {
                    next = t;
                    break;
                }
            }
            s = next;
        }
        let mean = sum / steps as f64;
        let std = (sum_sq / steps as f64 - mean * mean).sqrt();
        let bound = 3.0 * std / (steps as f64).sqrt() + 1e-3;
        assert!(
            (mean - ev.gain_per_agent[0]).abs() <= bound,
            "empirical {mean} vs exact {} (bound {bound})",
            ev.gain_per_agent[0]
        );
    }
}
