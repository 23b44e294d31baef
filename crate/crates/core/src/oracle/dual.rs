//! Generalized dual `d_i(λ, π_{-i})` and the diagnostics built on it.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::OracleSettings;
use crate::error::{Error, Result};
use crate::game::{evaluate_from, marginal_without, ConstrainedMarkovGame, OthersPolicy, ProductPolicy};
use crate::lagrangian::{build_lagrangian_game, LagrangianGame};
use crate::mdp::MdpBuilder;

/// Slack allowed on the Danskin inequality.
pub const DANSKIN_SLACK: f64 = 1e-8;

/// Both sides of `d_i(λ⁺, π_{-i}) − d_i(λ_k, π_{-i}) ≥ (λ⁺ − λ_k)ᵀ(U(π) − b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DanskinReport {
    pub agent: usize,
    pub lambda_k: Vec<f64>,
    pub lambda_plus: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Best average Lagrangian value agent `agent` can reach from `start` while
/// the others play `others`: relative value iteration on the agent's MDP
/// with the others' actions marginalized into rewards and kernel.
pub fn generalized_dual(
    game: &ConstrainedMarkovGame,
    lambda: &[f64],
    agent: usize,
    others: &OthersPolicy,
    start: usize,
    settings: &OracleSettings,
) -> Result<f64> {
    let lgame = build_lagrangian_game(game, lambda)?;
    dual_value(&lgame, agent, others, start, settings)
}

fn dual_value(
    lgame: &LagrangianGame<'_>,
    agent: usize,
    others: &OthersPolicy,
    start: usize,
    settings: &OracleSettings,
) -> Result<f64> {
    let game = lgame.base();
    if agent >= game.num_agents() || others.excluded() != agent {
        return Err(Error::IndexOutOfRange {
            what: "agent",
            index: agent,
            len: game.num_agents(),
        });
    }
    if start >= game.num_states() {
        return Err(Error::IndexOutOfRange {
            what: "start state",
            index: start,
            len: game.num_states(),
        });
    }
    let space = game.joint_actions();
    let control = match (game.control(), game.layout()) {
        (Some(c), Some(l)) if c.weight != 0.0 => Some((c, l)),
        _ => None,
    };
    let mut builder = MdpBuilder::new(game.num_states());
    for s in 0..game.num_states() {
        let others_kl = match control {
            Some((c, l)) => {
                let mut kl = 0.0;
                for j in others.agents() {
                    kl += c.agent_kl(l, j, s, others.dist(j, s))?;
                }
                kl
            }
            None => 0.0,
        };
        for &a_i in game.allowed(s, agent) {
            let mut reward = 0.0;
            let mut next: BTreeMap<usize, f64> = BTreeMap::new();
            for (a, p) in others.joint_support(space, s, a_i) {
                reward += p * lgame.augmented_reward(agent, s, a);
                for &(t, q) in game.transitions(s, a) {
                    *next.entry(t).or_insert(0.0) += p * q;
                }
            }
            if let Some((c, l)) = control {
                reward += c.signed_weight() * (c.deterministic_kl(l, agent, s, a_i) + others_kl);
            }
            builder.action(a_i, reward, next);
        }
        builder.finish_state();
    }
    let sol = builder
        .build()?
        .relative_value_iteration(settings.tol, settings.max_iter, None);
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            residual: sol.residual,
        });
    }
    Ok(sol.state_gain[start])
}

/// Evaluates the Danskin inequality for every agent at the oracle policy
/// `policy ∈ NE(G(λ_k))`, measuring values from `start`.
pub fn danskin_check(
    game: &ConstrainedMarkovGame,
    lambda_k: &[f64],
    lambda_plus: &[f64],
    policy: &ProductPolicy,
    start: usize,
    settings: &OracleSettings,
) -> Result<Vec<DanskinReport>> {
    let at_k = build_lagrangian_game(game, lambda_k)?;
    let at_plus = build_lagrangian_game(game, lambda_plus)?;
    let eval = evaluate_from(game, policy, start)?;
    let rhs: f64 = lambda_plus
        .iter()
        .zip(lambda_k)
        .zip(eval.gain_per_constraint.iter().zip(game.thresholds()))
        .map(|((lp, lk), (u, b))| (lp - lk) * (u - b))
        .sum();
    (0..game.num_agents())
        .map(|i| {
            let others = marginal_without(policy, i)?;
            let lhs = dual_value(&at_plus, i, &others, start, settings)?
                - dual_value(&at_k, i, &others, start, settings)?;
            Ok(DanskinReport {
                agent: i,
                lambda_k: lambda_k.to_vec(),
                lambda_plus: lambda_plus.to_vec(),
                lhs,
                rhs,
                satisfied: lhs >= rhs - DANSKIN_SLACK,
            })
        })
        .collect()
}

/// `d_i(λ, π_{-i}) − L_i(π, λ)`: how much agent `agent` gains by best
/// responding. Zero (up to solver tolerance) at an equilibrium.
pub fn best_response_residual(
    lgame: &LagrangianGame<'_>,
    policy: &ProductPolicy,
    agent: usize,
    start: usize,
    settings: &OracleSettings,
) -> Result<f64> {
    let others = marginal_without(policy, agent)?;
    let best = dual_value(lgame, agent, &others, start, settings)?;
    let played = lgame.evaluate_from(policy, start)?.gain_per_agent[agent];
    Ok(best - played)
}
