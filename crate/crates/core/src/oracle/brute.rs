//! Exhaustive enumeration of deterministic stationary product policies.

use alloc::vec;
use alloc::vec::Vec;

use super::OracleResult;
use crate::error::{Error, Result};
use crate::game::{eval::gains_all_starts, ProductPolicy};
use crate::lagrangian::LagrangianGame;

/// Largest number of deterministic product policies enumerated.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// A deviation must improve a value by more than this to break equilibrium.
pub const NE_TOL: f64 = 1e-9;

/// Mixed-radix enumeration over `(state, agent)` digits, last digit fastest.
struct Profiles {
    num_states: usize,
    num_agents: usize,
    /// `options[s * N + i]`: allowed actions of agent `i` in `s`.
    options: Vec<Vec<usize>>,
    strides: Vec<usize>,
    total: usize,
}

impl Profiles {
    fn new(lgame: &LagrangianGame<'_>) -> Result<Self> {
        let game = lgame.base();
        let n = game.num_agents();
        let s = game.num_states();
        let options: Vec<Vec<usize>> = (0..s)
            .flat_map(|st| (0..n).map(move |i| (st, i)))
            .map(|(st, i)| game.allowed(st, i).to_vec())
            .collect();
        let count: f64 = options.iter().map(|o| o.len() as f64).product();
        if count > ENUMERATION_LIMIT as f64 {
            return Err(Error::EnumerationTooLarge {
                count,
                limit: ENUMERATION_LIMIT,
            });
        }
        let mut strides = vec![0; options.len()];
        let mut acc = 1usize;
        for d in (0..options.len()).rev() {
            strides[d] = acc;
            acc *= options[d].len();
        }
        Ok(Self {
            num_states: s,
            num_agents: n,
            options,
            strides,
            total: acc,
        })
    }

    fn digit(&self, index: usize, d: usize) -> usize {
        (index / self.strides[d]) % self.options[d].len()
    }

    fn policy(&self, index: usize, counts: &[usize]) -> ProductPolicy {
        let choices: Vec<Vec<usize>> = (0..self.num_agents)
            .map(|i| {
                (0..self.num_states)
                    .map(|s| {
                        let d = s * self.num_agents + i;
                        self.options[d][self.digit(index, d)]
                    })
                    .collect()
            })
            .collect();
        ProductPolicy::deterministic(self.num_states, counts, &choices)
            .expect("enumerated actions are in range")
    }

    /// Every profile index reachable by changing only agent `i`'s digits.
    fn deviations(&self, index: usize, agent: usize) -> Vec<usize> {
        let mut base = index;
        for s in 0..self.num_states {
            let d = s * self.num_agents + agent;
            base -= self.digit(index, d) * self.strides[d];
        }
        let mut out = vec![base];
        for s in 0..self.num_states {
            let d = s * self.num_agents + agent;
            let mut next = Vec::with_capacity(out.len() * self.options[d].len());
            for &k in &out {
                for opt in 0..self.options[d].len() {
                    next.push(k + opt * self.strides[d]);
                }
            }
            out = next;
        }
        out
    }
}

/// Per-start, per-agent values `[start][agent]` of every enumerated profile.
fn all_values(lgame: &LagrangianGame<'_>, profiles: &Profiles) -> Result<Vec<Vec<Vec<f64>>>> {
    let game = lgame.base();
    (0..profiles.total)
        .map(|k| {
            let pi = profiles.policy(k, game.action_counts());
            gains_all_starts(game, lgame.augmented_table(), &pi)
        })
        .collect()
}

/// Every deterministic stationary product policy from which no agent has a
/// deterministic unilateral deviation improving its value, from any initial
/// state, by more than [`NE_TOL`].
///
/// Deterministic deviations suffice: against fixed opponents an agent faces
/// an average-reward MDP, which has a deterministic stationary optimum.
pub fn brute_force_ne(lgame: &LagrangianGame<'_>) -> Result<Vec<OracleResult>> {
    let game = lgame.base();
    let profiles = Profiles::new(lgame)?;
    let values = all_values(lgame, &profiles)?;
    let mut out = Vec::new();
    'profile: for k in 0..profiles.total {
        for i in 0..game.num_agents() {
            for dev in profiles.deviations(k, i) {
                for s in 0..game.num_states() {
                    if values[dev][s][i] > values[k][s][i] + NE_TOL {
                        continue 'profile;
                    }
                }
            }
        }
        out.push(OracleResult {
            policy: profiles.policy(k, game.action_counts()),
            gain: values[k][0].clone(),
            state_gain: values[k].iter().map(|v| v[0]).collect(),
            bias: Vec::new(),
            iterations: profiles.total,
            residual: 0.0,
            converged: true,
        });
    }
    Ok(out)
}

/// Highest value agent `agent` attains from `start` over all deterministic
/// product policies, with the first maximizing policy.
pub fn best_deterministic_gain(
    lgame: &LagrangianGame<'_>,
    agent: usize,
    start: usize,
) -> Result<(ProductPolicy, f64)> {
    let game = lgame.base();
    let profiles = Profiles::new(lgame)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 0;
    for k in 0..profiles.total {
        let pi = profiles.policy(k, game.action_counts());
        let v = gains_all_starts(game, lgame.augmented_table(), &pi)?[start][agent];
        if v > best {
            best = v;
            best_k = k;
        }
    }
    Ok((profiles.policy(best_k, game.action_counts()), best))
}
