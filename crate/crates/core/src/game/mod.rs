//! Finite constrained Markov games, product policies, and exact
//! average-reward evaluation of stationary policies.
//!
//! States and actions are dense indices. Joint actions are enumerated in
//! row-major order over agents (the last agent varies fastest). Actions an
//! agent may not take in a state are masked rather than removed, so the
//! joint-action space stays rectangular.

mod chain;
mod control;
pub(crate) mod eval;
mod policy;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use chain::{induced_chain, stationary_distribution, LimitStructure, TransitionMatrix};
pub use control::{kl_divergence, ControlCost, ControlSign, GridLayout};
pub use eval::{evaluate_from, evaluate_stationary, StationaryEvaluation};
pub use policy::{marginal_without, EpochPolicySequence, OthersPolicy, ProductPolicy};

/// Tolerance on kernel row sums and policy normalization.
pub const PROB_TOL: f64 = 1e-12;

/// Mixed-radix encoding of joint actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionSpace {
    counts: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointActionSpace {
    pub fn new(counts: &[usize]) -> Self {
        let mut strides = alloc::vec![0; counts.len()];
        let mut size = 1usize;
        for i in (0..counts.len()).rev() {
            strides[i] = size;
            size *= counts[i];
        }
        Self {
            counts: counts.to_vec(),
            strides,
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Action of `agent` inside the joint action `joint`.
    #[inline]
    pub fn component(&self, joint: usize, agent: usize) -> usize {
        (joint / self.strides[agent]) % self.counts[agent]
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        (0..self.counts.len())
            .map(|i| self.component(joint, i))
            .collect()
    }

    /// Replaces agent `agent`'s component of `joint` with `action`.
    #[inline]
    pub fn with_component(&self, joint: usize, agent: usize, action: usize) -> usize {
        joint - self.component(joint, agent) * self.strides[agent] + action * self.strides[agent]
    }
}

/// Raw tables used to assemble a [`ConstrainedMarkovGame`].
///
/// Flat layouts:
/// * `reward[(i * S + s) * J + a]`
/// * `cost[(j * S + s) * J + a]`
/// * `kernel[s * J + a]` is a sparse list of `(next_state, probability)`
/// * `allowed[s * N + i]` lists the actions agent `i` may take in `s`
#[derive(Debug, Clone, PartialEq)]
pub struct GameParts {
    pub num_states: usize,
    pub action_counts: Vec<usize>,
    pub allowed: Vec<Vec<usize>>,
    pub reward: Vec<f64>,
    pub cost: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub kernel: Vec<Vec<(usize, f64)>>,
    pub layout: Option<GridLayout>,
    pub control: Option<ControlCost>,
}

/// A finite constrained Markov game.
///
/// Construction checks shapes only. Numeric invariants (stochastic kernel,
/// bounded tables, nonempty action sets) are reported by
/// [`ConstrainedMarkovGame::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedMarkovGame {
    parts: GameParts,
    space: JointActionSpace,
}

impl ConstrainedMarkovGame {
    pub fn new(parts: GameParts) -> Result<Self> {
        let n = parts.action_counts.len();
        let s = parts.num_states;
        let space = JointActionSpace::new(&parts.action_counts);
        let j = space.size();
        let m = parts.thresholds.len();
        check_len("allowed", s * n, parts.allowed.len())?;
        check_len("reward", n * s * j, parts.reward.len())?;
        check_len("cost", m * s * j, parts.cost.len())?;
        check_len("kernel", s * j, parts.kernel.len())?;
        for (idx, acts) in parts.allowed.iter().enumerate() {
            let agent = idx % n.max(1);
            for &a in acts {
                if a >= parts.action_counts[agent] {
                    return Err(Error::IndexOutOfRange {
                        what: "allowed action",
                        index: a,
                        len: parts.action_counts[agent],
                    });
                }
            }
        }
        for row in &parts.kernel {
            for &(next, _) in row {
                if next >= s {
                    return Err(Error::IndexOutOfRange {
                        what: "kernel next state",
                        index: next,
                        len: s,
                    });
                }
            }
        }
        if let Some(layout) = &parts.layout {
            layout.check(n, s)?;
        }
        if let Some(control) = &parts.control {
            let layout = parts.layout.as_ref().ok_or_else(|| {
                Error::InvalidArgument("control cost requires a grid layout".into())
            })?;
            control.check(layout, &parts.action_counts)?;
        }
        Ok(Self { parts, space })
    }

    pub fn num_states(&self) -> usize {
        self.parts.num_states
    }

    pub fn num_agents(&self) -> usize {
        self.parts.action_counts.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.parts.thresholds.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.parts.action_counts
    }

    pub fn joint_actions(&self) -> &JointActionSpace {
        &self.space
    }

    pub fn num_joint_actions(&self) -> usize {
        self.space.size()
    }

    pub fn allowed(&self, state: usize, agent: usize) -> &[usize] {
        &self.parts.allowed[state * self.num_agents() + agent]
    }

    pub fn is_allowed(&self, state: usize, agent: usize, action: usize) -> bool {
        self.allowed(state, agent).contains(&action)
    }

    /// Whether every agent's component of `joint` is allowed in `state`.
    pub fn joint_allowed(&self, state: usize, joint: usize) -> bool {
        (0..self.num_agents()).all(|i| self.is_allowed(state, i, self.space.component(joint, i)))
    }

    /// Allowed joint actions at `state`, in increasing index order.
    pub fn allowed_joint_actions(&self, state: usize) -> Vec<usize> {
        (0..self.num_joint_actions())
            .filter(|&a| self.joint_allowed(state, a))
            .collect()
    }

    #[inline]
    pub fn reward(&self, agent: usize, state: usize, joint: usize) -> f64 {
        let s = self.num_states();
        let j = self.num_joint_actions();
        self.parts.reward[(agent * s + state) * j + joint]
    }

    #[inline]
    pub fn cost(&self, constraint: usize, state: usize, joint: usize) -> f64 {
        let s = self.num_states();
        let j = self.num_joint_actions();
        self.parts.cost[(constraint * s + state) * j + joint]
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.parts.reward
    }

    pub fn cost_table(&self) -> &[f64] {
        &self.parts.cost
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.parts.thresholds
    }

    #[inline]
    pub fn transitions(&self, state: usize, joint: usize) -> &[(usize, f64)] {
        &self.parts.kernel[state * self.num_joint_actions() + joint]
    }

    pub fn layout(&self) -> Option<&GridLayout> {
        self.parts.layout.as_ref()
    }

    pub fn control(&self) -> Option<&ControlCost> {
        self.parts.control.as_ref()
    }

    pub fn parts(&self) -> &GameParts {
        &self.parts
    }

    pub fn into_parts(self) -> GameParts {
        self.parts
    }

    /// Same game with the constraint thresholds replaced.
    pub fn with_thresholds(&self, thresholds: Vec<f64>) -> Result<Self> {
        check_len("thresholds", self.num_constraints(), thresholds.len())?;
        let mut parts = self.parts.clone();
        parts.thresholds = thresholds;
        Self::new(parts)
    }

    /// `R = max |r_i(s,a)|`.
    pub fn reward_bound(&self) -> f64 {
        self.parts.reward.iter().fold(0.0, |acc, r| acc.max(r.abs()))
    }

    /// `B = max_j max_{s,a} |c_j(s,a) - b_j|` (zero when there are no constraints).
    pub fn cost_bound(&self) -> f64 {
        let per = self.num_states() * self.num_joint_actions();
        let mut bound: f64 = 0.0;
        for (j, b) in self.parts.thresholds.iter().enumerate() {
            for c in &self.parts.cost[j * per..(j + 1) * per] {
                bound = bound.max((c - b).abs());
            }
        }
        bound
    }

    /// Checks every numeric invariant and reports all violations.
    pub fn validate(&self) -> ValidationReport {
        validate_game(self)
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// Outcome of [`validate_game`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub reward_bound: f64,
    pub cost_bound: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_game(game: &ConstrainedMarkovGame) -> ValidationReport {
    let mut violations = Vec::new();
    let n = game.num_agents();
    if n < 2 {
        violations.push(format!("num_agents = {n}, need at least 2"));
    }
    for s in 0..game.num_states() {
        for i in 0..n {
            if game.allowed(s, i).is_empty() {
                violations.push(format!("empty action set for agent {i} in state {s}"));
            }
        }
        for a in 0..game.num_joint_actions() {
            let row = game.transitions(s, a);
            let mut sum = 0.0;
            for &(next, p) in row {
                if !(p >= 0.0) {
                    violations.push(format!(
                        "kernel row (s={s}, a={a}) has negative or NaN entry {p} at s'={next}"
                    ));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                violations.push(format!("kernel row (s={s}, a={a}) sums to {sum}"));
            }
        }
    }
    let reward_bound = game.reward_bound();
    let cost_bound = game.cost_bound();
    if !reward_bound.is_finite() {
        violations.push("reward table is unbounded (non-finite entry)".into());
    }
    if !cost_bound.is_finite() {
        violations.push("cost table or thresholds unbounded (non-finite entry)".into());
    }
    ValidationReport {
        violations,
        reward_bound,
        cost_bound,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::vec;

    /// Two agents, `states` states, every action allowed, zero costs unless given.
    pub fn uniform_parts(
        states: usize,
        counts: &[usize],
        kernel: Vec<Vec<(usize, f64)>>,
    ) -> GameParts {
        let j: usize = counts.iter().product();
        GameParts {
            num_states: states,
            action_counts: counts.to_vec(),
            allowed: (0..states)
                .flat_map(|_| counts.iter().map(|&c| (0..c).collect::<Vec<_>>()))
                .collect(),
            reward: vec![0.0; counts.len() * states * j],
            cost: vec![],
            thresholds: vec![],
            kernel,
            layout: None,
            control: None,
        }
    }

    /// 2 states, single action each agent, given chain.
    pub fn chain_game(p: [[f64; 2]; 2], r0: [f64; 2]) -> ConstrainedMarkovGame {
        let kernel = vec![
            vec![(0, p[0][0]), (1, p[0][1])],
            vec![(0, p[1][0]), (1, p[1][1])],
        ];
        let mut parts = uniform_parts(2, &[1, 1], kernel);
        parts.reward = vec![r0[0], r0[1], r0[0], r0[1]];
        ConstrainedMarkovGame::new(parts).unwrap()
    }
}
