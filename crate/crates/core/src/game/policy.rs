use alloc::vec;
use alloc::vec::Vec;

use super::{ConstrainedMarkovGame, JointActionSpace, PROB_TOL};
use crate::error::{Error, Result};

/// Stationary product policy: one state-conditional action distribution per
/// agent. `probs[i][s * |A_i| + a] = π_i(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPolicy {
    num_states: usize,
    action_counts: Vec<usize>,
    probs: Vec<Vec<f64>>,
}

impl ProductPolicy {
    pub fn from_tables(
        num_states: usize,
        action_counts: Vec<usize>,
        probs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if probs.len() != action_counts.len() {
            return Err(Error::DimensionMismatch {
                what: "policy agents",
                expected: action_counts.len(),
                found: probs.len(),
            });
        }
        for (table, &count) in probs.iter().zip(&action_counts) {
            if table.len() != num_states * count {
                return Err(Error::DimensionMismatch {
                    what: "policy table",
                    expected: num_states * count,
                    found: table.len(),
                });
            }
        }
        Ok(Self {
            num_states,
            action_counts,
            probs,
        })
    }

    /// Uniform over each agent's allowed actions.
    pub fn uniform(game: &ConstrainedMarkovGame) -> Self {
        let probs = (0..game.num_agents())
            .map(|i| {
                let count = game.action_counts()[i];
                let mut table = vec![0.0; game.num_states() * count];
                for s in 0..game.num_states() {
                    let allowed = game.allowed(s, i);
                    let w = 1.0 / allowed.len() as f64;
                    for &a in allowed {
                        table[s * count + a] = w;
                    }
                }
                table
            })
            .collect();
        Self {
            num_states: game.num_states(),
            action_counts: game.action_counts().to_vec(),
            probs,
        }
    }

    /// Deterministic policy; `choices[i][s]` is agent `i`'s action in `s`.
    pub fn deterministic(
        num_states: usize,
        action_counts: &[usize],
        choices: &[Vec<usize>],
    ) -> Result<Self> {
        if choices.len() != action_counts.len() {
            return Err(Error::DimensionMismatch {
                what: "policy agents",
                expected: action_counts.len(),
                found: choices.len(),
            });
        }
        let mut probs = Vec::with_capacity(choices.len());
        for (agent_choices, &count) in choices.iter().zip(action_counts) {
            if agent_choices.len() != num_states {
                return Err(Error::DimensionMismatch {
                    what: "policy choices",
                    expected: num_states,
                    found: agent_choices.len(),
                });
            }
            let mut table = vec![0.0; num_states * count];
            for (s, &a) in agent_choices.iter().enumerate() {
                if a >= count {
                    return Err(Error::IndexOutOfRange {
                        what: "action",
                        index: a,
                        len: count,
                    });
                }
                table[s * count + a] = 1.0;
            }
            probs.push(table);
        }
        Ok(Self {
            num_states,
            action_counts: action_counts.to_vec(),
            probs,
        })
    }

    /// Deterministic product policy playing joint action `joint[s]` in each state.
    pub fn from_joint_choices(space: &JointActionSpace, joint: &[usize]) -> Self {
        let choices: Vec<Vec<usize>> = (0..space.counts().len())
            .map(|i| joint.iter().map(|&a| space.component(a, i)).collect())
            .collect();
        Self::deterministic(joint.len(), space.counts(), &choices)
            .expect("joint choices decode within range")
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_agents(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    /// `π_i(· | s)`.
    #[inline]
    pub fn dist(&self, agent: usize, state: usize) -> &[f64] {
        let c = self.action_counts[agent];
        &self.probs[agent][state * c..(state + 1) * c]
    }

    pub fn table(&self, agent: usize) -> &[f64] {
        &self.probs[agent]
    }

    #[inline]
    pub fn prob(&self, agent: usize, state: usize, action: usize) -> f64 {
        self.probs[agent][state * self.action_counts[agent] + action]
    }

    /// Probability of the joint action under the product distribution.
    #[inline]
    pub fn joint_prob(&self, space: &JointActionSpace, state: usize, joint: usize) -> f64 {
        let mut p = 1.0;
        for i in 0..self.num_agents() {
            p *= self.prob(i, state, space.component(joint, i));
            if p == 0.0 {
                break;
            }
        }
        p
    }

    /// Joint actions with positive probability at `state`, with their probabilities.
    pub fn joint_support(&self, space: &JointActionSpace, state: usize) -> Vec<(usize, f64)> {
        let mut out = vec![(0usize, 1.0f64)];
        for i in 0..self.num_agents() {
            let dist = self.dist(i, state);
            let mut next = Vec::with_capacity(out.len() * dist.len());
            for &(joint, p) in &out {
                for (a, &q) in dist.iter().enumerate() {
                    if q > 0.0 {
                        next.push((space.with_component(joint, i, a), p * q));
                    }
                }
            }
            out = next;
        }
        out.sort_unstable_by_key(|&(a, _)| a);
        out
    }

    /// The action of a deterministic policy, or `None` if mixed.
    pub fn action(&self, agent: usize, state: usize) -> Option<usize> {
        let d = self.dist(agent, state);
        d.iter().position(|&p| p == 1.0)
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.num_agents())
            .all(|i| (0..self.num_states).all(|s| self.action(i, s).is_some()))
    }

    /// Checks shape, normalization and the action mask against `game`.
    pub fn check(&self, game: &ConstrainedMarkovGame) -> Result<()> {
        if self.num_states != game.num_states() {
            return Err(Error::DimensionMismatch {
                what: "policy states",
                expected: game.num_states(),
                found: self.num_states,
            });
        }
        if self.action_counts != game.action_counts() {
            return Err(Error::DimensionMismatch {
                what: "policy agents",
                expected: game.num_agents(),
                found: self.num_agents(),
            });
        }
        for i in 0..self.num_agents() {
            for s in 0..self.num_states {
                let d = self.dist(i, s);
                let mut sum = 0.0;
                for (a, &p) in d.iter().enumerate() {
                    if !(p >= 0.0) {
                        return Err(Error::InvalidArgument(alloc::format!(
                            "policy for agent {i} has negative mass {p} at state {s}"
                        )));
                    }
                    if p > 0.0 && !game.is_allowed(s, i, a) {
                        return Err(Error::InvalidArgument(alloc::format!(
                            "policy for agent {i} puts mass on masked action {a} at state {s}"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "policy for agent {i} at state {s} sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Policies of every agent except `excluded`, kept in factored form so that
/// composing an agent policy back in is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct OthersPolicy {
    excluded: usize,
    num_states: usize,
    action_counts: Vec<usize>,
    factors: Vec<Vec<f64>>,
}

/// `π_{-i}`: the other agents' per-state product distribution.
pub fn marginal_without(policy: &ProductPolicy, agent: usize) -> Result<OthersPolicy> {
    if agent >= policy.num_agents() {
        return Err(Error::IndexOutOfRange {
            what: "agent",
            index: agent,
            len: policy.num_agents(),
        });
    }
    let mut factors = policy.probs.clone();
    factors[agent].clear();
    Ok(OthersPolicy {
        excluded: agent,
        num_states: policy.num_states,
        action_counts: policy.action_counts.clone(),
        factors,
    })
}

impl OthersPolicy {
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    /// Agents included in the marginal, in index order.
    pub fn agents(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.action_counts.len()).filter(move |&j| j != self.excluded)
    }

    pub fn dist(&self, agent: usize, state: usize) -> &[f64] {
        debug_assert_ne!(agent, self.excluded);
        let c = self.action_counts[agent];
        &self.factors[agent][state * c..(state + 1) * c]
    }

    /// Distribution over `A_{-i}` at `state`, row-major over the other agents.
    pub fn table(&self, state: usize) -> Vec<f64> {
        let mut out = vec![1.0];
        for j in self.agents() {
            let d = self.dist(j, state);
            let mut next = Vec::with_capacity(out.len() * d.len());
            for &p in &out {
                for &q in d {
                    next.push(p * q);
                }
            }
            out = next;
        }
        out
    }

    /// Joint actions (with the excluded agent's component set to `own_action`)
    /// that have positive probability, with their probabilities.
    pub fn joint_support(
        &self,
        space: &JointActionSpace,
        state: usize,
        own_action: usize,
    ) -> Vec<(usize, f64)> {
        let mut out = vec![(space.with_component(0, self.excluded, own_action), 1.0f64)];
        for j in self.agents() {
            let d = self.dist(j, state);
            let mut next = Vec::with_capacity(out.len() * d.len());
            for &(joint, p) in &out {
                for (a, &q) in d.iter().enumerate() {
                    if q > 0.0 {
                        next.push((space.with_component(joint, j, a), p * q));
                    }
                }
            }
            out = next;
        }
        out
    }

    /// `(π_i, π_{-i})` as a product policy; `own` is agent `i`'s table.
    pub fn compose_with(&self, own: &[f64]) -> Result<ProductPolicy> {
        let expected = self.num_states * self.action_counts[self.excluded];
        if own.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "agent policy table",
                expected,
                found: own.len(),
            });
        }
        let mut probs = self.factors.clone();
        probs[self.excluded] = own.to_vec();
        Ok(ProductPolicy {
            num_states: self.num_states,
            action_counts: self.action_counts.clone(),
            probs,
        })
    }
}

/// Epoch-wise nonstationary policy `π^λ(s, t) = π^{⌊t / T0⌋}(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPolicySequence {
    pub policies: Vec<ProductPolicy>,
    pub epoch_length: usize,
}

impl EpochPolicySequence {
    pub fn new(epoch_length: usize) -> Self {
        Self {
            policies: Vec::new(),
            epoch_length,
        }
    }

    /// Stationary policy in force at time step `t`.
    pub fn at(&self, t: usize) -> Option<&ProductPolicy> {
        self.policies.get(t / self.epoch_length)
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::uniform_parts;
    use proptest::prelude::*;

    fn three_agent_game() -> ConstrainedMarkovGame {
        let parts = uniform_parts(2, &[2, 3, 2], vec![vec![(0, 1.0)]; 24]);
        ConstrainedMarkovGame::new(parts).unwrap()
    }

    #[test]
    fn two_agent_marginal_is_other_policy() {
        let probs = vec![vec![0.3, 0.7, 1.0, 0.0], vec![0.6, 0.4, 0.5, 0.5]];
        let pi = ProductPolicy::from_tables(2, vec![2, 2], probs).unwrap();
        let others = marginal_without(&pi, 0).unwrap();
        assert_eq!(others.table(0), pi.dist(1, 0).to_vec());
        assert_eq!(others.table(1), pi.dist(1, 1).to_vec());
    }

    #[test]
    fn uniform_marginal_over_two_others() {
        let game = three_agent_game();
        let pi = ProductPolicy::uniform(&game);
        let table = marginal_without(&pi, 0).unwrap().table(1);
        assert_eq!(table.len(), 6);
        for p in table {
            assert!((p - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_rejects_bad_agent() {
        let game = three_agent_game();
        let pi = ProductPolicy::uniform(&game);
        assert!(marginal_without(&pi, 3).is_err());
    }

    #[test]
    fn epoch_lookup_uses_floor() {
        let game = three_agent_game();
        let mut seq = EpochPolicySequence::new(5);
        seq.policies.push(ProductPolicy::uniform(&game));
        let det = ProductPolicy::deterministic(2, &[2, 3, 2], &[vec![0, 0], vec![1, 2], vec![1, 1]])
            .unwrap();
        seq.policies.push(det.clone());
        assert_eq!(seq.at(4), Some(&seq.policies[0]));
        assert_eq!(seq.at(5), Some(&det));
        assert_eq!(seq.at(9), Some(&det));
        assert_eq!(seq.at(10), None);
    }

    #[test]
    fn policy_check_catches_mask_and_normalization() {
        let mut parts = uniform_parts(1, &[2, 2], vec![vec![(0, 1.0)]; 4]);
        parts.allowed[0] = vec![1];
        let game = ConstrainedMarkovGame::new(parts).unwrap();
        let bad = ProductPolicy::from_tables(1, vec![2, 2], vec![vec![0.5, 0.5], vec![1.0, 0.0]])
            .unwrap();
        assert!(bad.check(&game).is_err());
        let unnorm = ProductPolicy::from_tables(1, vec![2, 2], vec![vec![0.0, 0.9], vec![1.0, 0.0]])
            .unwrap();
        assert!(unnorm.check(&game).is_err());
        assert!(ProductPolicy::uniform(&game).check(&game).is_ok());
    }

    fn random_policy(raw: Vec<f64>) -> ProductPolicy {
        // 3 agents with counts [2, 3, 2], 2 states.
        let counts = [2usize, 3, 2];
        let mut it = raw.into_iter();
        let probs = counts
            .iter()
            .map(|&c| {
                let mut t = Vec::new();
                for _ in 0..2 {
                    let w: Vec<f64> = (0..c).map(|_| it.next().unwrap()).collect();
                    let z: f64 = w.iter().sum();
                    t.extend(w.iter().map(|x| x / z));
                }
                t
            })
            .collect();
        ProductPolicy::from_tables(2, counts.to_vec(), probs).unwrap()
    }

    proptest! {
        #[test]
        fn compose_marginal_round_trip_is_bitwise(raw in proptest::collection::vec(0.01f64..1.0, 14), agent in 0usize..3) {
            let pi = random_policy(raw);
            let others = marginal_without(&pi, agent).unwrap();
            let back = others.compose_with(pi.table(agent)).unwrap();
            prop_assert_eq!(back, pi);
        }

        #[test]
        fn joint_support_matches_joint_prob(raw in proptest::collection::vec(0.01f64..1.0, 14)) {
            let pi = random_policy(raw);
            let space = JointActionSpace::new(&[2, 3, 2]);
            for s in 0..2 {
                let support = pi.joint_support(&space, s);
                let total: f64 = support.iter().map(|x| x.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for (a, p) in support {
                    prop_assert!((p - pi.joint_prob(&space, s, a)).abs() < 1e-15);
                }
            }
        }
    }
}
