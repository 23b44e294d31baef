//! Grid layouts and the KL control cost attached to grid games.

use alloc::vec;
use alloc::vec::Vec;

use super::{JointActionSpace, ProductPolicy};
use crate::error::{Error, Result};

/// Per-agent grid coordinates of joint states.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    /// `cell_of[agent][state]`: 0-based row-major cell of `agent` in `state`.
    pub cell_of: Vec<Vec<usize>>,
}

impl GridLayout {
    pub fn num_cells(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn cell(&self, agent: usize, state: usize) -> usize {
        self.cell_of[agent][state]
    }

    pub(crate) fn check(&self, agents: usize, states: usize) -> Result<()> {
        if self.cell_of.len() != agents {
            return Err(Error::DimensionMismatch {
                what: "layout agents",
                expected: agents,
                found: self.cell_of.len(),
            });
        }
        for cells in &self.cell_of {
            if cells.len() != states {
                return Err(Error::DimensionMismatch {
                    what: "layout states",
                    expected: states,
                    found: cells.len(),
                });
            }
            if let Some(&c) = cells.iter().find(|&&c| c >= self.num_cells()) {
                return Err(Error::IndexOutOfRange {
                    what: "layout cell",
                    index: c,
                    len: self.num_cells(),
                });
            }
        }
        Ok(())
    }
}

/// Whether the control cost is subtracted from or added to the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlSign {
    /// `r̄ = r - κ·KL`
    Penalty,
    /// `r̄ = r + κ·KL`
    Bonus,
}

/// KL divergence between each agent's policy-induced next-cell distribution
/// and a natural drift distribution, weighted by `κ` and shared by every
/// agent as a reward adjustment.
///
/// For a product policy the joint KL is the sum of the per-agent terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCost {
    pub weight: f64,
    pub sign: ControlSign,
    /// `natural[agent][cell]`: sparse natural next-cell distribution.
    pub natural: Vec<Vec<Vec<(usize, f64)>>>,
    /// `destination[agent][cell][action]`: cell reached by `action`.
    pub destination: Vec<Vec<Vec<usize>>>,
}

impl ControlCost {
    pub(crate) fn check(&self, layout: &GridLayout, action_counts: &[usize]) -> Result<()> {
        let cells = layout.num_cells();
        if self.natural.len() != action_counts.len() || self.destination.len() != action_counts.len()
        {
            return Err(Error::DimensionMismatch {
                what: "control cost agents",
                expected: action_counts.len(),
                found: self.natural.len().min(self.destination.len()),
            });
        }
        for (agent, &count) in action_counts.iter().enumerate() {
            if self.natural[agent].len() != cells || self.destination[agent].len() != cells {
                return Err(Error::DimensionMismatch {
                    what: "control cost cells",
                    expected: cells,
                    found: self.natural[agent].len(),
                });
            }
            for dests in &self.destination[agent] {
                if dests.len() != count {
                    return Err(Error::DimensionMismatch {
                        what: "control cost actions",
                        expected: count,
                        found: dests.len(),
                    });
                }
                if let Some(&d) = dests.iter().find(|&&d| d >= cells) {
                    return Err(Error::IndexOutOfRange {
                        what: "destination cell",
                        index: d,
                        len: cells,
                    });
                }
            }
        }
        if !(self.weight >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "control cost weight must be nonnegative, got {}",
                self.weight
            )));
        }
        Ok(())
    }

    /// `±κ` according to the sign convention.
    pub fn signed_weight(&self) -> f64 {
        match self.sign {
            ControlSign::Penalty => -self.weight,
            ControlSign::Bonus => self.weight,
        }
    }

    fn natural_dense(&self, agent: usize, cell: usize, cells: usize) -> Vec<f64> {
        let mut q = vec![0.0; cells];
        for &(c, p) in &self.natural[agent][cell] {
            q[c] += p;
        }
        q
    }

    /// Next-cell distribution induced by an action distribution.
    pub fn next_cell_distribution(
        &self,
        layout: &GridLayout,
        agent: usize,
        state: usize,
        action_dist: &[f64],
    ) -> Vec<f64> {
        let cell = layout.cell(agent, state);
        let mut p = vec![0.0; layout.num_cells()];
        for (a, &w) in action_dist.iter().enumerate() {
            if w > 0.0 {
                p[self.destination[agent][cell][a]] += w;
            }
        }
        p
    }

    /// `KL(p_i(·|s) ‖ P⁰_i(·|s_i))` for one agent's action distribution.
    pub fn agent_kl(
        &self,
        layout: &GridLayout,
        agent: usize,
        state: usize,
        action_dist: &[f64],
    ) -> Result<f64> {
        let p = self.next_cell_distribution(layout, agent, state, action_dist);
        let q = self.natural_dense(agent, layout.cell(agent, state), layout.num_cells());
        kl_divergence(&p, &q)
    }

    /// KL of a deterministic move: `-ln q(destination)`.
    pub fn deterministic_kl(&self, layout: &GridLayout, agent: usize, state: usize, action: usize) -> f64 {
        let cell = layout.cell(agent, state);
        let dest = self.destination[agent][cell][action];
        let q: f64 = self.natural[agent][cell]
            .iter()
            .filter(|(c, _)| *c == dest)
            .map(|(_, p)| *p)
            .sum();
        if q > 0.0 {
            -libm::log(q)
        } else {
            f64::INFINITY
        }
    }

    /// Reward adjustment `±κ·Σ_i KL_i` at `state` under a product policy.
    pub fn state_adjustment(
        &self,
        layout: &GridLayout,
        state: usize,
        policy: &ProductPolicy,
    ) -> Result<f64> {
        let mut kl = 0.0;
        for i in 0..policy.num_agents() {
            kl += self.agent_kl(layout, i, state, policy.dist(i, state))?;
        }
        Ok(self.signed_weight() * kl)
    }

    /// Reward adjustment when every agent plays its component of `joint`
    /// deterministically.
    pub fn deterministic_adjustment(
        &self,
        layout: &GridLayout,
        space: &JointActionSpace,
        state: usize,
        joint: usize,
    ) -> f64 {
        if self.weight == 0.0 {
            return 0.0;
        }
        let kl: f64 = (0..space.counts().len())
            .map(|i| self.deterministic_kl(layout, i, state, space.component(joint, i)))
            .sum();
        self.signed_weight() * kl
    }
}

/// `KL(p ‖ q) = Σ_x p(x) ln(p(x) / q(x))` with `0·ln(0/q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "kl distributions",
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut kl = 0.0;
    for (idx, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::SupportViolation { index: idx });
            }
            kl += pi * libm::log(pi / qi);
        }
    }
    Ok(kl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_distributions_have_zero_kl() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn interior_uniform_move_against_sticky_drift() {
        // q = stay 0.9, each of 4 neighbors 0.025; p uniform over neighbors.
        let p = [0.0, 0.25, 0.25, 0.25, 0.25];
        let q = [0.9, 0.025, 0.025, 0.025, 0.025];
        let expect = 4.0 * 0.25 * libm::log(0.25 / 0.025);
        let kl = kl_divergence(&p, &q).unwrap();
        assert!((kl - expect).abs() < 1e-15);
        assert!((kl - core::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn corner_uniform_move_against_sticky_drift() {
        let p = [0.0, 0.5, 0.5];
        let q = [0.9, 0.05, 0.05];
        let kl = kl_divergence(&p, &q).unwrap();
        assert!((kl - core::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn support_violation_is_reported() {
        assert_eq!(
            kl_divergence(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::SupportViolation { index: 1 })
        );
    }
}
