//! Average-reward tabular MDPs: relative value iteration and optimistic
//! policy iteration, both run on the aperiodic transform
//! `P̃ = (1 − τ)I + τP` so that periodic dynamics still converge.
//!
//! Values are normalized per weakly connected component of the union
//! transition graph, each against its smallest state. This keeps the
//! iteration bounded when the state space splits into closed pieces that
//! never communicate (grid games with parity-preserving moves do).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::weak_components;

/// Weight on the original kernel in the aperiodic transform.
pub(crate) const APERIODIC_TAU: f64 = 0.5;

/// Ties within this (relative) margin keep the lower-indexed action.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct TabularMdp {
    num_states: usize,
    action_start: Vec<usize>,
    labels: Vec<usize>,
    rewards: Vec<f64>,
    trans_start: Vec<usize>,
    trans: Vec<(usize, f64)>,
    component: Vec<usize>,
    reference: Vec<usize>,
}

pub(crate) struct MdpBuilder {
    mdp: TabularMdp,
}

impl MdpBuilder {
    pub(crate) fn new(num_states: usize) -> Self {
        Self {
            mdp: TabularMdp {
                num_states,
                action_start: vec![0],
                labels: Vec::new(),
                rewards: Vec::new(),
                trans_start: vec![0],
                trans: Vec::new(),
                component: Vec::new(),
                reference: Vec::new(),
            },
        }
    }

    /// Adds an action to the state currently being built.
    pub(crate) fn action(&mut self, label: usize, reward: f64, transitions: impl IntoIterator<Item = (usize, f64)>) {
        self.mdp.labels.push(label);
        self.mdp.rewards.push(reward);
        self.mdp.trans.extend(transitions);
        self.mdp.trans_start.push(self.mdp.trans.len());
    }

    /// Closes the current state.
    pub(crate) fn finish_state(&mut self) {
        self.mdp.action_start.push(self.mdp.labels.len());
    }

    pub(crate) fn build(mut self) -> Result<TabularMdp> {
        let mdp = &mut self.mdp;
        if mdp.action_start.len() != mdp.num_states + 1 {
            return Err(Error::DimensionMismatch {
                what: "mdp states",
                expected: mdp.num_states,
                found: mdp.action_start.len() - 1,
            });
        }
        let mut adj = vec![Vec::new(); mdp.num_states];
        for s in 0..mdp.num_states {
            if mdp.action_start[s] == mdp.action_start[s + 1] {
                return Err(Error::InvalidArgument(alloc::format!(
                    "state {s} has no allowed action"
                )));
            }
            for slot in mdp.action_start[s]..mdp.action_start[s + 1] {
                for &(t, p) in &mdp.trans[mdp.trans_start[slot]..mdp.trans_start[slot + 1]] {
                    if p > 0.0 {
                        adj[s].push(t);
                    }
                }
            }
        }
        let (component, count) = weak_components(&adj);
        let mut reference = vec![usize::MAX; count];
        for (s, &c) in component.iter().enumerate() {
            if reference[c] == usize::MAX {
                reference[c] = s;
            }
        }
        mdp.component = component;
        mdp.reference = reference;
        Ok(self.mdp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MdpSolution {
    /// Chosen action label per state.
    pub actions: Vec<usize>,
    /// Gain of each state's component.
    pub state_gain: Vec<f64>,
    /// Relative value `h` with `h(reference) = 0` in each component.
    pub bias: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl TabularMdp {
    #[inline]
    fn q_value(&self, slot: usize, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(t, p) in &self.trans[self.trans_start[slot]..self.trans_start[slot + 1]] {
            acc += p * v[t];
        }
        self.rewards[slot] + APERIODIC_TAU * acc
    }

    /// Optimality sweep: `w(s) = (1−τ)v(s) + max_a [r(s,a) + τ Σ P v]`.
    fn greedy_sweep(&self, v: &[f64], w: &mut [f64], choice: &mut [usize]) {
        for s in 0..self.num_states {
            let start = self.action_start[s];
            let mut best = self.q_value(start, v);
            let mut best_slot = start;
            for slot in start + 1..self.action_start[s + 1] {
                let q = self.q_value(slot, v);
                if q > best + TIE_EPS * best.abs().max(1.0) {
                    best = q;
                    best_slot = slot;
                }
            }
            w[s] = (1.0 - APERIODIC_TAU) * v[s] + best;
            choice[s] = best_slot;
        }
    }

    fn policy_sweep(&self, v: &[f64], w: &mut [f64], choice: &[usize]) {
        for s in 0..self.num_states {
            w[s] = (1.0 - APERIODIC_TAU) * v[s] + self.q_value(choice[s], v);
        }
    }

    /// Max over components of `span(w − v)`, and the midpoint gain estimate
    /// per component.
    fn residual(&self, v: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
        let k = self.reference.len();
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for s in 0..self.num_states {
            let d = w[s] - v[s];
            let c = self.component[s];
            lo[c] = lo[c].min(d);
            hi[c] = hi[c].max(d);
        }
        let residual = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max);
        let gains = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        (residual, gains)
    }

    fn normalize(&self, w: &[f64], v: &mut [f64]) {
        for s in 0..self.num_states {
            v[s] = w[s] - w[self.reference[self.component[s]]];
        }
    }

    fn initial_values(&self, warm: Option<&[f64]>) -> Vec<f64> {
        match warm {
            Some(h) if h.len() == self.num_states => {
                let mut v: Vec<f64> = h.iter().map(|x| x / APERIODIC_TAU).collect();
                let w = v.clone();
                self.normalize(&w, &mut v);
                v
            }
            _ => vec![0.0; self.num_states],
        }
    }

    fn solution(&self, v: Vec<f64>, choice: &[usize], gains: &[f64], iterations: usize, residual: f64, converged: bool) -> MdpSolution {
        MdpSolution {
            actions: choice.iter().map(|&slot| self.labels[slot]).collect(),
            state_gain: self.component.iter().map(|&c| gains[c]).collect(),
            bias: v.iter().map(|x| x * APERIODIC_TAU).collect(),
            iterations,
            residual,
            converged,
        }
    }

    /// Relative value iteration until `span(h_{n+1} − h_n) ≤ tol` in every
    /// component.
    pub(crate) fn relative_value_iteration(&self, tol: f64, max_iter: usize, warm: Option<&[f64]>) -> MdpSolution {
        let mut v = self.initial_values(warm);
        let mut w = vec![0.0; self.num_states];
        let mut choice = vec![0; self.num_states];
        let mut residual = f64::INFINITY;
        let mut gains = vec![0.0; self.reference.len()];
        let mut iterations = 0;
        while iterations < max_iter.max(1) {
            iterations += 1;
            self.greedy_sweep(&v, &mut w, &mut choice);
            let (r, g) = self.residual(&v, &w);
            residual = r;
            gains = g;
            self.normalize(&w, &mut v);
            if residual <= tol {
                return self.solution(v, &choice, &gains, iterations, residual, true);
            }
        }
        self.solution(v, &choice, &gains, iterations, residual, false)
    }

    /// Optimistic policy iteration: `sweeps` synchronous TD(0) evaluation
    /// sweeps with step `td_step` between greedy improvements. Every sweep
    /// counts toward `max_iter`.
    pub(crate) fn optimistic_policy_iteration(
        &self,
        tol: f64,
        max_iter: usize,
        sweeps: usize,
        td_step: f64,
        warm: Option<&[f64]>,
    ) -> MdpSolution {
        let mut v = self.initial_values(warm);
        let mut w = vec![0.0; self.num_states];
        let mut choice = vec![0; self.num_states];
        let mut residual;
        let mut gains;
        let mut iterations = 0;
        loop {
            iterations += 1;
            self.greedy_sweep(&v, &mut w, &mut choice);
            let (r, g) = self.residual(&v, &w);
            residual = r;
            gains = g;
            self.normalize(&w, &mut v);
            if residual <= tol {
                return self.solution(v, &choice, &gains, iterations, residual, true);
            }
            if iterations >= max_iter.max(1) {
                return self.solution(v, &choice, &gains, iterations, residual, false);
            }
            for _ in 0..sweeps {
                self.policy_sweep(&v, &mut w, &choice);
                // TD(0) expected update: v += α (r_π − g + P̃ v − v)
                for s in 0..self.num_states {
                    let g = w[self.reference[self.component[s]]];
                    v[s] += td_step * (w[s] - g - v[s]);
                }
                iterations += 1;
                if iterations >= max_iter {
                    break;
                }
            }
        }
    }
}
