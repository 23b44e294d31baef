//! Epoch rollouts, the game-dynamics loop, and the empirical metrics
//! computed from a finished episode.
//!
//! An episode is one unbroken trajectory of `K · T0` steps. At the start of
//! epoch `k` the oracle solves `G(λ_k)`, its policy is played for `T0`
//! steps from wherever the previous epoch ended, and the multipliers take
//! one projected dual-descent step on that epoch's costs.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{ConstrainedMarkovGame, EpochPolicySequence, ProductPolicy};
use crate::lagrangian::{build_lagrangian_game, dual_descent_step, Multipliers};
use crate::oracle::{best_response_residual, NashOracle, OracleResult, OracleSettings};

/// Feasibility verdicts use the last quarter of the trajectory.
pub const FINAL_WINDOW_FRACTION: f64 = 0.25;

/// Default tolerance of the feasibility verdict.
pub const FEASIBILITY_TOL: f64 = 0.05;

/// `T0` consecutive steps played under one stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRollout {
    pub epoch: usize,
    /// `s^t` for the epoch's `T0` steps.
    pub states: Vec<usize>,
    /// Joint action `a^t` for each step.
    pub actions: Vec<usize>,
    /// Base-game rewards, `[t * N + i]`.
    pub rewards: Vec<f64>,
    /// Constraint costs, `[t * m + j]`.
    pub costs: Vec<f64>,
    /// State after the last step; the next epoch starts here.
    pub terminal: usize,
    pub num_agents: usize,
    pub num_constraints: usize,
}

impl EpochRollout {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn reward_row(&self, t: usize) -> &[f64] {
        &self.rewards[t * self.num_agents..(t + 1) * self.num_agents]
    }

    pub fn cost_row(&self, t: usize) -> &[f64] {
        &self.costs[t * self.num_constraints..(t + 1) * self.num_constraints]
    }

    /// `ḡ_k = (1/T0) Σ_t (c(s^t, a^t) − b)`.
    pub fn average_surplus(&self, thresholds: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_constraints];
        for t in 0..self.len() {
            for (acc, c) in g.iter_mut().zip(self.cost_row(t)) {
                *acc += c;
            }
        }
        let n = self.len() as f64;
        g.iter().zip(thresholds).map(|(s, b)| s / n - b).collect()
    }
}

/// Draws an index from `(index, probability)` pairs.
fn sample<R: Rng + ?Sized>(rng: &mut R, items: impl IntoIterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = usize::MAX;
    for (k, p) in items {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    // rounding left `acc` a hair below 1
    last
}

/// Plays `policy` for `t0` steps from `s_init`, sampling each agent's
/// action independently and then the next state from the kernel.
pub fn rollout_epoch<R: Rng + ?Sized>(
    game: &ConstrainedMarkovGame,
    policy: &ProductPolicy,
    s_init: usize,
    t0: usize,
    epoch: usize,
    rng: &mut R,
) -> Result<EpochRollout> {
    if t0 == 0 {
        return Err(Error::InvalidArgument("epoch length must be at least 1".into()));
    }
    if s_init >= game.num_states() {
        return Err(Error::IndexOutOfRange {
            what: "initial state",
            index: s_init,
            len: game.num_states(),
        });
    }
    policy.check(game)?;
    let n = game.num_agents();
    let m = game.num_constraints();
    let space = game.joint_actions();
    let mut out = EpochRollout {
        epoch,
        states: Vec::with_capacity(t0),
        actions: Vec::with_capacity(t0),
        rewards: Vec::with_capacity(t0 * n),
        costs: Vec::with_capacity(t0 * m),
        terminal: s_init,
        num_agents: n,
        num_constraints: m,
    };
    let mut own = vec![0usize; n];
    let mut s = s_init;
    for _ in 0..t0 {
        for (i, slot) in own.iter_mut().enumerate() {
            *slot = sample(rng, policy.dist(i, s).iter().copied().enumerate());
        }
        let a = space.encode(&own);
        out.states.push(s);
        out.actions.push(a);
        out.rewards.extend((0..n).map(|i| game.reward(i, s, a)));
        out.costs.extend((0..m).map(|j| game.cost(j, s, a)));
        s = sample(rng, game.transitions(s, a).iter().copied());
    }
    out.terminal = s;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartState {
    Fixed(usize),
    /// Uniform over all states, drawn from the episode's stream.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayConfig {
    /// Number of epochs `K`.
    pub epochs: usize,
    /// Steps per epoch `T0`.
    pub epoch_length: usize,
    /// Dual step size `η`.
    pub step_size: f64,
    pub lambda0: Vec<f64>,
    pub start: StartState,
    /// When set, each epoch also records every agent's best-response
    /// residual from the epoch's first state.
    pub best_response: Option<OracleSettings>,
}

impl PlayConfig {
    pub fn validate(&self, game: &ConstrainedMarkovGame) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if self.epoch_length == 0 {
            return Err(Error::InvalidArgument("epoch length must be at least 1".into()));
        }
        if self.lambda0.len() != game.num_constraints() {
            return Err(Error::DimensionMismatch {
                what: "lambda0",
                expected: game.num_constraints(),
                found: self.lambda0.len(),
            });
        }
        if let StartState::Fixed(s) = self.start {
            if s >= game.num_states() {
                return Err(Error::IndexOutOfRange {
                    what: "initial state",
                    index: s,
                    len: game.num_states(),
                });
            }
        }
        Multipliers::new(self.lambda0.clone(), self.step_size).map(|_| ())
    }
}

/// Per-epoch solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleStats {
    pub iterations: usize,
    pub residual: f64,
    /// Empty unless best-response tracking was requested.
    pub best_response_residual: Vec<f64>,
}

/// Curves derived from the raw rollouts of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCurves {
    /// `(1/(t+1)) Σ_{u≤t} c(s^u, a^u)`, `[t * m + j]`.
    pub running_avg_cost: Vec<f64>,
    /// Same for base rewards, `[t * N + i]`.
    pub running_avg_reward: Vec<f64>,
    /// `ḡ_k` per epoch, `[k * m + j]`.
    pub epoch_surplus: Vec<f64>,
    /// `(1/K') Σ_{k<K'} λ_kᵀ ḡ_k` for `K' = 1..=K`.
    pub slackness_partial: Vec<f64>,
    /// Visits per state over all `K · T0` steps.
    pub occupancy_counts: Vec<u64>,
    /// Running maximum of `‖λ_k‖₁` for `k = 0..=K`.
    pub max_lambda_norm: Vec<f64>,
}

impl MetricCurves {
    pub fn compute(
        rollouts: &[EpochRollout],
        lambda_trace: &[Multipliers],
        thresholds: &[f64],
        num_states: usize,
    ) -> Self {
        let m = thresholds.len();
        let n = rollouts.first().map_or(0, |r| r.num_agents);
        let steps: usize = rollouts.iter().map(EpochRollout::len).sum();
        let mut running_avg_cost = Vec::with_capacity(steps * m);
        let mut running_avg_reward = Vec::with_capacity(steps * n);
        let mut cost_sum = vec![0.0; m];
        let mut reward_sum = vec![0.0; n];
        let mut occupancy_counts = vec![0u64; num_states];
        let mut t = 0usize;
        for r in rollouts {
            for u in 0..r.len() {
                t += 1;
                occupancy_counts[r.states[u]] += 1;
                for (acc, c) in cost_sum.iter_mut().zip(r.cost_row(u)) {
                    *acc += c;
                }
                for (acc, x) in reward_sum.iter_mut().zip(r.reward_row(u)) {
                    *acc += x;
                }
                running_avg_cost.extend(cost_sum.iter().map(|s| s / t as f64));
                running_avg_reward.extend(reward_sum.iter().map(|s| s / t as f64));
            }
        }
        let mut epoch_surplus = Vec::with_capacity(rollouts.len() * m);
        let mut slackness_partial = Vec::with_capacity(rollouts.len());
        let mut acc = 0.0;
        for (k, r) in rollouts.iter().enumerate() {
            let g = r.average_surplus(thresholds);
            acc += dot(lambda_trace[k].values(), &g);
            slackness_partial.push(acc / (k + 1) as f64);
            epoch_surplus.extend(g);
        }
        let mut max_lambda_norm = Vec::with_capacity(lambda_trace.len());
        let mut best = f64::NEG_INFINITY;
        for l in lambda_trace {
            best = best.max(l.l1_norm());
            max_lambda_norm.push(best);
        }
        Self {
            running_avg_cost,
            running_avg_reward,
            epoch_surplus,
            slackness_partial,
            occupancy_counts,
            max_lambda_norm,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Everything produced by one run of the game dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub config: PlayConfig,
    pub seed: u64,
    pub start_state: usize,
    pub thresholds: Vec<f64>,
    /// `B` of the game, `max |c_j − b_j|`.
    pub cost_bound: f64,
    /// `λ_0, …, λ_K`.
    pub lambda_trace: Vec<Multipliers>,
    pub policies: EpochPolicySequence,
    pub rollouts: Vec<EpochRollout>,
    pub oracle_stats: Vec<OracleStats>,
    pub metrics: MetricCurves,
}

impl EpisodeRecord {
    pub fn num_epochs(&self) -> usize {
        self.rollouts.len()
    }

    pub fn num_steps(&self) -> usize {
        self.rollouts.iter().map(EpochRollout::len).sum()
    }

    /// The full state trajectory `s^0, …, s^{K·T0 − 1}`.
    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.rollouts.iter().flat_map(|r| r.states.iter().copied())
    }
}

/// Runs `K` epochs of oracle solve, rollout and dual step. The episode's
/// randomness (start state, actions, transitions) comes from a single
/// `ChaCha8` stream seeded with `seed`; the oracle is warm-started from the
/// previous epoch's result.
///
/// An oracle that reports non-convergence aborts the episode with
/// [`Error::OracleFailed`].
pub fn play<O: NashOracle + ?Sized>(
    game: &ConstrainedMarkovGame,
    config: &PlayConfig,
    oracle: &O,
    seed: u64,
) -> Result<EpisodeRecord> {
    config.validate(game)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start_state = match config.start {
        StartState::Fixed(s) => s,
        StartState::Uniform => rng.gen_range(0..game.num_states()),
    };
    let thresholds = game.thresholds().to_vec();
    let mut lambda = Multipliers::new(config.lambda0.clone(), config.step_size)?;
    let mut lambda_trace = Vec::with_capacity(config.epochs + 1);
    let mut policies = EpochPolicySequence::new(config.epoch_length);
    let mut rollouts = Vec::with_capacity(config.epochs);
    let mut oracle_stats = Vec::with_capacity(config.epochs);
    let mut warm: Option<OracleResult> = None;
    let mut s = start_state;
    for k in 0..config.epochs {
        let lgame = build_lagrangian_game(game, lambda.values())?;
        let result = match oracle.solve(&lgame, warm.as_ref()) {
            Ok(r) if r.converged => r,
            Ok(r) => {
                return Err(Error::OracleFailed {
                    epoch: k,
                    residual: r.residual,
                })
            }
            Err(Error::NotConverged { residual, .. }) => {
                return Err(Error::OracleFailed { epoch: k, residual })
            }
            Err(e) => return Err(e),
        };
        let best_response = match &config.best_response {
            Some(settings) => (0..game.num_agents())
                .map(|i| best_response_residual(&lgame, &result.policy, i, s, settings))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        oracle_stats.push(OracleStats {
            iterations: result.iterations,
            residual: result.residual,
            best_response_residual: best_response,
        });
        let rollout = rollout_epoch(game, &result.policy, s, config.epoch_length, k, &mut rng)?;
        s = rollout.terminal;
        let m = thresholds.len();
        let next = dual_descent_step(
            &lambda,
            (0..rollout.len()).map(|t| &rollout.costs[t * m..(t + 1) * m]),
            &thresholds,
        )?;
        lambda_trace.push(core::mem::replace(&mut lambda, next));
        policies.policies.push(result.policy.clone());
        rollouts.push(rollout);
        warm = Some(result);
    }
    lambda_trace.push(lambda);
    let metrics = MetricCurves::compute(&rollouts, &lambda_trace, &thresholds, game.num_states());
    Ok(EpisodeRecord {
        config: config.clone(),
        seed,
        start_state,
        cost_bound: game.cost_bound(),
        thresholds,
        lambda_trace,
        policies,
        rollouts,
        oracle_stats,
        metrics,
    })
}

/// Running-average cost curves and the final-window verdict per constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// `curves[j][t]`: running average of `c_j` after `t + 1` steps.
    pub curves: Vec<Vec<f64>>,
    /// Mean of `c_j` over the final window of steps.
    pub window_average: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub tolerance: f64,
    /// `window_average[j] ≥ b_j − tolerance`.
    pub feasible: Vec<bool>,
}

impl FeasibilityReport {
    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }
}

/// First step of the final window over `steps` steps.
pub fn final_window_start(steps: usize) -> usize {
    let len = (libm::round(steps as f64 * FINAL_WINDOW_FRACTION) as usize).clamp(1, steps.max(1));
    steps - len.min(steps)
}

/// Mean of each column of a row-major `[t * width + c]` table over the
/// final window.
fn window_mean(record: &EpisodeRecord, width: usize, row: impl Fn(&EpochRollout, usize) -> &[f64]) -> Vec<f64> {
    let steps = record.num_steps();
    let from = final_window_start(steps);
    let mut sums = vec![0.0; width];
    let mut t = 0;
    for r in &record.rollouts {
        for u in 0..r.len() {
            if t >= from {
                for (acc, x) in sums.iter_mut().zip(row(r, u)) {
                    *acc += x;
                }
            }
            t += 1;
        }
    }
    let n = (steps - from).max(1) as f64;
    sums.iter().map(|s| s / n).collect()
}

/// Mean constraint cost over the last quarter of steps.
pub fn final_window_cost(record: &EpisodeRecord) -> Vec<f64> {
    window_mean(record, record.thresholds.len(), |r, u| r.cost_row(u))
}

/// Mean base reward per agent over the last quarter of steps.
pub fn final_window_reward(record: &EpisodeRecord) -> Vec<f64> {
    let n = record.rollouts.first().map_or(0, |r| r.num_agents);
    window_mean(record, n, |r, u| r.reward_row(u))
}

pub fn feasibility_curve(record: &EpisodeRecord, tolerance: f64) -> FeasibilityReport {
    let m = record.thresholds.len();
    let steps = record.num_steps();
    let curves = (0..m)
        .map(|j| (0..steps).map(|t| record.metrics.running_avg_cost[t * m + j]).collect())
        .collect();
    let window_average = final_window_cost(record);
    let feasible = window_average
        .iter()
        .zip(&record.thresholds)
        .map(|(w, b)| *w >= b - tolerance)
        .collect();
    FeasibilityReport {
        curves,
        window_average,
        thresholds: record.thresholds.clone(),
        tolerance,
        feasible,
    }
}

/// `(1/K) Σ_k λ_kᵀ ḡ_k` over the whole episode.
pub fn slackness_metric(record: &EpisodeRecord) -> f64 {
    record.metrics.slackness_partial.last().copied().unwrap_or(0.0)
}

/// `η m B² / 2 + ‖λ_0‖² / (2ηK)`, which bounds [`slackness_metric`] on
/// every run because the projected step is nonexpansive. With a single
/// constraint this is `ηB²/2 + ‖λ_0‖²/(2ηK)`.
pub fn slackness_bound(record: &EpisodeRecord) -> f64 {
    let eta = record.config.step_size;
    let m = record.thresholds.len() as f64;
    let b = record.cost_bound;
    let l0: f64 = record.config.lambda0.iter().map(|x| x * x).sum();
    let k = record.num_epochs() as f64;
    eta * m * b * b / 2.0 + l0 / (2.0 * eta * k)
}

/// Per-state visit counts and, for grid games, per-agent cell counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub per_state: Vec<u64>,
    /// `per_agent_cell[i][cell]`.
    pub per_agent_cell: Option<Vec<Vec<u64>>>,
}

pub fn occupancy_counts(game: &ConstrainedMarkovGame, record: &EpisodeRecord) -> Occupancy {
    let per_state = record.metrics.occupancy_counts.clone();
    let per_agent_cell = game.layout().map(|layout| {
        (0..game.num_agents())
            .map(|i| {
                let mut cells = vec![0u64; layout.num_cells()];
                for (s, &c) in per_state.iter().enumerate() {
                    cells[layout.cell(i, s)] += c;
                }
                cells
            })
            .collect()
    });
    Occupancy {
        per_state,
        per_agent_cell,
    }
}
