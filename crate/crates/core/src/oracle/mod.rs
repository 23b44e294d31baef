//! Nash oracles for unconstrained (Lagrangian) Markov games.
//!
//! [`RelativeValueIteration`] is the exact production oracle for
//! identical-interest games, where a joint optimum is an equilibrium.
//! [`OptimisticPolicyIteration`] solves the same problem with TD-based
//! evaluation between greedy improvements. [`BruteForceOracle`] enumerates
//! deterministic product policies and is the ground truth for tiny games of
//! any interest structure. Other solvers plug in through [`NashOracle`].
//!
//! Oracles search deterministic policies. When the game carries a KL control
//! cost, a deterministic move's cost is `-ln q(destination)`.

mod brute;
mod dual;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::ProductPolicy;
use crate::lagrangian::LagrangianGame;
use crate::mdp::{MdpBuilder, MdpSolution, TabularMdp};

pub use brute::{best_deterministic_gain, brute_force_ne, ENUMERATION_LIMIT, NE_TOL};
pub use dual::{best_response_residual, danskin_check, generalized_dual, DanskinReport, DANSKIN_SLACK};

/// Tolerances shared by the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    /// Span tolerance on successive relative values.
    pub tol: f64,
    pub max_iter: usize,
    /// Evaluation sweeps between greedy improvements (optimistic PI only).
    pub sweeps: usize,
    /// TD(0) step size (optimistic PI only).
    pub td_step: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200_000,
            sweeps: 20,
            td_step: 1.0,
        }
    }
}

/// A stationary policy returned by an oracle, with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub policy: ProductPolicy,
    /// Per-agent gain, measured from state 0.
    pub gain: Vec<f64>,
    /// Gain of agent 0 from every start state. Constant on each closed
    /// communicating piece of the state space.
    pub state_gain: Vec<f64>,
    /// Relative value function (zero at each component's reference state).
    /// Empty for enumeration results.
    pub bias: Vec<f64>,
    pub iterations: usize,
    /// Bellman span residual at termination.
    pub residual: f64,
    pub converged: bool,
}

/// Anything that maps a Lagrangian game to one of its stationary equilibria.
pub trait NashOracle {
    fn name(&self) -> &'static str;

    /// `warm_start` is the previous epoch's result, if any; solvers may
    /// ignore it.
    fn solve(&self, lgame: &LagrangianGame<'_>, warm_start: Option<&OracleResult>) -> Result<OracleResult>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RelativeValueIteration {
    pub settings: OracleSettings,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OptimisticPolicyIteration {
    pub settings: OracleSettings,
}

/// Returns the first equilibrium in enumeration order.
#[derive(Debug, Clone, Copy, Default)]
pub struct BruteForceOracle;

impl NashOracle for RelativeValueIteration {
    fn name(&self) -> &'static str {
        "rvi"
    }

    fn solve(&self, lgame: &LagrangianGame<'_>, warm_start: Option<&OracleResult>) -> Result<OracleResult> {
        let mdp = joint_mdp(lgame)?;
        let warm = warm_start.map(|w| w.bias.as_slice()).filter(|b| !b.is_empty());
        let sol = mdp.relative_value_iteration(self.settings.tol, self.settings.max_iter, warm);
        Ok(into_result(lgame, sol))
    }
}

impl NashOracle for OptimisticPolicyIteration {
    fn name(&self) -> &'static str {
        "optimistic_pi"
    }

    fn solve(&self, lgame: &LagrangianGame<'_>, warm_start: Option<&OracleResult>) -> Result<OracleResult> {
        let mdp = joint_mdp(lgame)?;
        let warm = warm_start.map(|w| w.bias.as_slice()).filter(|b| !b.is_empty());
        let s = self.settings;
        let sol = mdp.optimistic_policy_iteration(s.tol, s.max_iter, s.sweeps, s.td_step, warm);
        Ok(into_result(lgame, sol))
    }
}

impl NashOracle for BruteForceOracle {
    fn name(&self) -> &'static str {
        "brute_force"
    }

    fn solve(&self, lgame: &LagrangianGame<'_>, _warm_start: Option<&OracleResult>) -> Result<OracleResult> {
        brute_force_ne(lgame)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidArgument("game has no deterministic stationary equilibrium".into()))
    }
}

/// Exact identical-interest oracle: relative value iteration on the
/// joint-action MDP, greedy joint policy factored into a deterministic
/// product policy. A hit iteration cap is reported through
/// [`OracleResult::converged`].
pub fn solve_identical_interest(lgame: &LagrangianGame<'_>, tol: f64, max_iter: usize) -> Result<OracleResult> {
    RelativeValueIteration {
        settings: OracleSettings {
            tol,
            max_iter,
            ..OracleSettings::default()
        },
    }
    .solve(lgame, None)
}

/// Joint-action MDP of an identical-interest Lagrangian game.
fn joint_mdp(lgame: &LagrangianGame<'_>) -> Result<TabularMdp> {
    lgame.check_identical_interest()?;
    let game = lgame.base();
    let space = game.joint_actions();
    let control = match (game.control(), game.layout()) {
        (Some(c), Some(l)) if c.weight != 0.0 => Some((c, l)),
        _ => None,
    };
    let mut builder = MdpBuilder::new(game.num_states());
    for s in 0..game.num_states() {
        for a in game.allowed_joint_actions(s) {
            let mut r = lgame.augmented_reward(0, s, a);
            if let Some((c, l)) = control {
                r += c.deterministic_adjustment(l, space, s, a);
            }
            builder.action(a, r, game.transitions(s, a).iter().copied());
        }
        builder.finish_state();
    }
    builder.build()
}

fn into_result(lgame: &LagrangianGame<'_>, sol: MdpSolution) -> OracleResult {
    let game = lgame.base();
    let policy = ProductPolicy::from_joint_choices(game.joint_actions(), &sol.actions);
    OracleResult {
        policy,
        gain: vec![sol.state_gain[0]; game.num_agents()],
        state_gain: sol.state_gain,
        bias: sol.bias,
        iterations: sol.iterations,
        residual: sol.residual,
        converged: sol.converged,
    }
}
