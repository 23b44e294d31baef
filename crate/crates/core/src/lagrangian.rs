//! Lagrangian games `G(λ)` and the projected dual-descent multiplier update.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::{
    eval, ConstrainedMarkovGame, ProductPolicy, StationaryEvaluation, PROB_TOL,
};

/// Nonnegative Lagrange multipliers together with the dual step size `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    values: Vec<f64>,
    step_size: f64,
}

impl Multipliers {
    pub fn new(values: Vec<f64>, step_size: f64) -> Result<Self> {
        if !(step_size > 0.0) || !step_size.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive and finite, got {step_size}"
            )));
        }
        check_nonnegative(&values)?;
        Ok(Self { values, step_size })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_nonnegative(values: &[f64]) -> Result<()> {
    if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "multiplier {j} must be nonnegative, got {v}"
        )));
    }
    Ok(())
}

/// One projected dual-descent step from an epoch of realized costs:
///
/// `λ_j ← max(0, λ_j − (η / T0) Σ_t (c_j(s^t, a^t) − b_j))`.
pub fn dual_descent_step<'a, I>(lambda: &Multipliers, epoch_costs: I, thresholds: &[f64]) -> Result<Multipliers>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let m = thresholds.len();
    if lambda.values.len() != m {
        return Err(Error::DimensionMismatch {
            what: "multipliers",
            expected: m,
            found: lambda.values.len(),
        });
    }
    let mut sums = alloc::vec![0.0; m];
    let mut steps = 0usize;
    for costs in epoch_costs {
        if costs.len() != m {
            return Err(Error::DimensionMismatch {
                what: "cost vector",
                expected: m,
                found: costs.len(),
            });
        }
        for ((acc, c), b) in sums.iter_mut().zip(costs).zip(thresholds) {
            *acc += c - b;
        }
        steps += 1;
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("epoch has no cost samples".into()));
    }
    let scale = lambda.step_size / steps as f64;
    let values = lambda
        .values
        .iter()
        .zip(&sums)
        .map(|(l, g)| (l - scale * g).max(0.0))
        .collect();
    Ok(Multipliers {
        values,
        step_size: lambda.step_size,
    })
}

/// The unconstrained game whose per-step reward for agent `i` is
/// `r_i(s,a) + Σ_j λ_j (c_j(s,a) − b_j)`.
///
/// By linearity of the time average its value under any stationary policy is
/// `V_i(π) + λᵀ(U(π) − b)`. Any control-cost adjustment of the base game
/// stays attached.
#[derive(Debug, Clone)]
pub struct LagrangianGame<'g> {
    base: &'g ConstrainedMarkovGame,
    lambda: Vec<f64>,
    augmented_reward: Vec<f64>,
}

pub fn build_lagrangian_game<'g>(
    game: &'g ConstrainedMarkovGame,
    lambda: &[f64],
) -> Result<LagrangianGame<'g>> {
    let m = game.num_constraints();
    if lambda.len() != m {
        return Err(Error::DimensionMismatch {
            what: "lambda",
            expected: m,
            found: lambda.len(),
        });
    }
    check_nonnegative(lambda)?;
    let s_count = game.num_states();
    let j_count = game.num_joint_actions();
    let mut augmented_reward = game.reward_table().to_vec();
    let per = s_count * j_count;
    for (j, (&l, &b)) in lambda.iter().zip(game.thresholds()).enumerate() {
        if l == 0.0 {
            continue;
        }
        let cost = &game.cost_table()[j * per..(j + 1) * per];
        for agent in 0..game.num_agents() {
            for (r, c) in augmented_reward[agent * per..(agent + 1) * per]
                .iter_mut()
                .zip(cost)
            {
                *r += l * (c - b);
            }
        }
    }
    Ok(LagrangianGame {
        base: game,
        lambda: lambda.to_vec(),
        augmented_reward,
    })
}

impl<'g> LagrangianGame<'g> {
    pub fn base(&self) -> &'g ConstrainedMarkovGame {
        self.base
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    #[inline]
    pub fn augmented_reward(&self, agent: usize, state: usize, joint: usize) -> f64 {
        let s = self.base.num_states();
        let j = self.base.num_joint_actions();
        self.augmented_reward[(agent * s + state) * j + joint]
    }

    pub fn augmented_table(&self) -> &[f64] {
        &self.augmented_reward
    }

    /// Fails unless every agent's augmented reward agrees with agent 0's
    /// within `1e-12` on allowed joint actions.
    pub fn check_identical_interest(&self) -> Result<()> {
        let g = self.base;
        for s in 0..g.num_states() {
            for a in 0..g.num_joint_actions() {
                if !g.joint_allowed(s, a) {
                    continue;
                }
                let r0 = self.augmented_reward(0, s, a);
                for i in 1..g.num_agents() {
                    if (self.augmented_reward(i, s, a) - r0).abs() > PROB_TOL {
                        return Err(Error::NotIdenticalInterest {
                            agent: i,
                            state: s,
                            action: a,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// `L_i(π, λ)` for a unichain policy; `gain_per_agent` holds the
    /// Lagrangian values.
    pub fn evaluate_stationary(&self, policy: &ProductPolicy) -> Result<StationaryEvaluation> {
        policy.check(self.base)?;
        let chain = crate::game::induced_chain(self.base, policy)?;
        let mu = crate::game::stationary_distribution(&chain)?;
        eval::evaluate_with(self.base, &self.augmented_reward, policy, mu)
    }

    /// `L_i(π, λ)` from a fixed initial state.
    pub fn evaluate_from(&self, policy: &ProductPolicy, start: usize) -> Result<StationaryEvaluation> {
        policy.check(self.base)?;
        let mu = eval::limiting_distribution(self.base, policy, start)?;
        eval::evaluate_with(self.base, &self.augmented_reward, policy, mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::uniform_parts;
    use crate::game::evaluate_stationary;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn costs(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&c| vec![c]).collect()
    }

    fn step(lambda: f64, eta: f64, c: &[f64], b: f64) -> f64 {
        let l = Multipliers::new(vec![lambda], eta).unwrap();
        let c = costs(c);
        dual_descent_step(&l, c.iter().map(|v| v.as_slice()), &[b])
            .unwrap()
            .values()[0]
    }

    #[test]
    fn dual_step_one_sample() {
        assert_eq!(step(5.0, 1.0, &[0.0], 0.25), 5.25);
    }

    #[test]
    fn dual_step_projects_to_zero() {
        assert_eq!(step(0.1, 1.0, &[2.0], 0.25), 0.0);
    }

    #[test]
    fn dual_step_two_samples() {
        assert_eq!(step(1.0, 0.5, &[1.0, 0.0], 0.25), 0.875);
    }

    #[test]
    fn dual_step_errors() {
        let l = Multipliers::new(vec![1.0], 1.0).unwrap();
        let empty: Vec<&[f64]> = Vec::new();
        assert!(dual_descent_step(&l, empty, &[0.0]).is_err());
        let bad = [vec![1.0, 2.0]];
        assert!(dual_descent_step(&l, bad.iter().map(|v| v.as_slice()), &[0.0]).is_err());
        assert!(Multipliers::new(vec![-1.0], 1.0).is_err());
        assert!(Multipliers::new(vec![1.0], 0.0).is_err());
    }

    fn one_constraint_game(cost: f64, b: f64) -> ConstrainedMarkovGame {
        let mut parts = uniform_parts(2, &[2, 1], vec![vec![(0, 0.5), (1, 0.5)]; 4]);
        parts.reward = vec![0.0, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0, 3.0];
        parts.cost = vec![cost; 4];
        parts.thresholds = vec![b];
        ConstrainedMarkovGame::new(parts).unwrap()
    }

    #[test]
    fn zero_multiplier_keeps_rewards() {
        let game = one_constraint_game(1.0, 0.25);
        let lg = build_lagrangian_game(&game, &[0.0]).unwrap();
        assert_eq!(lg.augmented_table(), game.reward_table());
    }

    #[test]
    fn augmentation_formula() {
        let game = one_constraint_game(1.0, 0.25);
        let lg = build_lagrangian_game(&game, &[2.0]).unwrap();
        for (aug, r) in lg.augmented_table().iter().zip(game.reward_table()) {
            assert_eq!(*aug, r + 1.5);
        }
    }

    #[test]
    fn lambda_errors() {
        let game = one_constraint_game(1.0, 0.25);
        assert!(build_lagrangian_game(&game, &[]).is_err());
        assert!(build_lagrangian_game(&game, &[-0.5]).is_err());
    }

    fn random_game(rng: &mut ChaCha8Rng) -> ConstrainedMarkovGame {
        let s = rng.gen_range(1..=3usize);
        let counts = [rng.gen_range(1..=2usize), rng.gen_range(1..=2usize)];
        let j = counts[0] * counts[1];
        let kernel = (0..s * j)
            .map(|_| {
                let w: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
                let z: f64 = w.iter().sum();
                w.iter().enumerate().map(|(t, x)| (t, x / z)).collect()
            })
            .collect();
        let mut parts = uniform_parts(s, &counts, kernel);
        parts.reward = (0..2 * s * j).map(|_| rng.gen_range(-1.0..1.0)).collect();
        parts.cost = (0..2 * s * j).map(|_| rng.gen_range(-1.0..1.0)).collect();
        parts.thresholds = vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        ConstrainedMarkovGame::new(parts).unwrap()
    }

    #[test]
    fn lagrangian_value_identity_on_random_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let game = random_game(&mut rng);
            let lambda = [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
            let pi = ProductPolicy::uniform(&game);
            let lg = build_lagrangian_game(&game, &lambda).unwrap();
            let base = evaluate_stationary(&game, &pi).unwrap();
            let aug = lg.evaluate_stationary(&pi).unwrap();
            for i in 0..2 {
                let expect = base.gain_per_agent[i]
                    + lambda
                        .iter()
                        .zip(&base.gain_per_constraint)
                        .zip(game.thresholds())
                        .map(|((l, u), b)| l * (u - b))
                        .sum::<f64>();
                assert!((aug.gain_per_agent[i] - expect).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn dual_step_is_nonnegative_and_bounded(
            lambda in proptest::collection::vec(0.0f64..10.0, 2),
            samples in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 1..20),
            b in proptest::collection::vec(-1.0f64..1.0, 2),
            eta in 0.001f64..2.0,
        ) {
            let l = Multipliers::new(lambda.clone(), eta).unwrap();
            let next = dual_descent_step(&l, samples.iter().map(|v| v.as_slice()), &b).unwrap();
            let bound = samples.iter().flat_map(|v| v.iter().zip(&b).map(|(c, b)| (c - b).abs())).fold(0.0, f64::max);
            for (j, v) in next.values().iter().enumerate() {
                prop_assert!(*v >= 0.0);
                prop_assert!((v - lambda[j]).abs() <= eta * bound + 1e-12);
                let gbar: f64 = samples.iter().map(|c| c[j] - b[j]).sum::<f64>() / samples.len() as f64;
                let raw = lambda[j] - eta * gbar;
                if raw > 0.0 {
                    prop_assert!((v - lambda[j] + eta * gbar).abs() < 1e-9);
                }
            }
        }
    }
}
