//! Two hunters on a square grid. Both standing on the stag pays the large
//! reward, each hunter on a hare pays the small one, and the single
//! constraint asks that the time-averaged number of hunters at the resting
//! station be at least the threshold.
//!
//! Cells are labelled `1..=side²` in row-major order. Joint state index is
//! `side² · (cell_1 − 1) + (cell_2 − 1)`. Each hunter must move every step;
//! moves off the grid are masked.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::{ConstrainedMarkovGame, ControlCost, ControlSign, GameParts, GridLayout};

/// Per-agent move actions, in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrConfig {
    pub grid_side: usize,
    /// 1-based cell labels.
    pub hare_cells: Vec<usize>,
    pub stag_cells: Vec<usize>,
    pub rest_cells: Vec<usize>,
    pub stag_reward: f64,
    pub hare_reward: f64,
    pub rest_threshold: f64,
    pub kl_weight: f64,
    pub kl_sign: ControlSign,
    /// Probability that the natural drift keeps a hunter in place; the rest
    /// is split evenly over the adjacent cells.
    pub natural_stay_prob: f64,
}

impl Default for ShrConfig {
    fn default() -> Self {
        Self {
            grid_side: 5,
            hare_cells: vec![1, 5, 21, 25],
            stag_cells: vec![13],
            rest_cells: vec![2],
            stag_reward: 20.0,
            hare_reward: 2.0,
            rest_threshold: 0.5,
            kl_weight: 1.0,
            kl_sign: ControlSign::Penalty,
            natural_stay_prob: 0.9,
        }
    }
}

impl ShrConfig {
    pub fn num_cells(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// Joint state of two 1-based cells.
    pub fn joint_state(&self, cell_1: usize, cell_2: usize) -> usize {
        self.num_cells() * (cell_1 - 1) + (cell_2 - 1)
    }

    /// 1-based cells of a joint state.
    pub fn cells(&self, state: usize) -> (usize, usize) {
        (state / self.num_cells() + 1, state % self.num_cells() + 1)
    }

    /// 0-based destination of `mv` from 0-based `cell`, if it stays on the grid.
    pub fn destination(&self, cell: usize, mv: Move) -> Option<usize> {
        let n = self.grid_side;
        let (r, c) = (cell / n, cell % n);
        match mv {
            Move::Up if r > 0 => Some(cell - n),
            Move::Down if r + 1 < n => Some(cell + n),
            Move::Left if c > 0 => Some(cell - 1),
            Move::Right if c + 1 < n => Some(cell + 1),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.num_cells();
        if self.grid_side < 2 {
            return Err(Error::InvalidArgument("grid side must be at least 2".into()));
        }
        for (name, list) in [
            ("hare", &self.hare_cells),
            ("stag", &self.stag_cells),
            ("rest", &self.rest_cells),
        ] {
            if let Some(&c) = list.iter().find(|&&c| c == 0 || c > cells) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{name} cell {c} outside 1..={cells}"
                )));
            }
        }
        if !(self.rest_threshold > 0.0 && self.rest_threshold < 2.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "rest threshold {} outside (0, 2)",
                self.rest_threshold
            )));
        }
        if !(self.kl_weight >= 0.0) || !self.kl_weight.is_finite() {
            return Err(Error::InvalidArgument("kl weight must be finite and nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.natural_stay_prob) {
            return Err(Error::InvalidArgument("natural stay probability must be in [0, 1)".into()));
        }
        Ok(())
    }
}

pub fn build_shr(config: &ShrConfig) -> Result<ConstrainedMarkovGame> {
    config.validate()?;
    let cells = config.num_cells();
    let states = cells * cells;
    let joint = Move::ALL.len() * Move::ALL.len();
    let in_set = |list: &[usize], cell0: usize| list.contains(&(cell0 + 1));

    let mut allowed = Vec::with_capacity(states * 2);
    let mut reward = vec![0.0; 2 * states * joint];
    let mut cost = vec![0.0; states * joint];
    let mut kernel = Vec::with_capacity(states * joint);
    for s in 0..states {
        let (c1, c2) = (s / cells, s % cells);
        for c in [c1, c2] {
            allowed.push(
                Move::ALL
                    .iter()
                    .filter(|&&m| config.destination(c, m).is_some())
                    .map(|&m| m as usize)
                    .collect::<Vec<_>>(),
            );
        }
        let stag = if in_set(&config.stag_cells, c1) && in_set(&config.stag_cells, c2) {
            config.stag_reward
        } else {
            0.0
        };
        let hares = in_set(&config.hare_cells, c1) as u8 + in_set(&config.hare_cells, c2) as u8;
        let r = stag + config.hare_reward * f64::from(hares);
        let rest = in_set(&config.rest_cells, c1) as u8 + in_set(&config.rest_cells, c2) as u8;
        for a in 0..joint {
            reward[s * joint + a] = r;
            reward[(states + s) * joint + a] = r;
            cost[s * joint + a] = f64::from(rest);
            let (m1, m2) = (Move::ALL[a / 4], Move::ALL[a % 4]);
            let next = match (config.destination(c1, m1), config.destination(c2, m2)) {
                (Some(d1), Some(d2)) => cells * d1 + d2,
                _ => s,
            };
            kernel.push(vec![(next, 1.0)]);
        }
    }

    let cell_of = vec![
        (0..states).map(|s| s / cells).collect(),
        (0..states).map(|s| s % cells).collect(),
    ];
    let layout = GridLayout {
        rows: config.grid_side,
        cols: config.grid_side,
        cell_of,
    };
    let natural_one: Vec<Vec<(usize, f64)>> = (0..cells)
        .map(|c| {
            let nbrs: Vec<usize> = Move::ALL
                .iter()
                .filter_map(|&m| config.destination(c, m))
                .collect();
            let share = (1.0 - config.natural_stay_prob) / nbrs.len() as f64;
            let mut d = vec![(c, config.natural_stay_prob)];
            d.extend(nbrs.into_iter().map(|n| (n, share)));
            d
        })
        .collect();
    let destination_one: Vec<Vec<usize>> = (0..cells)
        .map(|c| {
            Move::ALL
                .iter()
                .map(|&m| config.destination(c, m).unwrap_or(c))
                .collect()
        })
        .collect();
    let control = ControlCost {
        weight: config.kl_weight,
        sign: config.kl_sign,
        natural: vec![natural_one.clone(), natural_one],
        destination: vec![destination_one.clone(), destination_one],
    };

    ConstrainedMarkovGame::new(GameParts {
        num_states: states,
        action_counts: vec![4, 4],
        allowed,
        reward,
        cost,
        thresholds: vec![config.rest_threshold],
        kernel,
        layout: Some(layout),
        control: Some(control),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ProductPolicy;

    fn shr() -> (ShrConfig, ConstrainedMarkovGame) {
        let cfg = ShrConfig::default();
        let game = build_shr(&cfg).unwrap();
        (cfg, game)
    }

    #[test]
    fn dimensions_and_validity() {
        let (_, game) = shr();
        assert_eq!(game.num_states(), 625);
        assert_eq!(game.num_joint_actions(), 16);
        let report = game.validate();
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn stag_pays_only_jointly() {
        let (cfg, game) = shr();
        assert_eq!(game.reward(0, cfg.joint_state(13, 13), 0), 20.0);
        assert_eq!(game.reward(1, cfg.joint_state(13, 13), 0), 20.0);
        assert_eq!(game.reward(0, cfg.joint_state(1, 13), 0), 2.0);
        assert_eq!(game.reward(0, cfg.joint_state(1, 25), 5), 4.0);
        assert_eq!(game.reward(0, cfg.joint_state(7, 8), 5), 0.0);
    }

    #[test]
    fn rest_cost_counts_hunters_at_station() {
        let (cfg, game) = shr();
        assert_eq!(game.cost(0, cfg.joint_state(2, 2), 0), 2.0);
        assert_eq!(game.cost(0, cfg.joint_state(2, 9), 0), 1.0);
        assert_eq!(game.cost(0, cfg.joint_state(3, 7), 0), 0.0);
        for &c in game.cost_table() {
            assert!(c == 0.0 || c == 1.0 || c == 2.0);
        }
    }

    #[test]
    fn cost_bound_matches_threshold_formula() {
        for b in [0.25, 0.5, 0.75, 1.5] {
            let cfg = ShrConfig {
                rest_threshold: b,
                ..ShrConfig::default()
            };
            let game = build_shr(&cfg).unwrap();
            assert_eq!(game.cost_bound(), f64::max(2.0 - b, b));
        }
    }

    #[test]
    fn action_mask_by_cell_type() {
        let (cfg, game) = shr();
        let count = |cell: usize| game.allowed(cfg.joint_state(cell, 13), 0).len();
        for corner in [1, 5, 21, 25] {
            assert_eq!(count(corner), 2);
        }
        for edge in [2, 3, 4, 6, 10, 11, 15, 16, 20, 22, 23, 24] {
            assert_eq!(count(edge), 3);
        }
        for interior in [7, 8, 9, 12, 13, 14, 17, 18, 19] {
            assert_eq!(count(interior), 4);
        }
    }

    #[test]
    fn kernel_is_deterministic_and_reversible() {
        let (cfg, game) = shr();
        let space = game.joint_actions();
        for s in 0..game.num_states() {
            for a in 0..16 {
                assert_eq!(game.transitions(s, a).len(), 1);
            }
        }
        let reverse = [Move::Down, Move::Up, Move::Right, Move::Left];
        for interior in [7, 8, 9, 12, 13, 14, 17, 18, 19] {
            let s = cfg.joint_state(interior, interior);
            for m in Move::ALL {
                let a = space.encode(&[m as usize, m as usize]);
                let mid = game.transitions(s, a)[0].0;
                let back = reverse[m as usize] as usize;
                let b = space.encode(&[back, back]);
                assert_eq!(game.transitions(mid, b)[0].0, s);
            }
        }
        // up from 13 is 8 for agent 1, right from 13 is 14 for agent 2
        let a = space.encode(&[Move::Up as usize, Move::Right as usize]);
        assert_eq!(game.transitions(cfg.joint_state(13, 13), a)[0].0, cfg.joint_state(8, 14));
    }

    #[test]
    fn natural_drift_is_normalized() {
        let (_, game) = shr();
        let control = game.control().unwrap();
        for agent in 0..2 {
            for dist in &control.natural[agent] {
                let total: f64 = dist.iter().map(|x| x.1).sum();
                assert!((total - 1.0).abs() < 1e-15);
                assert_eq!(dist[0].1, 0.9);
            }
        }
    }

    #[test]
    fn uniform_policy_kl_matches_closed_form() {
        let (cfg, game) = shr();
        let control = game.control().unwrap();
        let layout = game.layout().unwrap();
        let pi = ProductPolicy::uniform(&game);
        // interior and corner: uniform over neighbors gives ln 10 per agent
        for (c1, c2) in [(13, 1), (7, 25)] {
            let s = cfg.joint_state(c1, c2);
            for agent in 0..2 {
                let kl = control.agent_kl(layout, agent, s, pi.dist(agent, s)).unwrap();
                assert!((kl - core::f64::consts::LN_10).abs() < 1e-12);
            }
        }
        // deterministic interior move: -ln(0.025)
        let s = cfg.joint_state(13, 13);
        assert!((control.deterministic_kl(layout, 0, s, 0) - libm::log(40.0)).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            ShrConfig { rest_threshold: 0.0, ..ShrConfig::default() },
            ShrConfig { rest_threshold: 2.0, ..ShrConfig::default() },
            ShrConfig { stag_cells: alloc::vec![26], ..ShrConfig::default() },
            ShrConfig { kl_weight: -1.0, ..ShrConfig::default() },
        ] {
            assert!(build_shr(&cfg).is_err());
        }
    }
}
