use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{ConstrainedMarkovGame, ProductPolicy};
use crate::error::{Error, Result};
use crate::linalg::{solve_in_place, strongly_connected_components};

/// Row-stochastic matrix over states, stored as sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Builds from sparse rows; duplicate columns are merged.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut merged = Vec::with_capacity(n);
        for row in rows {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (j, p) in row {
                if j >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "chain column",
                        index: j,
                        len: n,
                    });
                }
                *acc.entry(j).or_insert(0.0) += p;
            }
            merged.push(acc.into_iter().collect());
        }
        Ok(Self { rows: merged })
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            dense
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(|(j, &p)| (j, p))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.num_states();
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0.0; n];
                for &(j, p) in row {
                    d[j] += p;
                }
                d
            })
            .collect()
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().filter(|(_, p)| *p > 0.0).map(|(j, _)| *j)
    }
}

/// State-to-state chain induced by a product policy:
/// `P_π(s, s') = Σ_a Π_i π_i(a_i | s) · P(s' | s, a)`.
pub fn induced_chain(game: &ConstrainedMarkovGame, policy: &ProductPolicy) -> Result<TransitionMatrix> {
    if policy.num_states() != game.num_states() {
        return Err(Error::DimensionMismatch {
            what: "policy states",
            expected: game.num_states(),
            found: policy.num_states(),
        });
    }
    if policy.action_counts() != game.action_counts() {
        return Err(Error::DimensionMismatch {
            what: "policy agents",
            expected: game.num_agents(),
            found: policy.num_agents(),
        });
    }
    let space = game.joint_actions();
    let rows = (0..game.num_states())
        .map(|s| {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (a, pa) in policy.joint_support(space, s) {
                for &(next, p) in game.transitions(s, a) {
                    *acc.entry(next).or_insert(0.0) += pa * p;
                }
            }
            acc.into_iter().collect()
        })
        .collect();
    Ok(TransitionMatrix { rows })
}

/// Recurrent classes, their stationary distributions, and absorption
/// probabilities into each class, for the states reachable from `start`
/// (or all states).
///
/// This gives the Cesàro limit of the state distribution from any start,
/// which for a unichain matrix is the unique stationary distribution.
#[derive(Debug, Clone)]
pub struct LimitStructure {
    num_states: usize,
    /// Recurrent classes, each sorted, ordered by smallest member.
    pub classes: Vec<Vec<usize>>,
    /// Stationary distribution of each class, aligned with `classes`.
    pub class_distributions: Vec<Vec<f64>>,
    /// `weights[s][c]`: probability of absorption into class `c` from `s`,
    /// `None` for states outside the analyzed set.
    weights: Vec<Option<Vec<f64>>>,
}

impl LimitStructure {
    pub fn analyze(chain: &TransitionMatrix, start: Option<usize>) -> Result<Self> {
        let n = chain.num_states();
        let in_set: Vec<bool> = match start {
            None => vec![true; n],
            Some(s0) => {
                if s0 >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "start state",
                        index: s0,
                        len: n,
                    });
                }
                let mut seen = vec![false; n];
                let mut queue = vec![s0];
                seen[s0] = true;
                while let Some(v) = queue.pop() {
                    for w in chain.successors(v) {
                        if !seen[w] {
                            seen[w] = true;
                            queue.push(w);
                        }
                    }
                }
                seen
            }
        };
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                if in_set[v] {
                    chain.successors(v).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let (comp, num_comps) = strongly_connected_components(&adj);
        let mut closed = vec![true; num_comps];
        for v in 0..n {
            if !in_set[v] {
                closed[comp[v]] = false;
                continue;
            }
            for &w in &adj[v] {
                if comp[w] != comp[v] {
                    closed[comp[v]] = false;
                }
            }
        }
        let mut class_of_comp = vec![usize::MAX; num_comps];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            if in_set[v] && closed[comp[v]] {
                let c = comp[v];
                if class_of_comp[c] == usize::MAX {
                    class_of_comp[c] = classes.len();
                    classes.push(Vec::new());
                }
                classes[class_of_comp[c]].push(v);
            }
        }

        let mut class_distributions = Vec::with_capacity(classes.len());
        for class in &classes {
            class_distributions.push(class_stationary(chain, class)?);
        }

        let k = classes.len();
        let mut weights: Vec<Option<Vec<f64>>> = vec![None; n];
        let mut transient = Vec::new();
        for v in 0..n {
            if !in_set[v] {
                continue;
            }
            let c = class_of_comp[comp[v]];
            if c != usize::MAX {
                let mut w = vec![0.0; k];
                w[c] = 1.0;
                weights[v] = Some(w);
            } else {
                transient.push(v);
            }
        }
        if !transient.is_empty() {
            let t = transient.len();
            let mut local = vec![usize::MAX; n];
            for (idx, &v) in transient.iter().enumerate() {
                local[v] = idx;
            }
            let mut a = vec![0.0; t * t];
            let mut b = vec![0.0; t * k];
            for (row, &v) in transient.iter().enumerate() {
                a[row * t + row] += 1.0;
                for &(w, p) in chain.row(v) {
                    if local[w] != usize::MAX {
                        a[row * t + local[w]] -= p;
                    } else {
                        let c = class_of_comp[comp[w]];
                        if c != usize::MAX {
                            b[row * k + c] += p;
                        }
                    }
                }
            }
            solve_in_place(&mut a, &mut b, t, k)?;
            for (row, &v) in transient.iter().enumerate() {
                weights[v] = Some(b[row * k..(row + 1) * k].to_vec());
            }
        }
        Ok(Self {
            num_states: n,
            classes,
            class_distributions,
            weights,
        })
    }

    /// Absorption probabilities of `state` into each recurrent class.
    pub fn class_weights(&self, state: usize) -> Option<&[f64]> {
        self.weights.get(state).and_then(|w| w.as_deref())
    }

    /// Cesàro-limit state distribution starting from `start`.
    pub fn limiting_distribution(&self, start: usize) -> Option<Vec<f64>> {
        let w = self.class_weights(start)?;
        let mut mu = vec![0.0; self.num_states];
        for ((class, dist), &wc) in self.classes.iter().zip(&self.class_distributions).zip(w) {
            if wc == 0.0 {
                continue;
            }
            for (&s, &p) in class.iter().zip(dist) {
                mu[s] += wc * p;
            }
        }
        Some(mu)
    }
}

/// Stationary distribution of a closed communicating class by a direct
/// solve of the balance equations (exact for periodic classes as well).
fn class_stationary(chain: &TransitionMatrix, class: &[usize]) -> Result<Vec<f64>> {
    let n = class.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut local = BTreeMap::new();
    for (idx, &s) in class.iter().enumerate() {
        local.insert(s, idx);
    }
    // Row r of the system is column r of (P - I): Σ_i μ_i (P_ir - δ_ir) = 0.
    let mut a = vec![0.0; n * n];
    for (i, &s) in class.iter().enumerate() {
        a[i * n + i] -= 1.0;
        for &(t, p) in chain.row(s) {
            if let Some(&r) = local.get(&t) {
                a[r * n + i] += p;
            }
        }
    }
    for i in 0..n {
        a[(n - 1) * n + i] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    solve_in_place(&mut a, &mut b, n, 1)?;
    for p in &mut b {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let z: f64 = b.iter().sum();
    for p in &mut b {
        *p /= z;
    }
    Ok(b)
}

/// Stationary distribution of a unichain matrix.
///
/// Fails with [`Error::Multichain`] naming one state from each of two
/// distinct recurrent classes.
pub fn stationary_distribution(chain: &TransitionMatrix) -> Result<Vec<f64>> {
    let limits = LimitStructure::analyze(chain, None)?;
    if limits.classes.len() > 1 {
        return Err(Error::Multichain {
            first: limits.classes[0][0],
            second: limits.classes[1][0],
        });
    }
    let mut mu = vec![0.0; chain.num_states()];
    for (&s, &p) in limits.classes[0].iter().zip(&limits.class_distributions[0]) {
        mu[s] = p;
    }
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::uniform_parts;
    use crate::game::GameParts;

    fn dense(rows: &[&[f64]]) -> TransitionMatrix {
        TransitionMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn symmetric_chain() {
        let mu = stationary_distribution(&dense(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        assert!((mu[0] - 0.5).abs() < 1e-15 && (mu[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_state_balance() {
        // 0.1 μ0 = 0.3 μ1 => μ = (0.75, 0.25)
        let mu = stationary_distribution(&dense(&[&[0.9, 0.1], &[0.3, 0.7]])).unwrap();
        assert!((mu[0] - 0.75).abs() < 1e-14);
        assert!((mu[1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn periodic_cycle() {
        let mu = stationary_distribution(&dense(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((mu[0] - 0.5).abs() < 1e-15 && (mu[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn multichain_names_two_classes() {
        let chain = dense(&[&[1.0, 0.0, 0.0], &[0.5, 0.0, 0.5], &[0.0, 0.0, 1.0]]);
        assert_eq!(
            stationary_distribution(&chain),
            Err(Error::Multichain { first: 0, second: 2 })
        );
        let limits = LimitStructure::analyze(&chain, Some(1)).unwrap();
        let mu = limits.limiting_distribution(1).unwrap();
        assert!((mu[0] - 0.5).abs() < 1e-15);
        assert_eq!(mu[1], 0.0);
        assert!((mu[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transient_states_get_zero_mass() {
        let chain = dense(&[&[0.2, 0.8, 0.0], &[0.0, 0.5, 0.5], &[0.0, 0.5, 0.5]]);
        let mu = stationary_distribution(&chain).unwrap();
        assert_eq!(mu[0], 0.0);
        assert!((mu[1] - 0.5).abs() < 1e-14);
    }

    fn two_by_two_game() -> GameParts {
        // 2 states, agent 0 has 2 actions, agent 1 has 1.
        // action 0 stays, action 1 switches.
        let kernel = vec![
            vec![(0, 1.0)],
            vec![(1, 1.0)],
            vec![(1, 1.0)],
            vec![(0, 1.0)],
        ];
        uniform_parts(2, &[2, 1], kernel)
    }

    #[test]
    fn deterministic_policy_gives_permutation_rows() {
        let game = ConstrainedMarkovGame::new(two_by_two_game()).unwrap();
        let pi = ProductPolicy::deterministic(2, &[2, 1], &[vec![1, 1], vec![0, 0]]).unwrap();
        let p = induced_chain(&game, &pi).unwrap().to_dense();
        assert_eq!(p, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn single_state_uniform_policy() {
        let parts = uniform_parts(1, &[3, 2], vec![vec![(0, 1.0)]; 6]);
        let game = ConstrainedMarkovGame::new(parts).unwrap();
        let p = induced_chain(&game, &ProductPolicy::uniform(&game)).unwrap();
        let p = p.to_dense();
        assert_eq!(p.len(), 1);
        assert!((p[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_policy_matches_hand_expansion() {
        // Both agents have 2 actions; joint a = 2*a0 + a1.
        // P(.|s,a) rows chosen arbitrarily.
        let rows = [
            [0.1, 0.9],
            [0.4, 0.6],
            [0.7, 0.3],
            [1.0, 0.0],
            [0.5, 0.5],
            [0.2, 0.8],
            [0.0, 1.0],
            [0.6, 0.4],
        ];
        let kernel = rows
            .iter()
            .map(|r| vec![(0, r[0]), (1, r[1])])
            .collect();
        let game = ConstrainedMarkovGame::new(uniform_parts(2, &[2, 2], kernel)).unwrap();
        let pi = ProductPolicy::from_tables(
            2,
            vec![2, 2],
            vec![vec![0.3, 0.7, 0.5, 0.5], vec![0.8, 0.2, 0.1, 0.9]],
        )
        .unwrap();
        let p = induced_chain(&game, &pi).unwrap();
        // brute-force expansion over the 4 joint actions
        for s in 0..2 {
            for t in 0..2 {
                let mut expect = 0.0;
                for a0 in 0..2 {
                    for a1 in 0..2 {
                        let w = pi.prob(0, s, a0) * pi.prob(1, s, a1);
                        expect += w * rows[s * 4 + a0 * 2 + a1][t];
                    }
                }
                assert!((p.get(s, t) - expect).abs() < 1e-15);
            }
            let sum: f64 = p.row(s).iter().map(|x| x.1).sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let game = ConstrainedMarkovGame::new(two_by_two_game()).unwrap();
        let pi = ProductPolicy::deterministic(1, &[2, 1], &[vec![1], vec![0]]).unwrap();
        assert!(induced_chain(&game, &pi).is_err());
    }
}
