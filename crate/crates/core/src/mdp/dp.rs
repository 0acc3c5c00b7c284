use serde::Serialize;

use super::grid::{Cell, GridWorld, ACTIONS, NUM_ACTIONS};
use crate::error::{contract, Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Expected-reward and successor tables for every `(state, action)`.
#[derive(Clone, Debug)]
pub struct Dynamics {
    /// `outcomes[s * 5 + a]`: `(next_state, probability)`.
    pub outcomes: Vec<Vec<(usize, f64)>>,
    /// `reward[s * 5 + a]`: expected immediate reward.
    pub reward: Vec<f64>,
}

impl Dynamics {
    pub fn new(gw: &GridWorld) -> Self {
        let n = gw.num_cells();
        let mut outcomes = Vec::with_capacity(n * NUM_ACTIONS);
        let mut reward = Vec::with_capacity(n * NUM_ACTIONS);
        for s in 0..n {
            for a in ACTIONS {
                if gw.cell(s) == Cell::Wall {
                    outcomes.push(Vec::new());
                    reward.push(0.0);
                    continue;
                }
                let dist = gw.transition_distribution(s, a);
                reward.push(dist.iter().map(|(_, p, r)| p * r).sum());
                outcomes.push(dist.into_iter().map(|(n, p, _)| (n, p)).collect());
            }
        }
        Self { outcomes, reward }
    }

    /// `E[r + γ V(s')]` for one `(state, action)`.
    pub fn backup(&self, s: usize, a: usize, gamma: f64, v: &[f64]) -> f64 {
        let i = s * NUM_ACTIONS + a;
        self.reward[i] + gamma * self.outcomes[i].iter().map(|&(n, p)| p * v[n]).sum::<f64>()
    }
}

/// Action values, one row per cell (wall rows are zero).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TabularQ {
    pub values: Matrix,
}

impl TabularQ {
    pub fn value(&self, s: usize) -> f64 {
        self.values.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action per cell; ties go to the lowest action index.
    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.values.rows()).map(|s| argmax(self.values.row(s))).collect()
    }

    pub fn values_v(&self) -> Vec<f64> {
        (0..self.values.rows()).map(|s| self.value(s)).collect()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct QSolution {
    pub q: TabularQ,
    pub v: Vec<f64>,
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// Sup-norm change of the final sweep.
    pub last_change: f64,
}

/// Synchronous Q-iteration from zero until the sup-norm change of a sweep
/// drops below `tol`.
pub fn q_iteration(gw: &GridWorld, tol: f64, max_iters: usize) -> Result<QSolution> {
    if !(tol > 0.0) {
        return Err(contract("q_iteration", format!("tolerance {tol} must be positive")));
    }
    let dynamics = Dynamics::new(gw);
    let states = gw.states();
    let n = gw.num_cells();
    let mut q = TabularQ {
        values: Matrix::zeros(n, NUM_ACTIONS),
    };
    let mut v = vec![0.0; n];
    let mut change = f64::INFINITY;
    for iter in 1..=max_iters {
        let mut next = Matrix::zeros(n, NUM_ACTIONS);
        change = 0.0;
        for &s in &states {
            for a in 0..NUM_ACTIONS {
                let val = dynamics.backup(s, a, gw.gamma, &v);
                change = change.max((val - q.values[(s, a)]).abs());
                next.row_mut(s)[a] = val;
            }
        }
        q.values = next;
        for &s in &states {
            v[s] = q.value(s);
        }
        if change < tol {
            let policy = q.greedy_policy();
            return Ok(QSolution {
                q,
                v,
                policy,
                iterations: iter,
                last_change: change,
            });
        }
    }
    Err(Error::QIterationLimit {
        iterations: max_iters,
        residual: change,
    })
}

/// Largest `|Q(s,a) - E[r + γ max_a' Q(s',a')]|` over non-wall states.
pub fn bellman_residual(gw: &GridWorld, q: &TabularQ) -> f64 {
    let dynamics = Dynamics::new(gw);
    let v = q.values_v();
    let mut worst = 0.0f64;
    for s in gw.states() {
        for a in 0..NUM_ACTIONS {
            worst = worst.max((q.values[(s, a)] - dynamics.backup(s, a, gw.gamma, &v)).abs());
        }
    }
    worst
}

/// State values of a deterministic policy by iterating its Bellman
/// operator to a sup-norm change below `1e-10`.
pub fn policy_value(gw: &GridWorld, policy: &[usize]) -> Result<Vec<f64>> {
    if policy.len() != gw.num_cells() {
        return Err(contract("policy_value", format!("policy covers {} of {} cells", policy.len(), gw.num_cells())));
    }
    if policy.iter().any(|&a| a >= NUM_ACTIONS) {
        return Err(contract("policy_value", "action index out of range"));
    }
    let dynamics = Dynamics::new(gw);
    let states = gw.states();
    let mut v = vec![0.0; gw.num_cells()];
    for _ in 0..1_000_000 {
        let mut change = 0.0f64;
        let next: Vec<f64> = (0..v.len())
            .map(|s| {
                if gw.cell(s) == Cell::Wall {
                    0.0
                } else {
                    dynamics.backup(s, policy[s], gw.gamma, &v)
                }
            })
            .collect();
        for &s in &states {
            change = change.max((next[s] - v[s]).abs());
        }
        v = next;
        if change < DEFAULT_TOL {
            return Ok(v);
        }
    }
    Err(Error::QIterationLimit {
        iterations: 1_000_000,
        residual: f64::NAN,
    })
}

/// `V^π(start) / V*(start)`. When `V*(start) <= 0` the ratio is undefined
/// and `1 + V^π(start) - V*(start)` is returned instead, which still maps the
/// optimal policy to 1.
pub fn normalized_return_with(gw: &GridWorld, policy: &[usize], v_star_start: f64) -> Result<f64> {
    let v = policy_value(gw, policy)?[gw.start()];
    Ok(if v_star_start > 0.0 {
        v / v_star_start
    } else {
        1.0 + v - v_star_start
    })
}

pub fn normalized_return(gw: &GridWorld, policy: &[usize]) -> Result<f64> {
    let opt = q_iteration(gw, DEFAULT_TOL, 100_000)?;
    normalized_return_with(gw, policy, opt.v[gw.start()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{generate_gridworld, Action};
    use crate::numerics::RngStream;

    #[test]
    fn zero_discount_is_expected_reward() {
        let gw = GridWorld::from_rows(&["S.G", "..L"], 0.2, 0.0).unwrap();
        let sol = q_iteration(&gw, 1e-12, 10).unwrap();
        for s in gw.states() {
            for a in ACTIONS {
                let want: f64 = gw.transition_distribution(s, a).iter().map(|(_, p, r)| p * r).sum();
                assert!((sol.q.values[(s, a.index())] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn farming_the_goal_is_a_geometric_series() {
        let gw = GridWorld::from_rows(&["S.G"], 0.0, 0.9).unwrap();
        let sol = q_iteration(&gw, 1e-12, 10_000).unwrap();
        assert!((sol.v[2] - 10.0).abs() < 1e-9);
        assert!((sol.v[1] - 10.0).abs() < 1e-9);
        assert!((sol.v[0] - 9.0).abs() < 1e-9);
        assert_eq!(sol.policy[0], Action::Right.index());
        assert!((sol.q.values[(2, Action::NoOp.index())] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_limit_is_reported() {
        let gw = GridWorld::from_rows(&["S.G"], 0.0, 0.9).unwrap();
        assert!(matches!(q_iteration(&gw, 1e-10, 3), Err(Error::QIterationLimit { iterations: 3, .. })));
    }

    #[test]
    fn optimal_policy_normalizes_to_one() {
        let gw = generate_gridworld(&mut RngStream::new(5), 8, 8, 0.25, 0.1).unwrap();
        let sol = q_iteration(&gw, DEFAULT_TOL, 10_000).unwrap();
        assert!(bellman_residual(&gw, &sol.q) < 1e-9);
        let r = normalized_return(&gw, &sol.policy).unwrap();
        assert!((r - 1.0).abs() < 1e-9, "{r}");
        let noop = vec![Action::NoOp.index(); gw.num_cells()];
        assert!(normalized_return(&gw, &noop).unwrap() <= 1.0 + 1e-12);
    }
}
