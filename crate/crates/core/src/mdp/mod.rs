//! Gridworld MDPs, exact dynamic programming, supervised `Q*` regression,
//! noisy-target fits and fitted Q-iteration.
//!
//! Semantics: five actions (up, down, left, right, no-op); with probability
//! `slip_prob` the action is replaced by a uniformly random one; moves into
//! walls or off the grid leave the agent in place; the reward (+1 goal,
//! -1 lava, 0 otherwise) is paid for the cell occupied after the move.
//! Goals are not absorbing, so an agent can keep collecting +1 there.

mod dp;
mod encoding;
mod fit;
mod fqi;
mod grid;

pub use dp::{
    bellman_residual, normalized_return, normalized_return_with, policy_value, q_iteration, Dynamics, QSolution,
    TabularQ, DEFAULT_TOL,
};
pub use encoding::{EncodingMode, StateEncoding};
pub use fit::{noisy_target_experiment, q_dataset, supervised_qfit, FitConfig, NoisyFit, SupervisedFit};
pub use fqi::{fqi, fqi_tabular, srank, srank_from_singular_values, BufferSpec, FqiConfig, FqiDiagnostics, FqiRun};
pub use grid::{generate_gridworld, Action, Cell, GridWorld, ACTIONS, NUM_ACTIONS};
