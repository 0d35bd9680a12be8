//! Tabular constrained-MDP toolkit.
//!
//! Everything here operates on small dense tables: soft (entropy-regularized)
//! value iteration, occupancy measures, max-causal-entropy IRL, additive
//! decomposition of a learned reward into a task part and a residual
//! constraint part, and Lagrangian constrained RL for transferring the
//! residual to new environments.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature, on by
//! default, only switches float intrinsics from `libm` to the standard
//! library. File formats, the CLI, and the experiment harness live in the
//! companion `tcl-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod cmdp;
pub mod crl;
pub mod envs;
pub mod error;
pub mod learner;
pub mod math;
pub mod metrics;
pub mod rng;
pub mod solver;
pub mod table;

pub use baselines::{fc_constraint, icrl_like, FcModel, IcrlConfig, IcrlOutcome};
pub use cmdp::{
    cumulative_cost, demo_feature_expectations, discounted_return, DemoSet, FeatureTable,
    LinearReward, RewardKind, TabularCmdp, TaskSpace, Trajectory,
};
pub use error::{CoreError, Result};
pub use learner::{
    decompose_approx, decompose_exact, rd_gradient, rd_objective, tcl_train,
    DecompositionResult, IrlOptimizer, RdMode, TclConfig, TrainOutcome,
};
pub use metrics::{
    decomposition_correlation, pearson, rank_auc, success_rate, violation_rate,
};
pub use solver::{
    boltzmann_policy, kl_policy_divergence, occupancy, rollout, soft_value_iteration,
    BoltzmannPolicy, Normalization, Occupancy, SoftSolution,
};
pub use table::SaTable;
