//! Reference constraint learners the transfer experiments compare against.
//!
//! Feature-range constraints (FC) forbid anything outside the box the
//! demonstrations traced out, task-relevant or not. The ICRL-like learner is
//! handed the task reward and runs moment matching on the residual alone, so
//! whatever the given task reward gets wrong leaks into its learned cost.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::cmdp::{DemoSet, FeatureTable, LinearReward, RewardKind, TabularCmdp};
use crate::error::{CoreError, Result};
use crate::learner::{IrlOptimizer, TclConfig};
use crate::table::SaTable;

/// Name of the single derived feature an FC model is linear in.
pub const FC_FEATURE: &str = "outside_demo_box";

/// Slack added to each observed bound so float dust at the boundary never
/// flags a demonstrated value.
const BOX_MARGIN: f64 = 1e-9;

/// Per-feature value ranges observed in demonstrations, keyed by name.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint {
    pub names: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxConstraint {
    /// One-dimensional indicator table over `features`: 1 where any named
    /// feature leaves its range, 0 inside the box. Names missing from the
    /// target map are a mismatch error, never silently unconstrained.
    pub fn indicator_features(&self, features: &FeatureTable) -> Result<FeatureTable> {
        let mut idx = Vec::with_capacity(self.names.len());
        let mut missing = Vec::new();
        for name in &self.names {
            match features.index_of(name) {
                Some(i) => idx.push(i),
                None => missing.push(name.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(CoreError::FeatureMismatch { missing });
        }
        let mut out = FeatureTable::new(
            vec![FC_FEATURE.to_string()],
            features.n_states(),
            features.n_actions(),
        );
        for s in 0..features.n_states() {
            for a in 0..features.n_actions() {
                let phi = features.vector(s, a);
                let outside = idx
                    .iter()
                    .zip(self.lo.iter().zip(&self.hi))
                    .any(|(&i, (lo, hi))| phi[i] < *lo || phi[i] > *hi);
                if outside {
                    out.vector_mut(s, a)[0] = 1.0;
                }
            }
        }
        Ok(out)
    }
}

/// A feature-range constraint: the observed box plus the indicator cost
/// model over the derived feature.
#[derive(Debug, Clone)]
pub struct FcModel {
    pub bounds: BoxConstraint,
    pub cost: LinearReward,
}

impl FcModel {
    /// Indicator cost table on any environment sharing the feature names.
    pub fn cost_table(&self, features: &FeatureTable) -> Result<SaTable> {
        let derived = self.bounds.indicator_features(features)?;
        self.cost.evaluate(&derived)
    }
}

/// Builds the box spanned by every demonstrated (s, a) feature vector and
/// returns the cost that charges 1 for stepping outside it on any dimension.
pub fn fc_constraint(demos: &DemoSet, features: &FeatureTable) -> Result<FcModel> {
    if demos.trajectories.is_empty() {
        return Err(CoreError::Config("feature-range constraint needs demonstrations".into()));
    }
    let d = features.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for traj in &demos.trajectories {
        for (s, a) in traj.steps() {
            for (j, &phi) in features.vector(s, a).iter().enumerate() {
                lo[j] = lo[j].min(phi);
                hi[j] = hi[j].max(phi);
            }
        }
    }
    lo.iter_mut().for_each(|x| *x -= BOX_MARGIN);
    hi.iter_mut().for_each(|x| *x += BOX_MARGIN);
    let bounds = BoxConstraint { names: features.names().to_vec(), lo, hi };
    let cost = LinearReward::new(
        RewardKind::Cost,
        &demos.env_id,
        &[FC_FEATURE.to_string()],
        vec![1.0],
    );
    Ok(FcModel { bounds, cost })
}

#[derive(Debug, Clone)]
pub struct IcrlConfig {
    /// Dimensions the residual may use; everything when absent. An empty
    /// list pins the whole reward, forcing a zero residual.
    pub free_dims: Option<Vec<usize>>,
    pub train: TclConfig,
}

impl Default for IcrlConfig {
    fn default() -> Self {
        IcrlConfig { free_dims: None, train: TclConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct IcrlOutcome {
    /// The learned constraint, -r_c, as a cost-kind model.
    pub cost: LinearReward,
    /// The residual reward itself.
    pub residual: LinearReward,
    pub moment_gap: f64,
    pub iterations: usize,
}

/// Moment matching with the task reward given: the total reward starts at
/// `known_r_p` and only the residual part moves, so the learned cost is
/// whatever the demonstrations support beyond the given task reward,
/// including its errors.
pub fn icrl_like(
    demos: &DemoSet,
    known_r_p: &LinearReward,
    cmdp: &TabularCmdp,
    config: &IcrlConfig,
) -> Result<IcrlOutcome> {
    let w_known = known_r_p.resolve(&cmdp.features)?;
    let mut opt = IrlOptimizer::new(cmdp, demos, &config.train)?;
    if let Some(dims) = &config.free_dims {
        opt = opt.with_free_dims(dims)?;
    }
    let mut w = w_known.clone();
    let mut iterations = 0;
    for t in 1..=config.train.outer_iterations {
        iterations = t;
        opt.step(cmdp, &mut w)?;
        if opt.gap().unwrap_or(f64::INFINITY) <= config.train.irl_gap_tol {
            break;
        }
    }
    let w_c: Vec<f64> = w.iter().zip(&w_known).map(|(w, k)| w - k).collect();
    let neg: Vec<f64> = w_c.iter().map(|x| -x).collect();
    let names = cmdp.features.names();
    Ok(IcrlOutcome {
        cost: LinearReward::new(RewardKind::Cost, &demos.env_id, names, neg),
        residual: LinearReward::new(RewardKind::Residual, &demos.env_id, names, w_c),
        moment_gap: opt.gap().unwrap_or(f64::INFINITY),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::Trajectory;

    /// Three states on a line; feature "pos" is the state index, "push" marks
    /// action 1.
    fn line() -> TabularCmdp {
        let names = vec!["pos".to_string(), "push".to_string()];
        let mut features = FeatureTable::new(names, 3, 2);
        for s in 0..3 {
            for a in 0..2 {
                features.vector_mut(s, a)[0] = s as f64;
                features.vector_mut(s, a)[1] = a as f64;
            }
        }
        TabularCmdp {
            n_states: 3,
            n_actions: 2,
            transitions: vec![
                vec![(0, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(2, 1.0)],
                vec![(2, 1.0)],
                vec![(2, 1.0)],
            ],
            features,
            start: vec![(0, 1.0)],
            gamma: 0.9,
            horizon: 6,
            terminal: vec![false, false, false],
        }
    }

    fn demos_staying_low(env_id: &str) -> DemoSet {
        // Walks 0 -> 1 and parks there: "pos" range [0, 1], "push" range
        // covers both actions.
        DemoSet {
            env_id: env_id.into(),
            trajectories: vec![Trajectory {
                states: vec![0, 1, 1, 1],
                actions: vec![1, 0, 0],
            }],
        }
    }

    #[test]
    fn demonstrated_pairs_cost_nothing() {
        let cmdp = line();
        let demos = demos_staying_low("line");
        let model = fc_constraint(&demos, &cmdp.features).unwrap();
        let cost = model.cost_table(&cmdp.features).unwrap();
        for traj in &demos.trajectories {
            for (s, a) in traj.steps() {
                assert_eq!(cost.get(s, a), 0.0);
            }
        }
    }

    #[test]
    fn values_outside_the_box_cost_one() {
        let cmdp = line();
        let demos = demos_staying_low("line");
        let model = fc_constraint(&demos, &cmdp.features).unwrap();
        let cost = model.cost_table(&cmdp.features).unwrap();
        // State 2 has pos = 2, above the demonstrated maximum of 1.
        assert_eq!(cost.get(2, 0), 1.0);
        assert_eq!(cost.get(2, 1), 1.0);
    }

    #[test]
    fn adding_demonstrations_only_relaxes_the_box() {
        let cmdp = line();
        let small = demos_staying_low("line");
        let mut large = small.clone();
        large.trajectories.push(Trajectory { states: vec![0, 1, 2, 2], actions: vec![1, 1, 0] });
        let before = fc_constraint(&small, &cmdp.features).unwrap();
        let after = fc_constraint(&large, &cmdp.features).unwrap();
        let cost_before = before.cost_table(&cmdp.features).unwrap();
        let cost_after = after.cost_table(&cmdp.features).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert!(cost_after.get(s, a) <= cost_before.get(s, a));
            }
        }
        // The wider box actually freed the far state.
        assert_eq!(cost_after.get(2, 0), 0.0);
    }

    #[test]
    fn missing_feature_names_are_a_mismatch() {
        let cmdp = line();
        let demos = demos_staying_low("line");
        let model = fc_constraint(&demos, &cmdp.features).unwrap();
        let other = FeatureTable::new(vec!["pos".to_string()], 3, 2);
        let err = model.cost_table(&other).unwrap_err();
        assert!(matches!(err, CoreError::FeatureMismatch { .. }));
    }

    #[test]
    fn empty_demo_set_is_rejected() {
        let cmdp = line();
        let demos = DemoSet { env_id: "line".into(), trajectories: vec![] };
        assert!(fc_constraint(&demos, &cmdp.features).is_err());
    }

    #[test]
    fn no_free_dims_means_exactly_zero_cost() {
        let cmdp = line();
        let demos = demos_staying_low("line");
        let known = LinearReward::new(
            RewardKind::Task,
            "line",
            cmdp.features.names(),
            vec![0.4, -0.2],
        );
        let config = IcrlConfig {
            free_dims: Some(vec![]),
            train: TclConfig { outer_iterations: 5, ..TclConfig::default() },
        };
        let out = icrl_like(&demos, &known, &cmdp, &config).unwrap();
        assert!(out.cost.weights.iter().all(|w| *w == 0.0));
        assert!(out.residual.weights.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn matched_task_reward_leaves_a_small_residual() {
        // Demos drawn from the soft policy for the known reward itself: the
        // residual only absorbs finite-sample moment noise. The horizon is
        // long enough that truncated demo rates match the stationary ones.
        let mut cmdp = line();
        cmdp.horizon = 200;
        let w = vec![0.8, -0.3];
        let table = cmdp.features.linear_table(&w);
        let policy = crate::solver::soft_value_iteration(&cmdp, &table).unwrap().policy;
        let mut rng = crate::rng::substream(7, "icrl-demo-test");
        let mut trajectories = Vec::new();
        for _ in 0..256 {
            trajectories.push(crate::solver::rollout(&cmdp, &policy, &mut rng));
        }
        let demos = DemoSet { env_id: "line".into(), trajectories };
        let known =
            LinearReward::new(RewardKind::Task, "line", cmdp.features.names(), w.clone());
        let config = IcrlConfig {
            free_dims: None,
            train: TclConfig { outer_iterations: 30, ..TclConfig::default() },
        };
        let out = icrl_like(&demos, &known, &cmdp, &config).unwrap();
        let drift =
            out.residual.weights.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(drift < 0.1, "residual drift {drift} (weights {:?})", out.residual.weights);
    }
}
