//! Tabular constrained MDPs: dynamics, feature tables, linear reward models,
//! trajectories, and the functionals everything downstream is built from.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::table::SaTable;

pub const PROB_TOL: f64 = 1e-12;

/// Per-(state, action) feature vectors, stored dense.
///
/// Feature names are the portable identity of a dimension: models carry
/// (name, weight) pairs and are re-indexed by name on whatever environment
/// they are applied to.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, n_states: usize, n_actions: usize) -> Self {
        let dim = names.len();
        FeatureTable { names, n_states, n_actions, values: vec![0.0; n_states * n_actions * dim] }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn vector(&self, s: usize, a: usize) -> &[f64] {
        let d = self.names.len();
        let base = (s * self.n_actions + a) * d;
        &self.values[base..base + d]
    }

    #[inline]
    pub fn vector_mut(&mut self, s: usize, a: usize) -> &mut [f64] {
        let d = self.names.len();
        let base = (s * self.n_actions + a) * d;
        &mut self.values[base..base + d]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// weights . phi(s,a) for every pair.
    pub fn linear_table(&self, weights: &[f64]) -> SaTable {
        debug_assert_eq!(weights.len(), self.dim());
        SaTable::from_fn(self.n_states, self.n_actions, |s, a| {
            self.vector(s, a).iter().zip(weights).map(|(x, w)| x * w).sum()
        })
    }
}

/// What role a linear model plays. Cost models must evaluate nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    Overall,
    Task,
    Residual,
    Cost,
}

impl RewardKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardKind::Overall => "overall",
            RewardKind::Task => "task",
            RewardKind::Residual => "residual",
            RewardKind::Cost => "cost",
        }
    }

    pub fn parse(s: &str) -> Option<RewardKind> {
        match s {
            "overall" => Some(RewardKind::Overall),
            "task" => Some(RewardKind::Task),
            "residual" => Some(RewardKind::Residual),
            "cost" => Some(RewardKind::Cost),
            _ => None,
        }
    }
}

/// Reward linear in named features: r(s,a) = sum_i w_i phi_i(s,a).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReward {
    pub kind: RewardKind,
    /// Identifier of the feature map the weights were learned against.
    pub feature_map_id: String,
    pub names: Vec<String>,
    pub weights: Vec<f64>,
}

impl LinearReward {
    pub fn new(kind: RewardKind, feature_map_id: &str, names: &[String], weights: Vec<f64>) -> Self {
        debug_assert_eq!(names.len(), weights.len());
        LinearReward { kind, feature_map_id: feature_map_id.into(), names: names.to_vec(), weights }
    }

    /// Weight vector re-indexed to `features`' dimension order. Dimensions the
    /// model does not mention get weight 0; names the target lacks are an
    /// error listing every missing name.
    pub fn resolve(&self, features: &FeatureTable) -> Result<Vec<f64>> {
        let mut out = vec![0.0; features.dim()];
        let mut missing = Vec::new();
        for (name, &w) in self.names.iter().zip(&self.weights) {
            match features.index_of(name) {
                Some(i) => out[i] = w,
                None => missing.push(name.clone()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(CoreError::FeatureMismatch { missing })
        }
    }

    /// Raw evaluation on a feature table.
    pub fn evaluate(&self, features: &FeatureTable) -> Result<SaTable> {
        Ok(features.linear_table(&self.resolve(features)?))
    }

    /// Evaluation under the cost contract: values clamped at 0, with a count
    /// of how many entries needed clamping.
    pub fn evaluate_as_cost(&self, features: &FeatureTable) -> Result<(SaTable, usize)> {
        let mut table = self.evaluate(features)?;
        let mut clamped = 0usize;
        for s in 0..table.n_states() {
            for a in 0..table.n_actions() {
                let v = table.get(s, a);
                if v < 0.0 {
                    table.set(s, a, 0.0);
                    clamped += 1;
                }
            }
        }
        Ok((table, clamped))
    }
}

/// The task-reward hypothesis space: which feature dimensions a task reward
/// may weight, and which of those (goal indicators) must stay nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpace {
    /// Indices into the environment's feature table.
    pub basis: Vec<usize>,
    /// Subset of `basis` clamped to weight >= 0 when the sign constraint is on.
    pub nonneg: Vec<usize>,
    pub sign_constraint: bool,
}

impl TaskSpace {
    pub fn validate(&self, dim: usize) -> Result<()> {
        for &i in &self.basis {
            if i >= dim {
                return Err(CoreError::Config(format!(
                    "task basis index {i} out of range for {dim} features"
                )));
            }
        }
        for &i in &self.nonneg {
            if !self.basis.contains(&i) {
                return Err(CoreError::Config(format!(
                    "nonnegative-constrained index {i} is not in the task basis"
                )));
            }
        }
        Ok(())
    }

    /// Zero out non-basis dims and apply the sign constraint in place.
    pub fn project(&self, weights: &mut [f64]) {
        for (i, w) in weights.iter_mut().enumerate() {
            if !self.basis.contains(&i) {
                *w = 0.0;
            }
        }
        if self.sign_constraint {
            for &i in &self.nonneg {
                if weights[i] < 0.0 {
                    weights[i] = 0.0;
                }
            }
        }
    }
}

/// Tabular CMDP. Transitions are stored as per-(s,a) successor lists; grid
/// dynamics touch at most a handful of successor states.
#[derive(Debug, Clone)]
pub struct TabularCmdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// Indexed `s * n_actions + a`; entries are (successor, probability).
    pub transitions: Vec<Vec<(u32, f64)>>,
    pub features: FeatureTable,
    /// Sparse start distribution: (state, probability).
    pub start: Vec<(u32, f64)>,
    pub gamma: f64,
    pub horizon: usize,
    pub terminal: Vec<bool>,
}

impl TabularCmdp {
    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[(u32, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Full structural check. Reports the first offending index it finds.
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(CoreError::Config("empty state or action set".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(CoreError::Config(format!("discount {} outside [0, 1]", self.gamma)));
        }
        if self.horizon == 0 {
            return Err(CoreError::Config("horizon must be at least 1".into()));
        }
        if self.transitions.len() != self.n_states * self.n_actions {
            return Err(CoreError::Config("transition list has wrong length".into()));
        }
        if self.terminal.len() != self.n_states {
            return Err(CoreError::Config("terminal flags have wrong length".into()));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.successors(s, a);
                let mut sum = 0.0;
                for &(sp, p) in row {
                    if (sp as usize) >= self.n_states {
                        return Err(CoreError::Config(format!(
                            "transition[{s}][{a}] targets out-of-range state {sp}"
                        )));
                    }
                    if p < 0.0 || !p.is_finite() {
                        return Err(CoreError::Config(format!(
                            "transition[{s}][{a}] -> {sp} has invalid probability {p}"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(CoreError::Config(format!(
                        "transition[{s}][{a}] probabilities sum to {sum}, expected 1"
                    )));
                }
                if self.terminal[s] {
                    let self_loop = row.len() == 1 && row[0].0 as usize == s;
                    if !self_loop {
                        return Err(CoreError::Config(format!(
                            "terminal state {s} must self-loop under action {a}"
                        )));
                    }
                }
            }
        }
        let mut start_sum = 0.0;
        for &(s, p) in &self.start {
            if (s as usize) >= self.n_states {
                return Err(CoreError::Config(format!("start state {s} out of range")));
            }
            if p < 0.0 || !p.is_finite() {
                return Err(CoreError::Config(format!("start probability {p} invalid")));
            }
            start_sum += p;
        }
        if (start_sum - 1.0).abs() > PROB_TOL {
            return Err(CoreError::Config(format!(
                "start distribution sums to {start_sum}, expected 1"
            )));
        }
        if self.features.dim() == 0 {
            return Err(CoreError::Config("feature table has no dimensions".into()));
        }
        if !self.features.all_finite() {
            return Err(CoreError::Config("feature table contains non-finite values".into()));
        }
        Ok(())
    }
}

/// One episode: states s_0..s_L, actions a_0..a_{L-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<u32>,
    pub actions: Vec<u32>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states.iter().zip(&self.actions).map(|(&s, &a)| (s as usize, a as usize))
    }

    /// Shape and dynamics check: indices in range, every recorded transition
    /// has positive probability under `cmdp`.
    pub fn validate_against(&self, cmdp: &TabularCmdp) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(CoreError::Config(format!(
                "trajectory has {} states for {} actions",
                self.states.len(),
                self.actions.len()
            )));
        }
        for (t, (&s, &a)) in self.states.iter().zip(&self.actions).enumerate() {
            let (s, a) = (s as usize, a as usize);
            if s >= cmdp.n_states || a >= cmdp.n_actions {
                return Err(CoreError::Config(format!("step {t} indexes out of range")));
            }
            let next = self.states[t + 1];
            let reachable = cmdp.successors(s, a).iter().any(|&(sp, p)| sp == next && p > 0.0);
            if !reachable {
                return Err(CoreError::Config(format!(
                    "step {t}: transition {s} -[{a}]-> {next} has zero probability"
                )));
            }
        }
        Ok(())
    }
}

/// Expert demonstrations tied to the environment they were collected on.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub env_id: String,
    pub trajectories: Vec<Trajectory>,
}

impl DemoSet {
    pub fn validate_against(&self, cmdp: &TabularCmdp) -> Result<()> {
        for (i, traj) in self.trajectories.iter().enumerate() {
            traj.validate_against(cmdp)
                .map_err(|e| CoreError::Config(format!("demo {i}: {e}")))?;
        }
        Ok(())
    }
}

/// sum_t gamma^t r(s_t, a_t), with gamma^0 = 1 at the first step.
pub fn discounted_return(traj: &Trajectory, reward: &SaTable, gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut disc = 1.0;
    for (s, a) in traj.steps() {
        total += disc * reward.get(s, a);
        disc *= gamma;
    }
    total
}

/// Undiscounted sum of costs over the trajectory: C(tau) = sum_t c(s_t, a_t).
pub fn cumulative_cost(traj: &Trajectory, cost: &SaTable) -> f64 {
    traj.steps().map(|(s, a)| cost.get(s, a)).sum()
}

/// Demo-side discounted feature expectations:
/// (1/N) sum_i sum_t gamma^t phi(s_t, a_t).
pub fn demo_feature_expectations(demos: &DemoSet, cmdp: &TabularCmdp) -> Vec<f64> {
    let d = cmdp.features.dim();
    let mut acc = vec![0.0; d];
    for traj in &demos.trajectories {
        let mut disc = 1.0;
        for (s, a) in traj.steps() {
            for (acc_i, &phi_i) in acc.iter_mut().zip(cmdp.features.vector(s, a)) {
                *acc_i += disc * phi_i;
            }
            disc *= cmdp.gamma;
        }
    }
    let n = demos.trajectories.len().max(1) as f64;
    acc.iter_mut().for_each(|x| *x /= n);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use approx::assert_relative_eq;

    pub fn tiny_cmdp() -> TabularCmdp {
        // Two states, two actions; action 1 in state 0 moves to state 1,
        // everything else self-loops. State 1 terminal.
        let names = vec!["f0".to_string(), "f1".to_string()];
        let mut features = FeatureTable::new(names, 2, 2);
        features.vector_mut(0, 0).copy_from_slice(&[1.0, 0.0]);
        features.vector_mut(0, 1).copy_from_slice(&[0.0, 1.0]);
        features.vector_mut(1, 0).copy_from_slice(&[0.5, 0.5]);
        features.vector_mut(1, 1).copy_from_slice(&[0.5, 0.5]);
        TabularCmdp {
            n_states: 2,
            n_actions: 2,
            transitions: vec![
                vec![(0, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
            ],
            features,
            start: vec![(0, 1.0)],
            gamma: 0.5,
            horizon: 4,
            terminal: vec![false, true],
        }
    }

    #[test]
    fn valid_cmdp_passes_validation() {
        tiny_cmdp().validate().unwrap();
    }

    #[test]
    fn validation_names_offending_row() {
        let mut cmdp = tiny_cmdp();
        cmdp.transitions[1] = vec![(1, 0.7)];
        let err = cmdp.validate().unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("transition[0][1]"), "{msg}");
    }

    #[test]
    fn validation_rejects_broken_terminal_self_loop() {
        let mut cmdp = tiny_cmdp();
        cmdp.transitions[2] = vec![(0, 1.0)];
        assert!(cmdp.validate().is_err());
    }

    #[test]
    fn discounted_return_discounts_from_step_zero() {
        let reward = SaTable::from_fn(2, 2, |s, a| (1 + s + a) as f64);
        let traj = Trajectory { states: vec![0, 1, 1], actions: vec![1, 0] };
        // gamma = 0.5: 1.0 * r(0,1) + 0.5 * r(1,0) = 2 + 0.5 * 2
        assert_relative_eq!(discounted_return(&traj, &reward, 0.5), 3.0);
    }

    #[test]
    fn cumulative_cost_is_undiscounted() {
        let cost = SaTable::from_fn(2, 2, |_, _| 1.5);
        let traj = Trajectory { states: vec![0, 0, 0, 0], actions: vec![0, 0, 0] };
        assert_relative_eq!(cumulative_cost(&traj, &cost), 4.5);
    }

    #[test]
    fn trajectory_validation_rejects_impossible_step() {
        let cmdp = tiny_cmdp();
        let bad = Trajectory { states: vec![0, 1], actions: vec![0] };
        assert!(bad.validate_against(&cmdp).is_err());
        let good = Trajectory { states: vec![0, 1], actions: vec![1] };
        good.validate_against(&cmdp).unwrap();
    }

    #[test]
    fn demo_moments_average_over_trajectories() {
        let cmdp = tiny_cmdp();
        let t1 = Trajectory { states: vec![0, 0], actions: vec![0] }; // phi (1, 0)
        let t2 = Trajectory { states: vec![0, 1], actions: vec![1] }; // phi (0, 1)
        let demos = DemoSet { env_id: "tiny".into(), trajectories: vec![t1, t2] };
        let m = demo_feature_expectations(&demos, &cmdp);
        assert_relative_eq!(m[0], 0.5);
        assert_relative_eq!(m[1], 0.5);
    }

    #[test]
    fn resolve_reorders_weights_by_name() {
        let cmdp = tiny_cmdp();
        let model = LinearReward::new(
            RewardKind::Overall,
            "tiny",
            &["f1".to_string(), "f0".to_string()],
            vec![2.0, 3.0],
        );
        let resolved = model.resolve(&cmdp.features).unwrap();
        assert_eq!(resolved, vec![3.0, 2.0]);
    }

    #[test]
    fn resolve_lists_every_missing_name() {
        let cmdp = tiny_cmdp();
        let model = LinearReward::new(
            RewardKind::Cost,
            "other",
            &["f0".to_string(), "nope".to_string(), "also_nope".to_string()],
            vec![1.0, 1.0, 1.0],
        );
        match model.resolve(&cmdp.features) {
            Err(CoreError::FeatureMismatch { missing }) => {
                assert_eq!(missing, vec!["nope".to_string(), "also_nope".to_string()]);
            }
            other => panic!("expected feature mismatch, got {other:?}"),
        }
    }

    #[test]
    fn cost_evaluation_clamps_and_counts() {
        let cmdp = tiny_cmdp();
        let model = LinearReward::new(
            RewardKind::Cost,
            "tiny",
            &["f0".to_string(), "f1".to_string()],
            vec![1.0, -1.0],
        );
        let (table, clamped) = model.evaluate_as_cost(&cmdp.features).unwrap();
        assert_eq!(clamped, 1); // (0,1) evaluates to -1
        assert_eq!(table.get(0, 1), 0.0);
        assert_eq!(table.get(0, 0), 1.0);
    }

    #[test]
    fn task_space_projection_zeroes_off_basis_and_clamps() {
        let space = TaskSpace { basis: vec![0, 1], nonneg: vec![0], sign_constraint: true };
        let mut w = vec![-2.0, -3.0, 7.0];
        space.project(&mut w);
        assert_eq!(w, vec![0.0, -3.0, 0.0]);
    }
}
