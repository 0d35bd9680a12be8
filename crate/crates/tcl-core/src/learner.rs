//! Reward learning and additive decomposition.
//!
//! Two stages run against one CMDP. Max-causal-entropy IRL fits a linear
//! reward whose soft-optimal policy reproduces the demonstrations' feature
//! moments. Reward decomposition then splits the fitted reward into a task
//! part confined to the task basis and a residual that absorbs everything
//! else, constraint structure included. The exact decomposition re-solves the
//! task policy at every candidate task reward; the approximate one optimizes
//! a free Q table tied to the task reward by a Bellman penalty, trading a
//! little fidelity for never touching the solver in its inner loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cmdp::{
    demo_feature_expectations, DemoSet, FeatureTable, LinearReward, RewardKind, TabularCmdp,
    TaskSpace,
};
use crate::error::{CoreError, Result};
use crate::math;
use crate::solver::{
    evaluate_reward_under_policy, kl_policy_divergence, occupancy, occupancy_steps,
    BoltzmannPolicy, Normalization, SoftSolver,
};
use crate::table::SaTable;

/// Weight of a tiny quadratic pull of the task coefficients toward the full
/// reward's: among task rewards explaining the policy equally well, prefer
/// the one absorbing the most of the reward, leaving the smallest residual.
const TIE_EPS: f64 = 1e-6;
/// Trials per line search; a full failure counts as that many consecutive
/// non-improving proposals and stops the descent.
const MAX_BACKTRACKS: usize = 50;
/// Variance floor for the per-dimension IRL step scaling.
const VAR_FLOOR: f64 = 1e-2;
/// Ridge added to state weights when normalizing Q-table gradients.
const MU_EPS: f64 = 1e-6;
const GAIN_GROW: f64 = 1.6;
const GAIN_SHRINK: f64 = 0.5;
const GAIN_MAX: f64 = 1e8;
const GAIN_MIN: f64 = 1e-12;

/// Which decomposition the trainer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdMode {
    Exact,
    Approximate,
}

impl RdMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RdMode::Exact => "exact",
            RdMode::Approximate => "approximate",
        }
    }

    pub fn parse(s: &str) -> Option<RdMode> {
        match s {
            "exact" => Some(RdMode::Exact),
            "approximate" => Some(RdMode::Approximate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TclConfig {
    pub irl_step_size: f64,
    pub rd_step_size: f64,
    pub outer_iterations: usize,
    /// Run a decomposition pass every this many IRL iterations.
    pub decompose_every: usize,
    pub rd_mode: RdMode,
    /// Bellman penalty weight for the approximate decomposition.
    pub alpha: f64,
    pub rd_iterations: usize,
    /// IRL stops once the worst per-dimension moment gap falls below this.
    pub irl_gap_tol: f64,
    /// Decomposition counts as settled when its objective moves less than
    /// this between passes.
    pub rd_obj_tol: f64,
    pub solver_tol: f64,
    pub solver_max_iters: usize,
}

impl Default for TclConfig {
    fn default() -> Self {
        TclConfig {
            irl_step_size: 0.1,
            rd_step_size: 0.05,
            outer_iterations: 150,
            decompose_every: 10,
            rd_mode: RdMode::Exact,
            alpha: 1.0,
            rd_iterations: 200,
            irl_gap_tol: 1e-3,
            rd_obj_tol: 1e-7,
            solver_tol: 1e-8,
            solver_max_iters: 10_000,
        }
    }
}

impl TclConfig {
    pub fn validate(&self) -> Result<()> {
        if self.irl_step_size <= 0.0 || self.rd_step_size <= 0.0 {
            return Err(CoreError::Config("step sizes must be positive".into()));
        }
        if self.alpha < 0.0 {
            return Err(CoreError::Config("alpha must be nonnegative".into()));
        }
        if self.outer_iterations == 0 || self.rd_iterations == 0 || self.decompose_every == 0 {
            return Err(CoreError::Config("iteration counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// An additive split of a learned reward. The overall weights equal the task
/// plus residual weights exactly: the residual is defined as the difference
/// and the reported overall reward as the recombined sum, so the identity
/// holds bitwise rather than up to rounding.
#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub r_overall: LinearReward,
    pub r_p: LinearReward,
    pub r_c: LinearReward,
    /// State-weighted KL between the task policy and the total policy.
    pub kl_value: f64,
    /// Occupancy-weighted squared Bellman residual of the Q table, before
    /// the alpha weighting. Zero for the exact decomposition.
    pub bellman_penalty: f64,
    /// Penalty weight the result was optimized under; infinite for the exact
    /// decomposition, where consistency is enforced by construction.
    pub alpha: f64,
    pub iterations: usize,
    /// Set when the descent stopped because no proposal improved the
    /// objective while the gradient was still substantial; the result is the
    /// best iterate seen.
    pub stagnated: bool,
}

fn tie_term(anchor: &[f64], w: &[f64]) -> f64 {
    TIE_EPS * anchor.iter().zip(w).map(|(a, x)| (a - x) * (a - x)).sum::<f64>()
}

fn inf_norm(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// sum_{t<T} gamma^t: converts discounted sums into per-episode averages on
/// the scale of a single step's features.
pub fn discount_mass(gamma: f64, horizon: usize) -> f64 {
    if gamma >= 1.0 {
        horizon as f64
    } else {
        (1.0 - math::powi(gamma, horizon as i32)) / (1.0 - gamma)
    }
}

/// Demonstration feature moments normalized by the discount mass, the scale
/// the IRL gap tolerances are quoted in.
pub fn normalized_demo_moments(demos: &DemoSet, cmdp: &TabularCmdp) -> Vec<f64> {
    let mass = discount_mass(cmdp.gamma, cmdp.horizon);
    let mut m = demo_feature_expectations(demos, cmdp);
    m.iter_mut().for_each(|x| *x /= mass);
    m
}

/// First moment and variance of each feature under the normalized
/// state-action weights.
fn weighted_feature_stats(sa: &SaTable, features: &FeatureTable, mass: f64) -> (Vec<f64>, Vec<f64>) {
    let d = features.dim();
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for s in 0..sa.n_states() {
        for a in 0..sa.n_actions() {
            let w = sa.get(s, a);
            if w == 0.0 {
                continue;
            }
            for (i, &phi) in features.vector(s, a).iter().enumerate() {
                m1[i] += w * phi;
                m2[i] += w * phi * phi;
            }
        }
    }
    for x in m1.iter_mut().chain(m2.iter_mut()) {
        *x /= mass;
    }
    let var = m1.iter().zip(&m2).map(|(a, b)| (b - a * a).max(0.0)).collect();
    (m1, var)
}

#[derive(Debug)]
struct IrlEval {
    policy: BoltzmannPolicy,
    moments: Vec<f64>,
    variances: Vec<f64>,
    /// Dual objective w . m_demo - (1 - gamma) E[V(s_0)], concave in the
    /// weights with gradient exactly the moment gap; the line search ascends
    /// it.
    objective: f64,
}

/// Steps after which the remaining discounted occupancy mass is below 1e-12.
fn effective_horizon(gamma: f64) -> usize {
    let steps = math::ln(1e-12) / math::ln(gamma);
    if steps.is_finite() { (steps as usize).max(1) } else { 1 }
}

/// The policy side pairs the stationary fixed-point solve with its own
/// infinite-horizon discounted occupancy, so value and moments describe the
/// same object; demo moments are per-step rate estimates from the truncated
/// trajectories, biased only by the tail mass beyond the horizon.
fn irl_eval(
    cmdp: &TabularCmdp,
    solver: &mut SoftSolver,
    weights: &[f64],
    demo_moments: &[f64],
) -> Result<IrlEval> {
    let reward = cmdp.features.linear_table(weights);
    let sol = solver.solve(cmdp, &reward)?;
    let occ = occupancy_steps(
        cmdp,
        &sol.policy,
        Normalization::DiscountedSum,
        effective_horizon(cmdp.gamma),
    );
    let mass = 1.0 / (1.0 - cmdp.gamma);
    let (moments, variances) = weighted_feature_stats(&occ.sa, &cmdp.features, mass);
    let mut start_v = 0.0;
    for &(s, p) in &cmdp.start {
        start_v += p * sol.v[s as usize];
    }
    let objective = dot(weights, demo_moments) - (1.0 - cmdp.gamma) * start_v;
    Ok(IrlEval { policy: sol.policy, moments, variances, objective })
}

/// Outcome of one IRL ascent step.
#[derive(Debug, Clone)]
pub struct IrlStep {
    /// Moment gap (demo minus policy) at the weights the step started from.
    pub gradient: Vec<f64>,
    /// Worst per-dimension absolute entry of `gradient`.
    pub gap: f64,
    /// False when the gradient was zero or no trial step improved the
    /// objective; the weights are unchanged in that case.
    pub accepted: bool,
    /// Dual objective after the step.
    pub objective: f64,
}

/// Moment-matching ascent on linear reward weights.
///
/// Each step moves along the demo-minus-policy moment gap, scaled per
/// dimension by the inverse feature variance under the current occupancy,
/// with a backtracking line search on the concave dual objective around the
/// base rate step_size / sqrt(t). The plain fixed-schedule update crawls on
/// these problems because indicator moments sit near their feasibility
/// boundary; the scaled, searched step reaches the same fixed point in tens
/// of iterations instead of thousands.
#[derive(Debug)]
pub struct IrlOptimizer {
    step_size: f64,
    solver: SoftSolver,
    demo_moments: Vec<f64>,
    /// When present, only these dimensions move; the rest stay pinned.
    free: Option<Vec<bool>>,
    gain: f64,
    t: usize,
    cache: Option<IrlEval>,
}

impl IrlOptimizer {
    pub fn new(cmdp: &TabularCmdp, demos: &DemoSet, config: &TclConfig) -> Result<Self> {
        config.validate()?;
        if demos.trajectories.is_empty() {
            return Err(CoreError::Config("cannot run IRL on an empty demo set".into()));
        }
        if cmdp.gamma >= 1.0 {
            return Err(CoreError::Config("IRL requires a discount below one".into()));
        }
        Ok(IrlOptimizer {
            step_size: config.irl_step_size,
            solver: SoftSolver::new()
                .with_tolerance(config.solver_tol)
                .with_max_iterations(config.solver_max_iters),
            demo_moments: normalized_demo_moments(demos, cmdp),
            free: None,
            gain: 1.0,
            t: 0,
            cache: None,
        })
    }

    /// Pin every weight except the listed dimensions. The reported gap then
    /// covers only the free dimensions, since nothing else can close.
    pub fn with_free_dims(mut self, dims: &[usize]) -> Result<Self> {
        let d = self.demo_moments.len();
        let mut mask = vec![false; d];
        for &j in dims {
            if j >= d {
                return Err(CoreError::Config(format!(
                    "free dimension {j} out of range for {d} features"
                )));
            }
            mask[j] = true;
        }
        self.free = Some(mask);
        Ok(self)
    }

    pub fn demo_moments(&self) -> &[f64] {
        &self.demo_moments
    }

    /// Soft-optimal policy for the weights as of the last step, if any step
    /// has run. Stays valid across weight changes that provably leave the
    /// policy untouched (constant-feature gauge shifts).
    pub fn policy(&self) -> Option<&BoltzmannPolicy> {
        self.cache.as_ref().map(|c| &c.policy)
    }

    /// Normalized discounted feature moments of the current policy.
    pub fn policy_moments(&self) -> Option<&[f64]> {
        self.cache.as_ref().map(|c| c.moments.as_slice())
    }

    /// Worst per-dimension moment gap at the current weights, over the free
    /// dimensions when a restriction is set.
    pub fn gap(&self) -> Option<f64> {
        self.cache.as_ref().map(|c| {
            self.demo_moments.iter().zip(&c.moments).enumerate().fold(
                0.0f64,
                |m, (j, (d, p))| {
                    if self.free.as_ref().is_some_and(|f| !f[j]) {
                        m
                    } else {
                        m.max((d - p).abs())
                    }
                },
            )
        })
    }

    /// One ascent step on `weights` in place. The reported gradient and gap
    /// describe the point the step started from.
    pub fn step(&mut self, cmdp: &TabularCmdp, weights: &mut [f64]) -> Result<IrlStep> {
        let current = match self.cache.take() {
            Some(c) => c,
            None => irl_eval(cmdp, &mut self.solver, weights, &self.demo_moments)?,
        };
        let gradient: Vec<f64> =
            self.demo_moments.iter().zip(&current.moments).map(|(d, p)| d - p).collect();
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(CoreError::Solver(format!(
                "IRL gradient is not finite: gradient {gradient:?} at weights {weights:?}"
            )));
        }
        let gap = inf_norm(&gradient);
        self.t += 1;
        let base = self.step_size / math::sqrt(self.t as f64);
        let mut direction: Vec<f64> =
            gradient.iter().zip(&current.variances).map(|(g, v)| g / v.max(VAR_FLOOR)).collect();
        if let Some(mask) = &self.free {
            for (d, &keep) in direction.iter_mut().zip(mask) {
                if !keep {
                    *d = 0.0;
                }
            }
        }

        if inf_norm(&direction) == 0.0 {
            let objective = current.objective;
            self.cache = Some(current);
            return Ok(IrlStep { gradient, gap, accepted: false, objective });
        }

        let mut accepted = false;
        let mut trial_w = vec![0.0; weights.len()];
        let mut objective = current.objective;
        for _ in 0..MAX_BACKTRACKS {
            let step = base * self.gain;
            for (t, (w, d)) in trial_w.iter_mut().zip(weights.iter().zip(&direction)) {
                *t = w + step * d;
            }
            let trial = irl_eval(cmdp, &mut self.solver, &trial_w, &self.demo_moments)?;
            if trial.objective > current.objective {
                weights.copy_from_slice(&trial_w);
                objective = trial.objective;
                self.cache = Some(trial);
                self.gain = (self.gain * GAIN_GROW).min(GAIN_MAX);
                accepted = true;
                break;
            }
            self.gain = (self.gain * GAIN_SHRINK).max(GAIN_MIN);
            if step * inf_norm(&direction) < 1e-16 {
                break;
            }
        }
        if !accepted {
            self.cache = Some(current);
        }
        Ok(IrlStep { gradient, gap, accepted, objective })
    }
}

struct RdExactEval {
    policy: BoltzmannPolicy,
    kl: f64,
    objective: f64,
}

fn rd_exact_eval(
    cmdp: &TabularCmdp,
    solver: &mut SoftSolver,
    w_p: &[f64],
    anchor: &[f64],
    total: &BoltzmannPolicy,
    mu: &[f64],
) -> Result<RdExactEval> {
    let table = cmdp.features.linear_table(w_p);
    let sol = solver.solve(cmdp, &table)?;
    let kl = kl_policy_divergence(&sol.policy, total, mu);
    Ok(RdExactEval { policy: sol.policy, kl, objective: kl + tie_term(anchor, w_p) })
}

/// d KL / d w_j via the soft-solve adjoint: the Q-sensitivity X_j solves
/// X = phi_j + gamma P E_{pi_p}[X], and the derivative is the mu-weighted
/// per-state covariance under pi_p between X_j and the log-ratio
/// log pi_p - log pi.
fn rd_exact_gradient(
    cmdp: &TabularCmdp,
    task_policy: &BoltzmannPolicy,
    total: &BoltzmannPolicy,
    mu: &[f64],
    space: &TaskSpace,
    w_p: &[f64],
    anchor: &[f64],
    x_warm: &mut [SaTable],
    tol: f64,
    max_iters: usize,
) -> Vec<f64> {
    let n_states = cmdp.n_states;
    let n_actions = cmdp.n_actions;
    let mut grad = vec![0.0; w_p.len()];
    let mut y = vec![0.0; n_states];
    for (k, &j) in space.basis.iter().enumerate() {
        let x = &mut x_warm[k];
        for _ in 0..max_iters {
            for (s, ys) in y.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..n_actions {
                    acc += task_policy.probs.get(s, a) * x.get(s, a);
                }
                *ys = acc;
            }
            let mut delta = 0.0f64;
            for s in 0..n_states {
                for a in 0..n_actions {
                    let mut ev = 0.0;
                    for &(sp, p) in cmdp.successors(s, a) {
                        ev += p * y[sp as usize];
                    }
                    let nx = cmdp.features.vector(s, a)[j] + cmdp.gamma * ev;
                    delta = delta.max((nx - x.get(s, a)).abs());
                    x.set(s, a, nx);
                }
            }
            if delta <= tol {
                break;
            }
        }
        let mut g = 0.0;
        for s in 0..n_states {
            let w = mu[s];
            if w == 0.0 {
                continue;
            }
            let mut xbar = 0.0;
            for a in 0..n_actions {
                xbar += task_policy.probs.get(s, a) * x.get(s, a);
            }
            for a in 0..n_actions {
                let p = task_policy.probs.get(s, a);
                if p == 0.0 {
                    continue;
                }
                let ratio = task_policy.log_probs.get(s, a) - total.log_probs.get(s, a);
                g += w * p * (x.get(s, a) - xbar) * ratio;
            }
        }
        grad[j] = g + 2.0 * TIE_EPS * (w_p[j] - anchor[j]);
    }
    grad
}

fn build_result(
    r: &LinearReward,
    features: &FeatureTable,
    w_full: &[f64],
    w_p: Vec<f64>,
    kl_value: f64,
    bellman_penalty: f64,
    alpha: f64,
    iterations: usize,
    stagnated: bool,
) -> DecompositionResult {
    let w_c: Vec<f64> = w_full.iter().zip(&w_p).map(|(w, p)| w - p).collect();
    // Recombine so overall = task + residual holds exactly in floats.
    let w_sum: Vec<f64> = w_p.iter().zip(&w_c).map(|(p, c)| p + c).collect();
    let names = features.names();
    let id = r.feature_map_id.as_str();
    DecompositionResult {
        r_overall: LinearReward::new(RewardKind::Overall, id, names, w_sum),
        r_p: LinearReward::new(RewardKind::Task, id, names, w_p),
        r_c: LinearReward::new(RewardKind::Residual, id, names, w_c),
        kl_value,
        bellman_penalty,
        alpha,
        iterations,
        stagnated,
    }
}

/// Splits `r` into a task reward on `space` plus a residual by minimizing the
/// state-visitation-weighted KL between the task policy (soft-optimal for the
/// candidate task reward) and `policy`. Projected gradient descent with an
/// analytic adjoint gradient and a backtracking line search; `policy` must be
/// the converged soft policy for `r` on `cmdp`.
pub fn decompose_exact(
    r: &LinearReward,
    policy: &BoltzmannPolicy,
    space: &TaskSpace,
    cmdp: &TabularCmdp,
    config: &TclConfig,
) -> Result<DecompositionResult> {
    config.validate()?;
    space.validate(cmdp.features.dim())?;
    let w_full = r.resolve(&cmdp.features)?;
    let mu = occupancy(cmdp, policy, Normalization::PerStepAverage).state;

    let mut w_p = w_full.clone();
    space.project(&mut w_p);
    let mut solver = SoftSolver::new()
        .with_tolerance(config.solver_tol)
        .with_max_iterations(config.solver_max_iters);
    let mut x_warm: Vec<SaTable> =
        space.basis.iter().map(|_| SaTable::zeros(cmdp.n_states, cmdp.n_actions)).collect();

    let mut cur = rd_exact_eval(cmdp, &mut solver, &w_p, &w_full, policy, &mu)?;
    let mut gain = 1.0f64;
    let mut iterations = 0;
    let mut stagnated = false;
    let mut tiny_improvements = 0;
    for t in 1..=config.rd_iterations {
        iterations = t;
        let grad = rd_exact_gradient(
            cmdp,
            &cur.policy,
            policy,
            &mu,
            space,
            &w_p,
            &w_full,
            &mut x_warm,
            config.solver_tol,
            config.solver_max_iters,
        );
        let gnorm = inf_norm(&grad);
        if gnorm <= 1e-9 {
            break;
        }
        let base = config.rd_step_size / math::sqrt(t as f64);
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let step = base * gain;
            let mut trial_w: Vec<f64> =
                w_p.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            space.project(&mut trial_w);
            if trial_w == w_p {
                gain = (gain * GAIN_SHRINK).max(GAIN_MIN);
                continue;
            }
            let trial = rd_exact_eval(cmdp, &mut solver, &trial_w, &w_full, policy, &mu)?;
            if trial.objective < cur.objective {
                tiny_improvements =
                    if cur.objective - trial.objective <= config.rd_obj_tol {
                        tiny_improvements + 1
                    } else {
                        0
                    };
                w_p = trial_w;
                cur = trial;
                gain = (gain * GAIN_GROW).min(GAIN_MAX);
                accepted = true;
                break;
            }
            gain = (gain * GAIN_SHRINK).max(GAIN_MIN);
        }
        if !accepted {
            // A full line-search failure is a long run of non-improving
            // proposals: flag it unless the gradient says we are done anyway.
            stagnated = gnorm > 1e-4;
            break;
        }
        if tiny_improvements >= 2 {
            break;
        }
    }

    Ok(build_result(
        r,
        &cmdp.features,
        &w_full,
        w_p,
        cur.kl,
        0.0,
        f64::INFINITY,
        iterations,
        stagnated,
    ))
}

/// The exact decomposition objective at a candidate task weight vector:
/// visitation-weighted KL between the soft policy for `w_p` and `policy`,
/// plus the quadratic anchor toward the full weights. Exposed so gradient
/// checks and step diagnostics can probe the same landscape the optimizer
/// descends.
pub fn rd_objective(
    r: &LinearReward,
    policy: &BoltzmannPolicy,
    cmdp: &TabularCmdp,
    w_p: &[f64],
    config: &TclConfig,
) -> Result<f64> {
    config.validate()?;
    if w_p.len() != cmdp.features.dim() {
        return Err(CoreError::Config(format!(
            "candidate has {} weights for {} features",
            w_p.len(),
            cmdp.features.dim()
        )));
    }
    let w_full = r.resolve(&cmdp.features)?;
    let mu = occupancy(cmdp, policy, Normalization::PerStepAverage).state;
    let mut solver = SoftSolver::new()
        .with_tolerance(config.solver_tol)
        .with_max_iterations(config.solver_max_iters);
    Ok(rd_exact_eval(cmdp, &mut solver, w_p, &w_full, policy, &mu)?.objective)
}

/// Analytic gradient of `rd_objective` in `w_p`, computed on the task basis
/// dimensions; entries outside the basis are zero.
pub fn rd_gradient(
    r: &LinearReward,
    policy: &BoltzmannPolicy,
    space: &TaskSpace,
    cmdp: &TabularCmdp,
    w_p: &[f64],
    config: &TclConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    space.validate(cmdp.features.dim())?;
    if w_p.len() != cmdp.features.dim() {
        return Err(CoreError::Config(format!(
            "candidate has {} weights for {} features",
            w_p.len(),
            cmdp.features.dim()
        )));
    }
    let w_full = r.resolve(&cmdp.features)?;
    let mu = occupancy(cmdp, policy, Normalization::PerStepAverage).state;
    let mut solver = SoftSolver::new()
        .with_tolerance(config.solver_tol)
        .with_max_iterations(config.solver_max_iters);
    let eval = rd_exact_eval(cmdp, &mut solver, w_p, &w_full, policy, &mu)?;
    let mut x_warm: Vec<SaTable> =
        space.basis.iter().map(|_| SaTable::zeros(cmdp.n_states, cmdp.n_actions)).collect();
    Ok(rd_exact_gradient(
        cmdp,
        &eval.policy,
        policy,
        &mu,
        space,
        w_p,
        &w_full,
        &mut x_warm,
        config.solver_tol,
        config.solver_max_iters,
    ))
}

/// KL and Bellman-penalty terms of the approximate decomposition objective.
///
/// The KL term compares softmax(q_p) rows against `total` under
/// `state_weights`; the penalty is the `sa_weights`-weighted squared residual
/// q_p - (r_p + gamma P v_p) with v_p(s) = E_{a ~ total}[q_p(s, a)]. Returned
/// as (kl, penalty) with the penalty unweighted by alpha. Adding a per-state
/// constant to q_p and the Q behind `total` leaves the KL term unchanged;
/// the penalty is reported separately because it does shift.
pub fn approx_rd_objective(
    cmdp: &TabularCmdp,
    total: &BoltzmannPolicy,
    state_weights: &[f64],
    sa_weights: &SaTable,
    q_p: &SaTable,
    r_p: &SaTable,
) -> (f64, f64) {
    let n_states = cmdp.n_states;
    let n_actions = cmdp.n_actions;
    let mut v_p = vec![0.0; n_states];
    for (s, v) in v_p.iter_mut().enumerate() {
        let mut acc = 0.0;
        for a in 0..n_actions {
            acc += total.probs.get(s, a) * q_p.get(s, a);
        }
        *v = acc;
    }
    let mut kl = 0.0;
    let mut penalty = 0.0;
    for s in 0..n_states {
        let lse = math::logsumexp(q_p.row(s));
        let w = state_weights[s];
        for a in 0..n_actions {
            let lp = q_p.get(s, a) - lse;
            if w > 0.0 {
                kl += w * math::exp(lp) * (lp - total.log_probs.get(s, a));
            }
            let nu = sa_weights.get(s, a);
            if nu > 0.0 {
                let mut ev = 0.0;
                for &(sp, p) in cmdp.successors(s, a) {
                    ev += p * v_p[sp as usize];
                }
                let delta = q_p.get(s, a) - r_p.get(s, a) - cmdp.gamma * ev;
                penalty += nu * delta * delta;
            }
        }
    }
    (kl.max(0.0), penalty)
}

struct ApproxGrads {
    gq: SaTable,
    gw: Vec<f64>,
}

fn approx_gradients(
    cmdp: &TabularCmdp,
    total: &BoltzmannPolicy,
    mu: &[f64],
    nu: &SaTable,
    q_p: &SaTable,
    r_p: &SaTable,
    alpha: f64,
    space: &TaskSpace,
    w_p: &[f64],
    anchor: &[f64],
) -> ApproxGrads {
    let n_states = cmdp.n_states;
    let n_actions = cmdp.n_actions;

    let mut v_p = vec![0.0; n_states];
    for (s, v) in v_p.iter_mut().enumerate() {
        let mut acc = 0.0;
        for a in 0..n_actions {
            acc += total.probs.get(s, a) * q_p.get(s, a);
        }
        *v = acc;
    }

    let mut gq = SaTable::zeros(n_states, n_actions);
    let mut delta = SaTable::zeros(n_states, n_actions);
    let mut inflow = vec![0.0; n_states];
    let mut p_row = vec![0.0; n_actions];
    let mut l_row = vec![0.0; n_actions];
    for s in 0..n_states {
        let lse = math::logsumexp(q_p.row(s));
        let mut k_s = 0.0;
        for a in 0..n_actions {
            let lp = q_p.get(s, a) - lse;
            p_row[a] = math::exp(lp);
            l_row[a] = lp - total.log_probs.get(s, a);
            k_s += p_row[a] * l_row[a];
        }
        let w = mu[s];
        if w > 0.0 {
            for a in 0..n_actions {
                gq.set(s, a, w * p_row[a] * (l_row[a] - k_s));
            }
        }
        for a in 0..n_actions {
            let nw = nu.get(s, a);
            if nw == 0.0 {
                continue;
            }
            let mut ev = 0.0;
            for &(sp, p) in cmdp.successors(s, a) {
                ev += p * v_p[sp as usize];
            }
            let d = q_p.get(s, a) - r_p.get(s, a) - cmdp.gamma * ev;
            delta.set(s, a, d);
            gq.set(s, a, gq.get(s, a) + 2.0 * alpha * nw * d);
            for &(sp, p) in cmdp.successors(s, a) {
                inflow[sp as usize] += nw * d * p;
            }
        }
    }
    // The penalty also sees q_p through v_p at the successor states.
    for s in 0..n_states {
        let flow = inflow[s];
        if flow != 0.0 {
            for a in 0..n_actions {
                let adj = 2.0 * alpha * cmdp.gamma * flow * total.probs.get(s, a);
                gq.set(s, a, gq.get(s, a) - adj);
            }
        }
    }
    // Normalize rows by their state weight so step sizes act on logits, not
    // on visitation-scaled values.
    for s in 0..n_states {
        let scale = 1.0 / (mu[s] + MU_EPS);
        for a in 0..n_actions {
            gq.set(s, a, gq.get(s, a) * scale);
        }
    }

    let mut gw = vec![0.0; w_p.len()];
    for &j in &space.basis {
        let mut g = 0.0;
        for s in 0..n_states {
            for a in 0..n_actions {
                let nw = nu.get(s, a);
                if nw != 0.0 {
                    g -= 2.0 * alpha * nw * delta.get(s, a) * cmdp.features.vector(s, a)[j];
                }
            }
        }
        gw[j] = g + 2.0 * TIE_EPS * (w_p[j] - anchor[j]);
    }
    ApproxGrads { gq, gw }
}

/// Splits `r` like `decompose_exact` but never re-solves the task policy:
/// a free Q table stands in for it, tied to the task reward by a Bellman
/// penalty weighted `alpha`, and both are optimized jointly. `policy` must be
/// the converged soft policy for `r`.
pub fn decompose_approx(
    r: &LinearReward,
    policy: &BoltzmannPolicy,
    space: &TaskSpace,
    cmdp: &TabularCmdp,
    alpha: f64,
    config: &TclConfig,
) -> Result<DecompositionResult> {
    config.validate()?;
    space.validate(cmdp.features.dim())?;
    if alpha < 0.0 {
        return Err(CoreError::Config("alpha must be nonnegative".into()));
    }
    let w_full = r.resolve(&cmdp.features)?;
    let occ = occupancy(cmdp, policy, Normalization::PerStepAverage);
    let mu = occ.state;
    let nu = occ.sa;

    let mut w_p = w_full.clone();
    space.project(&mut w_p);
    let mut r_p_table = cmdp.features.linear_table(&w_p);
    // Policy evaluation of the full reward under the total policy is the
    // Bellman-consistent Q for r; when r lies in the task basis it is already
    // the optimum, and in general its residual starts at exactly r - r_p.
    let full_table = cmdp.features.linear_table(&w_full);
    let (mut q_p, _) = evaluate_reward_under_policy(
        cmdp,
        &full_table,
        policy,
        config.solver_tol,
        config.solver_max_iters,
    )?;

    let objective =
        |kl: f64, penalty: f64, w: &[f64]| kl + alpha * penalty + tie_term(&w_full, w);

    let (kl0, pen0) = approx_rd_objective(cmdp, policy, &mu, &nu, &q_p, &r_p_table);
    let mut cur_obj = objective(kl0, pen0, &w_p);
    let mut cur_kl = kl0;
    let mut cur_pen = pen0;
    let mut gain = 1.0f64;
    let mut iterations = 0;
    let mut stagnated = false;
    let mut tiny_improvements = 0;
    let mut trial_q = SaTable::zeros(cmdp.n_states, cmdp.n_actions);
    for t in 1..=config.rd_iterations {
        iterations = t;
        let grads =
            approx_gradients(cmdp, policy, &mu, &nu, &q_p, &r_p_table, alpha, space, &w_p, &w_full);
        let gnorm = inf_norm(grads.gq.data()).max(inf_norm(&grads.gw));
        if gnorm <= 1e-10 {
            break;
        }
        let base = config.rd_step_size / math::sqrt(t as f64);
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let step = base * gain;
            trial_q.data_mut().copy_from_slice(q_p.data());
            trial_q.add_scaled(&grads.gq, -step);
            let mut trial_w: Vec<f64> =
                w_p.iter().zip(&grads.gw).map(|(w, g)| w - step * g).collect();
            space.project(&mut trial_w);
            let trial_rp = cmdp.features.linear_table(&trial_w);
            let (kl, pen) = approx_rd_objective(cmdp, policy, &mu, &nu, &trial_q, &trial_rp);
            let obj = objective(kl, pen, &trial_w);
            if obj < cur_obj {
                tiny_improvements =
                    if cur_obj - obj <= config.rd_obj_tol { tiny_improvements + 1 } else { 0 };
                core::mem::swap(&mut q_p, &mut trial_q);
                w_p = trial_w;
                r_p_table = trial_rp;
                cur_obj = obj;
                cur_kl = kl;
                cur_pen = pen;
                gain = (gain * GAIN_GROW).min(GAIN_MAX);
                accepted = true;
                break;
            }
            gain = (gain * GAIN_SHRINK).max(GAIN_MIN);
            if step * gnorm < 1e-16 {
                break;
            }
        }
        if !accepted {
            stagnated = gnorm > 1e-4;
            break;
        }
        if tiny_improvements >= 2 {
            break;
        }
    }

    Ok(build_result(
        r,
        &cmdp.features,
        &w_full,
        w_p,
        cur_kl,
        cur_pen,
        alpha,
        iterations,
        stagnated,
    ))
}

/// Index of a feature that is identically one, if the map has one.
fn constant_feature_dim(features: &FeatureTable) -> Option<usize> {
    let (d, n_states, n_actions) = (features.dim(), features.n_states(), features.n_actions());
    'dims: for j in 0..d {
        for s in 0..n_states {
            for a in 0..n_actions {
                if (features.vector(s, a)[j] - 1.0).abs() > 1e-12 {
                    continue 'dims;
                }
            }
        }
        return Some(j);
    }
    None
}

/// Per-iteration training diagnostics.
#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub iteration: usize,
    pub moment_gap: f64,
    pub objective: f64,
    pub step_accepted: bool,
    /// KL value of the decomposition pass run at this iteration, if any.
    pub rd_kl: Option<f64>,
    pub rd_penalty: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub decomposition: DecompositionResult,
    /// Soft-optimal policy for the final overall reward.
    pub policy: BoltzmannPolicy,
    pub diagnostics: Vec<TrainRecord>,
    /// Final worst per-dimension moment gap.
    pub moment_gap: f64,
    /// Constraint threshold implied by the demos under the final residual.
    pub xi: f64,
    pub iterations: usize,
}

/// Alternating reward learning: IRL ascent steps with a decomposition pass
/// every `decompose_every` iterations, stopping when both the moment gap and
/// the decomposition objective have settled (or the iteration budget runs
/// out). The reward's free constant is pinned before each decomposition by
/// zero-centering it over the policy occupancy, and the final result comes
/// from a full decomposition at the converged reward.
pub fn tcl_train(
    demos: &DemoSet,
    cmdp: &TabularCmdp,
    space: &TaskSpace,
    config: &TclConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    space.validate(cmdp.features.dim())?;
    cmdp.validate()?;
    demos.validate_against(cmdp)?;

    let names = cmdp.features.names();
    let gauge_dim = constant_feature_dim(&cmdp.features);
    let mut weights = vec![0.0; cmdp.features.dim()];
    let mut opt = IrlOptimizer::new(cmdp, demos, config)?;
    let mut diagnostics = Vec::new();
    let mut last_rd_obj: Option<f64> = None;
    let mut rd_settled = false;
    let mut iterations = 0;

    for iter in 1..=config.outer_iterations {
        iterations = iter;
        let step = opt.step(cmdp, &mut weights)?;
        let gap = opt.gap().unwrap_or(f64::INFINITY);
        let mut record = TrainRecord {
            iteration: iter,
            moment_gap: gap,
            objective: step.objective,
            step_accepted: step.accepted,
            rd_kl: None,
            rd_penalty: None,
        };
        let irl_settled = gap <= config.irl_gap_tol;

        if iter % config.decompose_every == 0 {
            center_gauge(&mut weights, gauge_dim, &opt);
            let r = LinearReward::new(RewardKind::Overall, &demos.env_id, names, weights.clone());
            let policy = opt.policy().expect("a step has run").clone();
            let d = match config.rd_mode {
                RdMode::Exact => decompose_exact(&r, &policy, space, cmdp, config)?,
                RdMode::Approximate => {
                    decompose_approx(&r, &policy, space, cmdp, config.alpha, config)?
                }
            };
            let rd_obj = match config.rd_mode {
                RdMode::Exact => d.kl_value,
                RdMode::Approximate => d.kl_value + config.alpha * d.bellman_penalty,
            };
            record.rd_kl = Some(d.kl_value);
            record.rd_penalty = Some(d.bellman_penalty);
            if let Some(prev) = last_rd_obj {
                rd_settled = (prev - rd_obj).abs() <= config.rd_obj_tol;
            }
            last_rd_obj = Some(rd_obj);
        }
        diagnostics.push(record);
        if irl_settled && rd_settled {
            break;
        }
    }

    center_gauge(&mut weights, gauge_dim, &opt);
    let policy = opt
        .policy()
        .cloned()
        .ok_or_else(|| CoreError::Solver("IRL produced no policy".into()))?;
    let r = LinearReward::new(RewardKind::Overall, &demos.env_id, names, weights);
    let decomposition = match config.rd_mode {
        RdMode::Exact => decompose_exact(&r, &policy, space, cmdp, config)?,
        RdMode::Approximate => decompose_approx(&r, &policy, space, cmdp, config.alpha, config)?,
    };
    let r_c_table = decomposition.r_c.evaluate(&cmdp.features)?;
    let xi = crate::crl::compute_threshold(&r_c_table, demos);
    let moment_gap = opt.gap().unwrap_or(f64::INFINITY);
    Ok(TrainOutcome { decomposition, policy, diagnostics, moment_gap, xi, iterations })
}

/// Folds the occupancy-weighted mean reward into the constant feature's
/// weight so the reward is zero-centered over the visited support. A pure
/// gauge change: the policy, moments, and IRL objective are all invariant.
fn center_gauge(weights: &mut [f64], gauge_dim: Option<usize>, opt: &IrlOptimizer) {
    let (Some(j), Some(moments)) = (gauge_dim, opt.policy_moments()) else {
        return;
    };
    weights[j] -= dot(weights, moments);
}
