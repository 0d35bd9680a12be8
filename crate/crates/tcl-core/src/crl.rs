//! Constrained soft policy optimization via dual ascent.
//!
//! The primal step solves the unconstrained soft MDP under the composite
//! reward r - lambda * c; the dual step moves lambda along the constraint
//! violation E[c] - xi. With the soft policy, E[c] responds continuously to
//! lambda, so a plain projected subgradient step converges on these problem
//! sizes. The solver reuses its value table across dual iterations, which cuts
//! each primal solve to a handful of sweeps once lambda settles.

use alloc::format;
use alloc::vec::Vec;

use crate::cmdp::{cumulative_cost, DemoSet, TabularCmdp, Trajectory};
use crate::envs::EnvInstance;
use crate::error::{CoreError, Result};
use crate::rng::substream;
use crate::solver::{occupancy, rollout, BoltzmannPolicy, Normalization, SoftSolver};
use crate::table::SaTable;

/// How the constraint expectation is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintForm {
    /// Average per-step cost under the undiscounted visitation distribution.
    PerStep,
    /// Expected cumulative episode cost (per-step value scaled by horizon).
    Trajectory,
}

impl ConstraintForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintForm::PerStep => "per_step",
            ConstraintForm::Trajectory => "trajectory",
        }
    }

    pub fn parse(s: &str) -> Option<ConstraintForm> {
        match s {
            "per_step" => Some(ConstraintForm::PerStep),
            "trajectory" => Some(ConstraintForm::Trajectory),
            _ => None,
        }
    }

    fn scale(&self, horizon: usize) -> f64 {
        match self {
            ConstraintForm::PerStep => 1.0,
            ConstraintForm::Trajectory => horizon as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrlConfig {
    pub eta: f64,
    pub lambda_init: f64,
    pub lambda_max: f64,
    /// Constraint slack treated as satisfied.
    pub dual_tol: f64,
    /// Dual step size below which lambda is considered settled.
    pub lambda_change_tol: f64,
    pub max_dual_iters: usize,
    pub solver_tol: f64,
    pub solver_max_iters: usize,
    pub form: ConstraintForm,
}

impl Default for CrlConfig {
    fn default() -> Self {
        CrlConfig {
            eta: 0.05,
            lambda_init: 0.0,
            lambda_max: 1e3,
            dual_tol: 1e-3,
            lambda_change_tol: 1e-6,
            max_dual_iters: 2_000,
            solver_tol: 1e-8,
            solver_max_iters: 10_000,
            form: ConstraintForm::PerStep,
        }
    }
}

/// One dual step, recorded for diagnostics and convergence tests.
#[derive(Debug, Clone, Copy)]
pub struct DualIterate {
    pub lambda: f64,
    pub expected_cost: f64,
}

#[derive(Debug, Clone)]
pub struct CrlSolution {
    pub policy: BoltzmannPolicy,
    pub q: SaTable,
    pub lambda: f64,
    /// Constraint expectation in the configured form at the final policy.
    pub expected_cost: f64,
    /// Discounted return of the final policy under the objective reward.
    pub expected_return: f64,
    pub dual_iterations: usize,
    pub history: Vec<DualIterate>,
    pub converged: bool,
}

/// Maximizes soft return subject to E[c] <= xi.
pub fn solve_crl(
    cmdp: &TabularCmdp,
    reward: &SaTable,
    cost: &SaTable,
    xi: f64,
    config: &CrlConfig,
) -> Result<CrlSolution> {
    if config.eta <= 0.0 || config.lambda_max <= 0.0 {
        return Err(CoreError::Config("dual step size and lambda cap must be positive".into()));
    }
    if xi < 0.0 {
        return Err(CoreError::Infeasible(format!(
            "constraint threshold {xi} is negative; no nonnegative cost can satisfy it"
        )));
    }
    let scale = config.form.scale(cmdp.horizon);
    let mut solver =
        SoftSolver::new().with_tolerance(config.solver_tol).with_max_iterations(config.solver_max_iters);
    let mut lambda = config.lambda_init.clamp(0.0, config.lambda_max);
    let mut history = Vec::new();
    let mut composite = SaTable::zeros(cmdp.n_states, cmdp.n_actions);

    let mut last: Option<(SaTable, BoltzmannPolicy, f64)> = None;
    let mut converged = false;
    for _ in 0..config.max_dual_iters {
        composite.data_mut().copy_from_slice(reward.data());
        composite.add_scaled(cost, -lambda);
        let solution = solver.solve(cmdp, &composite)?;
        let occ = occupancy(cmdp, &solution.policy, Normalization::PerStepAverage);
        let expected_cost = occ.expected_value(cost) * scale;
        history.push(DualIterate { lambda, expected_cost });
        last = Some((solution.q, solution.policy, expected_cost));

        let violation = expected_cost - xi;
        let next = (lambda + config.eta * violation).clamp(0.0, config.lambda_max);
        let step = (next - lambda).abs();
        lambda = next;
        if violation.abs() <= config.dual_tol {
            converged = true;
            break;
        }
        if step <= config.lambda_change_tol {
            // The clamp pins a saturated multiplier exactly at the cap, so
            // this comparison is safe against drift from below.
            if violation > config.dual_tol && lambda >= config.lambda_max {
                return Err(CoreError::Infeasible(format!(
                    "constraint still violated by {violation:.6} at the lambda cap {}",
                    config.lambda_max
                )));
            }
            converged = true;
            break;
        }
    }

    let (q, policy, expected_cost) = last.expect("dual loop runs at least one iteration");
    if !converged && expected_cost - xi > config.dual_tol && lambda >= config.lambda_max {
        return Err(CoreError::Infeasible(format!(
            "constraint still violated by {:.6} after {} dual iterations at the lambda cap",
            expected_cost - xi,
            config.max_dual_iters
        )));
    }
    let ret = occupancy(cmdp, &policy, Normalization::DiscountedSum).expected_value(reward);
    Ok(CrlSolution {
        policy,
        q,
        lambda,
        expected_cost,
        expected_return: ret,
        dual_iterations: history.len(),
        history,
        converged,
    })
}

/// Cheap multiplier seed for `CrlConfig::lambda_init`: exploits that E[c]
/// falls monotonically in lambda, bracketing the constraint boundary by
/// doubling and closing in by bisection. The dual ascent started here needs
/// only a few steps to certify its stop rule, instead of ramping the
/// multiplier from zero at eta per unit of violation.
pub fn estimate_lambda(
    cmdp: &TabularCmdp,
    reward: &SaTable,
    cost: &SaTable,
    xi: f64,
    config: &CrlConfig,
) -> Result<f64> {
    let scale = config.form.scale(cmdp.horizon);
    let mut solver =
        SoftSolver::new().with_tolerance(config.solver_tol).with_max_iterations(config.solver_max_iters);
    let mut composite = SaTable::zeros(cmdp.n_states, cmdp.n_actions);
    let mut eval = |lambda: f64, solver: &mut SoftSolver| -> Result<f64> {
        composite.data_mut().copy_from_slice(reward.data());
        composite.add_scaled(cost, -lambda);
        let solution = solver.solve(cmdp, &composite)?;
        let occ = occupancy(cmdp, &solution.policy, Normalization::PerStepAverage);
        Ok(occ.expected_value(cost) * scale)
    };

    if eval(0.0, &mut solver)? <= xi + config.dual_tol {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while eval(hi, &mut solver)? > xi {
        lo = hi;
        if hi >= config.lambda_max {
            return Ok(config.lambda_max);
        }
        hi = (hi * 2.0).min(config.lambda_max);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let e = eval(mid, &mut solver)?;
        if (e - xi).abs() <= 0.5 * config.dual_tol {
            return Ok(mid);
        }
        if e > xi {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(hi)
}

/// Constraint threshold implied by demonstrations: the largest value of
/// -r_c over every demonstrated state-action pair, so by construction every
/// demo step satisfies -r_c(s,a) <= xi. Negative when the residual rewards
/// every visited pair. An empty demo set pins the threshold at zero.
pub fn compute_threshold(residual: &SaTable, demos: &DemoSet) -> f64 {
    let mut xi = f64::NEG_INFINITY;
    for traj in &demos.trajectories {
        for (s, a) in traj.steps() {
            xi = xi.max(-residual.get(s, a));
        }
    }
    if xi.is_finite() {
        xi
    } else {
        0.0
    }
}

/// Turns a residual reward into a nonnegative cost by negating and shifting
/// so the table minimum sits at zero. Returns the shift m; a threshold
/// expressed against the unshifted cost moves by -m with it.
pub fn residual_to_cost(residual: &SaTable) -> (SaTable, f64) {
    let m = residual.data().iter().fold(f64::INFINITY, |acc, &v| acc.min(-v));
    let mut cost = SaTable::zeros(residual.n_states(), residual.n_actions());
    for (out, &v) in cost.data_mut().iter_mut().zip(residual.data()) {
        *out = -v - m;
    }
    (cost, m)
}

#[derive(Debug, Clone)]
pub struct DemoConfig {
    pub n_trajectories: usize,
    /// Per-trajectory cap on accepted true cost, as a fraction of the
    /// horizon. Zero (the default) accepts only violation-free trajectories.
    pub max_cost_rate: f64,
    pub require_goal: bool,
    pub max_attempt_factor: usize,
    pub crl: CrlConfig,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            n_trajectories: 32,
            max_cost_rate: 0.0,
            require_goal: true,
            max_attempt_factor: 100,
            crl: CrlConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub demos: DemoSet,
    pub attempts: usize,
    pub lambda: f64,
    pub policy_expected_cost: f64,
}

/// Rolls demonstrations from the constrained expert policy, rejecting any
/// trajectory that exceeds the cost band or misses the goal.
pub fn generate_expert_demos(env: &EnvInstance, seed: u64, config: &DemoConfig) -> Result<DemoOutcome> {
    let reward = env.expert_reward_table().scaled(env.expert_sharpness);
    let cost = env.expert_cost_table();
    let seed_lambda = estimate_lambda(&env.cmdp, &reward, &cost, env.demo_xi, &config.crl)?;
    let crl = CrlConfig { lambda_init: seed_lambda, ..config.crl.clone() };
    let solution = solve_crl(&env.cmdp, &reward, &cost, env.demo_xi, &crl)?;

    let mut rng = substream(seed, &format!("demos/{}", env.id));
    let budget = config.max_cost_rate * env.cmdp.horizon as f64;
    let cap = config.max_attempt_factor * config.n_trajectories.max(1);
    let mut trajectories: Vec<Trajectory> = Vec::with_capacity(config.n_trajectories);
    let mut attempts = 0;
    while trajectories.len() < config.n_trajectories {
        if attempts >= cap {
            return Err(CoreError::Infeasible(format!(
                "{}: accepted {} of {} demonstrations in {attempts} rollouts",
                env.id,
                trajectories.len(),
                config.n_trajectories
            )));
        }
        attempts += 1;
        let traj = rollout(&env.cmdp, &solution.policy, &mut rng);
        if cumulative_cost(&traj, &cost) > budget {
            continue;
        }
        if config.require_goal && !visits_goal(&traj, &env.goal) {
            continue;
        }
        trajectories.push(traj);
    }
    Ok(DemoOutcome {
        demos: DemoSet { env_id: env.id.clone(), trajectories },
        attempts,
        lambda: solution.lambda,
        policy_expected_cost: solution.expected_cost,
    })
}

pub fn visits_goal(traj: &Trajectory, goal: &[bool]) -> bool {
    traj.states.iter().any(|&s| goal[s as usize])
}
