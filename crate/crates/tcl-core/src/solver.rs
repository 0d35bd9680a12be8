//! Entropy-regularized (soft) dynamic programming on tabular CMDPs.
//!
//! The solver family here implements the inner problem of max-causal-entropy
//! IRL at temperature 1: soft value iteration, the Boltzmann policy it
//! induces, occupancy measures under that policy, seeded rollouts, and
//! policy-conditioned reward evaluation.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cmdp::{TabularCmdp, Trajectory};
use crate::error::{CoreError, Result};
use crate::math::logsumexp;
use crate::table::SaTable;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Stochastic policy stored as probabilities and exact log-probabilities.
///
/// Log-probs are the primary representation (Q - V), so ratios stay exact
/// even where probabilities underflow toward zero.
#[derive(Debug, Clone)]
pub struct BoltzmannPolicy {
    pub probs: SaTable,
    pub log_probs: SaTable,
}

impl BoltzmannPolicy {
    /// pi(a|s) = exp(Q(s,a) - V(s)) with V the per-row log-sum-exp.
    pub fn from_q(q: &SaTable) -> BoltzmannPolicy {
        let (n_states, n_actions) = (q.n_states(), q.n_actions());
        let mut probs = SaTable::zeros(n_states, n_actions);
        let mut log_probs = SaTable::zeros(n_states, n_actions);
        for s in 0..n_states {
            let v = logsumexp(q.row(s));
            for a in 0..n_actions {
                let lp = q.get(s, a) - v;
                log_probs.set(s, a, lp);
                probs.set(s, a, crate::math::exp(lp));
            }
        }
        BoltzmannPolicy { probs, log_probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.n_actions()
    }

    /// Max over states of |1 - sum_a pi(a|s)|. Kept close to 0 by construction.
    pub fn normalization_defect(&self) -> f64 {
        (0..self.n_states())
            .map(|s| (self.probs.row(s).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &BoltzmannPolicy) -> f64 {
        self.probs.max_abs_diff(&other.probs)
    }
}

/// Normalized policy per the soft-optimality condition.
pub fn boltzmann_policy(q: &SaTable) -> BoltzmannPolicy {
    BoltzmannPolicy::from_q(q)
}

/// Result of a stationary soft value-iteration solve.
#[derive(Debug, Clone)]
pub struct SoftSolution {
    pub q: SaTable,
    pub v: Vec<f64>,
    pub policy: BoltzmannPolicy,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub gamma: f64,
}

/// Stationary soft value iteration with warm-start reuse across calls.
///
/// `solve` keeps the last value function; successive solves for nearby
/// rewards (IRL ascent, dual updates, decomposition line searches) then need
/// a handful of sweeps instead of a cold start.
#[derive(Debug, Clone)]
pub struct SoftSolver {
    tol: f64,
    max_iters: usize,
    carried_v: Option<Vec<f64>>,
}

impl Default for SoftSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl SoftSolver {
    pub fn new() -> Self {
        SoftSolver { tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS, carried_v: None }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iterations(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn reset(&mut self) {
        self.carried_v = None;
    }

    /// Iterates V(s) <- logsumexp_a [ r(s,a) + gamma * E_{s'} V(s') ] to a
    /// fixed point. Requires gamma < 1; finite-horizon problems go through
    /// `finite_horizon_soft_values`.
    pub fn solve(&mut self, cmdp: &TabularCmdp, reward: &SaTable) -> Result<SoftSolution> {
        if cmdp.gamma >= 1.0 {
            return Err(CoreError::Solver(
                "stationary soft value iteration needs discount < 1".into(),
            ));
        }
        let n_states = cmdp.n_states;
        let n_actions = cmdp.n_actions;
        let mut v = match self.carried_v.take() {
            Some(v) if v.len() == n_states => v,
            _ => vec![0.0; n_states],
        };
        let mut v_next = vec![0.0; n_states];
        let mut q_row = vec![0.0; n_actions];
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        let mut growth_streak = 0usize;
        while iterations < self.max_iters {
            iterations += 1;
            let prev_residual = residual;
            residual = 0.0;
            for s in 0..n_states {
                for (a, q) in q_row.iter_mut().enumerate() {
                    let mut ev = 0.0;
                    for &(sp, p) in cmdp.successors(s, a) {
                        ev += p * v[sp as usize];
                    }
                    *q = reward.get(s, a) + cmdp.gamma * ev;
                }
                let nv = logsumexp(&q_row);
                let delta = (nv - v[s]).abs();
                if delta > residual {
                    residual = delta;
                }
                v_next[s] = nv;
            }
            core::mem::swap(&mut v, &mut v_next);
            if !residual.is_finite() || v.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::Solver("soft value iteration diverged".into()));
            }
            // A discounted backup contracts, so a long run of growing
            // residuals means something upstream fed in garbage.
            growth_streak = if residual > prev_residual { growth_streak + 1 } else { 0 };
            if growth_streak >= 100 {
                return Err(CoreError::Solver(alloc::format!(
                    "soft value iteration residual grew for {growth_streak} consecutive iterations"
                )));
            }
            if residual <= self.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(CoreError::Solver(alloc::format!(
                "soft value iteration hit the {} iteration cap with residual {residual:e}",
                self.max_iters
            )));
        }
        let mut q = SaTable::zeros(n_states, n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                let mut ev = 0.0;
                for &(sp, p) in cmdp.successors(s, a) {
                    ev += p * v[sp as usize];
                }
                q.set(s, a, reward.get(s, a) + cmdp.gamma * ev);
            }
        }
        let policy = BoltzmannPolicy::from_q(&q);
        self.carried_v = Some(v.clone());
        Ok(SoftSolution { q, v, policy, iterations, converged, residual, gamma: cmdp.gamma })
    }
}

/// One-shot stationary solve with default tolerances.
pub fn soft_value_iteration(cmdp: &TabularCmdp, reward: &SaTable) -> Result<SoftSolution> {
    SoftSolver::new().solve(cmdp, reward)
}

/// Non-stationary finite-horizon soft values: `values[t][s]` for t = 0..=T
/// with `values[T] = 0`, built by backward induction
/// Q_t = r + gamma * E V_{t+1}, V_t = logsumexp_a Q_t.
///
/// Works for any gamma in [0, 1], including 1.
pub fn finite_horizon_soft_values(cmdp: &TabularCmdp, reward: &SaTable) -> Vec<Vec<f64>> {
    let n_states = cmdp.n_states;
    let n_actions = cmdp.n_actions;
    let horizon = cmdp.horizon;
    let mut values = vec![vec![0.0; n_states]; horizon + 1];
    let mut q_row = vec![0.0; n_actions];
    for t in (0..horizon).rev() {
        for s in 0..n_states {
            for (a, q) in q_row.iter_mut().enumerate() {
                let mut ev = 0.0;
                for &(sp, p) in cmdp.successors(s, a) {
                    ev += p * values[t + 1][sp as usize];
                }
                *q = reward.get(s, a) + cmdp.gamma * ev;
            }
            values[t][s] = logsumexp(&q_row);
        }
    }
    values
}

/// How an occupancy weights time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// sum_t gamma^t mu_t  (objective-side expectations).
    DiscountedSum,
    /// (1/T) sum_t mu_t  (violation-style per-step averages).
    PerStepAverage,
}

/// State and state-action visitation aggregated over the horizon.
///
/// Per-step mass is conserved (terminal states hold their mass via the
/// self-loop), but terminal states contribute no state-action mass: rollouts
/// stop there, so no action is ever taken.
#[derive(Debug, Clone)]
pub struct Occupancy {
    pub state: Vec<f64>,
    pub sa: SaTable,
    pub normalization: Normalization,
    /// sum_s state(s); equals sum of the per-step weights.
    pub total_mass: f64,
}

impl Occupancy {
    /// sum_{s,a} nu(s,a) * x(s,a).
    pub fn expected_value(&self, x: &SaTable) -> f64 {
        let mut total = 0.0;
        for s in 0..self.sa.n_states() {
            for a in 0..self.sa.n_actions() {
                total += self.sa.get(s, a) * x.get(s, a);
            }
        }
        total
    }

    /// sum_{s,a} nu(s,a) * phi(s,a), the policy-side moment vector.
    pub fn feature_expectations(&self, cmdp: &TabularCmdp) -> Vec<f64> {
        let d = cmdp.features.dim();
        let mut acc = vec![0.0; d];
        for s in 0..self.sa.n_states() {
            for a in 0..self.sa.n_actions() {
                let w = self.sa.get(s, a);
                if w == 0.0 {
                    continue;
                }
                for (acc_i, &phi_i) in acc.iter_mut().zip(cmdp.features.vector(s, a)) {
                    *acc_i += w * phi_i;
                }
            }
        }
        acc
    }

    /// State marginal scaled to a probability distribution.
    pub fn normalized_state_dist(&self) -> Vec<f64> {
        let z = self.total_mass.max(f64::MIN_POSITIVE);
        self.state.iter().map(|x| x / z).collect()
    }
}

/// Forward visitation recursion over the horizon:
/// mu_{t+1}(s') = sum_{s,a} mu_t(s) pi(a|s) T(s,a,s'), mu_0 = start.
pub fn occupancy(
    cmdp: &TabularCmdp,
    policy: &BoltzmannPolicy,
    normalization: Normalization,
) -> Occupancy {
    occupancy_steps(cmdp, policy, normalization, cmdp.horizon)
}

/// `occupancy` with an explicit step count instead of the CMDP's horizon.
/// With enough steps and a discount below one this approximates the
/// infinite-horizon discounted occupancy to geometric accuracy.
pub fn occupancy_steps(
    cmdp: &TabularCmdp,
    policy: &BoltzmannPolicy,
    normalization: Normalization,
    horizon: usize,
) -> Occupancy {
    let n_states = cmdp.n_states;
    let n_actions = cmdp.n_actions;
    let mut mu = vec![0.0; n_states];
    for &(s, p) in &cmdp.start {
        mu[s as usize] += p;
    }
    let mut state = vec![0.0; n_states];
    let mut sa = SaTable::zeros(n_states, n_actions);
    let mut total_mass = 0.0;
    let mut mu_next = vec![0.0; n_states];
    let mut disc = 1.0;
    for _t in 0..horizon {
        let weight = match normalization {
            Normalization::DiscountedSum => disc,
            Normalization::PerStepAverage => 1.0 / horizon as f64,
        };
        total_mass += weight;
        mu_next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n_states {
            let m = mu[s];
            if m == 0.0 {
                continue;
            }
            state[s] += weight * m;
            if cmdp.is_terminal(s) {
                mu_next[s] += m;
                continue;
            }
            for a in 0..n_actions {
                let pa = policy.probs.get(s, a);
                if pa == 0.0 {
                    continue;
                }
                let flow = m * pa;
                sa.set(s, a, sa.get(s, a) + weight * flow);
                for &(sp, p) in cmdp.successors(s, a) {
                    mu_next[sp as usize] += flow * p;
                }
            }
        }
        core::mem::swap(&mut mu, &mut mu_next);
        disc *= cmdp.gamma;
    }
    Occupancy { state, sa, normalization, total_mass }
}

/// Raw per-step state marginals mu_t for t = 0..T-1, no weighting.
pub fn occupancy_per_step(cmdp: &TabularCmdp, policy: &BoltzmannPolicy) -> Vec<Vec<f64>> {
    let n_states = cmdp.n_states;
    let mut mu = vec![0.0; n_states];
    for &(s, p) in &cmdp.start {
        mu[s as usize] += p;
    }
    let mut out = Vec::with_capacity(cmdp.horizon);
    for _t in 0..cmdp.horizon {
        out.push(mu.clone());
        let mut mu_next = vec![0.0; n_states];
        for s in 0..n_states {
            let m = mu[s];
            if m == 0.0 {
                continue;
            }
            if cmdp.is_terminal(s) {
                mu_next[s] += m;
                continue;
            }
            for a in 0..cmdp.n_actions {
                let flow = m * policy.probs.get(s, a);
                if flow == 0.0 {
                    continue;
                }
                for &(sp, p) in cmdp.successors(s, a) {
                    mu_next[sp as usize] += flow * p;
                }
            }
        }
        mu = mu_next;
    }
    out
}

/// Samples one episode under `policy`: ends at the horizon or on entering a
/// terminal state (terminal states record no action).
pub fn rollout<R: Rng>(cmdp: &TabularCmdp, policy: &BoltzmannPolicy, rng: &mut R) -> Trajectory {
    let mut s = sample_sparse(&cmdp.start, rng);
    let mut states = vec![s as u32];
    let mut actions = Vec::new();
    for _t in 0..cmdp.horizon {
        if cmdp.is_terminal(s) {
            break;
        }
        let a = sample_row(policy.probs.row(s), rng);
        actions.push(a as u32);
        s = sample_sparse(cmdp.successors(s, a), rng);
        states.push(s as u32);
    }
    Trajectory { states, actions }
}

fn sample_sparse<R: Rng>(entries: &[(u32, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(s, p) in entries {
        acc += p;
        if u < acc {
            return s as usize;
        }
    }
    entries.last().map(|&(s, _)| s as usize).unwrap_or(0)
}

fn sample_row<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    probs.len() - 1
}

/// Fixed point of Q = r + gamma * P V with V(s) = E_{a ~ pi(.|s)} Q(s,a).
///
/// The expectation uses the supplied policy, not the soft-max of Q: this is
/// the value a candidate reward earns when actions keep coming from `policy`.
pub fn evaluate_reward_under_policy(
    cmdp: &TabularCmdp,
    reward: &SaTable,
    policy: &BoltzmannPolicy,
    tol: f64,
    max_iters: usize,
) -> Result<(SaTable, Vec<f64>)> {
    if cmdp.gamma >= 1.0 {
        return Err(CoreError::Solver("policy evaluation needs discount < 1".into()));
    }
    let n_states = cmdp.n_states;
    let n_actions = cmdp.n_actions;
    let mut v = vec![0.0; n_states];
    let mut v_next = vec![0.0; n_states];
    for iter in 0..max_iters {
        let mut residual = 0.0f64;
        for s in 0..n_states {
            let mut ev_s = 0.0;
            for a in 0..n_actions {
                let mut ev = 0.0;
                for &(sp, p) in cmdp.successors(s, a) {
                    ev += p * v[sp as usize];
                }
                ev_s += policy.probs.get(s, a) * (reward.get(s, a) + cmdp.gamma * ev);
            }
            residual = residual.max((ev_s - v[s]).abs());
            v_next[s] = ev_s;
        }
        core::mem::swap(&mut v, &mut v_next);
        if residual <= tol {
            let mut q = SaTable::zeros(n_states, n_actions);
            for s in 0..n_states {
                for a in 0..n_actions {
                    let mut ev = 0.0;
                    for &(sp, p) in cmdp.successors(s, a) {
                        ev += p * v[sp as usize];
                    }
                    q.set(s, a, reward.get(s, a) + cmdp.gamma * ev);
                }
            }
            return Ok((q, v));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::Solver("policy evaluation diverged".into()));
        }
        let _ = iter;
    }
    Err(CoreError::Solver("policy evaluation hit its iteration cap".into()))
}

/// sum_s w(s) * KL(p(.|s) || q(.|s)), computed from exact log-probs.
pub fn kl_policy_divergence(p: &BoltzmannPolicy, q: &BoltzmannPolicy, state_weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for s in 0..p.n_states() {
        let w = state_weights[s];
        if w == 0.0 {
            continue;
        }
        let mut kl = 0.0;
        for a in 0..p.n_actions() {
            let pa = p.probs.get(s, a);
            if pa > 0.0 {
                kl += pa * (p.log_probs.get(s, a) - q.log_probs.get(s, a));
            }
        }
        // Per-state KL is nonnegative up to rounding.
        total += w * kl.max(0.0);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::FeatureTable;
    use alloc::string::ToString;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn single_state_cmdp(gamma: f64) -> TabularCmdp {
        TabularCmdp {
            n_states: 1,
            n_actions: 2,
            transitions: vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            features: FeatureTable::new(vec!["f".to_string()], 1, 2),
            start: vec![(0, 1.0)],
            gamma,
            horizon: 5,
            terminal: vec![false],
        }
    }

    #[test]
    fn stationary_solve_matches_closed_form_fixed_point() {
        // One state, self-loop: V = logsumexp(r) / (1 - gamma).
        let cmdp = single_state_cmdp(0.8);
        let reward = SaTable::from_fn(1, 2, |_, a| if a == 0 { 1.0 } else { -0.5 });
        let sol = soft_value_iteration(&cmdp, &reward).unwrap();
        let expected = logsumexp(&[1.0, -0.5]) / (1.0 - 0.8);
        assert!(sol.converged);
        assert_relative_eq!(sol.v[0], expected, epsilon = 1e-6);
    }

    #[test]
    fn solver_rejects_undiscounted_stationary_solve() {
        let cmdp = single_state_cmdp(1.0);
        let reward = SaTable::zeros(1, 2);
        assert!(soft_value_iteration(&cmdp, &reward).is_err());
    }

    #[test]
    fn warm_start_cuts_iterations() {
        let cmdp = single_state_cmdp(0.95);
        let reward = SaTable::from_fn(1, 2, |_, a| a as f64);
        let mut solver = SoftSolver::new();
        let cold = solver.solve(&cmdp, &reward).unwrap();
        let warm = solver.solve(&cmdp, &reward).unwrap();
        assert!(warm.iterations < cold.iterations);
        assert_relative_eq!(warm.v[0], cold.v[0], epsilon = 1e-7);
    }

    #[test]
    fn policy_rows_are_normalized_and_positive() {
        let q = SaTable::from_fn(3, 4, |s, a| (s as f64) - 2.0 * (a as f64));
        let policy = boltzmann_policy(&q);
        assert!(policy.normalization_defect() < 1e-10);
        assert!(policy.probs.data().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn policy_is_invariant_to_per_state_shifts() {
        let q = SaTable::from_fn(2, 3, |s, a| (s + a) as f64 * 0.37);
        let shifted = SaTable::from_fn(2, 3, |s, a| q.get(s, a) + 100.0 * (s as f64 + 1.0));
        let p1 = boltzmann_policy(&q);
        let p2 = boltzmann_policy(&shifted);
        assert!(p1.max_abs_diff(&p2) < 1e-12);
    }

    #[test]
    fn finite_horizon_values_match_hand_computation() {
        // Two-step, gamma 0.5: V_1 = lse(r), V_0 = lse(r + 0.5 V_1).
        let cmdp = {
            let mut c = single_state_cmdp(0.5);
            c.horizon = 2;
            c
        };
        let reward = SaTable::from_fn(1, 2, |_, a| if a == 0 { 0.0 } else { 1.0 });
        let values = finite_horizon_soft_values(&cmdp, &reward);
        let v1 = logsumexp(&[0.0, 1.0]);
        let v0 = logsumexp(&[0.5 * v1, 1.0 + 0.5 * v1]);
        assert_relative_eq!(values[2][0], 0.0);
        assert_relative_eq!(values[1][0], v1, max_relative = 1e-14);
        assert_relative_eq!(values[0][0], v0, max_relative = 1e-14);
    }

    fn two_state_chain() -> TabularCmdp {
        // Action 0 stays, action 1 advances 0 -> 1; state 1 self-loops.
        let mut features = FeatureTable::new(vec!["x".to_string()], 2, 2);
        features.vector_mut(1, 0)[0] = 1.0;
        features.vector_mut(1, 1)[0] = 1.0;
        TabularCmdp {
            n_states: 2,
            n_actions: 2,
            transitions: vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)]],
            features,
            start: vec![(0, 1.0)],
            gamma: 0.9,
            horizon: 3,
            terminal: vec![false, false],
        }
    }

    #[test]
    fn occupancy_matches_hand_rolled_recursion() {
        let cmdp = two_state_chain();
        // Uniform policy: from state 0, half the mass advances per step.
        let q = SaTable::zeros(2, 2);
        let policy = boltzmann_policy(&q);
        let occ = occupancy(&cmdp, &policy, Normalization::DiscountedSum);
        // mu_0 = (1, 0); mu_1 = (0.5, 0.5); mu_2 = (0.25, 0.75)
        let g = cmdp.gamma;
        assert_relative_eq!(occ.state[0], 1.0 + 0.5 * g + 0.25 * g * g, max_relative = 1e-12);
        assert_relative_eq!(occ.state[1], 0.5 * g + 0.75 * g * g, max_relative = 1e-12);
        assert_relative_eq!(occ.total_mass, 1.0 + g + g * g, max_relative = 1e-12);
    }

    #[test]
    fn per_step_marginals_conserve_mass() {
        let cmdp = two_state_chain();
        let policy = boltzmann_policy(&SaTable::from_fn(2, 2, |s, a| (s * a) as f64));
        for mu in occupancy_per_step(&cmdp, &policy) {
            assert_relative_eq!(mu.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn per_step_average_occupancy_sums_to_one() {
        let cmdp = two_state_chain();
        let policy = boltzmann_policy(&SaTable::zeros(2, 2));
        let occ = occupancy(&cmdp, &policy, Normalization::PerStepAverage);
        assert_relative_eq!(occ.total_mass, 1.0, epsilon = 1e-12);
        assert_relative_eq!(occ.state.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rollouts_respect_terminal_states() {
        let mut cmdp = two_state_chain();
        cmdp.terminal = vec![false, true];
        cmdp.transitions[2] = vec![(1, 1.0)];
        cmdp.transitions[3] = vec![(1, 1.0)];
        let q = SaTable::from_fn(2, 2, |_, a| if a == 1 { 10.0 } else { -10.0 });
        let policy = boltzmann_policy(&q);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let traj = rollout(&cmdp, &policy, &mut rng);
        // Advances on the first step with overwhelming probability, then stops.
        assert_eq!(traj.states.last().copied(), Some(1));
        assert!(traj.len() <= cmdp.horizon);
        traj.validate_against(&cmdp).unwrap();
    }

    #[test]
    fn policy_evaluation_matches_direct_linear_solve() {
        // Two states, analytic check: V = (I - gamma P_pi)^-1 r_pi.
        let cmdp = two_state_chain();
        let reward = SaTable::from_fn(2, 2, |s, a| if s == 1 { 1.0 } else { a as f64 * 0.25 });
        let policy = boltzmann_policy(&SaTable::zeros(2, 2));
        let (_q, v) = evaluate_reward_under_policy(&cmdp, &reward, &policy, 1e-12, 100_000).unwrap();
        // r_pi = (0.125, 1.0); P_pi = [[0.5, 0.5], [0, 1]] with gamma 0.9.
        // v1 = 1 / (1 - 0.9) = 10; v0 = 0.125 + 0.9*(0.5 v0 + 0.5 v1)
        let v1 = 10.0;
        let v0 = (0.125 + 0.45 * v1) / (1.0 - 0.45);
        assert_relative_eq!(v[1], v1, epsilon = 1e-9);
        assert_relative_eq!(v[0], v0, epsilon = 1e-9);
    }

    #[test]
    fn kl_divergence_is_zero_for_identical_policies_and_positive_otherwise() {
        let p = boltzmann_policy(&SaTable::from_fn(2, 3, |s, a| (s + a) as f64));
        let q = boltzmann_policy(&SaTable::from_fn(2, 3, |s, a| (s as f64) - (a as f64)));
        let w = vec![0.5, 0.5];
        assert_relative_eq!(kl_policy_divergence(&p, &p, &w), 0.0, epsilon = 1e-14);
        assert!(kl_policy_divergence(&p, &q, &w) > 1e-3);
    }
}
