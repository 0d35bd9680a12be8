//! Randomized cross-checks of the solvers against brute-force computations
//! that share no code with the implementation: forward path enumeration,
//! unmemoized tree recursion, dense linear solves, and Monte Carlo rollouts.

mod common;

use common::{lse, path_enumeration_value, random_instance};
use tcl_core::rng::substream;
use tcl_core::solver::{
    finite_horizon_soft_values, occupancy_steps, rollout, Normalization, SoftSolver,
};
use tcl_core::table::SaTable;
use tcl_core::TabularCmdp;

/// Dense Gaussian elimination with partial pivoting; fine at these sizes.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Soft value by direct recursion over the remaining horizon, no tables.
fn recursion_value(cmdp: &TabularCmdp, reward: &SaTable, s: usize, t: usize) -> f64 {
    if t == cmdp.horizon {
        return 0.0;
    }
    let mut q = Vec::with_capacity(cmdp.n_actions);
    for a in 0..cmdp.n_actions {
        let mut ev = 0.0;
        for &(sp, p) in cmdp.successors(s, a) {
            ev += p * recursion_value(cmdp, reward, sp as usize, t + 1);
        }
        q.push(reward.get(s, a) + cmdp.gamma * ev);
    }
    lse(&q)
}

#[test]
fn deterministic_undiscounted_values_match_path_enumeration() {
    for seed in 0..100 {
        let (cmdp, reward) = random_instance(seed, true);
        let s0 = cmdp.start[0].0 as usize;
        let values = finite_horizon_soft_values(&cmdp, &reward);
        let expected = path_enumeration_value(&cmdp, &reward, s0);
        let got = values[0][s0];
        assert!(
            (got - expected).abs() <= 1e-8,
            "seed {seed}: soft value {got} vs enumeration {expected}"
        );
    }
}

#[test]
fn stochastic_discounted_values_match_unmemoized_recursion() {
    for seed in 0..100 {
        let (cmdp, reward) = random_instance(seed, false);
        let values = finite_horizon_soft_values(&cmdp, &reward);
        for s in 0..cmdp.n_states {
            let expected = recursion_value(&cmdp, &reward, s, 0);
            let got = values[0][s];
            assert!(
                (got - expected).abs() <= 1e-8,
                "seed {seed}, state {s}: soft value {got} vs recursion {expected}"
            );
        }
    }
}

#[test]
fn stationary_values_solve_the_entropy_augmented_linear_system() {
    // At the fixed point, v(s) = sum_a pi(a|s) (r(s,a) - log pi(a|s))
    // + gamma * P_pi v. Solving that linear system densely must reproduce
    // the iterated values.
    for seed in 0..30 {
        let (cmdp, reward) = random_instance(seed, false);
        let sol = SoftSolver::new().with_tolerance(1e-12).solve(&cmdp, &reward).unwrap();
        let n = cmdp.n_states;
        let mut a_mat = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for s in 0..n {
            a_mat[s][s] = 1.0;
            for a in 0..cmdp.n_actions {
                let pi = sol.policy.probs.get(s, a);
                b[s] += pi * (reward.get(s, a) - sol.policy.log_probs.get(s, a));
                for &(sp, p) in cmdp.successors(s, a) {
                    a_mat[s][sp as usize] -= cmdp.gamma * pi * p;
                }
            }
        }
        let v = solve_dense(a_mat, b);
        for s in 0..n {
            assert!(
                (v[s] - sol.v[s]).abs() <= 1e-7,
                "seed {seed}, state {s}: linear solve {} vs iterate {}",
                v[s],
                sol.v[s]
            );
        }
    }
}

#[test]
fn discounted_occupancy_matches_monte_carlo() {
    let (cmdp, reward) = random_instance(11, false);
    let sol = SoftSolver::new().solve(&cmdp, &reward).unwrap();
    let occ = occupancy_steps(&cmdp, &sol.policy, Normalization::DiscountedSum, cmdp.horizon);
    let mut rng = substream(11, "oracle/mc");
    let n_rollouts = 40_000;
    let mut estimate = vec![0.0; cmdp.n_states];
    for _ in 0..n_rollouts {
        let traj = rollout(&cmdp, &sol.policy, &mut rng);
        let mut w = 1.0;
        for t in 0..traj.actions.len() {
            estimate[traj.states[t] as usize] += w;
            w *= cmdp.gamma;
        }
    }
    for e in &mut estimate {
        *e /= n_rollouts as f64;
    }
    for s in 0..cmdp.n_states {
        assert!(
            (estimate[s] - occ.state[s]).abs() < 0.05,
            "state {s}: monte carlo {} vs recursion {}",
            estimate[s],
            occ.state[s]
        );
    }
}
