//! Seed-driven fixtures shared by the integration suites. Each test target
//! compiles its own copy, so not every helper is used everywhere.
#![allow(dead_code)]

use rand::Rng;
use tcl_core::rng::substream;
use tcl_core::table::SaTable;
use tcl_core::{FeatureTable, TabularCmdp, Trajectory};

/// Plain shifted log-sum-exp, written out locally so oracle checks do not
/// lean on the crate's own numerics.
pub fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Random CMDP with up to 6 states, 4 actions, horizon 6, and 2 to 4 feature
/// dimensions, plus an unrelated random reward table. Deterministic mode
/// forces single-successor transitions and no discounting, the regime where
/// soft values equal a log-sum-exp over action sequences.
pub fn random_instance(seed: u64, deterministic: bool) -> (TabularCmdp, SaTable) {
    let mut rng = substream(seed, "oracle/instance");
    let n_states = rng.gen_range(2..=6);
    let n_actions = rng.gen_range(2..=4);
    let horizon = rng.gen_range(1..=6);
    let gamma = if deterministic { 1.0 } else { rng.gen_range(0.3..0.99) };
    let mut transitions = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        if deterministic || rng.gen_bool(0.5) {
            transitions.push(vec![(rng.gen_range(0..n_states) as u32, 1.0)]);
        } else {
            let s1 = rng.gen_range(0..n_states) as u32;
            let s2 = rng.gen_range(0..n_states) as u32;
            let p: f64 = rng.gen_range(0.1..0.9);
            transitions.push(vec![(s1, p), (s2, 1.0 - p)]);
        }
    }
    let d = rng.gen_range(2..=4);
    let names = (0..d).map(|j| format!("f{j}")).collect();
    let mut features = FeatureTable::new(names, n_states, n_actions);
    for s in 0..n_states {
        for a in 0..n_actions {
            for v in features.vector_mut(s, a) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
    }
    let mut reward = SaTable::zeros(n_states, n_actions);
    for s in 0..n_states {
        for a in 0..n_actions {
            reward.set(s, a, rng.gen_range(-2.0..2.0));
        }
    }
    let cmdp = TabularCmdp {
        n_states,
        n_actions,
        transitions,
        features,
        start: vec![(rng.gen_range(0..n_states) as u32, 1.0)],
        gamma,
        horizon,
        terminal: vec![false; n_states],
    };
    cmdp.validate().unwrap();
    (cmdp, reward)
}

/// Log of the sum over all action sequences of the exponentiated total
/// reward, by simulating every sequence forward. Equals the soft value only
/// for deterministic transitions without discounting.
pub fn path_enumeration_value(cmdp: &TabularCmdp, reward: &SaTable, s0: usize) -> f64 {
    let m = cmdp.n_actions;
    let n_paths = m.pow(cmdp.horizon as u32);
    let mut totals = Vec::with_capacity(n_paths);
    for code in 0..n_paths {
        let mut c = code;
        let mut s = s0;
        let mut total = 0.0;
        for _ in 0..cmdp.horizon {
            let a = c % m;
            c /= m;
            total += reward.get(s, a);
            s = cmdp.successors(s, a)[0].0 as usize;
        }
        totals.push(total);
    }
    lse(&totals)
}

/// Uniform-action walk through the CMDP's dynamics, `len` steps long.
pub fn random_trajectory(cmdp: &TabularCmdp, rng: &mut impl Rng, len: usize) -> Trajectory {
    let mut s = cmdp.start[0].0;
    let mut states = vec![s];
    let mut actions = Vec::with_capacity(len);
    for _ in 0..len {
        let a = rng.gen_range(0..cmdp.n_actions) as u32;
        let row = cmdp.successors(s as usize, a as usize);
        let mut u: f64 = rng.gen();
        let mut next = row[row.len() - 1].0;
        for &(sp, p) in row {
            if u <= p {
                next = sp;
                break;
            }
            u -= p;
        }
        actions.push(a);
        s = next;
        states.push(s);
    }
    Trajectory { states, actions }
}
