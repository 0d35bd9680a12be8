//! Evaluation metrics: violation and success rates on rollouts, and
//! correlation measures between reward models.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::cmdp::{LinearReward, Trajectory};
use crate::envs::EnvInstance;
use crate::error::{CoreError, Result};
use crate::math;
use crate::rng::substream;
use crate::table::SaTable;

/// Fraction of steps incurring positive cost, pooled over all trajectories
/// (total violating steps over total steps, not a per-trajectory average).
pub fn violation_rate(trajs: &[Trajectory], cost: &SaTable) -> Result<f64> {
    if trajs.is_empty() {
        return Err(CoreError::Config("violation rate needs at least one trajectory".into()));
    }
    let mut violating = 0usize;
    let mut steps = 0usize;
    for traj in trajs {
        for (s, a) in traj.steps() {
            steps += 1;
            if cost.get(s, a) > 0.0 {
                violating += 1;
            }
        }
    }
    if steps == 0 {
        return Err(CoreError::Config("violation rate needs at least one step".into()));
    }
    Ok(violating as f64 / steps as f64)
}

/// Per-episode outcome rates against the environment's own goal predicate
/// and true cost: success counts episodes that visit a goal state while
/// incurring no positive-cost step, goal completion ignores cost entirely.
pub fn success_rate(trajs: &[Trajectory], env: &EnvInstance) -> Result<(f64, f64)> {
    if trajs.is_empty() {
        return Err(CoreError::Config("success rate needs at least one trajectory".into()));
    }
    let cost = env.expert_cost_table();
    let mut successes = 0usize;
    let mut completions = 0usize;
    for traj in trajs {
        let reached = traj.states.iter().any(|&s| env.goal[s as usize]);
        let clean = traj.steps().all(|(s, a)| cost.get(s, a) <= 0.0);
        if reached {
            completions += 1;
            if clean {
                successes += 1;
            }
        }
    }
    let n = trajs.len() as f64;
    Ok((successes as f64 / n, completions as f64 / n))
}

/// Pearson sample correlation. Centering happens internally, so adding a
/// constant to either sequence never changes the result.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(CoreError::Config(format!(
            "correlation needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(CoreError::Config("correlation needs at least two samples".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(CoreError::DegenerateCorrelation);
    }
    // Cauchy-Schwarz bounds the ratio by 1; rounding can breach it.
    Ok((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Probability that a uniformly drawn positive outscores a uniformly drawn
/// negative, ties counted half. 1.0 means the scores rank every positive
/// above every negative.
pub fn rank_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(CoreError::Config(format!(
            "rank separation needs equal lengths, got {} scores and {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos: Vec<f64> =
        scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> =
        scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(CoreError::Config("rank separation needs both classes present".into()));
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}

/// Pearson correlation between two reward models over (s, a) pairs drawn
/// uniformly from each environment and pooled. The draw depends only on the
/// seed and the environments, so the result is symmetric in the two models.
pub fn decomposition_correlation(
    a: &LinearReward,
    b: &LinearReward,
    envs: &[EnvInstance],
    samples_per_env: usize,
    seed: u64,
) -> Result<f64> {
    if envs.is_empty() || samples_per_env == 0 {
        return Err(CoreError::Config("correlation needs environments and a sample budget".into()));
    }
    let mut xs = Vec::with_capacity(envs.len() * samples_per_env);
    let mut ys = Vec::with_capacity(envs.len() * samples_per_env);
    for env in envs {
        let table_a = a.evaluate(&env.cmdp.features)?;
        let table_b = b.evaluate(&env.cmdp.features)?;
        let mut rng = substream(seed, &format!("corr/{}", env.id));
        for _ in 0..samples_per_env {
            let s = rng.gen_range(0..env.cmdp.n_states);
            let act = rng.gen_range(0..env.cmdp.n_actions);
            xs.push(table_a.get(s, act));
            ys.push(table_b.get(s, act));
        }
    }
    pearson(&xs, &ys)
}
