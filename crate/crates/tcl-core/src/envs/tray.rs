//! Tray carrying: slide a tray along a rail to a goal position without
//! letting it tilt past 20 degrees.
//!
//! State is (position, tilt, goal position); tilt bins are 5 degrees apart
//! with the middle bin upright. Sliding disturbs the tilt by the instance's
//! sensitivity (left adds, right subtracts), so progress must be interleaved
//! with corrective tilt actions. The goal position lives in the state, which
//! lets one policy serve every start/goal pairing.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cmdp::{FeatureTable, TabularCmdp};
use crate::error::{CoreError, Result};
use crate::rng::substream;

use super::{finish_instance, reject_param, EnvAssembly, EnvFamily, EnvInstance, EnvParams, Geometry};

const N_ACTIONS: usize = 5;
const A_LEFT: usize = 0;
const A_RIGHT: usize = 1;
const A_TILT_DOWN: usize = 2;
const A_TILT_UP: usize = 3;

/// Tilt bins at or past this offset from upright violate (4 bins = 20 deg).
pub(super) const TILT_LIMIT: usize = 4;
pub(super) const X_STEP: f64 = 0.06;
const N_CONFIGS: usize = 6;
pub(super) const MIN_SEPARATION: usize = 6;

pub(super) struct TrayLayout {
    pub n_pos: usize,
    pub n_tilt: usize,
}

impl TrayLayout {
    pub fn state(&self, pos: usize, tilt: usize, goal: usize) -> usize {
        (pos * self.n_tilt + tilt) * self.n_pos + goal
    }

    pub fn parts(&self, s: usize) -> (usize, usize, usize) {
        let goal = s % self.n_pos;
        let rest = s / self.n_pos;
        (rest / self.n_tilt, rest % self.n_tilt, goal)
    }

    pub fn n_states(&self) -> usize {
        self.n_pos * self.n_tilt * self.n_pos
    }

    pub fn upright(&self) -> usize {
        (self.n_tilt - 1) / 2
    }

    pub fn center(&self) -> usize {
        self.n_pos / 2
    }

    pub fn x(&self, pos: usize) -> f64 {
        (pos as f64 - self.center() as f64) * X_STEP
    }
}

pub(super) fn build(seed: u64, grid: (usize, usize), params: &EnvParams) -> Result<EnvInstance> {
    reject_param(EnvFamily::Tray, "a", params.a)?;
    reject_param(EnvFamily::Tray, "b", params.b)?;
    let layout = check_grid(grid)?;
    let mut rng = substream(seed, "env/tray/geometry");
    let sensitivity = match params.tilt_sensitivity {
        Some(v) => {
            let k = v as usize;
            if v != k as f64 || !(1..=3).contains(&k) {
                return Err(CoreError::Config(format!(
                    "tilt_sensitivity {v} must be 1, 2 or 3"
                )));
            }
            k
        }
        None => rng.gen_range(1..=3),
    };
    let configs = sample_configs(&mut rng, &layout)?;
    build_from_geometry(seed, grid, &Geometry::Tray { sensitivity, configs })
}

pub(super) fn build_from_geometry(
    seed: u64,
    grid: (usize, usize),
    geometry: &Geometry,
) -> Result<EnvInstance> {
    let Geometry::Tray { sensitivity, configs } = geometry else {
        return Err(CoreError::Config("geometry is not a tray layout".into()));
    };
    let layout = check_grid(grid)?;
    if !(1..=3).contains(sensitivity) {
        return Err(CoreError::Config(format!("tilt sensitivity {sensitivity} must be 1, 2 or 3")));
    }
    if configs.is_empty() {
        return Err(CoreError::Config("tray layout has no start/goal pairs".into()));
    }
    for &(s, g) in configs {
        if s >= layout.n_pos || g >= layout.n_pos {
            return Err(CoreError::Config(format!("tray pair ({s}, {g}) outside the rail")));
        }
    }

    let n = layout.n_states();
    let upright = layout.upright();
    let k = *sensitivity;

    let mut transitions = Vec::with_capacity(n * N_ACTIONS);
    for s in 0..n {
        let (pos, tilt, goal) = layout.parts(s);
        for a in 0..N_ACTIONS {
            let (np, nt) = match a {
                A_LEFT if pos > 0 => (pos - 1, (tilt + k).min(layout.n_tilt - 1)),
                A_RIGHT if pos + 1 < layout.n_pos => (pos + 1, tilt.saturating_sub(k)),
                A_TILT_DOWN => (pos, tilt.saturating_sub(1)),
                A_TILT_UP => (pos, (tilt + 1).min(layout.n_tilt - 1)),
                _ => (pos, tilt),
            };
            transitions.push(vec![(layout.state(np, nt, goal) as u32, 1.0)]);
        }
    }

    let names: Vec<String> =
        ["bias", "goal_ind", "goal_dist", "tilt_exceed", "tilt_mag", "tray_x", "goal_x"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let mut features = FeatureTable::new(names, n, N_ACTIONS);
    let goal_mask: Vec<bool> = (0..n)
        .map(|s| {
            let (pos, _, goal) = layout.parts(s);
            pos == goal
        })
        .collect();
    for s in 0..n {
        let (pos, tilt, goal) = layout.parts(s);
        let off = (tilt as isize - upright as isize).unsigned_abs();
        for a in 0..N_ACTIONS {
            let v = features.vector_mut(s, a);
            v[0] = 1.0;
            v[1] = if pos == goal { 1.0 } else { 0.0 };
            v[2] = (pos as f64 - goal as f64).abs() * X_STEP;
            v[3] = if off >= TILT_LIMIT { 1.0 } else { 0.0 };
            v[4] = off as f64 / upright as f64;
            v[5] = layout.x(pos);
            v[6] = layout.x(goal);
        }
    }

    let start_states: Vec<usize> =
        configs.iter().map(|&(s, g)| layout.state(s, upright, g)).collect();
    let p = 1.0 / start_states.len() as f64;
    let cmdp = TabularCmdp {
        n_states: n,
        n_actions: N_ACTIONS,
        transitions,
        features,
        start: start_states.iter().map(|&s| (s as u32, p)).collect(),
        gamma: super::DEFAULT_GAMMA,
        horizon: super::DEFAULT_HORIZON,
        terminal: vec![false; n],
    };

    let assembly = EnvAssembly {
        reward_names: vec!["goal_ind".to_string(), "goal_dist".to_string()],
        reward_weights: vec![1.0, -0.1],
        cost_names: vec!["tilt_exceed".to_string()],
        cost_weights: vec![1.0],
    };
    finish_instance(
        format!("tray-s{seed}"),
        EnvFamily::Tray,
        seed,
        grid,
        cmdp,
        goal_mask,
        assembly,
        geometry.clone(),
        &start_states,
    )
}

fn sample_configs<R: Rng>(rng: &mut R, layout: &TrayLayout) -> Result<Vec<(usize, usize)>> {
    let center = layout.center();
    let mut configs: Vec<(usize, usize)> = Vec::with_capacity(N_CONFIGS);
    for _ in 0..400 {
        if configs.len() == N_CONFIGS {
            break;
        }
        let s = rng.gen_range(0..center);
        let g = rng.gen_range(center + 1..layout.n_pos);
        if g - s >= MIN_SEPARATION && !configs.contains(&(s, g)) {
            configs.push((s, g));
        }
    }
    if configs.len() < N_CONFIGS {
        return Err(CoreError::Config("could not sample distinct tray start/goal pairs".into()));
    }
    configs.sort_unstable();
    Ok(configs)
}

fn check_grid(grid: (usize, usize)) -> Result<TrayLayout> {
    let (n_pos, n_tilt) = grid;
    if n_pos < 15 || n_pos % 2 == 0 || n_tilt < 9 || n_tilt % 2 == 0 {
        return Err(CoreError::Config(format!(
            "tray rail {n_pos}x{n_tilt} needs odd sizes, at least 15 positions and 9 tilt bins"
        )));
    }
    Ok(TrayLayout { n_pos, n_tilt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_env() -> EnvInstance {
        build(3, (21, 13), &EnvParams::default()).unwrap()
    }

    #[test]
    fn twenty_degree_tilt_violates() {
        let env = default_env();
        let layout = TrayLayout { n_pos: 21, n_tilt: 13 };
        let cost = env.expert_cost_table();
        // Bins 10 and 2 sit 20 degrees from upright; 9 and 3 sit at 15.
        assert_eq!(cost.get(layout.state(5, 10, 15), 0), 1.0);
        assert_eq!(cost.get(layout.state(5, 2, 15), 0), 1.0);
        assert_eq!(cost.get(layout.state(5, 9, 15), 0), 0.0);
        assert_eq!(cost.get(layout.state(5, 3, 15), 0), 0.0);
    }

    #[test]
    fn sliding_disturbs_tilt() {
        let env = build(0, (21, 13), &EnvParams { tilt_sensitivity: Some(2.0), ..Default::default() })
            .unwrap();
        let layout = TrayLayout { n_pos: 21, n_tilt: 13 };
        let from = layout.state(5, 6, 15);
        let left = env.cmdp.successors(from, A_LEFT)[0].0 as usize;
        assert_eq!(layout.parts(left), (4, 8, 15));
        let right = env.cmdp.successors(from, A_RIGHT)[0].0 as usize;
        assert_eq!(layout.parts(right), (6, 4, 15));
        // Rail ends swallow the whole move, tilt included.
        let edge = layout.state(20, 6, 15);
        assert_eq!(env.cmdp.successors(edge, A_RIGHT)[0].0 as usize, edge);
    }

    #[test]
    fn configs_split_the_rail() {
        let env = default_env();
        let Geometry::Tray { configs, .. } = &env.geometry else { unreachable!() };
        assert_eq!(configs.len(), 6);
        for &(s, g) in configs {
            assert!(s < 10, "start {s}");
            assert!(g > 10, "goal {g}");
            assert!(g - s >= 6);
        }
    }

    #[test]
    fn starts_are_upright_at_config_positions() {
        let env = default_env();
        let layout = TrayLayout { n_pos: 21, n_tilt: 13 };
        let Geometry::Tray { configs, .. } = &env.geometry else { unreachable!() };
        assert_eq!(env.cmdp.start.len(), configs.len());
        for (&(s, _), &(start, goal)) in env.cmdp.start.iter().zip(configs) {
            assert_eq!(layout.parts(s as usize), (start, 6, goal));
        }
    }

    #[test]
    fn x_mapping_spans_the_rail() {
        let layout = TrayLayout { n_pos: 21, n_tilt: 13 };
        assert_relative_eq!(layout.x(0), -0.6);
        assert_relative_eq!(layout.x(10), 0.0);
        assert_relative_eq!(layout.x(20), 0.6);
    }

    #[test]
    fn reproducible_and_feasible_across_sensitivities() {
        for k in 1..=3 {
            let params = EnvParams { tilt_sensitivity: Some(k as f64), ..Default::default() };
            let env = build(9, (21, 13), &params).unwrap();
            let Geometry::Tray { sensitivity, .. } = env.geometry else { unreachable!() };
            assert_eq!(sensitivity, k);
        }
        let a = build(9, (21, 13), &EnvParams::default()).unwrap();
        let b = build(9, (21, 13), &EnvParams::default()).unwrap();
        assert_eq!(a.geometry, b.geometry);
    }
}
