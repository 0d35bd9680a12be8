//! Surface wiping: move the tool rightward to the goal column while pressing
//! into a curved surface hard enough to keep contact force at or above 0.8.
//!
//! Contact force grows with penetration depth below the surface row, capped
//! at 1.5. Depth 2 is the shallowest safe contact, so the safe set is every
//! cell at least two rows under the surface; free space above the surface has
//! zero force and violates. The raw `pos_y` feature tracks the surface shape
//! in demonstrations, which makes box-style constraint fits brittle under
//! surface perturbation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cmdp::{FeatureTable, TabularCmdp};
use crate::error::{CoreError, Result};
use crate::math;
use crate::rng::substream;

use super::{
    finish_instance, reject_param, EnvAssembly, EnvFamily, EnvInstance, EnvParams, Geometry,
    PlanarGrid, CELL, PLANAR_ACTIONS,
};

pub(super) const FORCE_GAIN: f64 = 0.4;
pub(super) const FORCE_CAP: f64 = 1.5;
pub(super) const FORCE_MIN: f64 = 0.8;

pub(super) fn build(seed: u64, grid: (usize, usize), params: &EnvParams) -> Result<EnvInstance> {
    reject_param(EnvFamily::Wiping, "b", params.b)?;
    reject_param(EnvFamily::Wiping, "tilt_sensitivity", params.tilt_sensitivity)?;
    check_grid(grid)?;
    let mut rng = substream(seed, "env/wiping/geometry");
    let a = params.a.unwrap_or_else(|| rng.gen_range(-0.3..0.3));
    let goal_col = rng.gen_range(grid.0 - 7..grid.0);
    let curve = surface_rows(a, grid);
    let starts: Vec<(usize, usize)> = (0..3).map(|c| (c, curve[c] - 1)).collect();
    let geometry = Geometry::Wiping { a, goal_col, starts };
    build_from_geometry(seed, grid, &geometry)
}

pub(super) fn build_from_geometry(
    seed: u64,
    grid: (usize, usize),
    geometry: &Geometry,
) -> Result<EnvInstance> {
    let Geometry::Wiping { a, goal_col, starts } = geometry else {
        return Err(CoreError::Config("geometry is not a wiping layout".into()));
    };
    check_grid(grid)?;
    let (w, h) = grid;
    if *goal_col >= w || starts.iter().any(|&(c, r)| c >= w || r >= h) {
        return Err(CoreError::Config("goal column or start outside the grid".into()));
    }
    if starts.is_empty() {
        return Err(CoreError::Config("wiping layout has no start cells".into()));
    }
    let plan = PlanarGrid { w, h };
    let n = plan.n_states();
    let curve = surface_rows(*a, grid);

    let names: Vec<String> = ["bias", "goal_ind", "goal_dist", "contact_force", "force_low", "pos_y"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut features = FeatureTable::new(names, n, PLANAR_ACTIONS);
    let goal_mask: Vec<bool> = (0..n).map(|s| plan.coords(s).0 == *goal_col).collect();
    for s in 0..n {
        let (c, r) = plan.coords(s);
        let f = contact_force(curve[c], r);
        let gd = (c as f64 - *goal_col as f64).abs() * CELL;
        for act in 0..PLANAR_ACTIONS {
            let v = features.vector_mut(s, act);
            v[0] = 1.0;
            v[1] = if goal_mask[s] { 1.0 } else { 0.0 };
            v[2] = gd;
            v[3] = f;
            v[4] = if f < FORCE_MIN { 1.0 } else { 0.0 };
            v[5] = r as f64 * CELL;
        }
    }

    let start_states: Vec<usize> = starts.iter().map(|&(c, r)| plan.state(c, r)).collect();
    let p = 1.0 / start_states.len() as f64;
    let cmdp = TabularCmdp {
        n_states: n,
        n_actions: PLANAR_ACTIONS,
        transitions: plan.transitions(),
        features,
        start: start_states.iter().map(|&s| (s as u32, p)).collect(),
        gamma: super::DEFAULT_GAMMA,
        horizon: super::DEFAULT_HORIZON,
        terminal: vec![false; n],
    };

    let assembly = EnvAssembly {
        reward_names: vec!["goal_ind".to_string(), "goal_dist".to_string()],
        reward_weights: vec![1.0, -0.1],
        cost_names: vec!["force_low".to_string()],
        cost_weights: vec![1.0],
    };
    finish_instance(
        format!("wiping-s{seed}"),
        EnvFamily::Wiping,
        seed,
        grid,
        cmdp,
        goal_mask,
        assembly,
        geometry.clone(),
        &start_states,
    )
}

/// Surface row per column for amplitude `a`.
pub(super) fn surface_rows(a: f64, grid: (usize, usize)) -> Vec<usize> {
    let (w, h) = grid;
    (0..w)
        .map(|c| {
            let x = c as f64 / (w - 1) as f64;
            let y = a * math::sin(math::PI * x) + 0.75;
            (math::round(y / CELL) as isize).clamp(2, h as isize - 2) as usize
        })
        .collect()
}

/// Force at `row` under a surface at `surface_row`; zero out of contact.
pub(super) fn contact_force(surface_row: usize, row: usize) -> f64 {
    if row > surface_row {
        return 0.0;
    }
    let depth = (surface_row - row + 1) as f64;
    (FORCE_GAIN * depth).min(FORCE_CAP)
}

fn check_grid(grid: (usize, usize)) -> Result<()> {
    if grid.0 < 9 || grid.1 < 9 {
        return Err(CoreError::Config(format!(
            "wiping grid {}x{} too small (need at least 9x9)",
            grid.0, grid.1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn force_profile() {
        assert_relative_eq!(contact_force(10, 10), 0.4);
        assert_relative_eq!(contact_force(10, 9), 0.8);
        assert_relative_eq!(contact_force(10, 5), 1.5);
        assert_relative_eq!(contact_force(10, 11), 0.0);
    }

    #[test]
    fn violation_matches_force_threshold() {
        // Force 0.5 style shallow contact violates, 0.9 style contact does not.
        assert!(contact_force(10, 10) < FORCE_MIN);
        assert!(contact_force(10, 8) >= FORCE_MIN);
        let env = build(2, (31, 31), &EnvParams::default()).unwrap();
        let cost = env.expert_cost_table();
        let fi = env.cmdp.features.index_of("contact_force").unwrap();
        for s in 0..env.cmdp.n_states {
            let f = env.cmdp.features.vector(s, 0)[fi];
            assert_eq!(cost.get(s, 0), if f < FORCE_MIN { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn starts_touch_at_depth_two() {
        let env = build(4, (31, 31), &EnvParams::default()).unwrap();
        let fi = env.cmdp.features.index_of("contact_force").unwrap();
        for &(s, _) in &env.cmdp.start {
            assert_relative_eq!(env.cmdp.features.vector(s as usize, 0)[fi], 0.8);
        }
    }

    #[test]
    fn surface_stays_inside_row_range() {
        for seed in 0..10 {
            let env = build(seed, (31, 31), &EnvParams::default()).unwrap();
            let Geometry::Wiping { a, .. } = env.geometry else { unreachable!() };
            for &row in &surface_rows(a, (31, 31)) {
                assert!((9..=21).contains(&row), "a {a}: row {row}");
            }
        }
    }

    #[test]
    fn goal_column_in_right_margin() {
        for seed in 0..10 {
            let env = build(seed, (31, 31), &EnvParams::default()).unwrap();
            let Geometry::Wiping { goal_col, .. } = env.geometry else { unreachable!() };
            assert!((24..=30).contains(&goal_col));
        }
    }

    #[test]
    fn flat_params_rejected() {
        let params = EnvParams { b: Some(0.1), ..Default::default() };
        assert!(build(0, (31, 31), &params).is_err());
    }
}
