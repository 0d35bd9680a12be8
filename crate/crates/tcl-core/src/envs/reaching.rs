//! Point-mass reaching on an open grid with a hazard band.
//!
//! The band spans the grid across one axis with a single safe gap; starts sit
//! on the near side, the goal on the far side, so demonstrations must funnel
//! through the gap. Cost is the hazard-cell indicator.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cmdp::{FeatureTable, TabularCmdp};
use crate::error::{CoreError, Result};
use crate::rng::substream;

use super::{
    finish_instance, reject_param, EnvAssembly, EnvFamily, EnvInstance, EnvParams, Geometry,
    PlanarGrid, PLANAR_ACTIONS,
};

const MAX_SAMPLE_ATTEMPTS: usize = 100;
const COVERAGE_LO: f64 = 0.05;
const COVERAGE_HI: f64 = 0.40;

pub(super) fn build(seed: u64, grid: (usize, usize), params: &EnvParams) -> Result<EnvInstance> {
    reject_param(EnvFamily::Reaching, "a", params.a)?;
    reject_param(EnvFamily::Reaching, "b", params.b)?;
    reject_param(EnvFamily::Reaching, "tilt_sensitivity", params.tilt_sensitivity)?;
    check_grid(grid)?;
    let mut rng = substream(seed, "env/reaching/geometry");
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let geometry = sample_geometry(&mut rng, grid);
        if coverage(&geometry, grid) < COVERAGE_LO || coverage(&geometry, grid) > COVERAGE_HI {
            continue;
        }
        match build_from_geometry(seed, grid, &geometry) {
            Ok(instance) => return Ok(instance),
            Err(CoreError::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(CoreError::Infeasible(format!(
        "reaching seed {seed}: no feasible hazard layout in {MAX_SAMPLE_ATTEMPTS} attempts"
    )))
}

/// Same sampled layout but no hazard band; cost is identically zero.
pub(super) fn build_without_hazards(seed: u64, grid: (usize, usize)) -> Result<EnvInstance> {
    check_grid(grid)?;
    let mut rng = substream(seed, "env/reaching/geometry");
    let mut geometry = sample_geometry(&mut rng, grid);
    if let Geometry::Reaching { band_w, .. } = &mut geometry {
        *band_w = 0;
    }
    build_from_geometry(seed, grid, &geometry)
}

pub(super) fn build_from_geometry(
    seed: u64,
    grid: (usize, usize),
    geometry: &Geometry,
) -> Result<EnvInstance> {
    let Geometry::Reaching { horizontal, band_lo, band_w, gap_lo, gap_w, goal, starts } = geometry
    else {
        return Err(CoreError::Config("geometry is not a reaching layout".into()));
    };
    check_grid(grid)?;
    let (w, h) = grid;
    let plan = PlanarGrid { w, h };
    let cross = if *horizontal { w } else { h };
    let along = if *horizontal { h } else { w };
    if band_lo + band_w > along || gap_lo + gap_w > cross {
        return Err(CoreError::Config("hazard band extends past the grid".into()));
    }
    if goal.0 >= w || goal.1 >= h || starts.iter().any(|&(c, r)| c >= w || r >= h) {
        return Err(CoreError::Config("goal or start outside the grid".into()));
    }
    if starts.is_empty() {
        return Err(CoreError::Config("reaching layout has no start cells".into()));
    }

    let n = plan.n_states();
    let hazard: Vec<bool> = (0..n)
        .map(|s| {
            let (c, r) = plan.coords(s);
            let (band_axis, gap_axis) = if *horizontal { (r, c) } else { (c, r) };
            let in_band = band_axis >= *band_lo && band_axis < band_lo + band_w;
            let in_gap = gap_axis >= *gap_lo && gap_axis < gap_lo + gap_w;
            in_band && !in_gap
        })
        .collect();
    if hazard[plan.state(goal.0, goal.1)] {
        return Err(CoreError::Infeasible("goal cell lies inside the hazard band".into()));
    }

    let names: Vec<String> =
        ["bias", "goal_ind", "goal_dist", "hazard"].iter().map(|s| s.to_string()).collect();
    let mut features = FeatureTable::new(names, n, PLANAR_ACTIONS);
    let goal_mask: Vec<bool> = (0..n).map(|s| plan.coords(s) == *goal).collect();
    for s in 0..n {
        let cell = plan.coords(s);
        let dist = if goal_mask[s] { 0.0 } else { plan.euclid(cell, *goal) };
        for a in 0..PLANAR_ACTIONS {
            let v = features.vector_mut(s, a);
            v[0] = 1.0;
            v[1] = if goal_mask[s] { 1.0 } else { 0.0 };
            v[2] = dist;
            v[3] = if hazard[s] { 1.0 } else { 0.0 };
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
        cost_names: vec!["hazard".to_string()],
        cost_weights: vec![1.0],
    };
    finish_instance(
        format!("reaching-s{seed}"),
        EnvFamily::Reaching,
        seed,
        grid,
        cmdp,
        goal_mask,
        assembly,
        geometry.clone(),
        &start_states,
    )
}

fn check_grid(grid: (usize, usize)) -> Result<()> {
    if grid.0 < 9 || grid.1 < 9 {
        return Err(CoreError::Config(format!(
            "reaching grid {}x{} too small (need at least 9x9)",
            grid.0, grid.1
        )));
    }
    Ok(())
}

fn coverage(geometry: &Geometry, grid: (usize, usize)) -> f64 {
    let Geometry::Reaching { horizontal, band_w, gap_w, .. } = geometry else { return 0.0 };
    let (w, h) = grid;
    let cross = if *horizontal { w } else { h };
    (band_w * (cross - gap_w)) as f64 / (w * h) as f64
}

fn sample_geometry<R: Rng>(rng: &mut R, grid: (usize, usize)) -> Geometry {
    let (w, h) = grid;
    let horizontal = rng.gen_bool(0.5);
    let (cross, along) = if horizontal { (w, h) } else { (h, w) };
    // Keep two clear ranks below the band for starts and three above for
    // the goal; at the 9x9 minimum this still leaves room for any width.
    let band_w = rng.gen_range(2..=(along / 3).max(2));
    let band_lo = rng.gen_range(2..=along - band_w - 3);
    let gap_w = rng.gen_range(3..=6.min(cross));
    let gap_lo = rng.gen_range(0..=cross - gap_w);

    let far_lo = along - 3;
    let near_hi = 1;
    let cell = |rank: usize, off: usize| if horizontal { (off, rank) } else { (rank, off) };
    let goal = cell(rng.gen_range(far_lo..along), rng.gen_range(0..cross));
    let mut starts = Vec::new();
    while starts.len() < 4 {
        let s = cell(rng.gen_range(0..=near_hi), rng.gen_range(0..cross));
        if !starts.contains(&s) {
            starts.push(s);
        }
    }
    Geometry::Reaching { horizontal, band_lo, band_w, gap_lo, gap_w, goal, starts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::feasible_zero_cost;
    use approx::assert_relative_eq;

    #[test]
    fn builds_reproducibly() {
        let a = build(7, (31, 31), &EnvParams::default()).unwrap();
        let b = build(7, (31, 31), &EnvParams::default()).unwrap();
        assert_eq!(a.geometry, b.geometry);
        assert_eq!(a.cmdp.n_states, 961);
        assert_eq!(a.cmdp.n_actions, 5);
        assert!(a.cmdp.terminal.iter().all(|&t| !t));
    }

    #[test]
    fn hazard_coverage_within_bounds() {
        for seed in 0..20 {
            let env = build(seed, (31, 31), &EnvParams::default()).unwrap();
            let cost = env.expert_cost_table();
            let cells: f64 = (0..env.cmdp.n_states).map(|s| cost.get(s, 0)).sum();
            let frac = cells / env.cmdp.n_states as f64;
            assert!(frac >= COVERAGE_LO && frac <= COVERAGE_HI, "seed {seed}: coverage {frac}");
        }
    }

    #[test]
    fn reward_matches_distance_formula() {
        let env = build(3, (31, 31), &EnvParams::default()).unwrap();
        let Geometry::Reaching { goal, .. } = env.geometry else { unreachable!() };
        let plan = PlanarGrid { w: 31, h: 31 };
        let r = env.expert_reward_table();
        let gs = plan.state(goal.0, goal.1);
        assert_relative_eq!(r.get(gs, 0), 1.0);
        // A cell ten columns from the goal and in the same row pays -0.1 * 0.5.
        let (gc, gr) = goal;
        if gc >= 10 {
            let s = plan.state(gc - 10, gr);
            assert_relative_eq!(r.get(s, 2), -0.05, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_cost_path_exists_from_every_start() {
        let env = build(11, (31, 31), &EnvParams::default()).unwrap();
        let cost = env.expert_cost_table();
        let starts: Vec<usize> = env.cmdp.start.iter().map(|&(s, _)| s as usize).collect();
        assert!(feasible_zero_cost(&env.cmdp, &cost, &starts, &env.goal));
    }

    #[test]
    fn hazard_free_variant_has_zero_cost_everywhere() {
        let env = build_without_hazards(7, (31, 31)).unwrap();
        let cost = env.expert_cost_table();
        assert!(cost.data().iter().all(|&c| c == 0.0));
        assert_eq!(env.cmdp.features.index_of("hazard"), Some(3));
    }

    #[test]
    fn rejects_curve_params() {
        let params = EnvParams { a: Some(0.2), ..Default::default() };
        assert!(build(0, (31, 31), &params).is_err());
    }
}
