//! Wall following: track a curved wall from left to right while keeping the
//! distance to it inside the band [0.1, 0.15].
//!
//! The wall is a rasterized curve spanning every column. Cells whose nearest
//! wall cell lies inside the band form a corridor on each side; starts sit in
//! the upper corridor's leftmost column, goals in its rightmost, so the only
//! zero-cost routes hug the wall. Note the raw `pos_y` feature: corridor
//! height varies with the curve, which is exactly what box-style constraint
//! fits latch onto and curve perturbations then expose.

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

const MAX_SAMPLE_ATTEMPTS: usize = 100;
pub(super) const BAND_LO: f64 = 0.1;
pub(super) const BAND_HI: f64 = 0.15;

pub(super) fn build(seed: u64, grid: (usize, usize), params: &EnvParams) -> Result<EnvInstance> {
    reject_param(EnvFamily::Wall, "tilt_sensitivity", params.tilt_sensitivity)?;
    check_grid(grid)?;
    let mut rng = substream(seed, "env/wall/geometry");
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let a = params.a.unwrap_or_else(|| rng.gen_range(0.1..0.3));
        let b = params.b.unwrap_or_else(|| rng.gen_range(0.1..0.3));
        match assemble(seed, grid, a, b, None, None) {
            Ok(instance) => return Ok(instance),
            Err(CoreError::Infeasible(_)) if params.a.is_none() || params.b.is_none() => continue,
            Err(e) => return Err(e),
        }
    }
    Err(CoreError::Infeasible(format!(
        "wall seed {seed}: no connected corridor in {MAX_SAMPLE_ATTEMPTS} attempts"
    )))
}

pub(super) fn build_from_geometry(
    seed: u64,
    grid: (usize, usize),
    geometry: &Geometry,
) -> Result<EnvInstance> {
    let Geometry::Wall { a, b, goal, starts } = geometry else {
        return Err(CoreError::Config("geometry is not a wall layout".into()));
    };
    check_grid(grid)?;
    assemble(seed, grid, *a, *b, Some(*goal), Some(starts.clone()))
}

/// Wall height in world units at curve parameter x in [0, 2].
pub(super) fn wall_curve(a: f64, b: f64, x: f64) -> f64 {
    let s = math::sin(math::PI * x);
    a * s * s + b * math::cos(math::PI * x / 2.0) + 0.4
}

/// True iff a wall-distance value satisfies the band constraint.
pub(super) fn distance_in_band(d: f64) -> bool {
    (BAND_LO..=BAND_HI).contains(&d)
}

pub(super) fn assemble(
    seed: u64,
    grid: (usize, usize),
    a: f64,
    b: f64,
    fixed_goal: Option<(usize, usize)>,
    fixed_starts: Option<Vec<(usize, usize)>>,
) -> Result<EnvInstance> {
    let (w, h) = grid;
    let plan = PlanarGrid { w, h };
    let n = plan.n_states();

    // Rasterize the curve with vertical fill so the wall is 4-connected and
    // spans every column.
    let mut wall = vec![false; n];
    let mut col_rows: Vec<(usize, usize)> = Vec::with_capacity(w);
    let mut prev_row: Option<usize> = None;
    for c in 0..w {
        let x = 2.0 * c as f64 / (w - 1) as f64;
        let y = wall_curve(a, b, x);
        let row = (math::round(y / CELL) as isize).clamp(0, h as isize - 1) as usize;
        let (lo, hi) = match prev_row {
            Some(p) if p < row => (p + 1, row),
            Some(p) if p > row => (row, p - 1),
            _ => (row, row),
        };
        let lo = lo.min(row);
        let hi = hi.max(row);
        for r in lo..=hi {
            wall[plan.state(c, r)] = true;
        }
        col_rows.push((lo, hi));
        prev_row = Some(row);
    }

    let wall_cells: Vec<(usize, usize)> =
        (0..n).filter(|&s| wall[s]).map(|s| plan.coords(s)).collect();
    let dist: Vec<f64> = (0..n)
        .map(|s| {
            let cell = plan.coords(s);
            wall_cells.iter().map(|&wc| plan.euclid(cell, wc)).fold(f64::INFINITY, f64::min)
        })
        .collect();

    // Corridor membership and the upper-side split used for starts and goals.
    let corridor: Vec<bool> = dist.iter().map(|&d| distance_in_band(d)).collect();
    let upper = |c: usize, r: usize| r > col_rows[c].1;
    let side_cells = |c: usize| -> Vec<(usize, usize)> {
        (0..h).filter(|&r| corridor[plan.state(c, r)] && upper(c, r)).map(|r| (c, r)).collect()
    };

    let starts = match fixed_starts {
        Some(s) => s,
        None => side_cells(0),
    };
    let goal = match fixed_goal {
        Some(g) => g,
        None => {
            let candidates = side_cells(w - 1);
            match candidates.first() {
                Some(&g) => g,
                None => {
                    return Err(CoreError::Infeasible(
                        "wall layout has no upper corridor cell in the last column".into(),
                    ))
                }
            }
        }
    };
    if starts.is_empty() {
        return Err(CoreError::Infeasible(
            "wall layout has no upper corridor cell in the first column".into(),
        ));
    }
    if goal.0 >= w || goal.1 >= h || starts.iter().any(|&(c, r)| c >= w || r >= h) {
        return Err(CoreError::Config("goal or start outside the grid".into()));
    }

    let names: Vec<String> = ["bias", "goal_ind", "goal_dist", "wall_dist", "wall_band_violation", "pos_y"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut features = FeatureTable::new(names, n, PLANAR_ACTIONS);
    let goal_mask: Vec<bool> = (0..n).map(|s| plan.coords(s) == goal).collect();
    for s in 0..n {
        let cell = plan.coords(s);
        let gd = if goal_mask[s] { 0.0 } else { plan.euclid(cell, goal) };
        for act in 0..PLANAR_ACTIONS {
            let v = features.vector_mut(s, act);
            v[0] = 1.0;
            v[1] = if goal_mask[s] { 1.0 } else { 0.0 };
            v[2] = gd;
            v[3] = dist[s];
            v[4] = if corridor[s] { 0.0 } else { 1.0 };
            v[5] = cell.1 as f64 * CELL;
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
        cost_names: vec!["wall_band_violation".to_string()],
        cost_weights: vec![1.0],
    };
    finish_instance(
        format!("wall-s{seed}"),
        EnvFamily::Wall,
        seed,
        grid,
        cmdp,
        goal_mask,
        assembly,
        Geometry::Wall { a, b, goal, starts },
        &start_states,
    )
}

fn check_grid(grid: (usize, usize)) -> Result<()> {
    if grid.0 < 15 || grid.1 < 15 {
        return Err(CoreError::Config(format!(
            "wall grid {}x{} too small (need at least 15x15)",
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
    fn band_membership_fixed_points() {
        assert!(distance_in_band(0.12));
        assert!(distance_in_band(0.1));
        assert!(distance_in_band(0.15));
        assert!(!distance_in_band(0.05));
        assert!(!distance_in_band(0.16));
        assert!(!distance_in_band(0.0));
    }

    #[test]
    fn curve_endpoints() {
        assert_relative_eq!(wall_curve(0.2, 0.25, 0.0), 0.65, epsilon = 1e-12);
        assert_relative_eq!(wall_curve(0.2, 0.25, 2.0), 0.15, epsilon = 1e-9);
    }

    #[test]
    fn corridor_cells_are_the_zero_cost_set() {
        let env = build(5, (31, 31), &EnvParams::default()).unwrap();
        let cost = env.expert_cost_table();
        let wd = env.cmdp.features.index_of("wall_dist").unwrap();
        for s in 0..env.cmdp.n_states {
            let d = env.cmdp.features.vector(s, 0)[wd];
            let expect = if distance_in_band(d) { 0.0 } else { 1.0 };
            assert_eq!(cost.get(s, 0), expect, "state {s} distance {d}");
        }
    }

    #[test]
    fn starts_and_goal_sit_in_band() {
        for seed in [0, 1, 2, 9] {
            let env = build(seed, (31, 31), &EnvParams::default()).unwrap();
            let cost = env.expert_cost_table();
            for &(s, _) in &env.cmdp.start {
                assert_eq!(cost.get(s as usize, 0), 0.0);
            }
            let goal_state = env.goal.iter().position(|&g| g).unwrap();
            assert_eq!(cost.get(goal_state, 0), 0.0);
            let (w, _) = env.grid;
            assert_eq!(goal_state % w, w - 1, "goal in last column");
        }
    }

    #[test]
    fn rebuild_from_geometry_is_identical() {
        let env = build(5, (31, 31), &EnvParams::default()).unwrap();
        let again = build_from_geometry(5, (31, 31), &env.geometry).unwrap();
        assert_eq!(env.cmdp.start, again.cmdp.start);
        assert_eq!(env.goal, again.goal);
        let (a, b) = (env.expert_cost_table(), again.expert_cost_table());
        assert_eq!(a.data(), b.data());
    }
}
