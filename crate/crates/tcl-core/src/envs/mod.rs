//! Grid environment families.
//!
//! Four tabular families share one recipe: deterministic grid kinematics, a
//! true task reward r_E that pays 1 inside the goal bin and -0.1 per unit of
//! distance outside it, and an indicator-valued true constraint cost c_E.
//! Every instance is reproducible from its geometry record, and every
//! instance is checked at build time to admit at least one zero-cost path
//! from each start to a goal.

mod reaching;
mod suite;
mod tray;
mod wall;
mod wiping;

pub use suite::{sample_eval_suite, SuiteMode};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cmdp::{FeatureTable, LinearReward, TabularCmdp, TaskSpace};
use crate::error::{CoreError, Result};
use crate::table::SaTable;

/// Physical size of one grid cell in normalized units. Distances, the wall
/// band [0.1, 0.15], and goal thresholds are all expressed in these units.
pub const CELL: f64 = 0.05;

/// Shared episode shape across families.
pub const DEFAULT_GAMMA: f64 = 0.95;
pub const DEFAULT_HORIZON: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvFamily {
    Reaching,
    Wall,
    Wiping,
    Tray,
}

impl EnvFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvFamily::Reaching => "reaching",
            EnvFamily::Wall => "wall",
            EnvFamily::Wiping => "wiping",
            EnvFamily::Tray => "tray",
        }
    }

    pub fn parse(s: &str) -> Option<EnvFamily> {
        match s {
            "reaching" => Some(EnvFamily::Reaching),
            "wall" => Some(EnvFamily::Wall),
            "wiping" => Some(EnvFamily::Wiping),
            "tray" => Some(EnvFamily::Tray),
            _ => None,
        }
    }

    pub fn default_grid(&self) -> (usize, usize) {
        match self {
            EnvFamily::Tray => (21, 13),
            _ => (31, 31),
        }
    }
}

/// Optional overrides from configs; families reject parameters they do not
/// use rather than silently ignoring them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnvParams {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub tilt_sensitivity: Option<f64>,
}

/// Everything needed to rebuild an instance exactly, independent of the seed
/// that originally sampled it. Suites perturb these records.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Reaching {
        /// Band across rows when true, across columns when false.
        horizontal: bool,
        band_lo: usize,
        band_w: usize,
        gap_lo: usize,
        gap_w: usize,
        goal: (usize, usize),
        starts: Vec<(usize, usize)>,
    },
    Wall {
        a: f64,
        b: f64,
        goal: (usize, usize),
        starts: Vec<(usize, usize)>,
    },
    Wiping {
        a: f64,
        goal_col: usize,
        starts: Vec<(usize, usize)>,
    },
    Tray {
        sensitivity: usize,
        /// (start position bin, goal position bin); tilt starts upright.
        configs: Vec<(usize, usize)>,
    },
}

impl Geometry {
    pub fn family(&self) -> EnvFamily {
        match self {
            Geometry::Reaching { .. } => EnvFamily::Reaching,
            Geometry::Wall { .. } => EnvFamily::Wall,
            Geometry::Wiping { .. } => EnvFamily::Wiping,
            Geometry::Tray { .. } => EnvFamily::Tray,
        }
    }
}

/// A fully built environment: dynamics plus ground truth and bookkeeping.
#[derive(Debug, Clone)]
pub struct EnvInstance {
    pub id: String,
    pub family: EnvFamily,
    pub seed: u64,
    pub grid: (usize, usize),
    pub cmdp: TabularCmdp,
    /// Goal predicate per state.
    pub goal: Vec<bool>,
    /// True task reward r_E (linear in the instance's features).
    pub expert_reward: LinearReward,
    /// True constraint cost c_E (indicator-valued).
    pub expert_cost: LinearReward,
    pub task_space: TaskSpace,
    /// Reward pre-scale applied when solving for expert or transfer policies;
    /// at temperature 1 this sets how deterministic those policies are.
    pub expert_sharpness: f64,
    /// Per-step cost band used when generating expert demonstrations.
    pub demo_xi: f64,
    pub geometry: Geometry,
}

impl EnvInstance {
    /// r_E as a dense table.
    pub fn expert_reward_table(&self) -> SaTable {
        self.expert_reward.evaluate(&self.cmdp.features).expect("expert reward uses own features")
    }

    /// c_E as a dense table (always nonnegative by construction).
    pub fn expert_cost_table(&self) -> SaTable {
        self.expert_cost.evaluate(&self.cmdp.features).expect("expert cost uses own features")
    }

    pub fn n_goal_states(&self) -> usize {
        self.goal.iter().filter(|&&g| g).count()
    }
}

/// Builds the family's training instance for a seed; `params` overrides the
/// sampled curve/object parameters where the family uses them.
pub fn build_env(
    family: EnvFamily,
    seed: u64,
    grid: Option<(usize, usize)>,
    params: &EnvParams,
) -> Result<EnvInstance> {
    let grid = grid.unwrap_or_else(|| family.default_grid());
    match family {
        EnvFamily::Reaching => reaching::build(seed, grid, params),
        EnvFamily::Wall => wall::build(seed, grid, params),
        EnvFamily::Wiping => wiping::build(seed, grid, params),
        EnvFamily::Tray => tray::build(seed, grid, params),
    }
}

/// Rebuilds an instance from an explicit geometry record.
pub fn build_from_geometry(seed: u64, grid: (usize, usize), geometry: &Geometry) -> Result<EnvInstance> {
    match geometry {
        Geometry::Reaching { .. } => reaching::build_from_geometry(seed, grid, geometry),
        Geometry::Wall { .. } => wall::build_from_geometry(seed, grid, geometry),
        Geometry::Wiping { .. } => wiping::build_from_geometry(seed, grid, geometry),
        Geometry::Tray { .. } => tray::build_from_geometry(seed, grid, geometry),
    }
}

/// Hazard-free reaching variant: same grid and goal layout, empty band.
/// Used for sanity fixtures where the residual should come out empty.
pub fn build_reaching_without_hazards(seed: u64, grid: Option<(usize, usize)>) -> Result<EnvInstance> {
    reaching::build_without_hazards(seed, grid.unwrap_or((31, 31)))
}

pub(crate) fn reject_param(family: EnvFamily, name: &str, value: Option<f64>) -> Result<()> {
    if value.is_some() {
        return Err(CoreError::Config(format!(
            "parameter {name} does not apply to the {} family",
            family.as_str()
        )));
    }
    Ok(())
}

/// Grid-world plumbing shared by the three planar families.
pub(crate) struct PlanarGrid {
    pub w: usize,
    pub h: usize,
}

impl PlanarGrid {
    pub fn state(&self, col: usize, row: usize) -> usize {
        row * self.w + col
    }

    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s % self.w, s / self.w)
    }

    pub fn n_states(&self) -> usize {
        self.w * self.h
    }

    /// Deterministic 5-action kinematics: up, down, left, right, stay, with
    /// border moves collapsing to stay.
    pub fn transitions(&self) -> Vec<Vec<(u32, f64)>> {
        let mut out = Vec::with_capacity(self.n_states() * 5);
        for s in 0..self.n_states() {
            let (c, r) = self.coords(s);
            for a in 0..5 {
                let (nc, nr) = match a {
                    0 => (c, (r + 1).min(self.h - 1)),
                    1 => (c, r.saturating_sub(1)),
                    2 => (c.saturating_sub(1), r),
                    3 => ((c + 1).min(self.w - 1), r),
                    _ => (c, r),
                };
                out.push(vec![(self.state(nc, nr) as u32, 1.0)]);
            }
        }
        out
    }

    pub fn euclid(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let dx = a.0 as f64 - b.0 as f64;
        let dy = a.1 as f64 - b.1 as f64;
        crate::math::sqrt(dx * dx + dy * dy) * CELL
    }
}

pub(crate) const PLANAR_ACTIONS: usize = 5;

/// True iff every `start` reaches, through zero-cost steps, a goal state the
/// agent can also park at for free. Episodes run to the horizon, so a goal
/// state only counts when some action there still costs nothing.
pub(crate) fn feasible_zero_cost(
    cmdp: &TabularCmdp,
    cost: &SaTable,
    starts: &[usize],
    goal: &[bool],
) -> bool {
    let parkable = |s: usize| (0..cmdp.n_actions).any(|a| cost.get(s, a) == 0.0);
    for &start in starts {
        let mut seen = vec![false; cmdp.n_states];
        let mut queue = alloc::collections::VecDeque::new();
        seen[start] = true;
        queue.push_back(start);
        let mut reached = false;
        while let Some(s) = queue.pop_front() {
            if goal[s] && parkable(s) {
                reached = true;
                break;
            }
            for a in 0..cmdp.n_actions {
                if cost.get(s, a) != 0.0 {
                    continue;
                }
                for &(sp, p) in cmdp.successors(s, a) {
                    let sp = sp as usize;
                    if p > 0.0 && !seen[sp] {
                        seen[sp] = true;
                        queue.push_back(sp);
                    }
                }
            }
        }
        if !reached {
            return false;
        }
    }
    true
}

/// Ground-truth weight bundle each family hands to `finish_instance`.
pub(crate) struct EnvAssembly {
    pub reward_names: Vec<String>,
    pub reward_weights: Vec<f64>,
    pub cost_names: Vec<String>,
    pub cost_weights: Vec<f64>,
}

pub(crate) fn task_space_for(features: &FeatureTable) -> TaskSpace {
    let gi = features.index_of("goal_ind").expect("goal_ind feature");
    let gd = features.index_of("goal_dist").expect("goal_dist feature");
    TaskSpace { basis: vec![gi, gd], nonneg: vec![gi], sign_constraint: true }
}

pub(crate) fn finish_instance(
    id: String,
    family: EnvFamily,
    seed: u64,
    grid: (usize, usize),
    cmdp: TabularCmdp,
    goal: Vec<bool>,
    assembly: EnvAssembly,
    geometry: Geometry,
    starts: &[usize],
) -> Result<EnvInstance> {
    cmdp.validate()?;
    let task_space = task_space_for(&cmdp.features);
    task_space.validate(cmdp.features.dim())?;
    let expert_reward = LinearReward::new(
        crate::cmdp::RewardKind::Task,
        &id,
        &assembly.reward_names,
        assembly.reward_weights,
    );
    let expert_cost = LinearReward::new(
        crate::cmdp::RewardKind::Cost,
        &id,
        &assembly.cost_names,
        assembly.cost_weights,
    );
    let instance = EnvInstance {
        id,
        family,
        seed,
        grid,
        cmdp,
        goal,
        expert_reward,
        expert_cost,
        task_space,
        expert_sharpness: 20.0,
        demo_xi: 0.01,
        geometry,
    };
    let cost = instance.expert_cost_table();
    if !feasible_zero_cost(&instance.cmdp, &cost, starts, &instance.goal) {
        return Err(CoreError::Infeasible(format!(
            "{}: no zero-cost path from every start to a goal",
            instance.id
        )));
    }
    Ok(instance)
}
