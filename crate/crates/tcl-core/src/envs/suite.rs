//! Transfer evaluation suites: batches of target instances derived from a
//! trained instance, either by nudging its geometry or by redrawing it.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::rng::substream;

use super::{build_env, build_from_geometry, wall, wiping, EnvInstance, EnvParams, Geometry};

const MAX_ATTEMPTS_PER_INSTANCE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteMode {
    /// Small geometry nudges around the source instance.
    DemoLike,
    /// Fresh draws from the family distribution.
    Random,
}

impl SuiteMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteMode::DemoLike => "demo_like",
            SuiteMode::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<SuiteMode> {
        match s {
            "demo_like" => Some(SuiteMode::DemoLike),
            "random" => Some(SuiteMode::Random),
            _ => None,
        }
    }
}

/// Draws `n` feasible target instances for transfer evaluation. Instances are
/// deterministic in (`base`, `mode`, `n`, `seed`).
pub fn sample_eval_suite(
    base: &EnvInstance,
    mode: SuiteMode,
    n: usize,
    seed: u64,
) -> Result<Vec<EnvInstance>> {
    let mut rng = substream(seed, &format!("suite/{}/{}", base.id, mode.as_str()));
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut built = None;
        for _ in 0..MAX_ATTEMPTS_PER_INSTANCE {
            let inst_seed = rng.gen::<u32>() as u64;
            let attempt = match mode {
                SuiteMode::Random => {
                    build_env(base.family, inst_seed, Some(base.grid), &EnvParams::default())
                }
                SuiteMode::DemoLike => perturb(base, inst_seed, &mut rng),
            };
            match attempt {
                Ok(env) => {
                    built = Some(env);
                    break;
                }
                Err(CoreError::Infeasible(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        match built {
            Some(env) => out.push(env),
            None => {
                return Err(CoreError::Infeasible(format!(
                    "suite for {}: instance {i} found no feasible {} target in {} attempts",
                    base.id,
                    mode.as_str(),
                    MAX_ATTEMPTS_PER_INSTANCE
                )))
            }
        }
    }
    Ok(out)
}

fn perturb<R: Rng>(base: &EnvInstance, inst_seed: u64, rng: &mut R) -> Result<EnvInstance> {
    let grid = base.grid;
    match &base.geometry {
        Geometry::Reaching { horizontal, band_lo, band_w, gap_lo, gap_w, goal, starts } => {
            let (w, h) = grid;
            let (cross, along) = if *horizontal { (w, h) } else { (h, w) };
            let band_lo = shift(rng, *band_lo, 4, along.saturating_sub(band_w + 4));
            let gap_lo = shift(rng, *gap_lo, 0, cross - gap_w);
            let move_cell = |rng: &mut R, cell: (usize, usize), rank_lo: usize, rank_hi: usize| {
                let (c, r) = cell;
                let (rank, off) = if *horizontal { (r, c) } else { (c, r) };
                let rank = shift(rng, rank, rank_lo, rank_hi);
                let off = shift(rng, off, 0, cross - 1);
                if *horizontal {
                    (off, rank)
                } else {
                    (rank, off)
                }
            };
            let goal = move_cell(rng, *goal, along - 3, along - 1);
            let mut moved = Vec::with_capacity(starts.len());
            for &s in starts {
                let p = move_cell(rng, s, 0, 1);
                if moved.contains(&p) {
                    return Err(CoreError::Infeasible("perturbed starts collide".into()));
                }
                moved.push(p);
            }
            let geometry = Geometry::Reaching {
                horizontal: *horizontal,
                band_lo,
                band_w: *band_w,
                gap_lo,
                gap_w: *gap_w,
                goal,
                starts: moved,
            };
            build_from_geometry(inst_seed, grid, &geometry)
        }
        Geometry::Wall { a, b, .. } => {
            let a = jitter(rng, *a, 0.05, 0.1, 0.3);
            let b = jitter(rng, *b, 0.05, 0.1, 0.3);
            wall::assemble(inst_seed, grid, a, b, None, None)
        }
        Geometry::Wiping { a, goal_col, .. } => {
            let a = jitter(rng, *a, 0.05, -0.3, 0.3);
            let goal_col = shift(rng, *goal_col, grid.0 - 7, grid.0 - 1);
            let curve = wiping::surface_rows(a, grid);
            let starts = (0..3).map(|c| (c, curve[c] - 1)).collect();
            build_from_geometry(inst_seed, grid, &Geometry::Wiping { a, goal_col, starts })
        }
        Geometry::Tray { sensitivity, configs } => {
            let center = grid.0 / 2;
            let mut moved: Vec<(usize, usize)> = Vec::with_capacity(configs.len());
            for &(s, g) in configs {
                let ns = shift(rng, s, 0, center - 1);
                let ng = shift(rng, g, center + 1, grid.0 - 1);
                let pair = if ng - ns >= super::tray::MIN_SEPARATION { (ns, ng) } else { (s, g) };
                if moved.contains(&pair) {
                    return Err(CoreError::Infeasible("perturbed tray pairs collide".into()));
                }
                moved.push(pair);
            }
            build_from_geometry(
                inst_seed,
                grid,
                &Geometry::Tray { sensitivity: *sensitivity, configs: moved },
            )
        }
    }
}

fn shift<R: Rng>(rng: &mut R, v: usize, lo: usize, hi: usize) -> usize {
    let d: i64 = rng.gen_range(-1..=1);
    (v as i64 + d).clamp(lo as i64, hi as i64) as usize
}

fn jitter<R: Rng>(rng: &mut R, v: f64, width: f64, lo: f64, hi: f64) -> f64 {
    (v + rng.gen_range(-width..width)).clamp(lo, hi)
}
