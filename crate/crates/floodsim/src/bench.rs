//! Scaling benchmark: fixed step budgets over a (resolution, workers,
//! layout) matrix, run through the same pool and kernel as a simulation.

use std::time::Instant;

use floodsim_core::boundary::{CrossSection, DischargeSeries, InflowSpec, OutflowSpec};
use floodsim_core::schedule::Schedule;
use floodsim_core::topology::{enumerate_layouts, Layout};
use floodsim_core::{Raster, Side};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::driver::Scenario;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub resolution_m: f64,
    pub grid_points: u64,
    pub workers: usize,
    pub cx: usize,
    pub cy: usize,
    pub steps_per_s: f64,
    /// Mean over workers of the exchange share of step time.
    pub exchange_pct: f64,
    #[serde(rename = "t_1M_steps_s")]
    pub t_1m_steps_s: f64,
}

impl BenchRecord {
    pub fn points_per_worker(&self) -> f64 {
        self.grid_points as f64 / self.workers as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutSet {
    All,
    /// Only `1 x N` and `N x 1`.
    Strips,
}

impl std::str::FromStr for LayoutSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(LayoutSet::All),
            "strips" => Ok(LayoutSet::Strips),
            other => Err(format!("unknown layout set `{other}` (all | strips)")),
        }
    }
}

impl LayoutSet {
    pub fn layouts(self, workers: usize) -> Vec<Layout> {
        enumerate_layouts(workers)
            .into_iter()
            .filter(|l| self == LayoutSet::All || l.is_strip())
            .collect()
    }
}

#[derive(Clone, Debug)]
pub enum Terrain {
    /// Seeded synthetic valley of the given size in metres.
    Valley { width_m: f64, height_m: f64, seed: u64 },
    /// A DEM at its native resolution; coarser resolutions are block means.
    Dem(Raster),
}

#[derive(Clone, Debug)]
pub struct BenchPlan {
    pub resolutions: Vec<f64>,
    pub workers: Vec<usize>,
    pub steps: u64,
    pub warmup: u64,
    pub layouts: LayoutSet,
    pub terrain: Terrain,
    pub dt: f64,
}

impl Default for BenchPlan {
    fn default() -> Self {
        Self {
            resolutions: vec![8.0],
            workers: vec![1],
            steps: 2000,
            warmup: 50,
            layouts: LayoutSet::All,
            terrain: Terrain::Valley {
                width_m: 4096.0,
                height_m: 2048.0,
                seed: 7,
            },
            dt: 0.1,
        }
    }
}

/// Valley sloping gently west to east with a V cross-section, rough bed and
/// half a metre of water everywhere.
pub fn valley(width_m: f64, height_m: f64, resolution: f64, seed: u64) -> Result<(Raster, Vec<f32>)> {
    let cols = (width_m / resolution).ceil() as usize;
    let rows = (height_m / resolution).ceil() as usize;
    let mut rng = SmallRng::seed_from_u64(seed);
    let mid = rows as f64 / 2.0;
    let dem = Raster::from_fn(rows, cols, resolution, |r, c| {
        let along = 1e-3 * (cols - c) as f64 * resolution;
        let across = 1e-2 * (r as f64 - mid).abs() * resolution;
        (along + across) as f32 + rng.gen_range(0.0f32..0.05)
    })?;
    let h0 = vec![0.5; dem.len()];
    Ok((dem, h0))
}

fn scenario(plan: &BenchPlan, resolution: f64) -> Result<Scenario> {
    let (dem, h0) = match &plan.terrain {
        Terrain::Valley { width_m, height_m, seed } => valley(*width_m, *height_m, resolution, *seed)?,
        Terrain::Dem(raw) => {
            let ratio = resolution / raw.cell_size;
            let factor = ratio.round();
            if factor < 1.0 || (ratio - factor).abs() > 1e-6 * ratio {
                return Err(Error::Config(format!(
                    "resolution {resolution} m is not a whole multiple of the DEM cell size {} m",
                    raw.cell_size
                )));
            }
            let dem = raw.downsample_mean(factor as usize)?;
            let h0 = vec![0.5; dem.len()];
            (dem, h0)
        }
    };
    let mut sc = Scenario::new(dem, (plan.warmup + plan.steps) as f64 * plan.dt);
    sc.dt = plan.dt;
    sc.initial_depth = Some(h0);
    sc.inflow = Some(InflowSpec {
        section: CrossSection::new(Side::West, 0.4, 0.6)?,
        discharge: DischargeSeries::constant(50.0)?,
        slope: 1e-3,
    });
    sc.outflow = Some(OutflowSpec {
        section: CrossSection::full(Side::East),
        slope: 1e-3,
    });
    Ok(sc)
}

/// Times one layout: `warmup` untimed steps, then `steps` timed ones.
pub fn bench_layout(plan: &BenchPlan, resolution: f64, layout: Layout) -> Result<BenchRecord> {
    let mut sc = scenario(plan, resolution)?;
    sc.cx = layout.cx;
    sc.cy = layout.cy;
    let total = plan.warmup + plan.steps;
    let schedule = Schedule::new(0.0, total as f64 * plan.dt, plan.dt)?;
    let (mut pool, _) = sc.build_pool()?;
    pool.advance(&schedule, plan.warmup)?;
    let t0 = Instant::now();
    let adv = pool.advance(&schedule, total)?;
    let secs = t0.elapsed().as_secs_f64().max(1e-9);
    let steps_per_s = plan.steps as f64 / secs;
    Ok(BenchRecord {
        resolution_m: resolution,
        grid_points: sc.dem.len() as u64,
        workers: layout.workers(),
        cx: layout.cx,
        cy: layout.cy,
        steps_per_s,
        exchange_pct: adv.mean_exchange_pct(),
        t_1m_steps_s: 1e6 / steps_per_s,
    })
}

/// Runs the whole matrix one configuration at a time, reporting each record
/// as it completes.
pub fn run_bench(plan: &BenchPlan, mut on_record: impl FnMut(&BenchRecord)) -> Result<Vec<BenchRecord>> {
    if plan.steps == 0 {
        return Err(Error::Config("bench needs at least one timed step".into()));
    }
    let mut out = Vec::new();
    for &res in &plan.resolutions {
        for &w in &plan.workers {
            if w == 0 {
                return Err(Error::Config("worker counts must be ≥ 1".into()));
            }
            for layout in plan.layouts.layouts(w) {
                let rec = bench_layout(plan, res, layout)?;
                on_record(&rec);
                out.push(rec);
            }
        }
    }
    Ok(out)
}
