//! Weak and strong scaling efficiency arithmetic.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Points-per-worker agreement required to pair runs for weak scaling.
const WEAK_MATCH_REL: f64 = 0.15;

/// `100 · t_base / t_scaled`, for runs with equal work per worker.
pub fn weak_efficiency(t_base: f64, t_scaled: f64) -> Result<f64> {
    if t_scaled == 0.0 {
        return Err(Error::ZeroDenominator("scaled run time"));
    }
    Ok(100.0 * t_base / t_scaled)
}

/// `100 · (t_base · w_base) / (t_scaled · w_scaled)`, for one problem size
/// spread over more workers.
pub fn strong_efficiency(t_base: f64, workers_base: usize, t_scaled: f64, workers_scaled: usize) -> Result<f64> {
    if t_scaled == 0.0 {
        return Err(Error::ZeroDenominator("scaled run time"));
    }
    if workers_scaled == 0 {
        return Err(Error::ZeroDenominator("scaled worker count"));
    }
    Ok(100.0 * (t_base * workers_base as f64) / (t_scaled * workers_scaled as f64))
}

/// Wall time of a fixed step budget for one (resolution, workers) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunTime {
    pub resolution_m: f64,
    pub workers: usize,
    pub grid_points: u64,
    pub seconds: f64,
}

impl RunTime {
    pub fn points_per_worker(&self) -> f64 {
        self.grid_points as f64 / self.workers as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyCell {
    pub run: RunTime,
    /// Percent relative to the weak baseline.
    pub weak: f64,
    /// True when no coarser run with matching points per worker exists.
    pub weak_baseline: bool,
    pub strong: f64,
    /// True for the fewest-workers run at this resolution.
    pub strong_baseline: bool,
}

/// Efficiencies for every measured (resolution, workers) pair.
///
/// Strong baselines are the fewest-workers run at each resolution. The weak
/// baseline of a run is the coarsest-resolution run whose points per worker
/// match it within 15 %, so each diagonal of a resolution × workers table is
/// anchored at its coarsest entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyTable {
    pub cells: Vec<EfficiencyCell>,
}

impl EfficiencyTable {
    pub fn from_runs(runs: &[RunTime]) -> Result<Self> {
        let mut cells = Vec::with_capacity(runs.len());
        for run in runs {
            if !(run.seconds > 0.0) || run.workers == 0 {
                return Err(Error::InvalidParameter {
                    name: "run time",
                    value: run.seconds,
                });
            }
            let strong_base = runs
                .iter()
                .filter(|r| r.resolution_m == run.resolution_m)
                .min_by_key(|r| r.workers)
                .expect("run itself matches");
            let ppw = run.points_per_worker();
            let weak_base = runs
                .iter()
                .filter(|r| (r.points_per_worker() - ppw).abs() <= WEAK_MATCH_REL * ppw)
                .max_by(|a, b| {
                    a.resolution_m
                        .total_cmp(&b.resolution_m)
                        .then(b.workers.cmp(&a.workers))
                })
                .expect("run itself matches");
            let strong_baseline = strong_base.workers == run.workers;
            let weak_baseline = weak_base.resolution_m == run.resolution_m && weak_base.workers == run.workers;
            cells.push(EfficiencyCell {
                run: *run,
                weak: weak_efficiency(weak_base.seconds, run.seconds)?,
                weak_baseline,
                strong: strong_efficiency(strong_base.seconds, strong_base.workers, run.seconds, run.workers)?,
                strong_baseline,
            });
        }
        Ok(Self { cells })
    }

    pub fn get(&self, resolution_m: f64, workers: usize) -> Option<&EfficiencyCell> {
        self.cells
            .iter()
            .find(|c| c.run.resolution_m == resolution_m && c.run.workers == workers)
    }

    /// Distinct resolutions, coarsest first.
    pub fn resolutions(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.cells.iter().map(|c| c.run.resolution_m).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup();
        v
    }

    /// Distinct worker counts, ascending.
    pub fn worker_counts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.cells.iter().map(|c| c.run.workers).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}
