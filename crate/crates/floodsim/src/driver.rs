//! Whole-run orchestration: grid preparation, the time loop over the worker
//! pool, snapshots, flood-extent masks and the mass ledger.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use floodsim_core::boundary::{InflowSpec, OutflowSpec};
use floodsim_core::ledger::{MassLedger, StepFlows};
use floodsim_core::schedule::Schedule;
use floodsim_core::subdomain::{decompose, GlobalFields, GlobalGrid};
use floodsim_core::{PadRecord, PhysicsParams, Raster, Topology, GRAVITY};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::io::{load_raster, write_raster, RasterFormat};
use crate::pool::{Pool, WorkerTiming};

#[derive(Clone, Debug, PartialEq)]
pub enum Manning {
    Uniform(f32),
    /// Same shape as the DEM.
    Raster(Raster),
}

/// Fully loaded run inputs.
#[derive(Clone, Debug)]
pub struct Scenario {
    /// Bed elevation at the simulation resolution; its cell size is `dx`.
    pub dem: Raster,
    pub manning: Manning,
    /// Initial depth per DEM cell; dry when absent. Padding replicates the
    /// edge like the DEM, so a flat lake stays flat.
    pub initial_depth: Option<Vec<f32>>,
    pub g: f32,
    pub h_min: f32,
    pub dt: f64,
    pub start_time: f64,
    pub duration: f64,
    /// `None` snapshots only the start and end states.
    pub snapshot_interval: Option<f64>,
    pub cx: usize,
    pub cy: usize,
    pub inflow: Option<InflowSpec>,
    pub outflow: Option<OutflowSpec>,
}

impl Scenario {
    /// Closed, dry domain with default physics over `dem`.
    pub fn new(dem: Raster, duration: f64) -> Self {
        Self {
            dem,
            manning: Manning::Uniform(0.03),
            initial_depth: None,
            g: GRAVITY,
            h_min: 1e-3,
            dt: 0.1,
            start_time: 0.0,
            duration,
            snapshot_interval: None,
            cx: 1,
            cy: 1,
            inflow: None,
            outflow: None,
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Ok(Schedule::new(self.start_time, self.duration, self.dt)?)
    }

    pub fn params(&self) -> PhysicsParams {
        PhysicsParams {
            g: self.g,
            dt: self.dt as f32,
            dx: self.dem.cell_size as f32,
            h_min: self.h_min,
        }
    }

    /// Pads every input to the partition and splits it into a worker pool.
    pub fn build_pool(&self) -> Result<(Pool, PadRecord)> {
        self.dem.validate_dem()?;
        let (dem, pad) = self.dem.pad_to_divisible(self.cx, self.cy)?;
        let n = match &self.manning {
            Manning::Uniform(n) => vec![*n; dem.len()],
            Manning::Raster(r) => {
                if (r.rows, r.cols) != (self.dem.rows, self.dem.cols) {
                    return Err(Error::Config(format!(
                        "Manning raster is {}x{}, DEM is {}x{}",
                        r.rows, r.cols, self.dem.rows, self.dem.cols
                    )));
                }
                r.validate_dem()?;
                r.pad_to(pad.padded_rows, pad.padded_cols).values
            }
        };
        let h0 = match &self.initial_depth {
            Some(h) if h.len() == self.dem.len() => self
                .dem
                .with_values(h.clone())?
                .pad_to(pad.padded_rows, pad.padded_cols)
                .values,
            Some(h) => {
                return Err(floodsim_core::Error::Dimensions {
                    rows: self.dem.rows,
                    cols: self.dem.cols,
                    len: h.len(),
                }
                .into())
            }
            None => vec![0.0; dem.len()],
        };
        let grid = GlobalGrid {
            rows: dem.rows,
            cols: dem.cols,
            z: dem.values,
            n,
            h0,
            extent: pad,
        };
        let topo = Topology::build(grid.rows, grid.cols, self.cx, self.cy)?;
        let subs = decompose(&grid, &topo, self.params(), self.inflow.as_ref(), self.outflow.as_ref())?;
        Ok((Pool::new(topo, subs), pad))
    }
}

#[derive(Clone, Debug)]
pub struct OutputOptions {
    /// Files are written only when set.
    pub dir: Option<PathBuf>,
    pub extent_threshold: f32,
    pub steady_threshold: f32,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            dir: None,
            extent_threshold: 0.05,
            steady_threshold: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    /// Max |Δh| between consecutive snapshots, one entry per interval.
    pub metric: Vec<f32>,
    /// Last interval fell below the threshold.
    pub steady: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub steps: u64,
    pub end_time: f64,
    pub pad: PadRecord,
    /// Padded global fields at the end of the run.
    pub fields: GlobalFields,
    /// End depth over the original extent, georeferenced like the DEM.
    pub final_depth: Raster,
    pub initial_volume: f64,
    /// One entry per snapshot, plus the end state if it is not a snapshot.
    pub ledgers: Vec<MassLedger>,
    pub snapshot_levels: Vec<u64>,
    pub snapshot_paths: Vec<PathBuf>,
    pub extent_paths: Vec<PathBuf>,
    pub steady: SteadyState,
    /// Summed over the run, indexed by worker id.
    pub timings: Vec<WorkerTiming>,
    pub wall: Duration,
}

impl RunReport {
    /// Worst relative ledger residual across all recorded levels.
    pub fn max_ledger_residual(&self) -> f64 {
        self.ledgers
            .iter()
            .map(|l| l.relative_residual(self.initial_volume))
            .fold(0.0, f64::max)
    }
}

/// `1` where `h > threshold`, else `0`, over the unpadded extent.
pub fn extent_mask(depth: &Raster, pad: &PadRecord, threshold: f32) -> Raster {
    let mut mask = pad.crop(depth);
    for v in &mut mask.values {
        *v = if *v > threshold { 1.0 } else { 0.0 };
    }
    mask
}

/// Max |Δh| between consecutive snapshots.
pub fn steady_state_check(snapshots: &[&[f32]], threshold: f32) -> SteadyState {
    let metric: Vec<f32> = snapshots.windows(2).map(|w| max_abs_diff(w[0], w[1])).collect();
    let steady = metric.last().is_some_and(|m| *m < threshold);
    SteadyState { metric, steady }
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

fn time_label(t: f64) -> String {
    format!("{t}")
}

pub fn simulate(sc: &Scenario, out: &OutputOptions) -> Result<RunReport> {
    let wall0 = Instant::now();
    let schedule = sc.schedule()?;
    let (mut pool, pad) = sc.build_pool()?;
    let levels = match sc.snapshot_interval {
        Some(i) => schedule.snapshot_levels(i)?,
        None => vec![0, schedule.steps()],
    };
    if let Some(dir) = &out.dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let (padded_dem, _) = sc.dem.pad_to_divisible(sc.cx, sc.cy)?;

    let initial_volume = pool.volume();
    let mut totals = StepFlows::default();
    let mut timings = vec![WorkerTiming::default(); pool.topology().workers()];
    let mut ledgers = Vec::new();
    let mut snapshot_paths = Vec::new();
    let mut extent_paths = Vec::new();
    let mut metric = Vec::new();
    let mut previous: Option<Vec<f32>> = None;

    let mut stops = levels.clone();
    if stops.last() != Some(&schedule.steps()) {
        stops.push(schedule.steps());
    }
    for (i, &level) in stops.iter().enumerate() {
        let adv = pool.advance(&schedule, level)?;
        totals += adv.flows;
        for (acc, t) in timings.iter_mut().zip(&adv.timings) {
            acc.compute_ns += t.compute_ns;
            acc.exchange_ns += t.exchange_ns;
            acc.steps += t.steps;
        }
        let time = schedule.time_at(level);
        ledgers.push(MassLedger::new(level, time, pool.volume(), totals));
        if i >= levels.len() {
            break;
        }

        let depth = padded_dem.with_values(pool.fields().h.into_vec())?;
        let cropped = pad.crop(&depth);
        if let Some(prev) = &previous {
            metric.push(max_abs_diff(prev, &cropped.values));
        }
        if let Some(dir) = &out.dir {
            let label = time_label(time);
            let h_path = dir.join(format!("h_{label}.r32"));
            write_raster(&cropped, &h_path, RasterFormat::RawF32)?;
            let e_path = dir.join(format!("extent_{label}.asc"));
            write_raster(&extent_mask(&depth, &pad, out.extent_threshold), &e_path, RasterFormat::AsciiGrid)?;
            snapshot_paths.push(h_path);
            extent_paths.push(e_path);
        }
        previous = Some(cropped.values);
    }

    let fields = pool.fields();
    let final_depth = pad.crop(&padded_dem.with_values(fields.h.clone().into_vec())?);
    let steady = SteadyState {
        steady: metric.last().is_some_and(|m| *m < out.steady_threshold),
        metric,
    };
    let report = RunReport {
        steps: schedule.steps(),
        end_time: schedule.end(),
        pad,
        fields,
        final_depth,
        initial_volume,
        ledgers,
        snapshot_levels: levels,
        snapshot_paths,
        extent_paths,
        steady,
        timings,
        wall: wall0.elapsed(),
    };
    if let Some(dir) = &out.dir {
        write_ledger(&report, &dir.join("ledger.csv"))?;
        let path = dir.join("report.txt");
        fs::write(&path, render_summary(sc, &report)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

fn write_ledger(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "time_s", "volume_m3", "inflow_m3", "outflow_m3", "clamped_m3", "relative_residual"])?;
    for l in &report.ledgers {
        w.write_record([
            l.step.to_string(),
            l.time.to_string(),
            l.volume.to_string(),
            l.inflow.to_string(),
            l.outflow.to_string(),
            l.clamped.to_string(),
            format!("{:e}", l.relative_residual(report.initial_volume)),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn render_summary(sc: &Scenario, r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "grid            {} x {} at {} m", r.pad.orig_rows, r.pad.orig_cols, sc.dem.cell_size);
    let _ = writeln!(s, "padded grid     {} x {}", r.pad.padded_rows, r.pad.padded_cols);
    let _ = writeln!(s, "layout          {} x {} ({} workers)", sc.cx, sc.cy, sc.cx * sc.cy);
    let _ = writeln!(s, "steps           {}", r.steps);
    let _ = writeln!(s, "simulated       {} s .. {} s", sc.start_time, r.end_time);
    let _ = writeln!(s, "wall time       {:.3} s", r.wall.as_secs_f64());
    if let Some(l) = r.ledgers.last() {
        let _ = writeln!(s, "final volume    {:.6e} m3", l.volume);
        let _ = writeln!(s, "inflow          {:.6e} m3", l.inflow);
        let _ = writeln!(s, "outflow         {:.6e} m3", l.outflow);
        let _ = writeln!(s, "clamped         {:.6e} m3", l.clamped);
    }
    let _ = writeln!(s, "ledger residual {:.3e} (max relative)", r.max_ledger_residual());
    match r.steady.metric.last() {
        Some(m) => {
            let _ = writeln!(s, "last max |dh|   {m:.3e} m (steady: {})", r.steady.steady);
        }
        None => {
            let _ = writeln!(s, "last max |dh|   n/a");
        }
    }
    let ex: u64 = r.timings.iter().map(|t| t.exchange_ns).sum();
    let all: u64 = r.timings.iter().map(|t| t.exchange_ns + t.compute_ns).sum();
    if all > 0 {
        let _ = writeln!(s, "exchange share  {:.1} %", 100.0 * ex as f64 / all as f64);
    }
    let _ = writeln!(s, "snapshots       {}", r.snapshot_levels.len());
    s
}

/// Loads everything a config refers to and runs it.
pub fn run_simulation(cfg: &SimConfig) -> Result<RunReport> {
    cfg.validate()?;
    let raw = load_raster(&cfg.dem.path, cfg.dem_format())?;
    let factor = downsample_factor(cfg, raw.cell_size)?;
    let dem = raw.downsample_mean(factor)?;
    let manning = match &cfg.physics.manning_path {
        Some(p) => {
            let n = load_raster(p, RasterFormat::from_path(p))?;
            if (n.rows, n.cols) != (raw.rows, raw.cols) {
                return Err(Error::Config(format!(
                    "Manning raster {} is {}x{}, DEM is {}x{}",
                    p.display(),
                    n.rows,
                    n.cols,
                    raw.rows,
                    raw.cols
                )));
            }
            Manning::Raster(n.downsample_mean(factor)?)
        }
        None => Manning::Uniform(cfg.physics.manning_n),
    };
    let sc = Scenario {
        dem,
        manning,
        initial_depth: None,
        g: cfg.physics.g,
        h_min: cfg.physics.h_min,
        dt: cfg.time.dt,
        start_time: cfg.time.start_time,
        duration: cfg.time.duration,
        snapshot_interval: cfg.time.snapshot_interval,
        cx: cfg.partition.cx,
        cy: cfg.partition.cy,
        inflow: cfg.inflow_spec()?,
        outflow: cfg.outflow_spec()?,
    };
    let out = OutputOptions {
        dir: Some(cfg.output.dir.clone()),
        extent_threshold: cfg.output.extent_threshold,
        steady_threshold: cfg.output.steady_threshold,
    };
    simulate(&sc, &out)
}

fn downsample_factor(cfg: &SimConfig, cell_size: f64) -> Result<usize> {
    if let Some(f) = cfg.dem.downsample {
        return Ok(f);
    }
    let Some(res) = cfg.dem.resolution else { return Ok(1) };
    let ratio = res / cell_size;
    let f = ratio.round();
    if f < 1.0 || (ratio - f).abs() > 1e-6 * ratio {
        return Err(Error::Config(format!(
            "resolution {res} m is not a whole multiple of the DEM cell size {cell_size} m"
        )));
    }
    Ok(f as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dry_state_masks_nothing() {
        let h = Raster::filled(4, 6, 1.0, 0.0).unwrap();
        let m = extent_mask(&h, &PadRecord::none(4, 6), 0.05);
        assert!(m.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_threshold_marks_any_water() {
        let h = Raster::new(1, 3, 1.0, vec![0.0, 1e-7, 2.0]).unwrap();
        assert_eq!(extent_mask(&h, &PadRecord::none(1, 3), 0.0).values, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn mask_is_cropped() {
        let h = Raster::filled(4, 4, 1.0, 1.0).unwrap();
        let pad = PadRecord {
            orig_rows: 3,
            orig_cols: 2,
            padded_rows: 4,
            padded_cols: 4,
        };
        let m = extent_mask(&h, &pad, 0.05);
        assert_eq!((m.rows, m.cols), (3, 2));
    }

    #[test]
    fn steady_metric() {
        let a = [1.0f32, 2.0];
        let b = [1.5f32, 2.0];
        let s = steady_state_check(&[&a, &a], 1e-3);
        assert_eq!(s.metric, vec![0.0]);
        assert!(s.steady);
        let s = steady_state_check(&[&a, &b, &b], 1e-3);
        assert_eq!(s.metric, vec![0.5, 0.0]);
        assert!(steady_state_check(&[&a], 1e-3).metric.is_empty());
    }

    #[test]
    fn truncated_schedule_runs_three_steps() {
        let dem = Raster::filled(4, 4, 1.0, 0.0).unwrap();
        let mut sc = Scenario::new(dem, 0.25);
        sc.snapshot_interval = Some(0.1);
        let r = simulate(&sc, &OutputOptions::default()).unwrap();
        assert_eq!(r.steps, 3);
        assert_eq!(r.end_time, 0.25);
        assert_eq!(r.snapshot_levels, vec![0, 1, 2]);
        // two intervals between three snapshots, then the end state
        assert_eq!(r.ledgers.len(), 4);
        assert_eq!(r.timings[0].steps, 3);
    }

    #[test]
    fn lake_at_rest_is_steady() {
        let dem = Raster::from_fn(6, 6, 2.0, |r, c| ((r + 2 * c) % 4) as f32 * 0.25).unwrap();
        let mut sc = Scenario::new(dem.clone(), 20.0);
        sc.initial_depth = Some(dem.values.iter().map(|z| 2.0 - z).collect());
        sc.snapshot_interval = Some(5.0);
        sc.cx = 4;
        let r = simulate(&sc, &OutputOptions::default()).unwrap();
        assert_eq!(r.pad.padded_cols, 8);
        assert_eq!(r.steady.metric, vec![0.0; 4]);
        assert!(r.steady.steady);
        assert_eq!(r.max_ledger_residual(), 0.0);
    }
}
