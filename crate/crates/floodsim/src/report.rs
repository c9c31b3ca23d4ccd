//! Text tables and scaling-curve data from bench records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use floodsim_core::scaling::{EfficiencyTable, RunTime};
use serde::Serialize;

use crate::bench::BenchRecord;
use crate::error::{Error, Result};

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let recs = r.deserialize().collect::<Result<Vec<BenchRecord>, _>>()?;
    if recs.is_empty() {
        return Err(Error::parse(path, "no bench records"));
    }
    Ok(recs)
}

pub fn write_records<W: std::io::Write>(out: W, recs: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in recs {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<bench output>", e))
}

/// Keyed by (resolution bits, workers) so that grouping is exact.
type Key = (u64, usize);

fn key(r: &BenchRecord) -> Key {
    (r.resolution_m.to_bits(), r.workers)
}

/// Fastest layout for every (resolution, workers) pair.
pub fn best_layouts(recs: &[BenchRecord]) -> Vec<&BenchRecord> {
    let mut best: BTreeMap<Key, &BenchRecord> = BTreeMap::new();
    for r in recs {
        best.entry(key(r))
            .and_modify(|b| {
                if r.steps_per_s > b.steps_per_s {
                    *b = r;
                }
            })
            .or_insert(r);
    }
    best.into_values().collect()
}

/// Weak and strong efficiencies from the best layout of each pair, timed as
/// the wall time of one million steps.
pub fn efficiency_table(recs: &[BenchRecord]) -> Result<EfficiencyTable> {
    let runs: Vec<RunTime> = best_layouts(recs)
        .into_iter()
        .map(|r| RunTime {
            resolution_m: r.resolution_m,
            workers: r.workers,
            grid_points: r.grid_points,
            seconds: r.t_1m_steps_s,
        })
        .collect();
    Ok(EfficiencyTable::from_runs(&runs)?)
}

/// Two significant figures in the largest unit that keeps the value ≥ 1.
pub fn format_duration(seconds: f64) -> String {
    let (v, unit) = if seconds >= 3600.0 {
        (seconds / 3600.0, "h")
    } else if seconds >= 60.0 {
        (seconds / 60.0, "min")
    } else {
        (seconds, "s")
    };
    if v >= 10.0 {
        format!("{v:.0} {unit}")
    } else {
        format!("{v:.1} {unit}")
    }
}

fn fmt_res(r: f64) -> String {
    format!("{r}")
}

fn table(title: &str, head: &[String], rows: &[Vec<String>]) -> String {
    let ncol = head.len();
    let mut width = vec![0; ncol];
    for row in std::iter::once(head).chain(rows.iter().map(Vec::as_slice)) {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let line = |s: &mut String, row: &[String]| {
        for (i, (cell, w)) in row.iter().zip(&width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{cell:>w$}");
        }
        s.push('\n');
    };
    line(&mut s, head);
    let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut s, &rule);
    for row in rows {
        line(&mut s, row);
    }
    s
}

/// Resolution x workers grid filled by `cell`.
fn grid_table(title: &str, t: &EfficiencyTable, cell: impl Fn(f64, usize) -> String) -> String {
    let workers = t.worker_counts();
    let mut head = vec!["Resolution (m)".to_string()];
    head.extend(workers.iter().map(|w| format!("{w} workers")));
    let rows: Vec<Vec<String>> = t
        .resolutions()
        .into_iter()
        .map(|res| {
            let mut row = vec![fmt_res(res)];
            row.extend(workers.iter().map(|w| cell(res, *w)));
            row
        })
        .collect();
    table(title, &head, &rows)
}

pub fn render_report(recs: &[BenchRecord]) -> Result<String> {
    let t = efficiency_table(recs)?;
    let mut s = String::new();
    s.push_str(&grid_table("Time to compute 1 million steps (best layout)", &t, |res, w| {
        t.get(res, w)
            .map(|c| format_duration(c.run.seconds))
            .unwrap_or_default()
    }));
    s.push('\n');
    s.push_str(&grid_table("Weak scaling efficiency", &t, |res, w| match t.get(res, w) {
        Some(c) if !c.weak_baseline => format!("{:.0}%", c.weak),
        Some(_) => "base".into(),
        None => String::new(),
    }));
    s.push('\n');
    s.push_str(&grid_table("Strong scaling efficiency", &t, |res, w| match t.get(res, w) {
        Some(c) if !c.strong_baseline => format!("{:.0}%", c.strong),
        Some(_) => "base".into(),
        None => String::new(),
    }));

    let groups = group(recs);
    let mut layout_rows = Vec::new();
    let mut comm_rows = Vec::new();
    for ((_, _), rs) in &groups {
        let (res, w) = (rs[0].resolution_m, rs[0].workers);
        let fastest = rs.iter().max_by(|a, b| a.steps_per_s.total_cmp(&b.steps_per_s)).unwrap();
        let slowest = rs.iter().min_by(|a, b| a.steps_per_s.total_cmp(&b.steps_per_s)).unwrap();
        if rs.len() > 1 {
            layout_rows.push(vec![
                fmt_res(res),
                w.to_string(),
                format!("{}x{}", fastest.cx, fastest.cy),
                format!("{}x{}", slowest.cx, slowest.cy),
                format!("{:.2}", fastest.steps_per_s / slowest.steps_per_s),
            ]);
        }
        let per: Vec<String> = rs
            .iter()
            .map(|r| format!("{}x{}:{:.2}", r.cx, r.cy, r.exchange_pct))
            .collect();
        let mean = rs.iter().map(|r| r.exchange_pct).sum::<f64>() / rs.len() as f64;
        comm_rows.push(vec![
            fmt_res(res),
            w.to_string(),
            format!("{:.0}", rs[0].points_per_worker()),
            format!("{mean:.2}"),
            per.join(" "),
        ]);
    }
    if !layout_rows.is_empty() {
        s.push('\n');
        let head = ["Resolution (m)", "Workers", "Best", "Worst", "Worst/best time"].map(String::from);
        s.push_str(&table("Layout sweep", &head, &layout_rows));
    }
    s.push('\n');
    let head = ["Resolution (m)", "Workers", "Points/worker", "Mean %", "Per layout %"].map(String::from);
    s.push_str(&table("Exchange share of step time", &head, &comm_rows));

    let mut speed_rows = Vec::new();
    for res in t.resolutions() {
        let Some(one) = t.get(res, 1) else { continue };
        for w in t.worker_counts().into_iter().filter(|w| *w > 1) {
            if let Some(c) = t.get(res, w) {
                speed_rows.push(vec![
                    fmt_res(res),
                    w.to_string(),
                    format!("{:.2}", one.run.seconds / c.run.seconds),
                ]);
            }
        }
    }
    if !speed_rows.is_empty() {
        s.push('\n');
        let head = ["Resolution (m)", "Workers", "Speedup vs 1 worker"].map(String::from);
        s.push_str(&table("Throughput against a single worker", &head, &speed_rows));
    }
    Ok(s)
}

fn group(recs: &[BenchRecord]) -> BTreeMap<(std::cmp::Reverse<u64>, usize), Vec<&BenchRecord>> {
    let mut g: BTreeMap<_, Vec<&BenchRecord>> = BTreeMap::new();
    for r in recs {
        g.entry((std::cmp::Reverse(r.resolution_m.to_bits()), r.workers))
            .or_default()
            .push(r);
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub resolution_m: f64,
    pub workers: usize,
    pub cx: usize,
    pub cy: usize,
    pub points_per_worker: f64,
    pub steps_per_s: f64,
    /// Fastest layout of its (resolution, workers) pair.
    pub best: bool,
}

/// Steps per second against points per worker, sorted by points per worker.
pub fn scaling_curve(recs: &[BenchRecord]) -> Vec<CurvePoint> {
    let best = best_layouts(recs);
    let mut pts: Vec<CurvePoint> = recs
        .iter()
        .map(|r| CurvePoint {
            resolution_m: r.resolution_m,
            workers: r.workers,
            cx: r.cx,
            cy: r.cy,
            points_per_worker: r.points_per_worker(),
            steps_per_s: r.steps_per_s,
            best: best.iter().any(|b| std::ptr::eq(*b, r)),
        })
        .collect();
    pts.sort_by(|a, b| {
        a.points_per_worker
            .total_cmp(&b.points_per_worker)
            .then(b.resolution_m.total_cmp(&a.resolution_m))
    });
    pts
}

pub fn write_curve<W: std::io::Write>(out: W, pts: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in pts {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("<curve output>", e))
}
