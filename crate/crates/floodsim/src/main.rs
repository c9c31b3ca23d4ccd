use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use floodsim::bench::{run_bench, BenchPlan, LayoutSet, Terrain};
use floodsim::io::{load_raster, RasterFormat};
use floodsim::report::{read_records, render_report, scaling_curve, write_curve, write_records};
use floodsim::{run_simulation, SimConfig};
use floodsim_core::topology::{enumerate_layouts, Layout};

#[derive(Parser)]
#[command(name = "floodsim", version, about = "Tiled inertial flood simulator and scaling benchmark")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation described by a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Time a fixed step budget over resolutions, worker counts and layouts.
    Bench {
        /// Cell sizes in metres.
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        steps: u64,
        #[arg(long, default_value_t = 50)]
        warmup: u64,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        /// Synthetic terrain size, WIDTHxHEIGHT in metres.
        #[arg(long, default_value = "4096x2048", conflicts_with = "dem")]
        extent: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Benchmark on this DEM instead of synthetic terrain.
        #[arg(long)]
        dem: Option<PathBuf>,
        #[arg(long)]
        dem_format: Option<RasterFormat>,
        #[arg(long, default_value = "all")]
        layouts: LayoutSet,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the steps/s against points-per-worker curve here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// List the factorisations of a worker count and their halo costs.
    Layouts {
        #[arg(long)]
        workers: usize,
        /// Grid rows, for the cut length column.
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
    },
    /// Efficiency tables from a bench CSV.
    Report {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
}

fn parse_extent(s: &str) -> anyhow::Result<(f64, f64)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("extent `{s}` is not WIDTHxHEIGHT"))?;
    let (w, h): (f64, f64) = (w.trim().parse()?, h.trim().parse()?);
    if !(w > 0.0 && h > 0.0) {
        bail!("extent must be positive, got {s}");
    }
    Ok((w, h))
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Simulate { config } => {
            let cfg = SimConfig::load(&config)?;
            let report = run_simulation(&cfg)?;
            println!(
                "{} steps in {:.2} s; outputs in {}; max ledger residual {:.2e}",
                report.steps,
                report.wall.as_secs_f64(),
                cfg.output.dir.display(),
                report.max_ledger_residual()
            );
        }
        Cmd::Bench {
            resolutions,
            workers,
            steps,
            warmup,
            dt,
            extent,
            seed,
            dem,
            dem_format,
            layouts,
            out,
            curve,
        } => {
            let terrain = match dem {
                Some(p) => {
                    let fmt = dem_format.unwrap_or_else(|| RasterFormat::from_path(&p));
                    Terrain::Dem(load_raster(&p, fmt)?)
                }
                None => {
                    let (width_m, height_m) = parse_extent(&extent)?;
                    Terrain::Valley {
                        width_m,
                        height_m,
                        seed: seed.unwrap_or(7),
                    }
                }
            };
            let plan = BenchPlan {
                resolutions,
                workers,
                steps,
                warmup,
                layouts,
                terrain,
                dt,
            };
            let recs = run_bench(&plan, |r| {
                eprintln!(
                    "{} m  {:>4} workers  {}x{}  {:.1} steps/s  exchange {:.2}%",
                    r.resolution_m, r.workers, r.cx, r.cy, r.steps_per_s, r.exchange_pct
                )
            })?;
            match &out {
                Some(p) => write_records(File::create(p).with_context(|| p.display().to_string())?, &recs)?,
                None => write_records(io::stdout().lock(), &recs)?,
            }
            if let Some(p) = curve {
                write_curve(File::create(&p).with_context(|| p.display().to_string())?, &scaling_curve(&recs))?;
            }
        }
        Cmd::Layouts { workers, rows, cols } => {
            if workers == 0 {
                bail!("--workers must be at least 1");
            }
            let mut stdout = io::stdout().lock();
            let with_cut = rows.zip(cols);
            write!(stdout, "{:>6} {:>6} {:>14}", "cx", "cy", "shared_borders")?;
            if with_cut.is_some() {
                write!(stdout, " {:>10}", "cut_cells")?;
            }
            writeln!(stdout)?;
            for Layout { cx, cy, neighbor_links } in enumerate_layouts(workers) {
                write!(stdout, "{cx:>6} {cy:>6} {neighbor_links:>14}")?;
                if let Some((r, c)) = with_cut {
                    write!(stdout, " {:>10}", Layout::new(cx, cy).cut_cells(r, c))?;
                }
                writeln!(stdout)?;
            }
        }
        Cmd::Report { csv, curve } => {
            let recs = read_records(&csv)?;
            print!("{}", render_report(&recs)?);
            if let Some(p) = curve {
                write_curve(File::create(&p).with_context(|| p.display().to_string())?, &scaling_curve(&recs))?;
            }
        }
    }
    Ok(())
}
