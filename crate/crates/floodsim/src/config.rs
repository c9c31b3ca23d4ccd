//! TOML run configuration.
//!
//! ```toml
//! [dem]
//! path = "dem.asc"          # relative to this file
//! format = "ascii_grid"     # or raw_f32; inferred from the extension if absent
//! downsample = 4            # or `resolution = 4.0` (m)
//!
//! [time]
//! dt = 0.1
//! start_time = 0.0
//! duration = 172800.0
//! snapshot_interval = 3600.0
//!
//! [partition]
//! cx = 2
//! cy = 4
//!
//! [physics]
//! manning_n = 0.03          # or manning_path = "n.asc"
//!
//! [inflow]
//! side = "west"
//! fraction_start = 0.4
//! fraction_end = 0.6
//! slope = 0.001
//! discharge = 1500.0        # or [[0.0, 500.0], [3600.0, 1500.0]]
//!
//! [outflow]
//! side = "east"
//! slope = 0.001
//!
//! [output]
//! dir = "out"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use floodsim_core::boundary::{CrossSection, DischargeSeries, InflowSpec, OutflowSpec};
use floodsim_core::{Side, GRAVITY};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::RasterFormat;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dem: DemConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    pub inflow: Option<InflowConfig>,
    pub outflow: Option<OutflowConfig>,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemConfig {
    pub path: PathBuf,
    pub format: Option<RasterFormat>,
    /// Target cell size in m; must be a whole multiple of the DEM's.
    pub resolution: Option<f64>,
    pub downsample: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub start_time: f64,
    pub duration: f64,
    /// Defaults to one snapshot at the start and one at the end.
    pub snapshot_interval: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    #[serde(default = "one")]
    pub cx: usize,
    #[serde(default = "one")]
    pub cy: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "default_g")]
    pub g: f32,
    #[serde(default = "default_h_min")]
    pub h_min: f32,
    #[serde(default = "default_n")]
    pub manning_n: f32,
    pub manning_path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SideName {
    West,
    East,
    North,
    South,
}

impl From<SideName> for Side {
    fn from(s: SideName) -> Side {
        match s {
            SideName::West => Side::West,
            SideName::East => Side::East,
            SideName::North => Side::North,
            SideName::South => Side::South,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Discharge {
    Constant(f64),
    /// `(time s, discharge m³/s)` breakpoints, each held until the next.
    Series(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflowConfig {
    pub side: SideName,
    #[serde(default)]
    pub fraction_start: f64,
    #[serde(default = "one_f")]
    pub fraction_end: f64,
    pub slope: f64,
    pub discharge: Discharge,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutflowConfig {
    pub side: SideName,
    #[serde(default)]
    pub fraction_start: f64,
    #[serde(default = "one_f")]
    pub fraction_end: f64,
    pub slope: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_extent")]
    pub extent_threshold: f32,
    /// Max |Δh| between snapshots below which the run counts as steady.
    #[serde(default = "default_steady")]
    pub steady_threshold: f32,
}

fn default_dt() -> f64 {
    0.1
}
fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn default_g() -> f32 {
    GRAVITY
}
fn default_h_min() -> f32 {
    1e-3
}
fn default_n() -> f32 {
    0.03
}
fn default_extent() -> f32 {
    0.05
}
fn default_steady() -> f32 {
    1e-3
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { cx: 1, cy: 1 }
    }
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            g: default_g(),
            h_min: default_h_min(),
            manning_n: default_n(),
            manning_path: None,
        }
    }
}

impl SimConfig {
    /// Parses `path` and resolves relative file paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.dem.path);
        if let Some(p) = self.physics.manning_path.as_mut() {
            join(p);
        }
        join(&mut self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.time.duration > 0.0) {
            return bad(format!("time.duration must be > 0, got {}", self.time.duration));
        }
        if !(self.time.dt > 0.0) {
            return bad(format!("time.dt must be > 0, got {}", self.time.dt));
        }
        if let Some(i) = self.time.snapshot_interval {
            if !(i > 0.0) {
                return bad(format!("time.snapshot_interval must be > 0, got {i}"));
            }
        }
        if self.partition.cx == 0 || self.partition.cy == 0 {
            return bad("partition.cx and partition.cy must be ≥ 1".into());
        }
        if self.dem.resolution.is_some() && self.dem.downsample.is_some() {
            return bad("set at most one of dem.resolution and dem.downsample".into());
        }
        if self.dem.downsample == Some(0) {
            return bad("dem.downsample must be ≥ 1".into());
        }
        if !(self.output.extent_threshold >= 0.0) {
            return bad("output.extent_threshold must be ≥ 0".into());
        }
        self.inflow_spec()?;
        self.outflow_spec()?;
        Ok(())
    }

    pub fn inflow_spec(&self) -> Result<Option<InflowSpec>> {
        let Some(c) = &self.inflow else { return Ok(None) };
        let discharge = match &c.discharge {
            Discharge::Constant(q) => DischargeSeries::constant(*q)?,
            Discharge::Series(pts) => DischargeSeries::new(pts.clone())?,
        };
        let spec = InflowSpec {
            section: CrossSection::new(c.side.into(), c.fraction_start, c.fraction_end)?,
            discharge,
            slope: c.slope,
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    pub fn outflow_spec(&self) -> Result<Option<OutflowSpec>> {
        let Some(c) = &self.outflow else { return Ok(None) };
        let spec = OutflowSpec {
            section: CrossSection::new(c.side.into(), c.fraction_start, c.fraction_end)?,
            slope: c.slope,
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    pub fn dem_format(&self) -> RasterFormat {
        self.dem
            .format
            .unwrap_or_else(|| RasterFormat::from_path(&self.dem.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [dem]
        path = "dem.asc"
        [time]
        duration = 60.0
        [output]
        dir = "out"
    "#;

    #[test]
    fn defaults() {
        let c = SimConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.time.dt, 0.1);
        assert_eq!((c.partition.cx, c.partition.cy), (1, 1));
        assert_eq!(c.physics.manning_n, 0.03);
        assert_eq!(c.output.extent_threshold, 0.05);
        assert_eq!(c.dem_format(), RasterFormat::AsciiGrid);
        assert!(c.inflow_spec().unwrap().is_none());
    }

    #[test]
    fn discharge_forms() {
        let text = format!(
            "{MINIMAL}\n[inflow]\nside = \"west\"\nslope = 0.001\ndischarge = [[0.0, 1.0], [10.0, 3.0]]\n"
        );
        let c = SimConfig::parse(&text).unwrap();
        let spec = c.inflow_spec().unwrap().unwrap();
        assert_eq!(spec.discharge.at(5.0), 1.0);
        assert_eq!(spec.discharge.at(10.0), 3.0);
        assert_eq!(spec.section, CrossSection::full(Side::West));
        let text = format!("{MINIMAL}\n[inflow]\nside = \"north\"\nslope = 0.01\ndischarge = 7.5\n");
        let spec = SimConfig::parse(&text).unwrap().inflow_spec().unwrap().unwrap();
        assert_eq!(spec.discharge.at(1e9), 7.5);
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("duration = 60.0", "duration = 0.0"),
            ("duration = 60.0", "duration = 60.0\ndt = -1.0"),
            ("dir = \"out\"", "dir = \"out\"\nbogus = 1"),
        ] {
            assert!(SimConfig::parse(&MINIMAL.replace(from, to)).is_err(), "{to}");
        }
        let text = format!("{MINIMAL}\n[outflow]\nside = \"up\"\nslope = 0.001\n");
        assert!(SimConfig::parse(&text).is_err());
        let text = format!("{MINIMAL}\n[outflow]\nside = \"east\"\nslope = 0.001\nfraction_start = 0.8\nfraction_end = 0.2\n");
        assert!(SimConfig::parse(&text).is_err());
    }

    #[test]
    fn paths_resolved_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, MINIMAL).unwrap();
        let c = SimConfig::load(&p).unwrap();
        assert_eq!(c.dem.path, dir.path().join("dem.asc"));
        assert_eq!(c.output.dir, dir.path().join("out"));
        assert!(SimConfig::load(dir.path().join("missing.toml")).is_err());
    }
}
