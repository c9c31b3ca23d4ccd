//! Manning-law inflow and outflow boundaries.
//!
//! A single inflow section receives a prescribed discharge, spread over its
//! cells by finding the common water level whose per-cell Manning discharge
//! adds up to the target. A single outflow section drains each of its cells
//! independently at the Manning discharge of the local depth.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::kernel::{Bed, State};
use crate::topology::{Side, Tile};

/// Relative discharge tolerance the level solver stops at. Tighter than the
/// 1e-6 contract so that rounding the per-cell fluxes to `f32` stays inside it.
const LEVEL_REL_TOL: f64 = 1e-10;
const LEVEL_MAX_ITER: usize = 200;
/// Deepest water column the bracket search will consider, m.
const LEVEL_MAX_DEPTH: f64 = 1e6;

/// Discharge (m³/s) through one cell of width `dx` at depth `h`, with the
/// hydraulic radius approximated by the depth: `(dx / n) h^(5/3) sqrt(slope)`.
pub fn manning_flux(h: f64, slope: f64, n: f64, dx: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    dx / n * libm::pow(h, 5.0 / 3.0) * libm::sqrt(slope)
}

/// Water level and per-cell discharges for one inflow evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct InflowSolution {
    pub level: f64,
    /// m³/s per section cell, in section order.
    pub discharge: Vec<f64>,
}

impl InflowSolution {
    pub fn total(&self) -> f64 {
        self.discharge.iter().sum()
    }
}

/// Finds the level `W` at which `Σ manning_flux(max(W - z, 0))` over the
/// section equals `q_in`.
///
/// `cells` holds `(z, n)` per section cell. The total is nondecreasing in
/// `W`, so the root is bracketed by doubling the depth above the lowest bed
/// from 1 m and then bisected.
pub fn solve_inflow_level(
    cells: &[(f64, f64)],
    q_in: f64,
    slope: f64,
    dx: f64,
) -> Result<InflowSolution> {
    if cells.is_empty() {
        return Err(Error::InvalidParameter {
            name: "inflow section length",
            value: 0.0,
        });
    }
    if !(q_in >= 0.0 && q_in.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "inflow discharge",
            value: q_in,
        });
    }
    if !(slope > 0.0) {
        return Err(Error::InvalidParameter {
            name: "inflow slope",
            value: slope,
        });
    }
    let z_min = cells.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let per_cell = |w: f64| -> Vec<f64> {
        cells
            .iter()
            .map(|&(z, n)| manning_flux((w - z).max(0.0), slope, n, dx))
            .collect()
    };
    let total = |w: f64| -> f64 {
        cells
            .iter()
            .map(|&(z, n)| manning_flux((w - z).max(0.0), slope, n, dx))
            .sum()
    };
    if q_in == 0.0 {
        return Ok(InflowSolution {
            level: z_min,
            discharge: alloc::vec![0.0; cells.len()],
        });
    }

    let mut depth = 1.0;
    while total(z_min + depth) < q_in {
        depth *= 2.0;
        if depth > LEVEL_MAX_DEPTH {
            return Err(Error::Bracket { discharge: q_in });
        }
    }
    let (mut lo, mut hi) = (z_min, z_min + depth);
    let mut level = hi;
    for _ in 0..LEVEL_MAX_ITER {
        level = 0.5 * (lo + hi);
        let q = total(level);
        if (q - q_in).abs() <= LEVEL_REL_TOL * q_in {
            break;
        }
        if q < q_in {
            lo = level;
        } else {
            hi = level;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(InflowSolution {
        level,
        discharge: per_cell(level),
    })
}

/// Piecewise-constant discharge series with left-closed intervals. Before
/// the first breakpoint the first value applies.
#[derive(Clone, Debug, PartialEq)]
pub struct DischargeSeries {
    points: Vec<(f64, f64)>,
}

impl DischargeSeries {
    pub fn constant(q: f64) -> Result<Self> {
        Self::new(alloc::vec![(0.0, q)])
    }

    /// `points` are `(time s, discharge m³/s)`, strictly increasing in time.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter {
                name: "discharge series length",
                value: 0.0,
            });
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter {
                    name: "discharge series time",
                    value: w[1].0,
                });
            }
        }
        if let Some(&(_, q)) = points.iter().find(|(t, q)| !(*q >= 0.0 && q.is_finite() && t.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "discharge",
                value: q,
            });
        }
        Ok(Self { points })
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.points.partition_point(|(ti, _)| *ti <= t);
        self.points[i.saturating_sub(1)].1
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// A contiguous stretch of one domain side, given as fractions of its length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossSection {
    pub side: Side,
    pub fraction_start: f64,
    pub fraction_end: f64,
}

impl CrossSection {
    pub fn new(side: Side, fraction_start: f64, fraction_end: f64) -> Result<Self> {
        let s = Self {
            side,
            fraction_start,
            fraction_end,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn full(side: Side) -> Self {
        Self {
            side,
            fraction_start: 0.0,
            fraction_end: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.fraction_start, self.fraction_end);
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::InvalidSection { start: a, end: b });
        }
        Ok(())
    }

    /// Cell index range along a side of `len` cells.
    pub fn resolve(&self, len: usize) -> Result<Range<usize>> {
        self.validate()?;
        let start = libm::floor(self.fraction_start * len as f64) as usize;
        let end = (libm::ceil(self.fraction_end * len as f64) as usize).min(len);
        if start >= end {
            return Err(Error::SectionOutsideGrid {
                side: self.side,
                start,
                end,
                len,
            });
        }
        Ok(start..end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InflowSpec {
    pub section: CrossSection,
    pub discharge: DischargeSeries,
    pub slope: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutflowSpec {
    pub section: CrossSection,
    pub slope: f64,
}

impl InflowSpec {
    pub fn validate(&self) -> Result<()> {
        self.section.validate()?;
        positive_slope("inflow slope", self.slope)
    }
}

impl OutflowSpec {
    pub fn validate(&self) -> Result<()> {
        self.section.validate()?;
        positive_slope("outflow slope", self.slope)
    }
}

fn positive_slope(name: &'static str, s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value: s })
    }
}

/// Global `(row, col)` of the cell at position `k` along `side`.
pub fn side_cell(side: Side, k: usize, rows: usize, cols: usize) -> (usize, usize) {
    match side {
        Side::West => (k, 0),
        Side::East => (k, cols - 1),
        Side::North => (0, k),
        Side::South => (rows - 1, k),
    }
}

/// Pairs `(section index, index along the tile border)` for the part of a
/// section of `cells` (positions along `side`) that lies on `tile`.
pub fn tile_portion(side: Side, cells: Range<usize>, tile: &Tile) -> Vec<(usize, usize)> {
    if !tile.on_global_edge(side) {
        return Vec::new();
    }
    let (first, len) = match side {
        Side::West | Side::East => (tile.row0, tile.rows),
        Side::North | Side::South => (tile.col0, tile.cols),
    };
    let lo = cells.start.max(first);
    let hi = cells.end.min(first + len);
    (lo..hi).map(|g| (g - cells.start, g - first)).collect()
}

/// Sets the boundary face of the cell at border position `k`, with positive
/// `q_in` meaning flow into the domain.
fn set_boundary_face(state: &mut State, side: Side, k: usize, q_in: f32) {
    let (rows, cols) = (state.rows(), state.cols());
    match side {
        Side::West => state.set_qx(k, 0, q_in),
        Side::East => state.set_qx(k, cols, -q_in),
        Side::North => state.set_qy(0, k, q_in),
        Side::South => state.set_qy(rows, k, -q_in),
    }
}

/// Inflow boundary as seen by one tile: the whole section's bed (so every
/// tile solves the same level) plus the faces this tile owns.
#[derive(Clone, Debug)]
pub struct InflowBoundary {
    side: Side,
    slope: f64,
    dx: f64,
    series: DischargeSeries,
    section: Vec<(f64, f64)>,
    owned: Vec<(usize, usize)>,
    cached: Option<(f64, Vec<f32>)>,
}

impl InflowBoundary {
    /// `section` holds `(z, n)` of every section cell in order; `owned`
    /// comes from [`tile_portion`].
    pub fn new(spec: &InflowSpec, dx: f64, section: Vec<(f64, f64)>, owned: Vec<(usize, usize)>) -> Result<Self> {
        spec.validate()?;
        if section.is_empty() {
            return Err(Error::SectionOutsideGrid {
                side: spec.section.side,
                start: 0,
                end: 0,
                len: 0,
            });
        }
        Ok(Self {
            side: spec.section.side,
            slope: spec.slope,
            dx,
            series: spec.discharge.clone(),
            section,
            owned,
            cached: None,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.owned.is_empty()
    }

    /// Per-width face fluxes (m²/s) for the discharge in force at `t`,
    /// re-solved only when the discharge changes.
    fn refresh(&mut self, t: f64) -> Result<()> {
        let q = self.series.at(t);
        if matches!(&self.cached, Some((cq, _)) if *cq == q) {
            return Ok(());
        }
        let sol = solve_inflow_level(&self.section, q, self.slope, self.dx)?;
        let per_width = sol.discharge.iter().map(|d| (d / self.dx) as f32).collect();
        self.cached = Some((q, per_width));
        Ok(())
    }

    /// Sets this tile's inflow faces for time `t`; returns the inflow rate
    /// through them in m³/s.
    pub fn apply(&mut self, state: &mut State, t: f64) -> Result<f64> {
        if self.owned.is_empty() {
            return Ok(0.0);
        }
        self.refresh(t)?;
        let fluxes = &self.cached.as_ref().expect("refreshed").1;
        let mut rate = 0.0;
        for &(k, local) in &self.owned {
            let q = fluxes[k];
            set_boundary_face(state, self.side, local, q);
            rate += q as f64 * self.dx;
        }
        Ok(rate)
    }
}

/// Outflow boundary cells owned by one tile.
#[derive(Clone, Debug)]
pub struct OutflowBoundary {
    side: Side,
    slope: f64,
    dx: f64,
    owned: Vec<usize>,
}

impl OutflowBoundary {
    pub fn new(spec: &OutflowSpec, dx: f64, owned: Vec<(usize, usize)>) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            side: spec.section.side,
            slope: spec.slope,
            dx,
            owned: owned.into_iter().map(|(_, local)| local).collect(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.owned.is_empty()
    }

    /// Sets this tile's outflow faces from the current depths; returns the
    /// outflow rate in m³/s. A face never exports more than its cell holds
    /// over `dt`.
    pub fn apply(&self, state: &mut State, bed: &Bed, dt: f32) -> f64 {
        let (rows, cols) = (state.rows(), state.cols());
        let dx32 = self.dx as f32;
        let mut rate = 0.0;
        for &k in &self.owned {
            let (r, c) = side_cell(self.side, k, rows, cols);
            let h = state.depth(r, c);
            let n = bed.n.get(r + 1, c + 1) as f64;
            let q = (manning_flux(h as f64, self.slope, n, self.dx) / self.dx) as f32;
            let mut q = q.min(h * dx32 / dt);
            while q > 0.0 && h - dt * q / dx32 < 0.0 {
                q = q.next_down();
            }
            set_boundary_face(state, self.side, k, -q);
            rate += q as f64 * self.dx;
        }
        rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::kernel::PhysicsParams;
    use crate::topology::Topology;

    #[test]
    fn manning_examples() {
        assert_eq!(manning_flux(0.0, 0.001, 0.03, 10.0), 0.0);
        assert_eq!(manning_flux(1.0, 1.0, 1.0, 1.0), 1.0);
        // frozen from an independent evaluation of (dx/n) h^(5/3) sqrt(S)
        let q = manning_flux(2.0, 0.001, 0.03, 10.0);
        assert!((q - 33.465_352_562_445_49).abs() < 1e-9, "{q}");
    }

    #[test]
    fn zero_discharge_gives_dry_section() {
        let sol = solve_inflow_level(&[(1.0, 0.03), (0.5, 0.03)], 0.0, 0.001, 2.0).unwrap();
        assert_eq!(sol.level, 0.5);
        assert!(sol.discharge.iter().all(|q| *q == 0.0));
    }

    #[test]
    fn unit_inversion() {
        let sol = solve_inflow_level(&[(0.0, 1.0)], 1.0, 1.0, 1.0).unwrap();
        assert!((sol.level - 1.0).abs() < 1e-9);
        assert!((sol.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn three_cell_inversion_against_scan() {
        let cells = [(0.0, 0.03), (0.5, 0.03), (1.0, 0.03)];
        let (q_in, s, dx) = (5.0, 0.001, 2.0);
        let sol = solve_inflow_level(&cells, q_in, s, dx).unwrap();
        assert!((sol.total() - q_in).abs() <= 1e-6 * q_in);
        // Monotone scan in 1 µm steps for the first level reaching q_in.
        let total = |w: f64| -> f64 {
            cells
                .iter()
                .map(|&(z, n)| {
                    let h = (w - z).max(0.0);
                    dx / n * h.powf(5.0 / 3.0) * s.sqrt()
                })
                .sum()
        };
        let mut w = 0.0;
        let mut step = 0.01;
        while step >= 1e-6 {
            while total(w + step) < q_in {
                w += step;
            }
            step /= 10.0;
        }
        assert!((sol.level - w).abs() < 1e-5, "{} vs {}", sol.level, w);
        // cell above the level carries nothing
        assert_eq!(sol.discharge[2] == 0.0, sol.level <= 1.0);
    }

    #[test]
    fn dry_cells_above_level() {
        let cells = [(0.0, 0.03), (10.0, 0.03)];
        let sol = solve_inflow_level(&cells, 3.0, 0.001, 1.0).unwrap();
        assert!(sol.level < 10.0);
        assert_eq!(sol.discharge[1], 0.0);
    }

    #[test]
    fn absurd_discharge_fails_to_bracket() {
        assert!(matches!(
            solve_inflow_level(&[(0.0, 0.03)], 1e300, 0.001, 1.0),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn series_is_left_closed() {
        let s = DischargeSeries::new(vec![(0.0, 1.0), (10.0, 2.0), (20.0, 0.0)]).unwrap();
        assert_eq!(s.at(-1.0), 1.0);
        assert_eq!(s.at(0.0), 1.0);
        assert_eq!(s.at(9.999), 1.0);
        assert_eq!(s.at(10.0), 2.0);
        assert_eq!(s.at(25.0), 0.0);
        assert!(DischargeSeries::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(DischargeSeries::constant(-1.0).is_err());
    }

    #[test]
    fn section_resolution() {
        let s = CrossSection::new(Side::West, 0.25, 0.5).unwrap();
        assert_eq!(s.resolve(8).unwrap(), 2..4);
        assert_eq!(CrossSection::full(Side::North).resolve(5).unwrap(), 0..5);
        assert!(CrossSection::new(Side::West, 0.5, 0.5).is_err());
        assert!(CrossSection::new(Side::West, -0.1, 0.5).is_err());
    }

    #[test]
    fn tile_portions_partition_the_section() {
        let topo = Topology::build(8, 8, 2, 2).unwrap();
        let mut seen = Vec::new();
        for tile in &topo.tiles {
            for (k, local) in tile_portion(Side::West, 2..7, tile) {
                assert_eq!(tile.row0 + local, 2 + k);
                seen.push(k);
            }
        }
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn inflow_sets_inward_faces() {
        let spec = InflowSpec {
            section: CrossSection::full(Side::East),
            discharge: DischargeSeries::constant(2.0).unwrap(),
            slope: 1.0,
        };
        let mut b = InflowBoundary::new(&spec, 1.0, vec![(0.0, 1.0), (0.0, 1.0)], vec![(0, 0), (1, 1)]).unwrap();
        let mut st = State::new(2, 3);
        let rate = b.apply(&mut st, 0.0).unwrap();
        assert!((rate - 2.0).abs() < 1e-6);
        assert!(st.qx(0, 3) < 0.0 && st.qx(1, 3) < 0.0);
        assert!((st.qx(0, 3) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_inflow_leaves_dry_domain_dry() {
        let spec = InflowSpec {
            section: CrossSection::full(Side::West),
            discharge: DischargeSeries::constant(0.0).unwrap(),
            slope: 0.001,
        };
        let mut b = InflowBoundary::new(&spec, 1.0, vec![(0.0, 0.03)], vec![(0, 0)]).unwrap();
        let mut st = State::new(1, 1);
        assert_eq!(b.apply(&mut st, 5.0).unwrap(), 0.0);
        assert_eq!(st.qx(0, 0), 0.0);
    }

    #[test]
    fn outflow_unit_manning_and_dry() {
        let spec = OutflowSpec {
            section: CrossSection::full(Side::East),
            slope: 1.0,
        };
        let bed = Bed::from_grid(1, 2, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let out = OutflowBoundary::new(&spec, 1.0, vec![(0, 0)]).unwrap();
        let mut st = State::with_depth(1, 2, &[0.0, 1.0]).unwrap();
        let rate = out.apply(&mut st, &bed, 0.01);
        assert!((st.qx(0, 2) - 1.0).abs() < 1e-6);
        assert!((rate - 1.0).abs() < 1e-6);

        let mut dry = State::new(1, 2);
        assert_eq!(out.apply(&mut dry, &bed, 0.01), 0.0);
        assert_eq!(dry.qx(0, 2), 0.0);
    }

    #[test]
    fn outflow_cannot_overdraw() {
        let spec = OutflowSpec {
            section: CrossSection::full(Side::South),
            slope: 0.5,
        };
        let bed = Bed::from_grid(1, 3, &[0.0; 3], &[0.01; 3]).unwrap();
        let out = OutflowBoundary::new(&spec, 3.0, vec![(0, 0), (1, 1), (2, 2)]).unwrap();
        let mut st = State::with_depth(1, 3, &[0.3, 1e-4, 2.0]).unwrap();
        let p = PhysicsParams {
            dt: 50.0,
            dx: 3.0,
            ..Default::default()
        };
        out.apply(&mut st, &bed, p.dt);
        let clamped = st.update_depth(&p, p.dt).unwrap();
        assert_eq!(clamped, 0.0);
        assert!((0..3).all(|c| st.depth(0, c) >= 0.0));
    }
}
