//! One worker's share of the grid and the fixed per-step sequence it runs:
//! flux halo exchange, flux update, boundary faces, depth update, depth halo
//! exchange.

use alloc::vec::Vec;

use crate::boundary::{side_cell, tile_portion, InflowBoundary, InflowSpec, OutflowBoundary, OutflowSpec};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::{Bed, GlobalEdges, Phase, PhysicsParams, State};
use crate::ledger::StepFlows;
use crate::raster::PadRecord;
use crate::topology::{Side, Tile, Topology};

/// Moves ghost strips between neighbouring subdomains.
///
/// `level` is the time level the exchanged values belong to. An
/// implementation must return only once every ghost strip on a side with a
/// neighbour holds that neighbour's current border.
pub trait HaloExchange {
    fn exchange(&mut self, state: &mut State, phase: Phase, level: u64) -> Result<()>;
}

/// Exchange for a tile with no neighbours.
#[derive(Clone, Copy, Debug, Default)]
pub struct Isolated;

impl HaloExchange for Isolated {
    fn exchange(&mut self, _state: &mut State, _phase: Phase, _level: u64) -> Result<()> {
        Ok(())
    }
}

/// Whole-grid inputs, already padded to the partition.
#[derive(Clone, Debug)]
pub struct GlobalGrid {
    pub rows: usize,
    pub cols: usize,
    pub z: Vec<f32>,
    pub n: Vec<f32>,
    pub h0: Vec<f32>,
    /// Unpadded extent; boundary sections are measured along it.
    pub extent: PadRecord,
}

impl GlobalGrid {
    pub fn validate(&self) -> Result<()> {
        let len = self.rows * self.cols;
        for v in [&self.z, &self.n, &self.h0] {
            if v.len() != len || len == 0 {
                return Err(Error::Dimensions {
                    rows: self.rows,
                    cols: self.cols,
                    len: v.len(),
                });
            }
        }
        Ok(())
    }

    fn side_len(&self, side: Side) -> usize {
        match side {
            Side::West | Side::East => self.extent.orig_rows,
            Side::North | Side::South => self.extent.orig_cols,
        }
    }

    /// Copies the tile's cells plus a one-cell ring; the ring holds
    /// neighbouring cells or, on the domain edge, the nearest edge cell.
    fn tile_window(&self, values: &[f32], tile: &Tile) -> Field {
        let mut f = Field::zeros(tile.rows + 2, tile.cols + 2);
        for sr in 0..tile.rows + 2 {
            let r = (tile.row0 + sr).saturating_sub(1).min(self.rows - 1);
            for sc in 0..tile.cols + 2 {
                let c = (tile.col0 + sc).saturating_sub(1).min(self.cols - 1);
                f.set(sr, sc, values[r * self.cols + c]);
            }
        }
        f
    }
}

#[derive(Clone, Debug)]
pub struct Subdomain {
    pub tile: Tile,
    pub edges: GlobalEdges,
    pub state: State,
    pub bed: Bed,
    pub params: PhysicsParams,
    inflow: Option<InflowBoundary>,
    outflow: Option<OutflowBoundary>,
}

impl Subdomain {
    /// Refreshes depth ghosts at `level` before the first step.
    pub fn prime<X: HaloExchange>(&mut self, ex: &mut X, level: u64) -> Result<()> {
        self.state.fill_global_ghosts(self.edges);
        ex.exchange(&mut self.state, Phase::Depth, level)
    }

    /// Advances from `level` to `level + 1`, starting at time `t` with step
    /// length `dt`. Returns the boundary and clamp volumes of this tile.
    pub fn step<X: HaloExchange>(&mut self, ex: &mut X, level: u64, t: f64, dt: f32) -> Result<StepFlows> {
        ex.exchange(&mut self.state, Phase::Flux, level)?;
        self.state.update_flux(&self.bed, &self.params, dt, self.edges)?;
        let dt64 = dt as f64;
        let inflow = match self.inflow.as_mut() {
            Some(b) => b.apply(&mut self.state, t)? * dt64,
            None => 0.0,
        };
        let outflow = match self.outflow.as_ref() {
            Some(b) => b.apply(&mut self.state, &self.bed, dt) * dt64,
            None => 0.0,
        };
        let clamped = self.state.update_depth(&self.params, dt)?;
        self.state.fill_global_ghosts(self.edges);
        ex.exchange(&mut self.state, Phase::Depth, level + 1)?;
        Ok(StepFlows {
            inflow,
            outflow,
            clamped,
        })
    }

    /// Stored water on this tile, m³.
    pub fn volume(&self) -> f64 {
        let dx = self.params.dx as f64;
        self.state.depth_sum() * dx * dx
    }
}

/// Splits a grid into one [`Subdomain`] per tile of `topo`.
pub fn decompose(
    grid: &GlobalGrid,
    topo: &Topology,
    params: PhysicsParams,
    inflow: Option<&InflowSpec>,
    outflow: Option<&OutflowSpec>,
) -> Result<Vec<Subdomain>> {
    grid.validate()?;
    params.validate()?;
    if topo.rows != grid.rows || topo.cols != grid.cols {
        return Err(Error::NotDivisible {
            rows: grid.rows,
            cols: grid.cols,
            cx: topo.cx,
            cy: topo.cy,
        });
    }
    let dx = params.dx as f64;

    let inflow_cells = match inflow {
        Some(spec) => {
            spec.validate()?;
            let range = spec.section.resolve(grid.side_len(spec.section.side))?;
            let section: Vec<(f64, f64)> = range
                .clone()
                .map(|k| {
                    let (r, c) = side_cell(spec.section.side, k, grid.rows, grid.cols);
                    let i = r * grid.cols + c;
                    (grid.z[i] as f64, grid.n[i] as f64)
                })
                .collect();
            Some((spec, range, section))
        }
        None => None,
    };
    let outflow_cells = match outflow {
        Some(spec) => {
            spec.validate()?;
            let range = spec.section.resolve(grid.side_len(spec.section.side))?;
            Some((spec, range))
        }
        None => None,
    };

    let mut subs = Vec::with_capacity(topo.workers());
    for tile in &topo.tiles {
        let edges = GlobalEdges {
            west: tile.on_global_edge(Side::West),
            east: tile.on_global_edge(Side::East),
            north: tile.on_global_edge(Side::North),
            south: tile.on_global_edge(Side::South),
        };
        let bed = Bed::new(grid.tile_window(&grid.z, tile), grid.tile_window(&grid.n, tile))?;
        let h = grid.tile_window(&grid.h0, tile);
        let inner = h.window(1, 1, tile.rows, tile.cols);
        let mut state = State::with_depth(tile.rows, tile.cols, inner.as_slice())?;
        for side in Side::ALL {
            if !tile.on_global_edge(side) {
                let strip = ghost_of(&h, side, tile);
                state.set_ghost(crate::topology::FieldTag::H, side, &strip)?;
            }
        }

        let inflow = match &inflow_cells {
            Some((spec, range, section)) => {
                let owned = tile_portion(spec.section.side, range.clone(), tile);
                Some(InflowBoundary::new(spec, dx, section.clone(), owned)?).filter(|b| !b.is_empty())
            }
            None => None,
        };
        let outflow = match &outflow_cells {
            Some((spec, range)) => {
                let owned = tile_portion(spec.section.side, range.clone(), tile);
                Some(OutflowBoundary::new(spec, dx, owned)?).filter(|b| !b.is_empty())
            }
            None => None,
        };
        subs.push(Subdomain {
            tile: tile.clone(),
            edges,
            state,
            bed,
            params,
            inflow,
            outflow,
        });
    }
    Ok(subs)
}

fn ghost_of(h: &Field, side: Side, tile: &Tile) -> Vec<f32> {
    match side {
        Side::West => (1..=tile.rows).map(|r| h.get(r, 0)).collect(),
        Side::East => (1..=tile.rows).map(|r| h.get(r, tile.cols + 1)).collect(),
        Side::North => h.row(0)[1..=tile.cols].to_vec(),
        Side::South => h.row(tile.rows + 1)[1..=tile.cols].to_vec(),
    }
}

/// Whole-grid dynamic fields assembled from the tiles.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalFields {
    /// `rows x cols`
    pub h: Field,
    /// `rows x (cols+1)`
    pub qx: Field,
    /// `(rows+1) x cols`
    pub qy: Field,
}

impl GlobalFields {
    pub fn gather<'a>(topo: &Topology, states: impl IntoIterator<Item = (&'a Tile, &'a State)>) -> Self {
        let mut h = Field::zeros(topo.rows, topo.cols);
        let mut qx = Field::zeros(topo.rows, topo.cols + 1);
        let mut qy = Field::zeros(topo.rows + 1, topo.cols);
        for (tile, state) in states {
            h.paste(tile.row0, tile.col0, &state.depth_field());
            qx.paste(tile.row0, tile.col0, &state.qx_field());
            qy.paste(tile.row0, tile.col0, &state.qy_field());
        }
        Self { h, qx, qy }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{CrossSection, DischargeSeries};
    use alloc::vec;

    fn grid(rows: usize, cols: usize, z: impl Fn(usize, usize) -> f32, h: f32) -> GlobalGrid {
        GlobalGrid {
            rows,
            cols,
            z: (0..rows * cols).map(|i| z(i / cols, i % cols)).collect(),
            n: vec![0.03; rows * cols],
            h0: vec![h; rows * cols],
            extent: PadRecord::none(rows, cols),
        }
    }

    #[test]
    fn closed_lake_at_rest_unchanged() {
        let g = grid(8, 8, |r, c| ((r * 3 + c * 5) % 7) as f32 * 0.25, 0.0);
        let mut g = g;
        g.h0 = g.z.iter().map(|z| 4.0 - z).collect();
        let topo = Topology::build(8, 8, 1, 1).unwrap();
        let mut subs = decompose(&g, &topo, PhysicsParams::default(), None, None).unwrap();
        let sub = &mut subs[0];
        let before = sub.state.clone();
        sub.prime(&mut Isolated, 0).unwrap();
        for k in 0..1000 {
            let f = sub.step(&mut Isolated, k, k as f64 * 0.1, 0.1).unwrap();
            assert_eq!(f, StepFlows::default());
        }
        assert_eq!(sub.state.depth_field(), before.depth_field());
        assert_eq!(sub.state.qx_field().max_abs(), 0.0);
        assert_eq!(sub.state.qy_field().max_abs(), 0.0);
    }

    #[test]
    fn boundaries_only_on_owning_tiles() {
        let g = grid(8, 8, |_, _| 0.0, 0.0);
        let topo = Topology::build(8, 8, 2, 2).unwrap();
        let inflow = InflowSpec {
            section: CrossSection::new(Side::West, 0.0, 0.25).unwrap(),
            discharge: DischargeSeries::constant(1.0).unwrap(),
            slope: 0.001,
        };
        let outflow = OutflowSpec {
            section: CrossSection::full(Side::South),
            slope: 0.001,
        };
        let subs = decompose(&g, &topo, PhysicsParams::default(), Some(&inflow), Some(&outflow)).unwrap();
        let with_in: Vec<usize> = subs.iter().filter(|s| s.inflow.is_some()).map(|s| s.tile.id).collect();
        let with_out: Vec<usize> = subs.iter().filter(|s| s.outflow.is_some()).map(|s| s.tile.id).collect();
        assert_eq!(with_in, vec![0]);
        assert_eq!(with_out, vec![2, 3]);
    }

    #[test]
    fn single_tile_inflow_fills_closed_basin() {
        let g = grid(4, 6, |_, _| 0.0, 0.0);
        let topo = Topology::build(4, 6, 1, 1).unwrap();
        let inflow = InflowSpec {
            section: CrossSection::full(Side::West),
            discharge: DischargeSeries::constant(2.0).unwrap(),
            slope: 0.01,
        };
        let params = PhysicsParams {
            dx: 5.0,
            dt: 0.5,
            ..Default::default()
        };
        let mut subs = decompose(&g, &topo, params, Some(&inflow), None).unwrap();
        let s = &mut subs[0];
        let mut total = StepFlows::default();
        for k in 0..200 {
            total += s.step(&mut Isolated, k, k as f64 * 0.5, 0.5).unwrap();
        }
        assert!((total.inflow - 2.0 * 100.0).abs() < 1e-3 * 200.0);
        let residual = s.volume() - (total.inflow - total.outflow - total.clamped);
        assert!(residual.abs() <= 1e-6 * s.volume(), "{residual}");
    }

    #[test]
    fn gather_reassembles_tiles() {
        let mut g = grid(4, 4, |_, _| 0.0, 0.0);
        g.h0 = (0..16).map(|v| v as f32).collect();
        let topo = Topology::build(4, 4, 2, 2).unwrap();
        let subs = decompose(&g, &topo, PhysicsParams::default(), None, None).unwrap();
        let f = GlobalFields::gather(&topo, subs.iter().map(|s| (&s.tile, &s.state)));
        assert_eq!(f.h.as_slice(), g.h0.as_slice());
        // interior ghosts were seeded from the neighbours
        assert_eq!(subs[0].state.raw(crate::topology::FieldTag::H).get(1, 3), 2.0);
    }
}
