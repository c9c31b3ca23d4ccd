//! Equal-tile partitioning of the padded grid and the halo packet format.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    West,
    East,
    North,
    South,
}

impl Side {
    /// Fixed processing order for every exchange.
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::North, Side::South];

    pub fn opposite(self) -> Side {
        match self {
            Side::West => Side::East,
            Side::East => Side::West,
            Side::North => Side::South,
            Side::South => Side::North,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::West => "west",
            Side::East => "east",
            Side::North => "north",
            Side::South => "south",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldTag {
    H,
    Qx,
    Qy,
}

impl fmt::Display for FieldTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldTag::H => "h",
            FieldTag::Qx => "qx",
            FieldTag::Qy => "qy",
        })
    }
}

/// One worker's subgrid, in global cell coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tile {
    pub id: usize,
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    /// Neighbour tile ids indexed by [`Side::index`]; `None` on the global edge.
    pub neighbors: [Option<usize>; 4],
}

impl Tile {
    #[inline]
    pub fn neighbor(&self, side: Side) -> Option<usize> {
        self.neighbors[side.index()]
    }

    #[inline]
    pub fn on_global_edge(&self, side: Side) -> bool {
        self.neighbor(side).is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub rows: usize,
    pub cols: usize,
    /// Tiles across the x axis (columns).
    pub cx: usize,
    /// Tiles across the y axis (rows).
    pub cy: usize,
    /// Row-major: tile `(ty, tx)` has id `ty * cx + tx`.
    pub tiles: Vec<Tile>,
}

impl Topology {
    pub fn build(rows: usize, cols: usize, cx: usize, cy: usize) -> Result<Self> {
        if cx == 0 || cy == 0 || rows == 0 || cols == 0 || rows % cy != 0 || cols % cx != 0 {
            return Err(Error::NotDivisible { rows, cols, cx, cy });
        }
        let (tr, tc) = (rows / cy, cols / cx);
        let mut tiles = Vec::with_capacity(cx * cy);
        for ty in 0..cy {
            for tx in 0..cx {
                let id = ty * cx + tx;
                tiles.push(Tile {
                    id,
                    row0: ty * tr,
                    col0: tx * tc,
                    rows: tr,
                    cols: tc,
                    neighbors: [
                        (tx > 0).then(|| id - 1),
                        (tx + 1 < cx).then(|| id + 1),
                        (ty > 0).then(|| id - cx),
                        (ty + 1 < cy).then(|| id + cx),
                    ],
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            cx,
            cy,
            tiles,
        })
    }

    pub fn workers(&self) -> usize {
        self.tiles.len()
    }

    pub fn tile_rows(&self) -> usize {
        self.rows / self.cy
    }

    pub fn tile_cols(&self) -> usize {
        self.cols / self.cx
    }
}

/// A `cx x cy` factorisation of a worker count with its communication cost
/// proxies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub cx: usize,
    pub cy: usize,
    /// Number of tile pairs that share a border.
    pub neighbor_links: usize,
}

impl Layout {
    pub fn new(cx: usize, cy: usize) -> Self {
        Self {
            cx,
            cy,
            neighbor_links: (cx - 1) * cy + cx * (cy - 1),
        }
    }

    pub fn workers(&self) -> usize {
        self.cx * self.cy
    }

    /// Cells on internal tile borders of a `rows x cols` grid: the length
    /// of all cuts, i.e. the halo volume exchanged per field per step.
    pub fn cut_cells(&self, rows: usize, cols: usize) -> usize {
        (self.cx - 1) * rows + (self.cy - 1) * cols
    }

    pub fn is_strip(&self) -> bool {
        self.cx == 1 || self.cy == 1
    }
}

/// All factorisations `cx * cy = workers`, ordered by increasing `cx`.
pub fn enumerate_layouts(workers: usize) -> Vec<Layout> {
    (1..=workers)
        .filter(|cx| workers % cx == 0)
        .map(|cx| Layout::new(cx, workers / cx))
        .collect()
}

/// A one-cell-deep border strip sent to a neighbour.
#[derive(Clone, Debug, PartialEq)]
pub struct HaloPacket {
    pub source: usize,
    /// Side of the *sender's* tile the strip was taken from.
    pub side: Side,
    pub field: FieldTag,
    /// Time level the strip is valid at.
    pub step: u64,
    pub payload: Vec<f32>,
}

impl HaloPacket {
    /// Sentinel step marking an abort notice rather than data.
    pub const ABORT: u64 = u64::MAX;

    pub fn abort(source: usize, side: Side) -> Self {
        Self {
            source,
            side,
            field: FieldTag::H,
            step: Self::ABORT,
            payload: Vec::new(),
        }
    }

    pub fn is_abort(&self) -> bool {
        self.step == Self::ABORT
    }

    /// Validates a packet received on the receiver's `recv_side`.
    pub fn check(&self, recv_side: Side, field: FieldTag, step: u64, len: usize) -> Result<()> {
        if self.is_abort() {
            return Err(Error::HaloAborted { side: recv_side });
        }
        if self.field != field || self.step != step || self.side != recv_side.opposite() {
            return Err(Error::HaloProtocol {
                side: recv_side,
                field: self.field,
                expected_step: step,
                got_step: self.step,
            });
        }
        if self.payload.len() != len {
            return Err(Error::HaloLength {
                side: recv_side,
                expected: len,
                got: self.payload.len(),
            });
        }
        Ok(())
    }
}
