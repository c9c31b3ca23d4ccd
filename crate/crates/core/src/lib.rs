//! Inertial shallow-water flood kernel on a staggered grid.
//!
//! Everything in this crate is pure computation over owned buffers and runs
//! without `std`: raster transforms, the per-step flux/depth update, Manning
//! inflow and outflow boundaries, tiling of the grid into worker subdomains,
//! the fixed-step schedule, mass bookkeeping and scaling-efficiency
//! arithmetic. File formats, threads and the CLI live in the `floodsim` crate.
//!
//! Grid conventions: rows run north to south, columns west to east. Depth `h`
//! sits at cell centres; `qx` sits on the faces between horizontally adjacent
//! cells (positive eastwards) and `qy` on the faces between vertically
//! adjacent cells (positive southwards). Fluxes are discharge per unit width
//! in m²/s.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod boundary;
pub mod error;
pub mod field;
pub mod kernel;
pub mod ledger;
pub mod raster;
pub mod scaling;
pub mod schedule;
pub mod subdomain;
pub mod topology;

pub use error::{Error, Result};
pub use field::Field;
pub use kernel::{PhysicsParams, State, GRAVITY};
pub use raster::{PadRecord, Raster};
pub use topology::{FieldTag, HaloPacket, Side, Tile, Topology};
