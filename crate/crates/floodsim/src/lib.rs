//! Runs the `floodsim-core` kernel on real inputs: raster files, TOML run
//! configs, a thread-per-tile worker pool and the scaling benchmark.

pub mod bench;
pub mod config;
pub mod driver;
pub mod error;
pub mod io;
pub mod pool;
pub mod report;

pub use config::SimConfig;
pub use driver::{run_simulation, simulate, OutputOptions, RunReport, Scenario};
pub use error::{Error, Result};
pub use pool::Pool;
