use core::fmt;

use crate::topology::{FieldTag, Side};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Raster or field dimensions do not match the payload.
    Dimensions { rows: usize, cols: usize, len: usize },
    InvalidCellSize(f64),
    /// A nodata or non-finite value inside the simulation domain.
    MissingElevation { row: usize, col: usize },
    ZeroFactor,
    InvalidParameter { name: &'static str, value: f64 },
    NotDivisible { rows: usize, cols: usize, cx: usize, cy: usize },
    /// A kernel update produced NaN or infinity.
    Unstable { field: FieldTag, row: usize, col: usize },
    /// The inflow level could not be bracketed.
    Bracket { discharge: f64 },
    InvalidSection { start: f64, end: f64 },
    SectionOutsideGrid { side: Side, start: usize, end: usize, len: usize },
    /// A halo packet arrived out of protocol.
    HaloProtocol {
        side: Side,
        field: FieldTag,
        expected_step: u64,
        got_step: u64,
    },
    HaloLength { side: Side, expected: usize, got: usize },
    /// A neighbour aborted or hung up mid-exchange.
    HaloAborted { side: Side },
    /// Division by a zero time or worker count.
    ZeroDenominator(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimensions { rows, cols, len } => {
                write!(f, "{rows}x{cols} grid does not match payload of {len} values")
            }
            Error::InvalidCellSize(c) => write!(f, "cell size must be positive, got {c}"),
            Error::MissingElevation { row, col } => {
                write!(f, "missing elevation inside domain at row {row}, col {col}")
            }
            Error::ZeroFactor => write!(f, "downsample factor must be at least 1"),
            Error::InvalidParameter { name, value } => write!(f, "invalid {name}: {value}"),
            Error::NotDivisible { rows, cols, cx, cy } => write!(
                f,
                "{rows}x{cols} grid cannot be split into {cx} columns by {cy} rows of equal tiles"
            ),
            Error::Unstable { field, row, col } => write!(
                f,
                "non-finite {field} at face/cell ({row}, {col}); time step too large"
            ),
            Error::Bracket { discharge } => {
                write!(f, "cannot bracket an inflow level for discharge {discharge} m3/s")
            }
            Error::InvalidSection { start, end } => {
                write!(f, "cross-section fractions must satisfy 0 <= {start} < {end} <= 1")
            }
            Error::SectionOutsideGrid {
                side,
                start,
                end,
                len,
            } => write!(f, "{side} section {start}..{end} outside boundary of length {len}"),
            Error::HaloProtocol {
                side,
                field,
                expected_step,
                got_step,
            } => write!(
                f,
                "halo protocol violation on {side} side: {field} packet for step {got_step}, expected {expected_step}"
            ),
            Error::HaloLength {
                side,
                expected,
                got,
            } => write!(f, "halo strip from {side} has {got} values, expected {expected}"),
            Error::HaloAborted { side } => write!(f, "neighbour on {side} side aborted"),
            Error::ZeroDenominator(what) => write!(f, "{what} must be nonzero"),
        }
    }
}

impl core::error::Error for Error {}
