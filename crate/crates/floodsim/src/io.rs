//! Raster file formats.
//!
//! * ESRI ASCII grid: `ncols`, `nrows`, `xllcorner`/`xllcenter`,
//!   `yllcorner`/`yllcenter`, `cellsize` and optional `NODATA_value`
//!   header lines, then row-major values, north row first.
//! * Raw: little-endian `f32` payload of `rows * cols` values plus a text
//!   sidecar `<payload>.hdr` with `rows`, `cols`, `cell_size`, `nodata`,
//!   `origin_x`, `origin_y` lines.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use floodsim_core::raster::DEFAULT_NODATA;
use floodsim_core::Raster;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RasterFormat {
    AsciiGrid,
    RawF32,
}

impl RasterFormat {
    /// `.asc`/`.txt` are ASCII grids, anything else raw.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "asc" || ext == "txt" => RasterFormat::AsciiGrid,
            _ => RasterFormat::RawF32,
        }
    }
}

impl FromStr for RasterFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ascii_grid" | "ascii" | "asc" => Ok(RasterFormat::AsciiGrid),
            "raw_f32" | "raw" | "r32" => Ok(RasterFormat::RawF32),
            other => Err(format!("unknown raster format `{other}` (ascii_grid | raw_f32)")),
        }
    }
}

pub fn load_raster(path: impl AsRef<Path>, format: RasterFormat) -> Result<Raster> {
    let path = path.as_ref();
    match format {
        RasterFormat::AsciiGrid => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_ascii_grid(&text).map_err(|msg| Error::parse(path, msg))
        }
        RasterFormat::RawF32 => load_raw(path),
    }
}

pub fn write_raster(r: &Raster, path: impl AsRef<Path>, format: RasterFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        RasterFormat::AsciiGrid => fs::write(path, format_ascii_grid(r)).map_err(|e| Error::io(path, e)),
        RasterFormat::RawF32 => write_raw(r, path),
    }
}

/// Sidecar header path for a raw payload.
pub fn header_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

#[derive(Default)]
struct Header {
    rows: Option<usize>,
    cols: Option<usize>,
    cell_size: Option<f64>,
    nodata: Option<f32>,
    x: Option<f64>,
    y: Option<f64>,
    centered: bool,
}

impl Header {
    fn finish(self, values: Vec<f32>) -> Result<Raster, String> {
        let rows = self.rows.ok_or("missing nrows")?;
        let cols = self.cols.ok_or("missing ncols")?;
        let cell = self.cell_size.ok_or("missing cellsize")?;
        let (mut x, mut y) = (self.x.unwrap_or(0.0), self.y.unwrap_or(0.0));
        if self.centered {
            x -= cell / 2.0;
            y -= cell / 2.0;
        }
        Raster::new(rows, cols, cell, values)
            .map(|r| r.with_origin(x, y).with_nodata(self.nodata.unwrap_or(DEFAULT_NODATA)))
            .map_err(|e| e.to_string())
    }
}

fn parse_num<T: FromStr>(key: &str, v: Option<&str>) -> Result<T, String> {
    v.ok_or_else(|| format!("{key} has no value"))?
        .parse()
        .map_err(|_| format!("bad {key} value"))
}

pub fn parse_ascii_grid(text: &str) -> Result<Raster, String> {
    let mut h = Header::default();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        let mut tok = line.split_whitespace();
        let Some(key) = tok.next() else {
            lines.next();
            continue;
        };
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let key = key.to_ascii_lowercase();
        let value = tok.next();
        match key.as_str() {
            "ncols" => h.cols = Some(parse_num(&key, value)?),
            "nrows" => h.rows = Some(parse_num(&key, value)?),
            "xllcorner" => h.x = Some(parse_num(&key, value)?),
            "yllcorner" => h.y = Some(parse_num(&key, value)?),
            "xllcenter" => {
                h.x = Some(parse_num(&key, value)?);
                h.centered = true;
            }
            "yllcenter" => {
                h.y = Some(parse_num(&key, value)?);
                h.centered = true;
            }
            "cellsize" => h.cell_size = Some(parse_num(&key, value)?),
            "nodata_value" => h.nodata = Some(parse_num(&key, value)?),
            other => return Err(format!("unknown header key `{other}`")),
        }
        lines.next();
    }
    let mut values = Vec::with_capacity(h.rows.unwrap_or(0) * h.cols.unwrap_or(0));
    for (lineno, line) in lines {
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f32>()
                    .map_err(|_| format!("line {}: bad value `{tok}`", lineno + 1))?,
            );
        }
    }
    h.finish(values)
}

pub fn format_ascii_grid(r: &Raster) -> String {
    let mut out = String::with_capacity(r.len() * 8 + 128);
    let _ = writeln!(out, "ncols {}", r.cols);
    let _ = writeln!(out, "nrows {}", r.rows);
    let _ = writeln!(out, "xllcorner {}", r.origin_x);
    let _ = writeln!(out, "yllcorner {}", r.origin_y);
    let _ = writeln!(out, "cellsize {}", r.cell_size);
    let _ = writeln!(out, "NODATA_value {}", r.nodata);
    for row in r.values.chunks(r.cols) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

fn load_raw(path: &Path) -> Result<Raster> {
    let hdr_path = header_path(path);
    let text = fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let mut h = Header::default();
    for line in text.lines() {
        let mut tok = line.split_whitespace();
        let Some(key) = tok.next() else { continue };
        let value = tok.next();
        let parsed: Result<(), String> = (|| {
            match key {
                "rows" => h.rows = Some(parse_num(key, value)?),
                "cols" => h.cols = Some(parse_num(key, value)?),
                "cell_size" => h.cell_size = Some(parse_num(key, value)?),
                "nodata" => h.nodata = Some(parse_num(key, value)?),
                "origin_x" => h.x = Some(parse_num(key, value)?),
                "origin_y" => h.y = Some(parse_num(key, value)?),
                other => return Err(format!("unknown header key `{other}`")),
            }
            Ok(())
        })();
        parsed.map_err(|msg| Error::parse(&hdr_path, msg))?;
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = h.rows.unwrap_or(0) * h.cols.unwrap_or(0) * 4;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            format!("payload has {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    h.finish(values).map_err(|msg| Error::parse(&hdr_path, msg))
}

fn write_raw(r: &Raster, path: &Path) -> Result<()> {
    let mut header = String::new();
    let _ = writeln!(header, "rows {}", r.rows);
    let _ = writeln!(header, "cols {}", r.cols);
    let _ = writeln!(header, "cell_size {}", r.cell_size);
    let _ = writeln!(header, "nodata {}", r.nodata);
    let _ = writeln!(header, "origin_x {}", r.origin_x);
    let _ = writeln!(header, "origin_y {}", r.origin_y);
    let payload: Vec<u8> = r.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, payload).map_err(|e| Error::io(path, e))?;
    let hdr = header_path(path);
    fs::write(&hdr, header).map_err(|e| Error::io(&hdr, e))
}
