//! Georeferenced single-band rasters and the grid transforms applied to them
//! before a run: block-mean downsampling, padding to a tileable size and
//! cropping back.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DEFAULT_NODATA: f32 = -9999.0;

/// Row-major `f32` raster. Row 0 is the northern edge; `origin_x`/`origin_y`
/// locate the lower-left (south-west) corner.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub nodata: f32,
    pub origin_x: f64,
    pub origin_y: f64,
    pub values: Vec<f32>,
}

/// Original extent of a raster that was padded for partitioning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PadRecord {
    pub orig_rows: usize,
    pub orig_cols: usize,
    pub padded_rows: usize,
    pub padded_cols: usize,
}

impl Raster {
    pub fn new(rows: usize, cols: usize, cell_size: f64, values: Vec<f32>) -> Result<Self> {
        let r = Self {
            rows,
            cols,
            cell_size,
            nodata: DEFAULT_NODATA,
            origin_x: 0.0,
            origin_y: 0.0,
            values,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn filled(rows: usize, cols: usize, cell_size: f64, value: f32) -> Result<Self> {
        Self::new(rows, cols, cell_size, alloc::vec![value; rows * cols])
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        cell_size: f64,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::new(rows, cols, cell_size, values)
    }

    pub fn with_origin(mut self, x: f64, y: f64) -> Self {
        self.origin_x = x;
        self.origin_y = y;
        self
    }

    pub fn with_nodata(mut self, nodata: f32) -> Self {
        self.nodata = nodata;
        self
    }

    /// Checks the structural invariants: nonempty, positive cell size and a
    /// payload of exactly `rows * cols` values.
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.values.len() != self.rows * self.cols {
            return Err(Error::Dimensions {
                rows: self.rows,
                cols: self.cols,
                len: self.values.len(),
            });
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidCellSize(self.cell_size));
        }
        Ok(())
    }

    /// Structural checks plus: every cell carries a finite, non-nodata value.
    pub fn validate_dem(&self) -> Result<()> {
        self.validate()?;
        match self
            .values
            .iter()
            .position(|v| self.is_nodata(*v) || !v.is_finite())
        {
            Some(i) => Err(Error::MissingElevation {
                row: i / self.cols,
                col: i % self.cols,
            }),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn is_nodata(&self, v: f32) -> bool {
        v == self.nodata
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same georeferencing, new payload of the same shape.
    pub fn with_values(&self, values: Vec<f32>) -> Result<Self> {
        let mut r = self.clone();
        r.values = values;
        r.validate()?;
        Ok(r)
    }

    /// Grows the raster to `rows x cols` by replicating the last row and
    /// column. The south-west origin moves down by the added rows.
    pub fn pad_to(&self, rows: usize, cols: usize) -> Raster {
        debug_assert!(rows >= self.rows && cols >= self.cols);
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let src = &self.values[r.min(self.rows - 1) * self.cols..][..self.cols];
            values.extend_from_slice(src);
            let last = src[self.cols - 1];
            values.extend(core::iter::repeat_n(last, cols - self.cols));
        }
        Raster {
            rows,
            cols,
            cell_size: self.cell_size,
            nodata: self.nodata,
            origin_x: self.origin_x,
            origin_y: self.origin_y - (rows - self.rows) as f64 * self.cell_size,
            values,
        }
    }

    /// Pads rows up to a multiple of `cy` and columns up to a multiple of `cx`
    /// by edge replication.
    pub fn pad_to_divisible(&self, cx: usize, cy: usize) -> Result<(Raster, PadRecord)> {
        if cx == 0 || cy == 0 {
            return Err(Error::InvalidParameter {
                name: "partition count",
                value: 0.0,
            });
        }
        let rows = self.rows.div_ceil(cy) * cy;
        let cols = self.cols.div_ceil(cx) * cx;
        let record = PadRecord {
            orig_rows: self.rows,
            orig_cols: self.cols,
            padded_rows: rows,
            padded_cols: cols,
        };
        Ok((self.pad_to(rows, cols), record))
    }

    /// Block-mean downsampling by an integer factor.
    ///
    /// Each output cell is the mean of a `factor x factor` block, accumulated
    /// in `f64` in row-major order over the block and rounded once to `f32`.
    /// Nodata inputs are skipped; an all-nodata block yields nodata. If the
    /// dimensions are not multiples of `factor` the raster is first padded by
    /// edge replication.
    pub fn downsample_mean(&self, factor: usize) -> Result<Raster> {
        if factor == 0 {
            return Err(Error::ZeroFactor);
        }
        self.validate()?;
        if factor == 1 {
            return Ok(self.clone());
        }
        let (out_rows, out_cols) = downsampled_dims(self.rows, self.cols, factor);
        let src = if self.rows % factor == 0 && self.cols % factor == 0 {
            None
        } else {
            Some(self.pad_to(out_rows * factor, out_cols * factor))
        };
        let src = src.as_ref().unwrap_or(self);

        let mut values = Vec::with_capacity(out_rows * out_cols);
        for br in 0..out_rows {
            for bc in 0..out_cols {
                let mut sum = 0.0f64;
                let mut count = 0u32;
                for r in br * factor..(br + 1) * factor {
                    for &v in &src.values[r * src.cols + bc * factor..][..factor] {
                        if !src.is_nodata(v) {
                            sum += v as f64;
                            count += 1;
                        }
                    }
                }
                values.push(if count == 0 {
                    self.nodata
                } else {
                    (sum / count as f64) as f32
                });
            }
        }
        Ok(Raster {
            rows: out_rows,
            cols: out_cols,
            cell_size: self.cell_size * factor as f64,
            nodata: self.nodata,
            origin_x: src.origin_x,
            origin_y: src.origin_y,
            values,
        })
    }
}

/// Output shape of [`Raster::downsample_mean`], including the padding it
/// applies to non-divisible inputs.
pub fn downsampled_dims(rows: usize, cols: usize, factor: usize) -> (usize, usize) {
    (rows.div_ceil(factor), cols.div_ceil(factor))
}

impl PadRecord {
    /// Identity record for an unpadded grid.
    pub fn none(rows: usize, cols: usize) -> Self {
        Self {
            orig_rows: rows,
            orig_cols: cols,
            padded_rows: rows,
            padded_cols: cols,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.orig_rows == self.padded_rows && self.orig_cols == self.padded_cols
    }

    /// Crops a padded row-major payload back to the original extent.
    pub fn crop_values(&self, values: &[f32]) -> Vec<f32> {
        debug_assert_eq!(values.len(), self.padded_rows * self.padded_cols);
        let mut out = Vec::with_capacity(self.orig_rows * self.orig_cols);
        for r in 0..self.orig_rows {
            out.extend_from_slice(&values[r * self.padded_cols..][..self.orig_cols]);
        }
        out
    }

    pub fn crop(&self, padded: &Raster) -> Raster {
        Raster {
            rows: self.orig_rows,
            cols: self.orig_cols,
            cell_size: padded.cell_size,
            nodata: padded.nodata,
            origin_x: padded.origin_x,
            origin_y: padded.origin_y + (self.padded_rows - self.orig_rows) as f64 * padded.cell_size,
            values: self.crop_values(&padded.values),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{rngs::SmallRng, Rng, SeedableRng};

    fn block_mean_oracle(values: &[f32], cols: usize, factor: usize, br: usize, bc: usize) -> f32 {
        let mut acc = 0.0f64;
        for dr in 0..factor {
            for dc in 0..factor {
                acc += values[(br * factor + dr) * cols + bc * factor + dc] as f64;
            }
        }
        (acc / (factor * factor) as f64) as f32
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Raster::new(2, 2, 1.0, vec![0.0; 3]),
            Err(Error::Dimensions { .. })
        ));
        assert!(matches!(
            Raster::new(0, 2, 1.0, vec![]),
            Err(Error::Dimensions { .. })
        ));
        assert_eq!(
            Raster::new(1, 1, 0.0, vec![0.0]),
            Err(Error::InvalidCellSize(0.0))
        );
    }

    #[test]
    fn nodata_in_dem_is_rejected() {
        let r = Raster::new(2, 2, 1.0, vec![1.0, 2.0, -9999.0, 4.0]).unwrap();
        assert_eq!(
            r.validate_dem(),
            Err(Error::MissingElevation { row: 1, col: 0 })
        );
    }

    #[test]
    fn downsample_identity_and_single_block() {
        let r = Raster::new(2, 2, 1.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.downsample_mean(1).unwrap(), r);
        let d = r.downsample_mean(2).unwrap();
        assert_eq!((d.rows, d.cols, d.cell_size), (1, 1, 2.0));
        assert_eq!(d.values, vec![2.5]);
        assert_eq!(r.downsample_mean(0), Err(Error::ZeroFactor));
    }

    #[test]
    fn downsample_matches_block_oracle() {
        let mut rng = SmallRng::seed_from_u64(7);
        let values: Vec<f32> = (0..16).map(|_| rng.gen_range(-5.0..50.0)).collect();
        let r = Raster::new(4, 4, 1.0, values.clone()).unwrap();
        let d = r.downsample_mean(2).unwrap();
        for br in 0..2 {
            for bc in 0..2 {
                assert_eq!(
                    d.get(br, bc).to_bits(),
                    block_mean_oracle(&values, 4, 2, br, bc).to_bits()
                );
            }
        }
    }

    #[test]
    fn downsample_non_divisible_pads_first() {
        // 3x3 with factor 2 -> padded to 4x4 by replicating the last row/column.
        let r = Raster::new(3, 3, 1.0, (1..=9).map(|v| v as f32).collect()).unwrap();
        let d = r.downsample_mean(2).unwrap();
        assert_eq!((d.rows, d.cols), (2, 2));
        assert_eq!(d.values, vec![3.0, 4.5, 7.5, 9.0]);
    }

    #[test]
    fn downsample_skips_nodata() {
        let r = Raster::new(2, 2, 1.0, vec![1.0, -9999.0, 3.0, -9999.0]).unwrap();
        assert_eq!(r.downsample_mean(2).unwrap().values, vec![2.0]);
        let all = Raster::new(2, 2, 1.0, vec![-9999.0; 4]).unwrap();
        assert_eq!(all.downsample_mean(2).unwrap().values, vec![-9999.0]);
    }

    #[test]
    fn pad_examples() {
        let r = Raster::from_fn(10, 10, 1.0, |r, c| (r * 10 + c) as f32).unwrap();
        let (p, rec) = r.pad_to_divisible(3, 1).unwrap();
        assert_eq!((p.rows, p.cols), (10, 12));
        for row in 0..10 {
            assert_eq!(p.get(row, 10), r.get(row, 9));
            assert_eq!(p.get(row, 11), r.get(row, 9));
        }
        assert_eq!(rec.orig_cols, 10);

        let r = Raster::filled(8, 8, 1.0, 1.0).unwrap();
        let (p, rec) = r.pad_to_divisible(2, 2).unwrap();
        assert_eq!(p, r);
        assert!(rec.is_identity());

        let r = Raster::filled(7, 5, 2.0, 1.0).unwrap().with_origin(100.0, 200.0);
        let (p, rec) = r.pad_to_divisible(4, 3).unwrap();
        assert_eq!((p.rows, p.cols), (9, 8));
        assert_eq!((rec.orig_rows, rec.orig_cols), (7, 5));
        // two rows added to the south edge
        assert_eq!(p.origin_y, 196.0);
        assert_eq!(rec.crop(&p), r);
    }

    #[test]
    fn paper_extent_cell_counts() {
        // 46129 m (north-south) by 21471 m at 1 m.
        let (rows, cols) = (46129usize, 21471usize);
        assert!((rows * cols) as f64 > 0.99e9);
        let at = |f| {
            let (r, c) = downsampled_dims(rows, cols, f);
            (r * c) as f64 / 1e6
        };
        assert_eq!(at(2).round(), 248.0);
        assert_eq!(at(4).round(), 62.0);
        assert!((at(8) - 15.5).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn downsample_conserves_mass(
            rows in 1usize..6, cols in 1usize..6, factor in 1usize..4,
            seed in any::<u64>(),
        ) {
            let (rows, cols) = (rows * factor, cols * factor);
            let mut rng = SmallRng::seed_from_u64(seed);
            let r = Raster::from_fn(rows, cols, 1.0, |_, _| rng.gen_range(0.0f32..100.0)).unwrap();
            let d = r.downsample_mean(factor).unwrap();
            let sin: f64 = r.values.iter().map(|v| *v as f64).sum();
            let sout: f64 = d.values.iter().map(|v| *v as f64).sum::<f64>() * (factor * factor) as f64;
            prop_assert!((sin - sout).abs() <= 1e-5 * sin.abs().max(1.0));
        }

        #[test]
        fn pad_then_crop_is_identity(
            rows in 1usize..12, cols in 1usize..12, cx in 1usize..5, cy in 1usize..5,
        ) {
            let r = Raster::from_fn(rows, cols, 1.0, |r, c| (r * 31 + c) as f32).unwrap();
            let (p, rec) = r.pad_to_divisible(cx, cy).unwrap();
            prop_assert_eq!(p.rows % cy, 0);
            prop_assert_eq!(p.cols % cx, 0);
            prop_assert!(p.rows - rows < cy && p.cols - cols < cx);
            prop_assert_eq!(rec.crop(&p), r);
        }
    }
}
