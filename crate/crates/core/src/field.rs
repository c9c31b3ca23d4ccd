use alloc::vec;
use alloc::vec::Vec;

/// Dense row-major `f32` array.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Field {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f32) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Returns `None` when `data` does not hold exactly `rows * cols` values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f32] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f32> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Largest absolute value, or 0 for an empty field.
    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// Copies `rows x cols` values starting at (`row0`, `col0`).
    pub fn window(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Field {
        let mut out = Vec::with_capacity(rows * cols);
        for r in row0..row0 + rows {
            out.extend_from_slice(&self.row(r)[col0..col0 + cols]);
        }
        Field {
            rows,
            cols,
            data: out,
        }
    }

    /// Writes `src` into this field with its top-left corner at (`row0`, `col0`).
    pub fn paste(&mut self, row0: usize, col0: usize, src: &Field) {
        for r in 0..src.rows {
            self.row_mut(row0 + r)[col0..col0 + src.cols].copy_from_slice(src.row(r));
        }
    }
}
