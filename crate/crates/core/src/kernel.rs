//! Local-inertial shallow-water update on a staggered grid, single precision.
//!
//! A [`State`] covers one subgrid plus a one-cell ghost ring:
//!
//! | field | storage shape           | owned index `(r, c)` stored at |
//! |-------|-------------------------|--------------------------------|
//! | `h`   | `(rows+2) x (cols+2)`   | `(r+1, c+1)`                   |
//! | `qx`  | `(rows+2) x (cols+1)`   | face `(r, j)` at `(r+1, j)`    |
//! | `qy`  | `(rows+1) x (cols+2)`   | face `(i, c)` at `(i, c+1)`    |
//!
//! `qx` face `j` lies between cells `j-1` and `j` of a row, so faces `0` and
//! `cols` are the tile's west and east borders. Faces on a tile border shared
//! with a neighbour are computed by both tiles from identical inputs, which
//! is what makes results independent of the partition.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::topology::{FieldTag, Side};

/// Standard gravity, m/s².
pub const GRAVITY: f32 = 9.80665;

const SEVEN_THIRDS: f32 = 7.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicsParams {
    pub g: f32,
    /// Base time step, s.
    pub dt: f32,
    /// Cell size, m.
    pub dx: f32,
    /// Faces with flow depth at or below this carry no flux, m.
    pub h_min: f32,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            g: GRAVITY,
            dt: 0.1,
            dx: 1.0,
            h_min: 1e-3,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("g", self.g, self.g > 0.0),
            ("dt", self.dt, self.dt > 0.0),
            ("dx", self.dx, self.dx > 0.0),
            ("h_min", self.h_min, self.h_min >= 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: value as f64,
                });
            }
        }
        Ok(())
    }
}

/// Depth of the section through which water can pass between two cells:
/// highest free surface minus highest bed, never negative.
#[inline]
pub fn flux_face_depth(h_left: f32, z_left: f32, h_right: f32, z_right: f32) -> f32 {
    ((h_left + z_left).max(h_right + z_right) - z_left.max(z_right)).max(0.0)
}

/// One explicit-gravity, semi-implicit-friction update of a single face flux.
///
/// `eta_left`/`eta_right` are the free-surface elevations on either side,
/// `q_cross` the transverse flux interpolated onto the face and `n` the
/// Manning coefficient at the face.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn face_flux(
    q: f32,
    q_cross: f32,
    depth: f32,
    eta_left: f32,
    eta_right: f32,
    n: f32,
    p: &PhysicsParams,
    dt: f32,
) -> f32 {
    if depth <= p.h_min {
        return 0.0;
    }
    let slope = (eta_right - eta_left) / p.dx;
    let speed = libm::sqrtf(q * q + q_cross * q_cross);
    let friction = if speed > 0.0 {
        p.g * dt * n * n * speed * libm::powf(depth, -SEVEN_THIRDS)
    } else {
        0.0
    };
    (q - p.g * depth * dt * slope) / (1.0 + friction)
}

/// Bed elevation and Manning coefficient for one subgrid, with a ghost ring.
#[derive(Clone, Debug, PartialEq)]
pub struct Bed {
    pub z: Field,
    pub n: Field,
}

impl Bed {
    /// `z` and `n` must both be `(rows+2) x (cols+2)`.
    pub fn new(z: Field, n: Field) -> Result<Self> {
        if z.rows() != n.rows() || z.cols() != n.cols() || z.rows() < 3 || z.cols() < 3 {
            return Err(Error::Dimensions {
                rows: z.rows(),
                cols: z.cols(),
                len: n.as_slice().len(),
            });
        }
        if let Some(i) = n.as_slice().iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "manning n",
                value: n.as_slice()[i] as f64,
            });
        }
        Ok(Self { z, n })
    }

    /// Builds a bed for a whole grid from unpadded arrays, replicating edge
    /// cells into the ghost ring.
    pub fn from_grid(rows: usize, cols: usize, z: &[f32], n: &[f32]) -> Result<Self> {
        Self::new(
            with_replicated_ring(rows, cols, z)?,
            with_replicated_ring(rows, cols, n)?,
        )
    }

    pub fn elevation(&self, r: usize, c: usize) -> f32 {
        self.z.get(r + 1, c + 1)
    }
}

/// Embeds a `rows x cols` array in a `(rows+2) x (cols+2)` field whose ring
/// repeats the nearest edge cell.
pub fn with_replicated_ring(rows: usize, cols: usize, values: &[f32]) -> Result<Field> {
    if values.len() != rows * cols || rows == 0 || cols == 0 {
        return Err(Error::Dimensions {
            rows,
            cols,
            len: values.len(),
        });
    }
    let mut f = Field::zeros(rows + 2, cols + 2);
    for sr in 0..rows + 2 {
        let r = sr.saturating_sub(1).min(rows - 1);
        for sc in 0..cols + 2 {
            let c = sc.saturating_sub(1).min(cols - 1);
            f.set(sr, sc, values[r * cols + c]);
        }
    }
    Ok(f)
}

/// Which tile borders lie on the global domain edge. Faces on those borders
/// are owned by the boundary conditions, never by the kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GlobalEdges {
    pub west: bool,
    pub east: bool,
    pub north: bool,
    pub south: bool,
}

impl GlobalEdges {
    pub const ALL: GlobalEdges = GlobalEdges {
        west: true,
        east: true,
        north: true,
        south: true,
    };

    pub fn get(&self, side: Side) -> bool {
        match side {
            Side::West => self.west,
            Side::East => self.east,
            Side::North => self.north,
            Side::South => self.south,
        }
    }
}

/// Dynamic fields of one subgrid.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    rows: usize,
    cols: usize,
    h: Field,
    qx: Field,
    qy: Field,
    next_qx: Field,
    next_qy: Field,
}

impl State {
    /// Dry, motionless state.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            h: Field::zeros(rows + 2, cols + 2),
            qx: Field::zeros(rows + 2, cols + 1),
            qy: Field::zeros(rows + 1, cols + 2),
            next_qx: Field::zeros(rows + 2, cols + 1),
            next_qy: Field::zeros(rows + 1, cols + 2),
        }
    }

    /// Motionless state with the given owned depths (row-major `rows x cols`).
    /// Ghost depths replicate the edge.
    pub fn with_depth(rows: usize, cols: usize, depth: &[f32]) -> Result<Self> {
        if let Some(&v) = depth.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "initial depth",
                value: v as f64,
            });
        }
        let mut s = Self::new(rows, cols);
        s.h = with_replicated_ring(rows, cols, depth)?;
        Ok(s)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn depth(&self, r: usize, c: usize) -> f32 {
        self.h.get(r + 1, c + 1)
    }

    #[inline]
    pub fn set_depth(&mut self, r: usize, c: usize, v: f32) {
        self.h.set(r + 1, c + 1, v)
    }

    /// x-face `j` (0..=cols) of owned row `r`.
    #[inline]
    pub fn qx(&self, r: usize, j: usize) -> f32 {
        self.qx.get(r + 1, j)
    }

    #[inline]
    pub fn set_qx(&mut self, r: usize, j: usize, v: f32) {
        self.qx.set(r + 1, j, v)
    }

    /// y-face `i` (0..=rows) of owned column `c`.
    #[inline]
    pub fn qy(&self, i: usize, c: usize) -> f32 {
        self.qy.get(i, c + 1)
    }

    #[inline]
    pub fn set_qy(&mut self, i: usize, c: usize, v: f32) {
        self.qy.set(i, c + 1, v)
    }

    /// Owned depths, row-major.
    pub fn depth_field(&self) -> Field {
        self.h.window(1, 1, self.rows, self.cols)
    }

    /// Owned x-faces, `rows x (cols+1)`.
    pub fn qx_field(&self) -> Field {
        self.qx.window(1, 0, self.rows, self.cols + 1)
    }

    /// Owned y-faces, `(rows+1) x cols`.
    pub fn qy_field(&self) -> Field {
        self.qy.window(0, 1, self.rows + 1, self.cols)
    }

    /// Storage including ghosts, for inspection.
    pub fn raw(&self, field: FieldTag) -> &Field {
        match field {
            FieldTag::H => &self.h,
            FieldTag::Qx => &self.qx,
            FieldTag::Qy => &self.qy,
        }
    }

    /// Σh over owned cells, in f64.
    pub fn depth_sum(&self) -> f64 {
        (1..=self.rows)
            .map(|r| {
                self.h.row(r)[1..=self.cols]
                    .iter()
                    .map(|v| *v as f64)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Advances every face not on a global edge by one step, reading only the
    /// fluxes and depths of the previous time level.
    ///
    /// The transverse flux at an x-face is the mean of the four nearest
    /// y-faces (and vice versa); the face Manning coefficient is the mean of
    /// the two adjacent cells. Faces on global edges keep their values.
    pub fn update_flux(
        &mut self,
        bed: &Bed,
        p: &PhysicsParams,
        dt: f32,
        edges: GlobalEdges,
    ) -> Result<()> {
        let (rows, cols) = (self.rows, self.cols);
        self.next_qx.as_mut_slice().copy_from_slice(self.qx.as_slice());
        self.next_qy.as_mut_slice().copy_from_slice(self.qy.as_slice());

        let j_first = usize::from(edges.west);
        let j_last = if edges.east { cols - 1 } else { cols };
        for r in 0..rows {
            let (hr, zr, nr) = (self.h.row(r + 1), bed.z.row(r + 1), bed.n.row(r + 1));
            let (qy_up, qy_down) = (self.qy.row(r), self.qy.row(r + 1));
            let q_row = self.qx.row(r + 1);
            let out = self.next_qx.row_mut(r + 1);
            for j in j_first..=j_last {
                // left cell in storage column j, right cell in j + 1
                let (hl, hrt, zl, zrt) = (hr[j], hr[j + 1], zr[j], zr[j + 1]);
                let depth = flux_face_depth(hl, zl, hrt, zrt);
                let cross = (qy_up[j] + qy_up[j + 1] + qy_down[j] + qy_down[j + 1]) * 0.25;
                let n = (nr[j] + nr[j + 1]) * 0.5;
                let q = face_flux(q_row[j], cross, depth, hl + zl, hrt + zrt, n, p, dt);
                if !q.is_finite() {
                    return Err(Error::Unstable {
                        field: FieldTag::Qx,
                        row: r,
                        col: j,
                    });
                }
                out[j] = q;
            }
        }

        let i_first = usize::from(edges.north);
        let i_last = if edges.south { rows - 1 } else { rows };
        for i in i_first..=i_last {
            // upper cell in storage row i, lower cell in i + 1
            let (hu, hd) = (self.h.row(i), self.h.row(i + 1));
            let (zu, zd) = (bed.z.row(i), bed.z.row(i + 1));
            let (nu, nd) = (bed.n.row(i), bed.n.row(i + 1));
            let (qx_up, qx_down) = (self.qx.row(i), self.qx.row(i + 1));
            let q_row = self.qy.row(i);
            let out = self.next_qy.row_mut(i);
            for c in 0..cols {
                let s = c + 1;
                let depth = flux_face_depth(hu[s], zu[s], hd[s], zd[s]);
                let cross = (qx_up[c] + qx_up[c + 1] + qx_down[c] + qx_down[c + 1]) * 0.25;
                let n = (nu[s] + nd[s]) * 0.5;
                let q = face_flux(q_row[s], cross, depth, hu[s] + zu[s], hd[s] + zd[s], n, p, dt);
                if !q.is_finite() {
                    return Err(Error::Unstable {
                        field: FieldTag::Qy,
                        row: i,
                        col: c,
                    });
                }
                out[s] = q;
            }
        }

        core::mem::swap(&mut self.qx, &mut self.next_qx);
        core::mem::swap(&mut self.qy, &mut self.next_qy);
        Ok(())
    }

    /// Continuity update of every owned cell from the current face fluxes.
    ///
    /// Negative depths are clamped to zero. Returns the clamped volume (m³,
    /// ≤ 0), i.e. the water the clamp added back expressed as the negative
    /// depth it removed.
    pub fn update_depth(&mut self, p: &PhysicsParams, dt: f32) -> Result<f64> {
        let (rows, cols) = (self.rows, self.cols);
        let mut clamped = 0.0f64;
        for r in 0..rows {
            let (qx_row, qy_n, qy_s) = (self.qx.row(r + 1), self.qy.row(r), self.qy.row(r + 1));
            let h_row = &mut self.h.as_mut_slice()[(r + 1) * (cols + 2)..][..cols + 2];
            for c in 0..cols {
                let s = c + 1;
                let inflow = (qx_row[c] - qx_row[c + 1]) + (qy_n[s] - qy_s[s]);
                let mut h = h_row[s] + dt * inflow / p.dx;
                if !h.is_finite() {
                    return Err(Error::Unstable {
                        field: FieldTag::H,
                        row: r,
                        col: c,
                    });
                }
                if h < 0.0 {
                    clamped += h as f64;
                    h = 0.0;
                }
                h_row[s] = h;
            }
        }
        Ok(clamped * (p.dx as f64) * (p.dx as f64))
    }

    /// Replicates edge depths into the ghost ring on global edges.
    pub fn fill_global_ghosts(&mut self, edges: GlobalEdges) {
        let (rows, cols) = (self.rows, self.cols);
        if edges.west || edges.east {
            for sr in 1..=rows {
                let row = self.h.row_mut(sr);
                if edges.west {
                    row[0] = row[1];
                }
                if edges.east {
                    row[cols + 1] = row[cols];
                }
            }
        }
        if edges.north {
            let (ghost, first) = self.h.as_mut_slice().split_at_mut(cols + 2);
            ghost[1..=cols].copy_from_slice(&first[1..=cols]);
        }
        if edges.south {
            let w = cols + 2;
            let (body, ghost) = self.h.as_mut_slice().split_at_mut((rows + 1) * w);
            ghost[1..=cols].copy_from_slice(&body[rows * w + 1..rows * w + 1 + cols]);
        }
    }

    /// Length of the strip of `field` exchanged across `side`.
    pub fn strip_len(&self, field: FieldTag, side: Side) -> usize {
        let vertical = matches!(side, Side::West | Side::East);
        match (field, vertical) {
            (FieldTag::H, true) => self.rows,
            (FieldTag::H, false) => self.cols,
            (FieldTag::Qy, true) => self.rows + 1,
            (FieldTag::Qx, false) => self.cols + 1,
            // Never exchanged: the faces themselves are shared and
            // recomputed on both sides.
            (FieldTag::Qx, true) | (FieldTag::Qy, false) => 0,
        }
    }

    /// Owned border values adjacent to `side`, in row or column order.
    pub fn border_strip(&self, field: FieldTag, side: Side) -> Vec<f32> {
        let (rows, cols) = (self.rows, self.cols);
        match (field, side) {
            (FieldTag::H, Side::West) => (1..=rows).map(|r| self.h.get(r, 1)).collect(),
            (FieldTag::H, Side::East) => (1..=rows).map(|r| self.h.get(r, cols)).collect(),
            (FieldTag::H, Side::North) => self.h.row(1)[1..=cols].to_vec(),
            (FieldTag::H, Side::South) => self.h.row(rows)[1..=cols].to_vec(),
            (FieldTag::Qy, Side::West) => self.qy.column(1),
            (FieldTag::Qy, Side::East) => self.qy.column(cols),
            (FieldTag::Qx, Side::North) => self.qx.row(1).to_vec(),
            (FieldTag::Qx, Side::South) => self.qx.row(rows).to_vec(),
            _ => Vec::new(),
        }
    }

    /// Stores a neighbour's strip in the ghost cells on `side`.
    pub fn set_ghost(&mut self, field: FieldTag, side: Side, strip: &[f32]) -> Result<()> {
        let expected = self.strip_len(field, side);
        if strip.len() != expected {
            return Err(Error::HaloLength {
                side,
                expected,
                got: strip.len(),
            });
        }
        let (rows, cols) = (self.rows, self.cols);
        match (field, side) {
            (FieldTag::H, Side::West) | (FieldTag::H, Side::East) => {
                let col = if side == Side::West { 0 } else { cols + 1 };
                for (r, v) in strip.iter().enumerate() {
                    self.h.set(r + 1, col, *v);
                }
            }
            (FieldTag::H, Side::North) => self.h.row_mut(0)[1..=cols].copy_from_slice(strip),
            (FieldTag::H, Side::South) => self.h.row_mut(rows + 1)[1..=cols].copy_from_slice(strip),
            (FieldTag::Qy, Side::West) | (FieldTag::Qy, Side::East) => {
                let col = if side == Side::West { 0 } else { cols + 1 };
                for (i, v) in strip.iter().enumerate() {
                    self.qy.set(i, col, *v);
                }
            }
            (FieldTag::Qx, Side::North) => self.qx.row_mut(0).copy_from_slice(strip),
            (FieldTag::Qx, Side::South) => self.qx.row_mut(rows + 1).copy_from_slice(strip),
            _ => {}
        }
        Ok(())
    }
}

/// Field carried across `side` in each exchange phase: depths in the depth
/// phase; in the flux phase the transverse component needed by the
/// neighbour's shared faces.
pub fn exchanged_field(phase: Phase, side: Side) -> FieldTag {
    match (phase, side) {
        (Phase::Depth, _) => FieldTag::H,
        (Phase::Flux, Side::West | Side::East) => FieldTag::Qy,
        (Phase::Flux, Side::North | Side::South) => FieldTag::Qx,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Flux,
    Depth,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{rngs::SmallRng, Rng, SeedableRng};

    /// Plain f64 evaluation of the face update, written independently of the
    /// grid kernel.
    fn face_oracle(q: f64, depth: f64, slope: f64, n: f64, dt: f64, g: f64) -> f64 {
        (q - g * depth * dt * slope) / (1.0 + g * dt * n * n * q.abs() / depth.powf(7.0 / 3.0))
    }

    #[test]
    fn face_depth_examples() {
        assert_eq!(flux_face_depth(1.0, 0.0, 1.0, 0.0), 1.0);
        assert_eq!(flux_face_depth(0.0, 5.0, 0.0, 3.0), 0.0);
        assert_eq!(flux_face_depth(2.0, 1.0, 0.5, 2.0), 1.0);
        assert_eq!(flux_face_depth(2.0, 1.0, 0.5, 2.0), flux_face_depth(0.5, 2.0, 2.0, 1.0));
    }

    #[test]
    fn scalar_face_update_matches_oracle() {
        let p = PhysicsParams {
            dt: 0.1,
            dx: 1.0,
            ..Default::default()
        };
        // slope of -0.001 over one cell
        let got = face_flux(1.0, 0.0, 2.0, 0.001, 0.0, 0.03, &p, 0.1);
        let want = face_oracle(1.0, 2.0, -0.001, 0.03, 0.1, GRAVITY as f64);
        assert!(((got as f64) - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
        // frozen from an independent evaluation: 1.0017858875 m²/s
        assert!((want - 1.001_785_887_5).abs() < 1e-9, "{want}");
    }

    #[test]
    fn dry_face_carries_nothing() {
        let p = PhysicsParams::default();
        assert_eq!(face_flux(3.0, 1.0, 0.0, 5.0, 0.0, 0.03, &p, 0.1), 0.0);
        assert_eq!(face_flux(3.0, 1.0, p.h_min, 5.0, 0.0, 0.03, &p, 0.1), 0.0);
    }

    fn bed(rows: usize, cols: usize, z: impl Fn(usize, usize) -> f32, n: f32) -> Bed {
        let zs: Vec<f32> = (0..rows * cols).map(|i| z(i / cols, i % cols)).collect();
        Bed::from_grid(rows, cols, &zs, &vec![n; rows * cols]).unwrap()
    }

    #[test]
    fn lake_at_rest_is_exact() {
        let (rows, cols) = (6, 5);
        // dyadic bed so that h + z is exactly the surface level
        let b = bed(rows, cols, |r, c| ((r * 7 + c * 3) % 11) as f32 * 0.125, 0.03);
        let depth: Vec<f32> = (0..rows * cols)
            .map(|i| 3.0 - b.elevation(i / cols, i % cols))
            .collect();
        let mut s = State::with_depth(rows, cols, &depth).unwrap();
        let before = s.clone();
        let p = PhysicsParams::default();
        for _ in 0..100 {
            s.update_flux(&b, &p, p.dt, GlobalEdges::ALL).unwrap();
            assert_eq!(s.update_depth(&p, p.dt).unwrap(), 0.0);
        }
        assert_eq!(s.qx_field().max_abs(), 0.0);
        assert_eq!(s.qy_field().max_abs(), 0.0);
        assert_eq!(s.depth_field(), before.depth_field());
    }

    #[test]
    fn flux_grid_matches_scalar_oracle() {
        let (rows, cols) = (3, 4);
        let mut rng = SmallRng::seed_from_u64(11);
        let zs: Vec<f32> = (0..rows * cols).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ns: Vec<f32> = (0..rows * cols).map(|_| rng.gen_range(0.02..0.05)).collect();
        let hs: Vec<f32> = (0..rows * cols).map(|_| rng.gen_range(0.0..2.0)).collect();
        let b = Bed::from_grid(rows, cols, &zs, &ns).unwrap();
        let mut s = State::with_depth(rows, cols, &hs).unwrap();
        for r in 0..rows {
            for j in 0..=cols {
                s.set_qx(r, j, rng.gen_range(-0.5..0.5));
            }
        }
        for i in 0..=rows {
            for c in 0..cols {
                s.set_qy(i, c, rng.gen_range(-0.5..0.5));
            }
        }
        let old = s.clone();
        let p = PhysicsParams {
            dt: 0.05,
            dx: 2.0,
            h_min: 0.01,
            ..Default::default()
        };
        s.update_flux(&b, &p, p.dt, GlobalEdges::ALL).unwrap();
        let g = p.g as f64;
        let at = |v: &[f32], r: usize, c: usize| v[r * cols + c] as f64;
        for r in 0..rows {
            for j in 1..cols {
                let (l, rt) = (j - 1, j);
                let eta_l = at(&hs, r, l) + at(&zs, r, l);
                let eta_r = at(&hs, r, rt) + at(&zs, r, rt);
                let depth = (eta_l.max(eta_r) - at(&zs, r, l).max(at(&zs, r, rt))).max(0.0);
                let q0 = old.qx(r, j) as f64;
                let cross = (old.qy(r, l) as f64
                    + old.qy(r, rt) as f64
                    + old.qy(r + 1, l) as f64
                    + old.qy(r + 1, rt) as f64)
                    / 4.0;
                let n = (at(&ns, r, l) + at(&ns, r, rt)) / 2.0;
                let want = if depth <= p.h_min as f64 {
                    0.0
                } else {
                    let speed = (q0 * q0 + cross * cross).sqrt();
                    let slope = (eta_r - eta_l) / p.dx as f64;
                    (q0 - g * depth * p.dt as f64 * slope)
                        / (1.0 + g * p.dt as f64 * n * n * speed * depth.powf(-7.0 / 3.0))
                };
                let got = s.qx(r, j) as f64;
                assert!((got - want).abs() <= 1e-5 * want.abs().max(1e-3), "qx({r},{j}) {got} vs {want}");
            }
            // global edge faces untouched
            assert_eq!(s.qx(r, 0), old.qx(r, 0));
            assert_eq!(s.qx(r, cols), old.qx(r, cols));
        }
        for c in 0..cols {
            assert_eq!(s.qy(0, c), old.qy(0, c));
            assert_eq!(s.qy(rows, c), old.qy(rows, c));
        }
    }

    #[test]
    fn depth_single_cell_inflow() {
        let mut s = State::new(1, 1);
        s.set_qx(0, 0, 1.0);
        let p = PhysicsParams {
            dt: 0.1,
            dx: 10.0,
            ..Default::default()
        };
        s.update_depth(&p, p.dt).unwrap();
        assert!((s.depth(0, 0) - 0.01).abs() < 1e-7);
    }

    #[test]
    fn depth_zero_flux_is_identity() {
        let hs = [0.5f32, 1.0, 0.0, 2.0];
        let mut s = State::with_depth(2, 2, &hs).unwrap();
        s.update_depth(&PhysicsParams::default(), 0.1).unwrap();
        assert_eq!(s.depth_field().as_slice(), &hs);
    }

    #[test]
    fn depth_matches_divergence_oracle() {
        let (rows, cols) = (4, 4);
        let mut rng = SmallRng::seed_from_u64(3);
        let hs: Vec<f32> = (0..16).map(|_| rng.gen_range(1.0..2.0)).collect();
        let mut s = State::with_depth(rows, cols, &hs).unwrap();
        let mut qx = [[0.0f64; 5]; 4];
        let mut qy = [[0.0f64; 4]; 5];
        for (r, row) in qx.iter_mut().enumerate() {
            for (j, q) in row.iter_mut().enumerate() {
                let v: f32 = rng.gen_range(-0.1..0.1);
                s.set_qx(r, j, v);
                *q = v as f64;
            }
        }
        for (i, row) in qy.iter_mut().enumerate() {
            for (c, q) in row.iter_mut().enumerate() {
                let v: f32 = rng.gen_range(-0.1..0.1);
                s.set_qy(i, c, v);
                *q = v as f64;
            }
        }
        let p = PhysicsParams {
            dt: 0.5,
            dx: 3.0,
            ..Default::default()
        };
        assert_eq!(s.update_depth(&p, p.dt).unwrap(), 0.0);
        for r in 0..rows {
            for c in 0..cols {
                let div = qx[r][c] - qx[r][c + 1] + qy[r][c] - qy[r + 1][c];
                let want = hs[r * cols + c] as f64 + 0.5 * div / 3.0;
                assert!((s.depth(r, c) as f64 - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn negative_depth_is_clamped_and_recorded() {
        let mut s = State::with_depth(1, 2, &[0.01, 0.0]).unwrap();
        s.set_qx(0, 1, 1.0); // drains cell 0 into cell 1
        let p = PhysicsParams {
            dt: 1.0,
            dx: 2.0,
            ..Default::default()
        };
        let clamped = s.update_depth(&p, p.dt).unwrap();
        assert_eq!(s.depth(0, 0), 0.0);
        assert!((s.depth(0, 1) - 0.5).abs() < 1e-7);
        // 0.01 - 0.5 = -0.49 m over a 4 m² cell
        assert!((clamped + 0.49 * 4.0).abs() < 1e-6);
    }

    #[test]
    fn nonfinite_flux_names_the_face() {
        let b = bed(1, 2, |_, _| 0.0, 0.03);
        let mut s = State::with_depth(1, 2, &[1.0, f32::MAX]).unwrap();
        let err = s
            .update_flux(&b, &PhysicsParams::default(), 0.1, GlobalEdges::ALL)
            .unwrap_err();
        assert_eq!(
            err,
            Error::Unstable {
                field: FieldTag::Qx,
                row: 0,
                col: 1
            }
        );
    }

    #[test]
    fn strips_roundtrip_into_ghosts() {
        let hs: Vec<f32> = (0..6).map(|v| v as f32).collect();
        let s = State::with_depth(2, 3, &hs).unwrap();
        assert_eq!(s.border_strip(FieldTag::H, Side::West), vec![0.0, 3.0]);
        assert_eq!(s.border_strip(FieldTag::H, Side::South), vec![3.0, 4.0, 5.0]);
        let mut t = State::new(2, 3);
        t.set_ghost(FieldTag::H, Side::East, &[7.0, 8.0]).unwrap();
        assert_eq!(t.raw(FieldTag::H).get(2, 4), 8.0);
        assert!(matches!(
            t.set_ghost(FieldTag::Qy, Side::East, &[1.0]),
            Err(Error::HaloLength { expected: 3, .. })
        ));
        assert_eq!(s.strip_len(FieldTag::Qx, Side::North), 4);
    }

    #[test]
    fn global_ghosts_replicate_edges() {
        let hs: Vec<f32> = (0..6).map(|v| v as f32).collect();
        let mut s = State::with_depth(2, 3, &hs).unwrap();
        s.set_depth(0, 0, 9.0);
        s.set_depth(1, 2, 4.5);
        s.fill_global_ghosts(GlobalEdges::ALL);
        let h = s.raw(FieldTag::H);
        assert_eq!(h.get(1, 0), 9.0);
        assert_eq!(h.get(0, 1), 9.0);
        assert_eq!(h.get(2, 4), 4.5);
        assert_eq!(h.get(3, 3), 4.5);
    }
}
