//! Regular 3D scalar grids with world geometry.
//!
//! Voxel `(i, j, k)` sits at world position
//! `origin + directions * (spacing ⊙ (i, j, k))`; the first index varies
//! fastest in memory. Directions are stored as orthonormal columns.

mod nrrd;
mod seeds;

use std::sync::OnceLock;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geom::Vec3;

pub use nrrd::{load_volume, read_nrrd, save_volume, write_nrrd};
pub use seeds::{distance_to_plane, BasePlane, SeedSet};

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug)]
pub struct Volume3D {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: Vec3,
    directions: Matrix3<f64>,
    data: Vec<f32>,
    background: f64,
    // maps (world - origin) to continuous voxel indices
    to_index: Matrix3<f64>,
    contrast: OnceLock<f64>,
}

impl Clone for Volume3D {
    fn clone(&self) -> Self {
        Self {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
            directions: self.directions,
            data: self.data.clone(),
            background: self.background,
            to_index: self.to_index,
            contrast: OnceLock::new(),
        }
    }
}

impl Volume3D {
    /// Build a volume, validating shape and geometry. The out-of-bounds
    /// background defaults to the maximum stored intensity.
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: Vec3,
        directions: Matrix3<f64>,
        data: Vec<f32>,
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::param(
                "dims",
                format!("all dimensions must be positive, got {dims:?}"),
            ));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::param(
                "spacing",
                format!("spacing must be positive, got {spacing:?}"),
            ));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::param(
                "data",
                format!("expected {expected} samples for dims {dims:?}, got {}", data.len()),
            ));
        }
        let gram = directions.transpose() * directions;
        if (gram - Matrix3::identity()).abs().max() > ORTHONORMAL_TOL {
            return Err(Error::param("axis_directions", "direction columns must be orthonormal"));
        }
        let background = data.iter().copied().fold(f32::NEG_INFINITY, f32::max).max(0.0) as f64;
        let inv_spacing = Matrix3::from_diagonal(&Vec3::new(1.0 / spacing[0], 1.0 / spacing[1], 1.0 / spacing[2]));
        Ok(Self {
            dims,
            spacing,
            origin,
            directions,
            data,
            background,
            to_index: inv_spacing * directions.transpose(),
            contrast: OnceLock::new(),
        })
    }

    /// Axis-aligned volume with identity directions.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: Vec3, data: Vec<f32>) -> Result<Self> {
        Self::new(dims, spacing, origin, Matrix3::identity(), data)
    }

    /// Override the intensity returned for samples outside the grid.
    pub fn with_background(mut self, value: f64) -> Self {
        self.background = value;
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn directions(&self) -> &Matrix3<f64> {
        &self.directions
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.linear_index(i, j, k)]
    }

    pub fn index_to_world(&self, ijk: Vec3) -> Vec3 {
        let scaled = Vec3::new(
            ijk.x * self.spacing[0],
            ijk.y * self.spacing[1],
            ijk.z * self.spacing[2],
        );
        self.origin + self.directions * scaled
    }

    #[inline]
    pub fn world_to_index(&self, p: &Vec3) -> Vec3 {
        self.to_index * (p - self.origin)
    }

    /// True when `p` maps inside the voxel-center hull of the grid.
    pub fn contains(&self, p: &Vec3) -> bool {
        let c = self.world_to_index(p);
        (0..3).all(|a| c[a] >= -1e-9 && c[a] <= (self.dims[a] - 1) as f64 + 1e-9)
    }

    /// Trilinear interpolation at world point `p`; the background value
    /// outside the voxel-center hull.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let c = self.world_to_index(p);
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.dims[a];
            let x = c[a];
            let hi = (n - 1) as f64;
            if !(x >= -1e-9 && x <= hi + 1e-9) {
                return self.background;
            }
            if n == 1 {
                continue;
            }
            let x = x.clamp(0.0, hi);
            let i0 = (x.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = x - i0 as f64;
        }
        let nx = self.dims[0];
        let nxy = nx * self.dims[1];
        let step = [
            usize::from(self.dims[0] > 1),
            if self.dims[1] > 1 { nx } else { 0 },
            if self.dims[2] > 1 { nxy } else { 0 },
        ];
        let i000 = base[0] + nx * base[1] + nxy * base[2];
        let d = &self.data;
        let v = |off: usize| d[i000 + off] as f64;
        let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
        let c00 = v(0) * (1.0 - fx) + v(step[0]) * fx;
        let c10 = v(step[1]) * (1.0 - fx) + v(step[1] + step[0]) * fx;
        let c01 = v(step[2]) * (1.0 - fx) + v(step[2] + step[0]) * fx;
        let c11 = v(step[2] + step[1]) * (1.0 - fx) + v(step[2] + step[1] + step[0]) * fx;
        let c0 = c00 * (1.0 - fy) + c10 * fy;
        let c1 = c01 * (1.0 - fy) + c11 * fy;
        c0 * (1.0 - fz) + c1 * fz
    }

    /// Robust dark-structure contrast: median minus 1st percentile of all
    /// intensities. Computed once and cached.
    pub fn contrast_estimate(&self) -> f64 {
        *self.contrast.get_or_init(|| {
            let mut values = self.data.clone();
            let n = values.len();
            let p1_idx = ((n - 1) as f64 * 0.01).round() as usize;
            let med_idx = (n - 1) / 2;
            let (_, med, _) = values.select_nth_unstable_by(med_idx, f32::total_cmp);
            let median = *med as f64;
            let (_, p1, _) = values[..=med_idx].select_nth_unstable_by(p1_idx.min(med_idx), f32::total_cmp);
            median - *p1 as f64
        })
    }
}
