//! Synthetic volumes with known catheter centerlines.
//!
//! Catheters are forward-simulated spring models standing on an axial base
//! plane. Each one is rasterized as a dark tube with a one-voxel linear
//! edge, optionally surrounded by a bright rim, and the whole volume gets
//! seeded Gaussian noise.

mod benchmark;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

pub use benchmark::{force_for_tip_angle, standard_benchmark, BenchmarkBundle, BenchmarkCase};

use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::geom::{point_segment_distance, segment_segment_distance, vec3, Vec3};
use crate::spring::{simulate_forward, SpringModelParams};
use crate::volume::{BasePlane, SeedSet, Volume3D};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatheterSpec {
    /// Tip-effective force of the forward model, µN.
    pub f0: f64,
    /// Axial depth of the tip above the base plane, mm.
    pub insertion_depth: f64,
    /// Direction of deflection in the base plane, rad from +x.
    pub deflection_azimuth: f64,
    /// World `(x, y)` of the entry point on the base plane, mm.
    pub entry_point: [f64; 2],
    /// Darkening at the core; defaults to the background intensity (core 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BloomSpec {
    pub enabled: bool,
    /// Distance of the rim peak from the centerline, mm.
    pub rim_radius: f64,
    pub rim_gain: f64,
    /// Gaussian width of the rim, mm.
    pub rim_width: f64,
}

impl Default for BloomSpec {
    fn default() -> Self {
        BloomSpec {
            enabled: false,
            rim_radius: 1.6,
            rim_gain: 40.0,
            rim_width: 0.5,
        }
    }
}

fn default_contrast() -> f64 {
    100.0
}

/// Dark structures that are not catheters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distractor {
    Tube {
        start: [f64; 3],
        end: [f64; 3],
        radius: f64,
        #[serde(default = "default_contrast")]
        contrast: f64,
    },
    Blob {
        center: [f64; 3],
        radius: f64,
        #[serde(default = "default_contrast")]
        contrast: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub background_intensity: f64,
    /// Slice index (third axis) of the base plane.
    pub base_slice: usize,
    pub catheters: Vec<CatheterSpec>,
    pub tube_radius: f64,
    pub noise_sigma: f64,
    pub bloom: BloomSpec,
    pub distractors: Vec<Distractor>,
    pub rng_seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [200, 200, 96],
            spacing: [0.5, 0.5, 1.0],
            origin: [0.0; 3],
            background_intensity: 100.0,
            base_slice: 1,
            catheters: Vec::new(),
            tube_radius: 0.8,
            noise_sigma: 5.0,
            bloom: BloomSpec::default(),
            distractors: Vec::new(),
            rng_seed: 0,
        }
    }
}

/// A generated phantom: the volume, one gold centerline per catheter (tip
/// first) and the matching seeds.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub volume: Volume3D,
    pub gold: Vec<Trajectory>,
    pub seeds: SeedSet,
    pub warnings: Vec<String>,
}

impl PhantomSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn base_plane(&self) -> Result<BasePlane> {
        let z = self.origin[2] + self.base_slice as f64 * self.spacing[2];
        BasePlane::new(Vec3::new(self.origin[0], self.origin[1], z), Vec3::z())
    }

    fn extent(&self, axis: usize) -> (f64, f64) {
        let lo = self.origin[axis];
        (lo, lo + (self.dims[axis].max(1) - 1) as f64 * self.spacing[axis])
    }

    pub fn validate(&self, model: &SpringModelParams) -> Result<()> {
        model.validate()?;
        if self.dims.iter().any(|&n| n < 2) {
            return Err(Error::param(
                "dims",
                format!("every dimension must be at least 2, got {:?}", self.dims),
            ));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::param(
                "spacing",
                format!("must be positive, got {:?}", self.spacing),
            ));
        }
        if !(self.tube_radius > 0.0) {
            return Err(Error::param(
                "tube_radius",
                format!("must be positive, got {}", self.tube_radius),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::param(
                "noise_sigma",
                format!("must be non-negative, got {}", self.noise_sigma),
            ));
        }
        if self.base_slice >= self.dims[2] {
            return Err(Error::param("base_slice", "must lie inside the volume"));
        }
        let (x0, x1) = self.extent(0);
        let (y0, y1) = self.extent(1);
        let (_, z1) = self.extent(2);
        let plane_z = self.origin[2] + self.base_slice as f64 * self.spacing[2];
        for (i, c) in self.catheters.iter().enumerate() {
            if !(c.insertion_depth > 0.0 && c.insertion_depth <= model.total_length) {
                return Err(Error::param(
                    "insertion_depth",
                    format!(
                        "catheter {i}: must lie in (0, {}], got {}",
                        model.total_length, c.insertion_depth
                    ),
                ));
            }
            if plane_z + c.insertion_depth > z1 {
                return Err(Error::param(
                    "insertion_depth",
                    format!("catheter {i}: tip would leave the volume"),
                ));
            }
            let [x, y] = c.entry_point;
            if !(x >= x0 && x <= x1 && y >= y0 && y <= y1) {
                return Err(Error::param(
                    "entry_point",
                    format!("catheter {i}: ({x}, {y}) is outside the base face"),
                ));
            }
            if !(c.f0 >= 0.0 && c.f0.is_finite()) {
                return Err(Error::param(
                    "f0",
                    format!("catheter {i}: must be non-negative, got {}", c.f0),
                ));
            }
        }
        Ok(())
    }
}

/// World centerline of one catheter from its entry point to its tip.
pub fn catheter_centerline(c: &CatheterSpec, plane: &BasePlane, model: &SpringModelParams) -> Result<Vec<Vec3>> {
    let state = simulate_forward(model, c.f0)?;
    let cut = state.crossing_at(c.insertion_depth).ok_or_else(|| {
        Error::param(
            "insertion_depth",
            format!("catheter with f0={} never reaches depth {}", c.f0, c.insertion_depth),
        )
    })?;
    let base = Vec3::new(c.entry_point[0], c.entry_point[1], plane.point().z);
    let r = plane.normal();
    let side = Vec3::new(c.deflection_azimuth.cos(), c.deflection_azimuth.sin(), 0.0);
    let to_world = |a: f64, d: f64| base + r * a + side * d;
    let mut pts: Vec<Vec3> = state.positions[..=cut.segment]
        .iter()
        .map(|p| to_world(p.x, p.y))
        .collect();
    let tip = to_world(c.insertion_depth, cut.d);
    if pts.last() != Some(&tip) {
        pts.push(tip);
    }
    Ok(pts)
}

/// Rasterize, add bloom and noise, and emit gold centerlines and seeds.
pub fn generate_phantom(spec: &PhantomSpec, model: &SpringModelParams) -> Result<Phantom> {
    spec.validate(model)?;
    let plane = spec.base_plane()?;
    let centerlines: Vec<Vec<Vec3>> = spec
        .catheters
        .iter()
        .map(|c| catheter_centerline(c, &plane, model))
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    for i in 0..centerlines.len() {
        for j in i + 1..centerlines.len() {
            let d = polyline_distance(&centerlines[i], &centerlines[j]);
            if d < 2.0 * spec.tube_radius {
                let msg = format!("catheters {i} and {j} come within {d:.2} mm of each other");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let mut raster = Raster::new(spec);
    let bg = spec.background_intensity;
    for (c, line) in spec.catheters.iter().zip(&centerlines) {
        let frac = c.contrast.unwrap_or(bg) / bg;
        for w in line.windows(2) {
            raster.capsule(
                &w[0],
                &w[1],
                spec.tube_radius,
                frac,
                spec.bloom.enabled.then_some(&spec.bloom),
            );
        }
    }
    for d in &spec.distractors {
        match d {
            Distractor::Tube {
                start,
                end,
                radius,
                contrast,
            } => raster.capsule(&vec3(*start), &vec3(*end), *radius, contrast / bg, None),
            Distractor::Blob {
                center,
                radius,
                contrast,
            } => {
                let c = vec3(*center);
                raster.capsule(&c, &c, *radius, contrast / bg, None)
            }
        }
    }

    let mut data: Vec<f32> = raster
        .dark
        .iter()
        .zip(&raster.bright)
        .map(|(&dk, &br)| ((bg + br as f64) * (1.0 - dk as f64)) as f32)
        .collect();
    if spec.noise_sigma > 0.0 {
        let mut rng = Pcg64::seed_from_u64(spec.rng_seed);
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::param("noise_sigma", e.to_string()))?;
        for v in &mut data {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    let volume = Volume3D::axis_aligned(spec.dims, spec.spacing, vec3(spec.origin), data)?.with_background(bg);

    let gold = centerlines
        .into_iter()
        .map(|mut line| {
            line.reverse();
            Trajectory::from_polyline(line)
        })
        .collect::<Vec<_>>();
    let seeds = SeedSet {
        tips: gold.iter().map(|g| g.points[0]).collect(),
        plane,
    };
    Ok(Phantom {
        volume,
        gold,
        seeds,
        warnings,
    })
}

fn polyline_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for s in a.windows(2) {
        for t in b.windows(2) {
            best = best.min(segment_segment_distance(&s[0], &s[1], &t[0], &t[1]));
        }
    }
    best
}

struct Raster {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: Vec3,
    edge: f64,
    dark: Vec<f32>,
    bright: Vec<f32>,
}

impl Raster {
    fn new(spec: &PhantomSpec) -> Self {
        let n = spec.dims.iter().product();
        Raster {
            dims: spec.dims,
            spacing: spec.spacing,
            origin: vec3(spec.origin),
            edge: spec.spacing.iter().copied().fold(f64::INFINITY, f64::min),
            dark: vec![0.0; n],
            bright: vec![0.0; n],
        }
    }

    /// Darken (and optionally rim) everything within `radius` of `[p, q]`.
    /// Coverage falls linearly from 1 to 0 across one voxel around the wall.
    fn capsule(&mut self, p: &Vec3, q: &Vec3, radius: f64, frac: f64, bloom: Option<&BloomSpec>) {
        let mut reach = radius + self.edge;
        if let Some(b) = bloom {
            reach = reach.max(b.rim_radius + 4.0 * b.rim_width);
        }
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for ax in 0..3 {
            let a = p[ax].min(q[ax]) - reach;
            let b = p[ax].max(q[ax]) + reach;
            let to_idx = |x: f64| (x - self.origin[ax]) / self.spacing[ax];
            let last = self.dims[ax] as f64 - 1.0;
            let l = to_idx(a).ceil().clamp(0.0, last);
            let h = to_idx(b).floor().clamp(-1.0, last);
            if h < l {
                return;
            }
            lo[ax] = l as usize;
            hi[ax] = h as usize;
        }
        let [nx, ny, _] = self.dims;
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let x = self.origin
                        + Vec3::new(
                            i as f64 * self.spacing[0],
                            j as f64 * self.spacing[1],
                            k as f64 * self.spacing[2],
                        );
                    let dist = point_segment_distance(&x, p, q);
                    if dist > reach {
                        continue;
                    }
                    let idx = i + nx * (j + ny * k);
                    let cov = ((radius + 0.5 * self.edge - dist) / self.edge).clamp(0.0, 1.0) * frac;
                    if cov as f32 > self.dark[idx] {
                        self.dark[idx] = cov as f32;
                    }
                    if let Some(b) = bloom {
                        let z = (dist - b.rim_radius) / b.rim_width;
                        let v = (b.rim_gain * (-0.5 * z * z).exp()) as f32;
                        if v > self.bright[idx] {
                            self.bright[idx] = v;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests;
