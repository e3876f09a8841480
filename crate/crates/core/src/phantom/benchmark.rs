//! The standard benchmark: ten volumes of ten catheters each, derived from a
//! single seed.

use rand::{Rng, RngExt, SeedableRng};
use rand_pcg::Pcg64;

use super::{
    catheter_centerline, generate_phantom, polyline_distance, BloomSpec, CatheterSpec, Distractor, Phantom, PhantomSpec,
};
use crate::error::{Error, Result};
use crate::geom::{arr3, Vec3};
use crate::spring::{find_f_max, simulate_forward, SpringModelParams, MAX_TABLE_ANGLE};

const N_VOLUMES: usize = 10;
const PER_VOLUME: usize = 10;
const GRID_STEP: f64 = 10.0;
const NOISE_LEVELS: [f64; 3] = [4.0, 8.0, 12.0];
/// Tip angle at the insertion depth of the most bent benchmark catheter.
const BENCH_TIP_ANGLE_DEG: f64 = 10.0;
const DEPTH_RANGE: (f64, f64) = (55.0, 85.0);
/// Depth of the catheters' signal voids below the background.
const CONTRAST_RANGE: (f64, f64) = (50.0, 100.0);

/// Largest force whose catheter crosses axial depth `depth` at an angle of
/// at most `angle` (rad).
pub fn force_for_tip_angle(params: &SpringModelParams, depth: f64, angle: f64) -> Result<f64> {
    let within = |f: f64| match simulate_forward(params, f) {
        Ok(s) => s.crossing_at(depth).is_some_and(|c| c.alpha_sum <= angle),
        Err(_) => false,
    };
    if !within(0.0) {
        return Err(Error::param("depth", format!("no catheter reaches depth {depth}")));
    }
    let mut lo = 0.0;
    let mut hi = find_f_max(params, MAX_TABLE_ANGLE)?;
    if within(hi) {
        return Ok(hi);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if within(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// One catheter of the benchmark.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchmarkCase {
    pub id: String,
    pub volume: usize,
    pub catheter: usize,
}

/// Phantom specifications of the benchmark; volumes are generated on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkBundle {
    pub seed: u64,
    pub model: SpringModelParams,
    pub specs: Vec<PhantomSpec>,
}

impl BenchmarkBundle {
    pub fn n_catheters(&self) -> usize {
        self.specs.iter().map(|s| s.catheters.len()).sum()
    }

    pub fn cases(&self) -> Vec<BenchmarkCase> {
        self.specs
            .iter()
            .enumerate()
            .flat_map(|(v, s)| {
                (0..s.catheters.len()).map(move |c| BenchmarkCase {
                    id: format!("v{v:02}_c{c:02}"),
                    volume: v,
                    catheter: c,
                })
            })
            .collect()
    }

    pub fn generate(&self, volume: usize) -> Result<Phantom> {
        let spec = self
            .specs
            .get(volume)
            .ok_or_else(|| Error::param("volume", format!("bundle has {} volumes", self.specs.len())))?;
        generate_phantom(spec, &self.model)
    }
}

/// 10 volumes x 10 catheters with noise, bloom, faint signal voids and
/// distractor tubes crossing or branching off the catheters.
pub fn standard_benchmark(seed: u64) -> Result<BenchmarkBundle> {
    let model = SpringModelParams::default();
    let mut rng = Pcg64::seed_from_u64(seed);
    let specs = (0..N_VOLUMES)
        .map(|v| benchmark_volume(v, &model, &mut rng))
        .collect::<Result<_>>()?;
    Ok(BenchmarkBundle { seed, model, specs })
}

fn benchmark_volume(v: usize, model: &SpringModelParams, rng: &mut Pcg64) -> Result<PhantomSpec> {
    let mut spec = PhantomSpec {
        noise_sigma: NOISE_LEVELS[v % NOISE_LEVELS.len()],
        rng_seed: rng.next_u64(),
        bloom: BloomSpec {
            enabled: v % 2 == 1,
            ..BloomSpec::default()
        },
        ..PhantomSpec::default()
    };
    let plane = spec.base_plane()?;
    let (cx, cy) = (50.0, 50.0);

    // template holes on a 4x4 grid, ten of them used
    let mut holes: Vec<[f64; 2]> = (0..16)
        .map(|h| {
            let (gx, gy) = ((h % 4) as f64 - 1.5, (h / 4) as f64 - 1.5);
            [cx + gx * GRID_STEP, cy + gy * GRID_STEP]
        })
        .collect();
    for i in (1..holes.len()).rev() {
        let j = rng.random_range(0..=i);
        holes.swap(i, j);
    }

    let mut lines: Vec<Vec<Vec3>> = Vec::new();
    for &entry in holes.iter().take(PER_VOLUME) {
        let depth = rng.random_range(DEPTH_RANGE.0..DEPTH_RANGE.1);
        let f_bench = force_for_tip_angle(model, depth, BENCH_TIP_ANGLE_DEG.to_radians())?;
        let f0 = rng.random_range(0.0..0.9 * f_bench);
        let contrast = rng.random_range(CONTRAST_RANGE.0..=CONTRAST_RANGE.1);
        // redraw the bending direction until the catheter keeps clear of its neighbours
        let mut chosen = None;
        for _ in 0..50 {
            let cat = CatheterSpec {
                f0,
                insertion_depth: depth,
                deflection_azimuth: rng.random_range(0.0..std::f64::consts::TAU),
                entry_point: entry,
                contrast: Some(contrast),
            };
            let line = catheter_centerline(&cat, &plane, model)?;
            let clear = lines
                .iter()
                .all(|l| polyline_distance(l, &line) > 4.0 * spec.tube_radius);
            chosen = Some((cat, line));
            if clear {
                break;
            }
        }
        let (cat, line) = chosen.expect("at least one attempt");
        spec.catheters.push(cat);
        lines.push(line);
    }

    // three in ten volumes are distractor-free
    if ![0, 4, 8].contains(&(v % 10)) {
        for _ in 0..rng.random_range(1..=3) {
            let line = &lines[rng.random_range(0..lines.len())];
            spec.distractors.push(crossing_tube(line, rng));
        }
        for _ in 0..rng.random_range(3..=6) {
            let line = &lines[rng.random_range(0..lines.len())];
            spec.distractors.push(branching_tube(line, rng));
        }
        for _ in 0..rng.random_range(0..=2) {
            let line = &lines[rng.random_range(0..lines.len())];
            let p = point_along(line, rng.random_range(0.2..0.9));
            let off = random_unit(rng) * rng.random_range(3.0..6.0);
            spec.distractors.push(Distractor::Blob {
                center: arr3(&(p + off)),
                radius: rng.random_range(1.5..3.0),
                contrast: 100.0,
            });
        }
    }
    Ok(spec)
}

/// A straight dark tube passing obliquely close to the catheter `line`.
fn crossing_tube<R: Rng>(line: &[Vec3], rng: &mut R) -> Distractor {
    let p = point_along(line, rng.random_range(0.25..0.85));
    let tilt = rng.random_range(35f64..80.0).to_radians();
    let az = rng.random_range(0.0..std::f64::consts::TAU);
    let dir = Vec3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), tilt.cos());
    let side = loop {
        let c = random_unit(rng).cross(&dir);
        if c.norm() > 0.1 {
            break c.normalize();
        }
    };
    let offset = side * rng.random_range(0.0..1.5);
    let center = p + offset;
    let (h0, h1) = (rng.random_range(10.0..25.0), rng.random_range(10.0..25.0));
    Distractor::Tube {
        start: arr3(&(center - dir * h0)),
        end: arr3(&(center + dir * h1)),
        radius: rng.random_range(0.6..0.9),
        contrast: 100.0,
    }
}

/// A straight dark tube leaving the catheter `line` at a shallow angle and
/// running toward the base plane.
fn branching_tube<R: Rng>(line: &[Vec3], rng: &mut R) -> Distractor {
    let u = rng.random_range(0.3..0.8);
    let p = point_along(line, u);
    let down = (point_along(line, u - 0.05) - p).normalize();
    let bend = loop {
        let c = random_unit(rng).cross(&down);
        if c.norm() > 0.1 {
            break c.normalize();
        }
    };
    let angle = rng.random_range(15f64..35.0).to_radians();
    let dir = down * angle.cos() + bend * angle.sin();
    let start = p + bend * rng.random_range(0.0..1.0) - dir * 2.0;
    Distractor::Tube {
        start: arr3(&start),
        end: arr3(&(p + dir * rng.random_range(15.0..30.0))),
        radius: rng.random_range(0.6..0.9),
        contrast: 100.0,
    }
}

/// Point at fraction `u` of the arc length of `line`.
fn point_along(line: &[Vec3], u: f64) -> Vec3 {
    let total: f64 = line.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut left = u * total;
    for w in line.windows(2) {
        let len = (w[1] - w[0]).norm();
        if left <= len && len > 0.0 {
            return w[0] + (w[1] - w[0]) * (left / len);
        }
        left -= len;
    }
    *line.last().unwrap()
}

fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}
