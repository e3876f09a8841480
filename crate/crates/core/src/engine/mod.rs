//! The tracker: model estimation from an initialization cone, then a chain
//! of model-guided cone searches from the tip to the base plane.

mod bezier;
mod frame;
mod gate;
mod trajectory;

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use bezier::{bezier_point, fit_bezier, sample_bezier};
pub use frame::{make_local_frame, propose_model_point, LocalFrame};
pub use gate::{gate_candidate, Provenance};
pub use trajectory::{ModelEstimate, Trajectory, TrajectoryFlags};

use crate::error::{Error, Result};
use crate::features::{cone_search, ConeSpec, FeatureMask};
use crate::geom::{resample_polyline, Vec3};
use crate::spring::{build_model_table, simulate_backward, simulate_forward, ModelTable, SpringModelParams};
use crate::volume::{BasePlane, Volume3D};

/// Spacing of the polyline samples the Bezier is fitted to, mm.
const BEZIER_SAMPLE_STEP: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    /// Number of trajectory points, tip included.
    pub n_c: usize,
    /// Gate tolerance in mm; `0` is model only, infinity is image only.
    #[serde(serialize_with = "ser_tol", deserialize_with = "de_tol")]
    pub d_tol: f64,
    pub r_cone: f64,
    pub mask: FeatureMask,
    pub n_rays: usize,
    pub refine_levels: usize,
    /// Ray sampling step; half the smallest voxel spacing when unset.
    pub ray_step: Option<f64>,
    pub model: SpringModelParams,
    pub table_force_samples: usize,
    pub table_resolution: usize,
    pub deflection: DeflectionEstimate,
    /// With the sine estimate, use `sin(arccos(alpha0_sum))` instead.
    pub eq4_literal: bool,
    /// The initialization cone must beat the uniform score by this fraction
    /// of the volume contrast.
    pub init_margin_factor: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            n_c: 8,
            d_tol: 1.0,
            r_cone: 20.0,
            mask: FeatureMask::default(),
            n_rays: 200,
            refine_levels: 2,
            ray_step: None,
            model: SpringModelParams::default(),
            table_force_samples: 200,
            table_resolution: 100,
            deflection: DeflectionEstimate::default(),
            eq4_literal: false,
            init_margin_factor: 0.1,
        }
    }
}

/// How the tip deflection is derived from the initialization cone.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeflectionEstimate {
    /// Find the model catheter whose tip-to-midpoint chord has the measured
    /// angle and take its tip deflection.
    #[default]
    HalfChord,
    /// `d = a * sin(alpha0_sum) / cos(alpha_ref)`, treating the chord angle
    /// as the angle of the whole catheter.
    Sine,
}

fn ser_tol<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_tol<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Tol {
        Num(f64),
        Text(String),
    }
    match Tol::deserialize(d)? {
        Tol::Num(v) => Ok(v),
        Tol::Text(s) => parse_tolerance(&s).map_err(serde::de::Error::custom),
    }
}

/// Parse `0`, `inf` or a millimeter value.
pub fn parse_tolerance(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        t => match t.parse::<f64>() {
            Ok(v) if v >= 0.0 => Ok(v),
            _ => Err(format!("expected 0, inf or a non-negative number of mm, got `{s}`")),
        },
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_c < 3 {
            return Err(Error::param("n_c", format!("must be at least 3, got {}", self.n_c)));
        }
        if !(self.d_tol >= 0.0) {
            return Err(Error::param(
                "d_tol",
                format!("must be non-negative, got {}", self.d_tol),
            ));
        }
        if !(self.r_cone > 0.0 && self.r_cone.is_finite()) {
            return Err(Error::param("r_cone", format!("must be positive, got {}", self.r_cone)));
        }
        if self.n_rays == 0 {
            return Err(Error::param("n_rays", "must be at least 1"));
        }
        if let Some(step) = self.ray_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::param("ray_step", format!("must be positive, got {step}")));
            }
        }
        if !(self.init_margin_factor >= 0.0) {
            return Err(Error::param("init_margin_factor", "must be non-negative"));
        }
        self.mask.validate()?;
        self.model.validate()
    }

    pub fn with_d_tol(mut self, d_tol: f64) -> Self {
        self.d_tol = d_tol;
        self
    }
}

/// A configured tracker. Cheap to clone; the force table is shared.
#[derive(Clone, Debug)]
pub struct Segmenter {
    config: SegmentationConfig,
    table: Arc<ModelTable>,
}

impl Segmenter {
    /// Validate `config` and build its force table.
    pub fn new(config: SegmentationConfig) -> Result<Self> {
        config.validate()?;
        let table = build_model_table(&config.model, config.table_force_samples, config.table_resolution)?;
        Ok(Segmenter {
            config,
            table: Arc::new(table),
        })
    }

    /// Reuse a table built for the same spring parameters.
    pub fn with_table(config: SegmentationConfig, table: Arc<ModelTable>) -> Result<Self> {
        config.validate()?;
        if table.params() != &config.model {
            return Err(Error::param("model", "table was built for different spring parameters"));
        }
        Ok(Segmenter { config, table })
    }

    pub fn config(&self) -> &SegmentationConfig {
        &self.config
    }

    pub fn table(&self) -> &Arc<ModelTable> {
        &self.table
    }

    /// The same tracker with another gate tolerance.
    pub fn with_d_tol(&self, d_tol: f64) -> Self {
        Segmenter {
            config: self.config.clone().with_d_tol(d_tol),
            table: Arc::clone(&self.table),
        }
    }

    fn ray_step(&self, vol: &Volume3D) -> f64 {
        self.config.ray_step.unwrap_or(0.5 * vol.min_spacing())
    }

    fn cone(&self, apex: Vec3, base: Vec3, radius: f64) -> Result<ConeSpec> {
        Ok(ConeSpec::new(apex, base, radius, self.config.n_rays)?.with_refinement(self.config.refine_levels))
    }

    /// Estimate `(a, d, alpha0_sum, F0)` for the catheter ending at `tip`.
    pub fn estimate_model(&self, vol: &Volume3D, tip: &Vec3, plane: &BasePlane) -> Result<ModelEstimate> {
        let a = plane.signed_distance(tip);
        if !(a > 0.0) {
            return Err(Error::Precondition(format!(
                "tip lies {:.3} mm from the base plane on the wrong side",
                -a
            )));
        }
        let r = plane.normal();
        let cone = self.cone(*tip, tip - r * (0.5 * a), self.config.r_cone)?;
        let hit = cone_search(vol, &cone, &self.config.mask, self.ray_step(vol));
        let margin = self.config.init_margin_factor * vol.contrast_estimate();
        let init_fallback = !(hit.score < -margin);
        let l_long = if init_fallback {
            log::warn!(
                "initialization cone found no dark line (score {:.3}); assuming a straight catheter",
                hit.score
            );
            -r * (0.5 * a)
        } else {
            hit.point - tip
        };
        let alpha0_sum = l_long.normalize().dot(&-r).clamp(-1.0, 1.0).acos();
        let (d, chord_clamped) = match self.config.deflection {
            DeflectionEstimate::HalfChord if !self.config.eq4_literal => self.half_chord_deflection(a, alpha0_sum),
            _ => {
                // declination of the reference axis from the volume's third axis
                let axis = self.volume_axis(vol);
                let cos_ref = r.dot(&axis).abs().clamp(1e-6, 1.0);
                let sin_term = if self.config.eq4_literal {
                    alpha0_sum.clamp(-1.0, 1.0).acos().sin()
                } else {
                    alpha0_sum.sin()
                };
                (a / cos_ref * sin_term, false)
            }
        };
        let lookup = self.table.lookup(a, d);
        let lookup_clamped = lookup.clamped || chord_clamped;
        if lookup_clamped {
            log::warn!("model table lookup at a={a:.2}, d={d:.2} was clamped to the simulated region");
        }
        let tip_alpha_sum = match self.config.deflection {
            DeflectionEstimate::HalfChord if !self.config.eq4_literal => lookup.alpha_sum,
            _ => alpha0_sum,
        };
        Ok(ModelEstimate {
            a,
            d,
            alpha0_sum,
            f0_est: lookup.f_est,
            local_force: lookup.local_force,
            tip_alpha_sum,
            l_long,
            init_score: hit.score,
            lookup_clamped,
            init_fallback,
        })
    }

    /// Tip deflection of the model catheter reaching depth `a` whose chord
    /// from the tip to depth `a / 2` makes angle `alpha0_sum` with the axis.
    /// The flag is set when the angle is beyond every simulated catheter.
    fn half_chord_deflection(&self, a: f64, alpha0_sum: f64) -> (f64, bool) {
        let params = &self.config.model;
        let target = 0.5 * a * alpha0_sum.min(std::f64::consts::FRAC_PI_2 - 1e-6).tan();
        // (lateral offset between tip and midpoint, tip deflection)
        let chord = |f: f64| -> Option<(f64, f64)> {
            let s = simulate_forward(params, f).ok()?;
            let tip = s.crossing_at(a)?;
            let mid = s.crossing_at(0.5 * a)?;
            Some((tip.d - mid.d, tip.d))
        };
        let Some((_, d_lo)) = chord(0.0) else {
            return (0.0, true);
        };
        if target <= 0.0 {
            return (d_lo, false);
        }
        // bracket on a coarse force grid, stopping where the offset stops growing
        const GRID: usize = 64;
        let f_max = self.table.f_max();
        let (mut lo, mut hi) = (0.0, None);
        let mut best = (0.0, d_lo);
        for i in 1..=GRID {
            let f = f_max * i as f64 / GRID as f64;
            match chord(f) {
                Some((off, d)) if off > best.0 => {
                    if off >= target {
                        hi = Some(f);
                        break;
                    }
                    lo = f;
                    best = (off, d);
                }
                _ => break,
            }
        }
        let Some(mut hi) = hi else {
            return (best.1, true);
        };
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            match chord(mid) {
                Some((off, _)) if off < target => lo = mid,
                _ => hi = mid,
            }
        }
        (chord(lo).map_or(best.1, |c| c.1), false)
    }

    fn volume_axis(&self, vol: &Volume3D) -> Vec3 {
        vol.directions().column(2).into_owned()
    }

    /// Trace the catheter ending at `tip` toward `plane`.
    pub fn segment_catheter(&self, vol: &Volume3D, tip: &Vec3, plane: &BasePlane) -> Result<Trajectory> {
        let est = self.estimate_model(vol, tip, plane)?;
        let n_c = self.config.n_c;
        let d_seg = est.a / (n_c - 1) as f64;
        let r = plane.normal();
        let (alphas, model_fallback) = self.model_angles(&est);
        let mut flags = TrajectoryFlags {
            lookup_clamped: est.lookup_clamped,
            init_fallback: est.init_fallback,
            ..Default::default()
        };

        let mut points = vec![*tip];
        let mut provenance = vec![Provenance::Seed];
        let b0 = tip + est.l_long.normalize() * d_seg;
        let first = self.step(vol, tip, &b0)?;
        let mut crossed = self.push_point(&mut points, &mut provenance, first, plane, &mut flags);

        let mut frame = make_local_frame(&est.l_long, &r, None)?;
        let seg_len = self.config.model.seg_length();
        for k in 1..n_c - 1 {
            if crossed {
                break;
            }
            let l_s = points[k] - points[k - 1];
            let mut next = make_local_frame(&l_s, &r, Some(&frame))?;
            // keep the deflection side stable when a segment wobbles across the axis
            if next.d_loc.dot(&frame.d_loc) < 0.0 {
                next = next.flipped();
            }
            frame = next;
            let s = k as f64 * d_seg;
            let (alpha, beyond) = interp_angle(&alphas, seg_len, s);
            if beyond && model_fallback {
                flags.model_fallback = true;
            }
            // backward angles are measured toward the deflection side; the
            // frame's d_loc points away from it
            let b_mod = propose_model_point(&points[k], &frame, -alpha, d_seg);
            let accepted = self.step(vol, &points[k], &b_mod)?;
            crossed = self.push_point(&mut points, &mut provenance, accepted, plane, &mut flags);
        }

        if !crossed {
            let n = points.len();
            let (prev, last) = (points[n - 2], points[n - 1]);
            let u = (last - prev).normalize();
            let toward = -u.dot(&r);
            let remaining = plane.signed_distance(&last);
            if toward > 1e-9 && remaining > 0.0 && remaining / toward <= d_seg {
                points[n - 1] = last + u * (remaining / toward);
                flags.plane_extended = true;
            }
        }

        // fitting N_c control points to N_c points would interpolate them and
        // turn sub-voxel jitter into wide oscillations; approximate the
        // densely resampled polyline instead
        let dense = resample_polyline(&points, (0.25 * d_seg).min(BEZIER_SAMPLE_STEP));
        let bezier = fit_bezier(&dense, n_c.min(points.len()))?;
        Ok(Trajectory {
            points,
            bezier,
            provenance,
            estimates: Some(est),
            flags,
        })
    }

    /// One cone step from `apex` with the model proposal `b_mod`.
    fn step(&self, vol: &Volume3D, apex: &Vec3, b_mod: &Vec3) -> Result<(Vec3, Provenance)> {
        if self.config.d_tol == 0.0 {
            return Ok((*b_mod, Provenance::Model));
        }
        let cone = self.cone(*apex, *b_mod, self.config.r_cone)?;
        let hit = cone_search(vol, &cone, &self.config.mask, self.ray_step(vol));
        Ok(gate_candidate(&hit.point, b_mod, self.config.d_tol))
    }

    /// Append a point, clipping it onto the plane if it crossed. Returns
    /// whether the plane was reached.
    fn push_point(
        &self,
        points: &mut Vec<Vec3>,
        provenance: &mut Vec<Provenance>,
        (p, tag): (Vec3, Provenance),
        plane: &BasePlane,
        flags: &mut TrajectoryFlags,
    ) -> bool {
        let from = *points.last().unwrap();
        let s1 = plane.signed_distance(&p);
        provenance.push(tag);
        if s1 > 0.0 {
            points.push(p);
            return false;
        }
        let s0 = plane.signed_distance(&from);
        let t = s0 / (s0 - s1);
        points.push(from + (p - from) * t);
        flags.plane_clipped = true;
        true
    }

    /// Backward model angles from the tip, one per model segment. Returns
    /// the angles and whether the walk had to stop early.
    fn model_angles(&self, est: &ModelEstimate) -> (Vec<f64>, bool) {
        let params = &self.config.model;
        let alpha0 = est.tip_alpha_sum.min(std::f64::consts::FRAC_PI_2 - 1e-6);
        let force = est.local_force.max(0.0);
        match simulate_backward(params, alpha0, force, params.n_seg) {
            Ok(state) => (state.alpha_sum, false),
            Err(Error::Singular { step, .. }) => {
                log::warn!("backward model walk went singular at step {step}; using straight steps past it");
                let valid = step.max(1);
                let alphas = simulate_backward(params, alpha0, force, valid)
                    .map(|s| s.alpha_sum)
                    .unwrap_or_else(|_| vec![alpha0]);
                (alphas, true)
            }
            Err(e) => {
                log::warn!("backward model walk failed ({e}); using straight steps");
                (vec![0.0], true)
            }
        }
    }
}

/// Linear interpolation of model angles placed at arc lengths `j * seg_len`.
/// Past the last angle the catheter is taken as straight (`0`), flagged by
/// the second value.
fn interp_angle(alphas: &[f64], seg_len: f64, s: f64) -> (f64, bool) {
    let x = s / seg_len;
    let j = x.floor() as usize;
    if j + 1 < alphas.len() {
        let t = x - j as f64;
        (alphas[j] * (1.0 - t) + alphas[j + 1] * t, false)
    } else if j + 1 == alphas.len() && x == j as f64 {
        (alphas[j], false)
    } else {
        (0.0, true)
    }
}
