//! Dark-line image evidence: ray scoring with a center-minus-ring mask and
//! cone search over a disc of candidate end points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{orthonormal_basis, Vec3};
use crate::volume::Volume3D;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
const TIE_REL: f64 = 1e-9;

/// Cross-section mask: intensity at the ray minus the mean of a ring of
/// samples around it, in the plane orthogonal to the ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureMask {
    pub ring_radius: f64,
    pub n_ring_samples: usize,
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask {
            ring_radius: 1.6,
            n_ring_samples: 8,
        }
    }
}

impl FeatureMask {
    pub fn validate(&self) -> Result<()> {
        if !(self.ring_radius > 0.0 && self.ring_radius.is_finite()) {
            return Err(Error::param(
                "ring_radius",
                format!("must be positive, got {}", self.ring_radius),
            ));
        }
        if self.n_ring_samples < 4 {
            return Err(Error::param(
                "n_ring_samples",
                format!("must be at least 4, got {}", self.n_ring_samples),
            ));
        }
        Ok(())
    }
}

/// Search cone: rays from `apex` to candidates on a disc of `base_radius`
/// centered at `base_center`, orthogonal to the cone axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    pub apex: Vec3,
    pub base_center: Vec3,
    pub base_radius: f64,
    pub n_rays: usize,
    /// Rounds of local re-sampling around the best candidate.
    pub refine_levels: usize,
}

impl ConeSpec {
    pub fn new(apex: Vec3, base_center: Vec3, base_radius: f64, n_rays: usize) -> Result<Self> {
        let cone = ConeSpec {
            apex,
            base_center,
            base_radius,
            n_rays,
            refine_levels: 0,
        };
        cone.validate()?;
        Ok(cone)
    }

    pub fn with_refinement(mut self, levels: usize) -> Self {
        self.refine_levels = levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_radius >= 0.0 && self.base_radius.is_finite()) {
            return Err(Error::param(
                "base_radius",
                format!("must be non-negative, got {}", self.base_radius),
            ));
        }
        if self.n_rays == 0 {
            return Err(Error::param("n_rays", "must be at least 1"));
        }
        if !((self.base_center - self.apex).norm() > 0.0) {
            return Err(Error::Degenerate("cone apex coincides with its base center".into()));
        }
        Ok(())
    }

    fn axis(&self) -> Vec3 {
        (self.base_center - self.apex).normalize()
    }
}

/// Best candidate of a cone search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeHit {
    pub point: Vec3,
    pub score: f64,
    /// Number of rays cast, refinement included.
    pub n_evaluated: usize,
}

/// Mean of `I(s) - ring(s)` over samples `s` spaced at most `step` along
/// `[from, to]`. Lower means more catheter-like.
pub fn line_score(vol: &Volume3D, from: &Vec3, to: &Vec3, mask: &FeatureMask, step: f64) -> f64 {
    let seg = to - from;
    let len = seg.norm();
    if len == 0.0 || !(step > 0.0) {
        return 0.0;
    }
    let dir = seg / len;
    let (e1, e2) = orthonormal_basis(&dir);
    let ring: Vec<Vec3> = (0..mask.n_ring_samples)
        .map(|i| {
            let phi = std::f64::consts::TAU * i as f64 / mask.n_ring_samples as f64;
            (e1 * phi.cos() + e2 * phi.sin()) * mask.ring_radius
        })
        .collect();
    let n = (len / step).ceil().max(1.0) as usize;
    let mut total = 0.0;
    for i in 0..=n {
        let p = from + seg * (i as f64 / n as f64);
        let center = vol.sample(&p);
        let around: f64 = ring.iter().map(|o| vol.sample(&(p + o))).sum::<f64>() / ring.len() as f64;
        total += center - around;
    }
    total / (n + 1) as f64
}

/// Sunflower layout of `n` points on a disc, center first.
pub fn sunflower_disc(center: &Vec3, normal: &Vec3, radius: f64, n: usize) -> Vec<Vec3> {
    let (e1, e2) = orthonormal_basis(&normal.normalize());
    if n <= 1 || radius == 0.0 {
        return vec![*center];
    }
    (0..n)
        .map(|i| {
            let r = radius * (i as f64 / (n - 1) as f64).sqrt();
            let phi = i as f64 * GOLDEN_ANGLE;
            center + (e1 * phi.cos() + e2 * phi.sin()) * r
        })
        .collect()
}

/// Cast a ray to every candidate on the cone base and return the one with
/// the lowest score. Near-equal scores go to the candidate closest to the
/// base center.
pub fn cone_search(vol: &Volume3D, cone: &ConeSpec, mask: &FeatureMask, step: f64) -> ConeHit {
    let normal = cone.axis();
    let mut best = Best::new(cone.base_center);
    for q in sunflower_disc(&cone.base_center, &normal, cone.base_radius, cone.n_rays) {
        best.offer(q, line_score(vol, &cone.apex, &q, mask, step));
    }
    let mut radius = cone.base_radius;
    let mut n = cone.n_rays;
    let refine_rays = (cone.n_rays / 4).max(7);
    for _ in 0..cone.refine_levels {
        if radius == 0.0 || n <= 1 {
            break;
        }
        // the previous layout leaves gaps of about this size between candidates
        radius *= (std::f64::consts::PI / n as f64).sqrt();
        n = refine_rays;
        let center = best.point;
        for q in sunflower_disc(&center, &normal, radius, n).into_iter().skip(1) {
            best.offer(q, line_score(vol, &cone.apex, &q, mask, step));
        }
    }
    ConeHit {
        point: best.point,
        score: best.score,
        n_evaluated: best.count,
    }
}

struct Best {
    anchor: Vec3,
    point: Vec3,
    score: f64,
    count: usize,
}

impl Best {
    fn new(anchor: Vec3) -> Self {
        Best {
            anchor,
            point: anchor,
            score: f64::INFINITY,
            count: 0,
        }
    }

    fn offer(&mut self, q: Vec3, score: f64) {
        self.count += 1;
        let tol = TIE_REL * self.score.abs().max(score.abs()).max(1.0);
        let better = if self.score.is_infinite() {
            true
        } else if (score - self.score).abs() <= tol {
            (q - self.anchor).norm() < (self.point - self.anchor).norm()
        } else {
            score < self.score
        };
        if better {
            self.point = q;
            self.score = score;
        }
    }
}
