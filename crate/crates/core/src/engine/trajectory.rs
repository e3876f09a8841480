//! Segmentation output and its JSON form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gate::Provenance;
use crate::error::Result;
use crate::geom::{arr3, vec3, Vec3};

/// Model parameters estimated for one catheter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelEstimate {
    /// Tip-to-plane distance, mm.
    pub a: f64,
    /// Estimated lateral deflection, mm.
    pub d: f64,
    /// Angle between the long segment and the reference axis, rad.
    pub alpha0_sum: f64,
    /// Generating force of the matched model catheter, µN.
    pub f0_est: f64,
    /// Segment force at the tip of the matched model catheter, µN.
    pub local_force: f64,
    /// Angle the backward model walk starts from, rad.
    pub tip_alpha_sum: f64,
    /// Tip to mid-catheter vector from the initialization cone.
    pub l_long: Vec3,
    /// Best score of the initialization cone.
    pub init_score: f64,
    pub lookup_clamped: bool,
    /// The initialization cone found no convincing dark line.
    pub init_fallback: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryFlags {
    pub lookup_clamped: bool,
    pub init_fallback: bool,
    /// The backward model walk went singular; straight steps were used past it.
    pub model_fallback: bool,
    /// The last accepted point crossed the base plane and was clipped onto it.
    pub plane_clipped: bool,
    /// The last point stopped short of the plane and was moved onto it.
    pub plane_extended: bool,
}

/// Ordered points from the distal tip toward the base plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TrajectoryJson", into = "TrajectoryJson")]
pub struct Trajectory {
    pub points: Vec<Vec3>,
    /// Bezier control points; empty for raw polylines such as gold standards.
    pub bezier: Vec<Vec3>,
    pub provenance: Vec<Provenance>,
    pub estimates: Option<ModelEstimate>,
    pub flags: TrajectoryFlags,
}

impl Trajectory {
    /// A bare polyline with no provenance or estimates.
    pub fn from_polyline(points: Vec<Vec3>) -> Self {
        Trajectory {
            points,
            bezier: Vec::new(),
            provenance: Vec::new(),
            estimates: None,
            flags: TrajectoryFlags::default(),
        }
    }

    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == tag).count()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct EstimatesJson {
    a: f64,
    d: f64,
    alpha0_sum: f64,
    f0_est: f64,
    #[serde(default)]
    local_force: f64,
    #[serde(default)]
    tip_alpha_sum: f64,
    #[serde(default)]
    l_long: [f64; 3],
    #[serde(default)]
    init_score: f64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryJson {
    points: Vec<[f64; 3]>,
    #[serde(default)]
    bezier: Vec<[f64; 3]>,
    #[serde(default)]
    provenance: Vec<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    estimates: Option<EstimatesJson>,
    #[serde(default)]
    flags: TrajectoryFlags,
}

impl From<Trajectory> for TrajectoryJson {
    fn from(t: Trajectory) -> Self {
        TrajectoryJson {
            points: t.points.iter().map(arr3).collect(),
            bezier: t.bezier.iter().map(arr3).collect(),
            provenance: t.provenance,
            estimates: t.estimates.map(|e| EstimatesJson {
                a: e.a,
                d: e.d,
                alpha0_sum: e.alpha0_sum,
                f0_est: e.f0_est,
                local_force: e.local_force,
                tip_alpha_sum: e.tip_alpha_sum,
                l_long: arr3(&e.l_long),
                init_score: e.init_score,
            }),
            flags: t.flags,
        }
    }
}

impl From<TrajectoryJson> for Trajectory {
    fn from(j: TrajectoryJson) -> Self {
        let flags = j.flags;
        Trajectory {
            points: j.points.into_iter().map(vec3).collect(),
            bezier: j.bezier.into_iter().map(vec3).collect(),
            provenance: j.provenance,
            estimates: j.estimates.map(|e| ModelEstimate {
                a: e.a,
                d: e.d,
                alpha0_sum: e.alpha0_sum,
                f0_est: e.f0_est,
                local_force: e.local_force,
                tip_alpha_sum: e.tip_alpha_sum,
                l_long: vec3(e.l_long),
                init_score: e.init_score,
                lookup_clamped: flags.lookup_clamped,
                init_fallback: flags.init_fallback,
            }),
            flags,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip() {
        let t = Trajectory {
            points: vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.5, 2.0, 0.25)],
            bezier: vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.5, 2.0, 0.25)],
            provenance: vec![Provenance::Seed, Provenance::Compromise],
            estimates: Some(ModelEstimate {
                a: 2.75,
                d: 0.5,
                alpha0_sum: 0.1,
                f0_est: 12.5,
                local_force: 11.0,
                tip_alpha_sum: 0.12,
                l_long: Vec3::new(0.0, 0.0, -1.375),
                init_score: -80.0,
                lookup_clamped: true,
                init_fallback: false,
            }),
            flags: TrajectoryFlags {
                lookup_clamped: true,
                ..Default::default()
            },
        };
        let s = t.to_json_string().unwrap();
        assert!(s.contains("\"compromise\""));
        assert!(s.contains("\"f0_est\""));
        assert_eq!(Trajectory::from_json_str(&s).unwrap(), t);
    }

    #[test]
    fn minimal_document_parses() {
        let t = Trajectory::from_json_str(r#"{"points": [[0,0,0],[0,0,1]]}"#).unwrap();
        assert_eq!(t.points.len(), 2);
        assert!(t.bezier.is_empty() && t.estimates.is_none());
    }
}
