use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Volume3D;
use crate::error::{Error, Result};
use crate::geom::{arr3, vec3, Vec3};

/// The insertion template plane. `normal` is the reference catheter
/// direction and points distally, into the body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasePlane {
    point: Vec3,
    normal: Vec3,
}

impl BasePlane {
    /// The normal is normalized; a zero normal is rejected.
    pub fn new(point: Vec3, normal: Vec3) -> Result<Self> {
        let n = normal.norm();
        if !(n > 1e-12 && n.is_finite()) {
            return Err(Error::param("plane.normal", "normal must be a non-zero finite vector"));
        }
        Ok(Self {
            point,
            normal: normal / n,
        })
    }

    pub fn point(&self) -> Vec3 {
        self.point
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        distance_to_plane(self, p)
    }

    pub fn project(&self, p: &Vec3) -> Vec3 {
        p - self.normal * self.signed_distance(p)
    }
}

/// Signed distance of `p` from the plane, positive on the distal side.
pub fn distance_to_plane(plane: &BasePlane, p: &Vec3) -> f64 {
    (p - plane.point).dot(&plane.normal)
}

/// Distal tips plus the base plane they were inserted through.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSet {
    pub tips: Vec<Vec3>,
    pub plane: BasePlane,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct PlaneJson {
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct SeedJson {
    plane: PlaneJson,
    tips: Vec<[f64; 3]>,
}

impl PlaneJson {
    pub(crate) fn to_plane(&self) -> Result<BasePlane> {
        BasePlane::new(vec3(self.point), vec3(self.normal))
    }

    pub(crate) fn from_plane(p: &BasePlane) -> Self {
        Self {
            point: arr3(&p.point),
            normal: arr3(&p.normal),
        }
    }
}

impl SeedSet {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: SeedJson = serde_json::from_str(s)?;
        Ok(SeedSet {
            tips: raw.tips.iter().copied().map(vec3).collect(),
            plane: raw.plane.to_plane()?,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        let raw = SeedJson {
            plane: PlaneJson::from_plane(&self.plane),
            tips: self.tips.iter().map(arr3).collect(),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// Check that every tip lies inside `volume` and distal of the plane.
    pub fn validate(&self, volume: &Volume3D) -> Result<()> {
        for (i, tip) in self.tips.iter().enumerate() {
            if !volume.contains(tip) {
                return Err(Error::Precondition(format!(
                    "tip {i} at {tip:?} lies outside the volume"
                )));
            }
            if self.plane.signed_distance(tip) <= 0.0 {
                return Err(Error::Precondition(format!("tip {i} is not distal of the base plane")));
            }
        }
        Ok(())
    }
}
