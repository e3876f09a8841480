//! Tolerance gate between the image candidate and the model proposal.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

/// Where an accepted trajectory point came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// The user-supplied distal tip.
    Seed,
    Image,
    Model,
    Compromise,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::Image => "image",
            Provenance::Model => "model",
            Provenance::Compromise => "compromise",
        }
    }
}

/// Accept `c_img` when it lies within `d_tol` of `b_mod`; otherwise step
/// from `b_mod` toward `c_img` by `min(d_tol, |c_img - b_mod| / 2)`.
///
/// `d_tol = 0` always yields the model point, `d_tol = inf` always the image point.
pub fn gate_candidate(c_img: &Vec3, b_mod: &Vec3, d_tol: f64) -> (Vec3, Provenance) {
    if d_tol == 0.0 {
        return (*b_mod, Provenance::Model);
    }
    let delta = c_img - b_mod;
    let dist = delta.norm();
    if dist < d_tol {
        return (*c_img, Provenance::Image);
    }
    let shift = d_tol.min(0.5 * dist);
    (b_mod + delta * (shift / dist), Provenance::Compromise)
}
