//! Local coordinate frames along the trajectory and model proposals in them.

use crate::error::{Error, Result};
use crate::geom::{orthonormal_basis, Vec3};

const PARALLEL_EPS: f64 = 1e-6;

/// Right-handed local frame: deflection-plane normal, deflection direction
/// and reference direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub n_loc: Vec3,
    pub d_loc: Vec3,
    pub r_loc: Vec3,
}

impl LocalFrame {
    fn from_normal(n: Vec3, r_ref: &Vec3) -> Self {
        let d_loc = n.cross(r_ref).normalize();
        let r_loc = n.cross(&d_loc).normalize();
        LocalFrame { n_loc: n, d_loc, r_loc }
    }

    /// The same frame with the deflection direction (and plane normal)
    /// reversed; `r_loc` is unchanged.
    pub fn flipped(&self) -> Self {
        LocalFrame {
            n_loc: -self.n_loc,
            d_loc: -self.d_loc,
            r_loc: self.r_loc,
        }
    }
}

/// Build the frame for segment vector `l_s`:
/// `n = unit(unit(l_s) x r_ref)`, `d = unit(n x r_ref)`, `r = unit(n x d)`.
///
/// When `l_s` is parallel to `r_ref` the deflection plane is undefined; the
/// previous frame is reused, or a fixed frame containing `r_ref` is built.
pub fn make_local_frame(l_s: &Vec3, r_ref: &Vec3, prev: Option<&LocalFrame>) -> Result<LocalFrame> {
    let len = l_s.norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::Precondition("segment vector must be non-zero".into()));
    }
    let r_ref = r_ref.normalize();
    let cross = (l_s / len).cross(&r_ref);
    if cross.norm() < PARALLEL_EPS {
        return Ok(match prev {
            Some(f) => *f,
            None => LocalFrame::from_normal(orthonormal_basis(&r_ref).0, &r_ref),
        });
    }
    Ok(LocalFrame::from_normal(cross.normalize(), &r_ref))
}

/// Model proposal one step ahead: `t + d_seg * (d_loc sin(alpha) + r_loc cos(alpha))`.
pub fn propose_model_point(t_k: &Vec3, frame: &LocalFrame, alpha_sum_k: f64, d_seg: f64) -> Vec3 {
    t_k + (frame.d_loc * alpha_sum_k.sin() + frame.r_loc * alpha_sum_k.cos()) * d_seg
}
