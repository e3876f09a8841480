//! Angular spring catheter model.
//!
//! The catheter is a chain of `n_seg` rigid rods joined by torsional springs.
//! Bending is computed in the 2D deflection plane with `a` along the reference
//! (unbent) direction and `d` the lateral deflection. The forward scheme
//! starts at the clamped base; the backward scheme starts at the tip from an
//! estimated tip angle and force and walks toward the base.

mod table;

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use table::{build_model_table, Lookup, ModelTable};

/// `cos(alpha_sum)` at or below this is treated as singular.
pub const SINGULAR_EPS: f64 = 1e-6;

/// Largest tip angle tolerated when choosing the table's force range.
pub const MAX_TABLE_ANGLE: f64 = 80.0 * std::f64::consts::PI / 180.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringModelParams {
    /// Angular spring stiffness, µN·m per radian.
    pub k_a: f64,
    pub n_seg: usize,
    /// Full model length in mm.
    pub total_length: f64,
}

impl Default for SpringModelParams {
    fn default() -> Self {
        Self {
            k_a: 2050.0,
            n_seg: 20,
            total_length: 187.0,
        }
    }
}

impl SpringModelParams {
    pub fn new(k_a: f64, n_seg: usize, total_length: f64) -> Result<Self> {
        let p = Self {
            k_a,
            n_seg,
            total_length,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_a > 0.0 && self.k_a.is_finite()) {
            return Err(Error::param("k_a", format!("must be positive, got {}", self.k_a)));
        }
        if self.n_seg < 2 {
            return Err(Error::param("n_seg", format!("must be at least 2, got {}", self.n_seg)));
        }
        if !(self.total_length > 0.0 && self.total_length.is_finite()) {
            return Err(Error::param(
                "total_length",
                format!("must be positive, got {}", self.total_length),
            ));
        }
        Ok(())
    }

    pub fn seg_length(&self) -> f64 {
        self.total_length / self.n_seg as f64
    }
}

/// Per-segment state of a simulated catheter.
///
/// Segment `i` is a rod of length `seg_length` oriented at `alpha_sum[i]`
/// from the reference axis; `positions[i]` and `positions[i + 1]` are its
/// endpoints in `(a, d)` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SpringState {
    pub alpha: Vec<f64>,
    pub alpha_sum: Vec<f64>,
    pub force: Vec<f64>,
    pub positions: Vec<Vector2<f64>>,
}

impl SpringState {
    pub fn tip(&self) -> Vector2<f64> {
        *self.positions.last().expect("state has at least one position")
    }

    pub fn max_abs_angle(&self) -> f64 {
        self.alpha_sum.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// Forward simulation from the clamped base with tip-effective force `f0`:
/// `alpha[i+1] = F[i] / k_a`, `alpha_sum[i+1] = alpha_sum[i] + alpha[i+1]`,
/// `F[i+1] = F[i] * cos(alpha_sum[i+1])`.
pub fn simulate_forward(params: &SpringModelParams, f0: f64) -> Result<SpringState> {
    params.validate()?;
    if !(f0 >= 0.0 && f0.is_finite()) {
        return Err(Error::param("f0", format!("force must be non-negative, got {f0}")));
    }
    let n = params.n_seg;
    let mut alpha = Vec::with_capacity(n);
    let mut alpha_sum = Vec::with_capacity(n);
    let mut force = Vec::with_capacity(n);
    alpha.push(0.0);
    alpha_sum.push(0.0);
    force.push(f0);
    for i in 0..n - 1 {
        let a = force[i] / params.k_a;
        let s = alpha_sum[i] + a;
        if s.abs() >= FRAC_PI_2 {
            return Err(Error::OverDeflection {
                segment: i + 1,
                alpha_sum: s,
            });
        }
        alpha.push(a);
        alpha_sum.push(s);
        force.push(force[i] * s.cos());
    }
    let positions = integrate(&alpha_sum, params.seg_length(), 1.0);
    Ok(SpringState {
        alpha,
        alpha_sum,
        force,
        positions,
    })
}

/// Backward simulation from the tip: `F[i+1] = F[i] / cos(alpha_sum[i])`,
/// `alpha[i+1] = F[i+1] / k_a`, `alpha_sum[i+1] = alpha_sum[0] - sum_{j=1..=i+1} alpha[j]`.
///
/// `alpha[0]` is reported as zero (no joint distal of the tip). Positions
/// start at the tip and step proximally, i.e. toward decreasing `a`.
pub fn simulate_backward(
    params: &SpringModelParams,
    alpha0_sum: f64,
    f0_est: f64,
    n_steps: usize,
) -> Result<SpringState> {
    params.validate()?;
    if !(alpha0_sum.abs() < FRAC_PI_2) {
        return Err(Error::param(
            "alpha0_sum",
            format!("|alpha0_sum| must be < pi/2, got {alpha0_sum}"),
        ));
    }
    if !(f0_est >= 0.0 && f0_est.is_finite()) {
        return Err(Error::param(
            "f0_est",
            format!("force must be non-negative, got {f0_est}"),
        ));
    }
    if n_steps == 0 || n_steps > params.n_seg {
        return Err(Error::param(
            "n_steps",
            format!("must be in 1..={}, got {n_steps}", params.n_seg),
        ));
    }
    let mut alpha = Vec::with_capacity(n_steps);
    let mut alpha_sum = Vec::with_capacity(n_steps);
    let mut force = Vec::with_capacity(n_steps);
    alpha.push(0.0);
    alpha_sum.push(alpha0_sum);
    force.push(f0_est);
    for i in 0..n_steps - 1 {
        let c = alpha_sum[i].cos();
        if c <= SINGULAR_EPS {
            return Err(Error::Singular {
                step: i,
                alpha_sum: alpha_sum[i],
            });
        }
        let f = force[i] / c;
        let a = f / params.k_a;
        let s = alpha_sum[i] - a;
        if !(s.abs() < FRAC_PI_2 && s.cos() > SINGULAR_EPS) {
            return Err(Error::Singular {
                step: i + 1,
                alpha_sum: s,
            });
        }
        force.push(f);
        alpha.push(a);
        alpha_sum.push(s);
    }
    let positions = integrate(&alpha_sum, params.seg_length(), -1.0);
    Ok(SpringState {
        alpha,
        alpha_sum,
        force,
        positions,
    })
}

fn integrate(alpha_sum: &[f64], seg_length: f64, sign: f64) -> Vec<Vector2<f64>> {
    let mut positions = Vec::with_capacity(alpha_sum.len() + 1);
    let mut p = Vector2::zeros();
    positions.push(p);
    for s in alpha_sum {
        p += Vector2::new(s.cos(), s.sin()) * (sign * seg_length);
        positions.push(p);
    }
    positions
}

/// Largest force whose forward simulation keeps every `|alpha_sum|` below
/// `max_angle`, found by bisection.
pub fn find_f_max(params: &SpringModelParams, max_angle: f64) -> Result<f64> {
    params.validate()?;
    if !(max_angle > 0.0 && max_angle < FRAC_PI_2) {
        return Err(Error::param(
            "max_angle",
            format!("must lie in (0, pi/2), got {max_angle}"),
        ));
    }
    let within = |f: f64| matches!(simulate_forward(params, f), Ok(s) if s.max_abs_angle() < max_angle);
    let mut lo = 0.0;
    let mut hi = params.k_a * max_angle;
    while within(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if within(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Where a forward-simulated catheter crosses the row `a`, with the state of
/// the segment it crosses in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub d: f64,
    pub segment: usize,
    pub alpha_sum: f64,
    pub force: f64,
}

impl SpringState {
    /// Intersect a forward state with the line `a = const`. Returns `None`
    /// when the catheter does not reach `a`.
    pub fn crossing_at(&self, a: f64) -> Option<Crossing> {
        let p = &self.positions;
        if a < p[0].x || a > p[p.len() - 1].x {
            return None;
        }
        for i in 0..p.len() - 1 {
            let (a0, a1) = (p[i].x, p[i + 1].x);
            if a >= a0 && a <= a1 && a1 > a0 {
                let t = (a - a0) / (a1 - a0);
                return Some(Crossing {
                    d: p[i].y + t * (p[i + 1].y - p[i].y),
                    segment: i,
                    alpha_sum: self.alpha_sum[i],
                    force: self.force[i],
                });
            }
        }
        None
    }
}
