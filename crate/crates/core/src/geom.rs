//! Small 3D helpers shared across modules. World units are millimeters.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

#[inline]
pub fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[inline]
pub fn arr3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Two unit vectors spanning the plane orthogonal to `dir` (assumed unit).
pub fn orthonormal_basis(dir: &Vec3) -> (Vec3, Vec3) {
    // pick the world axis least aligned with `dir`
    let ax = dir.x.abs();
    let ay = dir.y.abs();
    let az = dir.z.abs();
    let helper = if ax <= ay && ax <= az {
        Vec3::x()
    } else if ay <= az {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = dir.cross(&helper).normalize();
    let e2 = dir.cross(&e1);
    (e1, e2)
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Minimum distance between closed segments `[p0, p1]` and `[q0, q1]`.
pub fn segment_segment_distance(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    const EPS: f64 = 1e-18;

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

/// Total length of a polyline.
pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Resample a polyline at (approximately) uniform arc-length spacing `step`.
///
/// The first and last vertices are always included; interior samples sit at
/// exact multiples of `step` along the polyline.
pub fn resample_polyline(points: &[Vec3], step: f64) -> Vec<Vec3> {
    debug_assert!(step > 0.0);
    let mut out = Vec::new();
    let Some(first) = points.first() else {
        return out;
    };
    out.push(*first);
    let mut next_s = step;
    let mut acc = 0.0;
    for w in points.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        if len == 0.0 {
            continue;
        }
        while next_s < acc + len {
            let t = (next_s - acc) / len;
            out.push(w[0] + seg * t);
            next_s += step;
        }
        acc += len;
    }
    let last = *points.last().unwrap();
    if points.len() > 1 && out.last() != Some(&last) {
        out.push(last);
    }
    out
}
