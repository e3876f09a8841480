//! Least-squares Bezier fitting with chord-length parameters.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Point on the Bezier curve with control points `ctrl` at `t` (de Casteljau).
pub fn bezier_point(ctrl: &[Vec3], t: f64) -> Vec3 {
    let mut tmp = ctrl.to_vec();
    for level in (1..tmp.len()).rev() {
        for i in 0..level {
            tmp[i] = tmp[i] * (1.0 - t) + tmp[i + 1] * t;
        }
    }
    tmp[0]
}

/// `n` points at uniform parameter spacing, both ends included.
pub fn sample_bezier(ctrl: &[Vec3], n: usize) -> Vec<Vec3> {
    let n = n.max(2);
    (0..n).map(|i| bezier_point(ctrl, i as f64 / (n - 1) as f64)).collect()
}

fn bernstein_row(degree: usize, t: f64) -> Vec<f64> {
    // iterative build avoids binomials
    let mut b = vec![0.0; degree + 1];
    b[0] = 1.0;
    for j in 1..=degree {
        let mut prev = 0.0;
        for bk in b.iter_mut().take(j) {
            let cur = *bk;
            *bk = prev + (1.0 - t) * cur;
            prev = t * cur;
        }
        b[j] = prev;
    }
    b
}

/// Fit a degree `n_control - 1` Bezier to ordered `points`. The first and
/// last control points are the first and last input points.
pub fn fit_bezier(points: &[Vec3], n_control: usize) -> Result<Vec<Vec3>> {
    if n_control < 2 {
        return Err(Error::param(
            "n_control",
            format!("must be at least 2, got {n_control}"),
        ));
    }
    if points.len() < n_control {
        return Err(Error::param(
            "n_control",
            format!("{} points cannot determine {n_control} control points", points.len()),
        ));
    }
    let mut chord = Vec::with_capacity(points.len());
    chord.push(0.0);
    for w in points.windows(2) {
        chord.push(chord.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *chord.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let first = points[0];
    let last = *points.last().unwrap();
    if n_control == 2 {
        return Ok(vec![first, last]);
    }

    let degree = n_control - 1;
    let m = points.len();
    let inner = n_control - 2;
    let mut a = DMatrix::<f64>::zeros(m, inner);
    let mut rhs = DMatrix::<f64>::zeros(m, 3);
    for (i, (p, s)) in points.iter().zip(&chord).enumerate() {
        let b = bernstein_row(degree, s / total);
        for j in 0..inner {
            a[(i, j)] = b[j + 1];
        }
        let r = p - first * b[0] - last * b[degree];
        for c in 0..3 {
            rhs[(i, c)] = r[c];
        }
    }
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Degenerate(format!("bezier least squares failed: {e}")))?;
    let mut ctrl = Vec::with_capacity(n_control);
    ctrl.push(first);
    for j in 0..inner {
        ctrl.push(Vec3::new(sol[(j, 0)], sol[(j, 1)], sol[(j, 2)]));
    }
    ctrl.push(last);
    Ok(ctrl)
}
