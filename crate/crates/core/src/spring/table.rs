//! Dense `(a, d) -> force` table built from a sweep of forward simulations.
//!
//! Every simulated catheter is intersected with each `a`-row of the grid,
//! giving exact support points along the row; nodes between supports are
//! filled by linear interpolation along `d`, and nodes past a row's reach
//! are filled along `a` from their column neighbours.
//!
//! Each node stores the generating force `F0` of the model catheter passing
//! through it (what identifies the catheter), plus the local segment force
//! and total angle there (what a backward walk from that point needs).

use std::io::Write;

use super::{find_f_max, simulate_forward, SpringModelParams, SpringState, MAX_TABLE_ANGLE};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ModelTable {
    params: SpringModelParams,
    resolution: usize,
    a_max: f64,
    d_max: f64,
    f_max: f64,
    // row-major: index = row (a) * resolution + col (d)
    force: Vec<f64>,
    local_force: Vec<f64>,
    alpha_sum: Vec<f64>,
    // largest simulated deflection reaching each a-row
    row_d_max: Vec<f64>,
}

/// Result of a table query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lookup {
    /// Generating force of the model catheter through the query point, µN.
    pub f_est: f64,
    /// Force of the segment passing through the query point, µN.
    pub local_force: f64,
    /// Total segment angle at the query point, rad.
    pub alpha_sum: f64,
    /// Set when the query fell outside the simulated region and was clamped.
    pub clamped: bool,
}

#[derive(Clone, Copy)]
struct Support {
    d: f64,
    force: f64,
    local_force: f64,
    alpha_sum: f64,
}

pub fn build_model_table(params: &SpringModelParams, f_samples: usize, resolution: usize) -> Result<ModelTable> {
    params.validate()?;
    if f_samples < 2 {
        return Err(Error::param(
            "f_samples",
            format!("must be at least 2, got {f_samples}"),
        ));
    }
    if resolution < 2 {
        return Err(Error::param(
            "resolution",
            format!("must be at least 2, got {resolution}"),
        ));
    }
    let f_max = find_f_max(params, MAX_TABLE_ANGLE)?;
    let curves: Vec<(f64, SpringState)> = (0..f_samples)
        .map(|s| {
            let f = f_max * s as f64 / (f_samples - 1) as f64;
            simulate_forward(params, f).map(|st| (f, st))
        })
        .collect::<Result<_>>()?;

    let a_max = params.total_length;
    let n = resolution;
    let a_at = |k: usize| a_max * k as f64 / (n - 1) as f64;
    let rows: Vec<Vec<Support>> = (0..n)
        .map(|k| {
            let a = a_at(k);
            let mut support: Vec<Support> = curves
                .iter()
                .filter_map(|(f, s)| {
                    s.crossing_at(a).map(|c| Support {
                        d: c.d,
                        force: *f,
                        local_force: c.force,
                        alpha_sum: c.alpha_sum,
                    })
                })
                .collect();
            // curves come in increasing force; a stable sort keeps the weakest
            // catheter first among coincident deflections
            support.sort_by(|x, y| x.d.total_cmp(&y.d));
            support.dedup_by(|later, earlier| later.d - earlier.d <= 1e-12 * (1.0 + earlier.d.abs()));
            support
        })
        .collect();
    let row_d_max: Vec<f64> = rows.iter().map(|r| r.last().map_or(0.0, |s| s.d)).collect();
    let d_max = row_d_max.iter().copied().fold(0.0, f64::max);
    let d_at = |j: usize| d_max * j as f64 / (n - 1) as f64;

    let mut force = vec![f64::NAN; n * n];
    let mut local_force = vec![f64::NAN; n * n];
    let mut alpha_sum = vec![f64::NAN; n * n];

    for (k, support) in rows.iter().enumerate() {
        let Some(last) = support.last() else {
            continue;
        };
        let row = k * n;
        let mut set = |j: usize, s: Support| {
            force[row + j] = s.force;
            local_force[row + j] = s.local_force;
            alpha_sum[row + j] = s.alpha_sum;
        };
        if support.len() == 1 {
            set(0, support[0]);
            continue;
        }
        let mut seg = 0;
        for j in 0..n {
            let d = d_at(j);
            if d > last.d * (1.0 + 1e-12) {
                break;
            }
            while seg + 2 < support.len() && support[seg + 1].d < d {
                seg += 1;
            }
            let (p, q) = (support[seg], support[seg + 1]);
            set(j, lerp_support(&p, &q, ((d - p.d) / (q.d - p.d)).clamp(0.0, 1.0)));
        }
    }

    for grid in [&mut force, &mut local_force, &mut alpha_sum] {
        fill_columns(grid, n);
    }
    // column fill can copy slightly weaker catheters past a row's hull
    for row in force.chunks_mut(n) {
        for j in 1..n {
            row[j] = row[j].max(row[j - 1]);
        }
    }

    Ok(ModelTable {
        params: params.clone(),
        resolution,
        a_max,
        d_max,
        f_max,
        force,
        local_force,
        alpha_sum,
        row_d_max,
    })
}

fn lerp_support(p: &Support, q: &Support, t: f64) -> Support {
    let l = |x: f64, y: f64| x + t * (y - x);
    Support {
        d: l(p.d, q.d),
        force: l(p.force, q.force),
        local_force: l(p.local_force, q.local_force),
        alpha_sum: l(p.alpha_sum, q.alpha_sum),
    }
}

/// Fill NaN nodes by linear interpolation along `a` within each column,
/// copying the nearest filled node past either end.
fn fill_columns(grid: &mut [f64], n: usize) {
    for j in 0..n {
        let filled: Vec<usize> = (0..n).filter(|&k| !grid[k * n + j].is_nan()).collect();
        if filled.is_empty() {
            continue;
        }
        for k in 0..n {
            if !grid[k * n + j].is_nan() {
                continue;
            }
            let above = filled.partition_point(|&f| f < k);
            let value = match (above.checked_sub(1).map(|i| filled[i]), filled.get(above)) {
                (Some(lo), Some(&hi)) => {
                    let t = (k - lo) as f64 / (hi - lo) as f64;
                    grid[lo * n + j] + t * (grid[hi * n + j] - grid[lo * n + j])
                }
                (Some(lo), None) => grid[lo * n + j],
                (None, Some(&hi)) => grid[hi * n + j],
                (None, None) => unreachable!(),
            };
            grid[k * n + j] = value;
        }
    }
}

impl ModelTable {
    pub fn params(&self) -> &SpringModelParams {
        &self.params
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn a_range(&self) -> (f64, f64) {
        (0.0, self.a_max)
    }

    pub fn d_range(&self) -> (f64, f64) {
        (0.0, self.d_max)
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn a_at(&self, k: usize) -> f64 {
        self.a_max * k as f64 / (self.resolution - 1) as f64
    }

    pub fn d_at(&self, j: usize) -> f64 {
        self.d_max * j as f64 / (self.resolution - 1) as f64
    }

    /// Stored `(F0, local force, alpha_sum)` at grid node `(k, j)`.
    pub fn node(&self, k: usize, j: usize) -> (f64, f64, f64) {
        let i = k * self.resolution + j;
        (self.force[i], self.local_force[i], self.alpha_sum[i])
    }

    /// Largest simulated deflection at `a`, linearly interpolated between rows.
    pub fn deflection_limit(&self, a: f64) -> f64 {
        let (k, t) = self.cell(a, self.a_max);
        self.row_d_max[k] * (1.0 - t) + self.row_d_max[k + 1] * t
    }

    fn cell(&self, x: f64, max: f64) -> (usize, f64) {
        let n = self.resolution;
        let f = if max > 0.0 { x / max * (n - 1) as f64 } else { 0.0 };
        let k = (f.floor().max(0.0) as usize).min(n - 2);
        (k, (f - k as f64).clamp(0.0, 1.0))
    }

    /// Bilinear lookup at `(a, d)`. Queries outside the simulated region are
    /// clamped to its boundary and flagged.
    pub fn lookup(&self, a: f64, d: f64) -> Lookup {
        let tol = 1e-9 * (1.0 + self.a_max);
        let mut clamped = false;
        let a = if a < -tol || a > self.a_max + tol {
            clamped = true;
            a.clamp(0.0, self.a_max)
        } else {
            a.clamp(0.0, self.a_max)
        };
        let limit = self.deflection_limit(a);
        let d = if d < -tol {
            clamped = true;
            0.0
        } else if d > limit + tol {
            clamped = true;
            limit
        } else {
            d.clamp(0.0, limit.max(0.0))
        };

        let n = self.resolution;
        let (k, ta) = self.cell(a, self.a_max);
        let (j, td) = self.cell(d, self.d_max);
        let bilinear = |g: &[f64]| {
            let v00 = g[k * n + j];
            let v01 = g[k * n + j + 1];
            let v10 = g[(k + 1) * n + j];
            let v11 = g[(k + 1) * n + j + 1];
            let r0 = v00 + td * (v01 - v00);
            let r1 = v10 + td * (v11 - v10);
            r0 + ta * (r1 - r0)
        };
        Lookup {
            f_est: bilinear(&self.force),
            local_force: bilinear(&self.local_force),
            alpha_sum: bilinear(&self.alpha_sum),
            clamped,
        }
    }

    /// CSV with one row per node: `a,d,F,alpha_sum,local_force`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["a", "d", "F", "alpha_sum", "local_force"])?;
        for k in 0..self.resolution {
            for j in 0..self.resolution {
                let (f, lf, al) = self.node(k, j);
                out.write_record(&[
                    format!("{}", self.a_at(k)),
                    format!("{}", self.d_at(j)),
                    format!("{f}"),
                    format!("{al}"),
                    format!("{lf}"),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
