//! Hausdorff scoring against gold centerlines and the three-mode experiment
//! harness (model only, image only, hybrid).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{sample_bezier, Provenance, SegmentationConfig, Segmenter, Trajectory};
use crate::error::{Error, Result};
use crate::geom::{arr3, polyline_length, resample_polyline, Vec3};
use crate::phantom::BenchmarkBundle;

pub const DEFAULT_RESAMPLE_STEP: f64 = 0.5;

/// Dense samples of a trajectory: its Bezier curve when present, otherwise
/// its polyline, at spacing `step`.
pub fn sample_curve(traj: &Trajectory, step: f64) -> Result<Vec<Vec3>> {
    if !(step > 0.0) {
        return Err(Error::param("resample_step", format!("must be positive, got {step}")));
    }
    if traj.points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "trajectory has {} points",
            traj.points.len()
        )));
    }
    let line = if traj.bezier.len() >= 2 {
        // the control polygon bounds the curve length
        let n = ((polyline_length(&traj.bezier) / step).ceil() as usize * 4).max(64);
        sample_bezier(&traj.bezier, n)
    } else {
        traj.points.clone()
    };
    Ok(resample_polyline(&line, step))
}

/// `max_a min_b |a - b|` with an early exit once a point is known not to
/// raise the maximum.
pub fn directed_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut cmax = 0.0f64;
    for p in a {
        let mut cmin = f64::INFINITY;
        for q in b {
            let d = (p - q).norm_squared();
            if d < cmin {
                cmin = d;
                if cmin <= cmax {
                    break;
                }
            }
        }
        if cmin > cmax {
            cmax = cmin;
        }
    }
    cmax.sqrt()
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff_points(a: &[Vec3], b: &[Vec3]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Hausdorff distance between two trajectories sampled at `resample_step`.
pub fn hausdorff(a: &Trajectory, b: &Trajectory, resample_step: f64) -> Result<f64> {
    Ok(hausdorff_points(
        &sample_curve(a, resample_step)?,
        &sample_curve(b, resample_step)?,
    ))
}

/// Per-sample distances from `a` to the nearest sample of `b`.
pub fn nearest_distances(a: &[Vec3], b: &[Vec3]) -> Vec<f64> {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    ModelOnly,
    ImageOnly,
    Hybrid,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::ModelOnly, Experiment::ImageOnly, Experiment::Hybrid];

    /// Gate tolerance of the experiment; the hybrid uses `hybrid_tol`.
    pub fn d_tol(self, hybrid_tol: f64) -> f64 {
        match self {
            Experiment::ModelOnly => 0.0,
            Experiment::ImageOnly => f64::INFINITY,
            Experiment::Hybrid => hybrid_tol,
        }
    }

    /// The experiment a gate tolerance belongs to.
    pub fn from_tolerance(d_tol: f64) -> Self {
        if d_tol == 0.0 {
            Experiment::ModelOnly
        } else if d_tol.is_infinite() {
            Experiment::ImageOnly
        } else {
            Experiment::Hybrid
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::ModelOnly => "model_only",
            Experiment::ImageOnly => "image_only",
            Experiment::Hybrid => "hybrid",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            Error::param(
                "experiment",
                format!("expected model_only, image_only or hybrid, got `{s}`"),
            )
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatheterScore {
    pub catheter_id: String,
    pub experiment: Experiment,
    /// Hausdorff distance in mm; infinite when segmentation failed.
    pub hd: f64,
    pub n_points: usize,
    /// Counts of seed, image, model and compromise points.
    pub provenance_counts: [usize; 4],
    #[serde(skip)]
    pub nearest: Vec<f64>,
}

impl CatheterScore {
    pub fn failed(catheter_id: impl Into<String>, experiment: Experiment) -> Self {
        CatheterScore {
            catheter_id: catheter_id.into(),
            experiment,
            hd: f64::INFINITY,
            n_points: 0,
            provenance_counts: [0; 4],
            nearest: Vec::new(),
        }
    }

    /// Score `traj` against `gold`.
    pub fn compute(
        catheter_id: impl Into<String>,
        experiment: Experiment,
        traj: &Trajectory,
        gold: &Trajectory,
        resample_step: f64,
    ) -> Result<Self> {
        let a = sample_curve(traj, resample_step)?;
        let b = sample_curve(gold, resample_step)?;
        let counts = [
            Provenance::Seed,
            Provenance::Image,
            Provenance::Model,
            Provenance::Compromise,
        ]
        .map(|p| traj.count(p));
        Ok(CatheterScore {
            catheter_id: catheter_id.into(),
            experiment,
            hd: hausdorff_points(&a, &b),
            n_points: traj.points.len(),
            provenance_counts: counts,
            nearest: nearest_distances(&a, &b),
        })
    }

    fn provenance_field(&self) -> String {
        let [s, i, m, c] = self.provenance_counts;
        format!("seed:{s};image:{i};model:{m};compromise:{c}")
    }
}

/// Summary statistics of one experiment. Mean and standard deviation are
/// over finite scores; failures enter the median and outlier counts as
/// infinite distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub experiment: Experiment,
    pub n: usize,
    pub n_failed: usize,
    pub median: f64,
    pub mean: f64,
    pub std: f64,
    pub count_hd_gt_2mm: usize,
    pub count_hd_gt_3mm: usize,
}

impl ExperimentStats {
    pub fn from_scores(experiment: Experiment, hd: &[f64]) -> Self {
        let mut sorted = hd.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => sorted[n / 2],
            _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
        };
        let finite: Vec<f64> = hd.iter().copied().filter(|v| v.is_finite()).collect();
        let m = finite.len();
        let mean = if m == 0 {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / m as f64
        };
        let std = if m < 2 {
            0.0
        } else {
            (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
        };
        ExperimentStats {
            experiment,
            n,
            n_failed: n - m,
            median,
            mean,
            std,
            count_hd_gt_2mm: hd.iter().filter(|&&v| v > 2.0).count(),
            count_hd_gt_3mm: hd.iter().filter(|&&v| v > 3.0).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub stats: Vec<ExperimentStats>,
    pub scores: Vec<CatheterScore>,
}

impl ExperimentReport {
    /// Aggregate per-experiment statistics, experiments in canonical order.
    pub fn from_scores(scores: Vec<CatheterScore>) -> Self {
        let stats = Experiment::ALL
            .iter()
            .filter_map(|&e| {
                let hd: Vec<f64> = scores.iter().filter(|s| s.experiment == e).map(|s| s.hd).collect();
                (!hd.is_empty()).then(|| ExperimentStats::from_scores(e, &hd))
            })
            .collect();
        ExperimentReport { stats, scores }
    }

    pub fn stats_for(&self, e: Experiment) -> Option<&ExperimentStats> {
        self.stats.iter().find(|s| s.experiment == e)
    }

    /// One row per catheter and experiment.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["catheter_id", "experiment", "hd_mm", "n_points", "provenance_counts"])?;
        for s in &self.scores {
            let hd = if s.hd.is_finite() {
                format!("{:.6}", s.hd)
            } else {
                "inf".to_string()
            };
            out.write_record([
                s.catheter_id.as_str(),
                s.experiment.as_str(),
                hd.as_str(),
                s.n_points.to_string().as_str(),
                s.provenance_field().as_str(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Statistics only, as pretty JSON. Non-finite values become `null`.
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(
            &serde_json::json!({ "experiments": self.stats }),
        )?)
    }
}

/// Plottable record of one segmentation next to its gold standard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayEntry {
    pub catheter_id: String,
    pub experiment: Experiment,
    pub gold: Vec<[f64; 3]>,
    pub points: Vec<[f64; 3]>,
    pub curve: Vec<[f64; 3]>,
}

impl OverlayEntry {
    pub fn new(
        catheter_id: &str,
        experiment: Experiment,
        traj: &Trajectory,
        gold: &Trajectory,
        step: f64,
    ) -> Result<Self> {
        Ok(OverlayEntry {
            catheter_id: catheter_id.to_string(),
            experiment,
            gold: gold.points.iter().map(arr3).collect(),
            points: traj.points.iter().map(arr3).collect(),
            curve: sample_curve(traj, step)?.iter().map(arr3).collect(),
        })
    }
}

/// Segment every benchmark catheter in all three modes and score it.
pub fn run_experiments(bundle: &BenchmarkBundle, config: &SegmentationConfig) -> Result<ExperimentReport> {
    Ok(run_experiments_with_overlay(bundle, config, false)?.0)
}

/// As [`run_experiments`], optionally keeping the plottable overlay.
pub fn run_experiments_with_overlay(
    bundle: &BenchmarkBundle,
    config: &SegmentationConfig,
    keep_overlay: bool,
) -> Result<(ExperimentReport, Vec<OverlayEntry>)> {
    let mut config = config.clone();
    config.model = bundle.model.clone();
    let segmenter = Segmenter::new(config)?;
    let hybrid_tol = segmenter.config().d_tol;
    let cases = bundle.cases();

    let mut scores = Vec::with_capacity(cases.len() * 3);
    let mut overlay = Vec::new();
    for v in 0..bundle.specs.len() {
        let phantom = bundle.generate(v)?;
        let jobs: Vec<(&str, usize, Experiment)> = cases
            .iter()
            .filter(|c| c.volume == v)
            .flat_map(|c| Experiment::ALL.iter().map(move |&e| (c.id.as_str(), c.catheter, e)))
            .collect();
        let results: Vec<(CatheterScore, Option<OverlayEntry>)> = jobs
            .par_iter()
            .map(|&(id, c, e)| {
                let seg = segmenter.with_d_tol(e.d_tol(hybrid_tol));
                let gold = &phantom.gold[c];
                let outcome = seg
                    .segment_catheter(&phantom.volume, &phantom.seeds.tips[c], &phantom.seeds.plane)
                    .and_then(|t| {
                        let score = CatheterScore::compute(id, e, &t, gold, DEFAULT_RESAMPLE_STEP)?;
                        let ov = match keep_overlay {
                            true => Some(OverlayEntry::new(id, e, &t, gold, DEFAULT_RESAMPLE_STEP)?),
                            false => None,
                        };
                        Ok((score, ov))
                    });
                outcome.unwrap_or_else(|err| {
                    log::warn!("{id} ({e}): segmentation failed: {err}");
                    (CatheterScore::failed(id, e), None)
                })
            })
            .collect();
        for (s, o) in results {
            scores.push(s);
            overlay.extend(o);
        }
    }
    Ok((ExperimentReport::from_scores(scores), overlay))
}
