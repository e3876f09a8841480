//! Model-guided segmentation of thin dark tubular trajectories (catheters)
//! in 3D scalar volumes.
//!
//! Starting from a known distal tip and a base plane (the insertion template),
//! each catheter is traced proximally with a sequence of cone searches. Every
//! cone proposes a continuation from image evidence (ray-cast dark-line
//! scores); an angular spring model of the catheter, estimated per catheter
//! from a precomputed force table, proposes where the catheter *should* go.
//! The two proposals are reconciled by a distance gate, and the resulting
//! points are smoothed by a Bezier fit.
//!
//! Module map:
//!
//! - [`volume`]: volumes, NRRD I/O, base plane and seed files.
//! - [`spring`]: forward/backward angular spring simulation and the `(a, d)` force table.
//! - [`features`]: dark-line ray scoring and cone search.
//! - [`engine`]: model estimation, local frames, gating, Bezier fitting, the full tracker.
//! - [`phantom`]: synthetic volumes with known centerlines and the standard benchmark.
//! - [`eval`]: Hausdorff scoring and the three-mode experiment harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod eval;
pub mod features;
pub mod geom;
pub mod phantom;
pub mod spring;
pub mod volume;

pub use engine::{
    fit_bezier, gate_candidate, make_local_frame, propose_model_point, DeflectionEstimate, LocalFrame, ModelEstimate,
    Provenance, SegmentationConfig, Segmenter, Trajectory,
};
pub use error::{Error, Result};
pub use eval::{hausdorff, run_experiments, CatheterScore, Experiment, ExperimentReport, ExperimentStats};
pub use features::{cone_search, line_score, ConeHit, ConeSpec, FeatureMask};
pub use geom::Vec3;
pub use phantom::{generate_phantom, standard_benchmark, BenchmarkBundle, Phantom, PhantomSpec};
pub use spring::{build_model_table, simulate_backward, simulate_forward, ModelTable, SpringModelParams, SpringState};
pub use volume::{BasePlane, SeedSet, Volume3D};
