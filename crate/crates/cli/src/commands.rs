use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use cathseg::eval::{run_experiments_with_overlay, OverlayEntry};
use cathseg::phantom::{CatheterSpec, Distractor};
use cathseg::spring::{build_model_table, simulate_forward, SpringModelParams};
use cathseg::volume::{load_volume, save_volume, SeedSet};
use cathseg::{
    generate_phantom, standard_benchmark, CatheterScore, Experiment, ExperimentReport, Phantom, PhantomSpec,
    SegmentationConfig, Segmenter, Trajectory,
};

use crate::failure::Failure;
use crate::io::{catheter_file, catheter_files, create_dir, load_json, write_json};
use crate::manifest::{CatheterRun, RunManifest};
use crate::{BenchmarkArgs, EvaluateArgs, PhantomArgs, SegmentArgs, SimulateArgs};

type CmdResult = Result<(), Failure>;

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    if jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn load_config(path: Option<&Path>) -> Result<SegmentationConfig, Failure> {
    let config: SegmentationConfig = match path {
        Some(p) => load_json(p)?,
        None => SegmentationConfig::default(),
    };
    Ok(config)
}

#[derive(Serialize)]
struct ModelCatheter {
    f0: f64,
    /// `(a, d)` joint positions from the base, mm.
    positions: Vec<[f64; 2]>,
    alpha_sum: Vec<f64>,
    force: Vec<f64>,
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let start = Instant::now();
    let mut params: SpringModelParams = match &args.model {
        Some(p) => load_json(p)?,
        None => SpringModelParams::default(),
    };
    if let Some(k) = args.k_a {
        params.k_a = k;
    }
    if let Some(n) = args.n_seg {
        params.n_seg = n;
    }
    if let Some(l) = args.length {
        params.total_length = l;
    }
    params.validate()?;
    if args.forces < 2 {
        return Err(Failure::Usage("--forces must be at least 2".into()));
    }
    let table = build_model_table(&params, args.f_samples, args.resolution)?;
    let out = create_dir(&args.out_dir)?;

    let csv_path = out.join("model_table.csv");
    let file = File::create(&csv_path).map_err(|e| Failure::io(&csv_path, e))?;
    table.write_csv(BufWriter::new(file))?;

    let catheters = (0..args.forces)
        .map(|i| {
            let f0 = table.f_max() * i as f64 / (args.forces - 1) as f64;
            let s = simulate_forward(&params, f0)?;
            Ok(ModelCatheter {
                f0,
                positions: s.positions.iter().map(|p| [p.x, p.y]).collect(),
                alpha_sum: s.alpha_sum,
                force: s.force,
            })
        })
        .collect::<Result<Vec<_>, cathseg::Error>>()?;
    write_json(
        &out.join("catheters.json"),
        &serde_json::json!({ "params": params, "f_max": table.f_max(), "catheters": catheters }),
    )?;

    let mut manifest = RunManifest::new(
        "simulate",
        serde_json::json!({
            "model": params,
            "f_samples": args.f_samples,
            "resolution": args.resolution,
            "forces": args.forces,
        }),
    );
    if let Some(p) = &args.model {
        manifest = manifest.input(p);
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.write(&out)
}

fn template() -> PhantomSpec {
    let cath = |f0, depth, az, entry| CatheterSpec {
        f0,
        insertion_depth: depth,
        deflection_azimuth: az,
        entry_point: entry,
        contrast: None,
    };
    PhantomSpec {
        catheters: vec![
            cath(0.0, 74.0, 0.0, [40.0, 40.0]),
            cath(30.0, 70.0, 1.2, [50.0, 50.0]),
            cath(55.0, 80.0, 3.5, [60.0, 45.0]),
        ],
        distractors: vec![
            Distractor::Tube {
                start: [30.0, 60.0, 20.0],
                end: [70.0, 55.0, 50.0],
                radius: 0.7,
                contrast: 100.0,
            },
            Distractor::Blob {
                center: [45.0, 60.0, 40.0],
                radius: 2.0,
                contrast: 80.0,
            },
        ],
        ..PhantomSpec::default()
    }
}

fn write_phantom(p: &Phantom, dir: &Path) -> CmdResult {
    let gold_dir = create_dir(&dir.join("gold"))?;
    let volume_path = dir.join("volume.nrrd");
    save_volume(&p.volume, &volume_path)?;
    p.seeds.save(dir.join("seeds.json"))?;
    for (i, g) in p.gold.iter().enumerate() {
        g.save(gold_dir.join(catheter_file(i)))?;
    }
    Ok(())
}

pub fn phantom(args: &PhantomArgs) -> CmdResult {
    if args.template {
        let text = template().to_json_string()?;
        println!("{text}");
        return Ok(());
    }
    let (Some(spec_path), Some(out_dir)) = (&args.spec, &args.out_dir) else {
        return Err(Failure::Usage("--spec and --out-dir are required".into()));
    };
    let start = Instant::now();
    let spec: PhantomSpec = load_json(spec_path)?;
    let model = SpringModelParams::default();
    let p = generate_phantom(&spec, &model)?;
    for w in &p.warnings {
        log::warn!("{w}");
    }
    let out = create_dir(out_dir)?;
    write_phantom(&p, &out)?;
    write_json(&out.join("spec.json"), &spec)?;

    let mut manifest =
        RunManifest::new("phantom", serde_json::json!({ "spec": spec, "model": model })).input(spec_path);
    manifest.rng_seeds = vec![spec.rng_seed];
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.write(&out)
}

pub fn segment(args: &SegmentArgs) -> CmdResult {
    let start = Instant::now();
    let mut config = load_config(args.config.as_deref())?;
    if let Some(d) = args.dtol {
        config.d_tol = d;
    }
    if args.eq4_literal {
        config.eq4_literal = true;
    }
    let segmenter = Segmenter::new(config)?;
    let pool = thread_pool(args.jobs)?;

    let volume = load_volume(&args.volume).map_err(|e| in_file(&args.volume, e))?;
    let seeds = SeedSet::load(&args.seeds).map_err(|e| in_file(&args.seeds, e))?;
    let out = create_dir(&args.out_dir)?;
    let traj_dir = create_dir(&out.join("trajectories"))?;

    let runs: Vec<CatheterRun> = pool.install(|| {
        seeds
            .tips
            .par_iter()
            .enumerate()
            .map(|(i, tip)| {
                let id = format!("catheter_{i:03}");
                let t0 = Instant::now();
                let result = check_tip(&volume, tip)
                    .and_then(|()| segmenter.segment_catheter(&volume, tip, &seeds.plane))
                    .and_then(|t| {
                        let path = traj_dir.join(catheter_file(i));
                        t.save(&path)?;
                        Ok(path)
                    });
                let wall_time_s = t0.elapsed().as_secs_f64();
                match result {
                    Ok(path) => CatheterRun {
                        id,
                        wall_time_s,
                        output: Some(format!("trajectories/{}", path.file_name().unwrap().to_string_lossy())),
                        error: None,
                    },
                    Err(e) => {
                        log::error!("{id}: {e}");
                        CatheterRun {
                            id,
                            wall_time_s,
                            output: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            })
            .collect()
    });

    let mut manifest = RunManifest::new("segment", to_value(segmenter.config()))
        .input(&args.volume)
        .input(&args.seeds);
    if let Some(p) = &args.config {
        manifest = manifest.input(p);
    }
    manifest.catheters = runs;
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.write(&out)?;

    let failed = manifest.failed().count();
    if failed > 0 {
        return Err(Failure::Partial {
            failed,
            total: seeds.tips.len(),
        });
    }
    Ok(())
}

fn in_file(path: &Path, e: cathseg::Error) -> Failure {
    match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        f => f,
    }
}

fn check_tip(volume: &cathseg::volume::Volume3D, tip: &cathseg::Vec3) -> cathseg::Result<()> {
    if volume.contains(tip) {
        Ok(())
    } else {
        Err(cathseg::Error::Precondition(format!(
            "tip ({:.2}, {:.2}, {:.2}) lies outside the volume",
            tip.x, tip.y, tip.z
        )))
    }
}

/// One `segment` output directory read back for scoring.
struct SegmentedRun {
    experiment: Experiment,
    trajectories: BTreeMap<String, PathBuf>,
    failed: BTreeSet<String>,
}

fn read_run(dir: &Path, label: Option<Experiment>) -> Result<SegmentedRun, Failure> {
    let manifest_path = dir.join("manifest.json");
    let manifest = manifest_path
        .exists()
        .then(|| RunManifest::load(&manifest_path))
        .transpose()?;
    let experiment = match (label, &manifest) {
        (Some(e), _) => e,
        (None, Some(m)) => {
            let tol = m
                .config
                .get("d_tol")
                .ok_or_else(|| Failure::Input(format!("{}: manifest has no d_tol", manifest_path.display())))?;
            let tol = match tol {
                serde_json::Value::String(s) => cathseg::engine::parse_tolerance(s).map_err(Failure::Input)?,
                v => v
                    .as_f64()
                    .ok_or_else(|| Failure::Input(format!("{}: bad d_tol {v}", manifest_path.display())))?,
            };
            Experiment::from_tolerance(tol)
        }
        (None, None) => {
            return Err(Failure::Usage(format!(
                "{} has no manifest.json; pass --experiment",
                dir.display()
            )))
        }
    };
    let traj_dir = if dir.join("trajectories").is_dir() {
        dir.join("trajectories")
    } else {
        dir.to_path_buf()
    };
    let failed = manifest
        .map(|m| m.failed().map(|c| c.id.clone()).collect())
        .unwrap_or_default();
    Ok(SegmentedRun {
        experiment,
        trajectories: catheter_files(&traj_dir)?.into_iter().collect(),
        failed,
    })
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let start = Instant::now();
    if args.resample_step.is_nan() || args.resample_step <= 0.0 {
        return Err(Failure::Usage("--resample-step must be positive".into()));
    }
    let label = args
        .experiment
        .as_deref()
        .map(|s| s.parse::<Experiment>())
        .transpose()?;
    if label.is_some() && args.segmented.len() > 1 {
        return Err(Failure::Usage(
            "--experiment applies to a single --segmented run".into(),
        ));
    }
    let gold: BTreeMap<String, PathBuf> = catheter_files(&args.gold)?.into_iter().collect();
    if gold.is_empty() {
        return Err(Failure::Input(format!(
            "no catheter_XXX.json files in {}",
            args.gold.display()
        )));
    }

    let mut scores = Vec::new();
    let mut overlay: Vec<OverlayEntry> = Vec::new();
    let mut seen = BTreeSet::new();
    for dir in &args.segmented {
        let run = read_run(dir, label)?;
        if !seen.insert(run.experiment) {
            return Err(Failure::Usage(format!("two runs for experiment {}", run.experiment)));
        }
        for id in run.trajectories.keys() {
            if !gold.contains_key(id) {
                return Err(
                    cathseg::Error::Pairing(format!("{id} in {} has no gold centerline", dir.display())).into(),
                );
            }
        }
        for (id, gold_path) in &gold {
            let Some(path) = run.trajectories.get(id) else {
                if run.failed.contains(id) {
                    scores.push(CatheterScore::failed(id.as_str(), run.experiment));
                    continue;
                }
                return Err(cathseg::Error::Pairing(format!("{id} is missing from {}", dir.display())).into());
            };
            let traj = Trajectory::load(path)?;
            let g = Trajectory::load(gold_path)?;
            scores.push(CatheterScore::compute(
                id.as_str(),
                run.experiment,
                &traj,
                &g,
                args.resample_step,
            )?);
            if args.overlay {
                overlay.push(OverlayEntry::new(id, run.experiment, &traj, &g, args.resample_step)?);
            }
        }
    }

    let report = ExperimentReport::from_scores(scores);
    let out = create_dir(&args.out_dir)?;
    write_report(&report, &out)?;
    if args.overlay {
        write_json(&out.join("overlay.json"), &overlay)?;
    }
    let mut manifest = RunManifest::new(
        "evaluate",
        serde_json::json!({ "resample_step": args.resample_step, "experiment": args.experiment }),
    )
    .input(&args.gold);
    for d in &args.segmented {
        manifest = manifest.input(d);
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.write(&out)?;
    print_stats(&report);
    Ok(())
}

fn write_report(report: &ExperimentReport, out: &Path) -> CmdResult {
    let csv_path = out.join("report.csv");
    let file = File::create(&csv_path).map_err(|e| Failure::io(&csv_path, e))?;
    report.write_csv(BufWriter::new(file))?;
    let summary = out.join("summary.json");
    std::fs::write(&summary, report.summary_json()?).map_err(|e| Failure::io(&summary, e))
}

fn print_stats(report: &ExperimentReport) {
    println!("experiment   n  failed  median    mean     std  HD>2  HD>3");
    for s in &report.stats {
        println!(
            "{:<11} {:>3} {:>6} {:>7.3} {:>7.3} {:>7.3} {:>5} {:>5}",
            s.experiment.as_str(),
            s.n,
            s.n_failed,
            s.median,
            s.mean,
            s.std,
            s.count_hd_gt_2mm,
            s.count_hd_gt_3mm
        );
    }
}

pub fn benchmark(args: &BenchmarkArgs) -> CmdResult {
    let start = Instant::now();
    let mut config = load_config(args.config.as_deref())?;
    if let Some(d) = args.dtol {
        config.d_tol = d;
    }
    config.validate()?;
    let pool = thread_pool(args.jobs)?;
    let bundle = standard_benchmark(args.seed)?;
    let out = create_dir(&args.out_dir)?;

    if args.export_phantoms {
        for v in 0..bundle.specs.len() {
            let p = bundle.generate(v)?;
            let dir = create_dir(&out.join("volumes").join(format!("v{v:02}")))?;
            write_phantom(&p, &dir)?;
            write_json(&dir.join("spec.json"), &bundle.specs[v])?;
        }
    }

    let (report, overlay) = pool.install(|| run_experiments_with_overlay(&bundle, &config, args.overlay))?;
    write_report(&report, &out)?;
    if args.overlay {
        write_json(&out.join("overlay.json"), &overlay)?;
    }

    let mut manifest = RunManifest::new(
        "benchmark",
        serde_json::json!({ "seed": args.seed, "segmentation": to_value(&config), "model": bundle.model }),
    );
    if let Some(p) = &args.config {
        manifest = manifest.input(p);
    }
    manifest.rng_seeds = std::iter::once(args.seed)
        .chain(bundle.specs.iter().map(|s| s.rng_seed))
        .collect();
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    manifest.write(&out)?;
    print_stats(&report);
    let failed: usize = report.stats.iter().map(|s| s.n_failed).sum();
    if failed > 0 {
        return Err(Failure::Partial {
            failed,
            total: report.scores.len(),
        });
    }
    Ok(())
}
