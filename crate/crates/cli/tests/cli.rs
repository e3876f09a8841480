use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cathseg::phantom::CatheterSpec;
use cathseg::spring::{simulate_forward, SpringModelParams};
use cathseg::{PhantomSpec, Trajectory};
use tempfile::TempDir;

fn cathseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cathseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cathseg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn noiseless_spec() -> PhantomSpec {
    let forces = [0.0, 15.0, 30.0, 45.0, 60.0];
    PhantomSpec {
        dims: [160, 160, 90],
        noise_sigma: 0.0,
        catheters: forces
            .iter()
            .enumerate()
            .map(|(i, &f0)| CatheterSpec {
                f0,
                insertion_depth: 70.0 + i as f64,
                deflection_azimuth: 1.3 * i as f64,
                entry_point: [25.0 + 12.0 * i as f64, 30.0 + 6.0 * (i % 2) as f64],
                contrast: None,
            })
            .collect(),
        ..PhantomSpec::default()
    }
}

/// Write `spec` and render it; returns the phantom directory.
fn make_phantom(dir: &Path, spec: &PhantomSpec) -> PathBuf {
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, spec.to_json_string().unwrap()).unwrap();
    let out = dir.join("phantom");
    ok(&["phantom", "--spec", s(&spec_path), "--out-dir", s(&out)]);
    out
}

fn segment(phantom: &Path, dtol: &str, out: &Path) -> Output {
    cathseg(&[
        "segment",
        "--volume",
        s(&phantom.join("volume.nrrd")),
        "--seeds",
        s(&phantom.join("seeds.json")),
        "--dtol",
        dtol,
        "--out-dir",
        s(out),
        "--jobs",
        "2",
    ])
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn noiseless_pipeline_meets_accuracy_targets() {
    let tmp = TempDir::new().unwrap();
    let ph = make_phantom(tmp.path(), &noiseless_spec());
    let mut runs = Vec::new();
    for (dtol, name) in [("0", "model"), ("inf", "image"), ("1", "hybrid")] {
        let out = tmp.path().join(name);
        let res = segment(&ph, dtol, &out);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        runs.push(out);
    }
    let report = tmp.path().join("report");
    let mut args = vec!["evaluate", "--gold"];
    let gold = ph.join("gold");
    args.push(s(&gold));
    for r in &runs {
        args.extend(["--segmented", s(r)]);
    }
    args.extend(["--out-dir", s(&report), "--overlay"]);
    ok(&args);

    let rows = read_csv(&report.join("report.csv"));
    assert_eq!(rows.len(), 15);
    let mut hybrid: Vec<f64> = rows
        .iter()
        .filter(|r| r[1] == "hybrid")
        .map(|r| r[2].parse().unwrap())
        .collect();
    hybrid.sort_by(f64::total_cmp);
    assert!(hybrid.iter().all(|&h| h < 1.5), "{hybrid:?}");
    assert!(hybrid[2] < 0.8, "{hybrid:?}");
    // the gate tolerance selects the experiment
    for (r, prov) in rows.iter().map(|r| (&r[1], &r[4])) {
        match r.as_str() {
            "model_only" => assert!(prov.contains("image:0;") && prov.contains("compromise:0")),
            "image_only" => assert!(prov.contains("model:0;") && prov.contains("compromise:0")),
            _ => {}
        }
    }
    assert!(report.join("overlay.json").exists());
}

#[test]
fn trajectories_and_manifest_are_complete() {
    let tmp = TempDir::new().unwrap();
    let ph = make_phantom(tmp.path(), &noiseless_spec());
    let out = tmp.path().join("seg");
    assert!(segment(&ph, "1", &out).status.success());
    for i in 0..5 {
        let path = out.join("trajectories").join(format!("catheter_{i:03}.json"));
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        for key in ["points", "bezier", "provenance", "estimates"] {
            assert!(json.get(key).is_some(), "{key} missing");
        }
        for key in ["a", "d", "alpha0_sum", "f0_est"] {
            assert!(json["estimates"][key].is_number(), "estimates.{key}");
        }
        let t = Trajectory::load(&path).unwrap();
        assert_eq!(t.points.len(), t.provenance.len());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "segment");
    assert_eq!(manifest["config"]["d_tol"], 1.0);
    assert_eq!(manifest["config"]["n_c"], 8);
    let cats = manifest["catheters"].as_array().unwrap();
    assert_eq!(cats.len(), 5);
    assert!(cats.iter().all(|c| c["wall_time_s"].as_f64().unwrap() > 0.0));
}

#[test]
fn phantom_and_segment_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let mut spec = noiseless_spec();
    spec.noise_sigma = 6.0;
    spec.rng_seed = 17;
    let dirs = ["a", "b"].map(|n| tmp.path().join(n));
    dirs.iter().for_each(|d| fs::create_dir(d).unwrap());
    let (a, b) = (make_phantom(&dirs[0], &spec), make_phantom(&dirs[1], &spec));
    assert_eq!(
        fs::read(a.join("volume.nrrd")).unwrap(),
        fs::read(b.join("volume.nrrd")).unwrap()
    );
    let gold: Vec<_> = fs::read_dir(a.join("gold")).unwrap().collect();
    assert_eq!(gold.len(), spec.catheters.len());

    let (sa, sb) = (tmp.path().join("sa"), tmp.path().join("sb"));
    assert!(segment(&a, "1", &sa).status.success());
    assert!(segment(&a, "1", &sb).status.success());
    for i in 0..5 {
        let f = format!("trajectories/catheter_{i:03}.json");
        assert_eq!(fs::read(sa.join(&f)).unwrap(), fs::read(sb.join(&f)).unwrap());
    }
}

#[test]
fn gold_lies_along_the_darkest_voxels() {
    let tmp = TempDir::new().unwrap();
    let ph = make_phantom(tmp.path(), &noiseless_spec());
    let vol = cathseg::volume::load_volume(ph.join("volume.nrrd")).unwrap();
    for i in 0..5 {
        let g = Trajectory::load(ph.join("gold").join(format!("catheter_{i:03}.json"))).unwrap();
        for p in &g.points[1..g.points.len() - 1] {
            assert!(vol.sample(p) < 5.0, "{p}");
        }
    }
}

#[test]
fn evaluating_gold_against_itself_scores_zero() {
    let tmp = TempDir::new().unwrap();
    let ph = make_phantom(tmp.path(), &noiseless_spec());
    let gold = ph.join("gold");
    let out = tmp.path().join("ev");
    ok(&[
        "evaluate",
        "--gold",
        s(&gold),
        "--segmented",
        s(&gold),
        "--experiment",
        "image_only",
        "--out-dir",
        s(&out),
    ]);
    let rows = read_csv(&out.join("report.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[2] == "0.000000"));
}

// recompute the summary from the CSV rows alone
#[test]
fn summary_is_recomputable_from_csv() {
    let tmp = TempDir::new().unwrap();
    let mut spec = noiseless_spec();
    spec.noise_sigma = 10.0;
    let ph = make_phantom(tmp.path(), &spec);
    let seg = tmp.path().join("seg");
    assert!(segment(&ph, "inf", &seg).status.success());
    let out = tmp.path().join("ev");
    ok(&[
        "evaluate",
        "--gold",
        s(&ph.join("gold")),
        "--segmented",
        s(&seg),
        "--out-dir",
        s(&out),
    ]);
    let mut hd: Vec<f64> = read_csv(&out.join("report.csv"))
        .iter()
        .map(|r| r[2].parse().unwrap())
        .collect();
    hd.sort_by(f64::total_cmp);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let st = &summary["experiments"][0];
    assert_eq!(st["experiment"], "image_only");
    assert_eq!(st["n"], 5);
    let mean = hd.iter().sum::<f64>() / 5.0;
    // CSV values carry six decimals
    assert!((st["median"].as_f64().unwrap() - hd[2]).abs() < 1e-6);
    assert!((st["mean"].as_f64().unwrap() - mean).abs() < 1e-6);
    assert_eq!(st["count_hd_gt_2mm"], hd.iter().filter(|&&v| v > 2.0).count());
    assert!(st["count_hd_gt_3mm"].as_u64() <= st["count_hd_gt_2mm"].as_u64());
}

#[test]
fn missing_trajectory_is_a_pairing_error() {
    let tmp = TempDir::new().unwrap();
    let ph = make_phantom(tmp.path(), &noiseless_spec());
    let seg = tmp.path().join("seg");
    assert!(segment(&ph, "1", &seg).status.success());
    fs::remove_file(seg.join("trajectories/catheter_002.json")).unwrap();
    let out = cathseg(&[
        "evaluate",
        "--gold",
        s(&ph.join("gold")),
        "--segmented",
        s(&seg),
        "--out-dir",
        s(&tmp.path().join("ev")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("catheter_002"));
}

#[test]
fn failed_catheters_give_exit_code_four() {
    let tmp = TempDir::new().unwrap();
    let ph = make_phantom(tmp.path(), &noiseless_spec());
    let seeds_path = ph.join("seeds.json");
    let mut seeds: serde_json::Value = serde_json::from_str(&fs::read_to_string(&seeds_path).unwrap()).unwrap();
    seeds["tips"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!([500.0, 20.0, 40.0]));
    fs::write(&seeds_path, seeds.to_string()).unwrap();
    let out = tmp.path().join("seg");
    let res = segment(&ph, "1", &out);
    assert_eq!(res.status.code(), Some(4));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let cats = manifest["catheters"].as_array().unwrap();
    assert_eq!(cats.len(), 6);
    assert!(cats[5]["error"].as_str().unwrap().contains("outside"));
    assert!(cats[..5].iter().all(|c| c.get("error").is_none()));
    assert!(out.join("trajectories/catheter_004.json").exists());
}

#[test]
fn input_and_usage_errors_use_distinct_codes() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"catheters": [{"f0": 1.0, "insertion_depth": "deep"}]}"#).unwrap();
    let out = cathseg(&["phantom", "--spec", s(&bad), "--out-dir", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("catheters[0].insertion_depth"));

    let missing = cathseg(&[
        "segment",
        "--volume",
        s(&tmp.path().join("none.nrrd")),
        "--seeds",
        s(&bad),
        "--out-dir",
        s(&tmp.path().join("y")),
    ]);
    assert_eq!(missing.status.code(), Some(3));

    let out = cathseg(&[
        "segment",
        "--volume",
        "v",
        "--seeds",
        "s",
        "--out-dir",
        "o",
        "--dtol",
        "-1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = cathseg(&["simulate", "--out-dir", s(&tmp.path().join("sim")), "--k-a", "-5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(cathseg(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_table_and_catheters() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    ok(&["simulate", "--out-dir", s(&out), "--forces", "5"]);
    let rows = read_csv(&out.join("model_table.csv"));
    assert_eq!(rows.len(), 100 * 100);

    let cats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("catheters.json")).unwrap()).unwrap();
    let list = cats["catheters"].as_array().unwrap();
    assert_eq!(list.len(), 5);
    // the unloaded catheter lies on the a-axis
    assert!(list[0]["positions"].as_array().unwrap().iter().all(|p| p[1] == 0.0));
    let f0 = list[3]["f0"].as_f64().unwrap();
    let fwd = simulate_forward(&SpringModelParams::default(), f0).unwrap();
    let tip = list[3]["positions"].as_array().unwrap().last().unwrap().clone();
    assert!((tip[0].as_f64().unwrap() - fwd.tip().x).abs() < 1e-9);
    assert!((tip[1].as_f64().unwrap() - fwd.tip().y).abs() < 1e-9);
}

#[test]
fn template_renders() {
    let tmp = TempDir::new().unwrap();
    let out = ok(&["phantom", "--template"]);
    let spec = PhantomSpec::from_json_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let ph = make_phantom(tmp.path(), &spec);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ph.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rng_seeds"][0], spec.rng_seed);
}

#[test]
fn benchmark_writes_full_report() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("bench");
    ok(&["benchmark", "--seed", "42", "--out-dir", s(&out)]);
    let rows = read_csv(&out.join("report.csv"));
    assert_eq!(rows.len(), 300);
    assert_eq!(rows[0][0], "v00_c00");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rng_seeds"].as_array().unwrap().len(), 11);
}
