//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;

use cathseg::eval::{hausdorff_points, run_experiments};
use cathseg::phantom::{force_for_tip_angle, CatheterSpec};
use cathseg::spring::{build_model_table, find_f_max, simulate_backward, simulate_forward, MAX_TABLE_ANGLE};
use cathseg::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn duality() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let k_a = rng.random_range(500.0..5000.0);
        let params = SpringModelParams::new(k_a, 20, 187.0).unwrap();
        let f_max = find_f_max(&params, MAX_TABLE_ANGLE).unwrap();
        let f0 = rng.random_range(0.0..f_max);
        let fwd = simulate_forward(&params, f0).unwrap();
        let n = params.n_seg;
        let back = simulate_backward(&params, fwd.alpha_sum[n - 1], fwd.force[n - 1], n).unwrap();
        for i in 0..n {
            worst = worst.max((back.alpha_sum[i] - fwd.alpha_sum[n - 1 - i]).abs());
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max |dalpha_sum| = {worst:.2e} rad over 50 pairs"),
    )
}

fn table_inversion() -> Outcome {
    let params = SpringModelParams::default();
    let table = build_model_table(&params, 200, 100).unwrap();
    let f_max = table.f_max();
    let mut worst = 0.0f64;
    for i in 0..20 {
        let f = f_max * (0.1 + 0.8 * i as f64 / 19.0);
        let tip = simulate_forward(&params, f).unwrap().tip();
        let est = table.lookup(tip.x, tip.y).f_est;
        worst = worst.max((est - f).abs() / f);
    }
    outcome(worst < 0.05, format!("max relative force error {:.2}%", 100.0 * worst))
}

fn single_catheter(f0: f64, azimuth: f64) -> PhantomSpec {
    PhantomSpec {
        dims: [120, 120, 90],
        noise_sigma: 0.0,
        catheters: vec![CatheterSpec {
            f0,
            insertion_depth: 74.0,
            deflection_azimuth: azimuth,
            entry_point: [30.0, 30.0],
            contrast: None,
        }],
        ..PhantomSpec::default()
    }
}

fn noiseless_accuracy() -> Outcome {
    let params = SpringModelParams::default();
    let seg = Segmenter::new(SegmentationConfig::default().with_d_tol(1.0)).unwrap();
    let f_hi = force_for_tip_angle(&params, 74.0, 12f64.to_radians()).unwrap();
    let mut hd = Vec::new();
    for i in 0..10 {
        let f0 = f_hi * i as f64 / 9.0;
        let p = generate_phantom(&single_catheter(f0, 0.6 * i as f64), &params).unwrap();
        let t = seg
            .segment_catheter(&p.volume, &p.seeds.tips[0], &p.seeds.plane)
            .unwrap();
        hd.push(hausdorff(&t, &p.gold[0], 0.5).unwrap());
    }
    let max = hd.iter().copied().fold(0.0, f64::max);
    let mut sorted = hd.clone();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[4] + sorted[5]);
    outcome(
        max < 1.5 && median < 0.8,
        format!("max HD {max:.3} mm, median {median:.3} mm (forces 0..{f_hi:.1})"),
    )
}

fn hd_brute(a: &[Vec3], b: &[Vec3]) -> f64 {
    let dir = |x: &[Vec3], y: &[Vec3]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    dir(a, b).max(dir(b, a)).sqrt()
}

fn hd_oracle() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(6);
    let curve = |rng: &mut Pcg64| -> Vec<Vec3> {
        let n = rng.random_range(2..120);
        let mut p = Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), 0.0);
        (0..n)
            .map(|_| {
                p += Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..2.0),
                );
                p
            })
            .collect()
    };
    let mismatches = (0..200)
        .filter(|_| {
            let (a, b) = (curve(&mut rng), curve(&mut rng));
            hausdorff_points(&a, &b) != hd_brute(&a, &b)
        })
        .count();
    outcome(
        mismatches == 0,
        format!("{mismatches} of 200 pairs differ from brute force"),
    )
}

fn runtime() -> Outcome {
    let params = SpringModelParams::default();
    let spec = PhantomSpec {
        dims: [256, 256, 80],
        noise_sigma: 8.0,
        rng_seed: 3,
        catheters: vec![CatheterSpec {
            f0: 40.0,
            insertion_depth: 70.0,
            deflection_azimuth: 1.0,
            entry_point: [64.0, 64.0],
            contrast: None,
        }],
        ..PhantomSpec::default()
    };
    let p = generate_phantom(&spec, &params).unwrap();
    let build = Instant::now();
    let seg = Segmenter::new(SegmentationConfig::default()).unwrap();
    let build = build.elapsed();
    let start = Instant::now();
    seg.segment_catheter(&p.volume, &p.seeds.tips[0], &p.seeds.plane)
        .unwrap();
    let took = start.elapsed();
    outcome(
        took < Duration::from_secs(2),
        format!(
            "{:.1} ms per catheter ({:.1} ms one-off table build)",
            ms(took),
            ms(build)
        ),
    )
}

fn gating() -> Outcome {
    let vec3 = || prop::array::uniform3(-50.0f64..50.0).prop_map(Vec3::from);
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let result = runner.run(&(vec3(), vec3(), 0.0f64..10.0), |(c_img, b_mod, d_tol)| {
        let (p, tag) = gate_candidate(&c_img, &b_mod, d_tol);
        let dist = (c_img - b_mod).norm();
        let moved = (p - b_mod).norm();
        prop_assert!(moved <= d_tol + 1e-9);
        if dist >= d_tol {
            prop_assert!((moved - d_tol.min(dist / 2.0)).abs() <= 1e-9);
        } else {
            prop_assert_eq!(p, c_img);
            prop_assert_eq!(tag, Provenance::Image);
        }
        let (m, t0) = gate_candidate(&c_img, &b_mod, 0.0);
        prop_assert_eq!((m, t0), (b_mod, Provenance::Model));
        let (i, ti) = gate_candidate(&c_img, &b_mod, f64::INFINITY);
        prop_assert_eq!((i, ti), (c_img, Provenance::Image));
        Ok(())
    });
    match result {
        Ok(()) => outcome(
            true,
            "1000 random cases, d_tol = 0 and inf degenerate to model and image",
        ),
        Err(e) => outcome(false, format!("{e}")),
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome, Duration)> = Vec::new();
    let mut run = |name: &'static str, f: fn() -> Outcome| {
        let (o, t) = timed(f);
        results.push((name, o, t));
    };
    run("1 forward/backward duality", duality);
    run("2 model table inversion", table_inversion);
    run("3 noiseless phantom accuracy", noiseless_accuracy);

    let bundle = standard_benchmark(42).unwrap();
    let config = SegmentationConfig::default();
    let start = Instant::now();
    let report = run_experiments(&bundle, &config).unwrap();
    let bench_time = start.elapsed();
    let stats = |e| report.stats_for(e).unwrap().clone();
    let (model, image, hybrid) = (
        stats(Experiment::ModelOnly),
        stats(Experiment::ImageOnly),
        stats(Experiment::Hybrid),
    );
    for s in [&model, &image, &hybrid] {
        println!(
            "    {:<10} median {:.3} mean {:.3} std {:.3} HD>2 {:>3} HD>3 {:>3} failed {}",
            s.experiment.as_str(),
            s.median,
            s.mean,
            s.std,
            s.count_hd_gt_2mm,
            s.count_hd_gt_3mm,
            s.n_failed
        );
    }
    let a = hybrid.count_hd_gt_3mm as f64 <= 0.5 * image.count_hd_gt_3mm as f64;
    let b = hybrid.count_hd_gt_2mm <= image.count_hd_gt_2mm;
    let c = model.mean > hybrid.mean;
    results.push((
        "4 experiment trends",
        outcome(
            a && b && c,
            format!(
                "(a) CO {} vs {} image {} (b) HD>2 {} vs {} image {} (c) model mean {:.3} vs hybrid {:.3} {}",
                hybrid.count_hd_gt_3mm,
                image.count_hd_gt_3mm,
                if a { "ok" } else { "FAIL" },
                hybrid.count_hd_gt_2mm,
                image.count_hd_gt_2mm,
                if b { "ok" } else { "FAIL" },
                model.mean,
                hybrid.mean,
                if c { "ok" } else { "FAIL" },
            ),
        ),
        bench_time,
    ));
    results.push((
        "5 hybrid median parity",
        outcome(
            hybrid.median <= 1.2 * image.median,
            format!(
                "hybrid {:.3} mm vs 1.2 x image {:.3} mm",
                hybrid.median,
                1.2 * image.median
            ),
        ),
        Duration::ZERO,
    ));

    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let (o, t) = timed(f);
        results.push((name, o, t));
    };
    run("6 hausdorff oracle", &hd_oracle);
    run("7 per-catheter runtime", &runtime);
    run("8 deterministic reports", &|| {
        let csv = |r: &ExperimentReport| {
            let mut buf = Vec::new();
            r.write_csv(&mut buf).unwrap();
            buf
        };
        let again = run_experiments(&bundle, &config).unwrap();
        let (x, y) = (csv(&report), csv(&again));
        outcome(x == y, format!("{} CSV bytes, identical: {}", x.len(), x == y))
    });
    run("9 gating algebra", &gating);

    let mut all = true;
    for (name, o, t) in &results {
        all &= o.pass;
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {name}: {} [{:.2} s]", o.detail, t.as_secs_f64());
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
