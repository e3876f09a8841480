use super::*;
use crate::spring::SpringModelParams;

fn params() -> SpringModelParams {
    SpringModelParams::default()
}

fn small(catheters: Vec<CatheterSpec>) -> PhantomSpec {
    PhantomSpec {
        dims: [80, 80, 90],
        noise_sigma: 0.0,
        catheters,
        ..PhantomSpec::default()
    }
}

fn cath(f0: f64, depth: f64, az: f64, entry: [f64; 2]) -> CatheterSpec {
    CatheterSpec {
        f0,
        insertion_depth: depth,
        deflection_azimuth: az,
        entry_point: entry,
        contrast: None,
    }
}

#[test]
fn unbent_catheter_is_a_dark_straight_line() {
    let p = generate_phantom(&small(vec![cath(0.0, 60.0, 0.0, [20.0, 20.0])]), &params()).unwrap();
    let g = &p.gold[0].points;
    for q in g {
        assert!((q.x - 20.0).abs() < 1e-12 && (q.y - 20.0).abs() < 1e-12);
    }
    assert!((g[0].z - (1.0 + 60.0)).abs() < 1e-9);
    for k in 5..55 {
        let z = 1.0 + k as f64;
        assert!(p.volume.sample(&Vec3::new(20.0, 20.0, z)) < 1.0);
        assert!(p.volume.sample(&Vec3::new(23.0, 20.0, z)) > 99.0);
    }
}

#[test]
fn generation_is_deterministic() {
    let mut spec = small(vec![cath(30.0, 50.0, 1.0, [20.0, 20.0])]);
    spec.noise_sigma = 5.0;
    spec.rng_seed = 99;
    spec.bloom.enabled = true;
    let a = generate_phantom(&spec, &params()).unwrap();
    let b = generate_phantom(&spec, &params()).unwrap();
    assert_eq!(a.volume.data(), b.volume.data());
    spec.rng_seed = 100;
    let c = generate_phantom(&spec, &params()).unwrap();
    assert_ne!(a.volume.data(), c.volume.data());
}

#[test]
fn gold_tip_sits_at_insertion_depth() {
    let spec = small(vec![
        cath(50.0, 70.0, 2.0, [20.0, 25.0]),
        cath(20.0, 45.5, 4.0, [35.0, 20.0]),
    ]);
    let p = generate_phantom(&spec, &params()).unwrap();
    let voxel = 1.0;
    for (g, c) in p.gold.iter().zip(&spec.catheters) {
        let depth = p.seeds.plane.signed_distance(&g.points[0]);
        assert!((depth - c.insertion_depth).abs() < voxel);
        assert!(p.seeds.plane.signed_distance(g.points.last().unwrap()).abs() < 1e-12);
    }
    assert_eq!(p.seeds.tips.len(), 2);
}

#[test]
fn gold_is_the_forward_model_polyline() {
    let c = cath(45.0, 80.0, 0.3, [20.0, 20.0]);
    let p = generate_phantom(&small(vec![c.clone()]), &params()).unwrap();
    let fwd = simulate_forward(&params(), c.f0).unwrap();
    let base = Vec3::new(20.0, 20.0, 1.0);
    let side = Vec3::new(0.3f64.cos(), 0.3f64.sin(), 0.0);
    let mut gold = p.gold[0].points.clone();
    gold.reverse();
    for (q, m) in gold.iter().zip(&fwd.positions) {
        if m.x > c.insertion_depth {
            break;
        }
        let expect = base + Vec3::z() * m.x + side * m.y;
        assert!((q - expect).norm() < 1e-9);
    }
}

#[test]
fn edge_band_is_monotone_in_distance() {
    let p = generate_phantom(&small(vec![cath(0.0, 60.0, 0.0, [20.0, 20.0])]), &params()).unwrap();
    let v = &p.volume;
    // voxels on the row y=20 at mid depth, ordered by distance from the axis
    let k = 30;
    let mut row: Vec<(f64, f32)> = (30..50)
        .map(|i| {
            let x = i as f64 * 0.5;
            ((x - 20.0).abs(), v.get(i, 40, k))
        })
        .collect();
    row.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in row.windows(2) {
        assert!(w[1].1 >= w[0].1, "{row:?}");
    }
}

#[test]
fn bloom_brightens_the_rim() {
    let mut spec = small(vec![cath(0.0, 60.0, 0.0, [20.0, 20.0])]);
    spec.bloom.enabled = true;
    let p = generate_phantom(&spec, &params()).unwrap();
    let rim = p.volume.sample(&Vec3::new(21.6, 20.0, 30.0));
    assert!(rim > 130.0, "{rim}");
    assert!(p.volume.sample(&Vec3::new(20.0, 20.0, 30.0)) < 1.0);
}

#[test]
fn close_catheters_warn() {
    let spec = small(vec![
        cath(0.0, 60.0, 0.0, [20.0, 20.0]),
        cath(0.0, 50.0, 0.0, [21.0, 20.0]),
    ]);
    let p = generate_phantom(&spec, &params()).unwrap();
    assert_eq!(p.warnings.len(), 1);
    assert_eq!(p.gold.len(), 2);
}

#[test]
fn invalid_specs_are_rejected() {
    let too_deep = small(vec![cath(0.0, 200.0, 0.0, [20.0, 20.0])]);
    assert!(generate_phantom(&too_deep, &params()).is_err());
    let outside = small(vec![cath(0.0, 30.0, 0.0, [90.0, 20.0])]);
    assert!(generate_phantom(&outside, &params()).is_err());
    let mut thin = small(vec![]);
    thin.tube_radius = 0.0;
    assert!(generate_phantom(&thin, &params()).is_err());
}

#[test]
fn spec_json_roundtrip() {
    let mut spec = small(vec![cath(10.0, 40.0, 0.5, [20.0, 20.0])]);
    spec.distractors = vec![
        Distractor::Tube {
            start: [1.0, 2.0, 3.0],
            end: [4.0, 5.0, 6.0],
            radius: 0.7,
            contrast: 80.0,
        },
        Distractor::Blob {
            center: [10.0, 10.0, 10.0],
            radius: 2.0,
            contrast: 100.0,
        },
    ];
    let s = spec.to_json_string().unwrap();
    assert!(s.contains("\"kind\": \"blob\""));
    assert_eq!(PhantomSpec::from_json_str(&s).unwrap(), spec);
    let minimal = PhantomSpec::from_json_str(r#"{"catheters": []}"#).unwrap();
    assert_eq!(minimal.tube_radius, 0.8);
    assert!(PhantomSpec::from_json_str(r#"{"tube_radius": "thick"}"#).is_err());
}

#[test]
fn tip_angle_force_hits_target() {
    let p = params();
    let f = force_for_tip_angle(&p, 74.0, 10f64.to_radians()).unwrap();
    let c = simulate_forward(&p, f).unwrap().crossing_at(74.0).unwrap();
    assert!((c.alpha_sum - 10f64.to_radians()).abs() < 0.01);
}

#[test]
fn standard_benchmark_shape() {
    let a = standard_benchmark(42).unwrap();
    assert_eq!(a.n_catheters(), 100);
    assert_eq!(a.specs.len(), 10);
    assert_eq!(a, standard_benchmark(42).unwrap());
    assert_ne!(a, standard_benchmark(43).unwrap());
    let noise: std::collections::BTreeSet<u64> = a.specs.iter().map(|s| s.noise_sigma.to_bits()).collect();
    assert_eq!(noise.len(), 3);
    assert!(a.specs.iter().any(|s| s.bloom.enabled) && a.specs.iter().any(|s| !s.bloom.enabled));
    assert!(a.specs.iter().any(|s| s.distractors.is_empty()) && a.specs.iter().any(|s| !s.distractors.is_empty()));
    let ids = a.cases();
    assert_eq!(ids[0].id, "v00_c00");
    assert_eq!(ids[99].id, "v09_c09");
}

// each joint of a gold polyline turns by the forward model's alpha there
#[test]
fn benchmark_curvature_matches_forces() {
    let b = standard_benchmark(42).unwrap();
    let plane = b.specs[0].base_plane().unwrap();
    for c in &b.specs[0].catheters {
        let line = catheter_centerline(c, &plane, &b.model).unwrap();
        let fwd = simulate_forward(&b.model, c.f0).unwrap();
        let max_turn = line
            .windows(3)
            .map(|w| {
                let (u, v) = ((w[1] - w[0]).normalize(), (w[2] - w[1]).normalize());
                u.dot(&v).min(1.0).acos()
            })
            .fold(0.0, f64::max);
        let joints = line.len().saturating_sub(2);
        let expect = fwd.alpha[1..=joints].iter().copied().fold(0.0, f64::max);
        assert!((max_turn - expect).abs() < 1e-6, "{max_turn} vs {expect}");
    }
}
