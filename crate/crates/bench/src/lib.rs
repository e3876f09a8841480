//! Shared fixtures for the criterion benches.

use cathseg::phantom::CatheterSpec;
use cathseg::spring::SpringModelParams;
use cathseg::{generate_phantom, Phantom, PhantomSpec};

/// One bent catheter in a 256 x 256 x 80 volume with moderate noise.
pub fn single_catheter_phantom() -> Phantom {
    let spec = PhantomSpec {
        dims: [256, 256, 80],
        noise_sigma: 8.0,
        rng_seed: 11,
        catheters: vec![CatheterSpec {
            f0: 40.0,
            insertion_depth: 70.0,
            deflection_azimuth: 0.8,
            entry_point: [64.0, 64.0],
            contrast: None,
        }],
        ..PhantomSpec::default()
    };
    generate_phantom(&spec, &SpringModelParams::default()).expect("fixture spec is valid")
}
