#![allow(dead_code)]

pub mod fd;

use digs::siren::{Architecture, SineLayer, SirenParams};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random smooth network: weights U(-c, c) with c = scale * sqrt(3 / fan_in).
pub fn random_params(arch: &Architecture, apply_nu: bool, scale: f64, seed: u64) -> SirenParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fan_in = arch.input_dim;
    let mut layers = Vec::new();
    for &w in &arch.hidden {
        let bound = scale * (3.0 / fan_in as f64).sqrt();
        layers.push(SineLayer {
            weight: Array2::from_shape_fn((w, fan_in), |_| rng.gen_range(-bound..bound)),
            bias: Array1::from_shape_fn(w, |_| rng.gen_range(-1.0..1.0)),
        });
        fan_in = w;
    }
    SirenParams {
        layers,
        out_weight: Array1::from_shape_fn(fan_in, |_| rng.gen_range(-0.5..0.5)),
        out_bias: rng.gen_range(-0.2..0.2),
        input_dim: arch.input_dim,
        apply_nu,
        sphere_radius: 0.3,
    }
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
