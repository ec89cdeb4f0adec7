//! Central finite-difference oracles for network jets and parameter gradients.

use super::rel_err;
use digs::siren::{JetAdjoint, ParamBuffers, SirenParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random_params;
use digs::siren::Architecture;

pub const H: f64 = 1e-4;

pub fn value_at(p: &SirenParams, x: &[f64]) -> f64 {
    let pts = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
    p.forward(pts.view()).unwrap()[0]
}

pub fn jets_at(p: &SirenParams, x: &[f64]) -> (f64, Vec<f64>, f64) {
    let pts = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
    let j = p.forward_with_derivatives(pts.view()).unwrap();
    (j.values[0], j.gradients.row(0).to_vec(), j.laplacians[0])
}

pub fn fd_gradient(p: &SirenParams, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += H;
            b[i] -= H;
            (value_at(p, &a) - value_at(p, &b)) / (2.0 * H)
        })
        .collect()
}

/// Hessian from differences of the analytic gradient.
pub fn fd_hessian(p: &SirenParams, x: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut h = vec![vec![0.0; d]; d];
    for j in 0..d {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[j] += H;
        b[j] -= H;
        let ga = jets_at(p, &a).1;
        let gb = jets_at(p, &b).1;
        for i in 0..d {
            h[i][j] = (ga[i] - gb[i]) / (2.0 * H);
        }
    }
    h
}

/// Second differences of the value, summed over axes.
pub fn fd_laplacian(p: &SirenParams, x: &[f64]) -> f64 {
    let f0 = value_at(p, x);
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += H;
            b[i] -= H;
            (value_at(p, &a) - 2.0 * f0 + value_at(p, &b)) / (H * H)
        })
        .sum()
}

pub fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-0.9..0.9)).collect()
}

pub fn random_case(i: u64) -> (SirenParams, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
    let d = if i % 2 == 0 { 2 } else { 3 };
    let depth = 1 + (i % 4) as usize;
    let width = [6, 16, 24][(i % 3) as usize];
    let arch = Architecture::uniform(d, depth, width);
    let mut p = random_params(&arch, false, 1.5, i);
    if i % 3 == 0 {
        // Keep the transform away from its kink at zero.
        p.apply_nu = true;
        p.out_bias += 3.0;
    }
    (p, random_point(&mut rng, d))
}

/// Central difference of `loss(theta)` over one flat parameter.
pub fn fd_param<F: Fn(&SirenParams) -> f64>(p: &SirenParams, index: usize, loss: F) -> f64 {
    let h = 1e-5 * p.get_flat(index).abs().max(1.0);
    let mut a = p.clone();
    let mut b = p.clone();
    a.set_flat(index, p.get_flat(index) + h);
    b.set_flat(index, p.get_flat(index) - h);
    (loss(&a) - loss(&b)) / (2.0 * h)
}

/// Worst relative error of `vjp` against finite differences of
/// `sum_k adj . jets_k`, over `samples` random parameters.
pub fn vjp_error(p: &SirenParams, pts: &Array2<f64>, adj: &JetAdjoint, samples: usize, seed: u64) -> f64 {
    let (_, grad) = p.vjp(pts.view(), adj).unwrap();
    let loss = |q: &SirenParams| {
        let j = q.forward_with_derivatives(pts.view()).unwrap();
        let mut s = 0.0;
        for k in 0..j.len() {
            s += adj.values[k] * j.values[k] + adj.laplacians[k] * j.laplacians[k];
            s += j.gradients.row(k).dot(&adj.gradients.row(k));
        }
        s
    };
    let flat = grad.to_flat();
    let gmax = flat.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let idx = rng.gen_range(0..flat.len());
        worst = worst.max(rel_err(flat[idx], fd_param(p, idx, &loss), 1e-4 * gmax));
    }
    worst
}

pub fn path_adjoints(n: usize, d: usize, seed: u64) -> [JetAdjoint; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut value = JetAdjoint::zeros(n, d);
    let mut grad = JetAdjoint::zeros(n, d);
    let mut lap = JetAdjoint::zeros(n, d);
    for k in 0..n {
        value.values[k] = rng.gen_range(-1.0..1.0);
        lap.laplacians[k] = rng.gen_range(-1.0..1.0);
        for j in 0..d {
            grad.gradients[[k, j]] = rng.gen_range(-1.0..1.0);
        }
    }
    [value, grad, lap]
}

