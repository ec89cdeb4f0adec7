//! Parameter initialization schemes and the signed square-root output transform.
//!
//! * `Standard` follows the variance-preserving sine-network scheme with the
//!   first-layer frequency `omega_0` baked into the stored weights.
//! * `Geometric` makes the untrained network approximate the signed distance
//!   to a sphere of radius `r`: random near-orthonormal layers keep the input
//!   norm, and the last hidden layer computes `sum_i 1 - sin(pi/2 z_i + pi/2)`,
//!   which is close to `|z|^2` on the unit ball.
//! * `Mfgi` starts from `Geometric` and lets a fraction of the first-layer rows
//!   oscillate `n_p` times faster, damping their coupling into the second layer.

use std::f64::consts::FRAC_PI_2;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::siren::{Architecture, SineLayer, SirenParams};

/// Offset inside the square root of the output transform.
pub const NU_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    Standard,
    Geometric,
    Mfgi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub scheme: InitScheme,
    pub omega_0: f64,
    /// Number of low-frequency first-layer rows; `None` means a quarter of the width.
    pub k_r: Option<usize>,
    pub n_p: f64,
    pub s: f64,
    pub perturb_std: f64,
    pub sphere_radius: f64,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            scheme: InitScheme::Mfgi,
            omega_0: 30.0,
            k_r: None,
            n_p: 30.0,
            s: 1e-3,
            perturb_std: 1e-4,
            sphere_radius: 0.5,
            seed: 0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        if let Some(k) = self.k_r {
            if k == 0 || k > arch.hidden[0] {
                return Err(Error::config(format!(
                    "k_r must lie in 1..={}, got {k}",
                    arch.hidden[0]
                )));
            }
        }
        if !(self.n_p >= 1.0) {
            return Err(Error::config("n_p must be >= 1"));
        }
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::config("s must lie in (0, 1]"));
        }
        if !(self.perturb_std >= 0.0) {
            return Err(Error::config("perturb_std must be non-negative"));
        }
        if !(self.omega_0 > 0.0) {
            return Err(Error::config("omega_0 must be positive"));
        }
        Ok(())
    }

    fn low_freq_rows(&self, arch: &Architecture) -> usize {
        self.k_r.unwrap_or((arch.hidden[0] / 4).max(1))
    }
}

/// `sign(d) * sqrt(|d| + eps)` with `sign(0) = 0`.
pub fn nu(d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        d.signum() * (d.abs() + NU_EPS).sqrt()
    }
}

/// First and second derivative of [`nu`].
pub fn nu_derivatives(d: f64) -> (f64, f64) {
    let a = d.abs() + NU_EPS;
    let sign = if d == 0.0 { 0.0 } else { d.signum() };
    (0.5 / a.sqrt(), -sign * 0.25 / (a * a.sqrt()))
}

pub(crate) fn nu_third_derivative(d: f64) -> f64 {
    let a = d.abs() + NU_EPS;
    0.375 / (a * a * a.sqrt())
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..=bound))
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| rng.gen_range(-bound..=bound))
}

/// Build parameters for `arch` under the scheme named in `config`.
pub fn initialize(arch: &Architecture, config: &InitConfig) -> Result<SirenParams> {
    match config.scheme {
        InitScheme::Standard => standard_init(arch, config),
        InitScheme::Geometric => geometric_init(arch, config),
        InitScheme::Mfgi => mfgi_init(arch, config),
    }
}

pub fn standard_init(arch: &Architecture, config: &InitConfig) -> Result<SirenParams> {
    arch.validate()?;
    config.validate(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let w0 = config.omega_0;
    let mut fan_in = arch.input_dim;
    let mut layers = Vec::with_capacity(arch.hidden.len());
    for (i, &width) in arch.hidden.iter().enumerate() {
        let m = fan_in as f64;
        // The runtime frequency multiplier of the reference scheme is folded in here.
        let weight_bound = if i == 0 { w0 / m } else { (6.0 / m).sqrt() };
        let bias_bound = w0 / m.sqrt();
        let weight = uniform_matrix(&mut rng, width, fan_in, weight_bound);
        let bias = uniform_vector(&mut rng, width, bias_bound);
        layers.push(SineLayer { weight, bias });
        fan_in = width;
    }
    let m = fan_in as f64;
    let out_weight = uniform_vector(&mut rng, fan_in, (6.0 / m).sqrt() / w0);
    let out_bias = rng.gen_range(-1.0..=1.0) / m.sqrt();
    Ok(SirenParams {
        layers,
        out_weight,
        out_bias,
        input_dim: arch.input_dim,
        apply_nu: false,
        sphere_radius: config.sphere_radius,
    })
}

pub fn geometric_init(arch: &Architecture, config: &InitConfig) -> Result<SirenParams> {
    arch.validate()?;
    config.validate(arch)?;
    let n = arch.hidden.len();
    let last_in = if n == 1 { arch.input_dim } else { arch.hidden[n - 2] };
    let last_out = arch.hidden[n - 1];
    if last_in != last_out {
        return Err(Error::config(format!(
            "geometric init needs a square last hidden layer, got {last_out}x{last_in}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut fan_in = arch.input_dim;
    let mut layers = Vec::with_capacity(n);
    for &width in &arch.hidden[..n - 1] {
        let bound = (3.0 / width as f64).sqrt();
        layers.push(SineLayer {
            weight: uniform_matrix(&mut rng, width, fan_in, bound),
            bias: Array1::zeros(width),
        });
        fan_in = width;
    }

    let mut weight = Array2::<f64>::eye(last_out) * FRAC_PI_2;
    let mut bias = Array1::<f64>::from_elem(last_out, FRAC_PI_2);
    let mut out_weight = Array1::<f64>::from_elem(last_out, -1.0);
    let mut out_bias = last_out as f64;
    if config.perturb_std > 0.0 {
        let noise = Normal::new(0.0, config.perturb_std).expect("finite std");
        weight.mapv_inplace(|v| v + noise.sample(&mut rng));
        bias.mapv_inplace(|v| v + noise.sample(&mut rng));
        out_weight.mapv_inplace(|v| v + noise.sample(&mut rng));
        out_bias += noise.sample(&mut rng);
    }
    layers.push(SineLayer { weight, bias });

    Ok(SirenParams {
        layers,
        out_weight,
        out_bias,
        input_dim: arch.input_dim,
        apply_nu: true,
        sphere_radius: config.sphere_radius,
    })
}

pub fn mfgi_init(arch: &Architecture, config: &InitConfig) -> Result<SirenParams> {
    if arch.hidden.len() < 3 {
        return Err(Error::config(
            "multi-frequency init needs at least three hidden layers (two random, one fixed)",
        ));
    }
    let mut params = geometric_init(arch, config)?;
    let k_r = config.low_freq_rows(arch);

    let first = &mut params.layers[0].weight;
    for mut row in first.rows_mut().into_iter().skip(k_r) {
        row.mapv_inplace(|v| v * config.n_p);
    }
    // Only the columns that read the fast units are damped.
    let second = &mut params.layers[1].weight;
    for mut col in second.columns_mut().into_iter().skip(k_r) {
        col.mapv_inplace(|v| v * config.s);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scheme: InitScheme) -> InitConfig {
        InitConfig {
            scheme,
            perturb_std: 0.0,
            seed: 11,
            ..InitConfig::default()
        }
    }

    fn std_dev(v: impl Iterator<Item = f64> + Clone) -> f64 {
        let n = v.clone().count() as f64;
        let mean = v.clone().sum::<f64>() / n;
        (v.map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    #[test]
    fn nu_reference_values() {
        assert_eq!(nu(0.0), 0.0);
        assert!((nu(1.0) - (1.0f64 + 1e-8).sqrt()).abs() < 1e-15);
        assert!((nu(1.0) - 1.000000005).abs() < 1e-12);
        assert!((nu(-0.25) + 0.5).abs() < 1e-7);
        assert!((nu_derivatives(0.25).0 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn nu_derivatives_match_finite_differences() {
        for &d in &[0.3, -0.7, 1.9, -0.05] {
            let h = 1e-6;
            let (d1, d2) = nu_derivatives(d);
            let fd1 = (nu(d + h) - nu(d - h)) / (2.0 * h);
            let fd2 = (nu_derivatives(d + h).0 - nu_derivatives(d - h).0) / (2.0 * h);
            let fd3 = (nu_derivatives(d + h).1 - nu_derivatives(d - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-7 * d1.abs().max(1.0));
            assert!((d2 - fd2).abs() < 1e-6 * d2.abs().max(1.0));
            assert!((nu_third_derivative(d) - fd3).abs() < 1e-5 * fd3.abs().max(1.0));
        }
    }

    #[test]
    fn standard_init_is_deterministic() {
        let arch = Architecture::uniform(3, 3, 32);
        let a = standard_init(&arch, &cfg(InitScheme::Standard)).unwrap();
        let b = standard_init(&arch, &cfg(InitScheme::Standard)).unwrap();
        assert_eq!(a, b);
        assert!(!a.apply_nu);
    }

    #[test]
    fn standard_init_single_hidden_layer_shapes() {
        let arch = Architecture::uniform(2, 1, 16);
        let p = standard_init(&arch, &cfg(InitScheme::Standard)).unwrap();
        assert_eq!(p.layers.len(), 1);
        assert_eq!(p.out_weight.len(), 16);
        p.validate().unwrap();
    }

    #[test]
    fn standard_first_layer_std_scales_with_omega() {
        // 5000 x 2 first-layer entries; unscaled U(-1/2, 1/2) has std 1/sqrt(12)/2.
        let arch = Architecture::uniform(2, 1, 5000);
        let p = standard_init(&arch, &cfg(InitScheme::Standard)).unwrap();
        let unscaled = 0.5 / 3f64.sqrt();
        let measured = std_dev(p.layers[0].weight.iter().copied());
        let ratio = measured / unscaled;
        assert!((ratio / 30.0 - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn geometric_rejects_non_square_last_layer() {
        let arch = Architecture {
            input_dim: 2,
            hidden: vec![64, 32],
        };
        assert!(matches!(geometric_init(&arch, &cfg(InitScheme::Geometric)), Err(Error::Config(_))));
    }

    #[test]
    fn single_layer_closed_form_values() {
        // One hidden layer with W = pi/2 I, b = pi/2, w = -1, b_out = 2.
        let arch = Architecture::uniform(2, 1, 2);
        let mut c = cfg(InitScheme::Geometric);
        c.sphere_radius = 0.5;
        let p = geometric_init(&arch, &c).unwrap();
        let origin = ndarray::array![[0.0, 0.0]];
        assert_eq!(p.forward(origin.view()).unwrap()[0], -0.5);

        let mut raw = p.clone();
        raw.apply_nu = false;
        let x = ndarray::array![[0.6, 0.8]];
        let expected_raw = 2.0 - (0.3 * std::f64::consts::PI).cos() - (0.4 * std::f64::consts::PI).cos();
        let got = raw.forward(x.view()).unwrap()[0];
        assert!((got - expected_raw).abs() < 1e-12);
        assert!((got - 1.1032).abs() < 1e-4);
        assert!((nu(got) - 1.0503).abs() < 1e-4);
    }

    #[test]
    fn single_layer_slope_at_origin() {
        // 1 - cos(pi z / 2) ~ (pi^2 / 8) z^2, so the recovered norm is scaled by pi / (2 sqrt 2).
        let arch = Architecture::uniform(2, 1, 2);
        let mut p = geometric_init(&arch, &cfg(InitScheme::Geometric)).unwrap();
        p.apply_nu = false;
        let x = ndarray::array![[6e-3, -8e-3]];
        let slope = nu(p.forward(x.view()).unwrap()[0]) / 1e-2;
        let expected = std::f64::consts::PI / (2.0 * 2f64.sqrt());
        assert!((slope - expected).abs() < 2e-4, "slope {slope}");
    }

    #[test]
    fn mfgi_degenerate_config_equals_geometric() {
        let arch = Architecture::uniform(2, 4, 32);
        let mut c = cfg(InitScheme::Mfgi);
        c.k_r = Some(32);
        c.s = 1.0;
        c.perturb_std = 1e-4;
        let m = mfgi_init(&arch, &c).unwrap();
        let g = geometric_init(&arch, &c).unwrap();
        assert_eq!(m, g);
    }

    #[test]
    fn mfgi_high_rows_are_scaled_by_n_p() {
        let arch = Architecture::uniform(2, 4, 512);
        let p = mfgi_init(&arch, &cfg(InitScheme::Mfgi)).unwrap();
        let w = &p.layers[0].weight;
        let low = std_dev(w.rows().into_iter().take(128).flat_map(|r| r.to_vec()));
        let high = std_dev(w.rows().into_iter().skip(128).flat_map(|r| r.to_vec()));
        assert!((high / low / 30.0 - 1.0).abs() < 0.1, "ratio {}", high / low);
    }

    #[test]
    fn mfgi_damps_only_columns_fed_by_fast_units() {
        let arch = Architecture::uniform(2, 4, 64);
        let c = cfg(InitScheme::Mfgi);
        let m = mfgi_init(&arch, &c).unwrap();
        let g = geometric_init(&arch, &c).unwrap();
        for ((i, j), &v) in m.layers[1].weight.indexed_iter() {
            let scale = if j >= 16 { c.s } else { 1.0 };
            assert_eq!(v, g.layers[1].weight[[i, j]] * scale, "entry ({i}, {j})");
        }
    }

    #[test]
    fn mfgi_needs_three_hidden_layers() {
        let arch = Architecture::uniform(2, 2, 16);
        assert!(mfgi_init(&arch, &cfg(InitScheme::Mfgi)).is_err());
    }

    #[test]
    fn config_bounds_are_checked() {
        let arch = Architecture::uniform(2, 4, 16);
        let mut c = cfg(InitScheme::Mfgi);
        c.k_r = Some(17);
        assert!(c.validate(&arch).is_err());
        c.k_r = Some(4);
        c.s = 0.0;
        assert!(c.validate(&arch).is_err());
    }
}
