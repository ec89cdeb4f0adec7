//! Sine-activated MLP with analytic spatial jets.
//!
//! Every hidden layer computes `sin(W x + b)`; the network output is
//! `w . x_n + b`, optionally passed through `nu(d) = sign(d) sqrt(|d| + eps)`
//! and shifted by the sphere radius. Forward evaluation carries, for each
//! point, the triple (value, Jacobian w.r.t. the input, Laplacian) through
//! the layers. Parameter gradients of losses that depend on the value, the
//! gradient and the Laplacian are obtained by reverse accumulation through
//! that same propagation.
//!
//! Internally a batch is stored as a `units x (B * (d + 2))` matrix where
//! each point owns `d + 2` consecutive columns: value, `d` Jacobian columns,
//! Laplacian. One layer is then a single matrix product plus an elementwise
//! pass.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray::linalg::general_mat_mul;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_points, ImplicitField, JetBatch, SampleRole};
use crate::init::{nu, nu_derivatives, nu_third_derivative};
use crate::losses::{self, LossBatch, LossBreakdown, LossConfig};

/// Layer sizes of a sine network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    /// Output width of every hidden (sine) layer, in order.
    pub hidden: Vec<usize>,
}

impl Architecture {
    pub fn uniform(input_dim: usize, hidden_layers: usize, width: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![width; hidden_layers],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_dim == 2 || self.input_dim == 3) {
            return Err(Error::config(format!(
                "input dimension must be 2 or 3, got {}",
                self.input_dim
            )));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("need at least one hidden layer of non-zero width"));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut n = 0;
        for &w in &self.hidden {
            n += w * fan_in + w;
            fan_in = w;
        }
        n + fan_in + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SineLayer {
    /// `N x M`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// All trainable parameters plus the output transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenParams {
    pub layers: Vec<SineLayer>,
    pub out_weight: Array1<f64>,
    pub out_bias: f64,
    pub input_dim: usize,
    pub apply_nu: bool,
    pub sphere_radius: f64,
}

/// Parameter-shaped buffer of loss derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub layers: Vec<SineLayer>,
    pub out_weight: Array1<f64>,
    pub out_bias: f64,
}

/// Uniform access to every stored scalar, in checkpoint order.
pub trait ParamBuffers {
    fn buffers(&self) -> Vec<&[f64]>;
    fn buffers_mut(&mut self) -> Vec<&mut [f64]>;

    fn len_flat(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.buffers().concat()
    }

    fn get_flat(&self, mut index: usize) -> f64 {
        for b in self.buffers() {
            if index < b.len() {
                return b[index];
            }
            index -= b.len();
        }
        panic!("flat parameter index out of range");
    }

    fn set_flat(&mut self, mut index: usize, value: f64) {
        for b in self.buffers_mut() {
            if index < b.len() {
                b[index] = value;
                return;
            }
            index -= b.len();
        }
        panic!("flat parameter index out of range");
    }
}

fn layer_buffers<'a>(layers: &'a [SineLayer], out_weight: &'a Array1<f64>, out_bias: &'a f64) -> Vec<&'a [f64]> {
    let mut v: Vec<&[f64]> = Vec::with_capacity(2 * layers.len() + 2);
    for l in layers {
        v.push(l.weight.as_slice().expect("standard layout"));
        v.push(l.bias.as_slice().expect("standard layout"));
    }
    v.push(out_weight.as_slice().expect("standard layout"));
    v.push(std::slice::from_ref(out_bias));
    v
}

fn layer_buffers_mut<'a>(
    layers: &'a mut [SineLayer],
    out_weight: &'a mut Array1<f64>,
    out_bias: &'a mut f64,
) -> Vec<&'a mut [f64]> {
    let mut v: Vec<&mut [f64]> = Vec::with_capacity(2 * layers.len() + 2);
    for l in layers.iter_mut() {
        v.push(l.weight.as_slice_mut().expect("standard layout"));
        v.push(l.bias.as_slice_mut().expect("standard layout"));
    }
    v.push(out_weight.as_slice_mut().expect("standard layout"));
    v.push(std::slice::from_mut(out_bias));
    v
}

impl ParamBuffers for SirenParams {
    fn buffers(&self) -> Vec<&[f64]> {
        layer_buffers(&self.layers, &self.out_weight, &self.out_bias)
    }
    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        layer_buffers_mut(&mut self.layers, &mut self.out_weight, &mut self.out_bias)
    }
}

impl ParamBuffers for ParamGrad {
    fn buffers(&self) -> Vec<&[f64]> {
        layer_buffers(&self.layers, &self.out_weight, &self.out_bias)
    }
    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        layer_buffers_mut(&mut self.layers, &mut self.out_weight, &mut self.out_bias)
    }
}

impl ParamGrad {
    pub fn zeros_like(params: &SirenParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| SineLayer {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            out_weight: Array1::zeros(params.out_weight.len()),
            out_bias: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.buffers().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Loss derivatives with respect to each point's (value, gradient, Laplacian).
#[derive(Debug, Clone, PartialEq)]
pub struct JetAdjoint {
    pub values: Vec<f64>,
    pub gradients: Array2<f64>,
    pub laplacians: Vec<f64>,
}

impl JetAdjoint {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            values: vec![0.0; len],
            gradients: Array2::zeros((len, dim)),
            laplacians: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Intermediate quantities kept for the reverse pass.
struct Tape {
    /// Input state of each hidden layer, `M_i x (B (d+2))`.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation jets of each hidden layer, `N_i x (B (d+2))`, with the
    /// value column replaced by `cos(a)`.
    preacts: Vec<Array2<f64>>,
    /// `sin(a)` of each hidden layer, `N_i x B`.
    sines: Vec<Array2<f64>>,
    /// Output of the last hidden layer.
    last: Array2<f64>,
    /// Raw network output jets before the output transform.
    raw_values: Vec<f64>,
    raw_grads: Array2<f64>,
    raw_laps: Vec<f64>,
}

impl SirenParams {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.input_dim,
            hidden: self.layers.iter().map(|l| l.weight.nrows()).collect(),
        }
    }

    /// Check that layer shapes chain and every entry is finite.
    pub fn validate(&self) -> Result<()> {
        let mut fan_in = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.weight.ncols() != fan_in || l.bias.len() != l.weight.nrows() {
                return Err(Error::config(format!("layer {i} shape does not chain")));
            }
            fan_in = l.weight.nrows();
        }
        if self.layers.is_empty() {
            return Err(Error::config("network has no hidden layer"));
        }
        if self.out_weight.len() != fan_in {
            return Err(Error::config("output weight length does not match last hidden width"));
        }
        if self.buffers().iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(Error::numeric("parameters", "non-finite parameter entry"));
        }
        Ok(())
    }

    fn output_transform(&self, raw: f64) -> f64 {
        if self.apply_nu {
            nu(raw) - self.sphere_radius
        } else {
            raw
        }
    }

    /// Network output at each row of `points`.
    pub fn forward(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_points(points, self.input_dim)?;
        let mut state = points.t().to_owned();
        for layer in &self.layers {
            let mut a = layer.weight.dot(&state);
            for (mut row, &b) in a.axis_iter_mut(Axis(0)).zip(layer.bias.iter()) {
                row.mapv_inplace(|v| (v + b).sin());
            }
            state = a;
        }
        let raw = self.out_weight.dot(&state);
        Ok(raw.iter().map(|&r| self.output_transform(r + self.out_bias)).collect())
    }

    /// Output value, spatial gradient and spatial Laplacian at each row of `points`.
    pub fn forward_with_derivatives(&self, points: ArrayView2<'_, f64>) -> Result<JetBatch> {
        check_points(points, self.input_dim)?;
        let tape = self.record(points);
        Ok(self.transform_jets(&tape))
    }

    /// Output values and spatial gradients without the Laplacian channel or a tape.
    pub fn forward_with_gradients(&self, points: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        check_points(points, self.input_dim)?;
        let d = self.input_dim;
        let cols = d + 1;
        let b = points.nrows();
        let mut state = Array2::<f64>::zeros((d, b * cols));
        for (k, p) in points.rows().into_iter().enumerate() {
            for j in 0..d {
                state[[j, k * cols]] = p[j];
                state[[j, k * cols + 1 + j]] = 1.0;
            }
        }
        for layer in &self.layers {
            let mut a = layer.weight.dot(&state);
            for (mut row, &bias) in a.axis_iter_mut(Axis(0)).zip(layer.bias.iter()) {
                for c in row.as_slice_mut().expect("standard layout").chunks_exact_mut(cols) {
                    let (sa, ca) = (c[0] + bias).sin_cos();
                    c[0] = sa;
                    for v in &mut c[1..] {
                        *v *= ca;
                    }
                }
            }
            state = a;
        }
        let head = self.out_weight.dot(&state);
        let mut values = vec![0.0; b];
        let mut grads = Array2::<f64>::zeros((b, d));
        for k in 0..b {
            let y = head[k * cols] + self.out_bias;
            let scale = if self.apply_nu { nu_derivatives(y).0 } else { 1.0 };
            values[k] = self.output_transform(y);
            for j in 0..d {
                grads[[k, j]] = scale * head[k * cols + 1 + j];
            }
        }
        Ok((values, grads))
    }

    fn record(&self, points: ArrayView2<'_, f64>) -> Tape {
        let d = self.input_dim;
        let cols = d + 2;
        let b = points.nrows();
        let mut state = Array2::<f64>::zeros((d, b * cols));
        for (k, p) in points.rows().into_iter().enumerate() {
            let base = k * cols;
            for j in 0..d {
                state[[j, base]] = p[j];
                state[[j, base + 1 + j]] = 1.0;
            }
        }

        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut sines = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut a = layer.weight.dot(&state);
            let mut out = Array2::<f64>::zeros(a.raw_dim());
            let mut sin = Array2::<f64>::zeros((a.nrows(), b));
            for (((mut arow, mut orow), mut srow), &bias) in a
                .axis_iter_mut(Axis(0))
                .zip(out.axis_iter_mut(Axis(0)))
                .zip(sin.axis_iter_mut(Axis(0)))
                .zip(layer.bias.iter())
            {
                let arow = arow.as_slice_mut().expect("standard layout");
                let orow = orow.as_slice_mut().expect("standard layout");
                for ((ac, oc), sv) in arow
                    .chunks_exact_mut(cols)
                    .zip(orow.chunks_exact_mut(cols))
                    .zip(srow.iter_mut())
                {
                    let (sa, ca) = (ac[0] + bias).sin_cos();
                    ac[0] = ca;
                    *sv = sa;
                    oc[0] = sa;
                    let mut q = 0.0;
                    for j in 1..=d {
                        q += ac[j] * ac[j];
                        oc[j] = ca * ac[j];
                    }
                    oc[d + 1] = ca * ac[d + 1] - sa * q;
                }
            }
            inputs.push(std::mem::replace(&mut state, out));
            preacts.push(a);
            sines.push(sin);
        }

        let head = self.out_weight.dot(&state);
        let mut raw_values = vec![0.0; b];
        let mut raw_grads = Array2::<f64>::zeros((b, d));
        let mut raw_laps = vec![0.0; b];
        for k in 0..b {
            let base = k * cols;
            raw_values[k] = head[base] + self.out_bias;
            for j in 0..d {
                raw_grads[[k, j]] = head[base + 1 + j];
            }
            raw_laps[k] = head[base + d + 1];
        }
        Tape {
            inputs,
            preacts,
            sines,
            last: state,
            raw_values,
            raw_grads,
            raw_laps,
        }
    }

    fn transform_jets(&self, tape: &Tape) -> JetBatch {
        let b = tape.raw_values.len();
        let d = self.input_dim;
        let mut out = JetBatch::zeros(b, d);
        for k in 0..b {
            let y = tape.raw_values[k];
            let g = tape.raw_grads.row(k);
            if self.apply_nu {
                let (d1, d2) = nu_derivatives(y);
                let g2: f64 = g.iter().map(|v| v * v).sum();
                out.values[k] = nu(y) - self.sphere_radius;
                for j in 0..d {
                    out.gradients[[k, j]] = d1 * g[j];
                }
                out.laplacians[k] = d1 * tape.raw_laps[k] + d2 * g2;
            } else {
                out.values[k] = y;
                out.gradients.row_mut(k).assign(&g);
                out.laplacians[k] = tape.raw_laps[k];
            }
        }
        out
    }

    /// Reverse pass: parameter gradient of `sum_k adj . jets_k`.
    fn backward(&self, tape: &Tape, adj: &JetAdjoint) -> ParamGrad {
        let d = self.input_dim;
        let cols = d + 2;
        let b = tape.raw_values.len();

        // Adjoint of the raw head output, laid out like a state row.
        let mut head_adj = Array1::<f64>::zeros(b * cols);
        for k in 0..b {
            let base = k * cols;
            let gbar = adj.gradients.row(k);
            if self.apply_nu {
                let y = tape.raw_values[k];
                let g = tape.raw_grads.row(k);
                let (d1, d2) = nu_derivatives(y);
                let d3 = nu_third_derivative(y);
                let g2: f64 = g.iter().map(|v| v * v).sum();
                let gdot: f64 = g.iter().zip(gbar.iter()).map(|(a, c)| a * c).sum();
                let lbar = adj.laplacians[k];
                head_adj[base] = adj.values[k] * d1
                    + gdot * d2
                    + lbar * (d2 * tape.raw_laps[k] + d3 * g2);
                for j in 0..d {
                    head_adj[base + 1 + j] = d1 * gbar[j] + 2.0 * d2 * lbar * g[j];
                }
                head_adj[base + d + 1] = d1 * lbar;
            } else {
                head_adj[base] = adj.values[k];
                for j in 0..d {
                    head_adj[base + 1 + j] = gbar[j];
                }
                head_adj[base + d + 1] = adj.laplacians[k];
            }
        }

        let mut grad = ParamGrad::zeros_like(self);
        grad.out_weight = tape.last.dot(&head_adj);
        grad.out_bias = (0..b).map(|k| head_adj[k * cols]).sum();

        // Adjoint of the last hidden state: outer product w (x) head_adj.
        let mut state_adj = Array2::from_shape_fn((self.out_weight.len(), b * cols), |(i, c)| {
            self.out_weight[i] * head_adj[c]
        });

        for li in (0..self.layers.len()).rev() {
            let a = &tape.preacts[li];
            let mut a_adj = Array2::<f64>::zeros(a.raw_dim());
            for (((arow, orow), mut rrow), srow) in a
                .axis_iter(Axis(0))
                .zip(state_adj.axis_iter(Axis(0)))
                .zip(a_adj.axis_iter_mut(Axis(0)))
                .zip(tape.sines[li].axis_iter(Axis(0)))
            {
                let arow = arow.as_slice().expect("standard layout");
                let orow = orow.as_slice().expect("standard layout");
                let rrow = rrow.as_slice_mut().expect("standard layout");
                for (((ac, oc), rc), &sa) in arow
                    .chunks_exact(cols)
                    .zip(orow.chunks_exact(cols))
                    .zip(rrow.chunks_exact_mut(cols))
                    .zip(srow.iter())
                {
                    let ca = ac[0];
                    let lbar = oc[d + 1];
                    let mut q = 0.0;
                    let mut jdot = 0.0;
                    for j in 1..=d {
                        q += ac[j] * ac[j];
                        jdot += oc[j] * ac[j];
                        rc[j] = ca * oc[j] - 2.0 * lbar * sa * ac[j];
                    }
                    rc[0] = oc[0] * ca - sa * jdot - lbar * (sa * ac[d + 1] + ca * q);
                    rc[d + 1] = lbar * ca;
                }
            }
            let input = &tape.inputs[li];
            grad.layers[li].weight = a_adj.dot(&input.t());
            let bias_grad = &mut grad.layers[li].bias;
            for (i, row) in a_adj.axis_iter(Axis(0)).enumerate() {
                bias_grad[i] = row.iter().step_by(cols).sum();
            }
            if li > 0 {
                let w = &self.layers[li].weight;
                state_adj = Array2::zeros((w.ncols(), a_adj.ncols()));
                general_mat_mul(1.0, &w.t(), &a_adj, 0.0, &mut state_adj);
            }
        }
        grad
    }

    /// Jets and the parameter gradient of `sum_k adj . jets_k` in one pass.
    pub fn vjp(&self, points: ArrayView2<'_, f64>, adjoint: &JetAdjoint) -> Result<(JetBatch, ParamGrad)> {
        check_points(points, self.input_dim)?;
        if adjoint.len() != points.nrows() || adjoint.gradients.ncols() != self.input_dim {
            return Err(Error::config("adjoint shape does not match point batch"));
        }
        let tape = self.record(points);
        Ok((self.transform_jets(&tape), self.backward(&tape, adjoint)))
    }
}

impl ImplicitField for SirenParams {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn values(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.forward(points)
    }

    fn jets(&self, points: ArrayView2<'_, f64>) -> Result<JetBatch> {
        self.forward_with_derivatives(points)
    }
}

/// Total loss and its exact parameter gradient.
///
/// Surface and domain samples go through one forward pass; the loss module
/// supplies per-point adjoints which are then pulled back to the parameters.
pub fn loss_gradients(
    params: &SirenParams,
    batch: &LossBatch,
    config: &LossConfig,
    t: f64,
) -> Result<(LossBreakdown, ParamGrad)> {
    let n_surface = batch.surface_points.nrows();
    let points = ndarray::concatenate(Axis(0), &[batch.surface_points.view(), batch.domain_points.view()])
        .map_err(|_| Error::config("surface and domain points differ in dimension"))?;
    check_points(points.view(), params.input_dim)?;
    let tape = params.record(points.view());
    let jets = params.transform_jets(&tape);
    let total = jets.len();
    let surface = jets.slice(0..n_surface, SampleRole::Surface);
    let domain = jets.slice(n_surface..total, SampleRole::Domain);

    let (breakdown, surf_adj, dom_adj) = losses::total_loss_with_adjoints(&surface, &domain, batch, config, t)?;

    let mut adj = JetAdjoint::zeros(total, params.input_dim);
    adj.values[..n_surface].copy_from_slice(&surf_adj.values);
    adj.values[n_surface..].copy_from_slice(&dom_adj.values);
    adj.laplacians[..n_surface].copy_from_slice(&surf_adj.laplacians);
    adj.laplacians[n_surface..].copy_from_slice(&dom_adj.laplacians);
    adj.gradients.slice_mut(s![..n_surface, ..]).assign(&surf_adj.gradients);
    adj.gradients.slice_mut(s![n_surface.., ..]).assign(&dom_adj.gradients);

    let grad = params.backward(&tape, &adj);
    if !grad.is_finite() {
        return Err(Error::numeric("parameter gradient", "non-finite entry"));
    }
    Ok((breakdown, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_params(arch: &Architecture, apply_nu: bool, scale: f64, seed: u64) -> SirenParams {
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

    #[test]
    fn rejects_wrong_point_dimension() {
        let p = random_params(&Architecture::uniform(2, 2, 8), false, 1.0, 1);
        let pts = array![[0.1, 0.2, 0.3]];
        assert!(matches!(p.forward(pts.view()), Err(Error::Config(_))));
        let bad = array![[f64::NAN, 0.0]];
        assert!(matches!(p.forward(bad.view()), Err(Error::Input(_))));
    }

    #[test]
    fn jets_value_matches_plain_forward() {
        let p = random_params(&Architecture::uniform(3, 3, 16), true, 1.0, 2);
        let pts = array![[0.1, -0.4, 0.3], [0.7, 0.2, -0.1]];
        let plain = p.forward(pts.view()).unwrap();
        let jets = p.forward_with_derivatives(pts.view()).unwrap();
        for (a, b) in plain.iter().zip(&jets.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_only_pass_matches_jets() {
        for apply_nu in [false, true] {
            let mut p = random_params(&Architecture::uniform(2, 3, 16), apply_nu, 1.0, 4);
            p.out_bias += 2.0;
            let pts = array![[0.1, -0.4], [0.7, 0.2], [-0.9, 0.05]];
            let (values, grads) = p.forward_with_gradients(pts.view()).unwrap();
            let jets = p.forward_with_derivatives(pts.view()).unwrap();
            for k in 0..3 {
                assert!((values[k] - jets.values[k]).abs() < 1e-12);
                for j in 0..2 {
                    assert!((grads[[k, j]] - jets.gradients[[k, j]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn duplicated_rows_give_duplicated_outputs() {
        let p = random_params(&Architecture::uniform(2, 2, 8), false, 1.0, 3);
        let pts = array![[0.3, -0.2], [0.3, -0.2]];
        let v = p.forward(pts.view()).unwrap();
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn flat_accessors_cover_every_parameter() {
        let arch = Architecture::uniform(2, 2, 5);
        let mut p = random_params(&arch, false, 1.0, 4);
        assert_eq!(p.len_flat(), arch.param_count());
        let last = p.len_flat() - 1;
        p.set_flat(last, 7.0);
        assert_eq!(p.out_bias, 7.0);
        assert_eq!(p.get_flat(0), p.layers[0].weight[[0, 0]]);
    }

    #[test]
    fn validate_catches_broken_chain() {
        let mut p = random_params(&Architecture::uniform(2, 2, 5), false, 1.0, 5);
        p.layers[1].weight = Array2::zeros((5, 4));
        assert!(p.validate().is_err());
    }
}
