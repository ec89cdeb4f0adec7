//! Loss terms for fitting a signed distance field to surface samples.
//!
//! All integrals are estimated as plain means over their sample batches:
//! surface terms over surface samples, the penalty and divergence terms over
//! off-surface domain samples, and the eikonal term over both. Each term can
//! also write its derivative with respect to the per-point jets into a
//! [`JetAdjoint`], which the network then pulls back to its parameters.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{JetBatch, SampleRole};
use crate::siren::JetAdjoint;

/// Sample points for one optimization step.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch {
    pub surface_points: Array2<f64>,
    /// Unit normals aligned with `surface_points`.
    pub surface_normals: Option<Array2<f64>>,
    /// Mean curvature at each surface point.
    pub surface_curvatures: Option<Vec<f64>>,
    /// Target values for surface points; zero when absent.
    pub surface_targets: Option<Vec<f64>>,
    pub domain_points: Array2<f64>,
}

impl LossBatch {
    pub fn new(surface_points: Array2<f64>, domain_points: Array2<f64>) -> Self {
        Self {
            surface_points,
            surface_normals: None,
            surface_curvatures: None,
            surface_targets: None,
            domain_points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    None,
    Linear,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DivPenalty {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub lambda_manifold: f64,
    pub lambda_normal: f64,
    pub lambda_eikonal: f64,
    pub lambda_nonmanifold: f64,
    pub lambda_div: f64,
    pub lambda_curv: f64,
    pub alpha: f64,
    pub schedule: Schedule,
    pub t0: f64,
    pub t1: f64,
    pub tau1: f64,
    pub div_penalty: DivPenalty,
    pub use_normals: bool,
    pub use_curvature: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::digs()
    }
}

impl LossConfig {
    /// Manifold, normal, eikonal and off-surface penalty terms.
    pub fn siren() -> Self {
        Self {
            lambda_manifold: 3000.0,
            lambda_normal: 100.0,
            lambda_eikonal: 50.0,
            lambda_nonmanifold: 100.0,
            lambda_div: 0.0,
            lambda_curv: 0.0,
            alpha: 100.0,
            schedule: Schedule::None,
            t0: 0.5,
            t1: 0.75,
            tau1: 0.0,
            div_penalty: DivPenalty::L1,
            use_normals: true,
            use_curvature: false,
        }
    }

    pub fn siren_without_normals() -> Self {
        Self {
            lambda_normal: 0.0,
            use_normals: false,
            ..Self::siren()
        }
    }

    /// Normal-free objective plus the annealed divergence penalty.
    pub fn digs() -> Self {
        Self {
            lambda_div: 100.0,
            schedule: Schedule::Linear,
            ..Self::siren_without_normals()
        }
    }

    pub fn zero() -> Self {
        Self {
            lambda_manifold: 0.0,
            lambda_normal: 0.0,
            lambda_eikonal: 0.0,
            lambda_nonmanifold: 0.0,
            lambda_div: 0.0,
            lambda_curv: 0.0,
            ..Self::digs()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            self.lambda_manifold,
            self.lambda_normal,
            self.lambda_eikonal,
            self.lambda_nonmanifold,
            self.lambda_div,
            self.lambda_curv,
        ];
        if lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::config("loss weights must be non-negative"));
        }
        if !(0.0 <= self.t0 && self.t0 <= self.t1 && self.t1 <= 1.0) {
            return Err(Error::config("schedule needs 0 <= t0 <= t1 <= 1"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        Ok(())
    }
}

/// Annealing factor on the divergence weight at training progress `t`.
pub fn tau(t: f64, config: &LossConfig) -> f64 {
    match config.schedule {
        Schedule::None => 1.0,
        Schedule::Linear => {
            if t < config.t0 {
                1.0
            } else if t > config.t1 || config.t1 == config.t0 {
                config.tau1
            } else {
                1.0 + (config.tau1 - 1.0) * (t - config.t0) / (config.t1 - config.t0)
            }
        }
        Schedule::Step => {
            if t < config.t0 {
                1.0
            } else {
                config.tau1
            }
        }
    }
}

/// Unweighted terms and the weighted total for one evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub manifold: f64,
    pub normal: Option<f64>,
    pub eikonal: f64,
    pub nonmanifold: f64,
    pub divergence: f64,
    pub curvature: Option<f64>,
    pub tau: f64,
    /// `tau * lambda_div`, the effective divergence weight.
    pub div_weight: f64,
    pub total: f64,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn require_nonempty(jets: &JetBatch, term: &str) -> Result<()> {
    if jets.is_empty() {
        return Err(Error::input(format!("{term}: empty sample batch")));
    }
    Ok(())
}

fn manifold_term(jets: &JetBatch, targets: Option<&[f64]>, adj: Option<(&mut JetAdjoint, f64)>) -> Result<f64> {
    require_nonempty(jets, "manifold")?;
    if let Some(t) = targets {
        if t.len() != jets.len() {
            return Err(Error::config("surface targets do not match surface batch"));
        }
    }
    let n = jets.len() as f64;
    let target = |k: usize| targets.map_or(0.0, |t| t[k]);
    let value = (0..jets.len()).map(|k| (jets.values[k] - target(k)).abs()).sum::<f64>() / n;
    if let Some((adj, w)) = adj {
        for k in 0..jets.len() {
            adj.values[k] += w * sign(jets.values[k] - target(k)) / n;
        }
    }
    Ok(value)
}

fn check_normals(normals: &Array2<f64>, jets: &JetBatch) -> Result<()> {
    if normals.nrows() != jets.len() || normals.ncols() != jets.dim() {
        return Err(Error::config("normals do not match surface batch"));
    }
    for row in normals.rows() {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::input(format!("normal with norm {n} is not unit length")));
        }
    }
    Ok(())
}

fn normal_term(jets: &JetBatch, normals: &Array2<f64>, adj: Option<(&mut JetAdjoint, f64)>) -> Result<f64> {
    require_nonempty(jets, "normal")?;
    check_normals(normals, jets)?;
    let n = jets.len() as f64;
    let dot: f64 = (0..jets.len())
        .map(|k| 1.0 - jets.gradients.row(k).dot(&normals.row(k)))
        .sum();
    if let Some((adj, w)) = adj {
        for k in 0..jets.len() {
            for j in 0..jets.dim() {
                adj.gradients[[k, j]] -= w * normals[[k, j]] / n;
            }
        }
    }
    Ok(dot / n)
}

/// Eikonal term over a set of batches treated as one sample set.
fn eikonal_term(parts: &[&JetBatch], mut adjs: Vec<Option<&mut JetAdjoint>>, w: f64) -> Result<f64> {
    let total: usize = parts.iter().map(|p| p.len()).sum();
    if total == 0 {
        return Err(Error::input("eikonal: empty sample batch"));
    }
    let n = total as f64;
    let mut value = 0.0;
    for (pi, jets) in parts.iter().enumerate() {
        for k in 0..jets.len() {
            let norm = jets.grad_norm(k);
            value += (norm - 1.0).abs();
            if let Some(adj) = adjs.get_mut(pi).and_then(|a| a.as_deref_mut()) {
                if norm > 0.0 {
                    let s = w * sign(norm - 1.0) / (n * norm);
                    for j in 0..jets.dim() {
                        adj.gradients[[k, j]] += s * jets.gradients[[k, j]];
                    }
                }
            }
        }
    }
    Ok(value / n)
}

fn nonmanifold_term(jets: &JetBatch, alpha: f64, adj: Option<(&mut JetAdjoint, f64)>) -> Result<f64> {
    require_nonempty(jets, "nonmanifold")?;
    let n = jets.len() as f64;
    let value = jets.values.iter().map(|v| (-alpha * v.abs()).exp()).sum::<f64>() / n;
    if let Some((adj, w)) = adj {
        for (k, &v) in jets.values.iter().enumerate() {
            adj.values[k] += w * (-alpha * sign(v)) * (-alpha * v.abs()).exp() / n;
        }
    }
    Ok(value)
}

fn divergence_term(jets: &JetBatch, penalty: DivPenalty, adj: Option<(&mut JetAdjoint, f64)>) -> Result<f64> {
    if jets.role == SampleRole::Surface {
        return Err(Error::Contract(
            "divergence penalty evaluated on surface samples; it is defined off the surface only".into(),
        ));
    }
    require_nonempty(jets, "divergence")?;
    let n = jets.len() as f64;
    let value = match penalty {
        DivPenalty::L1 => jets.laplacians.iter().map(|l| l.abs()).sum::<f64>(),
        DivPenalty::L2 => jets.laplacians.iter().map(|l| l * l).sum::<f64>(),
    } / n;
    if let Some((adj, w)) = adj {
        for (k, &l) in jets.laplacians.iter().enumerate() {
            let d = match penalty {
                DivPenalty::L1 => sign(l),
                DivPenalty::L2 => 2.0 * l,
            };
            adj.laplacians[k] += w * d / n;
        }
    }
    Ok(value)
}

fn curvature_term(jets: &JetBatch, kappa: &[f64], adj: Option<(&mut JetAdjoint, f64)>) -> Result<f64> {
    require_nonempty(jets, "curvature")?;
    if kappa.len() != jets.len() {
        return Err(Error::config("curvatures do not match surface batch"));
    }
    let n = jets.len() as f64;
    let residual = |k: usize| jets.laplacians[k].abs() - 2.0 * kappa[k].abs();
    let value = (0..jets.len()).map(|k| residual(k).abs()).sum::<f64>() / n;
    if let Some((adj, w)) = adj {
        for k in 0..jets.len() {
            adj.laplacians[k] += w * sign(residual(k)) * sign(jets.laplacians[k]) / n;
        }
    }
    Ok(value)
}

/// Mean of `|phi|` over surface samples.
pub fn manifold_loss(jets_surface: &JetBatch) -> Result<f64> {
    manifold_term(jets_surface, None, None)
}

/// Mean of `1 - <grad phi, n>` over surface samples.
pub fn normal_loss(jets_surface: &JetBatch, normals: &Array2<f64>) -> Result<f64> {
    normal_term(jets_surface, normals, None)
}

/// Mean of `| |grad phi| - 1 |`.
pub fn eikonal_loss(jets_all: &JetBatch) -> Result<f64> {
    eikonal_term(&[jets_all], vec![None], 0.0)
}

/// Mean of `exp(-alpha |phi|)` over domain samples.
pub fn nonmanifold_penalty(jets_domain: &JetBatch, alpha: f64) -> Result<f64> {
    nonmanifold_term(jets_domain, alpha, None)
}

/// Mean of `|laplacian phi|` (or its square) over off-surface samples.
pub fn divergence_loss(jets_domain: &JetBatch, penalty: DivPenalty) -> Result<f64> {
    divergence_term(jets_domain, penalty, None)
}

/// Mean of `| |laplacian phi| - 2 |kappa_mean| |` over surface samples.
pub fn curvature_loss(jets_surface: &JetBatch, kappa_mean: &[f64]) -> Result<f64> {
    curvature_term(jets_surface, kappa_mean, None)
}

/// Weighted objective and its breakdown.
pub fn total_loss(
    surface: &JetBatch,
    domain: &JetBatch,
    batch: &LossBatch,
    config: &LossConfig,
    t: f64,
) -> Result<LossBreakdown> {
    Ok(total_loss_with_adjoints(surface, domain, batch, config, t)?.0)
}

fn finite(term: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(term, format!("value {v}")))
    }
}

/// Weighted objective, its breakdown, and the derivative of the total with
/// respect to the surface and domain jets.
pub fn total_loss_with_adjoints(
    surface: &JetBatch,
    domain: &JetBatch,
    batch: &LossBatch,
    config: &LossConfig,
    t: f64,
) -> Result<(LossBreakdown, JetAdjoint, JetAdjoint)> {
    config.validate()?;
    let d = surface.dim().max(domain.dim());
    let mut sa = JetAdjoint::zeros(surface.len(), d);
    let mut da = JetAdjoint::zeros(domain.len(), d);
    let mut out = LossBreakdown {
        tau: tau(t, config),
        ..LossBreakdown::default()
    };
    out.div_weight = out.tau * config.lambda_div;

    out.manifold = finite(
        "manifold",
        manifold_term(surface, batch.surface_targets.as_deref(), Some((&mut sa, config.lambda_manifold)))?,
    )?;

    match &batch.surface_normals {
        Some(normals) if config.use_normals || config.lambda_normal > 0.0 => {
            out.normal = Some(finite("normal", normal_term(surface, normals, Some((&mut sa, config.lambda_normal)))?)?);
        }
        None if config.lambda_normal > 0.0 => {
            return Err(Error::config("normal term weighted but batch has no normals"));
        }
        _ => {}
    }

    out.eikonal = finite(
        "eikonal",
        eikonal_term(&[surface, domain], vec![Some(&mut sa), Some(&mut da)], config.lambda_eikonal)?,
    )?;

    if !domain.is_empty() {
        out.nonmanifold = finite(
            "nonmanifold",
            nonmanifold_term(domain, config.alpha, Some((&mut da, config.lambda_nonmanifold)))?,
        )?;
        out.divergence = finite(
            "divergence",
            divergence_term(domain, config.div_penalty, Some((&mut da, out.div_weight)))?,
        )?;
    } else if config.lambda_nonmanifold > 0.0 || config.lambda_div > 0.0 {
        return Err(Error::input("domain batch is empty"));
    }

    match &batch.surface_curvatures {
        Some(kappa) if config.use_curvature || config.lambda_curv > 0.0 => {
            out.curvature = Some(finite(
                "curvature",
                curvature_term(surface, kappa, Some((&mut sa, config.lambda_curv)))?,
            )?);
        }
        None if config.lambda_curv > 0.0 => {
            return Err(Error::config("curvature term weighted but batch has no curvatures"));
        }
        _ => {}
    }

    out.total = config.lambda_manifold * out.manifold
        + config.lambda_normal * out.normal.unwrap_or(0.0)
        + config.lambda_eikonal * out.eikonal
        + config.lambda_nonmanifold * out.nonmanifold
        + out.div_weight * out.divergence
        + config.lambda_curv * out.curvature.unwrap_or(0.0);
    finite("total", out.total)?;
    Ok((out, sa, da))
}
