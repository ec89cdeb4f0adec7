//! Reconstruction metrics (Chamfer, Hausdorff, IoU) and field statistics.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ImplicitField, JetBatch};
use crate::kdtree::KdTree;

/// Rows evaluated per chunk when sweeping large point sets.
const CHUNK: usize = 4096;

fn check_sets(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<()> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::input("distance metrics need two non-empty point sets"));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::input("point sets differ in dimension"));
    }
    Ok(())
}

/// Distance from each row of `from` to its nearest row of `to`.
pub fn nearest_distances(from: ArrayView2<'_, f64>, to: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    check_sets(from, to)?;
    let tree = KdTree::new(to);
    let rows: Vec<_> = from.rows().into_iter().collect();
    Ok(rows
        .par_iter()
        .map(|r| {
            let q = r.to_vec();
            tree.nearest(&q).1.sqrt()
        })
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Symmetric distance with its two one-sided parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Directed {
    pub symmetric: f64,
    /// From the first set to the second.
    pub forward: f64,
    pub backward: f64,
}

/// Mean of the two one-sided mean nearest distances.
pub fn chamfer(x1: ArrayView2<'_, f64>, x2: ArrayView2<'_, f64>) -> Result<Directed> {
    let f = mean(&nearest_distances(x1, x2)?);
    let b = mean(&nearest_distances(x2, x1)?);
    Ok(Directed {
        symmetric: 0.5 * (f + b),
        forward: f,
        backward: b,
    })
}

/// Larger of the two one-sided maximum nearest distances.
pub fn hausdorff(x1: ArrayView2<'_, f64>, x2: ArrayView2<'_, f64>) -> Result<Directed> {
    let f = max(&nearest_distances(x1, x2)?);
    let b = max(&nearest_distances(x2, x1)?);
    Ok(Directed {
        symmetric: f.max(b),
        forward: f,
        backward: b,
    })
}

/// Sum of both one-sided mean squared nearest distances.
pub fn squared_chamfer(x1: ArrayView2<'_, f64>, x2: ArrayView2<'_, f64>) -> Result<f64> {
    let sq = |v: Vec<f64>| v.iter().map(|d| d * d).sum::<f64>() / v.len() as f64;
    Ok(sq(nearest_distances(x1, x2)?) + sq(nearest_distances(x2, x1)?))
}

/// Volumetric IoU between a ground-truth occupancy and `{field < 0}` on the samples.
/// Both occupancies empty counts as a perfect match.
pub fn iou<G>(occupancy_gt: G, field: &dyn ImplicitField, samples: ArrayView2<'_, f64>) -> Result<f64>
where
    G: Fn(&[f64]) -> bool + Sync,
{
    if samples.nrows() == 0 {
        return Err(Error::input("IoU needs at least one sample"));
    }
    let chunks: Vec<_> = samples.axis_chunks_iter(Axis(0), CHUNK).collect();
    let counts = chunks
        .par_iter()
        .map(|c| -> Result<(usize, usize)> {
            let values = field.values(*c)?;
            let mut inter = 0;
            let mut union = 0;
            for (row, v) in c.rows().into_iter().zip(values) {
                let gt = occupancy_gt(&row.to_vec());
                let pred = v < 0.0;
                inter += (gt && pred) as usize;
                union += (gt || pred) as usize;
            }
            Ok((inter, union))
        })
        .collect::<Result<Vec<_>>>()?;
    let (inter, union) = counts.into_iter().fold((0, 0), |(a, b), (c, d)| (a + c, b + d));
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Running sums of gradient and Laplacian magnitudes over evaluated jets.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientStats {
    pub count: usize,
    sum_norm: f64,
    sum_norm_sq: f64,
    sum_eikonal: f64,
    sum_abs_lap: f64,
}

impl GradientStats {
    pub fn push(&mut self, jets: &JetBatch) {
        for k in 0..jets.len() {
            let g = jets.grad_norm(k);
            self.count += 1;
            self.sum_norm += g;
            self.sum_norm_sq += g * g;
            self.sum_eikonal += (g - 1.0).abs();
            self.sum_abs_lap += jets.laplacians[k].abs();
        }
    }

    pub fn merge(&mut self, other: &GradientStats) {
        self.count += other.count;
        self.sum_norm += other.sum_norm;
        self.sum_norm_sq += other.sum_norm_sq;
        self.sum_eikonal += other.sum_eikonal;
        self.sum_abs_lap += other.sum_abs_lap;
    }

    /// Evaluate `field` on every row of `points` in chunks; partial sums are
    /// merged in chunk order so the result does not depend on thread count.
    pub fn over_points(field: &dyn ImplicitField, points: &Array2<f64>) -> Result<Self> {
        let chunks: Vec<_> = points.axis_chunks_iter(Axis(0), CHUNK).collect();
        let parts = chunks
            .par_iter()
            .map(|c| {
                let mut s = GradientStats::default();
                s.push(&field.jets(*c)?);
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = GradientStats::default();
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }

    fn n(&self) -> f64 {
        self.count.max(1) as f64
    }

    pub fn mean_grad(&self) -> f64 {
        self.sum_norm / self.n()
    }

    /// Population standard deviation of the gradient norm.
    pub fn std_grad(&self) -> f64 {
        let m = self.mean_grad();
        (self.sum_norm_sq / self.n() - m * m).max(0.0).sqrt()
    }

    /// Mean squared gradient norm, the Dirichlet energy column of the toy table.
    pub fn mean_sq_grad(&self) -> f64 {
        self.sum_norm_sq / self.n()
    }

    pub fn eikonal_residual(&self) -> f64 {
        self.sum_eikonal / self.n()
    }

    pub fn mean_abs_laplacian(&self) -> f64 {
        self.sum_abs_lap / self.n()
    }
}

/// Dirichlet energy estimate from jets at uniform samples. The domain volume
/// factor is left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletEnergy {
    pub mean_sq_grad: f64,
    /// `mean_sq_grad / 2`
    pub half: f64,
}

pub fn dirichlet_energy(jets: &JetBatch) -> DirichletEnergy {
    let mut s = GradientStats::default();
    s.push(jets);
    DirichletEnergy {
        mean_sq_grad: s.mean_sq_grad(),
        half: 0.5 * s.mean_sq_grad(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStatistics {
    pub grad_mean: f64,
    pub grad_std: f64,
    /// Mean of `| |grad f| - 1 |`.
    pub eikonal_residual: f64,
    /// Mean of `|laplacian f|`.
    pub divergence_mean: f64,
}

pub fn field_statistics(jets: &JetBatch) -> FieldStatistics {
    let mut s = GradientStats::default();
    s.push(jets);
    s.into()
}

impl From<GradientStats> for FieldStatistics {
    fn from(s: GradientStats) -> Self {
        Self {
            grad_mean: s.mean_grad(),
            grad_std: s.std_grad(),
            eikonal_residual: s.eikonal_residual(),
            divergence_mean: s.mean_abs_laplacian(),
        }
    }
}

/// Every metric of one evaluation; entries that were not computed are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub chamfer: Option<Directed>,
    pub hausdorff: Option<Directed>,
    pub squared_chamfer: Option<f64>,
    pub iou: Option<f64>,
    pub dirichlet: Option<DirichletEnergy>,
    pub field: Option<FieldStatistics>,
    pub components: Option<usize>,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "chamfer,chamfer_fwd,chamfer_bwd,hausdorff,hausdorff_fwd,hausdorff_bwd,\
squared_chamfer,iou,mean_sq_grad,dirichlet_half,grad_mean,grad_std,eikonal_residual,divergence_mean,components";

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row under [`Self::CSV_HEADER`]; missing values are empty cells.
    pub fn csv_row(&self) -> String {
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let c = self.chamfer;
        let h = self.hausdorff;
        let d = self.dirichlet;
        let f = self.field;
        [
            o(c.map(|x| x.symmetric)),
            o(c.map(|x| x.forward)),
            o(c.map(|x| x.backward)),
            o(h.map(|x| x.symmetric)),
            o(h.map(|x| x.forward)),
            o(h.map(|x| x.backward)),
            o(self.squared_chamfer),
            o(self.iou),
            o(d.map(|x| x.mean_sq_grad)),
            o(d.map(|x| x.half)),
            o(f.map(|x| x.grad_mean)),
            o(f.map(|x| x.grad_std)),
            o(f.map(|x| x.eikonal_residual)),
            o(f.map(|x| x.divergence_mean)),
            self.components.map(|x| x.to_string()).unwrap_or_default(),
        ]
        .join(",")
    }
}

/// `n` points uniform by length on a set of segments.
pub fn sample_segments<R: Rng + ?Sized>(
    vertices: ArrayView2<'_, f64>,
    segments: &[[usize; 2]],
    n: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let weights: Vec<f64> = segments
        .iter()
        .map(|s| {
            let d = &vertices.row(s[0]) - &vertices.row(s[1]);
            d.dot(&d).sqrt()
        })
        .collect();
    let picks = pick_weighted(&weights, n, rng)?;
    let dim = vertices.ncols();
    let mut out = Array2::zeros((n, dim));
    for (k, &i) in picks.iter().enumerate() {
        let t: f64 = rng.gen();
        let (a, b) = (vertices.row(segments[i][0]), vertices.row(segments[i][1]));
        for j in 0..dim {
            out[[k, j]] = a[j] + t * (b[j] - a[j]);
        }
    }
    Ok(out)
}

/// `n` points uniform by area on a triangle mesh.
pub fn sample_triangles<R: Rng + ?Sized>(
    vertices: ArrayView2<'_, f64>,
    faces: &[[usize; 3]],
    n: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if vertices.ncols() != 3 {
        return Err(Error::config("triangle sampling needs 3D vertices"));
    }
    let corner = |f: &[usize; 3], c: usize| {
        let r = vertices.row(f[c]);
        [r[0], r[1], r[2]]
    };
    let weights: Vec<f64> = faces
        .iter()
        .map(|f| {
            let (a, b, c) = (corner(f, 0), corner(f, 1), corner(f, 2));
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let x = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
        })
        .collect();
    let picks = pick_weighted(&weights, n, rng)?;
    let mut out = Array2::zeros((n, 3));
    for (k, &i) in picks.iter().enumerate() {
        let (a, b, c) = (corner(&faces[i], 0), corner(&faces[i], 1), corner(&faces[i], 2));
        let (mut s, mut t): (f64, f64) = (rng.gen(), rng.gen());
        if s + t > 1.0 {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        for j in 0..3 {
            out[[k, j]] = a[j] + s * (b[j] - a[j]) + t * (c[j] - a[j]);
        }
    }
    Ok(out)
}

fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::input("cannot sample from an empty or degenerate level set"));
    }
    Ok((0..n)
        .map(|_| {
            let u = rng.gen_range(0.0..acc);
            cumulative.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect())
}
