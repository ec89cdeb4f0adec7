//! Scalar fields over R^d together with their first and second spatial
//! derivatives. Both trained networks and analytic ground-truth shapes
//! implement [`ImplicitField`], so extraction and metrics never care which
//! one they are looking at.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Which sample set a jet batch was evaluated on.
///
/// Loss terms that are only defined off the surface check this tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRole {
    Surface,
    Domain,
    Unspecified,
}

/// Per-point value, spatial gradient and spatial Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct JetBatch {
    pub values: Vec<f64>,
    /// `B x d`, row `k` is the gradient at point `k`.
    pub gradients: Array2<f64>,
    pub laplacians: Vec<f64>,
    pub role: SampleRole,
}

impl JetBatch {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            values: vec![0.0; len],
            gradients: Array2::zeros((len, dim)),
            laplacians: vec![0.0; len],
            role: SampleRole::Unspecified,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.gradients.ncols()
    }

    pub fn with_role(mut self, role: SampleRole) -> Self {
        self.role = role;
        self
    }

    /// Euclidean norm of the gradient at point `k`.
    pub fn grad_norm(&self, k: usize) -> f64 {
        self.gradients.row(k).iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Rows `range` as a new batch carrying `role`.
    pub fn slice(&self, range: std::ops::Range<usize>, role: SampleRole) -> JetBatch {
        JetBatch {
            values: self.values[range.clone()].to_vec(),
            gradients: self.gradients.slice(ndarray::s![range.clone(), ..]).to_owned(),
            laplacians: self.laplacians[range].to_vec(),
            role,
        }
    }

    /// Stack two batches; the result carries `role`.
    pub fn concat(a: &JetBatch, b: &JetBatch, role: SampleRole) -> JetBatch {
        let mut values = a.values.clone();
        values.extend_from_slice(&b.values);
        let mut laplacians = a.laplacians.clone();
        laplacians.extend_from_slice(&b.laplacians);
        let gradients = ndarray::concatenate(ndarray::Axis(0), &[a.gradients.view(), b.gradients.view()])
            .expect("jet batches with equal dimension");
        JetBatch {
            values,
            gradients,
            laplacians,
            role,
        }
    }
}

/// A scalar field that can be evaluated in batches.
pub trait ImplicitField: Sync {
    fn input_dim(&self) -> usize;

    /// Field values at the rows of `points` (`B x d`).
    fn values(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>>;

    /// Values, gradients and Laplacians at the rows of `points`.
    fn jets(&self, points: ArrayView2<'_, f64>) -> Result<JetBatch>;
}

pub(crate) fn check_points(points: ArrayView2<'_, f64>, dim: usize) -> Result<()> {
    if points.ncols() != dim {
        return Err(Error::config(format!(
            "points have {} columns, field expects {}",
            points.ncols(),
            dim
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite query point"));
    }
    Ok(())
}

type JetFn = dyn Fn(&[f64]) -> (f64, Vec<f64>, f64) + Send + Sync;

/// A closed-form field given pointwise as `p -> (value, gradient, laplacian)`.
pub struct AnalyticField {
    dim: usize,
    eval: Box<JetFn>,
}

impl AnalyticField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&[f64]) -> (f64, Vec<f64>, f64) + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Box::new(eval),
        }
    }

    /// Signed distance to the sphere (circle in 2D) of radius `r` about the origin.
    pub fn sphere(dim: usize, r: f64) -> Self {
        Self::new(dim, move |p| {
            let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return (-r, vec![0.0; p.len()], 0.0);
            }
            let grad = p.iter().map(|v| v / n).collect();
            (n - r, grad, (p.len() as f64 - 1.0) / n)
        })
    }

    /// `scale * x_axis`.
    pub fn plane(dim: usize, axis: usize, scale: f64) -> Self {
        Self::new(dim, move |p| {
            let mut grad = vec![0.0; p.len()];
            grad[axis] = scale;
            (scale * p[axis], grad, 0.0)
        })
    }

    /// The constant field `c`.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, move |p| (c, vec![0.0; p.len()], 0.0))
    }

    pub fn eval_point(&self, p: &[f64]) -> (f64, Vec<f64>, f64) {
        (self.eval)(p)
    }
}

impl ImplicitField for AnalyticField {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn values(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_points(points, self.dim)?;
        Ok(points
            .rows()
            .into_iter()
            .map(|row| (self.eval)(&row.to_vec()).0)
            .collect())
    }

    fn jets(&self, points: ArrayView2<'_, f64>) -> Result<JetBatch> {
        check_points(points, self.dim)?;
        let mut out = JetBatch::zeros(points.nrows(), self.dim);
        for (k, row) in points.rows().into_iter().enumerate() {
            let (v, g, l) = (self.eval)(&row.to_vec());
            out.values[k] = v;
            for (j, gj) in g.into_iter().enumerate() {
                out.gradients[[k, j]] = gj;
            }
            out.laplacians[k] = l;
        }
        Ok(out)
    }
}
