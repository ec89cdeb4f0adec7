//! Point clouds, sampling, and analytic 2D shapes with exact signed distances.

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{check_points, ImplicitField, JetBatch};
use crate::losses::LossBatch;

/// Translation and scale that map original coordinates to the normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub centroid: Vec<f64>,
    pub scale: f64,
}

impl Normalization {
    /// Map a normalized-frame point back to original coordinates.
    pub fn denormalize(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.centroid).map(|(v, c)| v * self.scale + c).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    /// `N x d`
    pub points: Array2<f64>,
    pub normals: Option<Array2<f64>>,
    pub curvatures: Option<Vec<f64>>,
    pub normalization: Option<Normalization>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>) -> Self {
        Self {
            points,
            normals: None,
            curvatures: None,
            normalization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// Center the cloud at its centroid and scale it so the farthest point has norm one.
pub fn normalize_cloud(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::input("point cloud is empty"));
    }
    if cloud.points.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("point cloud has non-finite coordinates"));
    }
    let n = cloud.len() as f64;
    let centroid: Vec<f64> = cloud.points.columns().into_iter().map(|c| c.sum() / n).collect();
    let mut points = cloud.points.clone();
    for mut row in points.rows_mut() {
        for (v, c) in row.iter_mut().zip(&centroid) {
            *v -= c;
        }
    }
    let scale = points
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::input("degenerate point cloud: all points coincide"));
    }
    points.mapv_inplace(|v| v / scale);
    Ok(PointCloud {
        points,
        normals: cloud.normals.clone(),
        curvatures: cloud.curvatures.as_ref().map(|k| k.iter().map(|v| v * scale).collect()),
        normalization: Some(Normalization { centroid, scale }),
    })
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct BBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.iter().zip(&max).any(|(a, b)| !(b > a)) {
            return Err(Error::config("bounding box needs max > min on every axis"));
        }
        Ok(Self { min, max })
    }

    /// `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Self {
        Self {
            min: vec![-half; dim],
            max: vec![half; dim],
        }
    }

    /// Box around the cloud's extent, grown by `factor` about its center.
    pub fn around(points: ArrayView2<'_, f64>, factor: f64) -> Result<Self> {
        let d = points.ncols();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in points.rows() {
            for j in 0..d {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        let extent = (0..d).map(|j| hi[j] - lo[j]).fold(0.0, f64::max);
        let mut min = Vec::with_capacity(d);
        let mut max = Vec::with_capacity(d);
        for j in 0..d {
            let c = 0.5 * (lo[j] + hi[j]);
            // Flat axes get the box's largest extent so the box stays non-degenerate.
            let half = 0.5 * factor * if hi[j] > lo[j] { hi[j] - lo[j] } else { extent };
            min.push(c - half);
            max.push(c + half);
        }
        Self::new(min, max)
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.extent(j)).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().enumerate().all(|(j, v)| *v >= self.min[j] && *v <= self.max[j])
    }

    /// `n` points drawn uniformly from the box.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_fn((n, self.dim()), |(_, j)| rng.gen_range(self.min[j]..self.max[j]))
    }
}

/// Draw one training batch: `b_s` surface rows (with their normals and
/// curvatures) and `b_u` uniform domain points. Surface rows are drawn
/// without replacement when the cloud is large enough.
pub fn sample_batches<R: Rng + ?Sized>(
    cloud: &PointCloud,
    bbox: &BBox,
    b_s: usize,
    b_u: usize,
    rng: &mut R,
) -> Result<LossBatch> {
    if cloud.is_empty() || b_s == 0 || b_u == 0 {
        return Err(Error::config("batch sizes and cloud size must be positive"));
    }
    if bbox.dim() != cloud.dim() {
        return Err(Error::config("bounding box and cloud differ in dimension"));
    }
    let rows: Vec<usize> = if b_s <= cloud.len() {
        index::sample(rng, cloud.len(), b_s).into_vec()
    } else {
        (0..b_s).map(|_| rng.gen_range(0..cloud.len())).collect()
    };
    let surface_points = cloud.points.select(ndarray::Axis(0), &rows);
    let surface_normals = cloud.normals.as_ref().map(|n| n.select(ndarray::Axis(0), &rows));
    let surface_curvatures = cloud.curvatures.as_ref().map(|k| rows.iter().map(|&r| k[r]).collect());
    let domain_points = bbox.sample(b_u, rng);
    Ok(LossBatch {
        surface_points,
        surface_normals,
        surface_curvatures,
        surface_targets: None,
        domain_points,
    })
}

pub fn circle_sdf(p: [f64; 2], r: f64) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt() - r
}

/// Closed, counter-clockwise simple polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<[f64; 2]>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::input("polygon needs at least three vertices"));
        }
        let poly = Self { vertices };
        if !(poly.signed_area() > 0.0) {
            return Err(Error::input("polygon must be counter-clockwise with positive area"));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
            .sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| dist(a, b)).sum()
    }

    /// Scale about the origin so the farthest vertex has norm `radius`.
    pub fn scaled_to_radius(&self, radius: f64) -> Self {
        let m = self
            .vertices
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
            .fold(0.0, f64::max);
        let f = radius / m;
        Self {
            vertices: self.vertices.iter().map(|v| [v[0] * f, v[1] * f]).collect(),
        }
    }

    /// Non-zero winding number test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let mut winding = 0i32;
        for (a, b) in self.edges() {
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
            if a[1] <= p[1] {
                if b[1] > p[1] && cross > 0.0 {
                    winding += 1;
                }
            } else if b[1] <= p[1] && cross < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }

    /// Signed distance (negative inside), its gradient and Laplacian.
    ///
    /// Where the nearest feature is an edge interior the field is affine
    /// (zero Laplacian); where it is a vertex the field is a radial distance
    /// with Laplacian `+-1/d`.
    pub fn sdf_jet(&self, p: [f64; 2]) -> (f64, [f64; 2], f64) {
        let mut best = f64::INFINITY;
        let mut closest = [0.0; 2];
        let mut at_vertex = false;
        let mut edge_normal = [0.0; 2];
        for (a, b) in self.edges() {
            let e = [b[0] - a[0], b[1] - a[1]];
            let len2 = e[0] * e[0] + e[1] * e[1];
            let t = (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0);
            let q = [a[0] + t * e[0], a[1] + t * e[1]];
            let d = dist(p, q);
            if d < best {
                best = d;
                closest = q;
                at_vertex = t == 0.0 || t == 1.0;
                let l = len2.sqrt();
                edge_normal = [e[1] / l, -e[0] / l];
            }
        }
        let s = if self.contains(p) { -1.0 } else { 1.0 };
        if best == 0.0 {
            return (0.0, edge_normal, 0.0);
        }
        let grad = [s * (p[0] - closest[0]) / best, s * (p[1] - closest[1]) / best];
        let lap = if at_vertex { s / best } else { 0.0 };
        (s * best, grad, lap)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn polygon_sdf(polygon: &Polygon2D, p: [f64; 2]) -> f64 {
    polygon.sdf_jet(p).0
}

/// Koch snowflake at recursion `level` (0 is an equilateral triangle),
/// scaled so its farthest vertex has norm one.
pub fn koch_snowflake(level: usize) -> Result<Polygon2D> {
    if level > 6 {
        return Err(Error::config(format!("snowflake level must be in 0..=6, got {level}")));
    }
    let mut verts: Vec<[f64; 2]> = (0..3)
        .map(|i| {
            let a = std::f64::consts::FRAC_PI_2 + i as f64 * 2.0 * std::f64::consts::PI / 3.0;
            [a.cos(), a.sin()]
        })
        .collect();
    let (s60, c60) = (std::f64::consts::PI / 3.0).sin_cos();
    for _ in 0..level {
        let n = verts.len();
        let mut next = Vec::with_capacity(4 * n);
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let e = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + e[0], a[1] + e[1]];
            let p3 = [a[0] + 2.0 * e[0], a[1] + 2.0 * e[1]];
            // Rotate by -60 degrees: outward for a counter-clockwise boundary.
            let bump = [c60 * e[0] + s60 * e[1], -s60 * e[0] + c60 * e[1]];
            let p2 = [p1[0] + bump[0], p1[1] + bump[1]];
            next.extend_from_slice(&[a, p1, p2, p3]);
        }
        verts = next;
    }
    Ok(Polygon2D::new(verts)?.scaled_to_radius(1.0))
}

/// L-shaped hexagon, scaled so its farthest vertex has norm one.
pub fn l_shape() -> Polygon2D {
    let verts = vec![
        [-0.5, -0.5],
        [0.5, -0.5],
        [0.5, 0.0],
        [0.0, 0.0],
        [0.0, 0.5],
        [-0.5, 0.5],
    ];
    Polygon2D::new(verts).expect("valid polygon").scaled_to_radius(1.0)
}

/// Analytic 2D ground-truth shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape2D {
    Circle { radius: f64 },
    Polygon(Polygon2D),
}

impl Shape2D {
    pub fn sdf(&self, p: [f64; 2]) -> f64 {
        match self {
            Shape2D::Circle { radius } => circle_sdf(p, *radius),
            Shape2D::Polygon(poly) => polygon_sdf(poly, p),
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.sdf(p) < 0.0
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            Shape2D::Circle { radius } => 2.0 * std::f64::consts::PI * radius,
            Shape2D::Polygon(poly) => poly.perimeter(),
        }
    }
}

impl ImplicitField for Shape2D {
    fn input_dim(&self) -> usize {
        2
    }

    fn values(&self, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_points(points, 2)?;
        Ok(points.rows().into_iter().map(|r| self.sdf([r[0], r[1]])).collect())
    }

    fn jets(&self, points: ArrayView2<'_, f64>) -> Result<JetBatch> {
        check_points(points, 2)?;
        let mut out = JetBatch::zeros(points.nrows(), 2);
        for (k, r) in points.rows().into_iter().enumerate() {
            let p = [r[0], r[1]];
            let (v, g, l) = match self {
                Shape2D::Circle { radius } => {
                    let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
                    if n == 0.0 {
                        (-radius, [0.0, 0.0], 0.0)
                    } else {
                        (n - radius, [p[0] / n, p[1] / n], 1.0 / n)
                    }
                }
                Shape2D::Polygon(poly) => poly.sdf_jet(p),
            };
            out.values[k] = v;
            out.gradients[[k, 0]] = g[0];
            out.gradients[[k, 1]] = g[1];
            out.laplacians[k] = l;
        }
        Ok(out)
    }
}

/// `n` boundary samples, uniform by arc length, with outward unit normals and
/// curvature (`1/r` on circles, zero on polygon edges).
pub fn sample_shape_boundary<R: Rng + ?Sized>(shape: &Shape2D, n: usize, rng: &mut R) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::config("need at least one boundary sample"));
    }
    let mut points = Array2::zeros((n, 2));
    let mut normals = Array2::zeros((n, 2));
    let mut curvatures = vec![0.0; n];
    match shape {
        Shape2D::Circle { radius } => {
            for k in 0..n {
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let (s, c) = a.sin_cos();
                points[[k, 0]] = radius * c;
                points[[k, 1]] = radius * s;
                normals[[k, 0]] = c;
                normals[[k, 1]] = s;
                curvatures[k] = 1.0 / radius;
            }
        }
        Shape2D::Polygon(poly) => {
            let mut cumulative = Vec::with_capacity(poly.edge_count());
            let mut acc = 0.0;
            for (a, b) in poly.edges() {
                acc += dist(a, b);
                cumulative.push(acc);
            }
            for k in 0..n {
                let u = rng.gen_range(0.0..acc);
                let i = cumulative.partition_point(|&c| c <= u).min(poly.edge_count() - 1);
                let start = if i == 0 { 0.0 } else { cumulative[i - 1] };
                let (a, b) = poly.edges().nth(i).expect("edge index in range");
                let len = dist(a, b);
                let t = ((u - start) / len).clamp(0.0, 1.0);
                points[[k, 0]] = a[0] + t * (b[0] - a[0]);
                points[[k, 1]] = a[1] + t * (b[1] - a[1]);
                normals[[k, 0]] = (b[1] - a[1]) / len;
                normals[[k, 1]] = -(b[0] - a[0]) / len;
            }
        }
    }
    Ok(PointCloud {
        points,
        normals: Some(normals),
        curvatures: Some(curvatures),
        normalization: None,
    })
}

/// `n` points uniform on the sphere of radius `r` in R^3, with normals and
/// mean curvature `1/r`.
pub fn sample_sphere<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> PointCloud {
    let mut points = Array2::zeros((n, 3));
    let mut normals = Array2::zeros((n, 3));
    for k in 0..n {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        for j in 0..3 {
            normals[[k, j]] = v[j] / len;
            points[[k, j]] = r * v[j] / len;
        }
    }
    PointCloud {
        points,
        normals: Some(normals),
        curvatures: Some(vec![1.0 / r; n]),
        normalization: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> Polygon2D {
        Polygon2D::new(vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]).unwrap()
    }

    #[test]
    fn normalize_two_points() {
        let c = PointCloud::new(array![[0.0, 0.0], [0.0, 2.0]]);
        let n = normalize_cloud(&c).unwrap();
        assert_eq!(n.points, array![[0.0, -1.0], [0.0, 1.0]]);
        let rec = n.normalization.as_ref().unwrap();
        assert_eq!(rec.centroid, vec![0.0, 1.0]);
        assert_eq!(rec.scale, 1.0);
        assert_eq!(rec.denormalize(&[0.0, 1.0]), vec![0.0, 2.0]);
    }

    #[test]
    fn normalize_keeps_already_normalized_cloud() {
        let c = PointCloud::new(array![[1.0, 0.0], [-1.0, 0.0], [0.0, 0.5], [0.0, -0.5]]);
        assert_eq!(normalize_cloud(&c).unwrap().points, c.points);
    }

    #[test]
    fn normalize_rejects_degenerate_cloud() {
        let c = PointCloud::new(array![[1.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(normalize_cloud(&c), Err(Error::Input(_))));
    }

    #[test]
    fn normalize_leaves_normals_alone() {
        let mut c = PointCloud::new(array![[3.0, 0.0], [5.0, 0.0]]);
        c.normals = Some(array![[0.6, 0.8], [1.0, 0.0]]);
        let n = normalize_cloud(&c).unwrap();
        assert_eq!(n.normals, c.normals);
    }

    #[test]
    fn square_sdf_reference_values() {
        let sq = square();
        assert_eq!(polygon_sdf(&sq, [0.0, 0.0]), -0.5);
        assert_eq!(polygon_sdf(&sq, [1.0, 0.0]), 0.5);
        assert!((polygon_sdf(&sq, [1.0, 1.0]) - 0.5f64.hypot(0.5)).abs() < 1e-15);
    }

    #[test]
    fn clockwise_polygon_rejected() {
        let cw = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(Polygon2D::new(cw).is_err());
    }

    #[test]
    fn snowflake_edge_counts_and_perimeter_growth() {
        assert_eq!(koch_snowflake(0).unwrap().edge_count(), 3);
        for k in 0..6 {
            let a = koch_snowflake(k).unwrap();
            let b = koch_snowflake(k + 1).unwrap();
            assert_eq!(b.edge_count(), 3 * 4usize.pow(k as u32 + 1));
            // Both are scaled to unit max vertex norm, which the generator preserves.
            assert!((b.perimeter() / a.perimeter() - 4.0 / 3.0).abs() < 1e-12);
        }
        assert!(koch_snowflake(7).is_err());
    }

    #[test]
    fn l_shape_is_valid() {
        let l = l_shape();
        assert_eq!(l.edge_count(), 6);
        assert!(l.signed_area() > 0.0);
        assert!(l.contains([-0.2, -0.2]));
        assert!(!l.contains([0.3, 0.3]));
    }

    #[test]
    fn circle_samples_lie_on_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_shape_boundary(&Shape2D::Circle { radius: 0.5 }, 500, &mut rng).unwrap();
        let normals = c.normals.unwrap();
        for (p, n) in c.points.rows().into_iter().zip(normals.rows()) {
            let r = p.dot(&p).sqrt();
            assert!((r - 0.5).abs() < 1e-12);
            assert!((n[0] - p[0] / r).abs() < 1e-12 && (n[1] - p[1] / r).abs() < 1e-12);
        }
    }

    #[test]
    fn polygon_samples_have_zero_sdf_and_outward_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let flake = koch_snowflake(3).unwrap();
        let c = sample_shape_boundary(&Shape2D::Polygon(flake.clone()), 2000, &mut rng).unwrap();
        let normals = c.normals.unwrap();
        for (p, n) in c.points.rows().into_iter().zip(normals.rows()) {
            assert!(polygon_sdf(&flake, [p[0], p[1]]).abs() < 1e-9);
            let out = [p[0] + 1e-4 * n[0], p[1] + 1e-4 * n[1]];
            assert!(polygon_sdf(&flake, out) > 0.0);
        }
    }

    #[test]
    fn batches_are_reproducible_and_inside_the_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = sample_shape_boundary(&Shape2D::Circle { radius: 0.5 }, 100, &mut rng).unwrap();
        let bbox = BBox::cube(2, 1.1);
        let a = sample_batches(&cloud, &bbox, 64, 256, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_batches(&cloud, &bbox, 64, 256, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.domain_points.rows().into_iter().all(|r| bbox.contains(&r.to_vec())));
        // Oversized surface batches fall back to sampling with replacement.
        let big = sample_batches(&cloud, &bbox, 500, 1, &mut rng).unwrap();
        assert_eq!(big.surface_points.nrows(), 500);
        assert_eq!(big.surface_normals.unwrap().nrows(), 500);
    }

    #[test]
    fn domain_mean_is_near_box_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bbox = BBox::new(vec![-1.0, 0.0], vec![3.0, 1.0]).unwrap();
        let n = 20_000;
        let pts = bbox.sample(n, &mut rng);
        let center = bbox.center();
        for j in 0..2 {
            let mean = pts.column(j).sum() / n as f64;
            // std of U(a, b) is (b - a)/sqrt(12)
            let se = bbox.extent(j) / 12f64.sqrt() / (n as f64).sqrt();
            assert!((mean - center[j]).abs() < 3.0 * se);
        }
    }

    #[test]
    fn bbox_around_is_grown_extent() {
        let pts = array![[-1.0, -0.5], [1.0, 0.5]];
        let b = BBox::around(pts.view(), 1.1).unwrap();
        assert!((b.extent(0) - 2.2).abs() < 1e-12);
        assert!((b.extent(1) - 1.1).abs() < 1e-12);
    }
}
