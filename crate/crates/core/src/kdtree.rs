//! Exact nearest-neighbour queries over 2D or 3D point sets.

use ndarray::ArrayView2;

const LEAF: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree. Query results are exact: the returned squared distance is
/// computed with the same arithmetic as a brute-force scan, so both agree bit for bit.
pub struct KdTree {
    dim: usize,
    points: Vec<[f64; 3]>,
    /// Original row index of each entry in `points`.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Squared Euclidean distance over the first `dim` coordinates, summed in axis order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..dim {
        let d = a[j] - b[j];
        s += d * d;
    }
    s
}

impl KdTree {
    /// Build over the rows of an `N x d` array (`d` in 1..=3, `N >= 1`).
    pub fn new(points: ArrayView2<'_, f64>) -> Self {
        let dim = points.ncols();
        assert!((1..=3).contains(&dim), "kd-tree supports 1 to 3 dimensions");
        assert!(points.nrows() > 0, "kd-tree needs at least one point");
        let pts: Vec<[f64; 3]> = points
            .rows()
            .into_iter()
            .map(|r| {
                let mut p = [0.0; 3];
                for j in 0..dim {
                    p[j] = r[j];
                }
                p
            })
            .collect();
        let mut tree = KdTree {
            dim,
            order: (0..pts.len()).collect(),
            points: pts,
            nodes: Vec::new(),
        };
        let n = tree.points.len();
        tree.build(0, n);
        tree.points = tree.order.iter().map(|&i| tree.points[i]).collect();
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = (0..self.dim)
            .max_by(|&a, &b| self.spread(start, end, a).total_cmp(&self.spread(start, end, b)))
            .expect("dim >= 1");
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| pts[i][axis].total_cmp(&pts[j][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    fn spread(&self, start: usize, end: usize, axis: usize) -> f64 {
        let (lo, hi) = self.order[start..end]
            .iter()
            .map(|&i| self.points[i][axis])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// `(row index, squared distance)` of the nearest stored point.
    pub fn nearest(&self, query: &[f64]) -> (usize, f64) {
        assert!(query.len() >= self.dim, "query dimension");
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        (self.order[best.0], best.1)
    }

    fn search(&self, node: usize, q: &[f64], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let d = squared_distance(q, &self.points[i], self.dim);
                    if d < best.1 {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // Rounding is monotone, so this bound never exceeds the true
                // squared distance to any point across the plane.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}
