//! Regular-grid evaluation and zero level-set extraction (marching squares and cubes).

use std::collections::HashMap;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ImplicitField;
use crate::geometry::BBox;
use crate::mc_tables::{CORNERS, EDGES, TRI_TABLE};

/// Scalar samples on a regular lattice, first axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    /// Node count per axis.
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let g = Self {
            origin,
            spacing,
            dims,
            values,
        };
        g.validate()?;
        Ok(g)
    }

    /// Sample an analytic function at every node.
    pub fn from_fn(origin: Vec<f64>, spacing: Vec<f64>, dims: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n: usize = dims.iter().product();
        let mut g = Self {
            origin,
            spacing,
            dims,
            values: Vec::with_capacity(n),
        };
        for idx in 0..n {
            let p = g.node_position(idx);
            g.values.push(f(&p));
        }
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims.len();
        if !(2..=3).contains(&d) || self.origin.len() != d || self.spacing.len() != d {
            return Err(Error::config("grid must be 2D or 3D with matching origin and spacing"));
        }
        if self.dims.iter().any(|&n| n < 2) {
            return Err(Error::config("grid needs at least two nodes per axis"));
        }
        if self.spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::config("grid spacing must be positive"));
        }
        if self.values.len() != self.dims.iter().product::<usize>() {
            return Err(Error::config("grid value count does not match dims"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("grid field", "non-finite sample"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn node_index(&self, ijk: &[usize]) -> usize {
        let mut idx = 0;
        for a in (0..self.dim()).rev() {
            idx = idx * self.dims[a] + ijk[a];
        }
        idx
    }

    pub fn node_coords(&self, mut idx: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&n| {
                let c = idx % n;
                idx /= n;
                c
            })
            .collect()
    }

    pub fn node_position(&self, idx: usize) -> Vec<f64> {
        self.node_coords(idx)
            .iter()
            .enumerate()
            .map(|(a, &c)| self.origin[a] + c as f64 * self.spacing[a])
            .collect()
    }
}

/// Evaluate `field` on a lattice over `bbox`. The shortest box axis is split
/// into `resolution` cells; the others get the cell count that keeps cells
/// closest to square.
pub fn eval_grid(field: &dyn ImplicitField, bbox: &BBox, resolution: usize) -> Result<GridField> {
    if resolution < 2 {
        return Err(Error::config("grid resolution must be at least 2"));
    }
    let d = bbox.dim();
    if d != field.input_dim() {
        return Err(Error::config("bounding box and field differ in dimension"));
    }
    let shortest = (0..d).map(|a| bbox.extent(a)).fold(f64::INFINITY, f64::min);
    let h = shortest / resolution as f64;
    let cells: Vec<usize> = (0..d)
        .map(|a| ((bbox.extent(a) / h).round() as usize).max(resolution))
        .collect();
    let spacing: Vec<f64> = (0..d).map(|a| bbox.extent(a) / cells[a] as f64).collect();
    let dims: Vec<usize> = cells.iter().map(|c| c + 1).collect();
    let mut grid = GridField {
        origin: bbox.min.clone(),
        spacing,
        dims,
        values: Vec::new(),
    };
    // One slab per index of the slowest axis.
    let slab = grid.dims[..d - 1].iter().product::<usize>();
    let slabs = grid.dims[d - 1];
    let parts = (0..slabs)
        .into_par_iter()
        .map(|s| {
            let pts = Array2::from_shape_fn((slab, d), |(k, a)| grid.node_position(s * slab + k)[a]);
            field.values(pts.view())
        })
        .collect::<Result<Vec<_>>>()?;
    grid.values = parts.concat();
    grid.validate()?;
    Ok(grid)
}

/// Line segments approximating the zero level set of a 2D field.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour2D {
    /// `N x 2`
    pub vertices: Array2<f64>,
    pub segments: Vec<[usize; 2]>,
}

/// Triangle mesh approximating the zero level set of a 3D field.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh3D {
    /// `N x 3`
    pub vertices: Array2<f64>,
    pub faces: Vec<[usize; 3]>,
}

/// Deduplicates crossing points by the lattice edge that carries them.
struct EdgeVertices<'a> {
    grid: &'a GridField,
    ids: HashMap<usize, usize>,
    points: Vec<f64>,
}

impl<'a> EdgeVertices<'a> {
    fn new(grid: &'a GridField) -> Self {
        Self {
            grid,
            ids: HashMap::new(),
            points: Vec::new(),
        }
    }

    /// Vertex on the edge from node `a` along `axis` to its neighbour `b`.
    fn get(&mut self, a: usize, b: usize, axis: usize) -> usize {
        let d = self.grid.dim();
        let key = a * d + axis;
        if let Some(&v) = self.ids.get(&key) {
            return v;
        }
        let (va, vb) = (self.grid.values[a], self.grid.values[b]);
        let t = va / (va - vb);
        let pa = self.grid.node_position(a);
        let pb = self.grid.node_position(b);
        for j in 0..d {
            self.points.push(pa[j] + t * (pb[j] - pa[j]));
        }
        let id = self.points.len() / d - 1;
        self.ids.insert(key, id);
        id
    }

    fn into_vertices(self) -> Array2<f64> {
        let d = self.grid.dim();
        Array2::from_shape_vec((self.points.len() / d, d), self.points).expect("whole rows")
    }
}

/// Marching squares. Corners with negative value are inside. The two
/// ambiguous cases are resolved with the asymptotic decider: the sign of the
/// bilinear interpolant at its saddle point says whether the diagonal inside
/// corners are joined.
pub fn marching_squares(field: &GridField) -> Result<Contour2D> {
    field.validate()?;
    if field.dim() != 2 {
        return Err(Error::config("marching squares needs a 2D grid"));
    }
    let (nx, ny) = (field.dims[0], field.dims[1]);
    let mut verts = EdgeVertices::new(field);
    let mut segments = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let n = [j * nx + i, j * nx + i + 1, (j + 1) * nx + i + 1, (j + 1) * nx + i];
            let v = n.map(|k| field.values[k]);
            let case = (0..4).fold(0usize, |c, k| c | (((v[k] < 0.0) as usize) << k));
            if case == 0 || case == 15 {
                continue;
            }
            // Cell edges: bottom, right, top, left, each stored at its lower node.
            let mut edge = |e: usize| match e {
                0 => verts.get(n[0], n[1], 0),
                1 => verts.get(n[1], n[2], 1),
                2 => verts.get(n[3], n[2], 0),
                _ => verts.get(n[0], n[3], 1),
            };
            let pairs: &[[usize; 2]] = match case {
                1 | 14 => &[[3, 0]],
                2 | 13 => &[[0, 1]],
                3 | 12 => &[[3, 1]],
                4 | 11 => &[[1, 2]],
                6 | 9 => &[[0, 2]],
                7 | 8 => &[[2, 3]],
                5 | 10 => {
                    let saddle = (v[0] * v[2] - v[1] * v[3]) / (v[0] + v[2] - v[1] - v[3]);
                    // Corners 0 and 2 joined through the centre iff they share the saddle's side.
                    let join_02 = (saddle < 0.0) == (case == 5);
                    if join_02 {
                        &[[0, 1], [2, 3]]
                    } else {
                        &[[3, 0], [1, 2]]
                    }
                }
                _ => unreachable!("cases 0 and 15 skipped"),
            };
            for p in pairs {
                segments.push([edge(p[0]), edge(p[1])]);
            }
        }
    }
    Ok(Contour2D {
        vertices: verts.into_vertices(),
        segments,
    })
}

/// Marching cubes with the classic 256-case table. Faces are wound so their
/// normals point towards positive values.
pub fn marching_cubes(field: &GridField) -> Result<Mesh3D> {
    field.validate()?;
    if field.dim() != 3 {
        return Err(Error::config("marching cubes needs a 3D grid"));
    }
    let (nx, ny, nz) = (field.dims[0], field.dims[1], field.dims[2]);
    let mut verts = EdgeVertices::new(field);
    let mut faces = Vec::new();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let node = |c: usize| field.node_index(&[i + CORNERS[c][0], j + CORNERS[c][1], k + CORNERS[c][2]]);
                let case = (0..8).fold(0usize, |acc, c| acc | (((field.values[node(c)] < 0.0) as usize) << c));
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut edge_vertex = |e: usize| {
                    let [a, b] = EDGES[e];
                    let axis = (0..3).find(|&x| CORNERS[a][x] != CORNERS[b][x]).expect("edge spans an axis");
                    let (lo, hi) = if CORNERS[a][axis] < CORNERS[b][axis] { (a, b) } else { (b, a) };
                    verts.get(node(lo), node(hi), axis)
                };
                for tri in row.chunks_exact(3).take_while(|t| t[0] != 255) {
                    let a = edge_vertex(tri[0] as usize);
                    let b = edge_vertex(tri[1] as usize);
                    let c = edge_vertex(tri[2] as usize);
                    faces.push([a, c, b]);
                }
            }
        }
    }
    Ok(Mesh3D {
        vertices: verts.into_vertices(),
        faces,
    })
}

/// Union-find over vertex ids.
struct Components {
    parent: Vec<usize>,
}

impl Components {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    fn count(&mut self, used: impl Iterator<Item = usize>) -> usize {
        let mut roots: Vec<usize> = used.map(|v| self.find(v)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

/// Connected components of the segment graph.
pub fn contour_components(contour: &Contour2D) -> usize {
    let mut uf = Components::new(contour.vertices.nrows());
    for s in &contour.segments {
        uf.union(s[0], s[1]);
    }
    uf.count(contour.segments.iter().flatten().copied())
}

/// Connected components of the triangle adjacency graph (shared vertices).
pub fn mesh_components(mesh: &Mesh3D) -> usize {
    let mut uf = Components::new(mesh.vertices.nrows());
    for f in &mesh.faces {
        uf.union(f[0], f[1]);
        uf.union(f[1], f[2]);
    }
    uf.count(mesh.faces.iter().flatten().copied())
}

/// Undirected edges used by exactly one face; empty for a closed surface.
pub fn boundary_edges(mesh: &Mesh3D) -> Vec<[usize; 2]> {
    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    for f in &mesh.faces {
        for e in [[f[0], f[1]], [f[1], f[2]], [f[2], f[0]]] {
            *count.entry([e[0].min(e[1]), e[0].max(e[1])]).or_default() += 1;
        }
    }
    let mut out: Vec<[usize; 2]> = count.into_iter().filter(|(_, c)| *c == 1).map(|(e, _)| e).collect();
    out.sort_unstable();
    out
}

/// Largest number of faces sharing one undirected edge.
pub fn max_edge_valence(mesh: &Mesh3D) -> usize {
    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    for f in &mesh.faces {
        for e in [[f[0], f[1]], [f[1], f[2]], [f[2], f[0]]] {
            *count.entry([e[0].min(e[1]), e[0].max(e[1])]).or_default() += 1;
        }
    }
    count.values().copied().max().unwrap_or(0)
}

/// Vertices of `contour` that lie on segments, as a point set.
pub fn contour_points(contour: &Contour2D) -> Array2<f64> {
    let mut used: Vec<usize> = contour.segments.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    contour.vertices.select(Axis(0), &used)
}
