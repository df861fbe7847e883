//! Indexed triangle meshes, cameras, visibility and sqrt(3)-subdivision.

mod camera;
mod subdivide;
mod visibility;

pub use camera::{Camera, Projection};
pub use subdivide::{max_projected_area, sqrt3_step, sqrt3_subdivide, sqrt3_subdivide_counted, SubdivisionOptions};
pub use visibility::{compute_visibility, ray_triangle, DepthBuffer, Visibility, DEPTH_TOLERANCE};
pub(crate) use visibility::compute_visibility_raw;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Compressed adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Csr {
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl Csr {
    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut items = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0);
        for l in lists {
            items.extend_from_slice(l);
            offsets.push(items.len());
        }
        Csr { offsets, items }
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[usize] {
        &self.items[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Position of entry `i`'s list inside the flat item array.
    #[inline]
    pub fn range(&self, i: usize) -> core::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self) -> usize {
        self.items.len()
    }
}

/// Connectivity of a manifold triangle mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    faces: Vec<[usize; 3]>,
    vertex_count: usize,
    vertex_faces: Csr,
    vertex_neighbors: Csr,
    /// Across-edge neighbor per face; edge `k` joins corners `k` and `k + 1`.
    face_neighbors: Vec<[Option<usize>; 3]>,
    /// For each `vertex_neighbors` entry `(i -> j)`, the flat index of `(j -> i)`.
    reverse_neighbor: Vec<usize>,
}

impl Topology {
    /// Builds adjacency and rejects invalid or non-manifold input.
    pub fn new(vertex_count: usize, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (f, tri) in faces.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertex_count) {
                return Err(Error::InvalidFace {
                    face: f,
                    reason: "vertex index out of range",
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidFace {
                    face: f,
                    reason: "repeated vertex index",
                });
            }
        }
        // undirected edge -> (face, edge slot, directed as stored)
        let mut edges: BTreeMap<(usize, usize), Vec<(usize, usize, bool)>> = BTreeMap::new();
        for (f, tri) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edges.entry(key).or_default().push((f, k, a < b));
            }
        }
        let mut face_neighbors = vec![[None; 3]; faces.len()];
        for (&(a, b), uses) in &edges {
            match uses.as_slice() {
                [_] => {}
                [(f0, k0, d0), (f1, k1, d1)] => {
                    if d0 == d1 {
                        return Err(Error::InconsistentOrientation(a, b));
                    }
                    face_neighbors[*f0][*k0] = Some(*f1);
                    face_neighbors[*f1][*k1] = Some(*f0);
                }
                more => return Err(Error::NonManifoldEdge(a, b, more.len())),
            }
        }
        let mut vf = vec![Vec::new(); vertex_count];
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                vf[v].push(f);
            }
        }
        let mut vn = vec![Vec::new(); vertex_count];
        for &(a, b) in edges.keys() {
            vn[a].push(b);
            vn[b].push(a);
        }
        for l in &mut vn {
            l.sort_unstable();
        }
        let vertex_neighbors = Csr::from_lists(&vn);
        let mut reverse_neighbor = vec![0; vertex_neighbors.total()];
        for i in 0..vertex_count {
            for (slot, &j) in vertex_neighbors.range(i).zip(vertex_neighbors.get(i)) {
                let pos = vertex_neighbors
                    .get(j)
                    .binary_search(&i)
                    .expect("neighbor lists are symmetric");
                reverse_neighbor[slot] = vertex_neighbors.range(j).start + pos;
            }
        }
        Ok(Topology {
            faces,
            vertex_count,
            vertex_faces: Csr::from_lists(&vf),
            vertex_neighbors,
            face_neighbors,
            reverse_neighbor,
        })
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        self.vertex_faces.get(v)
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.vertex_neighbors.get(v)
    }

    pub fn neighbor_csr(&self) -> &Csr {
        &self.vertex_neighbors
    }

    pub fn reverse_neighbor(&self, slot: usize) -> usize {
        self.reverse_neighbor[slot]
    }

    pub fn face_neighbors(&self, f: usize) -> &[Option<usize>; 3] {
        &self.face_neighbors[f]
    }

    pub fn is_boundary_edge(&self, f: usize, k: usize) -> bool {
        self.face_neighbors[f][k].is_none()
    }

    /// Vertices on at least one boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut b = vec![false; self.vertex_count];
        for (f, tri) in self.faces.iter().enumerate() {
            for k in 0..3 {
                if self.face_neighbors[f][k].is_none() {
                    b[tri[k]] = true;
                    b[tri[(k + 1) % 3]] = true;
                }
            }
        }
        b
    }
}

/// Unit normal of triangle `(a, b, c)` with counter-clockwise winding, or `None` if degenerate.
#[inline]
pub fn triangle_normal(a: Vec3, b: Vec3, c: Vec3) -> Option<Vec3> {
    let n = (b - a).cross(c - a);
    let len = n.norm();
    if len > 1e-300 && len.is_finite() {
        Some(n / len)
    } else {
        None
    }
}

pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * (b - a).cross(c - a).norm()
}

/// Face normals for all faces; degenerate faces yield `None`.
pub fn face_normals(topology: &Topology, positions: &[Vec3]) -> Vec<Option<Vec3>> {
    topology
        .faces()
        .iter()
        .map(|t| triangle_normal(positions[t[0]], positions[t[1]], positions[t[2]]))
        .collect()
}

/// Normalized unweighted mean of the non-degenerate adjacent face normals.
#[inline]
pub fn average_normal<F: Fn(usize) -> Option<Vec3>>(faces: &[usize], normal_of: F) -> Option<Vec3> {
    let mut sum = Vec3::ZERO;
    let mut count = 0usize;
    for &f in faces {
        if let Some(n) = normal_of(f) {
            sum += n;
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }
    (sum / count as f64).normalized()
}

/// Per-vertex normals from precomputed face normals.
pub fn vertex_normals(topology: &Topology, face_normals: &[Option<Vec3>]) -> Vec<Option<Vec3>> {
    (0..topology.vertex_count())
        .map(|v| average_normal(topology.vertex_faces(v), |f| face_normals[f]))
        .collect()
}

/// Triangle mesh with per-vertex albedo and visible-camera sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<Vec3>,
    pub albedo: Vec<[f64; 3]>,
    topology: Topology,
    pub visibility: Visibility,
}

impl TriMesh {
    /// Mesh with unit albedo and empty visibility.
    pub fn new(positions: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let albedo = vec![[1.0; 3]; positions.len()];
        TriMesh::with_albedo(positions, faces, albedo)
    }

    pub fn with_albedo(positions: Vec<Vec3>, faces: Vec<[usize; 3]>, albedo: Vec<[f64; 3]>) -> Result<Self> {
        if albedo.len() != positions.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} albedos for {} vertices",
                albedo.len(),
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!("vertex {i} is not finite")));
        }
        let topology = Topology::new(positions.len(), faces)?;
        let visibility = Visibility::empty(positions.len());
        Ok(TriMesh {
            positions,
            albedo,
            topology,
            visibility,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        self.topology.faces()
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.topology.face_count()
    }

    pub fn face_normal(&self, f: usize) -> Result<Vec3> {
        let t = self.topology.face(f);
        triangle_normal(self.positions[t[0]], self.positions[t[1]], self.positions[t[2]])
            .ok_or(Error::DegenerateFace(f))
    }

    pub fn vertex_normal(&self, v: usize) -> Result<Vec3> {
        average_normal(self.topology.vertex_faces(v), |f| self.face_normal(f).ok())
            .ok_or(Error::IsolatedVertex(v))
    }

    pub fn face_normals(&self) -> Vec<Option<Vec3>> {
        face_normals(&self.topology, &self.positions)
    }

    pub fn vertex_normals(&self) -> Vec<Option<Vec3>> {
        vertex_normals(&self.topology, &self.face_normals())
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        bounding_box(&self.positions)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn centroid(&self) -> Vec3 {
        let mut s = Vec3::ZERO;
        for p in &self.positions {
            s += *p;
        }
        s / self.positions.len().max(1) as f64
    }
}

pub fn bounding_box(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for p in points {
        lo = lo.min(*p);
        hi = hi.max(*p);
    }
    (lo, hi)
}
