use alloc::vec;
use alloc::vec::Vec;

use super::{Camera, Topology, TriMesh};
use crate::geom::Vec3;
use crate::par;

/// Relative depth tolerance of the occlusion test.
pub const DEPTH_TOLERANCE: f64 = 1e-3;

const NO_FACE: u32 = u32::MAX;

/// Per-vertex sets of cameras that see the vertex, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Visibility {
    sets: Vec<Vec<usize>>,
}

impl Visibility {
    pub fn empty(vertex_count: usize) -> Self {
        Visibility {
            sets: vec![Vec::new(); vertex_count],
        }
    }

    pub fn from_sets(mut sets: Vec<Vec<usize>>) -> Self {
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        Visibility { sets }
    }

    pub fn cameras(&self, v: usize) -> &[usize] {
        &self.sets[v]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Number of vertices seen by no camera.
    pub fn unseen_count(&self) -> usize {
        self.sets.iter().filter(|s| s.is_empty()).count()
    }

    /// Vertex lists per camera.
    pub fn by_camera(&self, camera_count: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); camera_count];
        for (v, s) in self.sets.iter().enumerate() {
            for &c in s {
                if c < camera_count {
                    out[c].push(v);
                }
            }
        }
        out
    }
}

/// Nearest-surface depth and face id per pixel center.
#[derive(Debug, Clone)]
pub struct DepthBuffer {
    pub width: usize,
    pub height: usize,
    depth: Vec<f64>,
    face: Vec<u32>,
}

impl DepthBuffer {
    pub fn render(camera: &Camera, topology: &Topology, positions: &[Vec3]) -> Self {
        let (w, h) = (camera.width, camera.height);
        let mut buf = DepthBuffer {
            width: w,
            height: h,
            depth: vec![f64::INFINITY; w * h],
            face: vec![NO_FACE; w * h],
        };
        let projected: Vec<_> = positions.iter().map(|p| camera.project(*p)).collect();
        for (f, tri) in topology.faces().iter().enumerate() {
            let (Some(a), Some(b), Some(c)) = (projected[tri[0]], projected[tri[1]], projected[tri[2]]) else {
                continue;
            };
            let area = edge(a.x, a.y, b.x, b.y, c.x, c.y);
            if area == 0.0 || !area.is_finite() {
                continue;
            }
            let min_x = libm::ceil(a.x.min(b.x).min(c.x)).max(0.0);
            let max_x = libm::floor(a.x.max(b.x).max(c.x)).min((w - 1) as f64);
            let min_y = libm::ceil(a.y.min(b.y).min(c.y)).max(0.0);
            let max_y = libm::floor(a.y.max(b.y).max(c.y)).min((h - 1) as f64);
            if min_x > max_x || min_y > max_y {
                continue;
            }
            for row in min_y as usize..=max_y as usize {
                for col in min_x as usize..=max_x as usize {
                    let (px, py) = (col as f64, row as f64);
                    let w0 = edge(b.x, b.y, c.x, c.y, px, py) / area;
                    let w1 = edge(c.x, c.y, a.x, a.y, px, py) / area;
                    let w2 = edge(a.x, a.y, b.x, b.y, px, py) / area;
                    if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                        continue;
                    }
                    let z = 1.0 / (w0 / a.depth + w1 / b.depth + w2 / c.depth);
                    let i = row * w + col;
                    if z < buf.depth[i] {
                        buf.depth[i] = z;
                        buf.face[i] = f as u32;
                    }
                }
            }
        }
        buf
    }

    pub fn depth(&self, col: usize, row: usize) -> f64 {
        self.depth[row * self.width + col]
    }

    pub fn face(&self, col: usize, row: usize) -> Option<usize> {
        let f = self.face[row * self.width + col];
        (f != NO_FACE).then_some(f as usize)
    }
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Ray parameter `t` where `origin + t * dir` meets triangle `(a, b, c)`.
pub fn ray_triangle(origin: Vec3, dir: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(q) * inv)
}

/// Whether a triangle not incident to `v` blocks the segment from the camera
/// center to `v` before relative depth `1 - DEPTH_TOLERANCE`.
pub(crate) fn occludes(topology: &Topology, positions: &[Vec3], f: usize, center: Vec3, v: usize) -> bool {
    let tri = topology.face(f);
    if tri.contains(&v) {
        return false;
    }
    let dir = positions[v] - center;
    match ray_triangle(center, dir, positions[tri[0]], positions[tri[1]], positions[tri[2]]) {
        Some(t) => t > 0.0 && t < 1.0 - DEPTH_TOLERANCE,
        None => false,
    }
}

/// Visible-camera sets for every vertex.
///
/// Vertex `v` is visible in camera `c` when it projects inside the image, its
/// normal faces the camera, and no triangle recorded in the depth buffer
/// around its projection (3x3 pixel neighborhood) lies in front of it by more
/// than the relative depth tolerance along the viewing ray.
pub fn compute_visibility(mesh: &TriMesh, cameras: &[Camera]) -> Visibility {
    compute_visibility_raw(mesh.topology(), &mesh.positions, cameras)
}

pub(crate) fn compute_visibility_raw(topology: &Topology, positions: &[Vec3], cameras: &[Camera]) -> Visibility {
    let normals = super::vertex_normals(topology, &super::face_normals(topology, positions));
    let per_camera: Vec<Vec<bool>> = par::map_indexed(cameras.len(), |c| {
        visible_in_camera(topology, positions, &normals, &cameras[c])
    });
    let mut sets = vec![Vec::new(); positions.len()];
    for (c, vis) in per_camera.iter().enumerate() {
        for (v, &seen) in vis.iter().enumerate() {
            if seen {
                sets[v].push(c);
            }
        }
    }
    Visibility { sets }
}

fn visible_in_camera(topology: &Topology, positions: &[Vec3], normals: &[Option<Vec3>], camera: &Camera) -> Vec<bool> {
    let buffer = DepthBuffer::render(camera, topology, positions);
    let center = camera.center();
    let mut candidates: Vec<usize> = Vec::with_capacity(9);
    (0..positions.len())
        .map(|v| {
            let Some(n) = normals[v] else {
                return false;
            };
            let Some(p) = camera.project(positions[v]) else {
                return false;
            };
            if !camera.contains(p.x, p.y) {
                return false;
            }
            if n.dot(positions[v] - center) >= 0.0 {
                return false;
            }
            let col = libm::floor(p.x + 0.5) as i64;
            let row = libm::floor(p.y + 0.5) as i64;
            candidates.clear();
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (cc, rr) = (col + dx, row + dy);
                    if cc < 0 || rr < 0 || cc >= buffer.width as i64 || rr >= buffer.height as i64 {
                        continue;
                    }
                    if let Some(f) = buffer.face(cc as usize, rr as usize) {
                        if !candidates.contains(&f) {
                            candidates.push(f);
                        }
                    }
                }
            }
            !candidates
                .iter()
                .any(|&f| occludes(topology, positions, f, center, v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Mat3;
    use crate::synth::icosphere;

    fn tri_camera() -> Camera {
        Camera::new(100.0, 100.0, 50.0, 50.0, 101, 101, Mat3::IDENTITY, Vec3::ZERO).unwrap()
    }

    fn triangle_at(z: f64) -> TriMesh {
        // wound so its normal points towards the camera at the origin (-z)
        let p = vec![Vec3::new(-0.2, -0.2, z), Vec3::new(0.0, 0.2, z), Vec3::new(0.2, -0.2, z)];
        TriMesh::new(p, vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn front_facing_triangle_is_fully_visible() {
        let m = triangle_at(2.0);
        assert!(m.face_normal(0).unwrap().z < 0.0);
        let vis = compute_visibility(&m, &[tri_camera()]);
        for v in 0..3 {
            assert_eq!(vis.cameras(v), &[0]);
        }
    }

    #[test]
    fn triangle_behind_camera_is_invisible() {
        let vis = compute_visibility(&triangle_at(-2.0), &[tri_camera()]);
        assert_eq!(vis.unseen_count(), 3);
    }

    #[test]
    fn occluded_vertex_is_hidden() {
        // small far triangle behind a big near one
        let p = vec![
            Vec3::new(-0.05, -0.05, 3.0),
            Vec3::new(0.0, 0.05, 3.0),
            Vec3::new(0.05, -0.05, 3.0),
            Vec3::new(-0.5, -0.5, 1.0),
            Vec3::new(0.0, 0.5, 1.0),
            Vec3::new(0.5, -0.5, 1.0),
        ];
        let m = TriMesh::new(p, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let vis = compute_visibility(&m, &[tri_camera()]);
        assert!(vis.cameras(0).is_empty() && vis.cameras(1).is_empty() && vis.cameras(2).is_empty());
        assert_eq!(vis.cameras(3), &[0]);
    }

    fn ray_cast_oracle(m: &TriMesh, cam: &Camera) -> Vec<bool> {
        let normals = m.vertex_normals();
        let center = cam.center();
        (0..m.vertex_count())
            .map(|v| {
                let Some(p) = cam.project(m.positions[v]) else { return false };
                if !cam.contains(p.x, p.y) {
                    return false;
                }
                if normals[v].unwrap().dot(m.positions[v] - center) >= 0.0 {
                    return false;
                }
                !(0..m.face_count()).any(|f| occludes(m.topology(), &m.positions, f, center, v))
            })
            .collect()
    }

    #[test]
    fn depth_buffer_visibility_matches_ray_casting_on_icosphere() {
        let m = icosphere(3, 1.0);
        assert_eq!(m.vertex_count(), 642);
        let cam = Camera::look_at(
            Vec3::new(0.0, 0.0, 4.0),
            Vec3::ZERO,
            Vec3::new(0.0, 1.0, 0.0),
            120.0,
            96,
            96,
        )
        .unwrap();
        let vis = compute_visibility(&m, core::slice::from_ref(&cam));
        let oracle = ray_cast_oracle(&m, &cam);
        let mut seen = 0;
        for v in 0..m.vertex_count() {
            assert_eq!(!vis.cameras(v).is_empty(), oracle[v], "vertex {v}");
            seen += oracle[v] as usize;
        }
        assert!(seen > 200 && seen < 400, "{seen}");
    }

    #[test]
    fn depth_buffer_visibility_matches_ray_casting_with_occluders() {
        // two spheres, one partly hiding the other
        let a = icosphere(2, 0.6);
        let b = icosphere(2, 0.6);
        let mut pos: Vec<Vec3> = a.positions.iter().map(|p| *p + Vec3::new(-0.3, 0.0, 0.0)).collect();
        let off = pos.len();
        pos.extend(b.positions.iter().map(|p| *p + Vec3::new(0.5, 0.1, 1.5)));
        let mut faces = a.faces().to_vec();
        faces.extend(b.faces().iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        let m = TriMesh::new(pos, faces).unwrap();
        let cam = Camera::look_at(
            Vec3::new(0.2, 0.0, 5.0),
            Vec3::ZERO,
            Vec3::new(0.0, 1.0, 0.0),
            160.0,
            128,
            128,
        )
        .unwrap();
        let vis = compute_visibility(&m, core::slice::from_ref(&cam));
        let oracle = ray_cast_oracle(&m, &cam);
        let hidden_by_other = (0..off)
            .filter(|&v| {
                let n = m.vertex_normal(v).unwrap();
                n.dot(m.positions[v] - cam.center()) < 0.0 && !oracle[v]
            })
            .count();
        assert!(hidden_by_other > 5, "scene should contain occlusion");
        for v in 0..m.vertex_count() {
            assert_eq!(!vis.cameras(v).is_empty(), oracle[v], "vertex {v}");
        }
    }
}
