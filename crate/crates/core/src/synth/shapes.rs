use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{ray_triangle, Camera, DepthBuffer, TriMesh};

/// Icosahedron subdivided `level` times (4-to-1) and projected onto a sphere.
/// Faces are counter-clockwise seen from outside.
pub fn icosphere(level: usize, radius: f64) -> TriMesh {
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let mut positions: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized().expect("non-zero"))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, positions: &mut Vec<Vec3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = ((positions[a] + positions[b]) * 0.5).normalized().expect("non-antipodal");
                positions.push(m);
                positions.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut positions);
            let bc = midpoint(b, c, &mut positions);
            let ca = midpoint(c, a, &mut positions);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for p in &mut positions {
        *p = *p * radius;
    }
    TriMesh::new(positions, faces).expect("icosphere is a closed manifold")
}

/// `count` cameras spread over a sphere of radius `distance` around `target`
/// (Fibonacci lattice), each looking at `target` with world +z as up.
pub fn sphere_cameras(count: usize, distance: f64, target: Vec3, focal: f64, width: usize, height: usize) -> Vec<Camera> {
    let golden = PI * (3.0 - libm::sqrt(5.0));
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = libm::sqrt((1.0 - z * z).max(0.0));
            let a = golden * i as f64;
            let dir = Vec3::new(r * libm::cos(a), r * libm::sin(a), z);
            Camera::look_at(target + dir * distance, target, Vec3::new(0.0, 0.0, 1.0), focal, width, height)
                .expect("camera frame is well defined")
        })
        .collect()
}

/// Ground-truth geometry of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Shape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Ellipsoid {
        center: [f64; 3],
        radii: [f64; 3],
    },
    /// A closed triangle mesh supplied by the user.
    Mesh {
        positions: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
    },
}

impl Default for Shape {
    fn default() -> Self {
        Shape::Sphere {
            center: [0.0; 3],
            radius: 1.0,
        }
    }
}

/// A ray/surface intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Vec3,
    /// Outward unit normal.
    pub normal: Vec3,
    /// Set when the ray missed and the point continues the surface past its outline.
    pub extended: bool,
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Sphere { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) || !center.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidInput(format!("invalid sphere radius {radius}")));
                }
            }
            Shape::Ellipsoid { center, radii } => {
                if !radii.iter().all(|r| *r > 0.0 && r.is_finite()) || !center.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidInput(format!("invalid ellipsoid radii {radii:?}")));
                }
            }
            Shape::Mesh { .. } => {
                self.mesh(0)?;
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        match self {
            Shape::Sphere { center, .. } | Shape::Ellipsoid { center, .. } => Vec3::from_array(*center),
            Shape::Mesh { positions, .. } => {
                if positions.is_empty() {
                    return Vec3::ZERO;
                }
                let (lo, hi) = crate::mesh::bounding_box(
                    &positions.iter().map(|p| Vec3::from_array(*p)).collect::<Vec<_>>(),
                );
                (lo + hi) * 0.5
            }
        }
    }

    /// Triangulation of the shape; `level` is the icosphere level of analytic
    /// shapes and ignored for meshes.
    pub fn mesh(&self, level: usize) -> Result<TriMesh> {
        match self {
            Shape::Sphere { center, radius } => {
                let mut m = icosphere(level, *radius);
                let c = Vec3::from_array(*center);
                m.positions.iter_mut().for_each(|p| *p += c);
                Ok(m)
            }
            Shape::Ellipsoid { center, radii } => {
                let mut m = icosphere(level, 1.0);
                let c = Vec3::from_array(*center);
                for p in &mut m.positions {
                    *p = Vec3::new(p.x * radii[0], p.y * radii[1], p.z * radii[2]) + c;
                }
                Ok(m)
            }
            Shape::Mesh { positions, faces } => TriMesh::new(
                positions.iter().map(|p| Vec3::from_array(*p)).collect(),
                faces.clone(),
            ),
        }
    }

    /// Unsigned distance from `p` to the surface, for shapes where it has a
    /// closed form.
    pub fn surface_distance(&self, p: Vec3) -> Option<f64> {
        match self {
            Shape::Sphere { center, radius } => Some(((p - Vec3::from_array(*center)).norm() - radius).abs()),
            _ => None,
        }
    }

    /// Ray cast against an analytic shape; rays passing within `dilation_px`
    /// pixels of the outline return the nearest surface point instead.
    fn intersect_analytic(&self, origin: Vec3, dir: Vec3, cam: &Camera, dilation_px: f64) -> Option<SurfaceHit> {
        let (center, radii) = match self {
            Shape::Sphere { center, radius } => (Vec3::from_array(*center), [*radius; 3]),
            Shape::Ellipsoid { center, radii } => (Vec3::from_array(*center), *radii),
            Shape::Mesh { .. } => return None,
        };
        let to_unit = |v: Vec3| Vec3::new(v.x / radii[0], v.y / radii[1], v.z / radii[2]);
        let from_unit = |v: Vec3| Vec3::new(v.x * radii[0], v.y * radii[1], v.z * radii[2]);
        let normal_at = |u: Vec3| to_unit(u).normalized();
        let o = to_unit(origin - center);
        let d = to_unit(dir);
        let a = d.dot(d);
        let b = o.dot(d);
        let c = o.dot(o) - 1.0;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = libm::sqrt(disc);
            let t = if -b - sq > 0.0 { (-b - sq) / a } else { (-b + sq) / a };
            if t <= 0.0 {
                return None;
            }
            let u = o + d * t;
            return Some(SurfaceHit {
                point: center + from_unit(u),
                normal: normal_at(u)?,
                extended: false,
            });
        }
        if dilation_px <= 0.0 {
            return None;
        }
        let t = -b / a;
        if t <= 0.0 {
            return None;
        }
        let closest = o + d * t;
        let u = closest.normalized()?;
        let point = center + from_unit(u);
        let gap = (from_unit(closest) - from_unit(u)).norm();
        let depth = cam.to_camera(point).z;
        if depth <= 0.0 || gap * cam.fx / depth > dilation_px {
            return None;
        }
        Some(SurfaceHit {
            point,
            normal: normal_at(u)?,
            extended: true,
        })
    }
}

/// Per-view ray caster over a [`Shape`].
pub(crate) enum Tracer<'a> {
    Analytic(&'a Shape, f64),
    Mesh {
        mesh: &'a TriMesh,
        normals: &'a [Option<Vec3>],
        buffer: DepthBuffer,
    },
}

impl<'a> Tracer<'a> {
    pub(crate) fn analytic(shape: &'a Shape, dilation_px: f64) -> Self {
        Tracer::Analytic(shape, dilation_px)
    }

    pub(crate) fn mesh(mesh: &'a TriMesh, normals: &'a [Option<Vec3>], cam: &Camera) -> Self {
        Tracer::Mesh {
            mesh,
            normals,
            buffer: DepthBuffer::render(cam, mesh.topology(), &mesh.positions),
        }
    }

    pub(crate) fn trace(&self, cam: &Camera, col: usize, row: usize) -> Option<SurfaceHit> {
        let origin = cam.center();
        let dir = cam.ray_direction(col as f64, row as f64);
        match self {
            Tracer::Analytic(shape, dilation) => shape.intersect_analytic(origin, dir, cam, *dilation),
            Tracer::Mesh { mesh, normals, buffer } => {
                let f = buffer.face(col, row)?;
                let [a, b, c] = mesh.faces()[f];
                let (pa, pb, pc) = (mesh.positions[a], mesh.positions[b], mesh.positions[c]);
                let t = ray_triangle(origin, dir, pa, pb, pc)?;
                let point = origin + dir * t;
                let area = |x: Vec3, y: Vec3, z: Vec3| (y - x).cross(z - x).norm();
                let total = area(pa, pb, pc);
                let w = [area(point, pb, pc) / total, area(pa, point, pc) / total, area(pa, pb, point) / total];
                let mut n = Vec3::ZERO;
                for (k, v) in [a, b, c].into_iter().enumerate() {
                    n += normals[v]? * w[k];
                }
                Some(SurfaceHit {
                    point,
                    normal: n.normalized()?,
                    extended: false,
                })
            }
        }
    }
}

/// Procedural ground-truth albedo.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum AlbedoField {
    Constant {
        rgb: [f64; 3],
    },
    /// Linear blend from `low` to `high` along `axis` over `[-extent, extent]`.
    Gradient {
        low: [f64; 3],
        high: [f64; 3],
        axis: [f64; 3],
        extent: f64,
    },
    /// 3D checkerboard with cubes of side `cell`.
    Checker {
        a: [f64; 3],
        b: [f64; 3],
        cell: f64,
    },
    /// `base + amplitude * sin(fx) sin(fy) sin(fz)`.
    Waves {
        base: [f64; 3],
        amplitude: [f64; 3],
        frequency: f64,
    },
}

impl Default for AlbedoField {
    fn default() -> Self {
        AlbedoField::Gradient {
            low: [0.3, 0.45, 0.6],
            high: [0.75, 0.55, 0.35],
            axis: [0.3, 0.5, 0.8],
            extent: 1.0,
        }
    }
}

impl AlbedoField {
    pub fn at(&self, p: Vec3) -> [f64; 3] {
        match *self {
            AlbedoField::Constant { rgb } => rgb,
            AlbedoField::Gradient { low, high, axis, extent } => {
                let axis = Vec3::from_array(axis).normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0));
                let t = (0.5 + 0.5 * p.dot(axis) / extent).clamp(0.0, 1.0);
                [0, 1, 2].map(|c| low[c] + (high[c] - low[c]) * t)
            }
            AlbedoField::Checker { a, b, cell } => {
                let idx = libm::floor(p.x / cell) + libm::floor(p.y / cell) + libm::floor(p.z / cell);
                if libm::fmod(idx, 2.0) == 0.0 {
                    a
                } else {
                    b
                }
            }
            AlbedoField::Waves {
                base,
                amplitude,
                frequency,
            } => {
                let s = libm::sin(frequency * p.x) * libm::sin(frequency * p.y) * libm::sin(frequency * p.z);
                [0, 1, 2].map(|c| base[c] + amplitude[c] * s)
            }
        }
    }
}
