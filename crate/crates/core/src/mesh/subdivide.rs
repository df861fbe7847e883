//! sqrt(3)-subdivision driven by projected pixel area.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::visibility::compute_visibility_raw;
use super::{triangle_area, Camera, TriMesh, Visibility};
use crate::error::Result;
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SubdivisionOptions {
    /// Relax old interior vertices with the sqrt(3) smoothing rule.
    pub smooth: bool,
    /// Recompute visibility by depth testing after each step instead of inheriting it.
    pub reverify_visibility: bool,
    /// Upper bound on the number of refinement steps.
    pub max_steps: usize,
}

impl Default for SubdivisionOptions {
    fn default() -> Self {
        SubdivisionOptions {
            smooth: true,
            reverify_visibility: false,
            max_steps: 6,
        }
    }
}

/// Largest projected area (pixels^2) of any face over the cameras that see
/// at least one of its vertices.
pub fn max_projected_area(mesh: &TriMesh, cameras: &[Camera]) -> f64 {
    let mut worst = 0.0f64;
    let mut cams: Vec<usize> = Vec::new();
    for tri in mesh.faces() {
        cams.clear();
        for &v in tri {
            cams.extend_from_slice(mesh.visibility.cameras(v));
        }
        cams.sort_unstable();
        cams.dedup();
        for &c in &cams {
            let cam = &cameras[c];
            let proj = tri.map(|v| cam.project(mesh.positions[v]));
            if let [Some(a), Some(b), Some(p)] = proj {
                let area = triangle_area(
                    Vec3::new(a.x, a.y, 0.0),
                    Vec3::new(b.x, b.y, 0.0),
                    Vec3::new(p.x, p.y, 0.0),
                );
                worst = worst.max(area);
            }
        }
    }
    worst
}

/// Repeats uniform sqrt(3) steps while some face projects larger than `max_pixel_area`.
pub fn sqrt3_subdivide(
    mesh: &TriMesh,
    cameras: &[Camera],
    max_pixel_area: f64,
    options: &SubdivisionOptions,
) -> Result<TriMesh> {
    sqrt3_subdivide_counted(mesh, cameras, max_pixel_area, options).map(|(m, _)| m)
}

/// As [`sqrt3_subdivide`], also returning the number of steps taken.
pub fn sqrt3_subdivide_counted(
    mesh: &TriMesh,
    cameras: &[Camera],
    max_pixel_area: f64,
    options: &SubdivisionOptions,
) -> Result<(TriMesh, usize)> {
    let mut current = mesh.clone();
    for step in 0..options.max_steps {
        if max_projected_area(&current, cameras) <= max_pixel_area {
            return Ok((current, step));
        }
        current = sqrt3_step(&current, options.smooth)?;
        if options.reverify_visibility {
            current.visibility = compute_visibility_raw(current.topology(), &current.positions, cameras);
        }
    }
    if max_projected_area(&current, cameras) > max_pixel_area {
        log::warn!(
            "subdivision stopped after {} steps with faces above {max_pixel_area} px^2",
            options.max_steps
        );
    }
    Ok((current, options.max_steps))
}

/// Smoothing weight of an interior vertex of valence `n`.
pub(crate) fn sqrt3_alpha(n: usize) -> f64 {
    (4.0 - 2.0 * libm::cos(2.0 * PI / n as f64)) / 9.0
}

/// One sqrt(3) step: insert face centroids, flip the original interior edges,
/// optionally relax the old interior vertices. Boundary edges are split 1-to-3
/// without flipping and boundary vertices stay fixed.
pub fn sqrt3_step(mesh: &TriMesh, smooth: bool) -> Result<TriMesh> {
    let topo = mesh.topology();
    let n_old = mesh.vertex_count();
    let n_faces = mesh.face_count();
    let boundary = topo.boundary_vertices();

    let mut positions = Vec::with_capacity(n_old + n_faces);
    for v in 0..n_old {
        let p = mesh.positions[v];
        let nb = topo.neighbors(v);
        if smooth && !boundary[v] && !nb.is_empty() {
            let a = sqrt3_alpha(nb.len());
            let mut sum = Vec3::ZERO;
            for &j in nb {
                sum += mesh.positions[j];
            }
            positions.push(p * (1.0 - a) + sum * (a / nb.len() as f64));
        } else {
            positions.push(p);
        }
    }
    let mut albedo = mesh.albedo.clone();
    let mut vis_sets: Vec<Vec<usize>> = mesh.visibility.sets().to_vec();
    if vis_sets.len() != n_old {
        vis_sets = Vec::from_iter((0..n_old).map(|_| Vec::new()));
    }
    for tri in mesh.faces() {
        let [a, b, c] = *tri;
        positions.push((mesh.positions[a] + mesh.positions[b] + mesh.positions[c]) / 3.0);
        let mut k = [0.0; 3];
        for (ch, kv) in k.iter_mut().enumerate() {
            *kv = (mesh.albedo[a][ch] + mesh.albedo[b][ch] + mesh.albedo[c][ch]) / 3.0;
        }
        albedo.push(k);
        let inherited: Vec<usize> = vis_sets[a]
            .iter()
            .copied()
            .filter(|cam| vis_sets[b].contains(cam) && vis_sets[c].contains(cam))
            .collect();
        vis_sets.push(inherited);
    }

    let mut faces = Vec::with_capacity(3 * n_faces);
    for (f, tri) in mesh.faces().iter().enumerate() {
        let cf = n_old + f;
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            match topo.face_neighbors(f)[k] {
                None => faces.push([a, b, cf]),
                Some(g) if f < g => {
                    let cg = n_old + g;
                    faces.push([a, cg, cf]);
                    faces.push([b, cf, cg]);
                }
                Some(_) => {}
            }
        }
    }
    let mut out = TriMesh::with_albedo(positions, faces, albedo)?;
    out.visibility = Visibility::from_sets(vis_sets);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::compute_visibility;
    use crate::mesh::tests::grid;
    use crate::synth::{icosphere, sphere_cameras};
    use alloc::vec;

    fn front_camera() -> Camera {
        Camera::look_at(
            Vec3::new(0.3, 0.3, 3.0),
            Vec3::new(0.3, 0.3, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            100.0,
            100,
            100,
        )
        .unwrap()
    }

    fn single_triangle() -> TriMesh {
        let p = vec![Vec3::new(0., 0., 0.), Vec3::new(1., 0., 0.), Vec3::new(0., 1., 0.)];
        let mut m = TriMesh::new(p, vec![[0, 1, 2]]).unwrap();
        m.albedo = vec![[0.0, 0.3, 0.9], [0.3, 0.3, 0.0], [0.6, 0.3, 0.3]];
        m
    }

    #[test]
    fn triangle_below_threshold_is_unchanged() {
        let mut m = single_triangle();
        let cams = [front_camera()];
        m.visibility = compute_visibility(&m, &cams);
        let area = max_projected_area(&m, &cams);
        assert!(area > 0.0);
        let out = sqrt3_subdivide(&m, &cams, area * 2.0, &SubdivisionOptions::default()).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn triangle_above_threshold_gets_one_step() {
        let mut m = single_triangle();
        let cams = [front_camera()];
        m.visibility = compute_visibility(&m, &cams);
        let area = max_projected_area(&m, &cams);
        let out = sqrt3_subdivide(&m, &cams, area * 0.5, &SubdivisionOptions::default()).unwrap();
        assert_eq!(out.face_count(), 3);
        assert_eq!(out.vertex_count(), 4);
        // boundary vertices are not smoothed
        assert_eq!(&out.positions[..3], &m.positions[..]);
        let centroid_albedo = out.albedo[3];
        assert!((centroid_albedo[0] - 0.3).abs() < 1e-15 && (centroid_albedo[2] - 0.4).abs() < 1e-15);
        assert_eq!(out.visibility.cameras(3), &[0]);
    }

    #[test]
    fn each_step_triples_faces_and_keeps_orientation() {
        let m = icosphere(1, 1.0);
        let s = sqrt3_step(&m, true).unwrap();
        assert_eq!(s.face_count(), 3 * m.face_count());
        assert_eq!(s.vertex_count(), m.vertex_count() + m.face_count());
        let c = s.centroid();
        for f in 0..s.face_count() {
            let t = s.faces()[f];
            let fc = (s.positions[t[0]] + s.positions[t[1]] + s.positions[t[2]]) / 3.0;
            assert!(s.face_normal(f).unwrap().dot(fc - c) > 0.0);
        }
        let s2 = sqrt3_step(&s, true).unwrap();
        assert_eq!(s2.face_count(), 9 * m.face_count());
    }

    #[test]
    fn unsmoothed_step_keeps_old_vertices() {
        let m = icosphere(1, 1.0);
        let s = sqrt3_step(&m, false).unwrap();
        assert_eq!(&s.positions[..m.vertex_count()], &m.positions[..]);
    }

    #[test]
    fn smoothing_matches_scheme_weights_on_grid() {
        let mut g = grid(4, 1.0);
        // lift one interior vertex (valence 6 in this triangulation)
        let v = 2 * 5 + 2;
        g.positions[v].z = 1.0;
        let g = TriMesh::new(g.positions.clone(), g.faces().to_vec()).unwrap();
        let n = g.topology().neighbors(v).len();
        assert_eq!(n, 6);
        let s = sqrt3_step(&g, true).unwrap();
        let a = (4.0 - 2.0 * libm::cos(2.0 * PI / 6.0)) / 9.0;
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
        let mut sum = Vec3::ZERO;
        for &j in g.topology().neighbors(v) {
            sum += g.positions[j];
        }
        let expected = g.positions[v] * (1.0 - a) + sum * (a / 6.0);
        assert!((s.positions[v] - expected).norm() < 1e-15);
        assert!((s.positions[v].z - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn icosphere_reaches_area_threshold() {
        let cams = sphere_cameras(20, 4.0, Vec3::ZERO, 200.0, 96, 96);
        let mut m = icosphere(2, 1.0);
        m.visibility = compute_visibility(&m, &cams);
        let out = sqrt3_subdivide(&m, &cams, 16.0, &SubdivisionOptions::default()).unwrap();
        assert!(out.face_count() > m.face_count());
        assert!(max_projected_area(&out, &cams) <= 16.0);
    }
}
