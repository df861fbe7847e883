//! Geometry, albedo and illumination error metrics.

mod kdtree;

pub use kdtree::KdTree;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::image::Plane;
use crate::mesh::{face_normals, vertex_normals, Camera, DepthBuffer, Topology};
use crate::par;
use crate::shading::{sh_shade, Illumination};
use crate::synth::Shape;

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeometryErrorReport {
    /// Mean distance from each estimated point to the ground truth.
    pub accuracy: f64,
    /// Mean distance from each ground-truth point to the estimate.
    pub completeness: f64,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub accuracy_distances: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub completeness_distances: Vec<f64>,
}

/// Distance from every point of `from` to its nearest point in `to`.
pub fn nearest_distances(from: &[Vec3], to: &[Vec3]) -> Result<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let tree = KdTree::new(to);
    Ok(par::map_indexed(from.len(), |i| {
        let (_, d2) = tree.nearest(from[i]).expect("tree is not empty");
        libm::sqrt(d2)
    }))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn accuracy(est: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    nearest_distances(est, gt).map(|d| mean(&d))
}

pub fn completeness(est: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    nearest_distances(gt, est).map(|d| mean(&d))
}

pub fn geometry_errors(est: &[Vec3], gt: &[Vec3]) -> Result<GeometryErrorReport> {
    let a = nearest_distances(est, gt)?;
    let c = nearest_distances(gt, est)?;
    Ok(GeometryErrorReport {
        accuracy: mean(&a),
        completeness: mean(&c),
        accuracy_distances: a,
        completeness_distances: c,
    })
}

/// Root-mean-square distance of `points` to an analytic surface, or to the
/// closest vertex of `fallback` when the shape has no closed-form distance.
pub fn rms_surface_distance(points: &[Vec3], shape: &Shape, fallback: &[Vec3]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let d: Vec<f64> = match shape.surface_distance(points[0]) {
        Some(_) => points
            .iter()
            .map(|p| shape.surface_distance(*p).expect("closed form"))
            .collect(),
        None => nearest_distances(points, fallback)?,
    };
    Ok(libm::sqrt(d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64))
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn luminance(c: [f64; 3]) -> f64 {
    (c[0] + c[1] + c[2]) / 3.0
}

/// Vertex albedos splatted to their nearest pixel; among vertices landing on
/// the same pixel the closest wins, and vertices behind the rendered surface
/// are discarded. Returns the RGB map and a coverage mask.
pub fn splat_albedo(topology: &Topology, positions: &[Vec3], albedo: &[[f64; 3]], camera: &Camera) -> (Plane, Plane) {
    let (w, h) = (camera.width, camera.height);
    let buffer = DepthBuffer::render(camera, topology, positions);
    let normals = vertex_normals(topology, &face_normals(topology, positions));
    let mut map = Plane::new(w, h, 3);
    let mut mask = Plane::new(w, h, 1);
    let mut depth = vec![f64::INFINITY; w * h];
    for (v, p) in positions.iter().enumerate() {
        let Some(n) = normals[v] else { continue };
        if n.dot(*p - camera.center()) >= 0.0 {
            continue;
        }
        let Some(proj) = camera.project(*p) else { continue };
        if !camera.contains(proj.x, proj.y) {
            continue;
        }
        let (col, row) = map.nearest_pixel(proj.x, proj.y);
        let surface = buffer.depth(col, row);
        if surface.is_finite() && proj.depth > surface * (1.0 + 1e-2) {
            continue;
        }
        let i = row * w + col;
        if proj.depth < depth[i] {
            depth[i] = proj.depth;
            for ch in 0..3 {
                map.set(col, row, ch, albedo[v][ch] as f32);
            }
            mask.set(col, row, 0, 1.0);
        }
    }
    (map, mask)
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlbedoReport {
    /// Mean of the per-view RMSE over views with at least one compared pixel.
    pub rmse: f64,
    pub per_view: Vec<Option<f64>>,
    /// Factor applied to the estimated albedo before comparison.
    pub gauge: f64,
    pub skipped_views: usize,
}

/// RMSE between splatted estimated albedo maps and ground-truth maps over
/// pixels covered by both. With `fix_gauge` the estimate is first scaled so
/// its median luminance matches the ground truth's.
pub fn albedo_rmse(
    topology: &Topology,
    positions: &[Vec3],
    albedo: &[[f64; 3]],
    cameras: &[Camera],
    gt_maps: &[Plane],
    gt_coverage: &[Plane],
    fix_gauge: bool,
) -> Result<AlbedoReport> {
    if gt_maps.len() != cameras.len() || gt_coverage.len() != cameras.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} cameras, {} albedo maps, {} coverage masks",
            cameras.len(),
            gt_maps.len(),
            gt_coverage.len()
        )));
    }
    if albedo.len() != positions.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} albedos for {} vertices",
            albedo.len(),
            positions.len()
        )));
    }
    let pairs: Vec<Vec<([f64; 3], [f64; 3])>> = par::map_indexed(cameras.len(), |c| {
        let (map, mask) = splat_albedo(topology, positions, albedo, &cameras[c]);
        let mut out = Vec::new();
        for row in 0..map.height() {
            for col in 0..map.width() {
                if mask.get(col, row, 0) > 0.0 && gt_coverage[c].get(col, row, 0) > 0.0 {
                    let e = [0, 1, 2].map(|ch| map.get(col, row, ch) as f64);
                    let g = [0, 1, 2].map(|ch| gt_maps[c].get(col, row, ch) as f64);
                    out.push((e, g));
                }
            }
        }
        out
    });
    let gauge = if fix_gauge {
        let est = median(pairs.iter().flatten().map(|(e, _)| luminance(*e)).collect());
        let gt = median(pairs.iter().flatten().map(|(_, g)| luminance(*g)).collect());
        match (est, gt) {
            (Some(e), Some(g)) if e > 0.0 => g / e,
            _ => 1.0,
        }
    } else {
        1.0
    };
    let mut per_view = Vec::with_capacity(cameras.len());
    let mut sum = 0.0;
    let mut counted = 0usize;
    for (c, view) in pairs.iter().enumerate() {
        if view.is_empty() {
            log::warn!("albedo evaluation: no visible vertex in view {c}");
            per_view.push(None);
            continue;
        }
        let mut se = 0.0;
        for (e, g) in view {
            for ch in 0..3 {
                let d = gauge * e[ch] - g[ch];
                se += d * d;
            }
        }
        let r = libm::sqrt(se / (3 * view.len()) as f64);
        per_view.push(Some(r));
        sum += r;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::InvalidInput("no view has a visible vertex".into()));
    }
    Ok(AlbedoReport {
        rmse: sum / counted as f64,
        skipped_views: cameras.len() - counted,
        per_view,
        gauge,
    })
}

/// Texel-center directions of a cube map with `resolution`^2 texels per face.
pub fn cube_map_directions(resolution: usize) -> Vec<Vec3> {
    let mut dirs = Vec::with_capacity(6 * resolution * resolution);
    for face in 0..6 {
        for j in 0..resolution {
            for i in 0..resolution {
                let u = 2.0 * (i as f64 + 0.5) / resolution as f64 - 1.0;
                let v = 2.0 * (j as f64 + 0.5) / resolution as f64 - 1.0;
                let d = match face {
                    0 => Vec3::new(1.0, -v, -u),
                    1 => Vec3::new(-1.0, -v, u),
                    2 => Vec3::new(u, 1.0, v),
                    3 => Vec3::new(u, -1.0, -v),
                    4 => Vec3::new(u, -v, 1.0),
                    _ => Vec3::new(-u, -v, -1.0),
                };
                dirs.push(d.normalized().expect("non-zero"));
            }
        }
    }
    dirs
}

/// Mean over images of the RMSE between cube maps rendered from estimated and
/// ground-truth lighting. The estimated RGB scale is divided by `gauge`, the
/// factor applied to the estimated albedo.
pub fn illumination_rmse(est: &[Illumination], gt: &[Illumination], resolution: usize, gauge: f64) -> Result<f64> {
    if est.len() != gt.len() || est.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated and {} ground-truth illuminations",
            est.len(),
            gt.len()
        )));
    }
    if resolution == 0 || !(gauge > 0.0) {
        return Err(Error::InvalidInput("resolution and gauge must be positive".into()));
    }
    let dirs = cube_map_directions(resolution);
    let mut total = 0.0;
    for (e, g) in est.iter().zip(gt) {
        let mut se = 0.0;
        for d in &dirs {
            let (se_shade, gt_shade) = (sh_shade(*d, &e.basis), sh_shade(*d, &g.basis));
            for ch in 0..3 {
                let diff = se_shade * e.scale[ch] / gauge - gt_shade * g.scale[ch];
                se += diff * diff;
            }
        }
        total += libm::sqrt(se / (3 * dirs.len()) as f64);
    }
    Ok(total / est.len() as f64)
}
