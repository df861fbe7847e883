//! Analytic polarized scenes: ground-truth shapes, multi-view polarization
//! images, perturbed initial meshes.

mod shapes;

pub use shapes::{icosphere, sphere_cameras, AlbedoField, Shape, SurfaceHit};

use shapes::Tracer;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cost::{projected_azimuth, ParamState};
use crate::error::{Error, Result};
use crate::image::Plane;
use crate::mesh::{Camera, TriMesh};
use crate::par;
use crate::polarimetry::{wrap_pi, PolarizationImageSet, PolarizedSample, UNDEFINED_AOP};
use crate::shading::{render_vertex, Illumination};

/// Cameras on a sphere around the scene, all looking at its center.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CameraRig {
    pub count: usize,
    pub distance: f64,
    pub focal: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraRig {
    fn default() -> Self {
        CameraRig {
            count: 20,
            distance: 4.0,
            focal: 200.0,
            width: 128,
            height: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PolarizationModel {
    /// DoP is `dop_scale * sin^2(zenith)`.
    pub dop_scale: f64,
    /// Per-pixel probability of shifting the AoP by pi/2.
    pub specular_fraction: f64,
    /// Standard deviation of additive AoP noise, radians.
    pub aop_noise_sigma: f64,
}

impl Default for PolarizationModel {
    fn default() -> Self {
        PolarizationModel {
            dop_scale: 0.8,
            specular_fraction: 0.0,
            aop_noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SyntheticScene {
    pub shape: Shape,
    pub albedo: AlbedoField,
    pub illumination: Illumination,
    pub cameras: CameraRig,
    pub polarization: PolarizationModel,
    /// Icosphere level of the ground-truth mesh of analytic shapes.
    pub gt_level: usize,
    /// Icosphere level of the initial mesh of analytic shapes.
    pub initial_level: usize,
    /// Normal-direction noise of the initial mesh, fraction of its bounding-box diagonal.
    pub initial_sigma: f64,
    /// Analytic shapes are shaded this many pixels beyond their silhouette so
    /// bilinear lookups at the outline see a continuous image.
    pub dilation_px: f64,
    pub seed: u64,
}

impl Default for SyntheticScene {
    fn default() -> Self {
        SyntheticScene {
            shape: Shape::default(),
            albedo: AlbedoField::default(),
            illumination: Illumination {
                basis: [0.8, 0.1, 0.25, 0.15, 0.05, 0.05, 0.1, 0.0, 0.05],
                scale: [1.0, 0.95, 0.9],
            },
            cameras: CameraRig::default(),
            polarization: PolarizationModel::default(),
            gt_level: 6,
            initial_level: 4,
            initial_sigma: 0.02,
            dilation_px: 2.0,
            seed: 1,
        }
    }
}

impl SyntheticScene {
    pub fn validate(&self) -> Result<()> {
        let p = &self.polarization;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(p.dop_scale) || !unit(p.specular_fraction) {
            return Err(Error::InvalidInput(format!(
                "dop_scale and specular_fraction must lie in [0, 1], got {} and {}",
                p.dop_scale, p.specular_fraction
            )));
        }
        if !(p.aop_noise_sigma >= 0.0 && p.aop_noise_sigma.is_finite()) {
            return Err(Error::InvalidInput("aop_noise_sigma must be non-negative".into()));
        }
        if !(self.initial_sigma >= 0.0 && self.initial_sigma.is_finite()) {
            return Err(Error::InvalidInput("initial_sigma must be non-negative".into()));
        }
        let c = &self.cameras;
        if c.count == 0 || c.width < 2 || c.height < 2 || !(c.focal > 0.0) || !(c.distance > 0.0) {
            return Err(Error::InvalidInput(format!("invalid camera rig {c:?}")));
        }
        if !self.illumination.is_finite() {
            return Err(Error::InvalidInput("illumination must be finite".into()));
        }
        self.shape.validate()
    }

    pub fn build_cameras(&self) -> Vec<Camera> {
        let c = &self.cameras;
        sphere_cameras(c.count, c.distance, self.shape.center(), c.focal, c.width, c.height)
    }

    /// Ground-truth parameters on `mesh`: albedo from the field, the scene's
    /// lighting for every image.
    pub fn ground_truth_state(&self, mesh: &TriMesh) -> ParamState {
        ParamState {
            positions: mesh.positions.clone(),
            albedo: mesh.positions.iter().map(|p| self.albedo.at(*p)).collect(),
            illumination: vec![self.illumination; self.cameras.count],
        }
    }
}

/// Rendered images and meshes of a synthetic scene.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub cameras: Vec<Camera>,
    pub views: Vec<PolarizationImageSet>,
    /// Ground-truth albedo per view at each covered pixel (zero elsewhere).
    pub albedo_maps: Vec<Plane>,
    /// 1 where the shape covers the pixel center, else 0.
    pub coverage: Vec<Plane>,
    pub gt_mesh: TriMesh,
    pub initial_mesh: TriMesh,
    pub gt_illumination: Vec<Illumination>,
}

/// Everything rendered for one pixel.
struct PixelSample {
    directions: [[f32; 3]; 4],
    rgb_int: [f32; 3],
    rgb_min: [f32; 3],
    aop: f32,
    dop: f32,
    albedo: Option<[f32; 3]>,
}

fn mix_seed(seed: u64, view: u64, pixel: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        .wrapping_add(view.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(pixel.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn render_pixel(scene: &SyntheticScene, tracer: &Tracer, cam: &Camera, view: usize, col: usize, row: usize) -> PixelSample {
    let empty = PixelSample {
        directions: [[0.0; 3]; 4],
        rgb_int: [0.0; 3],
        rgb_min: [0.0; 3],
        aop: UNDEFINED_AOP,
        dop: 0.0,
        albedo: None,
    };
    let Some(hit) = tracer.trace(cam, col, row) else {
        return empty;
    };
    let origin = cam.center();
    let k = scene.albedo.at(hit.point);
    let (diffuse, _) = render_vertex(k, hit.normal, &scene.illumination);
    let to_cam = (origin - hit.point).normalized().unwrap_or(-hit.normal);
    let cos = hit.normal.dot(to_cam).clamp(-1.0, 1.0);
    let pm = &scene.polarization;
    let mut rho = (pm.dop_scale * (1.0 - cos * cos)).clamp(0.0, 1.0);
    let mut phi = 0.0;
    match projected_azimuth(hit.normal, cam) {
        Some(alpha) if rho > 0.0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scene.seed, view as u64, (row * cam.width + col) as u64));
            let flip: f64 = rng.random();
            let noise: f64 = rng.sample(StandardNormal);
            let mut a = alpha;
            if flip < pm.specular_fraction {
                a += FRAC_PI_2;
            }
            a += pm.aop_noise_sigma * noise;
            phi = wrap_pi(a);
        }
        _ => rho = 0.0,
    }
    // I_min equals the diffuse render; keep the total finite at grazing angles
    let unpolarized = (1.0 - rho).max(1e-3);
    let mut directions = [[0.0f32; 3]; 4];
    let mut rgb_int = [0.0f32; 3];
    let mut rgb_min = [0.0f32; 3];
    for ch in 0..3 {
        let total = diffuse[ch] / unpolarized;
        let s = PolarizedSample::from_aop_dop(total, phi, rho);
        for (d, v) in s.as_array().iter().enumerate() {
            directions[d][ch] = *v as f32;
        }
        rgb_int[ch] = total as f32;
        rgb_min[ch] = diffuse[ch] as f32;
    }
    let mut aop = phi as f32;
    if aop as f64 >= core::f64::consts::PI {
        aop = UNDEFINED_AOP;
    }
    PixelSample {
        directions,
        rgb_int,
        rgb_min,
        aop: if rho > 0.0 { aop } else { UNDEFINED_AOP },
        dop: rho as f32,
        albedo: (!hit.extended).then(|| k.map(|v| v as f32)),
    }
}

fn render_view(
    scene: &SyntheticScene,
    tracer: &Tracer,
    cam: &Camera,
    view: usize,
) -> Result<(PolarizationImageSet, Plane, Plane)> {
    let (w, h) = (cam.width, cam.height);
    let pixels = par::map_indexed(w * h, |i| render_pixel(scene, tracer, cam, view, i % w, i / w));
    let mut directions = [
        Plane::new(w, h, 3),
        Plane::new(w, h, 3),
        Plane::new(w, h, 3),
        Plane::new(w, h, 3),
    ];
    let mut rgb_int = Plane::new(w, h, 3);
    let mut rgb_min = Plane::new(w, h, 3);
    let mut aop = Plane::new(w, h, 1);
    let mut dop = Plane::new(w, h, 1);
    let mut albedo = Plane::new(w, h, 3);
    let mut coverage = Plane::new(w, h, 1);
    for (i, px) in pixels.iter().enumerate() {
        let (col, row) = (i % w, i / w);
        for ch in 0..3 {
            for d in 0..4 {
                directions[d].set(col, row, ch, px.directions[d][ch]);
            }
            rgb_int.set(col, row, ch, px.rgb_int[ch]);
            rgb_min.set(col, row, ch, px.rgb_min[ch]);
        }
        aop.set(col, row, 0, px.aop);
        dop.set(col, row, 0, px.dop);
        if let Some(k) = px.albedo {
            for ch in 0..3 {
                albedo.set(col, row, ch, k[ch]);
            }
            coverage.set(col, row, 0, 1.0);
        }
    }
    let set = PolarizationImageSet::from_parts(directions, rgb_int, rgb_min, aop, dop)?;
    Ok((set, albedo, coverage))
}

/// Renders every view of `scene` and builds the ground-truth and initial meshes.
pub fn render_views(scene: &SyntheticScene) -> Result<SyntheticDataset> {
    scene.validate()?;
    let cameras = scene.build_cameras();
    let mut views = Vec::with_capacity(cameras.len());
    let mut albedo_maps = Vec::with_capacity(cameras.len());
    let mut coverage = Vec::with_capacity(cameras.len());
    let mesh_shape = match scene.shape {
        Shape::Mesh { .. } => Some(scene.shape.mesh(0)?),
        _ => None,
    };
    let mesh_normals = mesh_shape.as_ref().map(TriMesh::vertex_normals);
    for (v, cam) in cameras.iter().enumerate() {
        let tracer = match (&mesh_shape, &mesh_normals) {
            (Some(m), Some(n)) => Tracer::mesh(m, n, cam),
            _ => Tracer::analytic(&scene.shape, scene.dilation_px),
        };
        let (set, albedo, cov) = render_view(scene, &tracer, cam, v)?;
        views.push(set);
        albedo_maps.push(albedo);
        coverage.push(cov);
    }
    let mut gt_mesh = scene.shape.mesh(scene.gt_level)?;
    gt_mesh.albedo = gt_mesh.positions.iter().map(|p| scene.albedo.at(*p)).collect();
    let base = scene.shape.mesh(scene.initial_level)?;
    let initial_mesh = perturb_mesh(&base, scene.initial_sigma, scene.seed)?;
    Ok(SyntheticDataset {
        cameras,
        views,
        albedo_maps,
        coverage,
        gt_mesh,
        initial_mesh,
        gt_illumination: vec![scene.illumination; scene.cameras.count],
    })
}

/// Moves every vertex along its normal by Gaussian noise of standard deviation
/// `sigma` times the bounding-box diagonal. Deterministic per seed.
pub fn perturb_mesh(mesh: &TriMesh, sigma: f64, seed: u64) -> Result<TriMesh> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut out = mesh.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let scale = sigma * mesh.bounding_box_diagonal();
    let normals = mesh.vertex_normals();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (p, n) in out.positions.iter_mut().zip(&normals) {
        let z: f64 = rng.sample(StandardNormal);
        if let Some(n) = n {
            *p += *n * (z * scale);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
