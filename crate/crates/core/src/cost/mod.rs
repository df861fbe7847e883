//! The four-term refinement cost: photometric rendering, polarimetric,
//! geometric smoothness and photometric smoothness.

mod gradient;
mod polar;

pub use gradient::{numeric_cost_gradient, GradientLayout, StepPolicy};
pub use polar::{eta, polarimetric_sample_cost, projected_azimuth, theta};

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::image::Plane;
use crate::mesh::{average_normal, face_normals, vertex_normals, Camera, Topology, Visibility};
use crate::par;
use crate::polarimetry::PolarizationImageSet;
use crate::shading::{render_vertex, Illumination};

/// Optimization variables: vertex positions, vertex albedos, per-image lighting.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub positions: Vec<Vec3>,
    pub albedo: Vec<[f64; 3]>,
    pub illumination: Vec<Illumination>,
}

impl ParamState {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|p| p.is_finite())
            && self.albedo.iter().flatten().all(|v| v.is_finite())
            && self.illumination.iter().all(Illumination::is_finite)
    }
}

/// Term weights and shape parameters of one evaluation of the cost.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostWeights {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    /// Concavity of the polarimetric cost.
    pub k: f64,
    /// Exponent of the geometric smoothness term.
    pub t: f64,
    /// Weight polarimetric samples by their DoP. When off every sample with
    /// a defined AoP (non-zero DoP) gets weight 1.
    pub dop_weight: bool,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            tau1: 60.0,
            tau2: 0.1,
            tau3: 2.0,
            k: 0.5,
            t: 2.2,
            dop_weight: true,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.tau1) && finite_nonneg(self.tau2) && finite_nonneg(self.tau3)) {
            return Err(Error::InvalidInput(format!(
                "term weights must be finite and non-negative: {:?}",
                (self.tau1, self.tau2, self.tau3)
            )));
        }
        if !(self.k > 0.0 && self.k.is_finite() && self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "k and t must be positive, got k = {}, t = {}",
                self.k, self.t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostBreakdown {
    pub e_pho: f64,
    pub e_pol: f64,
    pub e_gsm: f64,
    pub e_psm: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(e_pho: f64, e_pol: f64, e_gsm: f64, e_psm: f64, w: &CostWeights) -> Self {
        CostBreakdown {
            e_pho,
            e_pol,
            e_gsm,
            e_psm,
            total: e_pho + w.tau1 * e_pol + w.tau2 * e_gsm + w.tau3 * e_psm,
        }
    }
}

/// Counters gathered while evaluating the data terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostDiagnostics {
    /// (vertex, camera) pairs evaluated.
    pub samples: usize,
    /// Pairs dropped because the projection left the image.
    pub dropped: usize,
    /// Pairs whose rendered color needed clamping at zero.
    pub clamped: usize,
    /// Pairs skipped for an undefined projected azimuth.
    pub undefined_azimuth: usize,
    /// Vertices with visible cameras but no valid normal.
    pub missing_normals: usize,
    /// Faces skipped by the geometric smoothness term.
    pub degenerate_faces: usize,
}

impl CostDiagnostics {
    pub fn dropped_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.dropped as f64 / self.samples as f64
        }
    }

    fn merge(&mut self, o: &CostDiagnostics) {
        self.samples += o.samples;
        self.dropped += o.dropped;
        self.clamped += o.clamped;
        self.undefined_azimuth += o.undefined_azimuth;
        self.missing_normals += o.missing_normals;
        self.degenerate_faces += o.degenerate_faces;
    }
}

/// Observations of one view as used by the cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewData {
    /// RGB compared against rendered colors (the unpolarized image by default).
    pub rgb: Plane,
    pub aop: Plane,
    pub dop: Plane,
}

impl ViewData {
    /// Picks `rgb_min`, or `rgb_int` when `use_intensity` is set.
    pub fn from_set(set: &PolarizationImageSet, use_intensity: bool) -> Self {
        ViewData {
            rgb: if use_intensity {
                set.rgb_int.clone()
            } else {
                set.rgb_min.clone()
            },
            aop: set.aop.clone(),
            dop: set.dop.clone(),
        }
    }
}

/// Everything the cost needs besides the parameters.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub topology: &'a Topology,
    pub cameras: &'a [Camera],
    pub views: &'a [ViewData],
    pub visibility: &'a Visibility,
    /// Photometric smoothness weight per directed neighbor slot of the topology.
    pub psm_weights: &'a [f64],
    pub weights: CostWeights,
}

/// Data-term contribution of one vertex, already divided by `|V(i)|`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct VertexTerms {
    pub pho: f64,
    pub pol: f64,
    pub diag: CostDiagnostics,
}

impl<'a> Problem<'a> {
    pub fn new(
        topology: &'a Topology,
        cameras: &'a [Camera],
        views: &'a [ViewData],
        visibility: &'a Visibility,
        psm_weights: &'a [f64],
        weights: CostWeights,
    ) -> Result<Self> {
        if cameras.len() != views.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cameras but {} views",
                cameras.len(),
                views.len()
            )));
        }
        if visibility.len() != topology.vertex_count() {
            return Err(Error::DimensionMismatch(format!(
                "visibility for {} vertices, mesh has {}",
                visibility.len(),
                topology.vertex_count()
            )));
        }
        if psm_weights.len() != topology.neighbor_csr().total() {
            return Err(Error::DimensionMismatch(format!(
                "{} smoothness weights for {} neighbor slots",
                psm_weights.len(),
                topology.neighbor_csr().total()
            )));
        }
        for (c, (cam, view)) in cameras.iter().zip(views).enumerate() {
            for p in [&view.rgb, &view.aop, &view.dop] {
                if p.dims() != (cam.width, cam.height) {
                    return Err(Error::PlaneMismatch {
                        expected: (cam.width, cam.height),
                        found: p.dims(),
                    });
                }
            }
            if view.rgb.channels() != 3 {
                return Err(Error::InvalidInput(format!("view {c}: RGB plane needs 3 channels")));
            }
        }
        if let Some(bad) = visibility.sets().iter().flatten().find(|&&c| c >= cameras.len()) {
            return Err(Error::InvalidInput(format!("visibility references camera {bad}")));
        }
        weights.validate()?;
        Ok(Problem {
            topology,
            cameras,
            views,
            visibility,
            psm_weights,
            weights,
        })
    }

    pub fn check_state(&self, state: &ParamState) -> Result<()> {
        if state.positions.len() != self.topology.vertex_count() || state.albedo.len() != state.positions.len() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} positions and {} albedos for {} vertices",
                state.positions.len(),
                state.albedo.len(),
                self.topology.vertex_count()
            )));
        }
        if state.illumination.len() != self.cameras.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} illuminations for {} images",
                state.illumination.len(),
                self.cameras.len()
            )));
        }
        Ok(())
    }

    /// Photometric and polarimetric contributions of vertex `i`.
    ///
    /// With `anchor` set, pixel footprints (bilinear cell for RGB, nearest
    /// pixel for AoP/DoP) are chosen at the anchor's projection instead of at
    /// `pos`, which makes the sampled observations smooth in `pos` near the anchor.
    #[inline]
    pub(crate) fn vertex_terms(
        &self,
        i: usize,
        pos: Vec3,
        normal: Option<Vec3>,
        albedo: [f64; 3],
        illumination: &[Illumination],
        anchor: Option<Vec3>,
        with_pol: bool,
    ) -> VertexTerms {
        let cams = self.visibility.cameras(i);
        let mut out = VertexTerms::default();
        if cams.is_empty() {
            return out;
        }
        let Some(normal) = normal else {
            out.diag.missing_normals = 1;
            return out;
        };
        let k = self.weights.k;
        for &c in cams {
            let cam = &self.cameras[c];
            let view = &self.views[c];
            out.diag.samples += 1;
            let Some(p) = cam.project(pos) else {
                out.diag.dropped += 1;
                continue;
            };
            if !cam.contains(p.x, p.y) {
                out.diag.dropped += 1;
                continue;
            }
            let (cell, px) = match anchor {
                Some(a) => match cam.project(a) {
                    Some(ap) if cam.contains(ap.x, ap.y) => (
                        view.rgb.bilinear_cell(ap.x, ap.y),
                        view.aop.nearest_pixel(ap.x, ap.y),
                    ),
                    _ => {
                        out.diag.dropped += 1;
                        continue;
                    }
                },
                None => (view.rgb.bilinear_cell(p.x, p.y), view.aop.nearest_pixel(p.x, p.y)),
            };
            let obs = view.rgb.sample_bilinear_rgb_in(cell, p.x, p.y);
            let (rendered, clamped) = render_vertex(albedo, normal, &illumination[c]);
            if clamped {
                out.diag.clamped += 1;
            }
            let d0 = obs[0] - rendered[0];
            let d1 = obs[1] - rendered[1];
            let d2 = obs[2] - rendered[2];
            out.pho += d0 * d0 + d1 * d1 + d2 * d2;

            if with_pol {
                let rho = view.dop.get(px.0, px.1, 0) as f64;
                let weight = if self.weights.dop_weight {
                    rho
                } else if rho > 0.0 {
                    1.0
                } else {
                    0.0
                };
                if weight > 0.0 {
                    match projected_azimuth(normal, cam) {
                        Some(alpha) => {
                            let phi = view.aop.get(px.0, px.1, 0) as f64;
                            out.pol += weight * polarimetric_sample_cost(eta(alpha, phi), k);
                        }
                        None => out.diag.undefined_azimuth += 1,
                    }
                }
            }
        }
        let n = cams.len() as f64;
        out.pho /= n;
        out.pol /= n;
        out
    }
}

/// Geometric smoothness contribution of face `r` given a face-normal lookup.
#[inline]
pub(crate) fn gsm_face<F: Fn(usize) -> Option<Vec3>>(topology: &Topology, r: usize, t: f64, normal_of: &F) -> Option<f64> {
    let n = normal_of(r)?;
    let mut sum = Vec3::ZERO;
    let mut count = 0usize;
    for g in topology.face_neighbors(r).iter().flatten() {
        if let Some(m) = normal_of(*g) {
            sum += m;
            count += 1;
        }
    }
    if count == 0 {
        return Some(0.0);
    }
    let avg = (sum / count as f64).normalized()?;
    let angle = libm::acos(n.dot(avg).clamp(-1.0, 1.0));
    Some(libm::pow(angle / PI, t))
}

pub fn geometric_smoothness(topology: &Topology, positions: &[Vec3], t: f64) -> (f64, usize) {
    let normals = face_normals(topology, positions);
    gsm_from_normals(topology, &normals, t)
}

fn gsm_from_normals(topology: &Topology, normals: &[Option<Vec3>], t: f64) -> (f64, usize) {
    let lookup = |f: usize| normals[f];
    let mut sum = 0.0;
    let mut skipped = 0;
    for r in 0..topology.face_count() {
        match gsm_face(topology, r, t, &lookup) {
            Some(v) => sum += v,
            None => skipped += 1,
        }
    }
    (sum, skipped)
}

/// `sum_i sum_{j in A(i)} w_ij |K_i - K_j|^2` over directed neighbor slots.
pub fn photometric_smoothness(topology: &Topology, albedo: &[[f64; 3]], weights: &[f64]) -> f64 {
    let csr = topology.neighbor_csr();
    let mut sum = 0.0;
    for i in 0..topology.vertex_count() {
        for (slot, &j) in csr.range(i).zip(csr.get(i)) {
            sum += weights[slot] * albedo_dist2(albedo[i], albedo[j]);
        }
    }
    sum
}

#[inline]
pub(crate) fn albedo_dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

fn data_terms(problem: &Problem, state: &ParamState, with_pol: bool) -> (f64, f64, CostDiagnostics) {
    let normals = vertex_normals(problem.topology, &face_normals(problem.topology, &state.positions));
    let per_vertex = par::map_indexed(state.positions.len(), |i| {
        problem.vertex_terms(
            i,
            state.positions[i],
            normals[i],
            state.albedo[i],
            &state.illumination,
            None,
            with_pol,
        )
    });
    let mut pho = 0.0;
    let mut pol = 0.0;
    let mut diag = CostDiagnostics::default();
    for t in &per_vertex {
        pho += t.pho;
        pol += t.pol;
        diag.merge(&t.diag);
    }
    (pho, pol, diag)
}

pub fn photometric_term(problem: &Problem, state: &ParamState) -> (f64, CostDiagnostics) {
    let (pho, _, diag) = data_terms(problem, state, false);
    (pho, diag)
}

pub fn polarimetric_term(problem: &Problem, state: &ParamState) -> f64 {
    data_terms(problem, state, true).1
}

/// All four terms and their weighted total.
pub fn total_cost(problem: &Problem, state: &ParamState) -> Result<(CostBreakdown, CostDiagnostics)> {
    problem.check_state(state)?;
    let (pho, pol, mut diag) = data_terms(problem, state, true);
    let (gsm, skipped) = geometric_smoothness(problem.topology, &state.positions, problem.weights.t);
    diag.degenerate_faces = skipped;
    let psm = photometric_smoothness(problem.topology, &state.albedo, problem.psm_weights);
    Ok((CostBreakdown::new(pho, pol, gsm, psm, &problem.weights), diag))
}

/// Parameters of the photometric smoothness weights.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothnessWeightParams {
    pub sigma_chroma: f64,
    pub sigma_intensity: f64,
}

impl Default for SmoothnessWeightParams {
    fn default() -> Self {
        SmoothnessWeightParams {
            sigma_chroma: 0.05,
            sigma_intensity: 0.2,
        }
    }
}

fn chromaticity(c: [f64; 3]) -> [f64; 3] {
    let s = c[0] + c[1] + c[2];
    if s > 0.0 {
        [c[0] / s, c[1] / s, c[2] / s]
    } else {
        [0.0; 3]
    }
}

/// Weight per directed neighbor slot from the observed colors at the two
/// vertices' projections in their common cameras; 1 without a common camera.
pub fn smoothness_weights(
    topology: &Topology,
    positions: &[Vec3],
    cameras: &[Camera],
    views: &[ViewData],
    visibility: &Visibility,
    params: &SmoothnessWeightParams,
) -> Vec<f64> {
    let csr = topology.neighbor_csr();
    let mut w = alloc::vec![1.0; csr.total()];
    let sample = |v: usize, c: usize| -> Option<[f64; 3]> {
        let p = cameras[c].project(positions[v])?;
        cameras[c]
            .contains(p.x, p.y)
            .then(|| views[c].rgb.sample_bilinear_rgb(p.x, p.y))
    };
    for i in 0..topology.vertex_count() {
        for (slot, &j) in csr.range(i).zip(csr.get(i)) {
            if j < i {
                w[slot] = w[topology.reverse_neighbor(slot)];
                continue;
            }
            let (vi, vj) = (visibility.cameras(i), visibility.cameras(j));
            let mut sum = 0.0;
            let mut count = 0usize;
            for &c in vi.iter().filter(|c| vj.contains(c)) {
                let (Some(a), Some(b)) = (sample(i, c), sample(j, c)) else {
                    continue;
                };
                let (ca, cb) = (chromaticity(a), chromaticity(b));
                let dch = libm::sqrt(albedo_dist2(ca, cb)) / params.sigma_chroma;
                let dlum = ((a[0] + a[1] + a[2]) - (b[0] + b[1] + b[2])).abs() / 3.0 / params.sigma_intensity;
                sum += libm::exp(-dch * dch) * libm::exp(-dlum * dlum);
                count += 1;
            }
            if count > 0 {
                w[slot] = sum / count as f64;
            }
        }
    }
    w
}

/// Vertex normal of `i` from a face-normal lookup.
#[inline]
pub(crate) fn vertex_normal_with<F: Fn(usize) -> Option<Vec3>>(topology: &Topology, i: usize, normal_of: F) -> Option<Vec3> {
    average_normal(topology.vertex_faces(i), normal_of)
}

#[cfg(test)]
mod tests;
