//! Central-difference gradient of the total cost, evaluated block by block:
//! each probe only recomputes the terms its parameter can touch.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{albedo_dist2, gsm_face, vertex_normal_with, ParamState, Problem};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{face_normals, vertex_normals};
use crate::par;
use crate::shading::{render_vertex, Illumination};

/// Step sizes `h = relative * max(|x|, floor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub relative: f64,
    /// Floor for vertex coordinates, in scene units.
    pub position_floor: f64,
    /// Floor for albedo and illumination parameters.
    pub value_floor: f64,
}

impl StepPolicy {
    /// Defaults for a scene with bounding-box diagonal `diag`.
    pub fn for_scene(diag: f64) -> Self {
        StepPolicy {
            relative: 1e-6,
            position_floor: 1e-4 * diag,
            value_floor: 1e-4,
        }
    }

    #[inline]
    pub fn step(&self, x: f64, floor: f64) -> f64 {
        self.relative * x.abs().max(floor)
    }
}

/// Flat parameter layout: `[positions 3m | albedo 3m | illumination 12n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientLayout {
    pub vertices: usize,
    pub images: usize,
}

impl GradientLayout {
    pub fn of(state: &ParamState) -> Self {
        GradientLayout {
            vertices: state.positions.len(),
            images: state.illumination.len(),
        }
    }

    pub fn len(&self) -> usize {
        6 * self.vertices + 12 * self.images
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn albedo_offset(&self) -> usize {
        3 * self.vertices
    }

    pub fn illumination_offset(&self) -> usize {
        6 * self.vertices
    }

    pub fn pack(&self, state: &ParamState) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        for p in &state.positions {
            x.extend_from_slice(&p.to_array());
        }
        for k in &state.albedo {
            x.extend_from_slice(k);
        }
        for l in &state.illumination {
            x.extend_from_slice(&l.to_params());
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> ParamState {
        let m = self.vertices;
        ParamState {
            positions: x[..3 * m].chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
            albedo: x[3 * m..6 * m].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            illumination: x[6 * m..].chunks_exact(12).map(Illumination::from_params).collect(),
        }
    }
}

/// Central difference, falling back to a one-sided difference when one probe
/// is not finite.
fn difference<F: Fn(f64) -> f64>(x: f64, h: f64, f: F) -> Option<f64> {
    let (xp, xm) = (x + h, x - h);
    let (fp, fm) = (f(xp), f(xm));
    match (fp.is_finite(), fm.is_finite()) {
        (true, true) => Some((fp - fm) / (xp - xm)),
        (true, false) => {
            let f0 = f(x);
            f0.is_finite().then(|| (fp - f0) / (xp - x))
        }
        (false, true) => {
            let f0 = f(x);
            f0.is_finite().then(|| (f0 - fm) / (x - xm))
        }
        (false, false) => None,
    }
}

struct Observation {
    vertex: usize,
    rgb: [f64; 3],
    normal: Vec3,
    inv_count: f64,
}

/// Gradient of the total cost in the flat layout of [`GradientLayout`].
pub fn numeric_cost_gradient(problem: &Problem, state: &ParamState, policy: &StepPolicy) -> Result<Vec<f64>> {
    problem.check_state(state)?;
    let topo = problem.topology;
    let w = problem.weights;
    let layout = GradientLayout::of(state);
    let m = layout.vertices;
    let base_faces = face_normals(topo, &state.positions);
    let base_normals = vertex_normals(topo, &base_faces);

    let positions = par::map_indexed(m, |v| -> Result<[f64; 3]> {
        let faces1 = topo.vertex_faces(v);
        let mut faces2: Vec<usize> = faces1.to_vec();
        for &f in faces1 {
            faces2.extend(topo.face_neighbors(f).iter().flatten());
        }
        faces2.sort_unstable();
        faces2.dedup();
        let base = state.positions[v];
        let local = |p: Vec3| -> f64 {
            let nf1: Vec<Option<Vec3>> = faces1
                .iter()
                .map(|&f| {
                    let [a, b, c] = topo.face(f);
                    let at = |i: usize| if i == v { p } else { state.positions[i] };
                    crate::mesh::triangle_normal(at(a), at(b), at(c))
                })
                .collect();
            let lookup = |f: usize| match faces1.iter().position(|&g| g == f) {
                Some(k) => nf1[k],
                None => base_faces[f],
            };
            let mut e = 0.0;
            for i in core::iter::once(v).chain(topo.neighbors(v).iter().copied()) {
                let n = vertex_normal_with(topo, i, lookup);
                let (pos, anchor) = if i == v { (p, Some(base)) } else { (state.positions[i], None) };
                let t = problem.vertex_terms(i, pos, n, state.albedo[i], &state.illumination, anchor, true);
                e += t.pho + w.tau1 * t.pol;
            }
            if w.tau2 != 0.0 {
                for &r in &faces2 {
                    if let Some(g) = gsm_face(topo, r, w.t, &lookup) {
                        e += w.tau2 * g;
                    }
                }
            }
            e
        };
        let mut g = [0.0; 3];
        for (axis, out) in g.iter_mut().enumerate() {
            let x = base.component(axis);
            let h = policy.step(x, policy.position_floor);
            *out = difference(x, h, |xv| local(base.with_component(axis, xv)))
                .ok_or_else(|| Error::NonFiniteCost(format!("position of vertex {v}")))?;
        }
        Ok(g)
    });

    let csr = topo.neighbor_csr();
    let albedo = par::map_indexed(m, |v| -> Result<[f64; 3]> {
        let local = |k: [f64; 3]| -> f64 {
            let t = problem.vertex_terms(
                v,
                state.positions[v],
                base_normals[v],
                k,
                &state.illumination,
                None,
                false,
            );
            let mut psm = 0.0;
            for (slot, &j) in csr.range(v).zip(csr.get(v)) {
                let wij = problem.psm_weights[slot] + problem.psm_weights[topo.reverse_neighbor(slot)];
                psm += wij * albedo_dist2(k, state.albedo[j]);
            }
            t.pho + w.tau3 * psm
        };
        let base = state.albedo[v];
        let mut g = [0.0; 3];
        for (ch, out) in g.iter_mut().enumerate() {
            let h = policy.step(base[ch], policy.value_floor);
            *out = difference(base[ch], h, |x| {
                let mut k = base;
                k[ch] = x;
                local(k)
            })
            .ok_or_else(|| Error::NonFiniteCost(format!("albedo of vertex {v}")))?;
        }
        Ok(g)
    });

    let mut per_camera: Vec<Vec<Observation>> = (0..layout.images).map(|_| Vec::new()).collect();
    for v in 0..m {
        let cams = problem.visibility.cameras(v);
        let Some(normal) = base_normals[v] else { continue };
        let inv_count = 1.0 / cams.len() as f64;
        for &c in cams {
            let cam = &problem.cameras[c];
            let Some(p) = cam.project(state.positions[v]) else { continue };
            if !cam.contains(p.x, p.y) {
                continue;
            }
            per_camera[c].push(Observation {
                vertex: v,
                rgb: problem.views[c].rgb.sample_bilinear_rgb(p.x, p.y),
                normal,
                inv_count,
            });
        }
    }
    let illumination = par::map_indexed(layout.images, |c| -> Result<[f64; 12]> {
        let obs = &per_camera[c];
        let local = |l: &Illumination| -> f64 {
            obs.iter()
                .map(|o| {
                    let (r, _) = render_vertex(state.albedo[o.vertex], o.normal, l);
                    let d = [o.rgb[0] - r[0], o.rgb[1] - r[1], o.rgb[2] - r[2]];
                    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) * o.inv_count
                })
                .sum()
        };
        let base = state.illumination[c];
        let mut g = [0.0; 12];
        for (i, out) in g.iter_mut().enumerate() {
            let x = base.param(i);
            let h = policy.step(x, policy.value_floor);
            *out = difference(x, h, |xv| local(&base.with_param(i, xv)))
                .ok_or_else(|| Error::NonFiniteCost(format!("illumination of image {c}")))?;
        }
        Ok(g)
    });

    let mut grad = vec![0.0; layout.len()];
    for (v, g) in positions.into_iter().enumerate() {
        grad[3 * v..3 * v + 3].copy_from_slice(&g?);
    }
    let off = layout.albedo_offset();
    for (v, g) in albedo.into_iter().enumerate() {
        grad[off + 3 * v..off + 3 * v + 3].copy_from_slice(&g?);
    }
    let off = layout.illumination_offset();
    for (c, g) in illumination.into_iter().enumerate() {
        grad[off + 12 * c..off + 12 * c + 12].copy_from_slice(&g?);
    }
    Ok(grad)
}
