use super::*;
use crate::geom::Mat3;
use crate::mesh::tests::grid;
use crate::mesh::{compute_visibility, TriMesh};
use crate::synth::{icosphere, sphere_cameras};
use alloc::vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn identity_camera(w: usize, h: usize, f: f64) -> Camera {
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    Camera::new(f, f, cx, cy, w, h, Mat3::IDENTITY, Vec3::ZERO).unwrap()
}

fn eta_oracle(alpha: f64, phi: f64) -> f64 {
    [-2.0 * PI, -1.5 * PI, -PI, -FRAC_PI_2, 0.0, FRAC_PI_2, PI]
        .iter()
        .map(|o| (alpha - phi + o).abs())
        .fold(f64::INFINITY, f64::min)
}

fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize, ch: usize, lo: f32, hi: f32) -> Plane {
    let data = (0..w * h * ch).map(|_| rng.random_range(lo..hi)).collect();
    Plane::from_data(w, h, ch, data).unwrap()
}

/// Small sphere seen by a few cameras with random observations.
struct Scene {
    mesh: TriMesh,
    cameras: Vec<Camera>,
    views: Vec<ViewData>,
    weights: Vec<f64>,
    state: ParamState,
}

fn random_scene(seed: u64, level: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = icosphere(level, 1.0);
    // Off-center so that no vertex projects exactly onto a pixel boundary.
    let offset = Vec3::new(0.013, -0.021, 0.017);
    for p in &mut mesh.positions {
        *p = *p * rng.random_range(0.95..1.05) + offset;
    }
    let cameras = sphere_cameras(4, 4.0, Vec3::ZERO, 40.0, 32, 32);
    mesh.visibility = compute_visibility(&mesh, &cameras);
    let views = cameras
        .iter()
        .map(|_| ViewData {
            rgb: random_plane(&mut rng, 32, 32, 3, 0.0, 1.0),
            aop: random_plane(&mut rng, 32, 32, 1, 0.0, PI as f32),
            dop: random_plane(&mut rng, 32, 32, 1, 0.0, 1.0),
        })
        .collect();
    let n = mesh.vertex_count();
    let weights = (0..mesh.topology().neighbor_csr().total()).map(|_| rng.random_range(0.0..1.0)).collect();
    let albedo = (0..n).map(|_| [rng.random_range(0.2..0.9), rng.random_range(0.2..0.9), rng.random_range(0.2..0.9)]).collect();
    let illumination = cameras
        .iter()
        .map(|_| {
            let mut l = Illumination::UNIFORM;
            for b in l.basis.iter_mut().skip(1) {
                *b = rng.random_range(-0.2..0.2);
            }
            l
        })
        .collect();
    let state = ParamState {
        positions: mesh.positions.clone(),
        albedo,
        illumination,
    };
    Scene {
        mesh,
        cameras,
        views,
        weights,
        state,
    }
}

impl Scene {
    fn problem(&self, weights: CostWeights) -> Problem<'_> {
        Problem::new(
            self.mesh.topology(),
            &self.cameras,
            &self.views,
            &self.mesh.visibility,
            &self.weights,
            weights,
        )
        .unwrap()
    }
}

#[test]
fn azimuth_convention() {
    let cam = identity_camera(8, 8, 10.0);
    assert_eq!(projected_azimuth(Vec3::new(1.0, 0.0, 0.0), &cam), Some(0.0));
    let a = projected_azimuth(Vec3::new(0.0, -1.0, 0.0), &cam).unwrap();
    assert!((a - FRAC_PI_2).abs() < 1e-15);
    let a = projected_azimuth(Vec3::new(-1.0, 0.0, 0.0), &cam).unwrap();
    assert!((a - PI).abs() < 1e-15);
    assert_eq!(projected_azimuth(Vec3::new(0.0, 0.0, -1.0), &cam), None);
}

#[test]
fn eta_examples() {
    let d = |x: f64| x.to_radians();
    assert!(eta(d(30.0), d(120.0)).abs() < 1e-12);
    for a in [d(120.0), d(210.0), d(300.0)] {
        assert!(eta(a, d(120.0)).abs() < 1e-12);
    }
    assert_eq!(eta(1.0, 1.0), 0.0);
    assert!((eta(0.3 + FRAC_PI_4, 0.3) - FRAC_PI_4).abs() < 1e-15);
}

#[test]
fn sample_cost_examples() {
    for k in [0.1, 0.5, 5.0] {
        assert_eq!(polarimetric_sample_cost(0.0, k), 0.0);
        assert!((polarimetric_sample_cost(FRAC_PI_4, k) - 1.0).abs() < 1e-15);
    }
    let e = |x: f64| libm::exp(x);
    let want = ((e(-0.25) - e(-0.5)) / (1.0 - e(-0.5))).powi(2);
    assert!((polarimetric_sample_cost(FRAC_PI_8, 0.5) - want).abs() < 1e-15);
    assert_eq!(theta(FRAC_PI_8), 0.5);
}

#[test]
fn single_vertex_photometric_cost() {
    let cam = identity_camera(16, 16, 10.0);
    let mesh = TriMesh::new(
        vec![Vec3::new(0.0, 0.0, 5.0), Vec3::new(1.0, 0.0, 5.0), Vec3::new(0.0, 1.0, 5.0)],
        vec![[0, 2, 1]],
    )
    .unwrap();
    let vis = Visibility::from_sets(vec![vec![0], vec![], vec![]]);
    let views = vec![ViewData {
        rgb: Plane::filled(16, 16, 3, 1.0),
        aop: Plane::filled(16, 16, 1, 0.0),
        dop: Plane::filled(16, 16, 1, 0.0),
    }];
    let cams = [cam];
    let w = vec![1.0; mesh.topology().neighbor_csr().total()];
    let p = Problem::new(mesh.topology(), &cams, &views, &vis, &w, CostWeights::default()).unwrap();
    let mut state = ParamState {
        positions: mesh.positions.clone(),
        albedo: vec![[0.0; 3]; 3],
        illumination: vec![Illumination::UNIFORM],
    };
    let (pho, diag) = photometric_term(&p, &state);
    assert_eq!(pho, 3.0);
    assert_eq!(diag.samples, 1);
    state.albedo[0] = [1.0; 3];
    assert_eq!(photometric_term(&p, &state).0, 0.0);
}

#[test]
fn flat_mesh_has_no_curvature_cost() {
    let m = grid(4, 0.5);
    assert_eq!(geometric_smoothness(m.topology(), &m.positions, 2.2), (0.0, 0));
}

#[test]
fn folded_pair() {
    for beta in [0.3, 1.0, 2.0] {
        let (s, c) = (libm::sin(beta), libm::cos(beta));
        let pos = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 1.0, 0.0),
            Vec3::new(0.5, -c, s),
        ];
        let m = TriMesh::new(pos, vec![[0, 1, 2], [1, 0, 3]]).unwrap();
        for t in [1.0, 2.2] {
            let (g, skipped) = geometric_smoothness(m.topology(), &m.positions, t);
            assert_eq!(skipped, 0);
            assert!((g - 2.0 * libm::pow(beta / PI, t)).abs() < 1e-12, "{beta} {t} {g}");
        }
    }
}

#[test]
fn sphere_curvature_cost_decreases_with_level() {
    let costs: Vec<f64> = (0..=6)
        .map(|l| {
            let m = icosphere(l, 1.0);
            geometric_smoothness(m.topology(), &m.positions, 2.2).0
        })
        .collect();
    // The icosahedron is perfectly regular; the first subdivisions add
    // irregularity, and from level 3 on the finer mesh wins.
    assert!(costs[0] < 1e-15);
    assert!(costs[1..].iter().all(|&c| c > 0.0), "{costs:?}");
    assert!(costs[3..].windows(2).all(|w| w[1] < w[0]), "{costs:?}");
}

#[test]
fn degenerate_faces_are_skipped() {
    let mut m = grid(2, 1.0);
    let [a, b, _] = m.faces()[0];
    m.positions[b] = m.positions[a];
    let (_, skipped) = geometric_smoothness(m.topology(), &m.positions, 2.0);
    assert!(skipped >= 1);
}

#[test]
fn photometric_smoothness_counts_both_orders() {
    let m = TriMesh::new(
        vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let ones = vec![1.0; m.topology().neighbor_csr().total()];
    let albedo = vec![[1.0; 3], [0.0; 3], [0.0; 3]];
    // 0-1 and 0-2 differ by 3 each, both directions; 1-2 agree.
    assert_eq!(photometric_smoothness(m.topology(), &albedo, &ones), 12.0);
    assert_eq!(photometric_smoothness(m.topology(), &[[0.4; 3]; 3], &ones), 0.0);
    let zeros = vec![0.0; ones.len()];
    assert_eq!(photometric_smoothness(m.topology(), &albedo, &zeros), 0.0);
}

#[test]
fn total_is_affine_in_term_weights() {
    let s = random_scene(3, 1);
    let (b, _) = total_cost(&s.problem(CostWeights::default()), &s.state).unwrap();
    assert!(b.e_pho > 0.0 && b.e_pol > 0.0 && b.e_gsm > 0.0 && b.e_psm > 0.0);
    let zero = CostWeights {
        tau1: 0.0,
        tau2: 0.0,
        tau3: 0.0,
        ..CostWeights::default()
    };
    let (z, _) = total_cost(&s.problem(zero), &s.state).unwrap();
    assert_eq!(z.total, z.e_pho);
    let doubled = CostWeights {
        tau1: 120.0,
        ..CostWeights::default()
    };
    let (d, _) = total_cost(&s.problem(doubled), &s.state).unwrap();
    assert!((d.total - b.total - 60.0 * b.e_pol).abs() < 1e-9 * b.total);
}

#[test]
fn dop_weight_off_ignores_magnitude() {
    let mut s = random_scene(4, 1);
    let off = CostWeights {
        dop_weight: false,
        ..CostWeights::default()
    };
    let before = polarimetric_term(&s.problem(off), &s.state);
    for v in &mut s.views {
        for d in v.dop.data_mut() {
            *d = (*d * 0.5).max(1e-3);
        }
    }
    assert_eq!(polarimetric_term(&s.problem(off), &s.state), before);
}

#[test]
fn smoothness_weights_are_symmetric_and_bounded() {
    let s = random_scene(5, 1);
    let topo = s.mesh.topology();
    let w = smoothness_weights(
        topo,
        &s.state.positions,
        &s.cameras,
        &s.views,
        &s.mesh.visibility,
        &SmoothnessWeightParams::default(),
    );
    for (slot, &v) in w.iter().enumerate() {
        assert!((0.0..=1.0).contains(&v));
        assert_eq!(v, w[topo.reverse_neighbor(slot)]);
    }
    let flat: Vec<ViewData> = s
        .views
        .iter()
        .map(|v| ViewData {
            rgb: Plane::filled(32, 32, 3, 0.5),
            ..v.clone()
        })
        .collect();
    let w = smoothness_weights(
        topo,
        &s.state.positions,
        &s.cameras,
        &flat,
        &s.mesh.visibility,
        &SmoothnessWeightParams::default(),
    );
    assert!(w.iter().all(|&v| v == 1.0));
}

#[test]
fn mismatched_inputs_are_rejected() {
    let s = random_scene(6, 1);
    let short = &s.weights[1..];
    assert!(Problem::new(s.mesh.topology(), &s.cameras, &s.views, &s.mesh.visibility, short, CostWeights::default()).is_err());
    assert!(Problem::new(s.mesh.topology(), &s.cameras[1..], &s.views, &s.mesh.visibility, &s.weights, CostWeights::default()).is_err());
    let bad = CostWeights {
        k: 0.0,
        ..CostWeights::default()
    };
    assert!(Problem::new(s.mesh.topology(), &s.cameras, &s.views, &s.mesh.visibility, &s.weights, bad).is_err());
    let p = s.problem(CostWeights::default());
    let mut st = s.state.clone();
    st.illumination.pop();
    assert!(total_cost(&p, &st).is_err());
}

#[test]
fn block_gradient_matches_full_cost_differences() {
    let s = random_scene(7, 2);
    let p = s.problem(CostWeights::default());
    let policy = StepPolicy::for_scene(s.mesh.bounding_box_diagonal());
    let g = numeric_cost_gradient(&p, &s.state, &policy).unwrap();
    let layout = GradientLayout::of(&s.state);
    let x = layout.pack(&s.state);
    let f = |x: &[f64]| total_cost(&p, &layout.unpack(x)).unwrap().0.total;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        let floor = if j < layout.albedo_offset() {
            policy.position_floor
        } else {
            policy.value_floor
        };
        let h = policy.step(x[j], floor);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let fd = (f(&xp) - f(&xm)) / (xp[j] - xm[j]);
        worst = worst.max((fd - g[j]).abs());
    }
    assert!(worst < 1e-4 * scale, "worst {worst} scale {scale}");
}

proptest! {
    #[test]
    fn eta_range_and_invariance(a in 0.0..2.0 * PI, f in 0.0..PI) {
        let e = eta(a, f);
        prop_assert!((0.0..=FRAC_PI_4 + 1e-15).contains(&e));
        prop_assert_eq!(e, eta_oracle(a, f));
        let a2 = crate::polarimetry::wrap_two_pi(a + FRAC_PI_2);
        let f2 = crate::polarimetry::wrap_pi(f + FRAC_PI_2);
        prop_assert!((eta(a2, f) - e).abs() < 1e-12);
        prop_assert!((eta(a, f2) - e).abs() < 1e-12);
    }

    #[test]
    fn eta_is_one_lipschitz(a in 0.0..2.0 * PI - 1e-3, f in 0.0..PI, d in 0.0..1e-3) {
        prop_assert!((eta(a + d, f) - eta(a, f)).abs() <= d + 1e-12);
    }

    #[test]
    fn sample_cost_decreases_in_theta(t1 in 0.0..1.0f64, t2 in 0.0..1.0f64, k in 0.05..8.0f64) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let e = |t: f64| (1.0 - t) * FRAC_PI_4;
        let c_lo = polarimetric_sample_cost(e(lo), k);
        let c_hi = polarimetric_sample_cost(e(hi), k);
        prop_assert!(c_hi <= c_lo + 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c_lo));
    }

    #[test]
    fn pho_is_gauge_invariant(seed in 0u64..1000, a in prop::array::uniform3(0.2f64..5.0)) {
        let s = random_scene(seed, 1);
        let p = s.problem(CostWeights::default());
        let base = photometric_term(&p, &s.state).0;
        let mut st = s.state.clone();
        for k in &mut st.albedo {
            for c in 0..3 {
                k[c] *= a[c];
            }
        }
        for l in &mut st.illumination {
            for c in 0..3 {
                l.scale[c] /= a[c];
            }
        }
        prop_assert!((photometric_term(&p, &st).0 - base).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn pol_scales_with_dop(seed in 0u64..1000, s_num in 0u32..=256) {
        let mut s = random_scene(seed, 1);
        for v in &mut s.views {
            for d in v.dop.data_mut() {
                *d = (*d * 256.0).round() / 256.0;
            }
        }
        let p = s.problem(CostWeights::default());
        let base = polarimetric_term(&p, &s.state);
        let scale = s_num as f64 / 256.0;
        let mut scaled = s.views.clone();
        for v in &mut scaled {
            for d in v.dop.data_mut() {
                *d *= scale as f32;
            }
        }
        let p = Problem { views: &scaled, ..p };
        prop_assert!((polarimetric_term(&p, &s.state) - scale * base).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn terms_are_nonnegative(seed in 0u64..1000) {
        let s = random_scene(seed, 1);
        let (b, _) = total_cost(&s.problem(CostWeights::default()), &s.state).unwrap();
        prop_assert!(b.e_pho >= 0.0 && b.e_pol >= 0.0 && b.e_gsm >= 0.0 && b.e_psm >= 0.0);
    }
}

