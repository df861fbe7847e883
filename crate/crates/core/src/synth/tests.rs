use super::*;
use crate::cost::{eta, polarimetric_term, total_cost, CostWeights, Problem, ViewData};
use crate::geom::Vec3;
use crate::mesh::compute_visibility;

fn small_scene() -> SyntheticScene {
    SyntheticScene {
        cameras: CameraRig {
            count: 5,
            focal: 50.0,
            width: 32,
            height: 32,
            ..CameraRig::default()
        },
        gt_level: 3,
        initial_level: 2,
        ..SyntheticScene::default()
    }
}

/// Largest eta between each covered pixel's AoP and the azimuth of the true
/// surface normal at that pixel.
fn worst_eta(scene: &SyntheticScene, ds: &SyntheticDataset) -> f64 {
    let tracer = Tracer::analytic(&scene.shape, 0.0);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (cam, view) in ds.cameras.iter().zip(&ds.views) {
        for row in 0..cam.height {
            for col in 0..cam.width {
                let Some(hit) = tracer.trace(cam, col, row) else { continue };
                if view.dop.get(col, row, 0) == 0.0 {
                    continue;
                }
                let alpha = projected_azimuth(hit.normal, cam).unwrap();
                worst = worst.max(eta(alpha, view.aop.get(col, row, 0) as f64));
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
    worst
}

#[test]
fn aop_matches_true_normals() {
    let mut scene = small_scene();
    scene.polarization.dop_scale = 1.0;
    let ds = render_views(&scene).unwrap();
    assert!(worst_eta(&scene, &ds) < 1e-6);
}

#[test]
fn specular_flips_stay_on_a_candidate() {
    let mut scene = small_scene();
    scene.polarization.specular_fraction = 1.0;
    let ds = render_views(&scene).unwrap();
    assert!(worst_eta(&scene, &ds) < 1e-6);
    // the flipped AoP differs from the unflipped one by pi/2
    scene.polarization.specular_fraction = 0.0;
    let plain = render_views(&scene).unwrap();
    let (a, b) = (&ds.views[0], &plain.views[0]);
    let mut flipped = 0;
    for i in 0..a.aop.data().len() {
        if a.dop.data()[i] > 0.0 {
            let d = (a.aop.data()[i] as f64 - b.aop.data()[i] as f64).abs();
            assert!((d - FRAC_PI_2).abs() < 1e-5, "{d}");
            flipped += 1;
        }
    }
    assert!(flipped > 0);
}

#[test]
fn noise_moves_aop() {
    let mut scene = small_scene();
    scene.polarization.aop_noise_sigma = 3f64.to_radians();
    let ds = render_views(&scene).unwrap();
    let w = worst_eta(&scene, &ds);
    assert!(w > 1e-3 && w <= core::f64::consts::FRAC_PI_4);
}

#[test]
fn unpolarized_scene() {
    let mut scene = small_scene();
    scene.polarization.dop_scale = 0.0;
    let ds = render_views(&scene).unwrap();
    assert!(ds.views.iter().all(|v| v.dop.data().iter().all(|&d| d == 0.0)));
    let mut mesh = ds.initial_mesh.clone();
    mesh.visibility = compute_visibility(&mesh, &ds.cameras);
    let views: Vec<ViewData> = ds.views.iter().map(|v| ViewData::from_set(v, false)).collect();
    let w = vec![1.0; mesh.topology().neighbor_csr().total()];
    let p = Problem::new(mesh.topology(), &ds.cameras, &views, &mesh.visibility, &w, CostWeights::default()).unwrap();
    assert_eq!(polarimetric_term(&p, &scene.ground_truth_state(&mesh)), 0.0);
    // the unpolarized RGB does not depend on the DoP scale
    let polarized = render_views(&small_scene()).unwrap();
    for (a, b) in ds.views.iter().zip(&polarized.views) {
        assert_eq!(a.rgb_min, b.rgb_min);
    }
}

#[test]
fn planes_respect_ranges() {
    let mut scene = small_scene();
    scene.polarization.aop_noise_sigma = 0.3;
    scene.polarization.specular_fraction = 0.5;
    let ds = render_views(&scene).unwrap();
    for v in &ds.views {
        assert!(v.dop.data().iter().all(|&d| (0.0..=1.0).contains(&d)));
        assert!(v.aop.data().iter().all(|&a| (0.0..core::f32::consts::PI).contains(&a)));
    }
}

#[test]
fn rendering_is_deterministic() {
    let mut scene = small_scene();
    scene.polarization.aop_noise_sigma = 0.1;
    scene.polarization.specular_fraction = 0.3;
    let a = render_views(&scene).unwrap();
    let b = render_views(&scene).unwrap();
    assert_eq!(a.views, b.views);
    assert_eq!(a.initial_mesh.positions, b.initial_mesh.positions);
    scene.seed = 2;
    let c = render_views(&scene).unwrap();
    assert_ne!(a.views[0].aop, c.views[0].aop);
}

#[test]
fn ground_truth_is_photometrically_consistent() {
    let scene = SyntheticScene::default();
    let ds = render_views(&scene).unwrap();
    let mut gt = ds.gt_mesh.clone();
    gt.visibility = compute_visibility(&gt, &ds.cameras);
    let views: Vec<ViewData> = ds.views.iter().map(|v| ViewData::from_set(v, false)).collect();
    let w = vec![1.0; gt.topology().neighbor_csr().total()];
    let p = Problem::new(gt.topology(), &ds.cameras, &views, &gt.visibility, &w, CostWeights::default()).unwrap();
    let (b, _) = total_cost(&p, &scene.ground_truth_state(&gt)).unwrap();
    let pixels = (scene.cameras.count * scene.cameras.width * scene.cameras.height) as f64;
    assert!(b.e_pho <= 1e-6 * pixels, "{b:?}");
}

#[test]
fn perturbation_statistics() {
    let base = icosphere(4, 1.0);
    assert_eq!(perturb_mesh(&base, 0.0, 9).unwrap().positions, base.positions);
    let a = perturb_mesh(&base, 0.02, 9).unwrap();
    let b = perturb_mesh(&base, 0.02, 9).unwrap();
    assert_eq!(a.positions, b.positions);
    assert_ne!(a.positions, perturb_mesh(&base, 0.02, 10).unwrap().positions);
    let diag = base.bounding_box_diagonal();
    let ms = a.positions.iter().map(|p| (p.norm() - 1.0).powi(2)).sum::<f64>() / a.vertex_count() as f64;
    let rms = libm::sqrt(ms);
    assert!((rms / (0.02 * diag) - 1.0).abs() < 0.1, "{rms}");
    assert!(perturb_mesh(&base, -1.0, 9).is_err());
}

#[test]
fn cameras_surround_the_shape() {
    let cams = sphere_cameras(20, 4.0, Vec3::ZERO, 200.0, 128, 128);
    assert_eq!(cams.len(), 20);
    let mut mean = Vec3::ZERO;
    for c in &cams {
        assert!((c.center().norm() - 4.0).abs() < 1e-12);
        let p = c.project(Vec3::ZERO).unwrap();
        assert!((p.x - 63.5).abs() < 1e-9 && (p.y - 63.5).abs() < 1e-9);
        mean += c.center() / 20.0;
    }
    assert!(mean.norm() < 0.5);
}

#[test]
fn invalid_scenes_are_rejected() {
    let mut s = small_scene();
    s.polarization.dop_scale = 1.5;
    assert!(render_views(&s).is_err());
    let mut s = small_scene();
    s.cameras.count = 0;
    assert!(render_views(&s).is_err());
    let mut s = small_scene();
    s.shape = Shape::Sphere {
        center: [0.0; 3],
        radius: -1.0,
    };
    assert!(render_views(&s).is_err());
}
