use super::*;
use crate::geom::{Mat3, Vec3};
use crate::image::Plane;
use crate::mesh::tests::grid;
use crate::shading::render_vertex;
use crate::synth::{render_views, CameraRig, SyntheticScene};

fn front_camera(w: usize, f: f64, center: Vec3) -> Camera {
    // looks down +z at `center` from 4 units away
    let c = (w as f64 - 1.0) / 2.0;
    let t = Vec3::new(-center.x, -center.y, 4.0 - center.z);
    Camera::new(f, f, c, c, w, w, Mat3::IDENTITY, t).unwrap()
}

fn constant_view(w: usize, rgb: [f32; 3]) -> ViewData {
    let mut p = Plane::new(w, w, 3);
    for px in p.data_mut().chunks_exact_mut(3) {
        px.copy_from_slice(&rgb);
    }
    ViewData {
        rgb: p,
        aop: Plane::new(w, w, 1),
        dop: Plane::new(w, w, 1),
    }
}

fn seen_grid(cameras: usize) -> TriMesh {
    let mut m = grid(4, 0.25);
    m.visibility = Visibility::from_sets(vec![(0..cameras).collect(); m.vertex_count()]);
    m
}

#[test]
fn white_image_gives_white_albedo() {
    let m = seen_grid(1);
    let cams = [front_camera(32, 40.0, Vec3::new(0.5, 0.5, 0.0))];
    let views = [constant_view(32, [1.0; 3])];
    let s = initialize(&m, &views, &cams).unwrap();
    assert!(s.albedo.iter().all(|k| *k == [1.0; 3]));
    assert!(s.illumination.iter().all(|l| *l == Illumination::UNIFORM));
    assert_eq!(s.positions, m.positions);
    // uniform lighting renders the albedo itself
    let (r, _) = render_vertex([0.2, 0.5, 0.7], Vec3::new(0.0, 0.6, 0.8), &s.illumination[0]);
    assert_eq!(r, [0.2, 0.5, 0.7]);
}

#[test]
fn albedo_is_mean_over_cameras() {
    let m = seen_grid(2);
    let c = Vec3::new(0.5, 0.5, 0.0);
    let cams = [front_camera(32, 40.0, c), front_camera(32, 40.0, c)];
    let views = [constant_view(32, [0.2, 0.1, 0.0]), constant_view(32, [0.4, 0.3, 0.0])];
    let s = initialize(&m, &views, &cams).unwrap();
    for k in &s.albedo {
        assert!((k[0] - 0.3).abs() < 1e-7 && (k[1] - 0.2).abs() < 1e-7);
    }
}

#[test]
fn unseen_vertices_borrow_nearest_albedo() {
    let mut m = grid(4, 0.25);
    let mut sets = vec![Vec::new(); m.vertex_count()];
    sets[0] = vec![0];
    m.visibility = Visibility::from_sets(sets);
    let cams = [front_camera(32, 40.0, Vec3::new(0.5, 0.5, 0.0))];
    let views = [constant_view(32, [0.25, 0.5, 0.75])];
    let s = initialize(&m, &views, &cams).unwrap();
    assert!(s.albedo.iter().all(|k| *k == [0.25, 0.5, 0.75]));
}

#[test]
fn default_schedule() {
    let s = StageSchedule::default();
    assert_eq!(s.stages.len(), 3);
    let tau: Vec<_> = s.stages.iter().map(|s| (s.tau1, s.tau2, s.tau3, s.t, s.k)).collect();
    assert_eq!(
        tau,
        [(60.0, 0.1, 2.0, 2.2, 0.5), (120.0, 0.1, 2.0, 2.8, 0.5), (360.0, 0.1, 2.0, 3.4, 0.5)]
    );
    assert!(s.stages.iter().all(|s| s.max_iterations == 100 && s.convergence_tol == 1e-6));
    assert!(s.validate().is_ok());
    assert!(s.clone().with_tau1(0.0).stages.iter().all(|s| s.tau1 == 0.0));
    assert!(StageSchedule { stages: vec![] }.validate().is_err());
    let mut bad = s.clone();
    bad.stages[1].k = -1.0;
    assert!(bad.validate().is_err());
    bad = s;
    bad.stages[0].tau2 = -0.1;
    assert!(bad.validate().is_err());
}

#[test]
fn optimum_start_stays_put() {
    let m = seen_grid(1);
    let cams = [front_camera(32, 40.0, Vec3::new(0.5, 0.5, 0.0))];
    let views = [constant_view(32, [0.5, 0.4, 0.3])];
    let state = initialize(&m, &views, &cams).unwrap();
    let w = vec![1.0; m.topology().neighbor_csr().total()];
    let solver = SolverOptions::default();
    let inputs = StageInputs {
        mesh: &m,
        cameras: &cams,
        views: &views,
        visibility: &m.visibility,
        psm_weights: &w,
        solver: &solver,
        dop_weight: true,
    };
    let (out, report, _) = minimize_stage(&state, &Stage::default(), 0, &inputs).unwrap();
    assert!(report.iterations <= 2, "{report:?}");
    assert!(report.final_cost.total <= report.initial.total);
    let layout = GradientLayout::of(&state);
    let moved = layout
        .pack(&out)
        .iter()
        .zip(layout.pack(&state))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(moved < 1e-6, "{moved}");
}

fn small_scene() -> SyntheticScene {
    SyntheticScene {
        cameras: CameraRig {
            count: 6,
            focal: 60.0,
            width: 40,
            height: 40,
            ..CameraRig::default()
        },
        gt_level: 3,
        initial_level: 2,
        ..SyntheticScene::default()
    }
}

fn short_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    for s in &mut cfg.schedule.stages {
        s.max_iterations = 4;
    }
    cfg
}

#[test]
fn pipeline_descends_and_is_deterministic() {
    let ds = render_views(&small_scene()).unwrap();
    let cfg = short_config();
    let a = run_pipeline(&ds.initial_mesh, &ds.cameras, &ds.views, &cfg).unwrap();
    assert_eq!(a.report.stages.len(), 3);
    for s in &a.report.stages {
        assert!(s.final_cost.total <= s.initial.total, "{s:?}");
        assert_eq!(s.weights.tau1, cfg.schedule.stages[s.stage].tau1);
    }
    let stage_records: Vec<_> = a.report.iterations.iter().filter(|r| r.stage == 0).collect();
    assert!(stage_records.windows(2).all(|w| w[1].cost.total <= w[0].cost.total));
    let b = run_pipeline(&ds.initial_mesh, &ds.cameras, &ds.views, &cfg).unwrap();
    assert_eq!(a.mesh.positions, b.mesh.positions);
    assert_eq!(a.mesh.albedo, b.mesh.albedo);
    assert_eq!(a.report, b.report);
}

#[test]
fn zero_dop_matches_zero_tau1() {
    let ds = render_views(&small_scene()).unwrap();
    let mut cfg = short_config();
    cfg.schedule.stages.truncate(1);
    let mut flat = ds.views.clone();
    for v in &mut flat {
        v.dop.data_mut().iter_mut().for_each(|d| *d = 0.0);
    }
    let a = run_pipeline(&ds.initial_mesh, &ds.cameras, &flat, &cfg).unwrap();
    cfg.schedule = cfg.schedule.with_tau1(0.0);
    let b = run_pipeline(&ds.initial_mesh, &ds.cameras, &ds.views, &cfg).unwrap();
    assert_eq!(a.mesh.positions, b.mesh.positions);
    assert_eq!(a.illumination, b.illumination);
}

#[test]
fn single_view_completes() {
    let ds = render_views(&small_scene()).unwrap();
    let mut cfg = short_config();
    cfg.schedule.stages.truncate(1);
    let out = run_pipeline(&ds.initial_mesh, &ds.cameras[..1], &ds.views[..1], &cfg).unwrap();
    let s = &out.report.stages[0];
    assert!(s.unseen_vertices > 0);
    assert!(s.final_cost.total <= s.initial.total);
    assert!(out.mesh.positions.iter().all(|p| p.is_finite()));
}

#[test]
fn mismatched_inputs_are_rejected() {
    let ds = render_views(&small_scene()).unwrap();
    let cfg = short_config();
    assert!(run_pipeline(&ds.initial_mesh, &ds.cameras[..2], &ds.views, &cfg).is_err());
    assert!(run_pipeline(&ds.initial_mesh, &[], &[], &cfg).is_err());
    let empty = PipelineConfig {
        schedule: StageSchedule { stages: vec![] },
        ..cfg
    };
    assert!(run_pipeline(&ds.initial_mesh, &ds.cameras, &ds.views, &empty).is_err());
}
