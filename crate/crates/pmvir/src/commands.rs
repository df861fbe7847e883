//! The four commands as library functions.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use pmvir_core::eval::{albedo_rmse, geometry_errors, illumination_rmse, AlbedoReport};
use pmvir_core::optimizer::{run_pipeline, IterationRecord, PipelineOutput, SolverReport, StageReport};
use pmvir_core::polarimetry::demosaic;
use pmvir_core::synth::{render_views, SyntheticScene};

use crate::config::{read_json, to_json, DecodeConfig, FileRole, RefineConfig};
use crate::dataset::{
    create_dir, list_views, read_albedo_truth, read_cameras, read_illumination, read_views, view_dir, write_synthetic,
    write_text, write_view, IlluminationFile,
};
use crate::error::{Error, Result};
use crate::formats::{self, pfm, ply, png16};
use crate::manifest::RunManifest;

pub const MANIFEST: &str = "manifest.json";
pub const REFINED_MESH: &str = "refined_mesh.ply";
pub const ILLUMINATION: &str = "illumination.json";
pub const SOLVER_REPORT: &str = "solver_report.json";
pub const REPORT_LINES: &str = "report.jsonl";

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let p = dir.join(MANIFEST);
    write_text(&p, &to_json(manifest))?;
    Ok(p)
}

/// Loads a scene description; `None` gives the default sphere scene.
pub fn load_scene(path: Option<&Path>) -> Result<SyntheticScene> {
    let scene = match path {
        Some(p) => read_json(p, FileRole::Config)?,
        None => SyntheticScene::default(),
    };
    scene.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(scene)
}

pub fn synth(scene: &SyntheticScene, scene_path: Option<&Path>, out_dir: &Path) -> Result<RunManifest> {
    scene.validate().map_err(|e| Error::Config(e.to_string()))?;
    let ds = render_views(scene)?;
    let written = write_synthetic(out_dir, scene, &ds)?;
    let mut manifest = RunManifest::new("synth", &to_json(scene));
    if let Some(p) = scene_path {
        manifest.add_input(p)?;
    }
    manifest.add_outputs(&written);
    write_manifest(out_dir, &manifest)?;
    log::info!("wrote {} views to {}", ds.views.len(), out_dir.display());
    Ok(manifest)
}

/// Raw mosaics in `raw_dir` (`.pfm` or `.png`), sorted by file name.
pub fn list_raw(raw_dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(raw_dir).map_err(|e| Error::io(raw_dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(raw_dir, e))?.path();
        let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pfm" | "png")) && p.is_file() {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::format(raw_dir, "no .pfm or .png raw mosaics found"));
    }
    Ok(files)
}

pub fn decode(raw_dir: &Path, config: &DecodeConfig, pattern_path: Option<&Path>, out_dir: &Path) -> Result<RunManifest> {
    let files = list_raw(raw_dir)?;
    let mut manifest = RunManifest::new("decode", &config.to_json());
    if let Some(p) = pattern_path {
        manifest.add_input(p)?;
    }
    let views = out_dir.join("views");
    for (i, file) in files.iter().enumerate() {
        let raw = if file.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            png16::read(file, config.linearize)?
        } else {
            pfm::read(file)?
        };
        if raw.channels() != 1 {
            return Err(Error::format(file, "raw mosaic must have one channel"));
        }
        let (set, stats) = demosaic(&raw, &config.pattern).map_err(|e| Error::format(file, e.to_string()))?;
        if stats.undefined > 0 || stats.clamped > 0 {
            log::warn!(
                "{}: {} pixels without polarization, {} clamped DoP",
                file.display(),
                stats.undefined,
                stats.clamped
            );
        }
        manifest.add_input(file)?;
        let written = write_view(&view_dir(&views, i), &set)?;
        manifest.add_outputs(&written);
    }
    write_manifest(out_dir, &manifest)?;
    Ok(manifest)
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ReportLine<'a> {
    Iteration(&'a IterationRecord),
    Stage(&'a StageReport),
}

/// One JSON object per line: each stage's iterations followed by its summary.
pub fn report_lines(report: &SolverReport) -> String {
    let mut out = String::new();
    for stage in &report.stages {
        for rec in report.iterations.iter().filter(|r| r.stage == stage.stage) {
            out += &serde_json::to_string(&ReportLine::Iteration(rec)).expect("plain data serializes");
            out.push('\n');
        }
        out += &serde_json::to_string(&ReportLine::Stage(stage)).expect("plain data serializes");
        out.push('\n');
    }
    out
}

/// Writes the refined mesh, illumination and solver reports.
pub fn write_refine_outputs(out_dir: &Path, out: &PipelineOutput, encoding: ply::Encoding) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let mesh = out_dir.join(REFINED_MESH);
    ply::write_mesh(&mesh, &out.mesh, encoding)?;
    let illum = out_dir.join(ILLUMINATION);
    write_text(
        &illum,
        &to_json(&IlluminationFile {
            illumination: out.illumination.clone(),
        }),
    )?;
    let report = out_dir.join(SOLVER_REPORT);
    write_text(&report, &to_json(&out.report))?;
    let lines = out_dir.join(REPORT_LINES);
    write_text(&lines, &report_lines(&out.report))?;
    Ok(vec![mesh, illum, report, lines])
}

pub fn refine(config: &RefineConfig, config_path: Option<&Path>) -> Result<RunManifest> {
    let pipeline = config.pipeline()?;
    let (images, cameras_path, mesh_path, out_dir) = (
        config.path("images")?,
        config.path("cameras")?,
        config.path("initial_mesh")?,
        config.path("output_dir")?,
    );
    let mut manifest = RunManifest::new("refine", &to_json(config));
    if let Some(p) = config_path {
        manifest.add_input(p)?;
    }
    let cameras = read_cameras(cameras_path)?;
    manifest.add_input(cameras_path)?;
    let mesh = formats::read_mesh(mesh_path)?;
    manifest.add_input(mesh_path)?;
    let views = read_views(images)?;
    for dir in list_views(images)? {
        let mut planes: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "pfm"))
            .collect();
        planes.sort();
        for p in planes {
            manifest.add_input(&p)?;
        }
    }
    if views.len() != cameras.len() {
        return Err(Error::format(
            images,
            format!("{} views for {} cameras", views.len(), cameras.len()),
        ));
    }
    for (i, (v, c)) in views.iter().zip(&cameras).enumerate() {
        if (v.width, v.height) != (c.width, c.height) {
            return Err(Error::format(
                images,
                format!("view {i} is {}x{} but camera {i} is {}x{}", v.width, v.height, c.width, c.height),
            ));
        }
    }
    let start = Instant::now();
    let out = run_pipeline(&mesh, &cameras, &views, &pipeline)?;
    log::info!("refinement took {:.1} s", start.elapsed().as_secs_f64());
    let written = write_refine_outputs(out_dir, &out, config.ply_encoding)?;
    manifest.add_outputs(&written);
    manifest.stages = out.report.stages.clone();
    let m = out_dir.join(MANIFEST);
    manifest.add_outputs(&[&m]);
    write_manifest(out_dir, &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub estimate: PathBuf,
    pub ground_truth: PathBuf,
    /// Synthetic dataset providing cameras and ground-truth albedo maps.
    pub dataset: Option<PathBuf>,
    pub illumination: Option<PathBuf>,
    /// Defaults to `gt_illumination.json` inside the dataset.
    pub gt_illumination: Option<PathBuf>,
    pub fix_gauge: bool,
    /// PLY of the estimate with per-vertex accuracy distance as quality.
    pub error_map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub completeness: f64,
    pub estimated_points: usize,
    pub ground_truth_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub albedo: Option<AlbedoReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub illumination_rmse: Option<f64>,
}

/// Cube-map face resolution used for illumination RMSE.
pub const CUBE_MAP_RESOLUTION: usize = 64;

pub fn eval(opts: &EvalOptions) -> Result<EvalReport> {
    let est = ply::read(&opts.estimate)?;
    let gt = ply::read(&opts.ground_truth)?;
    let geo = geometry_errors(&est.positions, &gt.positions)?;
    let mut report = EvalReport {
        accuracy: geo.accuracy,
        completeness: geo.completeness,
        estimated_points: est.positions.len(),
        ground_truth_points: gt.positions.len(),
        albedo: None,
        illumination_rmse: None,
    };
    if let Some(path) = &opts.error_map {
        let map = ply::PlyMesh {
            quality: Some(geo.accuracy_distances.clone()),
            ..est.clone()
        };
        ply::write(path, &map, ply::Encoding::BinaryLittleEndian)?;
    }
    let mut gauge = 1.0;
    if let Some(ds) = &opts.dataset {
        let cameras = read_cameras(&ds.join("cameras.json"))?;
        let mut maps = Vec::new();
        let mut coverage = Vec::new();
        let views = ds.join("views");
        for i in 0..cameras.len() {
            let dir = view_dir(&views, i);
            let (a, c) = read_albedo_truth(&dir)?.ok_or_else(|| Error::format(&dir, "no albedo.pfm/coverage.pfm ground truth"))?;
            maps.push(a);
            coverage.push(c);
        }
        let mesh = est.clone().into_mesh().map_err(|e| Error::format(&opts.estimate, e.to_string()))?;
        let r = albedo_rmse(mesh.topology(), &mesh.positions, &mesh.albedo, &cameras, &maps, &coverage, opts.fix_gauge)?;
        if r.skipped_views > 0 {
            log::warn!("{} views had no visible vertices and were skipped", r.skipped_views);
        }
        gauge = r.gauge;
        report.albedo = Some(r);
    }
    if let Some(path) = &opts.illumination {
        let gt_path = match (&opts.gt_illumination, &opts.dataset) {
            (Some(p), _) => p.clone(),
            (None, Some(ds)) => ds.join("gt_illumination.json"),
            (None, None) => return Err(Error::Config("illumination RMSE needs --gt-illumination or --dataset".into())),
        };
        let est_l = read_illumination(path)?;
        let gt_l = read_illumination(&gt_path)?;
        report.illumination_rmse = Some(illumination_rmse(&est_l, &gt_l, CUBE_MAP_RESOLUTION, gauge)?);
    }
    Ok(report)
}
