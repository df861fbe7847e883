//! On-disk dataset layout.
//!
//! ```text
//! out_dir/
//!   cameras.json  scene.json  gt_mesh.ply  initial_mesh.ply  gt_illumination.json
//!   views/view_000/{i0,i45,i90,i135,rgb_int,rgb_min,aop,dop}.pfm
//!                  {albedo,coverage}.pfm   (synthetic ground truth, optional)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pmvir_core::image::Plane;
use pmvir_core::mesh::Camera;
use pmvir_core::polarimetry::PolarizationImageSet;
use pmvir_core::shading::Illumination;
use pmvir_core::synth::{SyntheticDataset, SyntheticScene};

use crate::config::{read_json, to_json, FileRole};
use crate::error::{Error, Result};
use crate::formats::ply::{self, Encoding};
use crate::formats::pfm;

pub const DIRECTION_NAMES: [&str; 4] = ["i0", "i45", "i90", "i135"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamerasFile {
    pub cameras: Vec<Camera>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationFile {
    /// One entry per view, in view order.
    pub illumination: Vec<Illumination>,
}

pub fn view_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("view_{index:03}"))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_cameras(path: &Path) -> Result<Vec<Camera>> {
    let file: CamerasFile = read_json(path, FileRole::Data)?;
    for (i, c) in file.cameras.iter().enumerate() {
        c.validate().map_err(|e| Error::format(path, format!("camera {i}: {e}")))?;
    }
    Ok(file.cameras)
}

pub fn read_illumination(path: &Path) -> Result<Vec<Illumination>> {
    Ok(read_json::<IlluminationFile>(path, FileRole::Data)?.illumination)
}

/// Writes the eight planes of a view; returns the written paths.
pub fn write_view(dir: &Path, set: &PolarizationImageSet) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let named = DIRECTION_NAMES
        .iter()
        .zip(&set.directions)
        .map(|(n, p)| (*n, p))
        .chain([("rgb_int", &set.rgb_int), ("rgb_min", &set.rgb_min), ("aop", &set.aop), ("dop", &set.dop)]);
    let mut written = Vec::new();
    for (name, plane) in named {
        let path = dir.join(format!("{name}.pfm"));
        pfm::write(&path, plane)?;
        written.push(path);
    }
    Ok(written)
}

/// Loads one view. When the derived planes are absent they are recomputed
/// from the four direction planes.
pub fn read_view(dir: &Path) -> Result<PolarizationImageSet> {
    let load = |name: &str| pfm::read(&dir.join(format!("{name}.pfm")));
    let directions = [load("i0")?, load("i45")?, load("i90")?, load("i135")?];
    let derived = ["rgb_int", "rgb_min", "aop", "dop"];
    if derived.iter().all(|n| dir.join(format!("{n}.pfm")).exists()) {
        let set = PolarizationImageSet::from_parts(directions, load("rgb_int")?, load("rgb_min")?, load("aop")?, load("dop")?)
            .map_err(|e| Error::format(dir, e.to_string()))?;
        let shapes = [(&set.rgb_int, 3), (&set.rgb_min, 3), (&set.aop, 1), (&set.dop, 1)];
        if let Some((_, c)) = shapes.iter().find(|(p, c)| p.channels() != *c) {
            return Err(Error::format(dir, format!("a derived plane should have {c} channels")));
        }
        Ok(set)
    } else {
        let (set, _) = PolarizationImageSet::from_directions(directions).map_err(|e| Error::format(dir, e.to_string()))?;
        Ok(set)
    }
}

/// Sorted `view_NNN` subdirectories of `images`.
pub fn list_views(images: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(images).map_err(|e| Error::io(images, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(images, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("view_") && entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn read_views(images: &Path) -> Result<Vec<PolarizationImageSet>> {
    list_views(images)?.iter().map(|d| read_view(d)).collect()
}

/// Ground-truth albedo map and coverage mask of a synthetic view, if present.
pub fn read_albedo_truth(view: &Path) -> Result<Option<(Plane, Plane)>> {
    let (a, c) = (view.join("albedo.pfm"), view.join("coverage.pfm"));
    if !a.exists() || !c.exists() {
        return Ok(None);
    }
    Ok(Some((pfm::read(&a)?, pfm::read(&c)?)))
}

/// Writes a rendered synthetic dataset; returns every written path.
pub fn write_synthetic(out_dir: &Path, scene: &SyntheticScene, ds: &SyntheticDataset) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let mut written = Vec::new();
    let mut text = |name: &str, body: String| -> Result<()> {
        let p = out_dir.join(name);
        write_text(&p, &body)?;
        written.push(p);
        Ok(())
    };
    text(
        "cameras.json",
        to_json(&CamerasFile {
            cameras: ds.cameras.clone(),
        }),
    )?;
    text("scene.json", to_json(scene))?;
    text(
        "gt_illumination.json",
        to_json(&IlluminationFile {
            illumination: ds.gt_illumination.clone(),
        }),
    )?;
    for (name, mesh) in [("gt_mesh.ply", &ds.gt_mesh), ("initial_mesh.ply", &ds.initial_mesh)] {
        let p = out_dir.join(name);
        ply::write_mesh(&p, mesh, Encoding::BinaryLittleEndian)?;
        written.push(p);
    }
    let views = out_dir.join("views");
    for (i, set) in ds.views.iter().enumerate() {
        let dir = view_dir(&views, i);
        written.extend(write_view(&dir, set)?);
        for (name, plane) in [("albedo.pfm", &ds.albedo_maps[i]), ("coverage.pfm", &ds.coverage[i])] {
            let p = dir.join(name);
            pfm::write(&p, plane)?;
            written.push(p);
        }
    }
    Ok(written)
}
