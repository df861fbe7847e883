//! JSON configuration files and command-line overrides.
//!
//! Values resolve in the order command line, then file, then built-in
//! defaults. Relative paths inside a file are taken relative to the file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pmvir_core::cost::SmoothnessWeightParams;
use pmvir_core::optimizer::{PipelineConfig, SolverOptions, Stage, StageSchedule, SubdivisionConfig};
use pmvir_core::polarimetry::{ColorFilter, MosaicPattern, PatternCell, PolarizerAngle};

use crate::error::{Error, Result};
use crate::formats::ply::Encoding;

/// Which error class a JSON file belongs to when it cannot be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileRole {
    /// Configuration: unreadable or malformed files are configuration errors.
    Config,
    /// Input data: unreadable or malformed files are I/O errors.
    Data,
}

pub fn read_json<T: DeserializeOwned>(path: &Path, role: FileRole) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| match role {
        FileRole::Config => Error::Config(format!("{}: {e}", path.display())),
        FileRole::Data => Error::io(path, e),
    })?;
    parse_json(&text, path, role)
}

pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path, role: FileRole) -> Result<T> {
    serde_json::from_str(text).map_err(|e| match role {
        FileRole::Config => Error::ConfigSyntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
        FileRole::Data => Error::format(path, e.to_string()),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Directory holding `view_%03d` subdirectories.
    pub images: Option<PathBuf>,
    pub cameras: Option<PathBuf>,
    pub initial_mesh: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Paths {
    fn resolve_against(&mut self, base: &Path) {
        for p in [&mut self.images, &mut self.cameras, &mut self.initial_mesh, &mut self.output_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Solver section: method options plus limits applied to every stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    #[serde(flatten)]
    pub options: SolverOptions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub stages: Vec<Stage>,
    pub subdivision: SubdivisionConfig,
    pub solver: SolverSection,
    pub smoothness: SmoothnessWeightParams,
    pub use_intensity: bool,
    pub no_dop_weight: bool,
    pub ply_encoding: Encoding,
    pub paths: Paths,
}

impl Default for RefineConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        RefineConfig {
            stages: p.schedule.stages,
            subdivision: p.subdivision,
            solver: SolverSection {
                options: p.solver,
                ..SolverSection::default()
            },
            smoothness: p.smoothness,
            use_intensity: p.use_intensity,
            no_dop_weight: p.no_dop_weight,
            ply_encoding: Encoding::default(),
            paths: Paths::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefineOverrides {
    pub tau1: Option<f64>,
    pub no_dop_weight: bool,
    pub use_intensity: bool,
    pub max_iterations: Option<usize>,
    pub images: Option<PathBuf>,
    pub cameras: Option<PathBuf>,
    pub initial_mesh: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl RefineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RefineConfig = read_json(path, FileRole::Config)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.resolve_against(base);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &RefineOverrides) {
        if let Some(t) = o.tau1 {
            self.stages.iter_mut().for_each(|s| s.tau1 = t);
        }
        self.no_dop_weight |= o.no_dop_weight;
        self.use_intensity |= o.use_intensity;
        if o.max_iterations.is_some() {
            self.solver.max_iterations = o.max_iterations;
        }
        let paths = [
            (&mut self.paths.images, &o.images),
            (&mut self.paths.cameras, &o.cameras),
            (&mut self.paths.initial_mesh, &o.initial_mesh),
            (&mut self.paths.output_dir, &o.output_dir),
        ];
        for (dst, src) in paths {
            if let Some(p) = src {
                *dst = Some(p.clone());
            }
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut stages = self.stages.clone();
        for s in &mut stages {
            if let Some(n) = self.solver.max_iterations {
                s.max_iterations = n;
            }
            if let Some(t) = self.solver.tol {
                s.convergence_tol = t;
            }
        }
        let schedule = StageSchedule { stages };
        schedule.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.subdivision.max_pixel_area > 0.0) {
            return Err(Error::Config("subdivision.max_pixel_area must be positive".into()));
        }
        Ok(PipelineConfig {
            schedule,
            subdivision: self.subdivision,
            solver: self.solver.options,
            smoothness: self.smoothness,
            use_intensity: self.use_intensity,
            no_dop_weight: self.no_dop_weight,
        })
    }

    pub fn path(&self, name: &str) -> Result<&Path> {
        let p = match name {
            "images" => &self.paths.images,
            "cameras" => &self.paths.cameras,
            "initial_mesh" => &self.paths.initial_mesh,
            "output_dir" => &self.paths.output_dir,
            _ => unreachable!("unknown path key {name}"),
        };
        p.as_deref().ok_or_else(|| Error::Config(format!("paths.{name} is not set")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEntry {
    pub row: usize,
    pub col: usize,
    pub color: ColorFilter,
    pub angle: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum PatternFile {
    Table(Vec<CellEntry>),
    Object {
        #[serde(default)]
        preset: Option<String>,
        #[serde(default)]
        cells: Option<Vec<CellEntry>>,
        #[serde(default)]
        linearize: bool,
    },
}

/// Sensor mosaic layout and raw-value handling for `decode`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub pattern: MosaicPattern,
    /// Treat 8/16-bit PNG values as sRGB-encoded.
    pub linearize: bool,
}

impl DecodeConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let file: PatternFile = read_json(path, FileRole::Config)?;
        Self::from_file(file).map_err(|m| Error::Config(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: PatternFile = parse_json(text, Path::new("<pattern>"), FileRole::Config)?;
        Self::from_file(file).map_err(Error::Config)
    }

    /// Canonical form: the explicit 16-cell table.
    pub fn to_json(&self) -> String {
        let cells = self
            .pattern
            .cells()
            .iter()
            .map(|c| CellEntry {
                row: c.row,
                col: c.col,
                color: c.color,
                angle: c.angle.degrees(),
            })
            .collect();
        to_json(&PatternFile::Object {
            preset: None,
            cells: Some(cells),
            linearize: self.linearize,
        })
    }

    fn from_file(file: PatternFile) -> std::result::Result<Self, String> {
        let (cells, preset, linearize) = match file {
            PatternFile::Table(cells) => (Some(cells), None, false),
            PatternFile::Object {
                preset,
                cells,
                linearize,
            } => (cells, preset, linearize),
        };
        let pattern = match (preset.as_deref(), cells) {
            (Some("imx250myr"), None) => MosaicPattern::imx250myr(),
            (Some(p), None) => return Err(format!("unknown preset {p:?}")),
            (None, Some(cells)) => {
                let cells = cells
                    .iter()
                    .map(|c| {
                        let angle = PolarizerAngle::from_degrees(c.angle)
                            .ok_or_else(|| format!("polarizer angle {} is not 0, 45, 90 or 135", c.angle))?;
                        Ok(PatternCell {
                            row: c.row,
                            col: c.col,
                            color: c.color,
                            angle,
                        })
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                MosaicPattern::from_cells(&cells).map_err(|e| e.to_string())?
            }
            (Some(_), Some(_)) => return Err("give either a preset or cells, not both".into()),
            (None, None) => return Err("pattern needs a preset or 16 cells".into()),
        };
        Ok(DecodeConfig { pattern, linearize })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_pipeline() {
        let cfg: RefineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.pipeline().unwrap(), PipelineConfig::default());
    }

    #[test]
    fn overrides_win_over_file() {
        let text = r#"{"no_dop_weight": false, "solver": {"mode": "lbfgs", "max_iterations": 7, "tol": 1e-3},
                       "paths": {"output_dir": "from_file"}}"#;
        let mut cfg: RefineConfig = serde_json::from_str(text).unwrap();
        let p = cfg.pipeline().unwrap();
        assert!(p.schedule.stages.iter().all(|s| s.max_iterations == 7 && s.convergence_tol == 1e-3));
        cfg.apply(&RefineOverrides {
            tau1: Some(0.0),
            no_dop_weight: true,
            max_iterations: Some(3),
            output_dir: Some("cli".into()),
            ..RefineOverrides::default()
        });
        let p = cfg.pipeline().unwrap();
        assert!(p.no_dop_weight);
        assert!(p.schedule.stages.iter().all(|s| s.tau1 == 0.0 && s.max_iterations == 3));
        assert_eq!(cfg.path("output_dir").unwrap(), Path::new("cli"));
        assert!(cfg.path("cameras").is_err());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_json::<RefineConfig>("{\n  \"stages\": [,]\n}", Path::new("c.json"), FileRole::Config).unwrap_err();
        match err {
            Error::ConfigSyntax { line, column, .. } => assert_eq!((line, column), (2, 14)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn pattern_forms() {
        assert_eq!(DecodeConfig::parse(r#"{"preset": "imx250myr"}"#).unwrap().pattern, MosaicPattern::imx250myr());
        let cells: Vec<CellEntry> = MosaicPattern::imx250myr()
            .cells()
            .iter()
            .map(|c| CellEntry {
                row: c.row,
                col: c.col,
                color: c.color,
                angle: c.angle.degrees(),
            })
            .collect();
        let table = serde_json::to_string(&cells).unwrap();
        assert_eq!(DecodeConfig::parse(&table).unwrap().pattern, MosaicPattern::imx250myr());
        let obj = format!(r#"{{"cells": {table}, "linearize": true}}"#);
        assert!(DecodeConfig::parse(&obj).unwrap().linearize);
        assert!(DecodeConfig::parse(r#"{"preset": "other"}"#).is_err());
        assert!(DecodeConfig::parse(&table.replace("\"angle\":45", "\"angle\":30")).is_err());
        assert!(DecodeConfig::parse(r#"[]"#).is_err());
    }
}
