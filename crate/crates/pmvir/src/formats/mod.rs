pub mod obj;
pub mod pfm;
pub mod ply;
pub mod png16;

use std::path::Path;

use pmvir_core::mesh::TriMesh;

use crate::error::{Error, Result};

/// Loads a PLY or OBJ mesh, chosen by file extension.
pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let raw = match ext.as_deref() {
        Some("obj") => obj::read(path)?,
        _ => ply::read(path)?,
    };
    raw.into_mesh().map_err(|e| Error::format(path, e.to_string()))
}
