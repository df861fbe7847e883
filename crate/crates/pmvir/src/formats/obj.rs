//! Wavefront OBJ import (positions and faces only).

use std::path::Path;

use pmvir_core::Vec3;

use super::ply::PlyMesh;
use crate::error::{Error, Result};

pub fn decode(text: &str) -> std::result::Result<PlyMesh, String> {
    let mut mesh = PlyMesh::default();
    for (n, line) in text.lines().enumerate() {
        let at = |m: String| format!("line {}: {m}", n + 1);
        let line = line.split('#').next().unwrap_or_default();
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let c: Vec<f64> = words
                    .take(3)
                    .map(|w| w.parse::<f64>().map_err(|_| at(format!("bad coordinate {w:?}"))))
                    .collect::<std::result::Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(at("vertex needs three coordinates".into()));
                }
                mesh.positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let count = mesh.positions.len() as i64;
                let mut poly = Vec::new();
                for w in words {
                    // `v`, `v/vt`, `v//vn` or `v/vt/vn`; negative indices count back
                    let first = w.split('/').next().unwrap_or_default();
                    let i: i64 = first.parse().map_err(|_| at(format!("bad index {w:?}")))?;
                    let resolved = if i > 0 { i - 1 } else { count + i };
                    if i == 0 || resolved < 0 || resolved >= count {
                        return Err(at(format!("index {i} out of range")));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(at(format!("face with {} vertices", poly.len())));
                }
                for k in 1..poly.len() - 1 {
                    mesh.faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn read(path: &Path) -> Result<PlyMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slash_syntax_and_negative_indices() {
        let src = "# square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 3/3\nf -4 -2 -1\n";
        let m = decode(src).unwrap();
        assert_eq!(m.positions.len(), 4);
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(m.albedo.is_none());
    }

    #[test]
    fn bad_faces_are_rejected() {
        assert!(decode("v 0 0 0\nf 1 2 3\n").is_err());
        assert!(decode("v 0 0 0\nv 1 0 0\nf 1 2\n").is_err());
        assert!(decode("v 0 0\n").is_err());
    }
}
