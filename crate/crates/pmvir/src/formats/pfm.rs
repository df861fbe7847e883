//! Portable float maps.
//!
//! Written little-endian (scale `-1.0`) with rows stored bottom to top, as
//! the format prescribes. Both byte orders are accepted on read.

use std::path::Path;

use pmvir_core::image::Plane;

use crate::error::{Error, Result};

pub fn encode(plane: &Plane) -> Result<Vec<u8>> {
    let magic = match plane.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::Config(format!("PFM holds 1 or 3 channels, not {c}"))),
    };
    let (w, h) = plane.dims();
    let header = format!("{magic}\n{w} {h}\n-1.0\n");
    let mut out = Vec::with_capacity(header.len() + plane.data().len() * 4);
    out.extend_from_slice(header.as_bytes());
    let row_len = w * plane.channels();
    for row in (0..h).rev() {
        for v in &plane.data()[row * row_len..(row + 1) * row_len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Reads the next whitespace-delimited header token.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Plane, String> {
    let mut pos = 0;
    let channels = match token(bytes, &mut pos) {
        Some("PF") => 3,
        Some("Pf") => 1,
        other => return Err(format!("bad magic {other:?}")),
    };
    let mut number = |what: &str| -> std::result::Result<&str, String> {
        token(bytes, &mut pos).ok_or_else(|| format!("missing {what}"))
    };
    let w: usize = number("width")?.parse().map_err(|e| format!("width: {e}"))?;
    let h: usize = number("height")?.parse().map_err(|e| format!("height: {e}"))?;
    let scale: f64 = number("scale")?.parse().map_err(|e| format!("scale: {e}"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format!("invalid scale {scale}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let count = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(channels))
        .ok_or("image size overflows")?;
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() != count * 4 {
        return Err(format!("expected {} raster bytes, found {}", count * 4, body.len()));
    }
    let little = scale < 0.0;
    let row_len = w * channels;
    let mut data = vec![0.0f32; count];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (file_row, k) = (i / row_len, i % row_len);
        data[(h - 1 - file_row) * row_len + k] = v;
    }
    Plane::from_data(w, h, channels, data).map_err(|e| e.to_string())
}

pub fn write(path: &Path, plane: &Plane) -> Result<()> {
    let bytes = encode(plane)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Plane> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stored_bottom_up() {
        let p = Plane::from_data(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode(&p).unwrap();
        let body = &bytes[bytes.len() - 16..];
        assert_eq!(&body[..4], &3.0f32.to_le_bytes());
        assert!(bytes.starts_with(b"Pf\n2 2\n-1.0\n"));
        assert_eq!(decode(&bytes).unwrap(), p);
    }

    #[test]
    fn big_endian_input() {
        let mut bytes = b"PF\n1 1\n1.0\n".to_vec();
        for v in [0.5f32, -2.0, 7.25] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let p = decode(&bytes).unwrap();
        assert_eq!(p.data(), &[0.5, -2.0, 7.25]);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let bytes = b"Pf\n2 2\n-1.0\n\0\0\0\0".to_vec();
        assert!(decode(&bytes).is_err());
        assert!(decode(b"P6\n1 1\n255\n\0").is_err());
    }
}
