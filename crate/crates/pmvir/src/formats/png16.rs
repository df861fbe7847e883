//! Raw sensor mosaics stored as single-channel 8 or 16-bit PNG.

use std::path::Path;

use pmvir_core::image::Plane;

use crate::error::{Error, Result};

/// Inverse sRGB transfer curve.
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Decodes a grayscale PNG into a plane scaled to `[0, 1]`.
///
/// With `linearize` the stored values are treated as sRGB-encoded.
pub fn decode(bytes: &[u8], linearize: bool) -> std::result::Result<Plane, String> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(format!("raw mosaic must be grayscale, found {:?}", info.color_type));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let values: Vec<f64> = match info.bit_depth {
        png::BitDepth::Sixteen => (0..w * h)
            .map(|i| u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]) as f64 / 65535.0)
            .collect(),
        png::BitDepth::Eight => buf[..w * h].iter().map(|&b| b as f64 / 255.0).collect(),
        d => return Err(format!("unsupported bit depth {d:?}")),
    };
    let data = values
        .into_iter()
        .map(|v| if linearize { srgb_to_linear(v) } else { v } as f32)
        .collect();
    Plane::from_data(w, h, 1, data).map_err(|e| e.to_string())
}

/// Encodes a single-channel plane as 16-bit grayscale, clamping to `[0, 1]`.
pub fn encode(plane: &Plane) -> std::result::Result<Vec<u8>, String> {
    if plane.channels() != 1 {
        return Err(format!("raw mosaic must have one channel, not {}", plane.channels()));
    }
    let (w, h) = plane.dims();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(|e| e.to_string())?;
        let mut raw = Vec::with_capacity(w * h * 2);
        for &v in plane.data() {
            let q = (v.clamp(0.0, 1.0) as f64 * 65535.0).round() as u16;
            raw.extend_from_slice(&q.to_be_bytes());
        }
        writer.write_image_data(&raw).map_err(|e| e.to_string())?;
    }
    Ok(out)
}

pub fn read(path: &Path, linearize: bool) -> Result<Plane> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, linearize).map_err(|m| Error::format(path, m))
}

pub fn write(path: &Path, plane: &Plane) -> Result<()> {
    let bytes = encode(plane).map_err(|m| Error::format(path, m))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip() {
        let data: Vec<f32> = (0..16).map(|i| i as f32 / 15.0).collect();
        let p = Plane::from_data(4, 4, 1, data).unwrap();
        let back = decode(&encode(&p).unwrap(), false).unwrap();
        for (a, b) in p.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
    }

    #[test]
    fn srgb_curve_endpoints() {
        assert_eq!(srgb_to_linear(0.0), 0.0);
        assert!((srgb_to_linear(1.0) - 1.0).abs() < 1e-12);
        // both branches meet at the breakpoint
        let a = 0.04045 / 12.92;
        let b = ((0.04045f64 + 0.055) / 1.055).powf(2.4);
        assert!((a - b).abs() < 1e-6);
    }
}
