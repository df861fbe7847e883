//! Second-order spherical-harmonics shading and per-vertex rendering.

use crate::geom::Vec3;

/// Per-image lighting: nine SH basis weights and an RGB color scale.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Illumination {
    pub basis: [f64; 9],
    pub scale: [f64; 3],
}

impl Illumination {
    /// Uniform white environment: basis `[1, 0, ..., 0]`, scale `[1, 1, 1]`.
    pub const UNIFORM: Illumination = Illumination {
        basis: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        scale: [1.0, 1.0, 1.0],
    };

    pub fn is_finite(&self) -> bool {
        self.basis.iter().chain(&self.scale).all(|v| v.is_finite())
    }

    /// The 12 parameters as `[basis..., scale...]`.
    pub fn to_params(&self) -> [f64; 12] {
        let mut p = [0.0; 12];
        p[..9].copy_from_slice(&self.basis);
        p[9..].copy_from_slice(&self.scale);
        p
    }

    pub fn from_params(p: &[f64]) -> Self {
        let mut basis = [0.0; 9];
        let mut scale = [0.0; 3];
        basis.copy_from_slice(&p[..9]);
        scale.copy_from_slice(&p[9..12]);
        Illumination { basis, scale }
    }

    pub fn param(&self, i: usize) -> f64 {
        if i < 9 {
            self.basis[i]
        } else {
            self.scale[i - 9]
        }
    }

    pub fn with_param(mut self, i: usize, v: f64) -> Self {
        if i < 9 {
            self.basis[i] = v;
        } else {
            self.scale[i - 9] = v;
        }
        self
    }
}

impl Default for Illumination {
    fn default() -> Self {
        Illumination::UNIFORM
    }
}

/// The nine SH basis functions evaluated at `n`, in coefficient order.
#[inline]
pub fn sh_basis(n: Vec3) -> [f64; 9] {
    [
        1.0,
        n.y,
        n.z,
        n.x,
        n.x * n.y,
        n.y * n.z,
        n.z * n.z - 1.0 / 3.0,
        n.x * n.z,
        n.x * n.x - n.y * n.y,
    ]
}

/// Shading `S(N, L)` of a unit normal.
#[inline]
pub fn sh_shade(n: Vec3, basis: &[f64; 9]) -> f64 {
    let b = sh_basis(n);
    let mut s = 0.0;
    for i in 0..9 {
        s += basis[i] * b[i];
    }
    s
}

/// Unclamped rendered RGB: `albedo * S * scale` per channel.
#[inline]
pub fn render_vertex_raw(albedo: [f64; 3], normal: Vec3, illum: &Illumination) -> [f64; 3] {
    let s = sh_shade(normal, &illum.basis);
    [
        albedo[0] * s * illum.scale[0],
        albedo[1] * s * illum.scale[1],
        albedo[2] * s * illum.scale[2],
    ]
}

/// Rendered RGB clamped at zero, as compared against observations.
/// The flag reports whether any channel was clamped.
#[inline]
pub fn render_vertex(albedo: [f64; 3], normal: Vec3, illum: &Illumination) -> ([f64; 3], bool) {
    let raw = render_vertex_raw(albedo, normal, illum);
    let mut clamped = false;
    let out = raw.map(|v| {
        if v < 0.0 {
            clamped = true;
            0.0
        } else {
            v
        }
    });
    (out, clamped)
}
