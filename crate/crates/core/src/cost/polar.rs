use core::f64::consts::{FRAC_PI_2, PI};

use crate::geom::Vec3;
use crate::mesh::Camera;
use crate::polarimetry::wrap_two_pi;

const AZIMUTH_EPS: f64 = 1e-9;

/// Azimuth of the normal projected into the image plane of `camera`, in
/// `[0, 2pi)`, or `None` when the normal points along the optical axis.
pub fn projected_azimuth(normal: Vec3, camera: &Camera) -> Option<f64> {
    let n = camera.direction_to_camera(normal);
    if libm::hypot(n.x, n.y) < AZIMUTH_EPS {
        return None;
    }
    Some(wrap_two_pi(libm::atan2(-n.y, n.x)))
}

/// Distance from `alpha - phi` to the nearest of the seven admissible
/// offsets, in `[0, pi/4]` for `alpha` in `[0, 2pi)` and `phi` in `[0, pi)`.
pub fn eta(alpha: f64, phi: f64) -> f64 {
    let d = alpha - phi;
    let mut best = f64::INFINITY;
    for k in -4..=2 {
        let v = (d + k as f64 * FRAC_PI_2).abs();
        if v < best {
            best = v;
        }
    }
    best
}

pub fn theta(eta: f64) -> f64 {
    1.0 - 4.0 * eta / PI
}

/// Per-sample cost without the DoP weight; 0 at `eta = 0`, 1 at `eta = pi/4`.
pub fn polarimetric_sample_cost(eta: f64, k: f64) -> f64 {
    let ek = libm::exp(-k);
    let v = (libm::exp(-k * theta(eta)) - ek) / (1.0 - ek);
    v * v
}
