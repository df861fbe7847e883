//! Stokes calculus and the conversion of four-direction polarization images
//! into intensity, unpolarized-intensity, AoP and DoP maps.

mod demosaic;

pub use demosaic::{demosaic, BlockLayout, ColorFilter, MosaicPattern, PatternCell, PolarizerAngle};

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::Plane;

/// Value stored in AoP planes where the angle is undefined. Always paired with DoP 0.
pub const UNDEFINED_AOP: f32 = 0.0;

/// Polarizer angles of the four analyzer directions, in radians.
pub const ANALYZER_ANGLES: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];

/// Intensities observed behind polarizers at 0, 45, 90 and 135 degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizedSample {
    pub i0: f64,
    pub i45: f64,
    pub i90: f64,
    pub i135: f64,
}

impl PolarizedSample {
    pub const fn new(i0: f64, i45: f64, i90: f64, i135: f64) -> Self {
        PolarizedSample { i0, i45, i90, i135 }
    }

    /// Samples the sinusoid `I(a) = I_int * (1 + rho * cos 2(a - phi))` at the
    /// four analyzer angles. `intensity` is the mean over polarizer angles.
    pub fn from_aop_dop(intensity: f64, aop: f64, dop: f64) -> Self {
        let at = |a: f64| intensity * (1.0 + dop * libm::cos(2.0 * (a - aop)));
        PolarizedSample::new(
            at(ANALYZER_ANGLES[0]),
            at(ANALYZER_ANGLES[1]),
            at(ANALYZER_ANGLES[2]),
            at(ANALYZER_ANGLES[3]),
        )
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.i0, self.i45, self.i90, self.i135]
    }
}

/// Linear Stokes vector; the circular component `s3` is identically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
}

impl StokesVector {
    pub const fn new(s0: f64, s1: f64, s2: f64) -> Self {
        StokesVector { s0, s1, s2 }
    }

    pub const fn s3(&self) -> f64 {
        0.0
    }
}

pub fn stokes_from_directions(s: &PolarizedSample) -> Result<StokesVector> {
    if !s.as_array().iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(alloc::format!(
            "non-finite polarization sample {:?}",
            s.as_array()
        )));
    }
    Ok(StokesVector::new(s.i0 + s.i90, s.i0 - s.i90, s.i45 - s.i135))
}

/// Angle of polarization in `[0, pi)`, or `None` when `s1 = s2 = 0`.
pub fn aop(s: &StokesVector) -> Option<f64> {
    if s.s1 == 0.0 && s.s2 == 0.0 {
        return None;
    }
    let half = 0.5 * libm::atan2(s.s2, s.s1);
    if !half.is_finite() {
        return None;
    }
    Some(wrap_pi(half))
}

/// Degree of polarization, clamped to at most 1.
pub fn dop(s: &StokesVector) -> Result<f64> {
    if !(s.s0 > 0.0) || !s.s0.is_finite() {
        return Err(Error::UndefinedDop(s.s0));
    }
    let r = libm::sqrt(s.s1 * s.s1 + s.s2 * s.s2) / s.s0;
    if !r.is_finite() {
        return Err(Error::UndefinedDop(s.s0));
    }
    Ok(r.min(1.0))
}

/// Wraps an angle into `[0, pi)`.
pub fn wrap_pi(a: f64) -> f64 {
    let mut w = a - PI * libm::floor(a / PI);
    if w >= PI {
        w -= PI;
    }
    if w < 0.0 {
        w = 0.0;
    }
    w
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_two_pi(a: f64) -> f64 {
    let tau = 2.0 * PI;
    let mut w = a - tau * libm::floor(a / tau);
    if w >= tau {
        w -= tau;
    }
    if w < 0.0 {
        w = 0.0;
    }
    w
}

/// Per-pixel polarization quantities after the undefined/clamp policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPolarization {
    pub aop: f64,
    pub dop: f64,
    pub defined: bool,
    pub clamped: bool,
}

/// AoP and DoP of one sample; undefined or invalid samples map to `(UNDEFINED_AOP, 0)`.
pub fn pixel_polarization(s: &PolarizedSample) -> PixelPolarization {
    let undefined = PixelPolarization {
        aop: UNDEFINED_AOP as f64,
        dop: 0.0,
        defined: false,
        clamped: false,
    };
    let Ok(st) = stokes_from_directions(s) else {
        return undefined;
    };
    let (Some(phi), Ok(rho)) = (aop(&st), dop(&st)) else {
        return undefined;
    };
    let raw = libm::sqrt(st.s1 * st.s1 + st.s2 * st.s2) / st.s0;
    PixelPolarization {
        aop: phi,
        dop: rho,
        defined: true,
        clamped: raw > 1.0,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeriveStats {
    pub undefined: usize,
    pub clamped: usize,
}

/// Four RGB polarization-direction planes plus the maps derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationImageSet {
    pub width: usize,
    pub height: usize,
    /// RGB planes behind 0, 45, 90 and 135 degree polarizers.
    pub directions: [Plane; 4],
    pub rgb_int: Plane,
    pub rgb_min: Plane,
    pub aop: Plane,
    pub dop: Plane,
}

impl PolarizationImageSet {
    /// Builds the set from the four direction planes and computes the derived maps.
    pub fn from_directions(directions: [Plane; 4]) -> Result<(Self, DeriveStats)> {
        let (width, height) = directions[0].dims();
        for p in &directions {
            if p.dims() != (width, height) {
                return Err(Error::PlaneMismatch {
                    expected: (width, height),
                    found: p.dims(),
                });
            }
            if p.channels() != 3 {
                return Err(Error::InvalidInput(alloc::format!(
                    "direction planes must be RGB, got {} channels",
                    p.channels()
                )));
            }
        }
        let mut set = PolarizationImageSet {
            width,
            height,
            directions,
            rgb_int: Plane::new(width, height, 3),
            rgb_min: Plane::new(width, height, 3),
            aop: Plane::new(width, height, 1),
            dop: Plane::new(width, height, 1),
        };
        let stats = derive_planes(&mut set);
        Ok((set, stats))
    }

    /// Assembles a set from already-derived planes (e.g. loaded from disk).
    pub fn from_parts(
        directions: [Plane; 4],
        rgb_int: Plane,
        rgb_min: Plane,
        aop: Plane,
        dop: Plane,
    ) -> Result<Self> {
        let (width, height) = rgb_int.dims();
        for p in directions.iter().chain([&rgb_min, &aop, &dop]) {
            if p.dims() != (width, height) {
                return Err(Error::PlaneMismatch {
                    expected: (width, height),
                    found: p.dims(),
                });
            }
        }
        Ok(PolarizationImageSet {
            width,
            height,
            directions,
            rgb_int,
            rgb_min,
            aop,
            dop,
        })
    }
}

/// Recomputes `rgb_int`, `rgb_min`, `aop` and `dop` from the direction planes.
///
/// AoP and DoP use the channel-averaged direction intensities; `rgb_min` is
/// `(1 - dop) * rgb_int` per channel.
pub fn derive_planes(set: &mut PolarizationImageSet) -> DeriveStats {
    let mut stats = DeriveStats::default();
    for row in 0..set.height {
        for col in 0..set.width {
            let mut avg = [0.0f64; 4];
            let mut int = [0.0f64; 3];
            for (d, plane) in set.directions.iter().enumerate() {
                for ch in 0..3 {
                    let v = plane.get(col, row, ch) as f64;
                    avg[d] += v / 3.0;
                    int[ch] += v;
                }
            }
            let pol = pixel_polarization(&PolarizedSample::new(avg[0], avg[1], avg[2], avg[3]));
            if !pol.defined {
                stats.undefined += 1;
            }
            if pol.clamped {
                stats.clamped += 1;
            }
            for ch in 0..3 {
                let i = int[ch] / 4.0;
                set.rgb_int.set(col, row, ch, i as f32);
                set.rgb_min.set(col, row, ch, ((1.0 - pol.dop) * i) as f32);
            }
            let mut a = pol.aop as f32;
            if a as f64 >= PI {
                a = 0.0;
            }
            set.aop.set(col, row, 0, a);
            set.dop.set(col, row, 0, pol.dop as f32);
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn stokes_examples() {
        let s = stokes_from_directions(&PolarizedSample::new(1.0, 0.5, 0.0, 0.5)).unwrap();
        assert_eq!((s.s0, s.s1, s.s2, s.s3()), (1.0, 1.0, 0.0, 0.0));
        let c = 0.3;
        let s = stokes_from_directions(&PolarizedSample::new(c, c, c, c)).unwrap();
        assert_eq!((s.s0, s.s1, s.s2), (2.0 * c, 0.0, 0.0));
        let s = stokes_from_directions(&PolarizedSample::new(0.75, 1.0, 0.25, 0.0)).unwrap();
        assert_eq!((s.s0, s.s1, s.s2), (1.0, 0.5, 1.0));
        assert!(stokes_from_directions(&PolarizedSample::new(f64::NAN, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn forward_model_reproduces_inconsistent_sample_parameters() {
        // (0.75, 1, 0.25, 0) has phi = atan2(1, 0.5) / 2 and s0 = 1; forward
        // simulation with I_int = s0 / 2 and rho = |(s1, s2)| / s0 reproduces it.
        let phi = 0.5 * libm::atan2(1.0, 0.5);
        assert!(close(phi.to_degrees(), 31.717474411461005, 1e-9));
        let rho = libm::sqrt(1.25);
        let fwd = PolarizedSample::from_aop_dop(0.5, phi, rho);
        for (a, b) in fwd.as_array().iter().zip([0.75, 1.0, 0.25, 0.0]) {
            assert!(close(*a, b, 1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn aop_examples() {
        assert_eq!(aop(&StokesVector::new(1.0, 1.0, 0.0)), Some(0.0));
        assert!(close(aop(&StokesVector::new(1.0, 0.0, 1.0)).unwrap(), PI / 4.0, 1e-15));
        assert!(close(aop(&StokesVector::new(1.0, -1.0, 0.0)).unwrap(), PI / 2.0, 1e-15));
        assert_eq!(aop(&StokesVector::new(1.0, 0.0, 0.0)), None);
        // negative half-angles wrap into [0, pi)
        let a = aop(&StokesVector::new(1.0, 0.0, -1.0)).unwrap();
        assert!(close(a, 3.0 * PI / 4.0, 1e-15));
    }

    #[test]
    fn aop_half_pi_matches_forward_simulation() {
        let s = PolarizedSample::from_aop_dop(1.0, PI / 2.0, 1.0);
        let st = stokes_from_directions(&s).unwrap();
        assert!(close(aop(&st).unwrap(), PI / 2.0, 1e-12));
    }

    #[test]
    fn dop_examples() {
        assert_eq!(dop(&StokesVector::new(0.6, 0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(dop(&StokesVector::new(1.0, 1.0, 0.0)).unwrap(), 1.0);
        // inconsistent sample: raw ratio sqrt(1.25) is clamped
        assert_eq!(dop(&StokesVector::new(1.0, 0.5, 1.0)).unwrap(), 1.0);
        let p = pixel_polarization(&PolarizedSample::new(0.75, 1.0, 0.25, 0.0));
        assert!(p.clamped && p.dop == 1.0);
        assert!(matches!(dop(&StokesVector::new(0.0, 0.0, 0.0)), Err(Error::UndefinedDop(_))));
    }

    #[test]
    fn undefined_pixels_get_sentinel_and_zero_dop() {
        let p = pixel_polarization(&PolarizedSample::new(0.0, 0.0, 0.0, 0.0));
        assert!(!p.defined);
        assert_eq!((p.aop, p.dop), (UNDEFINED_AOP as f64, 0.0));
    }

    fn uniform_set(vals: [f32; 4]) -> PolarizationImageSet {
        let planes = vals.map(|v| Plane::filled(3, 2, 3, v));
        PolarizationImageSet::from_directions(planes).unwrap().0
    }

    #[test]
    fn derive_planes_examples() {
        let s = uniform_set([0.4; 4]);
        assert!(s.rgb_int.data().iter().all(|v| (*v - 0.4).abs() < 1e-7));
        assert!(s.dop.data().iter().all(|v| *v == 0.0));
        assert!(s.rgb_min.data().iter().all(|v| (*v - 0.4).abs() < 1e-7));

        let s = uniform_set([2.0, 1.0, 0.0, 1.0]);
        assert!(s.rgb_int.data().iter().all(|v| *v == 1.0));
        assert!(s.dop.data().iter().all(|v| *v == 1.0));
        assert!(s.rgb_min.data().iter().all(|v| *v == 0.0));
        assert!(s.aop.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn derive_planes_is_idempotent() {
        let mut planes = [
            Plane::new(2, 2, 3),
            Plane::new(2, 2, 3),
            Plane::new(2, 2, 3),
            Plane::new(2, 2, 3),
        ];
        let vals = vec![0.1f32, 0.7, 0.3, 0.9, 0.2, 0.5, 0.8, 0.4, 0.6, 0.05, 0.35, 0.95];
        for (d, p) in planes.iter_mut().enumerate() {
            for (i, v) in p.data_mut().iter_mut().enumerate() {
                *v = vals[(i + 3 * d) % vals.len()];
            }
        }
        let (mut set, _) = PolarizationImageSet::from_directions(planes).unwrap();
        let before = set.clone();
        derive_planes(&mut set);
        assert_eq!(before, set);
    }

    #[test]
    fn mismatched_planes_are_rejected() {
        let planes = [
            Plane::new(2, 2, 3),
            Plane::new(2, 2, 3),
            Plane::new(3, 2, 3),
            Plane::new(2, 2, 3),
        ];
        assert!(matches!(
            PolarizationImageSet::from_directions(planes),
            Err(Error::PlaneMismatch { .. })
        ));
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_pi(PI), 0.0);
        assert!(close(wrap_pi(-0.25), PI - 0.25, 1e-15));
        assert!(close(wrap_two_pi(-0.25), 2.0 * PI - 0.25, 1e-15));
        assert_eq!(wrap_two_pi(2.0 * PI), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_recovers_aop_and_dop(phi in 0.0..PI, rho in 0.0f64..=1.0, i in 1e-3f64..1e3) {
                let s = PolarizedSample::from_aop_dop(i, phi, rho);
                let st = stokes_from_directions(&s).unwrap();
                let r = dop(&st).unwrap();
                prop_assert!((r - rho).abs() <= 1e-9);
                if rho > 1e-6 {
                    let a = aop(&st).unwrap();
                    let d = (a - phi).abs();
                    prop_assert!(d.min(PI - d) <= 1e-9);
                }
            }

            #[test]
            fn outputs_stay_in_range(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0, d in 0.0f64..10.0) {
                let p = pixel_polarization(&PolarizedSample::new(a, b, c, d));
                prop_assert!((0.0..PI).contains(&p.aop));
                prop_assert!((0.0..=1.0).contains(&p.dop));
            }
        }
    }
}
