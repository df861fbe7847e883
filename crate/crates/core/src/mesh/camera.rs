use alloc::format;

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};

/// Pinhole camera without distortion.
///
/// `rotation` and `translation` map world to camera coordinates
/// (`p_cam = R p_world + t`). The camera looks down +z with +x to the right
/// and +y down in the image.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: Mat3,
    pub translation: Vec3,
}

/// Image position of a projected point and its camera-frame depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

impl Camera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self> {
        let cam = Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got ({}, {})",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() || !self.translation.is_finite() {
            return Err(Error::InvalidCamera("non-finite principal point or translation".into()));
        }
        if !self.rotation.is_rotation(1e-9) {
            return Err(Error::InvalidCamera(
                "rotation is not orthonormal with determinant +1".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image size must be non-zero".into()));
        }
        Ok(())
    }

    /// Camera placed at `eye` looking at `target`; `up` fixes the roll.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let z = (target - eye)
            .normalized()
            .ok_or_else(|| Error::InvalidCamera("eye coincides with target".into()))?;
        let x = match z.cross(up).normalized() {
            Some(x) if z.cross(up).norm() > 1e-6 => x,
            _ => z
                .cross(Vec3::new(1.0, 0.0, 0.0))
                .normalized()
                .or_else(|| z.cross(Vec3::new(0.0, 1.0, 0.0)).normalized())
                .ok_or_else(|| Error::InvalidCamera("cannot build camera frame".into()))?,
        };
        let y = z.cross(x);
        let rotation = Mat3::from_row_vectors(x, y, z);
        let translation = -rotation.mul_vec(eye);
        Camera::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
            rotation,
            translation,
        )
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -self.rotation.transpose().mul_vec(self.translation)
    }

    /// Rotates a world-frame direction into the camera frame.
    pub fn direction_to_camera(&self, d: Vec3) -> Vec3 {
        self.rotation.mul_vec(d)
    }

    /// Pinhole projection; `None` when the point is not in front of the camera.
    #[inline]
    pub fn project(&self, p: Vec3) -> Option<Projection> {
        let c = self.to_camera(p);
        if !(c.z > 0.0) {
            return None;
        }
        Some(Projection {
            x: self.fx * c.x / c.z + self.cx,
            y: self.fy * c.y / c.z + self.cy,
            depth: c.z,
        })
    }

    /// Like [`Camera::project`] but reports the offending depth.
    pub fn try_project(&self, p: Vec3) -> Result<Projection> {
        let depth = self.to_camera(p).z;
        self.project(p).ok_or(Error::BehindCamera(depth))
    }

    /// World point at `depth` along the ray through pixel position `(x, y)`.
    pub fn back_project(&self, x: f64, y: f64, depth: f64) -> Vec3 {
        let c = Vec3::new((x - self.cx) / self.fx * depth, (y - self.cy) / self.fy * depth, depth);
        self.rotation.transpose().mul_vec(c - self.translation)
    }

    /// Unit world-frame direction of the ray through pixel position `(x, y)`.
    pub fn ray_direction(&self, x: f64, y: f64) -> Vec3 {
        let c = Vec3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0);
        self.rotation
            .transpose()
            .mul_vec(c)
            .normalized()
            .expect("ray direction has unit z component")
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= -0.5 && y >= -0.5 && x < self.width as f64 - 0.5 && y < self.height as f64 - 0.5
    }
}
