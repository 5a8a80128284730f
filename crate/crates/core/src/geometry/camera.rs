//! Pinhole cameras placed on an orbit around a target point.
//!
//! Azimuth 0° looks at the face from +z; 90° sits on +x; the back
//! hemisphere is azimuth ∈ [90°, 270°]. Camera axes are x right, y down,
//! z forward.

use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

/// Points closer than this to the image plane are culled.
pub const NEAR_PLANE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// Degrees in [0, 360).
    pub azimuth: f64,
    /// Degrees, positive above the target.
    pub elevation: f64,
    pub radius: f64,
    pub target: Vec3,
    /// Focal length in pixels.
    pub focal: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub culled: bool,
}

pub fn camera_from_orbit(
    azimuth: f64,
    elevation: f64,
    radius: f64,
    target: Vec3,
    focal: f64,
    resolution: (usize, usize),
) -> Result<Camera> {
    let cam = Camera {
        azimuth: azimuth.rem_euclid(360.0),
        elevation,
        radius,
        target,
        focal,
        width: resolution.0,
        height: resolution.1,
    };
    cam.validate()?;
    Ok(cam)
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::invalid(format!(
                "camera radius must be positive, got {}",
                self.radius
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera resolution must be positive"));
        }
        if !(self.focal > 0.0) {
            return Err(Error::invalid("focal length must be positive"));
        }
        if !(self.elevation.abs() < 90.0) {
            return Err(Error::invalid("elevation must lie strictly inside (-90°, 90°)"));
        }
        Ok(())
    }

    pub fn position(&self) -> Vec3 {
        let (az, el) = (self.azimuth.to_radians(), self.elevation.to_radians());
        self.target + Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos()) * self.radius
    }

    /// World-to-camera rotation; rows are the camera right, down and forward axes.
    pub fn rotation(&self) -> Mat3 {
        let forward = (self.target - self.position()).normalize();
        let right = forward.cross(&Vec3::y()).normalize();
        let down = forward.cross(&right);
        Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()])
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation() * (p - self.position())
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn project(&self, p: &Vec3) -> Projection {
        project_camera_point(self, &self.world_to_camera(p))
    }
}

pub(crate) fn project_camera_point(cam: &Camera, pc: &Vec3) -> Projection {
    let (cx, cy) = cam.principal_point();
    if pc.z <= NEAR_PLANE {
        return Projection {
            u: f64::NAN,
            v: f64::NAN,
            depth: pc.z,
            culled: true,
        };
    }
    Projection {
        u: cam.focal * pc.x / pc.z + cx,
        v: cam.focal * pc.y / pc.z + cy,
        depth: pc.z,
        culled: false,
    }
}

pub fn project(cam: &Camera, point: &Vec3) -> Result<Projection> {
    if !point.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("non-finite point"));
    }
    Ok(cam.project(point))
}

/// Shared orbit parameters for a family of cameras around one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitRig {
    pub elevation: f64,
    pub radius: f64,
    pub target: Vec3,
    pub focal: f64,
    pub resolution: (usize, usize),
}

impl Default for OrbitRig {
    fn default() -> Self {
        OrbitRig {
            elevation: 0.0,
            radius: 4.0,
            target: Vec3::zeros(),
            focal: 140.0,
            resolution: (128, 128),
        }
    }
}

impl OrbitRig {
    pub fn camera(&self, azimuth: f64) -> Result<Camera> {
        camera_from_orbit(
            azimuth,
            self.elevation,
            self.radius,
            self.target,
            self.focal,
            self.resolution,
        )
    }

    /// `count` cameras evenly spaced over `span` degrees centred on `center`;
    /// a single camera sits at the centre.
    pub fn ring(&self, count: usize, center: f64, span: f64) -> Result<Vec<Camera>> {
        if count == 0 {
            return Err(Error::invalid("camera ring needs at least one camera"));
        }
        if !(0.0..=360.0).contains(&span) {
            return Err(Error::invalid(format!("ring span {span} outside [0, 360]")));
        }
        (0..count)
            .map(|i| {
                let offset = if count == 1 {
                    0.0
                } else {
                    -span / 2.0 + span * i as f64 / (count - 1) as f64
                };
                self.camera(center + offset)
            })
            .collect()
    }
}

/// The same physical camera expressed in the frame reached by `xf`, so that
/// it sees `xf`-transformed geometry exactly as `cam` sees the original.
/// Only rotations about the vertical axis and uniform scales keep a camera
/// on an orbit; other transforms are rejected.
pub fn camera_in_frame(cam: &Camera, xf: &crate::geometry::SimilarityTransform) -> Result<Camera> {
    xf.validate()?;
    let r = xf.rotation.0;
    let s = xf.scale;
    if r.x.abs() > 1e-12 || r.z.abs() > 1e-12 || (s.max() - s.min()).abs() > 1e-12 {
        return Err(Error::invalid(
            "only vertical-axis rotations with uniform scale map orbit cameras between frames",
        ));
    }
    Ok(Camera {
        azimuth: (cam.azimuth + r.y.to_degrees()).rem_euclid(360.0),
        radius: cam.radius * s.x,
        target: xf.apply_point(&cam.target),
        ..*cam
    })
}

/// Rotation by `degrees` about the vertical (+y) axis through `pivot`.
pub fn rotate_about_vertical(degrees: f64, pivot: &Vec3, p: &Vec3) -> Vec3 {
    vertical_rotation(degrees) * (p - pivot) + pivot
}

pub fn vertical_rotation(degrees: f64) -> Mat3 {
    let (s, c) = degrees.to_radians().sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}
