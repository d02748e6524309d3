//! Pinhole cameras and camera rigs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ViewTag {
    Front,
    Back,
    #[default]
    Other,
}

/// Perspective camera looking from `position` at `look_at`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
    pub view_tag: ViewTag,
}

/// Orthonormal camera frame: `right`, `up`, `forward` (forward points into the scene).
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        let dir = self.look_at - self.position;
        if dir.norm() == 0.0 {
            return Err(Error::validation("camera", "position equals look_at"));
        }
        if self.up.norm() == 0.0 || dir.normalize().cross(&self.up.normalize()).norm() < 1e-9 {
            return Err(Error::validation("camera", "up is parallel to the view direction"));
        }
        if !(self.fov_y > 0.0 && self.fov_y < 180.0) {
            return Err(Error::validation("camera", format!("fov_y {} outside (0, 180)", self.fov_y)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("camera", "width and height must be >= 1"));
        }
        Ok(())
    }

    pub fn frame(&self) -> Frame {
        let forward = (self.look_at - self.position).normalize();
        let right = forward.cross(&self.up).normalize();
        let up = right.cross(&forward);
        Frame { right, up, forward }
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        self.height as f64 * 0.5 / (self.fov_y.to_radians() * 0.5).tan()
    }

    /// World point -> camera coordinates `(x right, y up, depth)`.
    pub fn to_view(&self, frame: &Frame, p: &Vec3) -> Vec3 {
        let d = p - self.position;
        Vec3::new(d.dot(&frame.right), d.dot(&frame.up), d.dot(&frame.forward))
    }

    /// Continuous pixel coordinates `(x, y)` with y down and pixel centres at +0.5, plus depth.
    /// `None` for points at or behind the camera plane.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let frame = self.frame();
        let v = self.to_view(&frame, p);
        if v.z <= 0.0 {
            return None;
        }
        let f = self.focal();
        Some((
            self.width as f64 * 0.5 + f * v.x / v.z,
            self.height as f64 * 0.5 - f * v.y / v.z,
            v.z,
        ))
    }

    /// Azimuth of the camera around the vertical axis through `look_at`, in degrees [0, 360).
    pub fn azimuth_deg(&self) -> f64 {
        let d = self.position - self.look_at;
        d.x.atan2(d.z).to_degrees().rem_euclid(360.0)
    }
}

#[derive(Serialize, Deserialize)]
struct CameraRecord {
    position: [f64; 3],
    look_at: [f64; 3],
    up: [f64; 3],
    fov_y: f64,
    width: u32,
    height: u32,
    #[serde(default)]
    view_tag: ViewTag,
}

impl From<&Camera> for CameraRecord {
    fn from(c: &Camera) -> Self {
        CameraRecord {
            position: c.position.into(),
            look_at: c.look_at.into(),
            up: c.up.into(),
            fov_y: c.fov_y,
            width: c.width,
            height: c.height,
            view_tag: c.view_tag,
        }
    }
}

impl From<CameraRecord> for Camera {
    fn from(r: CameraRecord) -> Self {
        Camera {
            position: r.position.into(),
            look_at: r.look_at.into(),
            up: r.up.into(),
            fov_y: r.fov_y,
            width: r.width,
            height: r.height,
            view_tag: r.view_tag,
        }
    }
}

/// Ordered set of calibrated cameras.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        let rig = CameraRig { cameras };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::validation("camera rig", "empty rig"));
        }
        for (i, c) in self.cameras.iter().enumerate() {
            c.validate().map_err(|e| Error::validation("camera rig", format!("camera {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn to_json(&self) -> String {
        let recs: Vec<CameraRecord> = self.cameras.iter().map(CameraRecord::from).collect();
        serde_json::to_string_pretty(&recs).expect("camera records serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let recs: Vec<CameraRecord> =
            serde_json::from_str(text).map_err(|e| Error::format("<camera json>", e.line(), e.to_string()))?;
        CameraRig::new(recs.into_iter().map(Camera::from).collect())
    }
}

pub fn load_camera_rig(path: impl AsRef<Path>) -> Result<CameraRig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let recs: Vec<CameraRecord> = serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
    CameraRig::new(recs.into_iter().map(Camera::from).collect())
}

pub fn save_camera_rig(rig: &CameraRig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, rig.to_json()).map_err(|e| Error::io(path, e))
}
