//! Scene instantiation: the horizontal camera rig, skeleton pose images and
//! the concatenated multi-view pose sheet.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, CameraRig, ViewTag};
use crate::error::{Error, Result};
use crate::image::{ImageKind, ImagePlane};
use crate::math::{sin_cos_deg, Vec3};
use crate::mesh::TriMesh;

/// Bumped whenever the pose drawing style (sizes, palette) changes.
pub const POSE_STYLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigSpec {
    pub k_views: usize,
    pub radius: f64,
    pub azimuth_start: f64,
    pub azimuth_end: f64,
    pub image_size: u32,
    pub fov_y: f64,
    pub target_center: [f64; 3],
    /// Add cameras at `360° - azimuth` for every rig azimuth not already present.
    #[serde(default)]
    pub mirror_to_360: bool,
}

impl Default for RigSpec {
    fn default() -> Self {
        RigSpec {
            k_views: 7,
            radius: 2.7,
            azimuth_start: 0.0,
            azimuth_end: 180.0,
            image_size: 512,
            fov_y: 30.0,
            target_center: [0.0; 3],
            mirror_to_360: false,
        }
    }
}

impl RigSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_views < 1 {
            return Err(Error::validation("rig spec", "k_views must be >= 1"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::validation("rig spec", "radius must be positive"));
        }
        if !(self.azimuth_start < self.azimuth_end) {
            return Err(Error::validation("rig spec", "azimuth_start must be < azimuth_end"));
        }
        if self.image_size == 0 {
            return Err(Error::validation("rig spec", "image_size must be >= 1"));
        }
        Ok(())
    }

    pub fn azimuths(&self) -> Vec<f64> {
        if self.k_views == 1 {
            return vec![self.azimuth_start];
        }
        let step = (self.azimuth_end - self.azimuth_start) / (self.k_views - 1) as f64;
        (0..self.k_views)
            .map(|i| self.azimuth_start + step * i as f64)
            .collect()
    }
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Camera on the horizontal circle around `center` at `azimuth` degrees (0° looks at the body front, +z).
pub fn orbit_camera(center: Vec3, radius: f64, azimuth: f64, elevation: f64, size: u32, fov_y: f64) -> Camera {
    let (sa, ca) = sin_cos_deg(azimuth);
    let (se, ce) = sin_cos_deg(elevation);
    Camera {
        position: center + Vec3::new(sa * ce, se, ca * ce) * radius,
        look_at: center,
        up: Vec3::y(),
        fov_y,
        width: size,
        height: size,
        view_tag: ViewTag::Other,
    }
}

/// Builds the K-view horizontal rig.
pub fn instantiate_rig(spec: &RigSpec) -> Result<CameraRig> {
    spec.validate()?;
    let center = Vec3::from(spec.target_center);
    let mut azimuths = spec.azimuths();
    if spec.mirror_to_360 {
        let base = azimuths.clone();
        for a in base.iter().rev() {
            let m = (360.0 - a).rem_euclid(360.0);
            if !azimuths.iter().any(|b| circular_distance(*b, m) < 1e-9) {
                azimuths.push(m);
            }
        }
    }
    let nearest = |target: f64| {
        (0..azimuths.len())
            .min_by(|&i, &j| {
                circular_distance(azimuths[i], target)
                    .partial_cmp(&circular_distance(azimuths[j], target))
                    .unwrap()
            })
            .unwrap()
    };
    let front = nearest(0.0);
    let back = nearest(180.0);
    let cameras = azimuths
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut c = orbit_camera(center, spec.radius, a, 0.0, spec.image_size, spec.fov_y);
            c.view_tag = if i == front {
                ViewTag::Front
            } else if i == back {
                ViewTag::Back
            } else {
                ViewTag::Other
            };
            c
        })
        .collect();
    CameraRig::new(cameras)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub p: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joints: Vec<Joint>,
    pub bones: Vec<[usize; 2]>,
}

impl Skeleton {
    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::validation("skeleton", "needs at least one joint"));
        }
        for (i, b) in self.bones.iter().enumerate() {
            if b[0] >= self.joints.len() || b[1] >= self.joints.len() {
                return Err(Error::validation("skeleton", format!("bone {i} references a missing joint")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Skeleton = serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self).expect("skeleton serializes")).map_err(|e| Error::io(path, e))
    }

    /// Rotates every joint about the vertical axis through `center`.
    pub fn rotated_y(&self, center: Vec3, degrees: f64) -> Skeleton {
        let (s, c) = sin_cos_deg(degrees);
        let mut out = self.clone();
        for j in &mut out.joints {
            let d = Vec3::from(j.p) - center;
            let r = Vec3::new(c * d.x + s * d.z, d.y, -s * d.x + c * d.z);
            j.p = (center + r).into();
        }
        out
    }

    /// A 24-joint canonical T-pose, height 1, centred at the origin, facing +z.
    pub fn canonical_24() -> Skeleton {
        #[rustfmt::skip]
        let joints: [(&str, [f64; 3]); 24] = [
            ("pelvis", [0.0, 0.02, 0.0]),
            ("left_hip", [0.06, -0.02, 0.0]),
            ("right_hip", [-0.06, -0.02, 0.0]),
            ("spine1", [0.0, 0.09, 0.0]),
            ("left_knee", [0.07, -0.25, 0.0]),
            ("right_knee", [-0.07, -0.25, 0.0]),
            ("spine2", [0.0, 0.16, 0.0]),
            ("left_ankle", [0.07, -0.46, 0.0]),
            ("right_ankle", [-0.07, -0.46, 0.0]),
            ("spine3", [0.0, 0.22, 0.0]),
            ("left_foot", [0.08, -0.49, 0.0]),
            ("right_foot", [-0.08, -0.49, 0.0]),
            ("neck", [0.0, 0.32, 0.0]),
            ("left_collar", [0.04, 0.29, 0.0]),
            ("right_collar", [-0.04, 0.29, 0.0]),
            ("head", [0.0, 0.40, 0.0]),
            ("left_shoulder", [0.11, 0.29, 0.0]),
            ("right_shoulder", [-0.11, 0.29, 0.0]),
            ("left_elbow", [0.26, 0.29, 0.0]),
            ("right_elbow", [-0.26, 0.29, 0.0]),
            ("left_wrist", [0.40, 0.29, 0.0]),
            ("right_wrist", [-0.40, 0.29, 0.0]),
            ("left_hand", [0.45, 0.29, 0.0]),
            ("right_hand", [-0.45, 0.29, 0.0]),
        ];
        let parents = [
            usize::MAX, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
        ];
        Skeleton {
            joints: joints
                .iter()
                .map(|(n, p)| Joint {
                    name: n.to_string(),
                    p: *p,
                })
                .collect(),
            bones: parents
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != usize::MAX)
                .map(|(i, &p)| [p, i])
                .collect(),
        }
    }
}

/// Similarity that maps a body to unit height with its bounding box centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyNormalization {
    pub scale: f64,
    pub offset: Vec3,
}

impl BodyNormalization {
    pub fn of(mesh: &TriMesh) -> Result<Self> {
        let b = mesh.bounds();
        let height = b.extent().y;
        if !(height > 0.0) {
            return Err(Error::validation("mesh", "zero height; cannot normalize"));
        }
        Ok(BodyNormalization {
            scale: 1.0 / height,
            offset: -b.center(),
        })
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p + self.offset) * self.scale
    }

    pub fn apply_mesh(&self, mesh: &TriMesh) -> TriMesh {
        let mut out = mesh.clone();
        for v in &mut out.vertices {
            *v = self.apply(v);
        }
        out
    }
}

/// Projects every joint; errors on the first joint at or behind the camera plane.
pub fn project_joints(skel: &Skeleton, cam: &Camera) -> Result<Vec<(f64, f64)>> {
    skel.joints
        .iter()
        .map(|j| {
            cam.project(&Vec3::from(j.p))
                .map(|(x, y, _)| (x, y))
                .ok_or_else(|| Error::JointBehindCamera(j.name.clone()))
        })
        .collect()
}

/// Fixed joint colour for index `i`.
pub fn joint_color(i: usize) -> [f64; 3] {
    // Hues stepped by 7/24 of a turn so adjacent joints contrast.
    let h = ((i * 7) % 24) as f64 / 24.0 * 6.0;
    let sector = h.floor() as i32;
    let f = h - sector as f64;
    let (q, t) = (1.0 - f, f);
    match sector {
        0 => [1.0, t, 0.0],
        1 => [q, 1.0, 0.0],
        2 => [0.0, 1.0, t],
        3 => [0.0, q, 1.0],
        4 => [t, 0.0, 1.0],
        _ => [1.0, 0.0, q],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (cx * cx + cy * cy).sqrt()
}

/// Renders a skeleton as a pose image: bones as lines, joints as filled discs on top.
pub fn project_skeleton(skel: &Skeleton, cam: &Camera) -> Result<ImagePlane> {
    skel.validate()?;
    cam.validate()?;
    let pts = project_joints(skel, cam)?;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let size = w.min(h) as f64;
    let radius = (size / 128.0).max(1.0);
    let half_width = (size / 512.0).max(0.5);
    let mut img = ImagePlane::zeros(w, h, ImageKind::Pose);

    let paint = |img: &mut ImagePlane, lo: (f64, f64), hi: (f64, f64), color: [f64; 3], inside: &dyn Fn((f64, f64)) -> bool| {
        let x0 = (lo.0.floor().max(0.0)) as usize;
        let y0 = (lo.1.floor().max(0.0)) as usize;
        let x1 = (hi.0.ceil().min(w as f64).max(0.0)) as usize;
        let y1 = (hi.1.ceil().min(h as f64).max(0.0)) as usize;
        for y in y0..y1 {
            for x in x0..x1 {
                if inside((x as f64 + 0.5, y as f64 + 0.5)) {
                    img.pixel_mut(x, y).copy_from_slice(&color);
                }
            }
        }
    };

    for &[a, b] in &skel.bones {
        let (pa, pb) = (pts[a], pts[b]);
        let (ca, cb) = (joint_color(a), joint_color(b));
        let color: [f64; 3] = std::array::from_fn(|k| 0.3 * (ca[k] + cb[k]));
        let lo = (pa.0.min(pb.0) - half_width, pa.1.min(pb.1) - half_width);
        let hi = (pa.0.max(pb.0) + half_width, pa.1.max(pb.1) + half_width);
        paint(&mut img, lo, hi, color, &|p| segment_distance(p, pa, pb) <= half_width);
    }
    for (i, &c) in pts.iter().enumerate() {
        let lo = (c.0 - radius, c.1 - radius);
        let hi = (c.0 + radius, c.1 + radius);
        paint(&mut img, lo, hi, joint_color(i), &|p| {
            let (dx, dy) = (p.0 - c.0, p.1 - c.1);
            dx * dx + dy * dy <= radius * radius
        });
    }
    Ok(img)
}

/// Pose images for every rig camera (parallel, order preserved).
pub fn project_rig(skel: &Skeleton, rig: &CameraRig) -> Result<Vec<ImagePlane>> {
    rig.cameras.par_iter().map(|c| project_skeleton(skel, c)).collect()
}

/// Places the views side by side: pixel (r, c) of view j lands at (r, j·W + c).
pub fn concat_views(views: &[ImagePlane]) -> Result<ImagePlane> {
    let first = views
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no views to concatenate".into()))?;
    if let Some(i) = views.iter().position(|v| !v.same_shape(first)) {
        return Err(Error::ShapeMismatch(format!(
            "view {i} is {}x{}x{}, expected {}x{}x{}",
            views[i].width, views[i].height, views[i].channels, first.width, first.height, first.channels
        )));
    }
    let (w, h, c) = (first.width, first.height, first.channels);
    let k = views.len();
    let mut out = ImagePlane {
        width: w * k,
        height: h,
        channels: c,
        data: vec![0.0; w * k * h * c],
        kind: first.kind,
    };
    for (j, v) in views.iter().enumerate() {
        for y in 0..h {
            let dst = out.index(j * w, y);
            out.data[dst..dst + w * c].copy_from_slice(&v.data[y * w * c..(y + 1) * w * c]);
        }
    }
    Ok(out)
}

/// Inverse of [`concat_views`].
pub fn split_views(sheet: &ImagePlane, k: usize) -> Result<Vec<ImagePlane>> {
    if k == 0 || sheet.width % k != 0 {
        return Err(Error::ShapeMismatch(format!("width {} is not a multiple of {k}", sheet.width)));
    }
    let (w, h, c) = (sheet.width / k, sheet.height, sheet.channels);
    Ok((0..k)
        .map(|j| {
            let mut v = ImagePlane {
                width: w,
                height: h,
                channels: c,
                data: vec![0.0; w * h * c],
                kind: sheet.kind,
            };
            for y in 0..h {
                let src = sheet.index(j * w, y);
                v.data[y * w * c..(y + 1) * w * c].copy_from_slice(&sheet.data[src..src + w * c]);
            }
            v
        })
        .collect())
}
