//! Procedural assets used by tests, benchmarks and the shipped example bundle.

use std::collections::HashMap;

use crate::camera::Camera;
use crate::image::{encode_normal, ImageKind, ImagePlane};
use crate::math::Vec3;
use crate::mesh::TriMesh;

/// Axis-aligned unit cube `[0,1]^3`, outward-oriented, 8 vertices and 12 triangles.
pub fn unit_cube() -> TriMesh {
    let vertices = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, (i >> 1 & 1) as f64, (i >> 2 & 1) as f64))
        .collect();
    let faces = vec![
        [0, 2, 1], [1, 2, 3], // z = 0
        [4, 5, 6], [5, 7, 6], // z = 1
        [0, 1, 4], [1, 5, 4], // y = 0
        [2, 6, 3], [3, 6, 7], // y = 1
        [0, 4, 2], [2, 4, 6], // x = 0
        [1, 3, 5], [3, 7, 5], // x = 1
    ];
    TriMesh::new(vertices, faces).expect("cube is valid")
}

/// Subdivided icosahedron of the given radius centred at the origin.
/// `subdivisions = 3` gives 642 vertices.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::from(*p).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let m: [u32; 3] = std::array::from_fn(|k| {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                    verts.len() as u32 - 1
                })
            });
            next.push([f[0], m[0], m[2]]);
            next.push([f[1], m[1], m[0]]);
            next.push([f[2], m[2], m[1]]);
            next.push([m[0], m[1], m[2]]);
        }
        faces = next;
    }
    for v in &mut verts {
        *v *= radius;
    }
    TriMesh::new(verts, faces).expect("icosphere is valid")
}

/// Open cylinder around +y: `rings + 1` vertex rings of `segments` vertices, no caps.
pub fn open_cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> TriMesh {
    let mut verts = Vec::new();
    for r in 0..=rings {
        let y = height * r as f64 / rings as f64 - height * 0.5;
        for s in 0..segments {
            // Start half a step off the seam so no vertex sits exactly at angle ±π.
            let a = (s as f64 + 0.5) / segments as f64 * std::f64::consts::TAU;
            verts.push(Vec3::new(radius * a.sin(), y, radius * a.cos()));
        }
    }
    let mut faces = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            let a = (r * segments + s) as u32;
            let b = (r * segments + (s + 1) % segments) as u32;
            let c = a + segments as u32;
            let d = b + segments as u32;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    TriMesh::new(verts, faces).expect("cylinder is valid")
}

/// Random-ish closed blob: an icosphere with a smooth radial bump field.
pub fn bumpy_sphere(radius: f64, subdivisions: usize, amplitude: f64) -> TriMesh {
    let mut m = icosphere(1.0, subdivisions);
    for v in &mut m.vertices {
        let bump = 1.0 + amplitude * ((3.0 * v.x).sin() * (2.0 * v.y).cos() + 0.5 * (4.0 * v.z).sin());
        *v *= radius * bump;
    }
    m
}

/// Nearest ray hit of an axis-aligned ellipsoid, as `(ray parameter, outward unit normal)`.
fn ray_ellipsoid(origin: &Vec3, dir: &Vec3, center: &Vec3, radii: &Vec3) -> Option<(f64, Vec3)> {
    let o = (origin - center).component_div(radii);
    let d = dir.component_div(radii);
    let a = d.dot(&d);
    let b = 2.0 * o.dot(&d);
    let c = o.dot(&o) - 1.0;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)].into_iter().find(|&t| t > 0.0)?;
    let p = origin + dir * t - center;
    let n = p.component_div(&radii.component_mul(radii)).normalize();
    Some((t, n))
}

/// Analytic encoded normal map and silhouette of an ellipsoid seen from `cam`,
/// sampled at pixel centres like the rasterizer.
pub fn ellipsoid_normals(center: Vec3, radii: Vec3, cam: &Camera) -> (ImagePlane, ImagePlane) {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let frame = cam.frame();
    let f = cam.focal();
    let mut normal = ImagePlane::zeros(w, h, ImageKind::Normal);
    let mut mask = ImagePlane::zeros(w, h, ImageKind::Silhouette);
    for y in 0..h {
        for x in 0..w {
            let dx = (x as f64 + 0.5 - w as f64 * 0.5) / f;
            let dy = (h as f64 * 0.5 - (y as f64 + 0.5)) / f;
            let dir = (frame.forward + frame.right * dx + frame.up * dy).normalize();
            if let Some((_, n)) = ray_ellipsoid(&cam.position, &dir, &center, &radii) {
                normal.pixel_mut(x, y).copy_from_slice(&encode_normal(&n));
                mask.pixel_mut(x, y)[0] = 1.0;
            }
        }
    }
    (normal, mask)
}

/// Euclidean distance from `p` to the surface of an axis-aligned ellipsoid (bisection on the
/// Lagrange parameter of the closest-point condition).
pub fn ellipsoid_distance(center: Vec3, radii: Vec3, p: &Vec3) -> f64 {
    let y = (p - center).abs();
    let e = radii;
    let f = |t: f64| (0..3).map(|i| (e[i] * y[i] / (t + e[i] * e[i])).powi(2)).sum::<f64>() - 1.0;
    let emin2 = e.min().powi(2);
    let mut lo = -emin2 + 1e-15;
    let mut hi = y.norm() * e.max() + 1.0;
    if f(lo) < 0.0 {
        // Degenerate interior case near the centre: fall back to the nearest principal point.
        let k = e.imin();
        return (e[k] - y[k]).abs();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let x = Vec3::from_fn(|i, _| e[i] * e[i] * y[i] / (t + e[i] * e[i]));
    (x - y).norm()
}

/// Closed surface of revolution about the segment `a`→`b`. `profile` lists
/// (distance along the axis from `a`, radius); the first and last radii must be 0
/// and become pole vertices, the others rings of `segments` vertices.
pub fn revolve(a: Vec3, b: Vec3, profile: &[(f64, f64)], segments: usize) -> TriMesh {
    assert!(profile.len() >= 3 && profile[0].1 == 0.0 && profile[profile.len() - 1].1 == 0.0);
    let d = (b - a).normalize();
    let helper = if d.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = helper.cross(&d).normalize();
    let e2 = d.cross(&e1);
    let rings = &profile[1..profile.len() - 1];
    let mut verts = Vec::new();
    for &(t, r) in rings {
        for s in 0..segments {
            let th = (s as f64 + 0.5) / segments as f64 * std::f64::consts::TAU;
            verts.push(a + d * t + (e1 * th.cos() + e2 * th.sin()) * r);
        }
    }
    let bottom = verts.len() as u32;
    verts.push(a + d * profile[0].0);
    verts.push(a + d * profile[profile.len() - 1].0);
    let top = bottom + 1;
    let ring = |r: usize, s: usize| (r * segments + s % segments) as u32;
    let mut faces = Vec::new();
    for r in 0..rings.len() - 1 {
        for s in 0..segments {
            let (p, q, u, v) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
            faces.push([p, q, v]);
            faces.push([p, v, u]);
        }
    }
    let last = rings.len() - 1;
    for s in 0..segments {
        faces.push([bottom, ring(0, s + 1), ring(0, s)]);
        faces.push([top, ring(last, s), ring(last, s + 1)]);
    }
    TriMesh::new(verts, faces).expect("surface of revolution is valid")
}

/// Closed cylinder from `a` to `b`: `rings + 1` rings of `segments` vertices plus
/// one centre vertex per flat cap.
pub fn capped_cylinder(a: Vec3, b: Vec3, radius: f64, segments: usize, rings: usize) -> TriMesh {
    let len = (b - a).norm();
    let mut profile = vec![(0.0, 0.0)];
    profile.extend((0..=rings).map(|r| (len * r as f64 / rings as f64, radius)));
    profile.push((len, 0.0));
    revolve(a, b, &profile, segments)
}

/// Cylinder from `a` to `b` with hemispherical ends (the surface extends `radius`
/// past both points); `rings` cylinder bands and `segments / 4` latitude bands per end.
pub fn capsule(a: Vec3, b: Vec3, radius: f64, segments: usize, rings: usize) -> TriMesh {
    let len = (b - a).norm();
    let lat = (segments / 4).max(1);
    let cap = |j: usize| {
        let th = std::f64::consts::FRAC_PI_2 * j as f64 / lat as f64;
        (radius * th.cos(), radius * th.sin())
    };
    let mut profile = Vec::new();
    for j in 0..lat {
        let (h, r) = cap(j);
        profile.push((-h, r));
    }
    profile.extend((0..=rings).map(|r| (len * r as f64 / rings as f64, radius)));
    for j in (0..lat).rev() {
        let (h, r) = cap(j);
        profile.push((len + h, r));
    }
    revolve(a, b, &profile, segments)
}

/// Part labels of [`humanoid`], in label order. Left is +x (the body faces +z).
pub const HUMANOID_PARTS: [&str; 5] = ["trunk", "left_arm", "right_arm", "left_leg", "right_leg"];

/// T-pose body of five disjoint capsules inside `[-0.5, 0.5]^3`, roughly matching
/// the canonical skeleton, with per-vertex part labels.
pub fn humanoid(segments: usize) -> TriMesh {
    let rings = |len: f64| ((len * segments as f64 / 0.6).ceil() as usize).max(1);
    let pieces = [
        (Vec3::new(0.0, 0.05, 0.0), Vec3::new(0.0, 0.30, 0.0), 0.11),
        (Vec3::new(0.21, 0.28, 0.0), Vec3::new(0.40, 0.28, 0.0), 0.05),
        (Vec3::new(-0.21, 0.28, 0.0), Vec3::new(-0.40, 0.28, 0.0), 0.05),
        (Vec3::new(0.075, -0.16, 0.0), Vec3::new(0.075, -0.42, 0.0), 0.05),
        (Vec3::new(-0.075, -0.16, 0.0), Vec3::new(-0.075, -0.42, 0.0), 0.05),
    ];
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    for (label, (a, b, r)) in pieces.into_iter().enumerate() {
        let c = capsule(a, b, r, segments, rings((b - a).norm()));
        let base = vertices.len() as u32;
        faces.extend(c.faces.iter().map(|f| f.map(|i| i + base)));
        labels.extend(std::iter::repeat_n(label as u32, c.vertices.len()));
        vertices.extend(c.vertices);
    }
    TriMesh::new(vertices, faces)
        .and_then(|m| m.with_labels(labels))
        .expect("humanoid is valid")
}

/// Smooth procedural texture in [0.2, 0.8]: per-chart waves with a chart-dependent
/// phase, gray outside the charts.
pub fn gt_texture(layout: &crate::unwrap::AtlasLayout) -> crate::raster::TextureAtlas {
    use std::f64::consts::TAU;
    let mut atlas = crate::raster::TextureAtlas::filled(layout.atlas_size, 0.5, layout.chart_boxes());
    for (ci, b) in layout.chart_boxes().iter().enumerate() {
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                let fx = (x - b.x0) as f64 / b.width() as f64;
                let fy = (y - b.y0) as f64 / b.height() as f64;
                let i = atlas.index(x, y);
                for k in 0..3 {
                    let phase = 0.9 * ci as f64 + 2.1 * k as f64;
                    atlas.texels[i + k] = 0.5 + 0.2 * (TAU * 2.0 * fx + phase).sin() + 0.1 * (TAU * fy + 0.5 * phase).cos();
                }
            }
        }
    }
    atlas
}

/// Unwrapped [`humanoid`] with its layout and [`gt_texture`].
pub fn textured_humanoid(
    segments: usize,
    atlas_size: usize,
) -> (TriMesh, crate::unwrap::AtlasLayout, crate::raster::TextureAtlas) {
    let body = humanoid(segments);
    let cfg = crate::unwrap::UnwrapConfig {
        atlas_size,
        ..Default::default()
    };
    let out = crate::unwrap::unwrap_mesh(&body, body.part_labels.as_deref(), &cfg).expect("humanoid unwraps");
    let tex = gt_texture(&out.layout);
    (out.mesh, out.layout, tex)
}

/// Color renderings and silhouettes of `mesh` under `atlas` from every camera.
pub fn color_views(mesh: &TriMesh, atlas: &crate::raster::TextureAtlas, cameras: &[Camera]) -> Vec<crate::texture::ColorView> {
    cameras
        .iter()
        .map(|c| {
            let b = crate::raster::render(mesh, c, Some(atlas)).expect("renders");
            crate::texture::ColorView {
                camera: c.clone(),
                image: b.color.expect("color requested"),
                mask: b.silhouette,
            }
        })
        .collect()
}

/// Sizes of the synthetic ground-truth bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBundleSpec {
    pub image_size: u32,
    pub atlas_size: usize,
    pub resolution: usize,
    pub sculpt_iters: usize,
    pub bake_iters: usize,
}

impl Default for GtBundleSpec {
    fn default() -> Self {
        GtBundleSpec {
            image_size: 128,
            atlas_size: 256,
            resolution: 48,
            sculpt_iters: 100,
            bake_iters: 500,
        }
    }
}

/// Writes a self-consistent pipeline input bundle into `dir`: a faceted coarse
/// humanoid with labels, the 7-view rig, and normal maps, masks and color images
/// rendered from a finely tessellated, textured humanoid. Returns the config path.
pub fn write_gt_bundle(dir: &std::path::Path, spec: &GtBundleSpec) -> crate::Result<std::path::PathBuf> {
    use crate::scene::{instantiate_rig, RigSpec};
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let coarse = humanoid(8);
    crate::mesh::save_mesh(&coarse, dir.join("coarse.obj"))?;
    let (fine, _, tex) = textured_humanoid(32, spec.atlas_size);
    let rig = instantiate_rig(&RigSpec {
        image_size: spec.image_size,
        ..RigSpec::default()
    })?;
    crate::camera::save_camera_rig(&rig, dir.join("rig.json"))?;
    for (i, cam) in rig.cameras.iter().enumerate() {
        let b = crate::raster::render(&fine, cam, Some(&tex))?;
        crate::image::save_image(b.normal.as_ref().expect("normals are always shaded"), dir.join(format!("n_{i:02}.pfm")))?;
        crate::image::save_image(&b.silhouette, dir.join(format!("s_{i:02}.png")))?;
        crate::image::save_image(b.color.as_ref().expect("color requested"), dir.join(format!("v_{i:02}.png")))?;
    }
    let config = format!(
        "seed = 7\nout_dir = \"out\"\n\n[inputs]\ncoarse_mesh = \"coarse.obj\"\ncameras = \"rig.json\"\nnormals = \"n_*.pfm\"\nmasks = \"s_*.png\"\nimages = \"v_*.png\"\n\n\
         [grid]\nresolution = {}\n\n[sculpt]\niters = {}\nlr = 0.003\n\n[unwrap]\natlas_size = {}\n\n[texture]\niters = {}\n",
        spec.resolution, spec.sculpt_iters, spec.atlas_size, spec.bake_iters
    );
    let path = dir.join("pipeline.toml");
    std::fs::write(&path, config).map_err(|e| crate::Error::io(&path, e))?;
    Ok(path)
}
