//! Deterministic software rasterizer with analytic backward passes.
//!
//! Forward: pinhole projection, one sample at each pixel centre, z-buffer where a
//! strictly nearer fragment wins (ties keep the lower face index), no culling.
//! Backward passes treat coverage (face and barycentrics per pixel) as constant.

mod atlas;

pub use atlas::{ChartBox, TextureAtlas, GUTTER};

use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{decode_normal, encode_normal, ImageKind, ImagePlane};
use crate::math::Vec3;
use crate::mesh::{face_normal, vertex_normals, vertex_normals_backward};
use crate::mesh::TriMesh;

const TILE: usize = 32;
/// Faces with a vertex at or closer than this depth are skipped.
pub const NEAR_DEPTH: f64 = 1e-6;

/// Rasterized fragment: face, perspective-correct barycentrics, view depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub face: u32,
    pub bary: [f64; 3],
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub width: usize,
    pub height: usize,
    pub color: Option<ImagePlane>,
    pub normal: Option<ImagePlane>,
    pub silhouette: ImagePlane,
    /// Row-major, one entry per pixel.
    pub coverage: Vec<Option<Coverage>>,
}

impl FrameBundle {
    pub fn covered(&self) -> usize {
        self.coverage.iter().filter(|c| c.is_some()).count()
    }
}

#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Visibility pass: coverage record for every pixel hit by the mesh.
pub fn rasterize(mesh: &TriMesh, cam: &Camera) -> Result<Vec<Option<Coverage>>> {
    cam.validate()?;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let frame = cam.frame();
    let f = cam.focal();
    let proj: Vec<(f64, f64, f64)> = mesh
        .vertices
        .iter()
        .map(|p| {
            let v = cam.to_view(&frame, p);
            (w as f64 * 0.5 + f * v.x / v.z, h as f64 * 0.5 - f * v.y / v.z, v.z)
        })
        .collect();

    let (tx, ty) = (w.div_ceil(TILE), h.div_ceil(TILE));
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tx * ty];
    for (fi, face) in mesh.faces.iter().enumerate() {
        let p = face.map(|i| proj[i as usize]);
        if p.iter().any(|q| !(q.2 > NEAR_DEPTH)) {
            continue;
        }
        let area = edge((p[0].0, p[0].1), (p[1].0, p[1].1), (p[2].0, p[2].1));
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let Some((x0, x1, y0, y1)) = pixel_span(&p, w, h) else {
            continue;
        };
        for by in y0 / TILE..=y1 / TILE {
            for bx in x0 / TILE..=x1 / TILE {
                bins[by * tx + bx].push(fi as u32);
            }
        }
    }

    let tiles: Vec<Vec<Option<Coverage>>> = (0..tx * ty)
        .into_par_iter()
        .map(|t| {
            let (bx, by) = (t % tx, t / tx);
            let (ox, oy) = (bx * TILE, by * TILE);
            let (tw, th) = (TILE.min(w - ox), TILE.min(h - oy));
            let mut out: Vec<Option<Coverage>> = vec![None; tw * th];
            for &fi in &bins[t] {
                let face = mesh.faces[fi as usize];
                let p = face.map(|i| proj[i as usize]);
                let s = [(p[0].0, p[0].1), (p[1].0, p[1].1), (p[2].0, p[2].1)];
                let area = edge(s[0], s[1], s[2]);
                let (x0, x1, y0, y1) = pixel_span(&p, w, h).expect("binned face has a span");
                for y in y0.max(oy)..=y1.min(oy + th - 1) {
                    for x in x0.max(ox)..=x1.min(ox + tw - 1) {
                        let c = (x as f64 + 0.5, y as f64 + 0.5);
                        let l = [edge(s[1], s[2], c) / area, edge(s[2], s[0], c) / area, edge(s[0], s[1], c) / area];
                        if l.iter().any(|&v| v < 0.0) {
                            continue;
                        }
                        let q = [l[0] / p[0].2, l[1] / p[1].2, l[2] / p[2].2];
                        let sum = q[0] + q[1] + q[2];
                        let depth = 1.0 / sum;
                        let slot = &mut out[(y - oy) * tw + (x - ox)];
                        if slot.is_none_or(|o| depth < o.depth) {
                            *slot = Some(Coverage {
                                face: fi,
                                bary: [q[0] / sum, q[1] / sum, q[2] / sum],
                                depth,
                            });
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut coverage = vec![None; w * h];
    for (t, tile) in tiles.into_iter().enumerate() {
        let (ox, oy) = ((t % tx) * TILE, (t / tx) * TILE);
        let tw = TILE.min(w - ox);
        for (i, c) in tile.into_iter().enumerate() {
            coverage[(oy + i / tw) * w + ox + i % tw] = c;
        }
    }
    Ok(coverage)
}

/// Inclusive pixel range whose centres may fall inside the projected triangle.
fn pixel_span(p: &[(f64, f64, f64); 3], w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    let minx = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
    let maxx = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
    let miny = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
    let maxy = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (minx - 0.5).ceil().max(0.0);
    let x1 = (maxx - 0.5).floor().min(w as f64 - 1.0);
    let y0 = (miny - 0.5).ceil().max(0.0);
    let y1 = (maxy - 0.5).floor().min(h as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return None;
    }
    Some((x0 as usize, x1 as usize, y0 as usize, y1 as usize))
}

pub fn silhouette(coverage: &[Option<Coverage>], width: usize, height: usize) -> ImagePlane {
    let data = coverage.iter().map(|c| if c.is_some() { 1.0 } else { 0.0 }).collect();
    ImagePlane::from_data(width, height, ImageKind::Silhouette, data).expect("coverage shape")
}

fn pixel_normal(vn: &[Vec3], mesh: &TriMesh, c: &Coverage) -> (Vec3, f64) {
    let face = mesh.faces[c.face as usize];
    let m: Vec3 = (0..3).map(|k| vn[face[k] as usize] * c.bary[k]).sum();
    let len = m.norm();
    if len > 0.0 {
        (m / len, len)
    } else {
        let [a, b, cc] = mesh.triangle(c.face as usize);
        (face_normal(&a, &b, &cc), 0.0)
    }
}

/// Encoded world-space normals `(n + 1) / 2` under fixed coverage; background is 0.
pub fn shade_normals(mesh: &TriMesh, coverage: &[Option<Coverage>], width: usize, height: usize) -> ImagePlane {
    let vn = vertex_normals(mesh);
    let data: Vec<f64> = coverage
        .par_iter()
        .flat_map_iter(|c| match c {
            Some(c) => encode_normal(&pixel_normal(&vn, mesh, c).0),
            None => [0.0; 3],
        })
        .collect();
    ImagePlane::from_data(width, height, ImageKind::Normal, data).expect("coverage shape")
}

pub(crate) fn pixel_uv(mesh: &TriMesh, uvs: &[[f64; 2]], c: &Coverage) -> (f64, f64) {
    let face = mesh.faces[c.face as usize];
    let mut uv = (0.0, 0.0);
    for k in 0..3 {
        let t = uvs[face[k] as usize];
        uv.0 += c.bary[k] * t[0];
        uv.1 += c.bary[k] * t[1];
    }
    uv
}

pub(crate) fn require_uvs(mesh: &TriMesh) -> Result<&[[f64; 2]]> {
    mesh.uvs
        .as_deref()
        .ok_or_else(|| Error::validation("render", "color requested but the mesh has no UVs"))
}

/// Bilinearly sampled atlas colors under fixed coverage; background is 0.
pub fn shade_color(
    mesh: &TriMesh,
    atlas: &TextureAtlas,
    coverage: &[Option<Coverage>],
    width: usize,
    height: usize,
) -> Result<ImagePlane> {
    let uvs = require_uvs(mesh)?;
    let data: Vec<f64> = coverage
        .par_iter()
        .flat_map_iter(|c| match c {
            Some(c) => {
                let (u, v) = pixel_uv(mesh, uvs, c);
                atlas.sample(u, v)
            }
            None => [0.0; 3],
        })
        .collect();
    ImagePlane::from_data(width, height, ImageKind::Color, data)
}

/// Renders silhouette and normals, plus color when an atlas is given.
pub fn render(mesh: &TriMesh, cam: &Camera, atlas: Option<&TextureAtlas>) -> Result<FrameBundle> {
    if atlas.is_some() {
        require_uvs(mesh)?;
    }
    let coverage = rasterize(mesh, cam)?;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let color = atlas.map(|a| shade_color(mesh, a, &coverage, w, h)).transpose()?;
    Ok(FrameBundle {
        width: w,
        height: h,
        color,
        normal: Some(shade_normals(mesh, &coverage, w, h)),
        silhouette: silhouette(&coverage, w, h),
        coverage,
    })
}

fn check_grad_shape(bundle: &FrameBundle, grad: &ImagePlane, channels: usize) -> Result<()> {
    if grad.width != bundle.width || grad.height != bundle.height || grad.channels != channels {
        return Err(Error::ShapeMismatch(format!(
            "gradient image {}x{}x{} vs frame {}x{}x{channels}",
            grad.width, grad.height, grad.channels, bundle.width, bundle.height
        )));
    }
    Ok(())
}

/// Gradient of a loss on the rendered color image with respect to atlas texels
/// (same layout as `atlas.texels`).
pub fn backward_color(bundle: &FrameBundle, mesh: &TriMesh, atlas: &TextureAtlas, d_color: &ImagePlane) -> Result<Vec<f64>> {
    check_grad_shape(bundle, d_color, 3)?;
    let uvs = require_uvs(mesh)?;
    let mut grad = vec![0.0; atlas.texels.len()];
    for (p, c) in bundle.coverage.iter().enumerate() {
        let Some(c) = c else { continue };
        let g = &d_color.data[p * 3..p * 3 + 3];
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let (u, v) = pixel_uv(mesh, uvs, c);
        for (t, w) in atlas.taps(u, v) {
            for k in 0..3 {
                grad[t * 3 + k] += w * g[k];
            }
        }
    }
    Ok(grad)
}

/// Gradient of a loss on the encoded normal image with respect to vertex positions.
pub fn backward_normal(bundle: &FrameBundle, mesh: &TriMesh, d_normal: &ImagePlane) -> Result<Vec<Vec3>> {
    check_grad_shape(bundle, d_normal, 3)?;
    let vn = vertex_normals(mesh);
    let mut d_vn = vec![Vec3::zeros(); mesh.vertices.len()];
    for (p, c) in bundle.coverage.iter().enumerate() {
        let Some(c) = c else { continue };
        let g = &d_normal.data[p * 3..p * 3 + 3];
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let (n, len) = pixel_normal(&vn, mesh, c);
        if len == 0.0 {
            continue;
        }
        let dn = Vec3::new(g[0], g[1], g[2]) * 0.5;
        let dm = (dn - n * n.dot(&dn)) / len;
        let face = mesh.faces[c.face as usize];
        for k in 0..3 {
            d_vn[face[k] as usize] += dm * c.bary[k];
        }
    }
    Ok(vertex_normals_backward(mesh, &d_vn))
}

/// Decoded normal at a pixel of an encoded normal image.
pub fn normal_at(img: &ImagePlane, x: usize, y: usize) -> Vec3 {
    decode_normal(img.pixel(x, y))
}
