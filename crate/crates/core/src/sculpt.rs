//! Geometry refinement: optimize grid SDF values and offsets so the extracted
//! surface reproduces target normal maps (masked mean squared normal error).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{decode_normal, ImageKind, ImagePlane};
use crate::math::{derive_seed, Vec3};
use crate::mesh::TriMesh;
use crate::optim::{flatten3, unflatten3, Adam};
use crate::raster::{backward_normal, render};
use crate::scene::orbit_camera;
use crate::tetra::pyramid::{FieldParam, Pyramid};
use crate::tetra::{extract, surface_backward, TetGrid};

/// Elevation range of uniformly sampled views, in degrees.
pub const UNIFORM_ELEVATION: (f64, f64) = (-15.0, 30.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CameraSampling {
    /// Cycle through the target cameras.
    Rig,
    /// Orbit cameras with azimuth ~ U[0, 360) and elevation ~ U[-15, 30] degrees.
    UniformSphere {
        seed: u64,
        radius: f64,
        center: [f64; 3],
        image_size: u32,
        fov_y: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SculptConfig {
    pub iters: usize,
    pub lr: f64,
    pub views_per_iter: usize,
    pub camera_sampling: CameraSampling,
    pub laplacian_weight: f64,
    /// Parameterization of the SDF update.
    pub sdf_param: FieldParam,
    /// Offsets move by this factor times the raw parameter step.
    pub offset_scale: f64,
}

impl Default for SculptConfig {
    fn default() -> Self {
        SculptConfig {
            iters: 100,
            lr: 0.01,
            views_per_iter: 4,
            camera_sampling: CameraSampling::Rig,
            laplacian_weight: 0.0,
            sdf_param: FieldParam::Multires {
                coarsest: 2,
                finest: 0,
                decay: 0.7,
            },
            offset_scale: 0.05,
        }
    }
}

impl SculptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::validation("sculpt", format!("lr {} must be > 0", self.lr)));
        }
        if self.views_per_iter == 0 {
            return Err(Error::validation("sculpt", "views_per_iter must be >= 1"));
        }
        if !(self.laplacian_weight >= 0.0) {
            return Err(Error::validation("sculpt", "laplacian_weight must be >= 0"));
        }
        if !(self.offset_scale >= 0.0) {
            return Err(Error::validation("sculpt", "offset_scale must be >= 0"));
        }
        Ok(())
    }
}

/// A supervising view: camera, encoded normal map and binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalTarget {
    pub camera: Camera,
    pub normal: ImagePlane,
    pub mask: ImagePlane,
}

impl NormalTarget {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.camera.width as usize, self.camera.height as usize);
        for (img, kind) in [(&self.normal, ImageKind::Normal), (&self.mask, ImageKind::Silhouette)] {
            if img.width != w || img.height != h || img.kind != kind {
                return Err(Error::ShapeMismatch(format!(
                    "target {:?} image is {}x{}, camera is {w}x{h}",
                    kind, img.width, img.height
                )));
            }
        }
        self.mask.validate()?;
        Ok(())
    }
}

/// Provider of supervision: a fixed set of views, optionally able to synthesize new ones.
pub trait TargetSource: Sync {
    fn fixed(&self) -> &[NormalTarget];

    /// Target for an arbitrary camera, if the source can produce one.
    fn synthesize(&self, _camera: &Camera) -> Option<NormalTarget> {
        None
    }
}

impl TargetSource for [NormalTarget] {
    fn fixed(&self) -> &[NormalTarget] {
        self
    }
}

impl TargetSource for Vec<NormalTarget> {
    fn fixed(&self) -> &[NormalTarget] {
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SculptReport {
    /// Objective (normal loss plus regularizer) at each iteration, before its step.
    pub losses: Vec<f64>,
    /// Mean normal loss over all fixed targets before the first and after the last step.
    pub initial_full_loss: f64,
    pub final_full_loss: f64,
    pub final_vertices: usize,
    pub final_faces: usize,
}

/// Intersection of two binary masks.
pub fn mask_intersection(a: &ImagePlane, b: &ImagePlane) -> Result<ImagePlane> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "masks {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let data = a.data.iter().zip(&b.data).map(|(x, y)| if *x == 1.0 && *y == 1.0 { 1.0 } else { 0.0 }).collect();
    ImagePlane::from_data(a.width, a.height, ImageKind::Silhouette, data)
}

fn check_normal_inputs(rendered: &ImagePlane, target: &ImagePlane, mask: &ImagePlane) -> Result<()> {
    if rendered.width != target.width
        || rendered.height != target.height
        || rendered.channels != 3
        || target.channels != 3
        || mask.width != rendered.width
        || mask.height != rendered.height
        || mask.channels != 1
    {
        return Err(Error::ShapeMismatch(format!(
            "normal loss inputs {}x{}x{}, {}x{}x{}, mask {}x{}x{}",
            rendered.width,
            rendered.height,
            rendered.channels,
            target.width,
            target.height,
            target.channels,
            mask.width,
            mask.height,
            mask.channels
        )));
    }
    Ok(())
}

/// Mean over masked pixels of |decode(rendered) − decode(target)|²; 0 for an empty mask.
pub fn normal_loss(rendered: &ImagePlane, target: &ImagePlane, mask: &ImagePlane) -> Result<f64> {
    Ok(normal_loss_grad(rendered, target, mask)?.0)
}

/// [`normal_loss`] and its gradient with respect to the encoded rendered image.
pub fn normal_loss_grad(rendered: &ImagePlane, target: &ImagePlane, mask: &ImagePlane) -> Result<(f64, ImagePlane)> {
    check_normal_inputs(rendered, target, mask)?;
    let mut grad = ImagePlane::zeros(rendered.width, rendered.height, ImageKind::Normal);
    let count = mask.data.iter().filter(|&&m| m == 1.0).count();
    if count == 0 {
        return Ok((0.0, grad));
    }
    let inv = 1.0 / count as f64;
    let mut sum = 0.0;
    for (p, &m) in mask.data.iter().enumerate() {
        if m != 1.0 {
            continue;
        }
        let r = &rendered.data[p * 3..p * 3 + 3];
        let t = &target.data[p * 3..p * 3 + 3];
        let d = decode_normal(r) - decode_normal(t);
        sum += d.norm_squared();
        for c in 0..3 {
            // d/de of (2e − 1 − n_t)² is 4 (n_r − n_t).
            grad.data[p * 3 + c] = 4.0 * d[c] * inv;
        }
    }
    Ok((sum * inv, grad))
}

/// Uniform Laplacian energy (1/V) Σ |v − mean(neighbours)|² and its gradient.
pub fn laplacian_energy(mesh: &TriMesh) -> (f64, Vec<Vec3>) {
    let nbrs = mesh.vertex_neighbors();
    let inv = 1.0 / mesh.vertices.len().max(1) as f64;
    let mut grad = vec![Vec3::zeros(); mesh.vertices.len()];
    let mut e = 0.0;
    for (i, nb) in nbrs.iter().enumerate() {
        if nb.is_empty() {
            continue;
        }
        let k = 1.0 / nb.len() as f64;
        let mean: Vec3 = nb.iter().map(|&j| mesh.vertices[j as usize]).sum::<Vec3>() * k;
        let d = mesh.vertices[i] - mean;
        e += d.norm_squared();
        grad[i] += d * (2.0 * inv);
        for &j in nb {
            grad[j as usize] -= d * (2.0 * inv * k);
        }
    }
    (e * inv, grad)
}

/// Camera for view `slot` of `iteration`. Rig mode cycles `cameras`; uniform mode is a
/// deterministic function of (seed, iteration, slot).
pub fn sample_view(cfg: &SculptConfig, cameras: &[Camera], iteration: usize, slot: usize) -> Result<Camera> {
    match &cfg.camera_sampling {
        CameraSampling::Rig => {
            if cameras.is_empty() {
                return Err(Error::validation("sculpt", "rig sampling needs at least one camera"));
            }
            Ok(cameras[(iteration * cfg.views_per_iter + slot) % cameras.len()].clone())
        }
        CameraSampling::UniformSphere {
            seed,
            radius,
            center,
            image_size,
            fov_y,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(*seed, iteration as u64), slot as u64));
            let az = rng.random::<f64>() * 360.0;
            let el = UNIFORM_ELEVATION.0 + rng.random::<f64>() * (UNIFORM_ELEVATION.1 - UNIFORM_ELEVATION.0);
            Ok(orbit_camera(Vec3::from(*center), *radius, az, el, *image_size, *fov_y))
        }
    }
}

fn iteration_targets<'a, S: TargetSource + ?Sized>(
    source: &'a S,
    cfg: &SculptConfig,
    iteration: usize,
) -> Result<Vec<std::borrow::Cow<'a, NormalTarget>>> {
    use std::borrow::Cow;
    let fixed = source.fixed();
    (0..cfg.views_per_iter)
        .map(|slot| match cfg.camera_sampling {
            CameraSampling::Rig => {
                if fixed.is_empty() {
                    return Err(Error::validation("sculpt", "no target views"));
                }
                Ok(Cow::Borrowed(&fixed[(iteration * cfg.views_per_iter + slot) % fixed.len()]))
            }
            CameraSampling::UniformSphere { .. } => {
                let cam = sample_view(cfg, &[], iteration, slot)?;
                source.synthesize(&cam).map(Cow::Owned).ok_or_else(|| {
                    Error::Config("uniform-sphere sampling needs a target source that renders arbitrary views".into())
                })
            }
        })
        .collect()
}

/// Normal loss of `mesh` against one target, with the gradient on mesh vertices.
pub fn view_loss_grad(mesh: &TriMesh, target: &NormalTarget) -> Result<(f64, Vec<Vec3>)> {
    let bundle = render(mesh, &target.camera, None)?;
    let mask = mask_intersection(&bundle.silhouette, &target.mask)?;
    let rendered = bundle.normal.as_ref().expect("render always shades normals");
    let (loss, d) = normal_loss_grad(rendered, &target.normal, &mask)?;
    let g = backward_normal(&bundle, mesh, &d)?;
    Ok((loss, g))
}

/// Mean normal loss over `targets`.
pub fn evaluate(mesh: &TriMesh, targets: &[NormalTarget]) -> Result<f64> {
    if targets.is_empty() {
        return Ok(0.0);
    }
    let losses: Vec<f64> = targets
        .par_iter()
        .map(|t| {
            let bundle = render(mesh, &t.camera, None)?;
            let mask = mask_intersection(&bundle.silhouette, &t.mask)?;
            normal_loss(bundle.normal.as_ref().unwrap(), &t.normal, &mask)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / targets.len() as f64)
}

/// Objective at the current grid and its gradient on (sdf, offsets).
pub fn objective<S: TargetSource + ?Sized>(
    grid: &TetGrid,
    source: &S,
    cfg: &SculptConfig,
    iteration: usize,
) -> Result<(f64, Vec<f64>, Vec<Vec3>, TriMesh)> {
    let surface = extract(grid).map_err(|e| match e {
        Error::EmptySurface => Error::SurfaceVanished(iteration),
        other => other,
    })?;
    let mesh = &surface.mesh;
    let targets = iteration_targets(source, cfg, iteration)?;
    let per_view: Vec<(f64, Vec<Vec3>)> = targets.par_iter().map(|t| view_loss_grad(mesh, t)).collect::<Result<_>>()?;
    let scale = 1.0 / per_view.len() as f64;
    let mut loss = 0.0;
    let mut d_vertices = vec![Vec3::zeros(); mesh.vertices.len()];
    for (l, g) in &per_view {
        loss += l * scale;
        for (d, gi) in d_vertices.iter_mut().zip(g) {
            *d += gi * scale;
        }
    }
    if cfg.laplacian_weight > 0.0 {
        let (e, g) = laplacian_energy(mesh);
        loss += cfg.laplacian_weight * e;
        for (d, gi) in d_vertices.iter_mut().zip(&g) {
            *d += gi * cfg.laplacian_weight;
        }
    }
    let (d_sdf, d_off) = surface_backward(grid, &surface, &d_vertices);
    Ok((loss, d_sdf, d_off, surface.mesh))
}

/// Runs the refinement loop and returns the final extracted mesh.
pub fn sculpt<S: TargetSource + ?Sized>(grid: &mut TetGrid, source: &S, cfg: &SculptConfig) -> Result<(TriMesh, SculptReport)> {
    cfg.validate()?;
    for t in source.fixed() {
        t.validate()?;
    }
    if source.fixed().is_empty() && matches!(cfg.camera_sampling, CameraSampling::Rig) {
        return Err(Error::validation("sculpt", "no target views"));
    }
    let initial_mesh = extract(grid).map_err(|_| Error::SurfaceVanished(0))?.mesh;
    let initial_full_loss = evaluate(&initial_mesh, source.fixed())?;

    let pyramid = Pyramid::for_param(grid.resolution, &cfg.sdf_param);
    let base_sdf = grid.sdf.clone();
    let n_sdf = pyramid.len();
    let mut params = vec![0.0; n_sdf];
    params.extend(flatten3(&grid.offsets));
    if cfg.offset_scale > 0.0 {
        for p in &mut params[n_sdf..] {
            *p /= cfg.offset_scale;
        }
    }
    let mut opt = Adam::new(params.len(), cfg.lr);
    let mut losses = Vec::with_capacity(cfg.iters);
    let mut grads = vec![0.0; params.len()];
    for it in 0..cfg.iters {
        let (loss, d_sdf, d_off, _) = objective(grid, source, cfg, it)?;
        losses.push(loss);
        grads[..n_sdf].copy_from_slice(&pyramid.restrict(&d_sdf));
        for (g, d) in grads[n_sdf..].chunks_exact_mut(3).zip(&d_off) {
            for k in 0..3 {
                g[k] = d[k] * cfg.offset_scale;
            }
        }
        opt.step(&mut params, &grads)?;
        grid.sdf.copy_from_slice(&base_sdf);
        pyramid.prolong_add(&params[..n_sdf], &mut grid.sdf);
        let offsets: Vec<f64> = params[n_sdf..].iter().map(|p| p * cfg.offset_scale).collect();
        unflatten3(&offsets, &mut grid.offsets);
        grid.project_offsets();
        if cfg.offset_scale > 0.0 {
            for (p, o) in params[n_sdf..].chunks_exact_mut(3).zip(&grid.offsets) {
                for k in 0..3 {
                    p[k] = o[k] / cfg.offset_scale;
                }
            }
        }
        log::debug!("sculpt iteration {it}: loss {loss:.6e}");
    }
    let mesh = extract(grid).map_err(|_| Error::SurfaceVanished(cfg.iters))?.mesh;
    let final_full_loss = evaluate(&mesh, source.fixed())?;
    Ok((
        mesh.clone(),
        SculptReport {
            losses,
            initial_full_loss,
            final_full_loss,
            final_vertices: mesh.vertices.len(),
            final_faces: mesh.faces.len(),
        },
    ))
}
