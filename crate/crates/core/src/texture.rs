//! Texture recovery: Adam on atlas texels against multi-view color images,
//! with a total-variation prior and a diffusion fill for unseen texels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, ViewTag};
use crate::error::{Error, Result};
use crate::image::{ImageKind, ImagePlane};
use crate::mesh::TriMesh;
use crate::optim::Adam;
use crate::raster::{pixel_uv, rasterize, require_uvs, shade_color, silhouette, ChartBox, TextureAtlas};
use crate::unwrap::AtlasLayout;

/// Jacobi sweeps of the unseen-texel fill.
pub const FILL_SWEEPS: usize = 64;

/// Reported PSNR ceiling, reached when the masked error is (numerically) zero.
pub const PSNR_CAP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TexInit {
    MidGray,
    Zero,
    Uniform { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TexConfig {
    pub iters: usize,
    pub lr: f64,
    pub lambda_tv: f64,
    pub w_front_back: f64,
    pub w_other: f64,
    pub init: TexInit,
}

impl Default for TexConfig {
    fn default() -> Self {
        TexConfig {
            iters: 500,
            lr: 0.001,
            lambda_tv: 1.0,
            w_front_back: 1.0,
            w_other: 0.2,
            init: TexInit::MidGray,
        }
    }
}

impl TexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::validation("texture config", "lr must be positive"));
        }
        if !(self.lambda_tv >= 0.0) {
            return Err(Error::validation("texture config", "lambda_tv must be >= 0"));
        }
        if !(self.w_front_back >= 0.0 && self.w_other >= 0.0) {
            return Err(Error::validation("texture config", "view weights must be >= 0"));
        }
        Ok(())
    }

    pub fn view_weight(&self, tag: ViewTag) -> f64 {
        match tag {
            ViewTag::Front | ViewTag::Back => self.w_front_back,
            ViewTag::Other => self.w_other,
        }
    }
}

/// A target color image with its foreground mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorView {
    pub camera: Camera,
    pub image: ImagePlane,
    pub mask: ImagePlane,
}

impl ColorView {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.camera.width as usize, self.camera.height as usize);
        if self.image.kind != ImageKind::Color || self.image.width != w || self.image.height != h {
            return Err(Error::ShapeMismatch(format!(
                "color image {}x{} ({:?}) for a {w}x{h} camera",
                self.image.width, self.image.height, self.image.kind
            )));
        }
        if self.mask.kind != ImageKind::Silhouette || !self.mask.same_shape(&ImagePlane::zeros(w, h, ImageKind::Silhouette)) {
            return Err(Error::ShapeMismatch(format!("mask {}x{} for a {w}x{h} camera", self.mask.width, self.mask.height)));
        }
        if self.mask.data.iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::validation("mask", "values must be 0 or 1"));
        }
        Ok(())
    }
}

/// Anisotropic total variation: mean over texels and channels of
/// |forward x difference| + |forward y difference|, zero past the border.
pub fn tv_loss(atlas: &TextureAtlas) -> f64 {
    tv_loss_grad(atlas).0
}

/// [`tv_loss`] and its sign subgradient (sign(0) = 0).
pub fn tv_loss_grad(atlas: &TextureAtlas) -> (f64, Vec<f64>) {
    let (s, c) = (atlas.size, atlas.channels);
    let t = &atlas.texels;
    let norm = 1.0 / (s * s * c) as f64;
    let mut grad = vec![0.0; t.len()];
    let mut sum = 0.0;
    for y in 0..s {
        for x in 0..s {
            let i = (y * s + x) * c;
            for (step, ok) in [(c, x + 1 < s), (s * c, y + 1 < s)] {
                if !ok {
                    continue;
                }
                for k in 0..c {
                    let d = t[i + step + k] - t[i + k];
                    sum += d.abs();
                    let g = if d > 0.0 {
                        norm
                    } else if d < 0.0 {
                        -norm
                    } else {
                        0.0
                    };
                    grad[i + step + k] += g;
                    grad[i + k] -= g;
                }
            }
        }
    }
    (sum * norm, grad)
}

/// One foreground pixel of a view: its atlas taps and target color.
#[derive(Debug, Clone, Copy)]
struct Sample {
    taps: [(usize, f64); 4],
    target: [f64; 3],
}

/// A view reduced to the pixels in target mask ∩ rendered silhouette.
#[derive(Debug, Clone)]
struct Prepared {
    tag: ViewTag,
    samples: Vec<Sample>,
}

impl Prepared {
    fn residuals(&self, texels: &[f64]) -> Vec<[f64; 3]> {
        self.samples
            .iter()
            .map(|s| {
                let mut r = [-s.target[0], -s.target[1], -s.target[2]];
                for &(t, w) in &s.taps {
                    for k in 0..3 {
                        r[k] += w * texels[t * 3 + k];
                    }
                }
                r
            })
            .collect()
    }

    /// Masked mean squared error over pixels and channels.
    fn mse(&self, texels: &[f64]) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sq: f64 = self.residuals(texels).iter().flatten().map(|r| r * r).sum();
        sq / (3 * self.samples.len()) as f64
    }
}

fn prepare(mesh: &TriMesh, atlas_size: usize, views: &[ColorView]) -> Result<Vec<Prepared>> {
    let uvs = require_uvs(mesh)?;
    let taps_atlas = TextureAtlas::filled(atlas_size, 0.0, Vec::new());
    views
        .par_iter()
        .map(|v| {
            v.validate()?;
            let coverage = rasterize(mesh, &v.camera)?;
            let samples = coverage
                .iter()
                .enumerate()
                .filter_map(|(p, c)| {
                    let c = c.as_ref()?;
                    if v.mask.data[p] != 1.0 {
                        return None;
                    }
                    let (u, w) = pixel_uv(mesh, uvs, c);
                    let t = &v.image.data[p * 3..p * 3 + 3];
                    Some(Sample {
                        taps: taps_atlas.taps(u, w),
                        target: [t[0], t[1], t[2]],
                    })
                })
                .collect();
            Ok(Prepared {
                tag: v.camera.view_tag,
                samples,
            })
        })
        .collect()
}

fn check_atlas(atlas: &TextureAtlas) -> Result<()> {
    if atlas.channels != 3 || atlas.texels.len() != atlas.size * atlas.size * 3 {
        return Err(Error::validation("atlas", "expected a square RGB atlas"));
    }
    Ok(())
}

/// Unweighted masked MSE of every view, in view order.
pub fn recon_terms(mesh: &TriMesh, atlas: &TextureAtlas, views: &[ColorView]) -> Result<Vec<f64>> {
    check_atlas(atlas)?;
    let prepared = prepare(mesh, atlas.size, views)?;
    Ok(prepared.par_iter().map(|p| p.mse(&atlas.texels)).collect())
}

/// Σ_views w(view tag) · masked MSE.
pub fn recon_loss(mesh: &TriMesh, atlas: &TextureAtlas, views: &[ColorView], cfg: &TexConfig) -> Result<f64> {
    let terms = recon_terms(mesh, atlas, views)?;
    Ok(views.iter().zip(&terms).map(|(v, m)| cfg.view_weight(v.camera.view_tag) * m).sum())
}

/// Reconstruction plus λ·TV and its texel gradient, views reduced in view order.
fn objective(prepared: &[Prepared], atlas: &TextureAtlas, cfg: &TexConfig) -> (f64, Vec<f64>) {
    let residuals: Vec<Vec<[f64; 3]>> = prepared.par_iter().map(|p| p.residuals(&atlas.texels)).collect();
    let (tv, mut grad) = if cfg.lambda_tv > 0.0 { tv_loss_grad(atlas) } else { (0.0, vec![0.0; atlas.texels.len()]) };
    for g in &mut grad {
        *g *= cfg.lambda_tv;
    }
    let mut loss = cfg.lambda_tv * tv;
    for (p, res) in prepared.iter().zip(&residuals) {
        if p.samples.is_empty() {
            continue;
        }
        let w = cfg.view_weight(p.tag);
        let norm = w / (3 * p.samples.len()) as f64;
        loss += norm * res.iter().flatten().map(|r| r * r).sum::<f64>();
        for (s, r) in p.samples.iter().zip(res) {
            for &(t, tw) in &s.taps {
                for k in 0..3 {
                    grad[t * 3 + k] += 2.0 * norm * tw * r[k];
                }
            }
        }
    }
    (loss, grad)
}

/// Reconstruction + λ·TV and its gradient with respect to `atlas.texels`.
pub fn texture_loss_grad(
    mesh: &TriMesh,
    atlas: &TextureAtlas,
    views: &[ColorView],
    cfg: &TexConfig,
) -> Result<(f64, Vec<f64>)> {
    check_atlas(atlas)?;
    let prepared = prepare(mesh, atlas.size, views)?;
    Ok(objective(&prepared, atlas, cfg))
}

/// PSNR in dB (peak 1) over the pixels where `mask` is 1, capped at [`PSNR_CAP`].
pub fn masked_psnr(rendered: &ImagePlane, target: &ImagePlane, mask: &ImagePlane) -> Result<f64> {
    if !rendered.same_shape(target) || mask.width != rendered.width || mask.height != rendered.height {
        return Err(Error::ShapeMismatch("psnr operands differ in shape".into()));
    }
    let c = rendered.channels;
    let (mut sq, mut n) = (0.0, 0usize);
    for (p, &m) in mask.data.iter().enumerate() {
        if m == 1.0 {
            for k in 0..c {
                let d = rendered.data[p * c + k] - target.data[p * c + k];
                sq += d * d;
            }
            n += c;
        }
    }
    if n == 0 {
        return Err(Error::validation("psnr", "empty mask"));
    }
    Ok((-10.0 * (sq / n as f64).log10()).min(PSNR_CAP))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPsnr {
    pub view: usize,
    pub tag: ViewTag,
    pub azimuth_deg: f64,
    pub psnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BakeReport {
    /// Objective before each step.
    pub losses: Vec<f64>,
    pub final_loss: f64,
    pub view_psnr: Vec<ViewPsnr>,
    pub observed_texels: usize,
    pub filled_texels: usize,
}

/// Starting atlas for `init`.
pub fn initial_atlas(size: usize, chart_boxes: Vec<ChartBox>, init: TexInit) -> TextureAtlas {
    match init {
        TexInit::MidGray => TextureAtlas::filled(size, 0.5, chart_boxes),
        TexInit::Zero => TextureAtlas::filled(size, 0.0, chart_boxes),
        TexInit::Uniform { seed } => {
            let mut a = TextureAtlas::filled(size, 0.0, chart_boxes);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for t in &mut a.texels {
                *t = rng.random::<f64>();
            }
            a
        }
    }
}

/// Replaces unobserved texels inside chart boxes by the mean of their known
/// 4-neighbours in the same box, one ring per sweep. Returns the fill count.
pub fn diffusion_fill(atlas: &mut TextureAtlas, observed: &[bool]) -> usize {
    let s = atlas.size;
    let mut known = observed.to_vec();
    let mut filled = 0;
    for _ in 0..FILL_SWEEPS {
        let mut updates = Vec::new();
        for b in &atlas.chart_boxes {
            for y in b.y0..b.y1 {
                for x in b.x0..b.x1 {
                    if known[y * s + x] {
                        continue;
                    }
                    let mut acc = [0.0; 3];
                    let mut n = 0;
                    let nbrs = [
                        (x > b.x0).then(|| (x - 1, y)),
                        (x + 1 < b.x1).then(|| (x + 1, y)),
                        (y > b.y0).then(|| (x, y - 1)),
                        (y + 1 < b.y1).then(|| (x, y + 1)),
                    ];
                    for (nx, ny) in nbrs.into_iter().flatten() {
                        if known[ny * s + nx] {
                            let t = atlas.texel(nx, ny);
                            for k in 0..3 {
                                acc[k] += t[k];
                            }
                            n += 1;
                        }
                    }
                    if n > 0 {
                        updates.push((y * s + x, acc.map(|a| a / n as f64)));
                    }
                }
            }
        }
        if updates.is_empty() {
            break;
        }
        for (i, v) in updates {
            atlas.texels[i * 3..i * 3 + 3].copy_from_slice(&v);
            known[i] = true;
            filled += 1;
        }
    }
    filled
}

/// Recovers the atlas of `layout` from `views` by Adam on the texels, clamping
/// to [0, 1] after each step, then fills texels no view ever sampled.
pub fn bake(mesh: &TriMesh, views: &[ColorView], layout: &AtlasLayout, cfg: &TexConfig) -> Result<(TextureAtlas, BakeReport)> {
    cfg.validate()?;
    require_uvs(mesh)?;
    if views.is_empty() {
        return Err(Error::validation("texture", "no views"));
    }
    let mut atlas = initial_atlas(layout.atlas_size, layout.chart_boxes(), cfg.init);
    atlas.validate()?;
    let prepared = prepare(mesh, atlas.size, views)?;

    let mut observed = vec![false; atlas.size * atlas.size];
    for p in &prepared {
        for s in &p.samples {
            for &(t, w) in &s.taps {
                if w != 0.0 {
                    observed[t] = true;
                }
            }
        }
    }

    let mut adam = Adam::new(atlas.texels.len(), cfg.lr);
    let mut losses = Vec::with_capacity(cfg.iters);
    for _ in 0..cfg.iters {
        let (loss, grad) = objective(&prepared, &atlas, cfg);
        losses.push(loss);
        adam.step(&mut atlas.texels, &grad)?;
        atlas.clamp();
    }
    let filled_texels = diffusion_fill(&mut atlas, &observed);
    let final_loss = objective(&prepared, &atlas, cfg).0;

    let view_psnr = views
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let coverage = rasterize(mesh, &v.camera)?;
            let (w, h) = (v.camera.width as usize, v.camera.height as usize);
            let img = shade_color(mesh, &atlas, &coverage, w, h)?;
            let mask = crate::sculpt::mask_intersection(&silhouette(&coverage, w, h), &v.mask)?;
            Ok(ViewPsnr {
                view: i,
                tag: v.camera.view_tag,
                azimuth_deg: v.camera.azimuth_deg(),
                psnr: masked_psnr(&img, &v.image, &mask)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((
        atlas,
        BakeReport {
            losses,
            final_loss,
            view_psnr,
            observed_texels: observed.iter().filter(|&&o| o).count(),
            filled_texels,
        },
    ))
}
