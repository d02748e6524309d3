//! End-to-end run: fit → sculpt → unwrap → bake, driven by a TOML config, with a
//! versioned JSON report that echoes the full config and hashes every file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::camera::{load_camera_rig, Camera};
use crate::error::{Error, Result};
use crate::fit::{fit_sdf_with, rmse, FitOptions, FitReport};
use crate::image::{load_image, save_image, ImageKind, ImagePlane};
use crate::math::{derive_seed, Aabb, Vec3};
use crate::mesh::{load_mesh, save_mesh, TriMesh};
use crate::sculpt::{sculpt, CameraSampling, NormalTarget, SculptConfig, SculptReport};
use crate::sdf::{sample_near_surface, SdfQuery};
use crate::texture::{bake, BakeReport, ColorView, TexConfig, TexInit};
use crate::tetra::{build_grid, TetGrid};
use crate::unwrap::{unwrap_mesh, UnwrapConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pipeline stages in execution order, with their process exit codes.
pub const STAGES: [(&str, i32); 7] = [
    ("config", 2),
    ("instantiate", 3),
    ("fit", 4),
    ("sculpt", 5),
    ("unwrap", 6),
    ("texture", 7),
    ("render", 8),
];

/// Exit code for a failure in `stage` (1 for errors outside any stage).
pub fn stage_exit_code(stage: Option<&str>) -> i32 {
    stage
        .and_then(|s| STAGES.iter().find(|(n, _)| *n == s))
        .map_or(1, |&(_, c)| c)
}

/// Attaches a stage name to an error (idempotent).
pub fn in_stage<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        e => Error::Stage {
            stage,
            source: Box::new(e),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsConfig {
    pub coarse_mesh: PathBuf,
    /// Per-vertex labels of the coarse mesh; defaults to its sidecar, else the heuristic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    pub cameras: PathBuf,
    /// Glob of encoded normal maps, one per camera in sorted order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<String>,
    pub masks: String,
    /// Glob of color images, one per camera in sorted order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<String>,
    /// Masks for the color images; defaults to `masks`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_masks: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridInit {
    /// Every vertex starts at +1.
    Constant,
    /// Every vertex starts at the coarse mesh's signed distance.
    Nodal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    pub center: [f64; 3],
    pub half_extent: f64,
    pub init: GridInit,
    pub samples: usize,
    /// Near-surface sample spread; 0 means two cell sizes.
    pub sigma: f64,
    #[serde(flatten)]
    pub fit: FitOptions,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            resolution: 64,
            center: [0.0; 3],
            half_extent: 0.5,
            init: GridInit::Nodal,
            samples: 20_000,
            sigma: 0.0,
            fit: FitOptions::default(),
        }
    }
}

impl GridConfig {
    pub fn bounds(&self) -> Aabb {
        Aabb::cube(Vec3::from(self.center), self.half_extent)
    }

    pub fn sigma(&self) -> f64 {
        if self.sigma > 0.0 {
            self.sigma
        } else {
            4.0 * self.half_extent / self.resolution as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub inputs: InputsConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sculpt: SculptConfig,
    #[serde(default)]
    pub unwrap: UnwrapConfig,
    #[serde(default)]
    pub texture: TexConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::format(path, line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config; relative paths inside resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let join_glob = |g: &str| {
            if Path::new(g).is_absolute() {
                g.to_string()
            } else {
                base.join(g).to_string_lossy().into_owned()
            }
        };
        let i = &mut self.inputs;
        i.coarse_mesh = join(&i.coarse_mesh);
        i.labels = i.labels.as_deref().map(join);
        i.cameras = join(&i.cameras);
        i.normals = i.normals.as_deref().map(join_glob);
        i.masks = join_glob(&i.masks);
        i.images = i.images.as_deref().map(join_glob);
        i.image_masks = i.image_masks.as_deref().map(join_glob);
        self.out_dir = join(&self.out_dir);
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.resolution < 2 || !(self.grid.half_extent > 0.0) {
            return Err(Error::Config("grid needs resolution >= 2 and a positive half_extent".into()));
        }
        if self.grid.samples == 0 {
            return Err(Error::Config("grid.samples must be >= 1".into()));
        }
        self.sculpt.validate()?;
        self.texture.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Sorted matches of a glob pattern.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>> {
    let paths = glob::glob(pattern).map_err(|e| Error::Config(format!("bad glob '{pattern}': {e}")))?;
    let mut out = paths
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::io(e.path().to_path_buf(), std::io::Error::from(e)))?;
    out.sort();
    Ok(out)
}

/// Loads one image per camera from `pattern`.
pub fn load_per_view(pattern: &str, kind: ImageKind, cameras: &[Camera], what: &str) -> Result<Vec<ImagePlane>> {
    let paths = expand_glob(pattern)?;
    if paths.len() != cameras.len() {
        return Err(Error::Config(format!(
            "{what}: '{pattern}' matches {} files for {} cameras",
            paths.len(),
            cameras.len()
        )));
    }
    paths.iter().map(|p| load_image(p, kind)).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Normal-map targets from a camera file, a normal-map glob and a mask glob.
pub fn load_normal_targets(cameras: &Path, normals: &str, masks: &str) -> Result<Vec<NormalTarget>> {
    let rig = load_camera_rig(cameras)?;
    let n = load_per_view(normals, ImageKind::Normal, &rig.cameras, "normals")?;
    let m = load_per_view(masks, ImageKind::Silhouette, &rig.cameras, "masks")?;
    rig.cameras
        .into_iter()
        .zip(n)
        .zip(m)
        .map(|((camera, normal), mask)| {
            let t = NormalTarget { camera, normal, mask };
            t.validate()?;
            Ok(t)
        })
        .collect()
}

/// Color views from a camera file, an image glob and a mask glob.
pub fn load_color_views(cameras: &Path, images: &str, masks: &str) -> Result<Vec<ColorView>> {
    let rig = load_camera_rig(cameras)?;
    let i = load_per_view(images, ImageKind::Color, &rig.cameras, "images")?;
    let m = load_per_view(masks, ImageKind::Silhouette, &rig.cameras, "masks")?;
    rig.cameras
        .into_iter()
        .zip(i)
        .zip(m)
        .map(|((camera, image), mask)| {
            let v = ColorView { camera, image, mask };
            v.validate()?;
            Ok(v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStageReport {
    #[serde(flatten)]
    pub fit: FitReport,
    pub samples: usize,
    pub sigma: f64,
    pub initial_rmse: f64,
}

/// Builds the grid, initializes it and fits it to samples of the coarse mesh.
pub fn fit_stage(coarse: &TriMesh, grid_cfg: &GridConfig, seed: u64) -> Result<(TetGrid, FitStageReport)> {
    let bounds = grid_cfg.bounds();
    let mut grid = build_grid(grid_cfg.resolution, bounds)?;
    let query = SdfQuery::new(coarse)?;
    if grid_cfg.init == GridInit::Nodal {
        grid.sdf = grid.verts.par_iter().map(|p| query.signed_distance(p)).collect();
    }
    let sigma = grid_cfg.sigma();
    let samples = sample_near_surface(coarse, grid_cfg.samples, sigma, &bounds, seed)?;
    let initial_rmse = rmse(&grid, &samples)?;
    let fit = fit_sdf_with(&mut grid, &samples, &grid_cfg.fit)?;
    Ok((
        grid,
        FitStageReport {
            fit,
            samples: samples.len(),
            sigma,
            initial_rmse,
        },
    ))
}

/// Transfers per-vertex labels to `mesh` from the nearest vertex of `source`.
pub fn transfer_labels(source: &TriMesh, labels: &[u32], mesh: &TriMesh) -> Vec<u32> {
    mesh.vertices
        .par_iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0);
            for (i, q) in source.vertices.iter().enumerate() {
                let d = (p - q).norm_squared();
                if d < best.0 {
                    best = (d, i);
                }
            }
            labels[best.1]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: PipelineConfig,
    pub input_hashes: BTreeMap<String, String>,
    /// Artifact name -> SHA-256. On failure these are the partial artifacts written so far.
    pub output_hashes: BTreeMap<String, String>,
    pub timings: Vec<StageTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitStageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sculpt: Option<SculptReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bake: Option<BakeReport>,
    pub checks: Vec<Check>,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub const ARTIFACTS: [&str; 5] = ["refined.obj", "unwrapped.obj", "unwrapped.labels.json", "tex.png", "layout.json"];

/// The config with every derived sub-seed written in, as echoed in the report.
pub fn seeded(cfg: &PipelineConfig) -> PipelineConfig {
    let mut cfg = cfg.clone();
    if let CameraSampling::UniformSphere { seed, .. } = &mut cfg.sculpt.camera_sampling {
        *seed = derive_seed(cfg.seed, 2);
    }
    if let TexInit::Uniform { seed } = &mut cfg.texture.init {
        *seed = derive_seed(cfg.seed, 3);
    }
    cfg
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    report: PipelineReport,
}

impl Run<'_> {
    fn timed<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = in_stage(stage, f(self));
        self.report.timings.push(StageTiming {
            stage: stage.into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        r
    }

    fn record_output(&mut self, name: &str) -> Result<()> {
        let h = hash_file(&self.cfg.out_dir.join(name))?;
        self.report.output_hashes.insert(name.into(), h);
        Ok(())
    }

    fn record_input(&mut self, path: &Path) -> Result<()> {
        let h = hash_file(path)?;
        self.report.input_hashes.insert(path.to_string_lossy().into_owned(), h);
        Ok(())
    }

    fn execute(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let inputs = &cfg.inputs;
        let out = &cfg.out_dir;
        let normals = inputs.normals.clone();
        let images = inputs.images.clone();

        let (coarse, labels) = self.timed("config", |run| {
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let coarse = load_mesh(&inputs.coarse_mesh)?;
            run.record_input(&inputs.coarse_mesh)?;
            let labels = match &inputs.labels {
                Some(p) => {
                    run.record_input(p)?;
                    Some(crate::mesh::load_labels(p)?)
                }
                None => coarse.part_labels.clone(),
            };
            run.record_input(&inputs.cameras)?;
            let mut globs = vec![inputs.masks.clone()];
            globs.extend(normals.clone());
            globs.extend(images.clone());
            globs.extend(inputs.image_masks.clone());
            for g in &globs {
                for p in expand_glob(g)? {
                    run.record_input(&p)?;
                }
            }
            Ok((coarse, labels))
        })?;

        let (mut grid, fit) = self.timed("fit", |_| fit_stage(&coarse, &cfg.grid, derive_seed(cfg.seed, 1)))?;
        self.report.fit = Some(fit);

        let refined = self.timed("sculpt", |run| {
            let normals = normals.ok_or_else(|| Error::Config("no normal maps configured (inputs.normals)".into()))?;
            let targets = load_normal_targets(&inputs.cameras, &normals, &inputs.masks)?;
            let (mesh, rep) = sculpt(&mut grid, &targets, &cfg.sculpt)?;
            save_mesh(&mesh, out.join("refined.obj"))?;
            run.record_output("refined.obj")?;
            let reduction = if rep.initial_full_loss > 0.0 { 1.0 - rep.final_full_loss / rep.initial_full_loss } else { 0.0 };
            run.report.checks.push(Check {
                name: "sculpt normal-loss reduction".into(),
                value: reduction,
                threshold: 0.0,
                pass: reduction >= 0.0,
            });
            let w = rep.losses.len().min(10);
            if w > 0 {
                let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
                let (head, tail) = (mean(&rep.losses[..w]), mean(&rep.losses[rep.losses.len() - w..]));
                run.report.checks.push(Check {
                    name: "sculpt trace head minus tail".into(),
                    value: head - tail,
                    threshold: 0.0,
                    pass: tail <= head,
                });
            }
            run.report.sculpt = Some(rep);
            Ok(mesh)
        })?;

        let unwrapped = self.timed("unwrap", |run| {
            let refined_labels = match &labels {
                Some(l) => {
                    if l.len() != coarse.vertices.len() {
                        return Err(Error::ShapeMismatch(format!(
                            "{} labels for {} coarse vertices",
                            l.len(),
                            coarse.vertices.len()
                        )));
                    }
                    Some(transfer_labels(&coarse, l, &refined))
                }
                None => None,
            };
            let u = unwrap_mesh(&refined, refined_labels.as_deref(), &cfg.unwrap)?;
            save_mesh(&u.mesh, out.join("unwrapped.obj"))?;
            u.layout.save(out.join("layout.json"))?;
            for a in ["unwrapped.obj", "unwrapped.labels.json", "layout.json"] {
                run.record_output(a)?;
            }
            Ok(u)
        })?;

        self.timed("texture", |run| {
            let images = images.ok_or_else(|| Error::Config("no color images configured (inputs.images)".into()))?;
            let masks = inputs.image_masks.clone().unwrap_or_else(|| inputs.masks.clone());
            let views = load_color_views(&inputs.cameras, &images, &masks)?;
            let (atlas, rep) = bake(&unwrapped.mesh, &views, &unwrapped.layout, &cfg.texture)?;
            save_image(&atlas.to_image(), out.join("tex.png"))?;
            run.record_output("tex.png")?;
            for v in &rep.view_psnr {
                let threshold = match v.tag {
                    crate::camera::ViewTag::Front | crate::camera::ViewTag::Back => 30.0,
                    crate::camera::ViewTag::Other => 26.0,
                };
                run.report.checks.push(Check {
                    name: format!("psnr view {} ({:?}, {:.0} deg)", v.view, v.tag, v.azimuth_deg),
                    value: v.psnr,
                    threshold,
                    pass: v.psnr >= threshold,
                });
            }
            run.report.bake = Some(rep);
            Ok(())
        })?;
        Ok(())
    }
}

/// Runs every stage, writes the artifacts and `report.json` into `cfg.out_dir`.
/// On failure the report is still written, with status "failed" and the partial
/// artifacts in `output_hashes`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let cfg = seeded(cfg);
    in_stage("config", cfg.validate())?;
    let mut run = Run {
        cfg: &cfg,
        report: PipelineReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.into(),
            status: "ok".into(),
            failed_stage: None,
            error: None,
            config: cfg.clone(),
            input_hashes: BTreeMap::new(),
            output_hashes: BTreeMap::new(),
            timings: Vec::new(),
            fit: None,
            sculpt: None,
            bake: None,
            checks: Vec::new(),
        },
    };
    let result = run.execute();
    let mut report = run.report;
    if let Err(e) = &result {
        report.status = "failed".into();
        report.failed_stage = e.stage().map(str::to_string);
        report.error = Some(match e {
            Error::Stage { source, .. } => source.to_string(),
            e => e.to_string(),
        });
    }
    if cfg.out_dir.is_dir() {
        let path = cfg.out_dir.join("report.json");
        std::fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
    }
    result.map(|_| report)
}
