use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use carve_core::math::derive_seed;
use carve_core::mesh::load_labels;
use carve_core::pipeline::{
    fit_stage, in_stage, load_color_views, load_normal_targets, run_pipeline, stage_exit_code, transfer_labels,
    FitStageReport, GridConfig, PipelineConfig, REPORT_SCHEMA_VERSION, TOOL_VERSION,
};
use carve_core::raster::{render, TextureAtlas};
use carve_core::scene::{concat_views, instantiate_rig, project_rig, RigSpec, Skeleton};
use carve_core::sculpt::{sculpt, SculptConfig, SculptReport};
use carve_core::texture::{bake, BakeReport, TexConfig};
use carve_core::unwrap::{unwrap_mesh, AtlasLayout, UnwrapConfig};
use carve_core::{
    load_camera_rig, load_image, load_mesh, save_camera_rig, save_image, save_mesh, Error, ImageKind, Result,
};

#[derive(Parser)]
#[command(name = "carve", version, about = "Sculpt a coarse body mesh against normal maps and bake its texture")]
struct Cli {
    /// Worker threads (0 = one per core). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Base seed; stochastic steps use seeds derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the K-view camera rig and draw the skeleton from every view.
    Instantiate(InstantiateArgs),
    /// Fit a tet grid to the coarse mesh, then refine it against normal maps.
    Sculpt(SculptArgs),
    /// Split a mesh into labelled parts and pack cylindrical charts into one atlas.
    Unwrap(UnwrapArgs),
    /// Bake an atlas from multi-view color images.
    Texture(TextureArgs),
    /// Render one rig view of a mesh.
    Render(RenderArgs),
    /// Run every stage from a TOML config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct InstantiateArgs {
    /// Skeleton JSON; the canonical 24-joint skeleton if omitted.
    #[arg(long)]
    skeleton: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    k: usize,
    #[arg(long, default_value_t = 2.7)]
    radius: f64,
    #[arg(long, default_value_t = 512)]
    size: u32,
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = 30.0)]
    fov: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SculptArgs {
    #[arg(long)]
    coarse: PathBuf,
    /// Camera rig JSON.
    #[arg(long)]
    views: PathBuf,
    /// Glob of per-view normal maps, matched in sorted order.
    #[arg(long)]
    normals: String,
    /// Glob of per-view silhouettes.
    #[arg(long)]
    masks: String,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 400)]
    fit_iters: usize,
    #[arg(long, default_value_t = 0.01)]
    fit_lr: f64,
    /// Near-surface samples for the fit.
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct UnwrapArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Label sidecar; defaults to the mesh's own sidecar, else the built-in labeler.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    gamma: usize,
    #[arg(long, default_value_t = 1024)]
    atlas_size: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    layout: PathBuf,
}

#[derive(Args)]
struct TextureArgs {
    /// Unwrapped mesh with UVs.
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    views: PathBuf,
    /// Glob of per-view color images.
    #[arg(long)]
    images: String,
    #[arg(long)]
    masks: String,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_tv: f64,
    /// Must match the layout's atlas size when given.
    #[arg(long)]
    atlas_size: Option<usize>,
    /// Atlas layout from `unwrap`; defaults to layout.json beside the mesh.
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Camera rig JSON.
    #[arg(long)]
    camera: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Texture atlas image; required for the color frame.
    #[arg(long)]
    atlas: Option<PathBuf>,
    /// Color frame output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Normal map output (PFM keeps full precision).
    #[arg(long)]
    normals: Option<PathBuf>,
    /// Silhouette output.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    config: PathBuf,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct SculptRunReport<'a> {
    schema_version: u32,
    tool_version: &'static str,
    seed: u64,
    grid: &'a GridConfig,
    sculpt_config: &'a SculptConfig,
    fit: &'a FitStageReport,
    sculpt: &'a SculptReport,
}

#[derive(Serialize)]
struct BakeRunReport<'a> {
    schema_version: u32,
    tool_version: &'static str,
    config: &'a TexConfig,
    bake: &'a BakeReport,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn instantiate(a: &InstantiateArgs) -> Result<()> {
    let skel = match &a.skeleton {
        Some(p) => Skeleton::load(p)?,
        None => Skeleton::canonical_24(),
    };
    let rig = instantiate_rig(&RigSpec {
        k_views: a.k,
        radius: a.radius,
        image_size: a.size,
        fov_y: a.fov,
        ..RigSpec::default()
    })?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    save_camera_rig(&rig, a.out_dir.join("camera_rig.json"))?;
    let poses = project_rig(&skel, &rig)?;
    for (i, p) in poses.iter().enumerate() {
        save_image(p, a.out_dir.join(format!("pose_{i:02}.png")))?;
    }
    save_image(&concat_views(&poses)?, a.out_dir.join("pose_sheet.png"))?;
    println!("{} views written to {}", poses.len(), a.out_dir.display());
    Ok(())
}

fn sculpt_cmd(a: &SculptArgs, seed: u64) -> Result<()> {
    let grid_cfg = GridConfig {
        resolution: a.resolution,
        samples: a.samples,
        fit: carve_core::fit::FitOptions {
            iters: a.fit_iters,
            lr: a.fit_lr,
            ..Default::default()
        },
        ..GridConfig::default()
    };
    let cfg = SculptConfig {
        iters: a.iters,
        lr: a.lr,
        ..SculptConfig::default()
    };
    let (coarse, mut grid, fit) = in_stage("fit", (|| {
        let coarse = load_mesh(&a.coarse)?;
        let (grid, fit) = fit_stage(&coarse, &grid_cfg, derive_seed(seed, 1))?;
        Ok((coarse, grid, fit))
    })())?;
    in_stage("sculpt", (|| {
        cfg.validate()?;
        let targets = load_normal_targets(&a.views, &a.normals, &a.masks)?;
        let (mut mesh, rep) = sculpt(&mut grid, &targets, &cfg)?;
        if let Some(l) = &coarse.part_labels {
            let labels = transfer_labels(&coarse, l, &mesh);
            mesh = mesh.with_labels(labels)?;
        }
        save_mesh(&mesh, &a.out)?;
        println!(
            "fit rmse {:.3e}; normal loss {:.4e} -> {:.4e}; {} vertices",
            fit.fit.final_rmse, rep.initial_full_loss, rep.final_full_loss, rep.final_vertices
        );
        if let Some(p) = &a.report {
            write_json(
                p,
                &SculptRunReport {
                    schema_version: REPORT_SCHEMA_VERSION,
                    tool_version: TOOL_VERSION,
                    seed,
                    grid: &grid_cfg,
                    sculpt_config: &cfg,
                    fit: &fit,
                    sculpt: &rep,
                },
            )?;
        }
        Ok(())
    })())
}

fn unwrap_cmd(a: &UnwrapArgs) -> Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let labels = match &a.labels {
        Some(p) => Some(load_labels(p)?),
        None => mesh.part_labels.clone(),
    };
    let cfg = UnwrapConfig {
        gamma: a.gamma,
        atlas_size: a.atlas_size,
        ..UnwrapConfig::default()
    };
    let u = unwrap_mesh(&mesh, labels.as_deref(), &cfg)?;
    save_mesh(&u.mesh, &a.out)?;
    u.layout.save(&a.layout)?;
    println!("{} charts, {} vertices", u.layout.charts.len(), u.mesh.vertices.len());
    Ok(())
}

fn texture_cmd(a: &TextureArgs) -> Result<()> {
    let layout_path = a
        .layout
        .clone()
        .unwrap_or_else(|| a.mesh.parent().unwrap_or(Path::new(".")).join("layout.json"));
    let layout = AtlasLayout::load(&layout_path)?;
    if let Some(s) = a.atlas_size {
        if s != layout.atlas_size {
            return Err(Error::Config(format!(
                "--atlas-size {s} differs from the layout's atlas size {}",
                layout.atlas_size
            )));
        }
    }
    let cfg = TexConfig {
        iters: a.iters,
        lr: a.lr,
        lambda_tv: a.lambda_tv,
        ..TexConfig::default()
    };
    let mesh = load_mesh(&a.mesh)?;
    let views = load_color_views(&a.views, &a.images, &a.masks)?;
    let (atlas, rep) = bake(&mesh, &views, &layout, &cfg)?;
    save_image(&atlas.to_image(), &a.out)?;
    for v in &rep.view_psnr {
        println!("view {} ({:.0} deg): {:.2} dB", v.view, v.azimuth_deg, v.psnr);
    }
    if let Some(p) = &a.report {
        write_json(
            p,
            &BakeRunReport {
                schema_version: REPORT_SCHEMA_VERSION,
                tool_version: TOOL_VERSION,
                config: &cfg,
                bake: &rep,
            },
        )?;
    }
    Ok(())
}

fn render_cmd(a: &RenderArgs) -> Result<()> {
    if a.out.is_some() && a.atlas.is_none() {
        return Err(Error::Config("--out writes the color frame and needs --atlas".into()));
    }
    let mesh = load_mesh(&a.mesh)?;
    let rig = load_camera_rig(&a.camera)?;
    let cam = rig.cameras.get(a.index).ok_or_else(|| {
        Error::Config(format!("camera index {} out of range ({} cameras)", a.index, rig.cameras.len()))
    })?;
    let atlas = match &a.atlas {
        Some(p) => Some(TextureAtlas::from_image(&load_image(p, ImageKind::Color)?, Vec::new())?),
        None => None,
    };
    let frame = render(&mesh, cam, atlas.as_ref())?;
    if let (Some(p), Some(c)) = (&a.out, &frame.color) {
        save_image(c, p)?;
    }
    if let (Some(p), Some(n)) = (&a.normals, &frame.normal) {
        save_image(n, p)?;
    }
    if let Some(p) = &a.mask {
        save_image(&frame.silhouette, p)?;
    }
    println!("{} pixels covered", frame.covered());
    Ok(())
}

fn pipeline_cmd(a: &PipelineArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = in_stage("config", PipelineConfig::load(&a.config))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = &a.out_dir {
        cfg.out_dir = d.clone();
    }
    let report = run_pipeline(&cfg)?;
    for t in &report.timings {
        println!("{:<8} {:>8.2}s", t.stage, t.seconds);
    }
    for c in &report.checks {
        println!(
            "{} {}: {:.4} (threshold {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    println!("report: {}", cfg.out_dir.join("report.json").display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Instantiate(a) => in_stage("instantiate", instantiate(a)),
        Command::Sculpt(a) => sculpt_cmd(a, seed),
        Command::Unwrap(a) => in_stage("unwrap", unwrap_cmd(a)),
        Command::Texture(a) => in_stage("texture", texture_cmd(a)),
        Command::Render(a) => in_stage("render", render_cmd(a)),
        Command::Pipeline(a) => pipeline_cmd(a, cli.seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("carve: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("carve: {e}");
            ExitCode::from(stage_exit_code(e.stage()) as u8)
        }
    }
}
