use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carve_core::*;
use carve_core::texture::*;
use carve_core::raster::{ChartBox, TextureAtlas};
use carve_core::unwrap::AtlasLayout;
use carve_core::scene::{instantiate_rig, RigSpec};
use carve_core::testkit::{color_views, textured_humanoid};

fn rig(size: u32) -> Vec<Camera> {
    instantiate_rig(&RigSpec {
        image_size: size,
        ..RigSpec::default()
    })
    .unwrap()
    .cameras
}

fn random_atlas(size: usize, rng: &mut ChaCha8Rng) -> TextureAtlas {
    let mut a = TextureAtlas::filled(size, 0.0, Vec::new());
    for t in &mut a.texels {
        *t = rng.random::<f64>();
    }
    a
}

#[test]
fn constant_atlas_has_no_variation() {
    assert_eq!(tv_loss(&TextureAtlas::filled(9, 0.3, Vec::new())), 0.0);
}

#[test]
fn two_by_two_columns() {
    let mut a = TextureAtlas::filled(2, 0.0, Vec::new());
    for y in 0..2 {
        let i = a.index(1, y);
        a.texels[i..i + 3].fill(1.0);
    }
    assert_eq!(tv_loss(&a), 0.5);
}

proptest! {
    #[test]
    fn tv_is_positively_homogeneous(seed in 0u64..500, alpha in 0.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_atlas(5, &mut rng);
        let mut b = a.clone();
        for t in &mut b.texels {
            *t *= alpha;
        }
        prop_assert!((tv_loss(&b) - alpha * tv_loss(&a)).abs() < 1e-12);
    }
}

/// True when no forward difference touching texel-channel `i` is within `h` of zero.
fn away_from_kinks(a: &TextureAtlas, i: usize, h: f64) -> bool {
    let s = a.size;
    let (p, k) = (i / 3, i % 3);
    let (x, y) = (p % s, p / s);
    let at = |x: usize, y: usize| a.texels[(y * s + x) * 3 + k];
    let v = at(x, y);
    let mut nb = Vec::new();
    if x > 0 { nb.push(at(x - 1, y)); }
    if x + 1 < s { nb.push(at(x + 1, y)); }
    if y > 0 { nb.push(at(x, y - 1)); }
    if y + 1 < s { nb.push(at(x, y + 1)); }
    nb.iter().all(|n| (n - v).abs() > 10.0 * h)
}

#[test]
fn tv_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_atlas(6, &mut rng);
    let (_, g) = tv_loss_grad(&a);
    let h = 1e-7;
    let mut checked = 0;
    for i in 0..a.texels.len() {
        if !away_from_kinks(&a, i, h) {
            continue;
        }
        let mut p = a.clone();
        p.texels[i] += h;
        let mut q = a.clone();
        q.texels[i] -= h;
        let fd = (tv_loss(&p) - tv_loss(&q)) / (2.0 * h);
        assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        checked += 1;
    }
    assert!(checked >= 20);
}

fn small_bundle() -> (TriMesh, AtlasLayout, TextureAtlas, Vec<ColorView>) {
    let (mesh, layout, tex) = textured_humanoid(12, 64);
    let views = color_views(&mesh, &tex, &rig(64));
    (mesh, layout, tex, views)
}

#[test]
fn own_renderings_reconstruct_exactly() {
    let (mesh, _, tex, views) = small_bundle();
    assert!(recon_loss(&mesh, &tex, &views, &TexConfig::default()).unwrap() < 1e-28);
}

#[test]
fn constant_offset_in_the_front_view() {
    let (mesh, _, tex, views) = small_bundle();
    let mut front = views[0].clone();
    assert_eq!(front.camera.view_tag, ViewTag::Front);
    // Shift the texture instead of the image so the target stays in range.
    let mut shifted = tex.clone();
    for t in &mut shifted.texels {
        *t += 0.1;
    }
    front.image = carve_core::raster::render(&mesh, &front.camera, Some(&shifted)).unwrap().color.unwrap();
    let l = recon_loss(&mesh, &tex, &[front], &TexConfig::default()).unwrap();
    assert!((l - 0.01).abs() < 1e-12, "{l}");
}

#[test]
fn recon_matches_a_scalar_loop() {
    let (mesh, _, tex, views) = small_bundle();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut guess = tex.clone();
    for t in &mut guess.texels {
        *t = (*t + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0);
    }
    let cfg = TexConfig::default();
    let mut want = 0.0;
    for v in &views {
        let b = carve_core::raster::render(&mesh, &v.camera, Some(&guess)).unwrap();
        let img = b.color.unwrap();
        let (mut sq, mut n) = (0.0, 0);
        for p in 0..img.width * img.height {
            if b.silhouette.data[p] == 1.0 && v.mask.data[p] == 1.0 {
                for k in 0..3 {
                    sq += (img.data[p * 3 + k] - v.image.data[p * 3 + k]).powi(2);
                    n += 1;
                }
            }
        }
        let w = if matches!(v.camera.view_tag, ViewTag::Front | ViewTag::Back) { 1.0 } else { 0.2 };
        want += w * sq / n as f64;
    }
    let got = recon_loss(&mesh, &guess, &views, &cfg).unwrap();
    assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
}

#[test]
fn doubling_a_weight_doubles_its_contribution() {
    let (mesh, _, tex, views) = small_bundle();
    let mut guess = tex.clone();
    for t in &mut guess.texels {
        *t = 0.5 * *t + 0.1;
    }
    let base = TexConfig::default();
    let doubled = TexConfig { w_other: 0.4, ..base.clone() };
    let terms = recon_terms(&mesh, &guess, &views).unwrap();
    let other: f64 = views.iter().zip(&terms).filter(|(v, _)| v.camera.view_tag == ViewTag::Other).map(|(_, t)| t).sum();
    let a = recon_loss(&mesh, &guess, &views, &base).unwrap();
    let b = recon_loss(&mesh, &guess, &views, &doubled).unwrap();
    assert!(other > 0.0);
    assert!((b - a - 0.2 * other).abs() <= 4.0 * f64::EPSILON * b, "{a} {b} {other}");
}

#[test]
fn combined_gradient_matches_finite_differences() {
    let (mesh, _, tex, views) = small_bundle();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut guess = tex.clone();
    for t in &mut guess.texels {
        *t = rng.random::<f64>();
    }
    let cfg = TexConfig::default();
    let (_, g) = texture_loss_grad(&mesh, &guess, &views, &cfg).unwrap();
    let f = |a: &TextureAtlas| recon_loss(&mesh, a, &views, &cfg).unwrap() + cfg.lambda_tv * tv_loss(a);
    let h = 1e-6;
    let seen: Vec<usize> = (0..g.len()).filter(|&i| g[i].abs() > 1e-5 && away_from_kinks(&guess, i, h)).collect();
    assert!(seen.len() >= 20, "{}", seen.len());
    for _ in 0..20 {
        let i = seen[rng.random_range(0..seen.len())];
        let mut p = guess.clone();
        p.texels[i] += h;
        let mut q = guess.clone();
        q.texels[i] -= h;
        let fd = (f(&p) - f(&q)) / (2.0 * h);
        assert!((fd - g[i]).abs() < 1e-3 * g[i].abs(), "{i}: {fd} vs {}", g[i]);
    }
}

#[test]
fn zero_iterations_give_mid_gray() {
    let (mesh, layout, _, views) = small_bundle();
    let (atlas, rep) = bake(&mesh, &views, &layout, &TexConfig { iters: 0, ..TexConfig::default() }).unwrap();
    assert!(atlas.texels.iter().all(|&t| t == 0.5));
    assert!(rep.losses.is_empty());
}

#[test]
fn huge_tv_weight_flattens_the_texture() {
    let (mesh, layout, _, views) = small_bundle();
    let cfg = TexConfig { iters: 100, lambda_tv: 1e6, ..TexConfig::default() };
    let (atlas, _) = bake(&mesh, &views, &layout, &cfg).unwrap();
    assert!(atlas.variance() < 1e-3, "{}", atlas.variance());
}

#[test]
fn mesh_without_uvs_is_rejected() {
    let (mut mesh, layout, _, views) = small_bundle();
    mesh.uvs = None;
    assert!(bake(&mesh, &views, &layout, &TexConfig::default()).is_err());
}

#[test]
fn resolution_mismatch_is_rejected() {
    let (mesh, layout, _, mut views) = small_bundle();
    views[2].image = ImagePlane::zeros(10, 10, ImageKind::Color);
    assert!(bake(&mesh, &views, &layout, &TexConfig::default()).is_err());
}

#[test]
fn baking_is_thread_count_independent() {
    let (mesh, layout, _, views) = small_bundle();
    let cfg = TexConfig { iters: 20, ..TexConfig::default() };
    let run = |t| {
        rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap().install(|| bake(&mesh, &views, &layout, &cfg).unwrap())
    };
    assert_eq!(run(1), run(5));
}

#[test]
fn fill_reaches_unseen_texels_of_a_chart() {
    let b = ChartBox { x0: 2, y0: 2, x1: 8, y1: 6 };
    let mut a = TextureAtlas::filled(10, 0.0, vec![b]);
    let mut observed = vec![false; 100];
    let i = a.index(2, 2);
    a.texels[i..i + 3].fill(0.9);
    observed[2 * 10 + 2] = true;
    let n = diffusion_fill(&mut a, &observed);
    assert_eq!(n, 6 * 4 - 1);
    assert!(a.chart_boxes[0].contains_texel(7, 5));
    assert_eq!(a.texel(7, 5), &[0.9, 0.9, 0.9]);
    assert_eq!(a.texel(0, 0), &[0.0, 0.0, 0.0]);
}

#[test]
fn gt_round_trip_loss_decreases_over_every_window() {
    let (mesh, layout, tex) = textured_humanoid(16, 128);
    let views = color_views(&mesh, &tex, &rig(128));
    let (_, rep) = bake(&mesh, &views, &layout, &TexConfig::default()).unwrap();
    let l = &rep.losses;
    assert_eq!(l.len(), 500);
    for i in 0..l.len() - 50 {
        assert!(l[i + 50] <= l[i], "window at {i}");
    }
}

#[test]
fn gt_round_trip_with_a_light_prior_is_sharp() {
    let (mesh, layout, tex) = textured_humanoid(16, 128);
    let views = color_views(&mesh, &tex, &rig(128));
    let cfg = TexConfig { lambda_tv: 0.01, ..TexConfig::default() };
    let (_, rep) = bake(&mesh, &views, &layout, &cfg).unwrap();
    for v in &rep.view_psnr {
        assert!(v.psnr >= 30.0, "{v:?}");
    }
}
