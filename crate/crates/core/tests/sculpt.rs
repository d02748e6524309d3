use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carve_core::*;
use carve_core::sculpt::*;
use carve_core::math::Aabb;
use carve_core::raster::{rasterize, shade_normals, silhouette};
use carve_core::testkit::ellipsoid_normals;
use carve_core::scene::orbit_camera;
use carve_core::raster::render;
use carve_core::tetra::pyramid::FieldParam;
use carve_core::tetra::{build_grid, marching_tetrahedra};

fn encoded(n: Vec3, w: usize, h: usize) -> ImagePlane {
    let mut img = ImagePlane::zeros(w, h, ImageKind::Normal);
    for p in img.data.chunks_exact_mut(3) {
        p.copy_from_slice(&carve_core::image::encode_normal(&n));
    }
    img
}

fn full_mask(w: usize, h: usize) -> ImagePlane {
    let mut m = ImagePlane::zeros(w, h, ImageKind::Silhouette);
    m.data.fill(1.0);
    m
}

fn random_normals(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ImagePlane {
    let mut img = ImagePlane::zeros(w, h, ImageKind::Normal);
    for p in img.data.chunks_exact_mut(3) {
        let n = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
        p.copy_from_slice(&carve_core::image::encode_normal(&n));
    }
    img
}

#[test]
fn identical_maps_have_zero_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_normals(8, 6, &mut rng);
    assert_eq!(normal_loss(&a, &a, &full_mask(8, 6)).unwrap(), 0.0);
}

#[test]
fn antipodal_normals_give_four() {
    let a = encoded(Vec3::z(), 5, 5);
    let b = encoded(-Vec3::z(), 5, 5);
    assert_eq!(normal_loss(&a, &b, &full_mask(5, 5)).unwrap(), 4.0);
}

#[test]
fn loss_matches_a_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (w, h) = (9, 7);
    let a = random_normals(w, h, &mut rng);
    let b = random_normals(w, h, &mut rng);
    let mut m = ImagePlane::zeros(w, h, ImageKind::Silhouette);
    for v in &mut m.data {
        *v = if rng.random::<f64>() < 0.6 { 1.0 } else { 0.0 };
    }
    let mut sum = 0.0;
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            if m.pixel(x, y)[0] != 1.0 {
                continue;
            }
            count += 1;
            for c in 0..3 {
                let d = (a.pixel(x, y)[c] * 2.0 - 1.0) - (b.pixel(x, y)[c] * 2.0 - 1.0);
                sum += d * d;
            }
        }
    }
    let want = sum / count as f64;
    assert!((normal_loss(&a, &b, &m).unwrap() - want).abs() < 1e-14);
}

#[test]
fn empty_mask_and_mismatch() {
    let a = encoded(Vec3::z(), 4, 4);
    let b = encoded(Vec3::x(), 4, 4);
    assert_eq!(normal_loss(&a, &b, &ImagePlane::zeros(4, 4, ImageKind::Silhouette)).unwrap(), 0.0);
    assert!(normal_loss(&a, &encoded(Vec3::x(), 4, 5), &full_mask(4, 4)).is_err());
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_normals(6, 6, &mut rng);
    let b = random_normals(6, 6, &mut rng);
    let m = full_mask(6, 6);
    let (_, g) = normal_loss_grad(&a, &b, &m).unwrap();
    let h = 1e-6;
    for _ in 0..20 {
        let i = rng.random_range(0..a.data.len());
        let mut p = a.clone();
        p.data[i] += h;
        let mut q = a.clone();
        q.data[i] -= h;
        let fd = (normal_loss(&p, &b, &m).unwrap() - normal_loss(&q, &b, &m).unwrap()) / (2.0 * h);
        assert!((fd - g.data[i]).abs() < 1e-6 * fd.abs().max(1.0));
    }
}

#[test]
fn laplacian_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = carve_core::testkit::bumpy_sphere(0.4, 1, 0.1);
    let (_, g) = laplacian_energy(&m);
    let h = 1e-6;
    for _ in 0..20 {
        let v = rng.random_range(0..m.vertices.len());
        let k = rng.random_range(0..3);
        let mut p = m.clone();
        p.vertices[v][k] += h;
        let mut q = m.clone();
        q.vertices[v][k] -= h;
        let fd = (laplacian_energy(&p).0 - laplacian_energy(&q).0) / (2.0 * h);
        assert!((fd - g[v][k]).abs() < 1e-6 * fd.abs().max(1e-3), "{fd} vs {}", g[v][k]);
    }
}

fn seven_cameras() -> Vec<Camera> {
    (0..7).map(|i| orbit_camera(Vec3::zeros(), 2.7, 30.0 * i as f64, 0.0, 16, 30.0)).collect()
}

#[test]
fn rig_sampling_is_round_robin() {
    let cfg = SculptConfig {
        views_per_iter: 1,
        ..SculptConfig::default()
    };
    let cams = seven_cameras();
    let mut visits = [0; 7];
    for it in 0..14 {
        let c = sample_view(&cfg, &cams, it, 0).unwrap();
        visits[cams.iter().position(|x| *x == c).unwrap()] += 1;
    }
    assert_eq!(visits, [2; 7]);
}

fn uniform_cfg(seed: u64) -> SculptConfig {
    SculptConfig {
        camera_sampling: CameraSampling::UniformSphere {
            seed,
            radius: 2.7,
            center: [0.0; 3],
            image_size: 32,
            fov_y: 30.0,
        },
        views_per_iter: 1,
        ..SculptConfig::default()
    }
}

#[test]
fn uniform_sampling_is_deterministic() {
    let cfg = uniform_cfg(9);
    assert_eq!(sample_view(&cfg, &[], 5, 0).unwrap(), sample_view(&cfg, &[], 5, 0).unwrap());
    assert_ne!(sample_view(&cfg, &[], 5, 0).unwrap(), sample_view(&cfg, &[], 6, 0).unwrap());
}

#[test]
fn uniform_azimuths_pass_a_chi_squared_test() {
    let cfg = uniform_cfg(10);
    let mut bins = [0usize; 12];
    let n = 10_000;
    for it in 0..n {
        let cam = sample_view(&cfg, &[], it, 0).unwrap();
        let d = cam.position - cam.look_at;
        let el = (d.y / d.norm()).asin().to_degrees();
        assert!(el >= UNIFORM_ELEVATION.0 - 1e-9 && el <= UNIFORM_ELEVATION.1 + 1e-9);
        assert!((d.norm() - 2.7).abs() < 1e-9);
        bins[((cam.azimuth_deg() / 30.0) as usize).min(11)] += 1;
    }
    let expected = n as f64 / 12.0;
    let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    // 11 degrees of freedom, p = 0.001.
    assert!(chi2 < 31.26, "chi2 {chi2}, bins {bins:?}");
    for b in bins {
        assert!((b as f64 - expected).abs() < 0.1 * expected, "{bins:?}");
    }
}

fn sphere_grid(res: usize) -> TetGrid {
    let mut g = build_grid(res, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    g.set_sdf_from(|p| p.norm() - 0.3);
    g
}

fn ellipsoid_targets(n: usize, size: u32) -> Vec<NormalTarget> {
    (0..n)
        .map(|i| {
            let camera = orbit_camera(Vec3::zeros(), 2.7, 360.0 * i as f64 / n as f64, 10.0, size, 30.0);
            let (normal, mask) = ellipsoid_normals(Vec3::zeros(), Vec3::new(0.3, 0.3, 0.36), &camera);
            NormalTarget { camera, normal, mask }
        })
        .collect()
}

#[test]
fn end_to_end_gradient_matches_frozen_coverage_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut grid = sphere_grid(8);
    for s in &mut grid.sdf {
        *s += rng.random_range(-0.02..0.02);
    }
    for o in &mut grid.offsets {
        *o = Vec3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02));
    }
    grid.project_offsets();
    let target = &ellipsoid_targets(3, 64)[1];
    let cfg = SculptConfig {
        views_per_iter: 1,
        ..SculptConfig::default()
    };
    let (_, d_sdf, d_off, mesh) = objective(&grid, std::slice::from_ref(target), &cfg, 0).unwrap();
    let coverage = rasterize(&mesh, &target.camera).unwrap();
    let mask = mask_intersection(&silhouette(&coverage, 64, 64), &target.mask).unwrap();
    let frozen = |g: &TetGrid| {
        let m = marching_tetrahedra(g).unwrap();
        assert_eq!(m.faces, mesh.faces);
        normal_loss(&shade_normals(&m, &coverage, 64, 64), &target.normal, &mask).unwrap()
    };
    let h = 1e-7;
    let active: Vec<usize> = (0..d_sdf.len()).filter(|&i| d_sdf[i].abs() > 1e-8).collect();
    assert!(active.len() >= 20);
    let check = |fd: f64, an: f64, what: &str| {
        assert!((fd - an).abs() <= 1e-3 * an.abs().max(fd.abs()).max(1e-4), "{what}: fd {fd} vs {an}");
    };
    for _ in 0..20 {
        let v = active[rng.random_range(0..active.len())];
        let mut p = grid.clone();
        p.sdf[v] += h;
        let mut q = grid.clone();
        q.sdf[v] -= h;
        check((frozen(&p) - frozen(&q)) / (2.0 * h), d_sdf[v], &format!("sdf {v}"));
        let k = rng.random_range(0..3);
        let mut p = grid.clone();
        p.offsets[v][k] += h;
        let mut q = grid.clone();
        q.offsets[v][k] -= h;
        check((frozen(&p) - frozen(&q)) / (2.0 * h), d_off[v][k], &format!("offset {v}.{k}"));
    }
}

#[test]
fn own_rendering_is_a_fixed_point() {
    let mut grid = sphere_grid(16);
    let mesh = marching_tetrahedra(&grid).unwrap();
    let targets: Vec<NormalTarget> = (0..4)
        .map(|i| {
            let camera = orbit_camera(Vec3::zeros(), 2.7, 90.0 * i as f64, 0.0, 48, 30.0);
            let b = render(&mesh, &camera, None).unwrap();
            NormalTarget {
                camera,
                normal: b.normal.unwrap(),
                mask: b.silhouette,
            }
        })
        .collect();
    let before = grid.clone();
    let cfg = SculptConfig {
        iters: 5,
        ..SculptConfig::default()
    };
    let (_, rep) = sculpt(&mut grid, &targets, &cfg).unwrap();
    assert!(rep.losses[0] < 1e-6);
    let dpsi: f64 = grid
        .sdf
        .iter()
        .zip(&before.sdf)
        .map(|(a, b)| (a - b).powi(2))
        .chain(grid.offsets.iter().zip(&before.offsets).map(|(a, b)| (a - b).norm_squared()))
        .sum::<f64>()
        .sqrt();
    assert!(dpsi < 1e-4, "{dpsi}");
}

#[test]
fn zero_iterations_return_the_adapted_mesh() {
    let mut grid = sphere_grid(12);
    let mesh = marching_tetrahedra(&grid).unwrap();
    let cfg = SculptConfig {
        iters: 0,
        ..SculptConfig::default()
    };
    let (out, rep) = sculpt(&mut grid, &ellipsoid_targets(2, 32), &cfg).unwrap();
    assert_eq!(out, mesh);
    assert!(rep.losses.is_empty());
}

#[test]
fn vanished_surface_is_reported() {
    let mut grid = build_grid(4, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    let cfg = SculptConfig::default();
    assert!(matches!(sculpt(&mut grid, &ellipsoid_targets(1, 16), &cfg), Err(Error::SurfaceVanished(0))));
}

#[test]
fn uniform_mode_needs_a_synthesizing_source() {
    let mut grid = sphere_grid(8);
    let err = sculpt(&mut grid, &ellipsoid_targets(1, 16), &uniform_cfg(1)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn offsets_stay_bounded_and_tets_upright() {
    let mut grid = sphere_grid(12);
    let targets = ellipsoid_targets(4, 48);
    let cfg = SculptConfig {
        lr: 0.05,
        offset_scale: 1.0,
        sdf_param: FieldParam::Direct,
        ..SculptConfig::default()
    };
    for it in 0..4 {
        let c = SculptConfig { iters: 1, ..cfg.clone() };
        sculpt(&mut grid, &targets, &c).unwrap();
        grid.validate().unwrap_or_else(|e| panic!("iteration {it}: {e}"));
        assert!(grid.offsets.iter().any(|o| o.norm() > 0.0));
    }
}

#[test]
fn sculpting_is_reproducible_across_thread_counts() {
    let targets = ellipsoid_targets(4, 48);
    let cfg = SculptConfig {
        iters: 4,
        ..SculptConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let mut grid = sphere_grid(16);
            let (mesh, rep) = sculpt(&mut grid, &targets, &cfg).unwrap();
            (mesh, rep, grid.sdf)
        })
    };
    let a = run(1);
    assert_eq!(a, run(3));
}

#[test]
fn small_ellipsoid_benchmark_improves() {
    let mut grid = sphere_grid(24);
    let targets = ellipsoid_targets(8, 64);
    let cfg = SculptConfig {
        iters: 30,
        ..SculptConfig::default()
    };
    let (mesh, rep) = sculpt(&mut grid, &targets, &cfg).unwrap();
    assert!(rep.final_full_loss < 0.5 * rep.initial_full_loss, "{rep:?}");
    assert_eq!(mesh.boundary_edge_count(), 0);
    let n = rep.losses.len();
    let first: f64 = rep.losses[..10].iter().sum();
    let last: f64 = rep.losses[n - 10..].iter().sum();
    assert!(last <= first);
}
