use carve_core::*;
use carve_core::fit::*;
use carve_core::sdf::SamplePoint;
use carve_core::math::{Aabb, Vec3};
use carve_core::sdf::sample_near_surface;
use carve_core::testkit;
use carve_core::tetra::build_grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere_samples(n: usize, seed: u64) -> Vec<SamplePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = Vec3::new(rng.random(), rng.random(), rng.random()) - Vec3::repeat(0.5);
            SamplePoint {
                p,
                sdf_gt: p.norm() - 0.3,
            }
        })
        .collect()
}

#[test]
fn gradient_matches_finite_differences() {
    let mut grid = build_grid(4, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in &mut grid.sdf {
        *s = rng.random_range(-1.0..1.0);
    }
    let samples = sphere_samples(300, 6);
    let loc = locate_samples(&grid, &samples).unwrap();
    let (_, g) = loss_and_grad(&grid.sdf, &loc, &samples);
    let h = 1e-6;
    for _ in 0..20 {
        let v = rng.random_range(0..grid.sdf.len());
        let mut plus = grid.sdf.clone();
        plus[v] += h;
        let mut minus = grid.sdf.clone();
        minus[v] -= h;
        let fd = (loss(&plus, &loc, &samples) - loss(&minus, &loc, &samples)) / (2.0 * h);
        let err = (fd - g[v]).abs() / g[v].abs().max(1e-8);
        assert!(err < 1e-5 || (fd - g[v]).abs() < 1e-9, "vertex {v}: {fd} vs {}", g[v]);
    }
}

#[test]
fn zero_iterations_leave_grid_unchanged() {
    let mut grid = build_grid(8, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    let before = grid.clone();
    let samples = sphere_samples(100, 2);
    let rep = fit_sdf(&mut grid, &samples, 0, 0.01).unwrap();
    assert_eq!(grid.sdf, before.sdf);
    assert!(rep.losses.is_empty());
    assert_eq!(rep.initial_loss, rep.final_loss);
    assert_eq!(rep.initial_loss, loss(&grid.sdf, &locate_samples(&grid, &samples).unwrap(), &samples));
}

#[test]
fn exact_initialization_is_already_optimal() {
    let mut grid = build_grid(32, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    grid.set_sdf_from(|p| p.norm() - 0.3);
    let samples = sphere_samples(4000, 3);
    let before = rmse(&grid, &samples).unwrap();
    // Linear interpolation error of |p| over one cell is bounded by h²/(8 r) for r >= 0.1 or so.
    assert!(before < 2e-3, "{before}");
    let held = sphere_samples(4000, 4);
    let held_before = rmse(&grid, &held).unwrap();
    let rep = fit_sdf(&mut grid, &samples, 400, 0.01).unwrap();
    let held_after = rmse(&grid, &held).unwrap();
    // Nodal values are not the least-squares optimum, so both RMSEs may drop; neither may grow.
    assert!(rep.final_rmse <= before);
    assert!(held_after <= held_before, "{held_before} -> {held_after}");
}

#[test]
fn out_of_bounds_sample_is_reported() {
    let mut grid = build_grid(4, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    let samples = vec![SamplePoint {
        p: Vec3::new(0.0, 0.9, 0.0),
        sdf_gt: 0.0,
    }];
    match fit_sdf(&mut grid, &samples, 1, 0.01) {
        Err(Error::OutOfBounds { index: 0, y, .. }) => assert_eq!(y, 0.9),
        other => panic!("{other:?}"),
    }
}

#[test]
fn offsets_stay_frozen() {
    let mut grid = build_grid(8, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    grid.offsets[100] = Vec3::new(0.01, 0.0, -0.01);
    let before = grid.offsets.clone();
    let mesh = testkit::icosphere(0.3, 2);
    let samples = sample_near_surface(&mesh, 500, 0.05, &grid.bounds, 1).unwrap();
    fit_sdf(&mut grid, &samples, 20, 0.01).unwrap();
    assert_eq!(grid.offsets, before);
}
