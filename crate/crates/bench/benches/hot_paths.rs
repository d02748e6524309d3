use criterion::{black_box, criterion_group, criterion_main, Criterion};

use carve_core::raster::render;
use carve_core::scene::orbit_camera;
use carve_core::sdf::SdfQuery;
use carve_core::tetra::{build_grid, marching_tetrahedra};
use carve_core::{testkit, Aabb, Vec3};

fn bounds() -> Aabb {
    Aabb::new(Vec3::new(-0.6, -0.6, -0.6), Vec3::new(0.6, 0.6, 0.6))
}

fn bench_mt(c: &mut Criterion) {
    let mut g = build_grid(32, bounds()).unwrap();
    g.set_sdf_from(|p| p.norm() - 0.4);
    c.bench_function("marching_tetrahedra/32", |b| b.iter(|| marching_tetrahedra(black_box(&g)).unwrap()));
}

fn bench_render(c: &mut Criterion) {
    let mesh = testkit::humanoid(32);
    let cam = orbit_camera(Vec3::zeros(), 3.0, 0.0, 0.0, 256, 40.0);
    c.bench_function("render/humanoid_256", |b| b.iter(|| render(black_box(&mesh), &cam, None).unwrap()));
}

fn bench_sdf(c: &mut Criterion) {
    let mesh = testkit::icosphere(0.4, 4);
    let q = SdfQuery::new(&mesh).unwrap();
    let pts: Vec<Vec3> = (0..256)
        .map(|i| {
            let t = i as f64 * 0.618;
            Vec3::new(t.sin() * 0.5, (t * 1.3).cos() * 0.5, (t * 0.7).sin() * 0.5)
        })
        .collect();
    c.bench_function("signed_distance/256_points", |b| {
        b.iter(|| pts.iter().map(|p| q.signed_distance(black_box(p))).sum::<f64>())
    });
}

criterion_group!(benches, bench_mt, bench_render, bench_sdf);
criterion_main!(benches);
