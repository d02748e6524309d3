use carve_core::*;
use carve_core::tetra::*;
use carve_core::math::Aabb;
use carve_core::tetra::build_grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_tet() -> (Vec<Vec3>, Vec<[u32; 4]>) {
    (
        vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
        vec![[0, 1, 2, 3]],
    )
}

#[test]
fn case_table_counts_and_orientation() {
    let (p, t) = unit_tet();
    for pattern in 1u32..15 {
        let s: Vec<f64> = (0..4).map(|i| if pattern >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let n_in = pattern.count_ones();
        let surf = extract_tets(&p, &t, &s).unwrap();
        let expected = if n_in == 2 { 2 } else { 1 };
        assert_eq!(surf.mesh.faces.len(), expected, "pattern {pattern:04b}");
        let cin: Vec3 = (0..4).filter(|&i| s[i] < 0.0).map(|i| p[i]).sum::<Vec3>() / n_in as f64;
        let cout: Vec3 = (0..4).filter(|&i| s[i] >= 0.0).map(|i| p[i]).sum::<Vec3>() / (4 - n_in) as f64;
        for f in 0..surf.mesh.faces.len() {
            let [a, b, c] = surf.mesh.triangle(f);
            assert!((b - a).cross(&(c - a)).dot(&(cout - cin)) > 0.0, "pattern {pattern:04b}");
        }
    }
}

#[test]
fn orientation_survives_a_flipped_tet() {
    let (p, _) = unit_tet();
    let t = vec![[0, 2, 1, 3]];
    let s = vec![-1.0, 1.0, 1.0, 1.0];
    let surf = extract_tets(&p, &t, &s).unwrap();
    let [a, b, c] = surf.mesh.triangle(0);
    assert!((b - a).cross(&(c - a)).dot(&Vec3::repeat(1.0)) > 0.0);
}

#[test]
fn no_sign_change_is_an_error() {
    let (p, t) = unit_tet();
    assert!(matches!(extract_tets(&p, &t, &[1.0; 4]), Err(Error::EmptySurface)));
}

#[test]
fn sphere_is_closed_and_outward() {
    let mut g = build_grid(16, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    g.set_sdf_from(|p| p.norm() - 0.3);
    let m = marching_tetrahedra(&g).unwrap();
    assert_eq!(m.non_manifold_edge_count(), 0);
    assert_eq!(m.euler_characteristic(), 2);
    assert!(m.signed_volume() > 0.0);
}

#[test]
fn affine_field_vertices_lie_on_zero_set() {
    let mut g = build_grid(6, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    let f = |p: &Vec3| 0.4 * p.x + 0.5 * p.y - 0.3 * p.z + 0.05;
    g.set_sdf_from(f);
    let m = marching_tetrahedra(&g).unwrap();
    assert!(m.vertices.iter().all(|v| f(v).abs() < 1e-9));
}

#[test]
fn jacobian_examples() {
    let j = EdgeJacobian::at(&Vec3::zeros(), &Vec3::x(), -1.0, 1.0);
    assert!((j.d_sdf_a.x - (-0.25)).abs() < 1e-15);
    assert_eq!((j.d_offset_a, j.d_offset_b), (0.5, 0.5));
    let j = EdgeJacobian::at(&Vec3::zeros(), &Vec3::x(), -0.3, 0.3);
    assert_eq!((j.d_offset_a, j.d_offset_b), (0.5, 0.5));
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let pa = Vec3::new(rng.random(), rng.random(), rng.random());
        let pb = Vec3::new(rng.random(), rng.random(), rng.random());
        let sa = -rng.random_range(0.1..1.0);
        let sb = rng.random_range(0.1..1.0);
        let j = EdgeJacobian::at(&pa, &pb, sa, sb);
        let fd_sa = (crossing_point(&pa, &pb, sa + h, sb) - crossing_point(&pa, &pb, sa - h, sb)) / (2.0 * h);
        let fd_sb = (crossing_point(&pa, &pb, sa, sb + h) - crossing_point(&pa, &pb, sa, sb - h)) / (2.0 * h);
        let dx = Vec3::x() * h;
        let fd_oa = (crossing_point(&(pa + dx), &pb, sa, sb) - crossing_point(&(pa - dx), &pb, sa, sb)).x / (2.0 * h);
        let fd_ob = (crossing_point(&pa, &(pb + dx), sa, sb) - crossing_point(&pa, &(pb - dx), sa, sb)).x / (2.0 * h);
        for (fd, an) in [(fd_sa, j.d_sdf_a), (fd_sb, j.d_sdf_b)] {
            worst = worst.max((fd - an).norm() / an.norm().max(1e-12));
        }
        worst = worst.max((fd_oa - j.d_offset_a).abs() / j.d_offset_a.abs());
        worst = worst.max((fd_ob - j.d_offset_b).abs() / j.d_offset_b.abs());
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn jacobian_rejects_edge_without_crossing() {
    let g = build_grid(2, Aabb::cube(Vec3::zeros(), 0.5)).unwrap();
    assert!(mt_vertex_jacobian(&g, (0, 1)).is_err());
}
