use carve_core::*;
use carve_core::tetra::*;

#[test]
fn round_trip() {
    let mut g = build_grid(3, Aabb::cube(Vec3::new(0.1, 0.0, 0.0), 0.6)).unwrap();
    g.set_sdf_from(|p| p.norm() - 0.3);
    g.offsets[5] = Vec3::new(0.01, -0.02, 0.003);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.bin");
    save_grid(&g, &p).unwrap();
    assert_eq!(load_grid(&p).unwrap(), g);
}
