use carve_core::*;
use carve_core::testkit;

#[test]
fn rejects_degenerate_face() {
    let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
    let err = TriMesh::new(v, vec![[0, 1, 1]]).unwrap_err();
    assert!(err.to_string().contains("face 0"), "{err}");
}

#[test]
fn rejects_bad_index_and_labels() {
    let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
    assert!(TriMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
    let m = TriMesh::new(v, vec![[0, 1, 2]]).unwrap();
    assert!(m.clone().with_labels(vec![0, 1]).is_err());
    assert!(m.with_uvs(vec![[0.0, 0.0], [1.0, 1.0], [1.2, 0.0]]).is_err());
}

#[test]
fn cube_topology() {
    let cube = testkit::unit_cube();
    assert_eq!(cube.vertex_count(), 8);
    assert_eq!(cube.face_count(), 12);
    assert_eq!(cube.boundary_edge_count(), 0);
    assert_eq!(cube.euler_characteristic(), 2);
    assert!((cube.signed_volume() - 1.0).abs() < 1e-12);
    assert_eq!(cube.face_components().len(), 1);
}
