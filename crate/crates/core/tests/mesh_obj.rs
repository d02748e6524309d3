use carve_core::*;
use carve_core::mesh::obj::{parse, write};
use std::path::Path;

#[test]
fn zero_index_is_a_parse_error_with_line() {
    let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n";
    let err = parse(Path::new("t.obj"), src.as_bytes()).unwrap_err();
    match err {
        Error::Format { line, .. } => assert_eq!(line, 4),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn quads_and_negative_indices() {
    let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n";
    let m = parse(Path::new("t.obj"), src.as_bytes()).unwrap();
    assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
}

#[test]
fn writes_one_vt_per_vertex() {
    let m = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]])
        .unwrap()
        .with_uvs(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        .unwrap();
    let s = write(&m);
    assert_eq!(s.lines().filter(|l| l.starts_with("vt ")).count(), 3);
    let back = parse(Path::new("t.obj"), s.as_bytes()).unwrap();
    assert_eq!(back, m);
}
