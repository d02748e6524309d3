use carve_core::*;

fn cam() -> Camera {
    Camera {
        position: Vec3::new(0.0, 0.0, 2.7),
        look_at: Vec3::zeros(),
        up: Vec3::y(),
        fov_y: 40.0,
        width: 64,
        height: 48,
        view_tag: ViewTag::Front,
    }
}

#[test]
fn target_projects_to_centre() {
    let (x, y, d) = cam().project(&Vec3::zeros()).unwrap();
    assert_eq!((x, y), (32.0, 24.0));
    assert!((d - 2.7).abs() < 1e-15);
}

#[test]
fn right_is_plus_x_from_front() {
    let (x, y, _) = cam().project(&Vec3::new(0.1, 0.1, 0.0)).unwrap();
    assert!(x > 32.0 && y < 24.0);
}

#[test]
fn empty_rig_is_rejected() {
    let err = CameraRig::from_json("[]").unwrap_err();
    assert!(err.to_string().contains("empty rig"));
}

#[test]
fn up_parallel_to_view_is_rejected() {
    let mut c = cam();
    c.up = Vec3::z();
    assert!(CameraRig::new(vec![c]).is_err());
}

#[test]
fn view_tag_defaults_to_other() {
    let json = r#"[{"position":[0,0,3],"look_at":[0,0,0],"up":[0,1,0],"fov_y":30,"width":8,"height":8}]"#;
    let rig = CameraRig::from_json(json).unwrap();
    assert_eq!(rig.cameras[0].view_tag, ViewTag::Other);
}

#[test]
fn json_round_trip() {
    let rig = CameraRig::new(vec![cam()]).unwrap();
    assert_eq!(CameraRig::from_json(&rig.to_json()).unwrap(), rig);
}
