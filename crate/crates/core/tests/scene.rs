use carve_core::*;
use carve_core::scene::*;

fn spec(k: usize) -> RigSpec {
    RigSpec {
        k_views: k,
        image_size: 128,
        ..RigSpec::default()
    }
}

#[test]
fn seven_views_step_thirty_degrees() {
    let rig = instantiate_rig(&spec(7)).unwrap();
    assert_eq!(rig.len(), 7);
    for (i, c) in rig.cameras.iter().enumerate() {
        assert!((c.azimuth_deg() - 30.0 * i as f64).abs() < 1e-9);
        assert!(((c.position - c.look_at).norm() - 2.7).abs() < 1e-9);
    }
    assert_eq!(rig.cameras[0].view_tag, ViewTag::Front);
    assert_eq!(rig.cameras[6].view_tag, ViewTag::Back);
    assert!(rig.cameras[1..6].iter().all(|c| c.view_tag == ViewTag::Other));
}

#[test]
fn single_view_sits_at_start() {
    let rig = instantiate_rig(&RigSpec {
        azimuth_start: 45.0,
        ..spec(1)
    })
    .unwrap();
    assert_eq!(rig.len(), 1);
    assert!((rig.cameras[0].azimuth_deg() - 45.0).abs() < 1e-9);
}

#[test]
fn mirror_fills_the_other_half() {
    let rig = instantiate_rig(&RigSpec {
        mirror_to_360: true,
        ..spec(7)
    })
    .unwrap();
    assert_eq!(rig.len(), 12);
    let mut az: Vec<f64> = rig.cameras.iter().map(|c| c.azimuth_deg().round()).collect();
    az.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(az, (0..12).map(|i| 30.0 * i as f64).collect::<Vec<_>>());
}

#[test]
fn invalid_spec() {
    assert!(instantiate_rig(&spec(0)).is_err());
    assert!(instantiate_rig(&RigSpec {
        azimuth_end: 0.0,
        ..spec(3)
    })
    .is_err());
}

#[test]
fn centre_joint_hits_image_centre_in_every_view() {
    let rig = instantiate_rig(&spec(7)).unwrap();
    let skel = Skeleton {
        joints: vec![Joint {
            name: "c".into(),
            p: [0.0; 3],
        }],
        bones: vec![],
    };
    for cam in &rig.cameras {
        let (x, y) = project_joints(&skel, cam).unwrap()[0];
        assert!((x - 64.0).abs() <= 0.5 && (y - 64.0).abs() <= 0.5);
    }
}

#[test]
fn symmetric_joints_mirror_about_centre_column() {
    let rig = instantiate_rig(&spec(7)).unwrap();
    let skel = Skeleton {
        joints: vec![
            Joint { name: "l".into(), p: [0.2, 0.1, 0.0] },
            Joint { name: "r".into(), p: [-0.2, 0.1, 0.0] },
        ],
        bones: vec![[0, 1]],
    };
    let p = project_joints(&skel, &rig.cameras[0]).unwrap();
    assert!((p[0].0 - 64.0 + (p[1].0 - 64.0)).abs() < 1e-9);
    assert_eq!(p[0].1, p[1].1);
}

#[test]
fn joint_behind_camera_is_named() {
    let rig = instantiate_rig(&spec(1)).unwrap();
    let skel = Skeleton {
        joints: vec![Joint { name: "far_hand".into(), p: [0.0, 0.0, 5.0] }],
        bones: vec![],
    };
    let err = project_skeleton(&skel, &rig.cameras[0]).unwrap_err();
    assert!(err.to_string().contains("far_hand"));
}

#[test]
fn front_and_back_pose_images_are_mirrors() {
    let rig = instantiate_rig(&RigSpec {
        image_size: 256,
        ..spec(7)
    })
    .unwrap();
    let skel = Skeleton::canonical_24();
    let front = project_skeleton(&skel, &rig.cameras[0]).unwrap();
    let back = project_skeleton(&skel, &rig.cameras[6]).unwrap();
    assert!(front.data.iter().any(|&v| v > 0.0));
    assert_eq!(front.flip_horizontal(), back);
}

#[test]
fn rotating_the_skeleton_matches_stepping_the_rig() {
    let rig = instantiate_rig(&spec(7)).unwrap();
    let skel = Skeleton::canonical_24();
    for i in 0..6 {
        let rotated = skel.rotated_y(Vec3::zeros(), -30.0);
        let a = project_joints(&rotated, &rig.cameras[i]).unwrap();
        let b = project_joints(&skel, &rig.cameras[i + 1]).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
        }
    }
}

#[test]
fn pose_rendering_is_deterministic() {
    let rig = instantiate_rig(&spec(3)).unwrap();
    let skel = Skeleton::canonical_24();
    assert_eq!(project_rig(&skel, &rig).unwrap(), project_rig(&skel, &rig).unwrap());
}

#[test]
fn concat_and_split() {
    let views: Vec<ImagePlane> = (0..3)
        .map(|j| {
            let data = (0..4 * 2 * 3).map(|i| (i + 100 * j) as f64).collect();
            ImagePlane::from_data(4, 2, ImageKind::Pose, data).unwrap()
        })
        .collect();
    let sheet = concat_views(&views).unwrap();
    assert_eq!((sheet.width, sheet.height), (12, 2));
    assert_eq!(sheet.pixel(4 + 1, 1), views[1].pixel(1, 1));
    assert_eq!(split_views(&sheet, 3).unwrap(), views);
    assert_eq!(concat_views(&views[..1]).unwrap(), views[0]);
    let odd = ImagePlane::zeros(3, 2, ImageKind::Pose);
    assert!(concat_views(&[views[0].clone(), odd]).is_err());
}

#[test]
fn seven_512_views_make_a_3584_sheet() {
    let views = vec![ImagePlane::zeros(512, 512, ImageKind::Pose); 7];
    let sheet = concat_views(&views).unwrap();
    assert_eq!((sheet.width, sheet.height), (3584, 512));
}

#[test]
fn normalization_gives_unit_height_centred_box() {
    let mut m = carve_core::testkit::unit_cube();
    for v in &mut m.vertices {
        *v = *v * 3.0 + Vec3::new(1.0, 2.0, 3.0);
    }
    let n = BodyNormalization::of(&m).unwrap().apply_mesh(&m);
    let b = n.bounds();
    assert!((b.extent().y - 1.0).abs() < 1e-12);
    assert!(b.center().norm() < 1e-12);
}
