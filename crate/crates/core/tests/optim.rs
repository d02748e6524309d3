use carve_core::optim::*;

#[test]
fn first_step_moves_by_lr() {
    // With bias correction the first step is lr * sign(g) up to eps.
    let mut opt = Adam::new(3, 0.01);
    let mut p = vec![1.0, 1.0, 1.0];
    opt.step(&mut p, &[2.0, -0.5, 0.0]).unwrap();
    assert!((p[0] - 0.99).abs() < 1e-9);
    assert!((p[1] - 1.01).abs() < 1e-9);
    assert_eq!(p[2], 1.0);
}

#[test]
fn zero_gradient_is_a_no_op() {
    let mut opt = Adam::new(2, 0.1);
    let mut p = vec![0.3, -0.7];
    for _ in 0..5 {
        opt.step(&mut p, &[0.0, 0.0]).unwrap();
    }
    assert_eq!(p, vec![0.3, -0.7]);
}

#[test]
fn joint_and_split_updates_agree() {
    let g = [0.3, -1.2, 4.0, 0.01];
    let mut joint = Adam::new(4, 0.05);
    let mut pj = vec![1.0, 2.0, 3.0, 4.0];
    let (mut a, mut b) = (Adam::new(2, 0.05), Adam::new(2, 0.05));
    let (mut pa, mut pb) = (vec![1.0, 2.0], vec![3.0, 4.0]);
    for _ in 0..10 {
        joint.step(&mut pj, &g).unwrap();
        a.step(&mut pa, &g[..2]).unwrap();
        b.step(&mut pb, &g[2..]).unwrap();
    }
    assert_eq!(&pj[..2], &pa[..]);
    assert_eq!(&pj[2..], &pb[..]);
}

#[test]
fn minimizes_a_quadratic() {
    let mut opt = Adam::new(1, 0.05);
    let mut p = vec![3.0];
    for _ in 0..2000 {
        let g = 2.0 * (p[0] - 1.0);
        opt.step(&mut p, &[g]).unwrap();
    }
    assert!((p[0] - 1.0).abs() < 1e-3);
}

#[test]
fn length_mismatch_errors() {
    let mut opt = Adam::new(2, 0.1);
    assert!(opt.step(&mut [0.0; 3], &[0.0; 3]).is_err());
}
