use carve_core::tetra::pyramid::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn restrict_is_the_transpose_of_prolong() {
    let p = Pyramid::new(8, 2, 8, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f: Vec<f64> = (0..9usize.pow(3)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut pc = vec![0.0; f.len()];
    p.prolong_add(&c, &mut pc);
    let lhs: f64 = pc.iter().zip(&f).map(|(a, b)| a * b).sum();
    let rc = p.restrict(&f);
    let rhs: f64 = rc.iter().zip(&c).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
}

#[test]
fn prolongation_reproduces_affine_fields() {
    // A coarse affine field prolongs to the same affine field on the fine lattice.
    let p = Pyramid::new(8, 4, 8, 1.0);
    let (r, off) = p.level(0);
    assert_eq!(r, 4);
    let mut c = vec![0.0; p.len()];
    for k in 0..=r {
        for j in 0..=r {
            for i in 0..=r {
                c[off + i + (r + 1) * (j + (r + 1) * k)] = (i as f64 - 2.0 * j as f64 + 0.5 * k as f64) / r as f64;
            }
        }
    }
    let mut fine = vec![0.0; 729];
    p.prolong_add(&c, &mut fine);
    for k in 0..=8 {
        for j in 0..=8 {
            for i in 0..=8 {
                let want = (i as f64 - 2.0 * j as f64 + 0.5 * k as f64) / 8.0;
                assert!((fine[i + 9 * (j + 9 * k)] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn spline_restrict_is_the_transpose_of_prolong() {
    let p = Pyramid::spline(8, 2, 8, 0.85);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f: Vec<f64> = (0..729).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut pc = vec![0.0; f.len()];
    p.prolong_add(&c, &mut pc);
    let lhs: f64 = pc.iter().zip(&f).map(|(a, b)| a * b).sum();
    let rhs: f64 = p.restrict(&f).iter().zip(&c).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
}

#[test]
fn spline_levels_reproduce_affine_fields() {
    // Control point j of a level at resolution r sits at knot j - 1, i.e. x = (j - 1) / r.
    let p = Pyramid::spline(8, 4, 4, 1.0);
    let (r, off) = p.level(0);
    assert_eq!((r, p.len()), (4, 343));
    let f = |x: f64, y: f64, z: f64| 0.3 + x - 2.0 * y + 0.5 * z;
    let k = r + 3;
    let mut c = vec![0.0; p.len()];
    for kz in 0..k {
        for ky in 0..k {
            for kx in 0..k {
                let at = |j: usize| (j as f64 - 1.0) / r as f64;
                c[off + kx + k * (ky + k * kz)] = f(at(kx), at(ky), at(kz));
            }
        }
    }
    let mut fine = vec![0.0; 729];
    p.prolong_add(&c, &mut fine);
    for iz in 0..=8 {
        for iy in 0..=8 {
            for ix in 0..=8 {
                let want = f(ix as f64 / 8.0, iy as f64 / 8.0, iz as f64 / 8.0);
                assert!((fine[ix + 9 * (iy + 9 * iz)] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn direct_is_the_identity() {
    let p = Pyramid::for_param(4, &FieldParam::Direct);
    let c: Vec<f64> = (0..125).map(|i| i as f64).collect();
    let mut fine = vec![1.0; 125];
    p.prolong_add(&c, &mut fine);
    assert!(fine.iter().zip(&c).all(|(f, v)| *f == v + 1.0));
    assert_eq!(p.restrict(&c), c);
}
