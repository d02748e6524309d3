use carve_core::math::*;

#[test]
fn quarter_turns_are_exact() {
    assert_eq!(sin_cos_deg(180.0), (0.0, -1.0));
    assert_eq!(sin_cos_deg(-90.0), (-1.0, 0.0));
    assert_eq!(sin_cos_deg(450.0), (1.0, 0.0));
    let (s, c) = sin_cos_deg(30.0);
    assert!((s - 0.5).abs() < 1e-15 && (c - 3f64.sqrt() / 2.0).abs() < 1e-15);
}

#[test]
fn seeds_differ() {
    assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
}
