//! Writes the synthetic ground-truth bundle: `cargo run --example gt_bundle -- <dir>`.
use carve_core::testkit::{write_gt_bundle, GtBundleSpec};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "gt_bundle".into());
    let path = write_gt_bundle(std::path::Path::new(&dir), &GtBundleSpec::default()).expect("bundle written");
    println!("{}", path.display());
}
