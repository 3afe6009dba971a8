use std::sync::Arc;

use nk_lagrangian::builder::{build, Axis, BuildOptions, Case1, Case2, Case3, Grid3};
use nk_lagrangian::field::{Constant, LiouvilleAnalytic};
use nk_lagrangian::surface::{CliffordSurface, NormalSign};
use nk_lagrangian::verify::{verify, Thresholds, VerifyOptions};
use nk_lagrangian::Quat;

fn clifford() -> Arc<CliffordSurface> {
    Arc::new(CliffordSurface { sign: NormalSign::Minus })
}

#[test]
fn case3_flat_passes_verify() {
    let grid = Grid3::new(
        Axis::new(0.0, 1e-3, 9).unwrap(),
        Axis::new(0.2, 1e-3, 9).unwrap(),
        Axis::new(0.3, 1e-3, 9).unwrap(),
    );
    let b = build(Arc::new(Case3::new(clifford())), grid, BuildOptions::default()).unwrap();
    let r = verify(&b, &b.verify_sites(64), &VerifyOptions::default()).unwrap();
    assert!(r.passes(&Thresholds::default()), "{}", r.to_text());
}

#[test]
fn case1_window_passes_verify() {
    let c = Case1::new(clifford(), Arc::new(LiouvilleAnalytic::new(1.0).unwrap()), 1.0).unwrap();
    let pi = std::f64::consts::PI;
    let grid = Grid3::new(
        Axis::spanning(pi / 8.0, 3.0 * pi / 8.0, 17).unwrap(),
        Axis::spanning(0.55, 0.65, 9).unwrap(),
        Axis::spanning(0.55, 0.65, 9).unwrap(),
    );
    let b = build(Arc::new(c), grid, BuildOptions::default()).unwrap();
    let r = verify(&b, &b.verify_sites(64), &VerifyOptions::default()).unwrap();
    assert!(r.passes(&Thresholds::default()), "{}", r.to_text());
}

#[test]
fn case2_fixture_passes_verify() {
    let c = Case2::new(Arc::new(Constant(0.25 * 3f64.ln())), Quat::ONE).unwrap();
    let grid = Grid3::new(
        Axis::new(0.2, 1e-2, 9).unwrap(),
        Axis::new(0.3, 1e-2, 9).unwrap(),
        Axis::new(0.5, 1e-2, 9).unwrap(),
    );
    let b = build(Arc::new(c), grid, BuildOptions::default()).unwrap();
    let r = verify(&b, &b.verify_sites(64), &VerifyOptions::default()).unwrap();
    assert!(r.passes(&Thresholds::default()), "{}", r.to_text());
}
