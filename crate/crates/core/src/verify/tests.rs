use super::fixtures::*;
use super::*;
use proptest::prelude::*;

fn sites() -> Vec<[f64; 3]> {
    vec![[0.1, 0.2, 0.3], [0.7, -0.4, 0.5], [-0.3, 0.9, 1.1]]
}

fn run(f: &dyn Immersion, analytic: bool) -> VerifyReport {
    let opts = VerifyOptions {
        analytic_tangents: analytic,
        ..Default::default()
    };
    verify(f, &sites(), &opts).unwrap()
}

#[test]
fn totally_geodesic_passes() {
    let r = run(&TotallyGeodesic, true);
    assert!(r.passes(&Thresholds::default()), "{}\n{:?}", r.to_text(), r.site_errors);
    for s in &r.per_site {
        for t in s.two_theta {
            assert!((t - 2.0 * PI / 3.0).abs() < 1e-9, "{:?}", s.two_theta);
        }
    }
    // p is constant, so its surface checks are not applicable
    assert!(r.mean_curvature_p.is_none() && r.xi_normal_alignment.is_none());
    assert!(r.to_text().contains("mean_curvature_p=skipped"));
}

#[test]
fn conjugation_passes_both_tangent_paths() {
    for analytic in [true, false] {
        let r = run(&Conjugation, analytic);
        let t = Thresholds::default();
        assert!(r.passes(&t), "{}\n{:?}", r.to_text(), r.failures(&t));
        assert!(r.dp_length_residual.unwrap() < 1e-6);
        assert!(r.mean_curvature_p.unwrap() < 1e-6);
    }
}

#[test]
fn flat_torus_is_lagrangian() {
    let r = run(&FlatTorus, false);
    let t = Thresholds::default();
    assert!(r.passes(&t), "{}\n{:?}\n{:?}", r.to_text(), r.failures(&t), r.dp_length_residual);
}

#[test]
fn product_control_fails() {
    let r = run(&ProductControl, false);
    assert!(r.max_lagrangian_residual > 0.1, "{}", r.to_text());
    assert!(!r.passes(&Thresholds::default()));
}

#[test]
fn degenerate_tangents() {
    let z = NKTangent::new(ImQuat::I, ImQuat::J);
    assert!(lagrangian_defect(&[z, z * 2.0, NKTangent::new(ImQuat::K, ImQuat::ZERO)]).is_none());
}

use crate::quat::ImQuat;

#[test]
fn report_has_eight_lines() {
    let r = run(&Conjugation, true);
    let text = r.to_text();
    let names: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
    assert_eq!(
        names,
        [
            "max_lagrangian_residual",
            "max_unit_drift",
            "theta1_deviation",
            "angle_sum_deviation",
            "mean_curvature_p",
            "cubic_trace_residual",
            "loop_closure",
            "xi_normal_alignment"
        ]
    );
    assert!(text.contains("loop_closure=skipped"));
}

#[test]
fn bad_step_rejected() {
    let opts = VerifyOptions {
        fd_step: 0.5,
        ..Default::default()
    };
    assert!(matches!(verify(&Conjugation, &sites(), &opts), Err(Error::Domain(_))));
}

#[test]
fn sampled_grid_matches_closed_form() {
    let (n, h) = (9usize, 0.02);
    let start = [0.1, 0.2, 0.3];
    let mut points = Vec::new();
    for k in 0..n * n * n {
        let i = [k % n, (k / n) % n, k / (n * n)];
        let x = [0, 1, 2].map(|a| start[a] + i[a] as f64 * h);
        points.push(Some((Conjugation.point(x, x).unwrap(), FRAC_PI_3_)));
    }
    let s = SampledImmersion {
        start,
        steps: [h; 3],
        shape: [n; 3],
        points,
    };
    let sites = s.verifiable_sites();
    assert_eq!(sites.len(), 5 * 5 * 5);
    let r = verify(&s, &sites, &VerifyOptions::default()).unwrap();
    assert!(r.max_lagrangian_residual < 1e-6, "{}", r.to_text());
    assert!(r.theta1_deviation < 1e-6);
}

const FRAC_PI_3_: f64 = PI / 3.0;

#[test]
fn multiset_distance_wraps() {
    let a = [0.1, 2.0, 4.0];
    let b = [TAU - 0.05, 2.0 + 1e-3, 4.0];
    assert!((angle_multiset_distance(a, b) - 0.15).abs() < 1e-12);
}

/// `(p, q) ↦ (a p c̄, b q c̄)` is an isometry of the nearly Kähler structure.
struct Moved<F> {
    inner: F,
    a: Quat,
    b: Quat,
    c: Quat,
}

impl<F: Immersion> Immersion for Moved<F> {
    fn point(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<NKPoint> {
        let z = self.inner.point(anchor, x)?;
        Ok(NKPoint {
            p: self.a * z.p * self.c.conj(),
            q: self.b * z.q * self.c.conj(),
        })
    }
    fn lambda(&self, anchor: [f64; 3], x: [f64; 3]) -> Option<f64> {
        self.inner.lambda(anchor, x)
    }
}

fn unit() -> impl Strategy<Value = Quat> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("nonzero", |a| a.iter().map(|x| x * x).sum::<f64>() > 0.1)
        .prop_map(|a| Quat::from_array(a).normalize().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn isometries_preserve_the_checks(a in unit(), b in unit(), c in unit()) {
        let f = Moved { inner: Conjugation, a, b, c };
        let r = verify(&f, &sites()[..1], &VerifyOptions::default()).unwrap();
        prop_assert!(r.passes(&Thresholds::default()), "{}", r.to_text());
    }
}
