//! Closed-form immersions used to calibrate the checks.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3};

use super::Immersion;
use crate::error::Result;
use crate::nk::NKPoint;
use crate::quat::{ImQuat, Quat};
use crate::surface::{clifford_patch, NormalSign};

/// `x = e^{ai} e^{bj} e^{ck}` and its partial derivatives.
fn euler(x: [f64; 3]) -> (Quat, [Quat; 3]) {
    let ea = (ImQuat::I * x[0]).exp();
    let eb = (ImQuat::J * x[1]).exp();
    let ec = (ImQuat::K * x[2]).exp();
    let q = ea * eb * ec;
    (q, [Quat::I * q, ea * Quat::J * eb * ec, q * Quat::K])
}

/// `(1, x)`: totally geodesic, Λ = 0.
pub struct TotallyGeodesic;

impl Immersion for TotallyGeodesic {
    fn point(&self, _anchor: [f64; 3], x: [f64; 3]) -> Result<NKPoint> {
        Ok(NKPoint { p: Quat::ONE, q: euler(x).0 })
    }
    fn lambda(&self, _anchor: [f64; 3], _x: [f64; 3]) -> Option<f64> {
        Some(0.0)
    }
    fn derivatives(&self, x: [f64; 3]) -> Option<[(Quat, Quat); 3]> {
        let (_, d) = euler(x);
        Some(d.map(|dq| (Quat::ZERO, dq)))
    }
}

/// `(x i x̄, x j x̄)`: totally geodesic with constant angles, Λ = π/3.
pub struct Conjugation;

impl Immersion for Conjugation {
    fn point(&self, _anchor: [f64; 3], x: [f64; 3]) -> Result<NKPoint> {
        let (q, _) = euler(x);
        Ok(NKPoint {
            p: q * Quat::I * q.conj(),
            q: q * Quat::J * q.conj(),
        })
    }
    fn lambda(&self, _anchor: [f64; 3], _x: [f64; 3]) -> Option<f64> {
        Some(FRAC_PI_3)
    }
    fn derivatives(&self, x: [f64; 3]) -> Option<[(Quat, Quat); 3]> {
        let (q, d) = euler(x);
        let conj = |c: Quat, dx: Quat| dx * c * q.conj() + q * c * dx.conj();
        Some(d.map(|dx| (conj(Quat::I, dx), conj(Quat::J, dx))))
    }
}

/// A flat torus family in `(u, v, w)`: `p` depends on `(u, w)` and
/// `q` on `(u, v)`.
pub struct FlatTorus;

impl Immersion for FlatTorus {
    fn point(&self, _anchor: [f64; 3], x: [f64; 3]) -> Result<NKPoint> {
        let [u, v, w] = x;
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        let (sw, cw) = w.sin_cos();
        let p = Quat::new(cu * cw, cu * sw, su * cw, su * sw);
        let (a, b) = ((su + cu) * FRAC_1_SQRT_2, (su - cu) * FRAC_1_SQRT_2);
        let q = Quat::new(cv * a, sv * a, cv * b, sv * b);
        Ok(NKPoint { p, q })
    }
    fn lambda(&self, _anchor: [f64; 3], _x: [f64; 3]) -> Option<f64> {
        Some(FRAC_PI_3)
    }
}

/// `(p(u, v), e^{ti})` with `p` a Clifford torus patch: not Lagrangian,
/// so it must fail.
pub struct ProductControl;

impl Immersion for ProductControl {
    fn point(&self, _anchor: [f64; 3], x: [f64; 3]) -> Result<NKPoint> {
        let p = clifford_patch(x[1], x[2], NormalSign::Minus).p;
        Ok(NKPoint {
            p,
            q: (ImQuat::I * x[0]).exp(),
        })
    }
}
