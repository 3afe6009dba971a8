//! Case 1: a minimal surface with conformal factor ω plus a solution μ of
//! `Δμ = −e^μ`, on the set `V = {e^{ω+μ} − 2 − 2cos4t > 0}`.

use std::sync::Arc;

use super::Construction;
use crate::error::{Error, Result};
use crate::field::{Jet, Provenance, SmoothField};
use crate::quat::{ImQuat, Quat};
use crate::surface::{FrameSample, SurfaceMap};

const S3: f64 = 1.732_050_807_568_877_2;

/// Smallest admissible `|√3e^ω − sin2t tanΛ|` and `|1/√3 + h³₁₂ csc2Λ|`.
pub const MARGIN: f64 = 1e-6;

fn lambda_at(omega: f64, mu: f64, x: [f64; 3], eps1: f64) -> Result<f64> {
    let [t, u, v] = x;
    let disc = (omega + mu).exp() - 2.0 - 2.0 * (4.0 * t).cos();
    if !(disc > 0.0) {
        return Err(Error::OutsideV { t, u, v, value: disc });
    }
    let den = eps1 * disc.sqrt() + 2.0 * (2.0 * t).sin();
    let tan = 2.0 * S3 * omega.exp() / den;
    // Λ must land in (0, π/2); a non-positive tangent has no such root
    if !(den.abs() > 1e-12) || !(tan > 0.0) || !tan.is_finite() {
        return Err(Error::Branch { t, u, v, value: den });
    }
    Ok(tan.atan())
}

/// Solves `(2√3e^ω/tanΛ − 2sin2t)² = e^{ω+μ} − 2 − 2cos4t` on the branch
/// `2√3e^ω/tanΛ − 2sin2t = ε₁√(…)`, with `Λ ∈ (0, π/2)`.
pub fn lambda_case1(omega: f64, mu: f64, t: f64, eps1: f64) -> Result<f64> {
    lambda_at(omega, mu, [t, f64::NAN, f64::NAN], eps1)
}

/// `h³₁₃, h³₁₂, h³₂₂, h³₂₃` of the Case-1 family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicCoefficients {
    pub h13_3: f64,
    pub h12_3: f64,
    pub h22_3: f64,
    pub h23_3: f64,
}

/// Everything the construction needs at one point.
struct Local {
    frame: FrameSample,
    w: Jet,
    m: Jet,
    lambda: f64,
    t: f64,
}

pub struct Case1 {
    surface: Arc<dyn SurfaceMap>,
    mu: Arc<dyn SmoothField>,
    eps1: f64,
}

impl Case1 {
    pub fn new(surface: Arc<dyn SurfaceMap>, mu: Arc<dyn SmoothField>, eps1: f64) -> Result<Self> {
        if eps1 != 1.0 && eps1 != -1.0 {
            return Err(Error::Domain(format!("epsilon1 must be +1 or -1, got {eps1}")));
        }
        Ok(Case1 { surface, mu, eps1 })
    }

    fn local(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<Local> {
        let [t, u, v] = x;
        let w = self.surface.omega(u, v)?;
        let m = self.mu.eval(u, v)?;
        let lambda = lambda_at(w.f, m.f, x, self.eps1)?;
        let den = S3 * w.f.exp() - (2.0 * t).sin() * lambda.tan();
        if den.abs() <= MARGIN {
            return Err(Error::Branch { t, u, v, value: den });
        }
        let h12 = cubic(&w, &m, t, lambda).h12_3;
        let imm = 1.0 / S3 + h12 / (2.0 * lambda).sin();
        if imm.abs() <= MARGIN {
            return Err(Error::Branch { t, u, v, value: imm });
        }
        let frame = self.surface.frame_near((anchor[1], anchor[2]), u, v)?;
        Ok(Local { frame, w, m, lambda, t })
    }

    pub fn cubic(&self, x: [f64; 3]) -> Result<CubicCoefficients> {
        let l = self.local(x, x)?;
        Ok(cubic(&l.w, &l.m, l.t, l.lambda))
    }

    /// Rows `Eᵢ = Σₐ Mᵢₐ ∂ₐ` of the adapted frame in `(t, u, v)` coordinates.
    pub fn frame_relation(&self, x: [f64; 3]) -> Result<[[f64; 3]; 3]> {
        let l = self.local(x, x)?;
        let (om, t, lam) = (l.w.f, l.t, l.lambda);
        let (su, sv) = (l.m.fu + l.w.fu, l.m.fv + l.w.fv);
        let (tl, sl) = (lam.tan(), lam.sin());
        let e = om.exp();
        let eh = (-om / 2.0).exp();
        let k = (-1.5 * om).exp() * sl / (12.0 * 2f64.sqrt());
        let (st, ct) = t.sin_cos();
        let (s3t, c3t) = (3.0 * t).sin_cos();
        let r = sl / 2f64.sqrt() * eh;
        Ok([
            [0.5 * (S3 - 2.0 * (-om).exp() * tl * st * ct), 0.0, 0.0],
            [-k * (S3 * tl * (su * c3t + sv * s3t) + 3.0 * e * (su * st - sv * ct)), ct * r, st * r],
            [k * (S3 * tl * (su * s3t - sv * c3t) - 3.0 * e * (su * ct + sv * st)), -st * r, ct * r],
        ])
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }
}

fn cubic(w: &Jet, m: &Jet, t: f64, lam: f64) -> CubicCoefficients {
    let (sl, cl) = lam.sin_cos();
    let e = w.f.exp();
    let ei = (-w.f).exp();
    let (su, sv) = (m.fu + w.fu, m.fv + w.fv);
    let (du, dv) = (m.fu - w.fu, m.fv - w.fv);
    let (st, ct) = t.sin_cos();
    let (s3t, c3t) = (3.0 * t).sin_cos();
    let k = (-1.5 * w.f).exp() * sl * sl / (6.0 * 2f64.sqrt());
    CubicCoefficients {
        h13_3: -ei * (2.0 * t).cos() * sl * sl,
        h12_3: (-ei * (2.0 * t).sin() * sl + cl / S3) * sl,
        h22_3: k * (3.0 * e * cl * (-du * st + dv * ct) - S3 * sl * (su * c3t + sv * s3t)),
        h23_3: k * (S3 * sl * (su * s3t - sv * c3t) - 3.0 * e * cl * (du * ct + dv * st)),
    }
}

impl Construction for Case1 {
    fn case(&self) -> u8 {
        1
    }

    fn forms(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<[ImQuat; 3]> {
        let l = self.local(anchor, x)?;
        let a2 = l.frame.alpha2();
        let a3 = l.frame.alpha3();
        let c = a2.cross(a3);
        let (om, t) = (l.w.f, l.t);
        let tl = l.lambda.tan();
        let cot = 1.0 / tl;
        let ei = (-om).exp();
        let (s2, c2) = (2.0 * t).sin_cos();
        let den = S3 * om.exp() - s2 * tl;
        let (su, sv) = (l.m.fu + l.w.fu, l.m.fv + l.w.fv);

        let b1 = c * (-S3 / (2.0 * den));
        let b2 = (c * (ei * (sv - su * c2 * tl / den)) - a2 * (4.0 * (S3 * cot * c2 - 1.0)) - a3 * (4.0 * S3 * s2 * cot)) / 8.0;
        let b3 = (c * (-ei * (su + sv * c2 * tl / den)) - a2 * (4.0 * S3 * cot * s2) + a3 * (4.0 * (1.0 + S3 * c2 * cot))) / 8.0;
        Ok([b1, b2, b3])
    }

    fn p(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<Quat> {
        Ok(self.surface.frame_near((anchor[1], anchor[2]), x[1], x[2])?.p)
    }

    fn dp(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<[Quat; 3]> {
        let f = self.surface.frame_near((anchor[1], anchor[2]), x[1], x[2])?;
        Ok([Quat::ZERO, f.du, f.dv])
    }

    fn lambda(&self, x: [f64; 3]) -> Result<f64> {
        Ok(self.local(x, x)?.lambda)
    }

    fn provenance(&self) -> Provenance {
        self.surface.provenance().combine(self.mu.provenance())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{integrability_residual, integrability_residual_at, Axis, ConnectionForms, Grid3};
    use crate::field::LiouvilleAnalytic;
    use crate::surface::{CliffordSurface, NormalSign};
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn clifford_case() -> Case1 {
        Case1::new(
            Arc::new(CliffordSurface { sign: NormalSign::Minus }),
            Arc::new(LiouvilleAnalytic::new(1.0).unwrap()),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn lambda_examples() {
        let l = lambda_case1(0.0, 0.0, FRAC_PI_4, 1.0).unwrap();
        assert!((l.tan() - 2.0 / S3).abs() < 1e-14);
        assert!((l - 0.857_072).abs() < 1e-6);
        let l = lambda_case1(0.0, 0.0, FRAC_PI_4, -1.0).unwrap();
        assert!((l.tan() - 2.0 * S3).abs() < 1e-13);
        assert!((l - 1.289_761).abs() < 1e-6);
        assert!(matches!(lambda_case1(0.0, 0.0, 0.0, 1.0), Err(Error::OutsideV { .. })));
    }

    #[test]
    fn lambda_satisfies_squared_identity() {
        for &(om, mu, t, e) in &[(0.1, 1.5, 0.5, 1.0), (-0.2, 2.0, 1.0, 1.0), (0.0, 0.5, 0.7, -1.0)] {
            let l = lambda_case1(om, mu, t, e).unwrap();
            let lhs = (2.0 * S3 * f64::exp(om) / l.tan() - 2.0 * (2.0 * t).sin()).powi(2);
            let rhs = f64::exp(om + mu) - 2.0 - 2.0 * (4.0 * t).cos();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} {rhs}");
            assert!(l > 0.0 && l < std::f64::consts::FRAC_PI_2);
        }
    }

    #[test]
    fn flat_inputs_drop_normal_components() {
        use crate::field::Constant;
        let c = Case1::new(Arc::new(CliffordSurface { sign: NormalSign::Minus }), Arc::new(Constant(1.8)), 1.0).unwrap();
        let x = [0.6, 0.2, 0.1];
        let f = c.forms(x, x).unwrap();
        let fr = clifford_patch_frame(0.2, 0.1);
        let n = fr.alpha2().cross(fr.alpha3());
        assert!(f[1].dot(n).abs() < 1e-14 && f[2].dot(n).abs() < 1e-14);
    }

    fn clifford_patch_frame(u: f64, v: f64) -> FrameSample {
        crate::surface::clifford_patch(u, v, NormalSign::Minus)
    }

    #[test]
    fn forms_are_integrable() {
        let c = clifford_case();
        for x in [[FRAC_PI_4, 0.6, 0.6], [FRAC_PI_4 + 0.1, 0.57, 0.63], [3.0 * FRAC_PI_8 - 0.05, 0.62, 0.56]] {
            let r = integrability_residual_at(&c, x, 1e-3).unwrap();
            assert!(r.iter().all(|&e| e < 1e-8), "{x:?} {r:?}");
        }
        let g = Grid3::new(
            Axis::spanning(FRAC_PI_4 - 0.004, FRAC_PI_4 + 0.004, 9).unwrap(),
            Axis::spanning(0.596, 0.604, 9).unwrap(),
            Axis::spanning(0.596, 0.604, 9).unwrap(),
        );
        let r = integrability_residual(&ConnectionForms::sample(Arc::new(clifford_case()), g));
        assert!(r.iter().all(|&e| e < 1e-5), "{r:?}");
    }

    #[test]
    fn outside_v_is_site_tagged() {
        let c = clifford_case();
        match c.forms([0.05, 0.6, 0.6], [0.05, 0.6, 0.6]) {
            Err(Error::OutsideV { t, u, v, .. }) => assert_eq!((t, u, v), (0.05, 0.6, 0.6)),
            other => panic!("{other:?}"),
        }
    }

    /// `E₁(Λ) = h³₁₃`, `E₂(Λ) = h³₂₃`, `E₃(Λ) = −h³₂₂` through the frame relation.
    #[test]
    fn cubic_coefficients_match_lambda_derivatives() {
        let c = clifford_case();
        let x = [FRAC_PI_4 + 0.1, 0.58, 0.63];
        let h = 1e-5;
        let mut grad = [0.0; 3];
        for a in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[a] += h;
            xm[a] -= h;
            grad[a] = (c.lambda(xp).unwrap() - c.lambda(xm).unwrap()) / (2.0 * h);
        }
        let m = c.frame_relation(x).unwrap();
        let e: Vec<f64> = m.iter().map(|r| r[0] * grad[0] + r[1] * grad[1] + r[2] * grad[2]).collect();
        let h3 = c.cubic(x).unwrap();
        assert!((e[0] - h3.h13_3).abs() < 1e-8, "{} {}", e[0], h3.h13_3);
        assert!((e[1] - h3.h23_3).abs() < 1e-8, "{} {}", e[1], h3.h23_3);
        assert!((e[2] + h3.h22_3).abs() < 1e-8, "{} {}", e[2], h3.h22_3);
    }
}
