//! Case 2: the totally geodesic sphere. The input is a function β on S³,
//! invariant along the left-invariant field `X₁(x) = xi`, solving
//! `csc²(2v)β_uu + β_vv + 2cot(2v)β_v = 2(3e^{−4β} − 1)` in the chart
//! `x = e^{iu} e^{jv} e^{it}`.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{Construction, Stepper};
use crate::error::{Error, Result};
use crate::field::{Jet, Provenance, SmoothField};
use crate::quat::{ImQuat, Quat};

const S3: f64 = 1.732_050_807_568_877_2;

/// Smallest `|sin 2v|` accepted by the chart.
pub const CHART_MARGIN: f64 = 1e-6;

/// `x(t,u,v) = (cos v cos(t+u), cos v sin(t+u), sin v cos(u−t), sin v sin(u−t))`.
pub fn chart(t: f64, u: f64, v: f64) -> Quat {
    let (sv, cv) = v.sin_cos();
    let (sa, ca) = (t + u).sin_cos();
    let (sb, cb) = (u - t).sin_cos();
    Quat::new(cv * ca, cv * sa, sv * cb, sv * sb)
}

/// Coordinate fields in terms of `X₁, X₂, X₃`: row `a` holds the
/// coefficients of `∂ₐ`, so `∂ₐx = x·(Σ cₐₖ eₖ)` with `e = (i, j, k)`.
pub fn chart_derivatives(t: f64, v: f64) -> [[f64; 3]; 3] {
    let (s2t, c2t) = (2.0 * t).sin_cos();
    let (s2v, c2v) = (2.0 * v).sin_cos();
    [[1.0, 0.0, 0.0], [c2v, s2t * s2v, c2t * s2v], [0.0, c2t, -s2t]]
}

/// Inverse of [`chart`] on the branch whose `u` is nearest `u_ref`.
pub fn chart_inverse(x: Quat, u_ref: f64) -> (f64, f64, f64) {
    let a = x.x.atan2(x.w);
    let b = x.z.atan2(x.y);
    let v = x.y.hypot(x.z).atan2(x.w.hypot(x.x));
    let (mut t, mut u) = ((a - b) / 2.0, (a + b) / 2.0);
    // (t, u) and (t + π, u + π) name the same point
    let k = ((u_ref - u) / PI).round();
    t += k * PI;
    u += k * PI;
    (t, u, v)
}

/// `Λ = arctan(e^{2β})`.
pub fn lambda_case2(beta: f64) -> f64 {
    (2.0 * beta).exp().atan()
}

pub struct Case2 {
    beta: Arc<dyn SmoothField>,
    h: Quat,
}

impl Case2 {
    pub fn new(beta: Arc<dyn SmoothField>, h: Quat) -> Result<Self> {
        if !h.is_unit(1e-12) {
            return Err(Error::Domain(format!("h must be a unit quaternion, |h| = {}", h.norm())));
        }
        Ok(Case2 { beta, h })
    }

    fn conj(&self, x: Quat, e: Quat) -> ImQuat {
        (self.h * x * e * x.conj() * self.h.conj()).im()
    }

    /// `X₂(β), X₃(β)` from the chart partials.
    fn frame_derivatives(b: &Jet, t: f64, v: f64) -> Result<(f64, f64)> {
        let s2v = (2.0 * v).sin();
        let (s2t, c2t) = (2.0 * t).sin_cos();
        if b.fu == 0.0 {
            return Ok((c2t * b.fv, -s2t * b.fv));
        }
        if s2v.abs() < CHART_MARGIN {
            return Err(Error::Domain(format!("chart is singular at v = {v} (sin 2v = {s2v:e})")));
        }
        Ok((s2t / s2v * b.fu + c2t * b.fv, c2t / s2v * b.fu - s2t * b.fv))
    }

    /// Right-logarithmic derivatives of q along `X₁, X₂, X₃` at the chart
    /// point `(t, u, v)`.
    pub fn x_forms(&self, t: f64, u: f64, v: f64) -> Result<[ImQuat; 3]> {
        let b = self.beta.eval(u, v)?;
        let (x2b, x3b) = Case2::frame_derivatives(&b, t, v)?;
        let x = chart(t, u, v);
        let (hi, hj, hk) = (self.conj(x, Quat::I), self.conj(x, Quat::J), self.conj(x, Quat::K));
        let e = (-2.0 * b.f).exp();
        Ok([hi * -2.0, hi * -x3b - hj * (1.0 - S3 * e), hi * x2b - hk * (1.0 + S3 * e)])
    }

    pub fn h(&self) -> Quat {
        self.h
    }

    pub fn beta_field(&self) -> &Arc<dyn SmoothField> {
        &self.beta
    }
}

impl Construction for Case2 {
    fn case(&self) -> u8 {
        2
    }

    fn forms(&self, _anchor: [f64; 3], x: [f64; 3]) -> Result<[ImQuat; 3]> {
        let [t, u, v] = x;
        if (2.0 * v).sin().abs() < CHART_MARGIN {
            return Err(Error::Domain(format!("chart is singular at v = {v}")));
        }
        let bx = self.x_forms(t, u, v)?;
        let c = chart_derivatives(t, v);
        let mut out = [ImQuat::ZERO; 3];
        for a in 0..3 {
            out[a] = bx[0] * c[a][0] + bx[1] * c[a][1] + bx[2] * c[a][2];
        }
        Ok(out)
    }

    fn p(&self, _anchor: [f64; 3], x: [f64; 3]) -> Result<Quat> {
        let y = chart(x[0], x[1], x[2]);
        Ok(self.h * y * Quat::I * y.conj() * self.h.conj())
    }

    fn dp(&self, _anchor: [f64; 3], x: [f64; 3]) -> Result<[Quat; 3]> {
        let y = chart(x[0], x[1], x[2]);
        let c = chart_derivatives(x[0], x[2]);
        let mut out = [Quat::ZERO; 3];
        for a in 0..3 {
            let xi = Quat::new(0.0, c[a][0], c[a][1], c[a][2]);
            // X_ξ(x i x̄) = x (ξ i − i ξ) x̄
            out[a] = self.h * y * (xi * Quat::I - Quat::I * xi) * y.conj() * self.h.conj();
        }
        Ok(out)
    }

    fn lambda(&self, x: [f64; 3]) -> Result<f64> {
        Ok(lambda_case2(self.beta.eval(x[1], x[2])?.f))
    }

    /// `h x₀ j x₀⁻¹ h⁻¹`, the solution through the origin when β ≡ ¼ln3.
    fn default_q0(&self, origin: [f64; 3]) -> Quat {
        let y = chart(origin[0], origin[1], origin[2]);
        self.h * y * Quat::J * y.conj() * self.h.conj()
    }

    fn provenance(&self) -> Provenance {
        self.beta.provenance()
    }
}

/// Integrates `q` along the X-curve `x(s) = x₀ exp(s·e_axis)` for
/// `s ∈ [0, n·step]`, returning `(x(s), q(s))` at every step.
pub fn integrate_x_curve(c: &Case2, x0: Quat, q0: Quat, axis: usize, step: f64, n: usize, stepper: Stepper) -> Result<Vec<(Quat, Quat)>> {
    let e = [ImQuat::I, ImQuat::J, ImQuat::K][axis];
    let (_, mut u_ref, _) = chart_inverse(x0, 0.0);
    let mut form = |s: f64| -> Result<ImQuat> {
        let x = x0 * (e * s).exp();
        let (t, u, v) = chart_inverse(x, u_ref);
        u_ref = u;
        Ok(c.x_forms(t, u, v)?[axis])
    };
    let mut q = q0;
    let mut out = vec![(x0, q0)];
    for k in 0..n {
        let s = k as f64 * step;
        let w = match stepper {
            Stepper::Midpoint => form(s + step / 2.0)? * step,
            Stepper::Magnus4 => {
                let d = S3 / 6.0 * step;
                let b1 = form(s + step / 2.0 - d)?;
                let b2 = form(s + step / 2.0 + d)?;
                (b1 + b2) * (step / 2.0) + b1.cross(b2) * (S3 / 6.0 * step * step)
            }
        };
        q = q * w.exp();
        q = q / q.norm();
        out.push((x0 * (e * (s + step)).exp(), q));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::integrability_residual_at;
    use crate::field::Constant;

    fn fixture() -> Case2 {
        Case2::new(Arc::new(Constant(0.25 * 3f64.ln())), Quat::ONE).unwrap()
    }

    #[test]
    fn chart_is_a_product_of_exponentials() {
        let (t, u, v) = (0.3, -0.7, 0.4);
        let e = (ImQuat::I * u).exp() * (ImQuat::J * v).exp() * (ImQuat::I * t).exp();
        assert!(chart(t, u, v).max_abs_diff(e) < 1e-15);
    }

    #[test]
    fn chart_derivatives_match_finite_differences() {
        let (t, u, v) = (0.3, -0.7, 0.4);
        let x = chart(t, u, v);
        let c = chart_derivatives(t, v);
        let h = 1e-6;
        let fd = [
            (chart(t + h, u, v) - chart(t - h, u, v)) / (2.0 * h),
            (chart(t, u + h, v) - chart(t, u - h, v)) / (2.0 * h),
            (chart(t, u, v + h) - chart(t, u, v - h)) / (2.0 * h),
        ];
        for a in 0..3 {
            let an = x * Quat::new(0.0, c[a][0], c[a][1], c[a][2]);
            assert!(an.max_abs_diff(fd[a]) < 1e-9, "axis {a}");
        }
    }

    #[test]
    fn chart_inverse_round_trips() {
        for &(t, u, v) in &[(0.3, -0.7, 0.4), (1.2, 2.0, 1.1), (-0.4, 0.1, 0.7)] {
            let (t2, u2, v2) = chart_inverse(chart(t, u, v), u);
            assert!((t - t2).abs() < 1e-12 && (u - u2).abs() < 1e-12 && (v - v2).abs() < 1e-12);
        }
    }

    #[test]
    fn fixture_coefficients() {
        let b = 0.25 * 3f64.ln();
        let e = (-2.0 * b).exp();
        assert!((1.0 - S3 * e).abs() < 1e-15);
        assert!((1.0 + S3 * e - 2.0).abs() < 1e-15);
        assert!((lambda_case2(b) - PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn x1_form_ignores_beta() {
        let a = Case2::new(Arc::new(Constant(0.1)), Quat::ONE).unwrap();
        let b = Case2::new(Arc::new(Constant(0.9)), Quat::ONE).unwrap();
        let x = chart(0.2, 0.3, 0.5);
        let fa = a.x_forms(0.2, 0.3, 0.5).unwrap()[0];
        let fb = b.x_forms(0.2, 0.3, 0.5).unwrap()[0];
        assert_eq!(fa, fb);
        assert!(fa.to_quat().max_abs_diff(x * Quat::I * x.conj() * -2.0) < 1e-15);
    }

    #[test]
    fn fixture_q_along_x_curves() {
        let c = fixture();
        let x0 = chart(0.2, 0.3, 0.5);
        for axis in 0..3 {
            let path = integrate_x_curve(&c, x0, x0 * Quat::J * x0.conj(), axis, 1e-3, 300, Stepper::Magnus4).unwrap();
            for (x, q) in path {
                assert!(q.max_abs_diff(x * Quat::J * x.conj()) < 1e-8);
            }
        }
    }

    #[test]
    fn fixture_forms_are_integrable() {
        let c = fixture();
        let r = integrability_residual_at(&c, [0.2, 0.3, 0.5], 1e-3).unwrap();
        assert!(r.iter().all(|&e| e < 1e-9), "{r:?}");
    }

    /// `q = h x j x̄ h̄` solves the system for any unit h.
    #[test]
    fn conjugated_fixture_solves_system() {
        let h = Quat::new(0.3, -0.5, 0.1, 0.8);
        let h = h / h.norm();
        let c = Case2::new(Arc::new(Constant(0.25 * 3f64.ln())), h).unwrap();
        let x = [0.2, 0.3, 0.5];
        let q = |y: [f64; 3]| {
            let cx = chart(y[0], y[1], y[2]);
            h * cx * Quat::J * cx.conj() * h.conj()
        };
        let f = c.forms(x, x).unwrap();
        let eps = 1e-6;
        for a in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[a] += eps;
            xm[a] -= eps;
            let dq = (q(xp) - q(xm)) / (2.0 * eps);
            assert!(dq.max_abs_diff(q(x) * f[a]) < 1e-8, "axis {a}");
        }
    }
}
