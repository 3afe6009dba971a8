//! Extrinsic certification of immersions `f = (p, q)` into S³×S³.
//!
//! Everything here works from point evaluations of `f` alone: tangents and
//! second derivatives come from centered differences and are pulled back to
//! the body frame. Nothing is borrowed from the constructions, so a faulty
//! builder is caught rather than confirmed.

pub mod fixtures;
mod linalg;

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use nalgebra::Matrix4x3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::fmt_f64;
use crate::nk::{euclid_correction, g_tensor, j_apply, p_apply, pullback, NKPoint, NKTangent};
use crate::quat::Quat;

pub use linalg::jacobi_eigen;

const S3: f64 = 1.732_050_807_568_877_2;

/// Tangency defect above which a tangent frame is rejected.
pub const FRAME_TOL: f64 = 1e-3;
/// `‖AB − BA‖` above which angle extraction is refused.
pub const COMMUTATOR_TOL: f64 = 1e-6;
/// A-eigenvalues closer than this are treated as one eigenspace.
const CLUSTER_TOL: f64 = 1e-6;

/// Something that can be evaluated near a site.
///
/// `anchor` is the site a finite-difference stencil is centred on; sampled
/// immersions use it to pick one reference node for the whole stencil.
pub trait Immersion: Sync {
    fn point(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<NKPoint>;

    fn lambda(&self, _anchor: [f64; 3], _x: [f64; 3]) -> Option<f64> {
        None
    }

    /// Exact `[(∂ₐp, ∂ₐq)]`, when known.
    fn derivatives(&self, _x: [f64; 3]) -> Option<[(Quat, Quat); 3]> {
        None
    }

    /// Node spacing for immersions known only on a grid; differences then
    /// use neighbouring nodes instead of off-grid evaluation.
    fn grid_steps(&self) -> Option<[f64; 3]> {
        None
    }

    fn loop_closure(&self) -> Option<f64> {
        None
    }

    fn max_unit_drift(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Step of the centered first differences.
    pub fd_step: f64,
    /// Step of the fourth-order second differences.
    pub hess_step: f64,
    /// Use [`Immersion::derivatives`] when available.
    pub analytic_tangents: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            fd_step: 1e-4,
            hess_step: 1e-3,
            analytic_tangents: false,
        }
    }
}

impl VerifyOptions {
    pub fn validate(&self) -> Result<()> {
        if !(1e-6..=1e-2).contains(&self.fd_step) {
            return Err(Error::Domain(format!("fd step {} outside [1e-6, 1e-2]", self.fd_step)));
        }
        if !(self.hess_step > 0.0 && self.hess_step <= 1e-1) {
            return Err(Error::Domain(format!("second-difference step {} outside (0, 0.1]", self.hess_step)));
        }
        Ok(())
    }
}

/// Pass thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub unit_drift: f64,
    pub lagrangian: f64,
    pub theta1: f64,
    pub angle_sum: f64,
    pub mean_curvature: f64,
    pub cubic_trace: f64,
    pub loop_closure: f64,
    pub xi_alignment: f64,
    pub dp_length: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            unit_drift: 1e-10,
            lagrangian: 1e-6,
            theta1: 1e-6,
            angle_sum: 1e-6,
            mean_curvature: 1e-6,
            cubic_trace: 1e-4,
            loop_closure: 1e-4,
            xi_alignment: 1e-6,
            dp_length: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentSource {
    Analytic,
    Central2,
    Central4,
}

/// g-orthonormal tangent frame at a site.
#[derive(Clone, Copy, Debug)]
pub struct TangentTriple {
    pub base: NKPoint,
    /// Pulled-back coordinate tangents `df(∂ₐ)`.
    pub raw: [NKTangent; 3],
    /// Gram–Schmidt output.
    pub e: [NKTangent; 3],
    /// `e[i] = Σₐ coeff[i][a] raw[a]`.
    pub coeff: [[f64; 3]; 3],
    pub defect: f64,
    pub source: TangentSource,
    pub step: f64,
}

/// Gram–Schmidt in g. Returns the frame and its coefficients in `t`.
pub fn gram_schmidt(t: &[NKTangent; 3]) -> Option<([NKTangent; 3], [[f64; 3]; 3])> {
    let mut e = [NKTangent::ZERO; 3];
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut z = t[i];
        let mut ci = [0.0; 3];
        ci[i] = 1.0;
        for j in 0..i {
            let s = z.g(e[j]);
            z = z - e[j] * s;
            for a in 0..3 {
                ci[a] -= s * c[j][a];
            }
        }
        let n = z.g_norm();
        if !(n > 1e-10 * t[i].g_norm().max(1e-300)) || !n.is_finite() {
            return None;
        }
        e[i] = z * (1.0 / n);
        for a in 0..3 {
            c[i][a] = ci[a] / n;
        }
    }
    Some((e, c))
}

/// `max |g(JEᵢ, Eⱼ)|` over a g-orthonormalization of `t`.
pub fn lagrangian_defect(t: &[NKTangent; 3]) -> Option<f64> {
    let (e, _) = gram_schmidt(t)?;
    let mut m: f64 = 0.0;
    for a in &e {
        for b in &e {
            m = m.max(a.j().g(*b).abs());
        }
    }
    Some(m)
}

const D1_4: [(i64, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const D2_4: [(i64, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 16.0 / 12.0),
    (0, -30.0 / 12.0),
    (1, 16.0 / 12.0),
    (2, -1.0 / 12.0),
];

fn shifted(x: [f64; 3], d: &[(usize, f64)]) -> [f64; 3] {
    let mut y = x;
    for &(a, s) in d {
        y[a] += s;
    }
    y
}

/// Tangent frame at `x` from the immersion's derivatives or differences.
pub fn tangent_frame(f: &dyn Immersion, x: [f64; 3], opts: &VerifyOptions) -> Result<TangentTriple> {
    let base = f.point(x, x)?;
    let (d, source, step): ([(Quat, Quat); 3], TangentSource, f64) = match (opts.analytic_tangents, f.derivatives(x), f.grid_steps()) {
        (true, Some(d), _) => (d, TangentSource::Analytic, 0.0),
        (_, _, Some(h)) => {
            let mut d = [(Quat::ZERO, Quat::ZERO); 3];
            for a in 0..3 {
                for &(o, w) in &D1_4 {
                    let pt = f.point(x, shifted(x, &[(a, o as f64 * h[a])]))?;
                    d[a].0 += pt.p * (w / h[a]);
                    d[a].1 += pt.q * (w / h[a]);
                }
            }
            (d, TangentSource::Central4, h[0].max(h[1]).max(h[2]))
        }
        _ => {
            let h = opts.fd_step;
            let mut d = [(Quat::ZERO, Quat::ZERO); 3];
            for a in 0..3 {
                let fp = f.point(x, shifted(x, &[(a, h)]))?;
                let fm = f.point(x, shifted(x, &[(a, -h)]))?;
                d[a] = ((fp.p - fm.p) / (2.0 * h), (fp.q - fm.q) / (2.0 * h));
            }
            (d, TangentSource::Central2, h)
        }
    };
    let mut raw = [NKTangent::ZERO; 3];
    let mut defect: f64 = 0.0;
    for a in 0..3 {
        let pb = pullback(&base, d[a].0, d[a].1);
        raw[a] = pb.tangent;
        defect = defect.max(pb.defect);
    }
    if defect > FRAME_TOL {
        return Err(Error::FrameQuality { defect, tol: FRAME_TOL });
    }
    let (e, coeff) = gram_schmidt(&raw).ok_or_else(|| Error::Domain(format!("tangents at {x:?} are linearly dependent")))?;
    Ok(TangentTriple {
        base,
        raw,
        e,
        coeff,
        defect,
        source,
        step,
    })
}

/// Second derivatives `[(∂ₐ∂_b p, ∂ₐ∂_b q)]` by fourth-order differences.
pub fn hessian(f: &dyn Immersion, x: [f64; 3], h: [f64; 3]) -> Result<[[(Quat, Quat); 3]; 3]> {
    let mut d = [[(Quat::ZERO, Quat::ZERO); 3]; 3];
    for a in 0..3 {
        for &(o, w) in &D2_4 {
            let pt = f.point(x, shifted(x, &[(a, o as f64 * h[a])]))?;
            let s = w / (h[a] * h[a]);
            d[a][a].0 += pt.p * s;
            d[a][a].1 += pt.q * s;
        }
        for b in a + 1..3 {
            for &(oa, wa) in &D1_4 {
                for &(ob, wb) in &D1_4 {
                    let pt = f.point(x, shifted(x, &[(a, oa as f64 * h[a]), (b, ob as f64 * h[b])]))?;
                    let s = wa * wb / (h[a] * h[b]);
                    d[a][b].0 += pt.p * s;
                    d[a][b].1 += pt.q * s;
                }
            }
            d[b][a] = d[a][b];
        }
    }
    Ok(d)
}

/// Angle functions at a site.
#[derive(Clone, Copy, Debug)]
pub struct AngleReport {
    /// `2θᵢ ∈ [0, 2π)`, ascending.
    pub two_theta: [f64; 3],
    /// Eigenvectors as columns, in the basis of the input frame.
    pub vectors: [[f64; 3]; 3],
    /// Largest asymmetry of A and B before symmetrization.
    pub asymmetry: f64,
    pub commutator: f64,
}

/// Decomposes `PEᵢ = Σⱼ Aⱼᵢ Eⱼ + J(Σⱼ Bⱼᵢ Eⱼ)` and diagonalizes A and B
/// jointly.
pub fn angle_functions(e: &[NKTangent; 3]) -> Result<AngleReport> {
    let mut a = [[0.0; 3]; 3];
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        let pe = p_apply(e[i]);
        for j in 0..3 {
            a[j][i] = pe.g(e[j]);
            b[j][i] = pe.g(j_apply(e[j]));
        }
    }
    let mut asym: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            asym = asym.max((a[i][j] - a[j][i]).abs()).max((b[i][j] - b[j][i]).abs());
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let (sa, sb) = ((a[i][j] + a[j][i]) / 2.0, (b[i][j] + b[j][i]) / 2.0);
            a[i][j] = sa;
            a[j][i] = sa;
            b[i][j] = sb;
            b[j][i] = sb;
        }
    }
    let ab = linalg::mul(&a, &b);
    let ba = linalg::mul(&b, &a);
    let mut comm: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            comm = comm.max((ab[i][j] - ba[i][j]).abs());
        }
    }
    if comm > COMMUTATOR_TOL {
        return Err(Error::StructureViolation {
            commutator: comm,
            tol: COMMUTATOR_TOL,
        });
    }

    let (mut lam, mut v) = jacobi_eigen(&a);
    linalg::sort_columns(&mut lam, &mut v);
    // refine degenerate A-eigenspaces with B
    let mut start = 0;
    while start < 3 {
        let mut end = start + 1;
        while end < 3 && (lam[end] - lam[end - 1]).abs() < CLUSTER_TOL {
            end += 1;
        }
        if end - start > 1 {
            let n = end - start;
            let mut sub = [[0.0; 3]; 3];
            for r in 0..n {
                for c in 0..n {
                    sub[r][c] = linalg::quad(&b, &linalg::col(&v, start + r), &linalg::col(&v, start + c));
                }
            }
            for r in n..3 {
                sub[r][r] = 0.0;
            }
            let (_, w) = jacobi_eigen(&sub);
            let old = v;
            for c in 0..n {
                for row in 0..3 {
                    v[row][start + c] = (0..n).map(|k| old[row][start + k] * w[k][c]).sum();
                }
            }
        }
        start = end;
    }

    let mut items: Vec<(f64, [f64; 3])> = (0..3)
        .map(|k| {
            let c = linalg::col(&v, k);
            let t = linalg::quad(&b, &c, &c).atan2(linalg::quad(&a, &c, &c)).rem_euclid(TAU);
            (t, c)
        })
        .collect();
    items.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut vectors = [[0.0; 3]; 3];
    let mut two_theta = [0.0; 3];
    for (k, (t, c)) in items.iter().enumerate() {
        two_theta[k] = *t;
        for r in 0..3 {
            vectors[r][k] = c[r];
        }
    }
    Ok(AngleReport {
        two_theta,
        vectors,
        asymmetry: asym,
        commutator: comm,
    })
}

/// Reduces an angle to `(−π, π]`.
pub fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Cubic form `h_ij^k = g(h(Eᵢ,Eⱼ), JEₖ)` of a frame given by body
/// tangents and coordinate coefficients.
fn cubic_form(base: &NKPoint, frame: &[NKTangent; 3], coeff: &[[f64; 3]; 3], d2: &[[(Quat, Quat); 3]; 3]) -> [[[f64; 3]; 3]; 3] {
    let mut h = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let mut dp = Quat::ZERO;
            let mut dq = Quat::ZERO;
            for a in 0..3 {
                for b in 0..3 {
                    let s = coeff[i][a] * coeff[j][b];
                    dp += d2[a][b].0 * s;
                    dq += d2[a][b].1 * s;
                }
            }
            let amb = NKTangent::new((base.p.conj() * dp).im(), (base.q.conj() * dq).im());
            let sff = amb - euclid_correction(frame[i], frame[j]);
            for k in 0..3 {
                let x = sff.g(frame[k].j());
                h[i][j][k] = x;
                h[j][i][k] = x;
            }
        }
    }
    h
}

/// Diagnostics from the cubic-form relations in an adapted frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Relations {
    /// `max(|h²₁₁|, |h³₁₁|)`.
    pub h11: f64,
    /// `|E₁(Λ) − h³₁₃|, |E₂(Λ) − h³₂₃|, |E₃(Λ) + h³₂₂|`.
    pub lambda_derivatives: [f64; 3],
    /// Second fundamental form of p in the ξ direction against
    /// `σ(E₂,E₂) = h³₁₃`, `σ(E₂,E₃) = cosΛ sinΛ/√3 − h³₁₂`, `σ(E₃,E₃) = −h³₁₃`.
    pub sigma: [f64; 3],
    /// `h³₁₃ ≈ 0`, so the sign normalization of the frame is ambiguous.
    pub gauge_ambiguous: bool,
}

impl Relations {
    pub fn max(&self) -> f64 {
        let l = self.lambda_derivatives.iter().chain(&self.sigma).fold(0.0f64, |m, x| m.max(*x));
        l.max(self.h11)
    }
}

/// Results at one site.
#[derive(Clone, Debug, Default)]
pub struct SiteReport {
    pub x: [f64; 3],
    pub unit_drift: f64,
    pub frame_defect: f64,
    pub lagrangian: f64,
    pub two_theta: [f64; 3],
    pub theta1_deviation: f64,
    pub angle_sum_deviation: f64,
    pub asymmetry: f64,
    /// `|dp(E₁)|` on the θ₁ direction.
    pub rank_p: f64,
    pub dp_length: Option<f64>,
    pub cubic: [[[f64; 3]; 3]; 3],
    pub cubic_trace: f64,
    pub cubic_symmetry: f64,
    pub mean_curvature: Option<f64>,
    pub xi_alignment: Option<f64>,
    pub relations: Option<Relations>,
    pub error: Option<String>,
}

fn p_normal(p: Quat, w1: Quat, w2: Quat) -> Quat {
    let rows = [p.to_array(), w1.to_array(), w2.to_array()];
    let minor = |skip: usize| {
        let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
        let m = |r: usize, c: usize| rows[r][cols[c]];
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    };
    let n = Quat::new(minor(0), -minor(1), minor(2), -minor(3));
    n / n.norm()
}

/// Runs every per-site check at `x`.
pub fn check_site(f: &dyn Immersion, x: [f64; 3], opts: &VerifyOptions) -> SiteReport {
    let mut r = SiteReport { x, ..Default::default() };
    if let Err(e) = fill_site(f, x, opts, &mut r) {
        r.error = Some(e.to_string());
    }
    r
}

fn fill_site(f: &dyn Immersion, x: [f64; 3], opts: &VerifyOptions, r: &mut SiteReport) -> Result<()> {
    // pessimistic until computed
    r.lagrangian = f64::INFINITY;
    r.theta1_deviation = f64::INFINITY;
    r.angle_sum_deviation = f64::INFINITY;
    r.cubic_trace = f64::INFINITY;

    let tf = tangent_frame(f, x, opts)?;
    let base = tf.base;
    r.unit_drift = (base.p.norm() - 1.0).abs().max((base.q.norm() - 1.0).abs());
    r.frame_defect = tf.defect;
    r.lagrangian = lagrangian_defect(&tf.raw).unwrap_or(f64::INFINITY);

    let ang = angle_functions(&tf.e)?;
    r.asymmetry = ang.asymmetry;
    r.two_theta = ang.two_theta;

    // eigenframe: body tangents and coordinate coefficients
    let mut frame = [NKTangent::ZERO; 3];
    let mut coeff = [[0.0; 3]; 3];
    for k in 0..3 {
        for j in 0..3 {
            frame[k] = frame[k] + tf.e[j] * ang.vectors[j][k];
            for a in 0..3 {
                coeff[k][a] += ang.vectors[j][k] * tf.coeff[j][a];
            }
        }
    }
    let dp_len: Vec<f64> = frame.iter().map(|z| z.a.norm()).collect();
    let slot = (0..3).fold(0, |best, k| if dp_len[k] < dp_len[best] { k } else { best });
    r.rank_p = dp_len[slot];
    r.theta1_deviation = wrap(ang.two_theta[slot] - 2.0 * PI / 3.0).abs() / 2.0;
    r.angle_sum_deviation = wrap(ang.two_theta.iter().sum()).abs() / 2.0;

    let lambda = f.lambda(x, x);
    if let Some(l) = lambda {
        let s2 = l.sin().powi(2);
        r.dp_length = Some((0..3).filter(|&k| k != slot).map(|k| (dp_len[k].powi(2) - s2).abs()).fold(0.0, f64::max));
    }

    let h2 = match f.grid_steps() {
        Some(h) => h,
        None => [opts.hess_step; 3],
    };
    let d2 = hessian(f, x, h2)?;
    let h = cubic_form(&base, &frame, &coeff, &d2);
    r.cubic = h;
    r.cubic_trace = (0..3).map(|k| (h[0][0][k] + h[1][1][k] + h[2][2][k]).abs()).fold(0.0, f64::max);
    let mut sym: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                sym = sym.max((h[i][j][k] - h[i][k][j]).abs()).max((h[i][j][k] - h[k][j][i]).abs());
            }
        }
    }
    r.cubic_symmetry = sym;

    // the projected surface p(M)
    let ambient_dp: Vec<Quat> = tf.raw.iter().map(|t| base.p * t.a).collect();
    let m = Matrix4x3::from_fn(|row, c| ambient_dp[c].to_array()[row]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Domain("svd of dp failed".into()))?;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let (s1, s2) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    if s1 < 1e-8 || s2 < 1e-8 * s1.max(1.0) {
        return Ok(());
    }
    let dirs: Vec<[f64; 3]> = order[..2].iter().map(|&k| [vt[(k, 0)], vt[(k, 1)], vt[(k, 2)]]).collect();
    let push = |c: &[f64; 3]| (0..3).fold(Quat::ZERO, |s, a| s + ambient_dp[a] * c[a]);
    let second = |c1: &[f64; 3], c2: &[f64; 3]| {
        let mut s = Quat::ZERO;
        for a in 0..3 {
            for b in 0..3 {
                s += d2[a][b].0 * (c1[a] * c2[b]);
            }
        }
        s
    };
    let (w1, w2) = (push(&dirs[0]), push(&dirs[1]));
    let n = p_normal(base.p, w1, w2);
    let (g11, g12, g22) = (w1.dot(w1), w1.dot(w2), w2.dot(w2));
    let (s11, s12, s22) = (
        second(&dirs[0], &dirs[0]).dot(n),
        second(&dirs[0], &dirs[1]).dot(n),
        second(&dirs[1], &dirs[1]).dot(n),
    );
    let det = g11 * g22 - g12 * g12;
    r.mean_curvature = Some(((g22 * s11 - 2.0 * g12 * s12 + g11 * s22) / (2.0 * det)).abs());

    let xi = |e1: NKTangent| -> Quat { base.p * (e1 * (1.0 / S3) - e1.j()).a };
    let x4 = xi(frame[slot]);
    r.xi_alignment = Some((x4 - n).norm().min((x4 + n).norm()));

    // relations in the adapted frame
    let Some(lam) = lambda else { return Ok(()) };
    if !(lam > 0.0 && lam < PI / 2.0) {
        return Ok(());
    }
    let others: Vec<usize> = (0..3).filter(|&k| k != slot).collect();
    let lam_of = |k: usize| ((ang.two_theta[k] - 2.0 * PI / 3.0) / 2.0).rem_euclid(PI);
    let Some(&i2) = others.iter().find(|&&k| lam_of(k) > 0.0 && lam_of(k) < PI / 2.0) else {
        return Ok(());
    };
    let i3 = if others[0] == i2 { others[1] } else { others[0] };
    let mut fr = [frame[slot], frame[i2], frame[i3]];
    let mut co = [coeff[slot], coeff[i2], coeff[i3]];
    let flip = |z: &mut NKTangent, c: &mut [f64; 3]| {
        *z = -*z;
        for v in c.iter_mut() {
            *v = -*v;
        }
    };
    if S3 * g_tensor(fr[0], fr[1]).j().g(fr[2]) < 0.0 {
        let (z, c) = (&mut fr[2], &mut co[2]);
        flip(z, c);
    }
    let mut hc = cubic_form(&base, &fr, &co, &d2);
    if hc[0][2][2] > 0.0 {
        for k in [0, 2] {
            let (z, c) = (&mut fr[k], &mut co[k]);
            flip(z, c);
        }
        hc = cubic_form(&base, &fr, &co, &d2);
    }
    let step = match f.grid_steps() {
        Some(h) => h,
        None => [opts.fd_step; 3],
    };
    let mut grad = [0.0; 3];
    for a in 0..3 {
        let lp = f.lambda(x, shifted(x, &[(a, step[a])]));
        let lm = f.lambda(x, shifted(x, &[(a, -step[a])]));
        match (lp, lm) {
            (Some(p), Some(m)) => grad[a] = (p - m) / (2.0 * step[a]),
            _ => return Ok(()),
        }
    }
    let dl = |c: &[f64; 3]| c[0] * grad[0] + c[1] * grad[1] + c[2] * grad[2];
    let x4 = xi(fr[0]);
    let sig = |i: usize, j: usize| second(&co[i], &co[j]).dot(x4);
    let (h13, h12, h22, h23) = (hc[0][2][2], hc[0][1][2], hc[1][1][2], hc[1][2][2]);
    let (sl, cl) = lam.sin_cos();
    r.relations = Some(Relations {
        h11: hc[0][0][1].abs().max(hc[0][0][2].abs()),
        lambda_derivatives: [(dl(&co[0]) - h13).abs(), (dl(&co[1]) - h23).abs(), (dl(&co[2]) + h22).abs()],
        sigma: [(sig(1, 1) - h13).abs(), (sig(1, 2) - (cl * sl / S3 - h12)).abs(), (sig(2, 2) + h13).abs()],
        gauge_ambiguous: h13.abs() < 1e-6,
    });
    Ok(())
}

/// Aggregated verification results.
#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub sites: usize,
    pub max_lagrangian_residual: f64,
    pub max_unit_drift: f64,
    pub theta1_deviation: f64,
    pub angle_sum_deviation: f64,
    pub mean_curvature_p: Option<f64>,
    pub cubic_trace_residual: f64,
    pub loop_closure: Option<f64>,
    pub xi_normal_alignment: Option<f64>,
    pub dp_length_residual: Option<f64>,
    pub cubic_symmetry: f64,
    pub rank_p: f64,
    pub max_asymmetry: f64,
    pub max_frame_defect: f64,
    pub relations: Option<Relations>,
    /// `(site, message)` for sites whose checks could not complete.
    pub site_errors: Vec<([f64; 3], String)>,
    pub per_site: Vec<SiteReport>,
}

/// Max that lets NaN win, so that a broken site can never look good.
fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn worst_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(worst(x, y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Checks every site in parallel and merges in site order.
pub fn verify(f: &dyn Immersion, sites: &[[f64; 3]], opts: &VerifyOptions) -> Result<VerifyReport> {
    opts.validate()?;
    if sites.is_empty() {
        return Err(Error::NoAdmissibleSites("no sites to verify".into()));
    }
    let per_site: Vec<SiteReport> = sites.par_iter().map(|&x| check_site(f, x, opts)).collect();
    let mut r = VerifyReport {
        sites: sites.len(),
        loop_closure: f.loop_closure(),
        ..Default::default()
    };
    r.max_unit_drift = f.max_unit_drift().unwrap_or(0.0);
    for s in &per_site {
        r.max_lagrangian_residual = worst(r.max_lagrangian_residual, s.lagrangian);
        r.max_unit_drift = worst(r.max_unit_drift, s.unit_drift);
        r.theta1_deviation = worst(r.theta1_deviation, s.theta1_deviation);
        r.angle_sum_deviation = worst(r.angle_sum_deviation, s.angle_sum_deviation);
        r.mean_curvature_p = worst_opt(r.mean_curvature_p, s.mean_curvature);
        r.cubic_trace_residual = worst(r.cubic_trace_residual, s.cubic_trace);
        r.xi_normal_alignment = worst_opt(r.xi_normal_alignment, s.xi_alignment);
        r.dp_length_residual = worst_opt(r.dp_length_residual, s.dp_length);
        r.cubic_symmetry = worst(r.cubic_symmetry, s.cubic_symmetry);
        r.rank_p = worst(r.rank_p, s.rank_p);
        r.max_asymmetry = worst(r.max_asymmetry, s.asymmetry);
        r.max_frame_defect = worst(r.max_frame_defect, s.frame_defect);
        if let Some(rel) = s.relations {
            let cur = r.relations.get_or_insert_with(Relations::default);
            cur.h11 = cur.h11.max(rel.h11);
            for k in 0..3 {
                cur.lambda_derivatives[k] = cur.lambda_derivatives[k].max(rel.lambda_derivatives[k]);
                cur.sigma[k] = cur.sigma[k].max(rel.sigma[k]);
            }
            cur.gauge_ambiguous |= rel.gauge_ambiguous;
        }
        if let Some(e) = &s.error {
            r.site_errors.push((s.x, e.clone()));
        }
    }
    r.per_site = per_site;
    Ok(r)
}

impl VerifyReport {
    /// Names of the checks that fail `t`; empty when everything passes.
    pub fn failures(&self, t: &Thresholds) -> Vec<&'static str> {
        let bad = |v: f64, tol: f64| !(v < tol);
        let mut out = Vec::new();
        if bad(self.max_lagrangian_residual, t.lagrangian) {
            out.push("max_lagrangian_residual");
        }
        if bad(self.max_unit_drift, t.unit_drift) {
            out.push("max_unit_drift");
        }
        if bad(self.theta1_deviation, t.theta1) {
            out.push("theta1_deviation");
        }
        if bad(self.angle_sum_deviation, t.angle_sum) {
            out.push("angle_sum_deviation");
        }
        if self.mean_curvature_p.is_some_and(|v| bad(v, t.mean_curvature)) {
            out.push("mean_curvature_p");
        }
        if bad(self.cubic_trace_residual, t.cubic_trace) {
            out.push("cubic_trace_residual");
        }
        if self.loop_closure.is_some_and(|v| bad(v, t.loop_closure)) {
            out.push("loop_closure");
        }
        if self.xi_normal_alignment.is_some_and(|v| bad(v, t.xi_alignment)) {
            out.push("xi_normal_alignment");
        }
        if self.dp_length_residual.is_some_and(|v| bad(v, t.dp_length)) {
            out.push("dp_length_residual");
        }
        if !self.site_errors.is_empty() && !out.contains(&"theta1_deviation") {
            out.push("site_errors");
        }
        out
    }

    pub fn passes(&self, t: &Thresholds) -> bool {
        self.failures(t).is_empty()
    }

    /// The eight `name=value` lines of the report format.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "skipped".to_string(), fmt_f64);
        let mut s = String::new();
        let lines = [
            ("max_lagrangian_residual", fmt_f64(self.max_lagrangian_residual)),
            ("max_unit_drift", fmt_f64(self.max_unit_drift)),
            ("theta1_deviation", fmt_f64(self.theta1_deviation)),
            ("angle_sum_deviation", fmt_f64(self.angle_sum_deviation)),
            ("mean_curvature_p", opt(self.mean_curvature_p)),
            ("cubic_trace_residual", fmt_f64(self.cubic_trace_residual)),
            ("loop_closure", opt(self.loop_closure)),
            ("xi_normal_alignment", opt(self.xi_normal_alignment)),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// An immersion known only at the nodes of a `(t, u, v)` grid.
pub struct SampledImmersion {
    pub start: [f64; 3],
    pub steps: [f64; 3],
    pub shape: [usize; 3],
    /// t fastest; `None` at masked nodes.
    pub points: Vec<Option<(NKPoint, f64)>>,
}

impl SampledImmersion {
    fn node(&self, x: [f64; 3]) -> Option<usize> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let r = (x[a] - self.start[a]) / self.steps[a];
            let k = r.round();
            if (r - k).abs() > 1e-6 || k < 0.0 || k >= self.shape[a] as f64 {
                return None;
            }
            idx[a] = k as usize;
        }
        Some((idx[2] * self.shape[1] + idx[1]) * self.shape[0] + idx[0])
    }

    /// Present nodes whose fourth-order stencils are complete.
    pub fn verifiable_sites(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        for k in 0..self.points.len() {
            let i = [
                k % self.shape[0],
                (k / self.shape[0]) % self.shape[1],
                k / (self.shape[0] * self.shape[1]),
            ];
            let x = [0, 1, 2].map(|a| self.start[a] + i[a] as f64 * self.steps[a]);
            let complete = (-2i64..=2).all(|da| {
                (-2i64..=2).all(|db| {
                    [(0usize, 1usize), (0, 2), (1, 2)].iter().all(|&(a, b)| {
                        let y = shifted(x, &[(a, da as f64 * self.steps[a]), (b, db as f64 * self.steps[b])]);
                        self.node(y).is_some_and(|n| self.points[n].is_some())
                    })
                })
            });
            if complete {
                out.push(x);
            }
        }
        out
    }
}

impl Immersion for SampledImmersion {
    fn point(&self, _anchor: [f64; 3], x: [f64; 3]) -> Result<NKPoint> {
        self.node(x)
            .and_then(|n| self.points[n])
            .map(|(p, _)| p)
            .ok_or_else(|| Error::Domain(format!("no sample at {x:?}")))
    }

    fn lambda(&self, _anchor: [f64; 3], x: [f64; 3]) -> Option<f64> {
        self.node(x).and_then(|n| self.points[n]).map(|(_, l)| l)
    }

    fn grid_steps(&self) -> Option<[f64; 3]> {
        Some(self.steps)
    }

    fn max_unit_drift(&self) -> Option<f64> {
        Some(
            self.points
                .iter()
                .flatten()
                .fold(0.0f64, |m, (pt, _)| m.max((pt.p.norm() - 1.0).abs()).max((pt.q.norm() - 1.0).abs())),
        )
    }
}

/// Multiset distance of two angle triples (mod 2π), after sorting.
pub fn angle_multiset_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let norm = |mut v: [f64; 3]| {
        for x in v.iter_mut() {
            *x = x.rem_euclid(TAU);
        }
        v.sort_by(|x, y| x.total_cmp(y));
        v
    };
    let (a, b) = (norm(a), norm(b));
    // try the three cyclic alignments to survive wrap-around at 0
    (0..3)
        .map(|s| (0..3).map(|k| wrap(a[k] - b[(k + s) % 3]).abs()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests;
