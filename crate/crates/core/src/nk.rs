//! The nearly Kähler structure on S³×S³ in body-frame coordinates.
//!
//! A tangent vector `Z = (pα, qβ)` at `(p, q)` is stored as the pair `(α|β)`
//! of imaginary quaternions. In this representation the metric `g`, the
//! almost complex structure `J`, the product structures `P`, `Q` and the
//! tensor `G = ∇̃J` do not depend on the base point.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::quat::{ImQuat, Quat};

const UNIT_TOL: f64 = 1e-12;

/// A point `(p, q)` of S³×S³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NKPoint {
    pub p: Quat,
    pub q: Quat,
}

/// Body-frame tangent vector `(α|β)`, representing `(pα, qβ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NKTangent {
    pub a: ImQuat,
    pub b: ImQuat,
}

/// Result of [`pullback`]: the tangent part plus the discarded radial parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pullback {
    pub tangent: NKTangent,
    /// `max(|Re(p⁻¹U)|, |Re(q⁻¹V)|)`.
    pub defect: f64,
}

impl NKPoint {
    pub fn new(p: Quat, q: Quat) -> Result<Self> {
        let pt = NKPoint { p, q };
        pt.check()?;
        Ok(pt)
    }

    pub fn check(&self) -> Result<()> {
        if !self.p.is_unit(UNIT_TOL) || !self.q.is_unit(UNIT_TOL) {
            return Err(Error::Domain(format!(
                "base point not on S3xS3: |p| = {}, |q| = {}",
                self.p.norm(),
                self.q.norm()
            )));
        }
        Ok(())
    }
}

impl NKTangent {
    pub const ZERO: NKTangent = NKTangent {
        a: ImQuat::ZERO,
        b: ImQuat::ZERO,
    };

    pub const fn new(a: ImQuat, b: ImQuat) -> Self {
        NKTangent { a, b }
    }

    pub fn max_abs(self) -> f64 {
        self.a.max_abs().max(self.b.max_abs())
    }

    pub fn g(self, other: NKTangent) -> f64 {
        g_metric(self, other)
    }

    pub fn g_norm(self) -> f64 {
        g_metric(self, self).max(0.0).sqrt()
    }

    pub fn j(self) -> NKTangent {
        j_apply(self)
    }

    pub fn p(self) -> NKTangent {
        p_apply(self)
    }

    pub fn q(self) -> NKTangent {
        q_apply(self)
    }
}

impl Add for NKTangent {
    type Output = NKTangent;
    fn add(self, o: NKTangent) -> NKTangent {
        NKTangent::new(self.a + o.a, self.b + o.b)
    }
}

impl Sub for NKTangent {
    type Output = NKTangent;
    fn sub(self, o: NKTangent) -> NKTangent {
        NKTangent::new(self.a - o.a, self.b - o.b)
    }
}

impl Neg for NKTangent {
    type Output = NKTangent;
    fn neg(self) -> NKTangent {
        NKTangent::new(-self.a, -self.b)
    }
}

impl Mul<f64> for NKTangent {
    type Output = NKTangent;
    fn mul(self, s: f64) -> NKTangent {
        NKTangent::new(self.a * s, self.b * s)
    }
}

impl Mul<NKTangent> for f64 {
    type Output = NKTangent;
    fn mul(self, z: NKTangent) -> NKTangent {
        z * self
    }
}

/// The nearly Kähler metric.
pub fn g_metric(z: NKTangent, w: NKTangent) -> f64 {
    4.0 / 3.0 * (z.a.dot(w.a) + z.b.dot(w.b)) - 2.0 / 3.0 * (z.a.dot(w.b) + w.a.dot(z.b))
}

/// `(α|β) ↦ (2β−α | β−2α)/√3`.
pub fn j_apply(z: NKTangent) -> NKTangent {
    let s = 1.0 / 3f64.sqrt();
    NKTangent::new((z.b * 2.0 - z.a) * s, (z.b - z.a * 2.0) * s)
}

/// Almost product structure: the swap `(α|β) ↦ (β|α)`.
pub fn p_apply(z: NKTangent) -> NKTangent {
    NKTangent::new(z.b, z.a)
}

/// Usual product structure `(α|β) ↦ (−α|β)`.
pub fn q_apply(z: NKTangent) -> NKTangent {
    NKTangent::new(-z.a, z.b)
}

/// `G = ∇̃J` in closed form.
pub fn g_tensor(x: NKTangent, y: NKTangent) -> NKTangent {
    let (al, be, ga, de) = (x.a, x.b, y.a, y.b);
    let k = 2.0 / (3.0 * 3f64.sqrt());
    let bg = be.cross(ga);
    let ad = al.cross(de);
    let ag = al.cross(ga);
    let bd = be.cross(de);
    NKTangent::new((bg + ad + ag - bd * 2.0) * k, (-ad - bg + ag * 2.0 - bd) * k)
}

/// Ambient vectors `(U, V) = (pα, qβ)`.
pub fn embed(at: &NKPoint, z: NKTangent) -> Result<(Quat, Quat)> {
    at.check()?;
    Ok((at.p * z.a, at.q * z.b))
}

/// Body-frame components of an ambient pair, discarding radial parts.
///
/// Works for any nonzero `p`, `q`; for unit base points `p⁻¹ = p̄`.
pub fn pullback(at: &NKPoint, u: Quat, v: Quat) -> Pullback {
    let pu = at.p.conj() * u / at.p.norm_sq();
    let qv = at.q.conj() * v / at.q.norm_sq();
    Pullback {
        tangent: NKTangent::new(pu.im(), qv.im()),
        defect: pu.re().abs().max(qv.re().abs()),
    }
}

/// `½(JG(X,PY) + JG(Y,PX))`, the difference `∇ᴱ_X Y − ∇̃_X Y`.
pub fn euclid_correction(x: NKTangent, y: NKTangent) -> NKTangent {
    (j_apply(g_tensor(x, p_apply(y))) + j_apply(g_tensor(y, p_apply(x)))) * 0.5
}

/// Frame field `Ẽᵢ` (index 0..3) in the body frame: `(i|0), (j|0), (−k|0)`.
pub fn frame_e(i: usize) -> NKTangent {
    NKTangent::new(frame_unit(i), ImQuat::ZERO)
}

/// Frame field `F̃ᵢ`: `(0|i), (0|j), (0|−k)`.
pub fn frame_f(i: usize) -> NKTangent {
    NKTangent::new(ImQuat::ZERO, frame_unit(i))
}

fn frame_unit(i: usize) -> ImQuat {
    match i {
        0 => ImQuat::I,
        1 => ImQuat::J,
        2 => -ImQuat::K,
        _ => panic!("frame index {i} out of range"),
    }
}

/// Which pair of frame families a `∇̃J` table entry refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FramePair {
    EE,
    EF,
    FE,
    FF,
}

/// Levi-Civita symbol on indices 0..3.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Tabulated value of `(∇̃_{Aᵢ}J)Bⱼ` for frame fields, as listed in the
/// classical table. Used only as a cross-check of [`g_tensor`]; its FF entry
/// has the opposite sign from the closed form.
pub fn nabla_j_table(pair: FramePair, i: usize, j: usize) -> NKTangent {
    let c = -2.0 / (3.0 * 3f64.sqrt());
    let mut out = NKTangent::ZERO;
    for k in 0..3 {
        let eps = levi_civita(i, j, k);
        if eps == 0.0 {
            continue;
        }
        let (e, f) = (frame_e(k), frame_f(k));
        let entry = match pair {
            FramePair::EE => e + f * 2.0,
            FramePair::EF | FramePair::FE => e - f,
            FramePair::FF => e * 2.0 + f,
        };
        out = out + entry * (c * eps);
    }
    out
}

/// `G((0|α),(0|β)) = −(2/(3√3))(2α×β | α×β)`.
pub fn g_second_factor(alpha: ImQuat, beta: ImQuat) -> NKTangent {
    let c = alpha.cross(beta);
    NKTangent::new(c * 2.0, c) * (-2.0 / (3.0 * 3f64.sqrt()))
}

/// Frame pair arguments for a table entry.
pub fn frame_pair_args(pair: FramePair, i: usize, j: usize) -> (NKTangent, NKTangent) {
    match pair {
        FramePair::EE => (frame_e(i), frame_e(j)),
        FramePair::EF => (frame_e(i), frame_f(j)),
        FramePair::FE => (frame_f(i), frame_e(j)),
        FramePair::FF => (frame_f(i), frame_f(j)),
    }
}

/// Largest violations of the structure identities over seeded random samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructureReport {
    pub samples: usize,
    pub j_squared: f64,
    pub hermitian: f64,
    pub p_involutive: f64,
    pub pj_anticommute: f64,
    pub p_compatible: f64,
    pub p_symmetric: f64,
    pub q_from_p: f64,
    pub g_skew: f64,
    pub g_diagonal: f64,
    pub g_j_linear: f64,
    pub g_cyclic: f64,
    pub embed_roundtrip: f64,
}

impl StructureReport {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("j_squared", self.j_squared),
            ("hermitian", self.hermitian),
            ("p_involutive", self.p_involutive),
            ("pj_anticommute", self.pj_anticommute),
            ("p_compatible", self.p_compatible),
            ("p_symmetric", self.p_symmetric),
            ("q_from_p", self.q_from_p),
            ("g_skew", self.g_skew),
            ("g_diagonal", self.g_diagonal),
            ("g_j_linear", self.g_j_linear),
            ("g_cyclic", self.g_cyclic),
            ("embed_roundtrip", self.embed_roundtrip),
        ]
    }

    pub fn max_violation(&self) -> f64 {
        self.entries().iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

/// Evaluates every structure identity on `samples` random tangents drawn from
/// a ChaCha stream seeded with `seed`. Components are uniform in [−1, 1].
pub fn structure_check(samples: usize, seed: u64) -> StructureReport {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let im = |rng: &mut ChaCha8Rng| ImQuat::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut r = StructureReport {
        samples,
        ..Default::default()
    };
    let s3 = 3f64.sqrt();
    for _ in 0..samples {
        let x = NKTangent::new(im(&mut rng), im(&mut rng));
        let y = NKTangent::new(im(&mut rng), im(&mut rng));
        let z = NKTangent::new(im(&mut rng), im(&mut rng));
        let w = Quat::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let w2 = Quat::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );

        r.j_squared = r.j_squared.max((j_apply(j_apply(x)) + x).max_abs());
        r.hermitian = r.hermitian.max((g_metric(j_apply(x), j_apply(y)) - g_metric(x, y)).abs());
        r.p_involutive = r.p_involutive.max((p_apply(p_apply(x)) - x).max_abs());
        r.pj_anticommute = r.pj_anticommute.max((p_apply(j_apply(x)) + j_apply(p_apply(x))).max_abs());
        r.p_compatible = r.p_compatible.max((g_metric(p_apply(x), p_apply(y)) - g_metric(x, y)).abs());
        r.p_symmetric = r.p_symmetric.max((g_metric(p_apply(x), y) - g_metric(x, p_apply(y))).abs());
        let q_alt = (p_apply(j_apply(x)) * 2.0 - j_apply(x)) * (1.0 / s3);
        r.q_from_p = r.q_from_p.max((q_apply(x) - q_alt).max_abs());
        r.g_skew = r.g_skew.max((g_tensor(x, y) + g_tensor(y, x)).max_abs());
        r.g_diagonal = r.g_diagonal.max(g_tensor(x, x).max_abs());
        r.g_j_linear = r.g_j_linear.max((g_tensor(x, j_apply(y)) + j_apply(g_tensor(x, y))).max_abs());
        r.g_cyclic = r.g_cyclic.max((g_metric(g_tensor(x, y), z) + g_metric(g_tensor(x, z), y)).abs());

        if let (Ok(p), Ok(q)) = (w.normalize(), w2.normalize()) {
            let at = NKPoint { p, q };
            if let Ok((u, v)) = embed(&at, x) {
                let back = pullback(&at, u, v);
                r.embed_roundtrip = r
                    .embed_roundtrip
                    .max((back.tangent - x).max_abs())
                    .max(back.defect)
                    .max(u.dot(p).abs())
                    .max(v.dot(q).abs());
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(a: ImQuat, b: ImQuat) -> NKTangent {
        NKTangent::new(a, b)
    }

    const I: ImQuat = ImQuat::I;
    const J: ImQuat = ImQuat::J;
    const K: ImQuat = ImQuat::K;
    const O: ImQuat = ImQuat::ZERO;

    fn close(a: NKTangent, b: NKTangent, tol: f64) -> bool {
        (a - b).max_abs() < tol
    }

    #[test]
    fn metric_examples() {
        assert!((g_metric(t(I, O), t(I, O)) - 4.0 / 3.0).abs() < 1e-15);
        assert!((g_metric(t(I, O), t(O, I)) + 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g_metric(t(I, J), NKTangent::ZERO), 0.0);
    }

    #[test]
    fn j_examples() {
        let s = 1.0 / 3f64.sqrt();
        assert!(close(j_apply(t(I, O)), t(-I * s, -I * (2.0 * s)), 1e-15));
        assert_eq!(j_apply(NKTangent::ZERO), NKTangent::ZERO);
    }

    #[test]
    fn p_and_q_examples() {
        assert_eq!(p_apply(t(I, O)), t(O, I));
        assert_eq!(p_apply(t(I, J)), t(J, I));
        assert_eq!(q_apply(t(I, O)), t(-I, O));
        assert_eq!(q_apply(q_apply(t(I, J))), t(I, J));
    }

    #[test]
    fn g_tensor_examples() {
        let k = 2.0 / (3.0 * 3f64.sqrt());
        assert!(close(g_tensor(t(I, O), t(J, O)), t(K * k, K * (2.0 * k)), 1e-15));
        assert!(close(g_tensor(t(O, I), t(O, J)), t(K * (-2.0 * k), K * (-k)), 1e-15));
        let x = t(I + J * 0.3, K - I);
        assert!(g_tensor(x, x).max_abs() < 1e-15);
    }

    #[test]
    fn embed_and_pullback_examples() {
        let one = NKPoint::new(Quat::ONE, Quat::ONE).unwrap();
        let (u, v) = embed(&one, t(I, O)).unwrap();
        assert_eq!(u, Quat::I);
        assert_eq!(v, Quat::ZERO);

        let at = NKPoint::new(Quat::J, Quat::ONE).unwrap();
        let (u, v) = embed(&at, t(I, O)).unwrap();
        assert_eq!(u, -Quat::K);
        assert_eq!(v, Quat::ZERO);

        let back = pullback(&at, -Quat::K, Quat::ZERO);
        assert!(close(back.tangent, t(I, O), 1e-15));
        assert_eq!(back.defect, 0.0);

        let radial = pullback(&one, Quat::ONE, Quat::ZERO);
        assert_eq!(radial.tangent, NKTangent::ZERO);
        assert_eq!(radial.defect, 1.0);
    }

    #[test]
    fn embed_rejects_non_unit_point() {
        let bad = NKPoint {
            p: Quat::new(2.0, 0.0, 0.0, 0.0),
            q: Quat::ONE,
        };
        assert!(matches!(embed(&bad, t(I, O)), Err(Error::Domain(_))));
        assert!(NKPoint::new(Quat::ZERO, Quat::ONE).is_err());
    }

    #[test]
    fn euclid_correction_examples() {
        assert!(euclid_correction(t(I, O), t(I, O)).max_abs() < 1e-15);
        assert!(euclid_correction(t(I, O), t(J, O)).max_abs() < 1e-15);
        let got = euclid_correction(t(I, O), t(O, J));
        assert!(close(got, t(K * (1.0 / 3.0), K * (-1.0 / 3.0)), 1e-15));
    }

    #[test]
    fn frame_metric() {
        for i in 0..3 {
            for j in 0..3 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((g_metric(frame_e(i), frame_e(j)) - 4.0 / 3.0 * d).abs() < 1e-15);
                assert!((g_metric(frame_f(i), frame_f(j)) - 4.0 / 3.0 * d).abs() < 1e-15);
                assert!((g_metric(frame_e(i), frame_f(j)) + 2.0 / 3.0 * d).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn table_agrees_except_ff() {
        for pair in [FramePair::EE, FramePair::EF, FramePair::FE] {
            for i in 0..3 {
                for j in 0..3 {
                    let (x, y) = frame_pair_args(pair, i, j);
                    assert!(close(g_tensor(x, y), nabla_j_table(pair, i, j), 1e-15), "{pair:?} {i} {j}");
                }
            }
        }
        let (x, y) = frame_pair_args(FramePair::FF, 0, 1);
        assert!(close(g_tensor(x, y), -nabla_j_table(FramePair::FF, 0, 1), 1e-15));
    }

    #[test]
    fn structure_suite_small() {
        let r = structure_check(500, 7);
        assert!(r.max_violation() < 1e-12, "{r:?}");
    }
}
