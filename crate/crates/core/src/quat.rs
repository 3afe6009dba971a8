//! Quaternion and imaginary-quaternion algebra.
//!
//! Points of S³ are unit [`Quat`]s; tangent data in the body frame is carried
//! by [`ImQuat`]s, whose real part is zero by construction.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Below this angle `ImQuat::exp` switches to its Taylor branch.
const EXP_TAYLOR_THRESHOLD: f64 = 1e-6;

/// A real quaternion `w + x i + y j + z k`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// An imaginary quaternion `x i + y j + z k`, identified with a vector of ℝ³.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ImQuat {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const ONE: Quat = Quat::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quat = Quat::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quat = Quat::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quat = Quat::new(0.0, 0.0, 0.0, 1.0);
    pub const ZERO: Quat = Quat::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quat::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_parts(re: f64, im: ImQuat) -> Self {
        Quat::new(re, im.x, im.y, im.z)
    }

    pub fn re(self) -> f64 {
        self.w
    }

    pub fn im(self) -> ImQuat {
        ImQuat::new(self.x, self.y, self.z)
    }

    pub fn conj(self) -> Self {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Euclidean inner product on ℝ⁴.
    pub fn dot(self, other: Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Multiplicative inverse; fails on the zero quaternion.
    pub fn inverse(self) -> Result<Self> {
        let n2 = self.norm_sq();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(Error::Domain(format!("cannot invert quaternion {self}")));
        }
        Ok(self.conj() / n2)
    }

    pub fn normalize(self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain(format!("cannot normalize quaternion {self}")));
        }
        Ok(self / n)
    }

    pub fn is_unit(self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() < tol
    }

    /// Conjugation `self · a · self⁻¹` for a unit `self`.
    pub fn rotate(self, a: ImQuat) -> ImQuat {
        (self * a.to_quat() * self.conj()).im()
    }

    pub fn max_abs_diff(self, other: Quat) -> f64 {
        let d = self - other;
        d.w.abs().max(d.x.abs()).max(d.y.abs()).max(d.z.abs())
    }
}

impl ImQuat {
    pub const I: ImQuat = ImQuat::new(1.0, 0.0, 0.0);
    pub const J: ImQuat = ImQuat::new(0.0, 1.0, 0.0);
    pub const K: ImQuat = ImQuat::new(0.0, 0.0, 1.0);
    pub const ZERO: ImQuat = ImQuat::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        ImQuat { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ImQuat::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_quat(self) -> Quat {
        Quat::new(0.0, self.x, self.y, self.z)
    }

    pub fn dot(self, other: ImQuat) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Vector cross product, equal to `½(αβ − βα)` as quaternions.
    pub fn cross(self, other: ImQuat) -> ImQuat {
        ImQuat::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    /// Exponential map `cos|α| + sin|α| α/|α|`; always a unit quaternion.
    pub fn exp(self) -> Quat {
        let theta = self.norm();
        let sinc = if theta < EXP_TAYLOR_THRESHOLD {
            1.0 - theta * theta / 6.0
        } else {
            theta.sin() / theta
        };
        let q = Quat::from_parts(theta.cos(), self * sinc);
        // cos and sinc are each correctly rounded; renormalizing keeps long
        // products of steps on the sphere to machine precision.
        q / q.norm()
    }
}

/// Hamilton product.
pub fn qmul(a: Quat, b: Quat) -> Quat {
    a * b
}

pub fn qinv(a: Quat) -> Result<Quat> {
    a.inverse()
}

pub fn imcross(a: ImQuat, b: ImQuat) -> ImQuat {
    a.cross(b)
}

pub fn qexp_im(a: ImQuat) -> Quat {
    a.exp()
}

impl fmt::Display for Quat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

impl fmt::Display for ImQuat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}i + {}j + {}k)", self.x, self.y, self.z)
    }
}

impl Mul for Quat {
    type Output = Quat;

    fn mul(self, b: Quat) -> Quat {
        let a = self;
        Quat::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Mul<ImQuat> for Quat {
    type Output = Quat;

    fn mul(self, b: ImQuat) -> Quat {
        self * b.to_quat()
    }
}

impl Mul<Quat> for ImQuat {
    type Output = Quat;

    fn mul(self, b: Quat) -> Quat {
        self.to_quat() * b
    }
}

impl Mul<ImQuat> for ImQuat {
    type Output = Quat;

    fn mul(self, b: ImQuat) -> Quat {
        Quat::from_parts(-self.dot(b), self.cross(b))
    }
}

macro_rules! impl_linear {
    ($t:ident, $($f:ident),+) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t { $t { $($f: self.$f + o.$f),+ } }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t { $t { $($f: self.$f - o.$f),+ } }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t { $t { $($f: -self.$f),+ } }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t { $t { $($f: self.$f * s),+ } }
        }
        impl Mul<$t> for f64 {
            type Output = $t;
            fn mul(self, v: $t) -> $t { v * self }
        }
        impl Div<f64> for $t {
            type Output = $t;
            fn div(self, s: f64) -> $t { $t { $($f: self.$f / s),+ } }
        }
        impl AddAssign for $t {
            fn add_assign(&mut self, o: $t) { $(self.$f += o.$f;)+ }
        }
        impl SubAssign for $t {
            fn sub_assign(&mut self, o: $t) { $(self.$f -= o.$f;)+ }
        }
    };
}

impl_linear!(Quat, w, x, y, z);
impl_linear!(ImQuat, x, y, z);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_quat(rng: &mut impl Rng) -> Quat {
        Quat::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    }

    fn random_im(rng: &mut impl Rng) -> ImQuat {
        ImQuat::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn hamilton_relations() {
        assert_eq!(Quat::I * Quat::J, Quat::K);
        assert_eq!(Quat::K * Quat::J, -Quat::I);
        assert_eq!(Quat::J * Quat::K, Quat::I);
        assert_eq!(Quat::I * Quat::I, -Quat::ONE);
    }

    #[test]
    fn unit_product_stays_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = random_quat(&mut rng).normalize().unwrap();
            let b = random_quat(&mut rng).normalize().unwrap();
            let ab = a * b;
            // component-wise expansion of |ab|² against the product of norms
            let expanded = (a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z).powi(2)
                + (a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y).powi(2)
                + (a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x).powi(2)
                + (a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w).powi(2);
            assert!((ab.norm() - 1.0).abs() < 1e-14);
            assert!((expanded - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Quat::ONE.inverse().unwrap(), Quat::ONE);
        assert_eq!(Quat::I.inverse().unwrap(), -Quat::I);
        let a = Quat::new(0.6, 0.8, 0.0, 0.0);
        let inv = a.inverse().unwrap();
        assert!(inv.max_abs_diff(Quat::new(0.6, -0.8, 0.0, 0.0)) < 1e-15);
        assert!((a * inv).max_abs_diff(Quat::ONE) < 1e-15);
        assert!(matches!(Quat::ZERO.inverse(), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_of_random_quaternions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = random_quat(&mut rng);
            assert!((a * a.inverse().unwrap()).max_abs_diff(Quat::ONE) < 1e-13);
            let u = a.normalize().unwrap();
            assert!(u.inverse().unwrap().max_abs_diff(u.conj()) < 1e-15);
        }
    }

    #[test]
    fn conj_product_is_real_norm() {
        let a = Quat::new(0.3, -1.2, 0.7, 2.0);
        let p = a * a.conj();
        assert!((p.w - a.norm_sq()).abs() < 1e-15);
        assert!(p.im().max_abs() < 1e-15);
    }

    #[test]
    fn cross_examples() {
        assert_eq!(ImQuat::I.cross(ImQuat::J), ImQuat::K);
        assert_eq!(ImQuat::I.cross(ImQuat::I), ImQuat::ZERO);
        let v = (ImQuat::I + ImQuat::J).cross(ImQuat::K);
        assert_eq!(v, ImQuat::I - ImQuat::J);
    }

    #[test]
    fn cross_is_half_commutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = random_im(&mut rng);
            let b = random_im(&mut rng);
            let comm = (a * b - b * a) * 0.5;
            assert!(comm.re().abs() < 1e-14);
            assert!((comm.im() - a.cross(b)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn exp_examples() {
        assert_eq!(ImQuat::ZERO.exp(), Quat::ONE);
        let q = (ImQuat::I * FRAC_PI_2).exp();
        assert!(q.max_abs_diff(Quat::I) < 1e-15);
        let tiny = ImQuat::new(1e-9, -2e-9, 3e-10).exp();
        assert!((tiny.norm() - 1.0).abs() < 1e-15);
        assert!((tiny.im() - ImQuat::new(1e-9, -2e-9, 3e-10)).max_abs() < 1e-20);
    }

    #[test]
    fn exp_taylor_branch_is_continuous() {
        for &t in &[0.99e-6, 1.0e-6, 1.01e-6] {
            let a = ImQuat::new(t, 0.0, 0.0).exp();
            assert!((a.x - t.sin()).abs() < 1e-20);
            assert!((a.w - t.cos()).abs() < 3e-16);
        }
    }

    #[test]
    fn rotate_matches_conjugation() {
        let x = (ImQuat::K * std::f64::consts::FRAC_PI_4).exp();
        let r = x.rotate(ImQuat::I);
        assert!((r - ImQuat::J).max_abs() < 1e-15);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn quat() -> impl Strategy<Value = Quat> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(w, x, y, z)| Quat::new(w, x, y, z))
    }

    fn im() -> impl Strategy<Value = ImQuat> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| ImQuat::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn norm_is_multiplicative(a in quat(), b in quat()) {
            let n = a.norm() * b.norm();
            prop_assert!(((a * b).norm() - n).abs() <= 1e-13 * n.max(1e-300));
        }

        #[test]
        fn product_is_associative(a in quat(), b in quat(), c in quat()) {
            prop_assert!(((a * b) * c).max_abs_diff(a * (b * c)) < 1e-12);
        }

        #[test]
        fn cross_is_antisymmetric_and_orthogonal(a in im(), b in im()) {
            prop_assert!((a.cross(b) + b.cross(a)).max_abs() < 1e-13);
            prop_assert!(a.cross(b).dot(a).abs() < 1e-12);
        }

        #[test]
        fn exp_of_negative_is_inverse(a in im()) {
            prop_assert!((a.exp() * (-a).exp()).max_abs_diff(Quat::ONE) < 1e-13);
            prop_assert!((a.exp().norm() - 1.0).abs() < 1e-14);
        }

        #[test]
        fn imaginary_embedding_has_zero_real_part(a in im()) {
            prop_assert_eq!(a.to_quat().re(), 0.0);
            prop_assert_eq!(a.to_quat().im(), a);
        }
    }
}
