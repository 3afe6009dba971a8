//! Newton finite-difference solvers for the three elliptic equations used by
//! the constructions:
//!
//! * sinh-Gordon `Δω = −8 sinh ω`
//! * Liouville `Δμ = −e^μ`
//! * the β equation on S³, `csc²(2v) β_uu + β_vv + 2cot(2v) β_v = 2(3e^{−4β} − 1)`
//!
//! All use the 5-point stencil with Dirichlet data on the grid perimeter.

mod banded;

pub use banded::{BandLu, BandMatrix};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField2D};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquationKind {
    SinhGordon,
    Liouville,
    BetaS3,
}

impl EquationKind {
    pub fn name(self) -> &'static str {
        match self {
            EquationKind::SinhGordon => "sinh-gordon",
            EquationKind::Liouville => "liouville",
            EquationKind::BetaS3 => "beta-s3",
        }
    }

    /// `(a_u, b_v)`: coefficient of the u second difference and of the
    /// centered v first difference at height `v`.
    fn coefficients(self, v: f64) -> (f64, f64) {
        match self {
            EquationKind::BetaS3 => {
                let s = (2.0 * v).sin();
                (1.0 / (s * s), 2.0 * (2.0 * v).cos() / s)
            }
            _ => (1.0, 0.0),
        }
    }

    /// Zeroth-order term moved to the left-hand side, and its derivative.
    fn nonlinear(self, f: f64) -> (f64, f64) {
        match self {
            EquationKind::SinhGordon => (8.0 * f.sinh(), 8.0 * f.cosh()),
            EquationKind::Liouville => {
                let e = f.exp();
                (e, e)
            }
            EquationKind::BetaS3 => {
                let e = (-4.0 * f).exp();
                (-2.0 * (3.0 * e - 1.0), 24.0 * e)
            }
        }
    }
}

impl fmt::Display for EquationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EquationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "sinh-gordon" => Ok(EquationKind::SinhGordon),
            "liouville" => Ok(EquationKind::Liouville),
            "beta-s3" => Ok(EquationKind::BetaS3),
            other => Err(Error::Parse(format!("unknown equation kind '{other}'"))),
        }
    }
}

/// Interior residual `LHS − RHS − source` of `kind`; perimeter entries are NaN.
pub fn pde_residual(kind: EquationKind, field: &ScalarField2D, source: Option<&ScalarField2D>) -> ScalarField2D {
    let s = field.spec;
    let mut out = vec![f64::NAN; s.len()];
    out.par_chunks_mut(s.n_u).enumerate().for_each(|(j, row)| {
        if j == 0 || j + 1 == s.n_v {
            return;
        }
        for (i, r) in row.iter_mut().enumerate().take(s.n_u - 1).skip(1) {
            *r = node_residual(kind, field, source, i, j);
        }
    });
    ScalarField2D { spec: s, values: out }
}

fn node_residual(kind: EquationKind, f: &ScalarField2D, source: Option<&ScalarField2D>, i: usize, j: usize) -> f64 {
    let s = f.spec;
    let c = f.at(i, j);
    let (au, bv) = kind.coefficients(s.v(j));
    let duu = (f.at(i + 1, j) - 2.0 * c + f.at(i - 1, j)) / (s.hu * s.hu);
    let dvv = (f.at(i, j + 1) - 2.0 * c + f.at(i, j - 1)) / (s.hv * s.hv);
    let dv = (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * s.hv);
    let src = source.map_or(0.0, |g| g.at(i, j));
    au * duu + dvv + bv * dv + kind.nonlinear(c).0 - src
}

/// Dirichlet data: `south`/`north` are the rows `j = 0` and `j = n_v − 1`
/// (length `n_u`), `west`/`east` the columns `i = 0` and `i = n_u − 1`
/// without corners (length `n_v − 2`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dirichlet {
    pub south: Vec<f64>,
    pub north: Vec<f64>,
    pub west: Vec<f64>,
    pub east: Vec<f64>,
}

impl Dirichlet {
    pub fn from_fn(spec: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let row = |j: usize| (0..spec.n_u).map(|i| f(spec.u(i), spec.v(j))).collect();
        let col = |i: usize| (1..spec.n_v - 1).map(|j| f(spec.u(i), spec.v(j))).collect();
        Dirichlet {
            south: row(0),
            north: row(spec.n_v - 1),
            west: col(0),
            east: col(spec.n_u - 1),
        }
    }

    pub fn constant(spec: &GridSpec, c: f64) -> Self {
        Dirichlet::from_fn(spec, |_, _| c)
    }

    /// Takes the perimeter of an existing field.
    pub fn from_field(field: &ScalarField2D) -> Self {
        let s = field.spec;
        Dirichlet {
            south: (0..s.n_u).map(|i| field.at(i, 0)).collect(),
            north: (0..s.n_u).map(|i| field.at(i, s.n_v - 1)).collect(),
            west: (1..s.n_v - 1).map(|j| field.at(0, j)).collect(),
            east: (1..s.n_v - 1).map(|j| field.at(s.n_u - 1, j)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.south.len() + self.north.len() + self.west.len() + self.east.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, spec: &GridSpec) -> Result<()> {
        let ok = self.south.len() == spec.n_u && self.north.len() == spec.n_u && self.west.len() == spec.n_v - 2 && self.east.len() == spec.n_v - 2;
        if !ok {
            return Err(Error::Domain(format!(
                "boundary data has {} values in sides {}/{}/{}/{}, grid perimeter needs {}",
                self.len(),
                self.south.len(),
                self.north.len(),
                self.west.len(),
                self.east.len(),
                spec.perimeter_len()
            )));
        }
        if ![&self.south, &self.north, &self.west, &self.east]
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
        {
            return Err(Error::Domain("boundary data contains non-finite values".into()));
        }
        Ok(())
    }

    fn mean(&self) -> f64 {
        let sum: f64 = [&self.south, &self.north, &self.west, &self.east].iter().flat_map(|s| s.iter()).sum();
        sum / self.len() as f64
    }

    fn apply(&self, f: &mut ScalarField2D) {
        let s = f.spec;
        for i in 0..s.n_u {
            f.set(i, 0, self.south[i]);
            f.set(i, s.n_v - 1, self.north[i]);
        }
        for j in 1..s.n_v - 1 {
            f.set(0, j, self.west[j - 1]);
            f.set(s.n_u - 1, j, self.east[j - 1]);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialGuess {
    #[default]
    Zero,
    BoundaryMean,
}

#[derive(Clone, Debug)]
pub struct EllipticProblem {
    pub kind: EquationKind,
    pub spec: GridSpec,
    pub dirichlet: Dirichlet,
    /// Manufactured right-hand side; testing only.
    pub source: Option<ScalarField2D>,
    pub initial: InitialGuess,
}

impl EllipticProblem {
    pub fn new(kind: EquationKind, spec: GridSpec, dirichlet: Dirichlet) -> Result<Self> {
        spec.validate()?;
        dirichlet.validate(&spec)?;
        Ok(EllipticProblem {
            kind,
            spec,
            dirichlet,
            source: None,
            initial: InitialGuess::Zero,
        })
    }

    pub fn with_source(mut self, source: ScalarField2D) -> Result<Self> {
        if source.spec != self.spec {
            return Err(Error::Domain("source grid differs from problem grid".into()));
        }
        self.source = Some(source);
        Ok(self)
    }

    pub fn with_initial(mut self, initial: InitialGuess) -> Self {
        self.initial = initial;
        self
    }

    fn check_domain(&self) -> Result<()> {
        if self.kind != EquationKind::BetaS3 {
            return Ok(());
        }
        // distance from each v in range to the nearest zero of sin(2v)
        let half = std::f64::consts::FRAC_PI_2;
        let (a, b) = (self.spec.v0, self.spec.v_max());
        let k = (a / half).ceil();
        let crosses = k * half <= b;
        let margin = if crosses {
            0.0
        } else {
            let lo = (a / half).floor() * half;
            (a - lo).min(lo + half - b)
        };
        if margin < 10.0 * self.spec.hv {
            return Err(Error::Domain(format!(
                "v-range [{a}, {b}] comes within {margin:e} of sin(2v) = 0; need at least {:e}",
                10.0 * self.spec.hv
            )));
        }
        Ok(())
    }
}

/// Unknown ordering that keeps the Jacobian bandwidth at the shorter
/// interior side.
struct Layout {
    ni: usize,
    nj: usize,
    u_fast: bool,
}

impl Layout {
    fn new(spec: &GridSpec) -> Self {
        let (ni, nj) = (spec.n_u - 2, spec.n_v - 2);
        Layout { ni, nj, u_fast: ni <= nj }
    }

    fn n(&self) -> usize {
        self.ni * self.nj
    }

    fn band(&self) -> usize {
        if self.u_fast {
            self.ni
        } else {
            self.nj
        }
    }

    /// Unknown index of interior node `(i, j)` (1-based on the grid).
    fn k(&self, i: usize, j: usize) -> usize {
        if self.u_fast {
            (j - 1) * self.ni + (i - 1)
        } else {
            (i - 1) * self.nj + (j - 1)
        }
    }
}

/// Residual sup-norm over the interior.
fn interior_norm(r: &ScalarField2D) -> f64 {
    r.values.iter().filter(|x| !x.is_nan()).fold(0.0f64, |m, x| m.max(x.abs()))
}

fn jacobian(kind: EquationKind, f: &ScalarField2D, lay: &Layout) -> BandMatrix {
    let s = f.spec;
    let rows: Vec<Vec<(usize, usize, f64)>> = (1..s.n_v - 1)
        .into_par_iter()
        .map(|j| {
            let (au, bv) = kind.coefficients(s.v(j));
            let cu = au / (s.hu * s.hu);
            let cv = 1.0 / (s.hv * s.hv);
            let mut t = Vec::with_capacity(5 * (s.n_u - 2));
            for i in 1..s.n_u - 1 {
                let r = lay.k(i, j);
                t.push((r, r, -2.0 * cu - 2.0 * cv + kind.nonlinear(f.at(i, j)).1));
                if i > 1 {
                    t.push((r, lay.k(i - 1, j), cu));
                }
                if i + 2 < s.n_u {
                    t.push((r, lay.k(i + 1, j), cu));
                }
                if j > 1 {
                    t.push((r, lay.k(i, j - 1), cv - bv / (2.0 * s.hv)));
                }
                if j + 2 < s.n_v {
                    t.push((r, lay.k(i, j + 1), cv + bv / (2.0 * s.hv)));
                }
            }
            t
        })
        .collect();
    let b = lay.band();
    let mut m = BandMatrix::zeros(lay.n(), b, b);
    for (r, c, x) in rows.into_iter().flatten() {
        m.add(r, c, x);
    }
    m
}

/// Solves `prob` by damped Newton until the interior residual sup-norm drops
/// below `tol`.
pub fn solve_elliptic(prob: &EllipticProblem, tol: f64, max_iter: usize) -> Result<ScalarField2D> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    prob.spec.validate()?;
    prob.dirichlet.validate(&prob.spec)?;
    prob.check_domain()?;

    let start = match prob.initial {
        InitialGuess::Zero => 0.0,
        InitialGuess::BoundaryMean => prob.dirichlet.mean(),
    };
    let mut f = ScalarField2D::constant(prob.spec, start)?;
    prob.dirichlet.apply(&mut f);
    let lay = Layout::new(&prob.spec);
    let src = prob.source.as_ref();

    let mut res = pde_residual(prob.kind, &f, src);
    let mut norm = interior_norm(&res);
    for _ in 0..max_iter {
        if norm < tol {
            return Ok(f);
        }
        let lu = jacobian(prob.kind, &f, &lay).factor()?;
        let mut rhs = vec![0.0; lay.n()];
        for j in 1..prob.spec.n_v - 1 {
            for i in 1..prob.spec.n_u - 1 {
                rhs[lay.k(i, j)] = -res.at(i, j);
            }
        }
        let delta = lu.solve(&rhs);

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=20 {
            let mut trial = f.clone();
            for j in 1..prob.spec.n_v - 1 {
                for i in 1..prob.spec.n_u - 1 {
                    trial.set(i, j, f.at(i, j) + step * delta[lay.k(i, j)]);
                }
            }
            let r = pde_residual(prob.kind, &trial, src);
            let n = interior_norm(&r);
            if n < norm {
                f = trial;
                res = r;
                norm = n;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                residual: norm,
            });
        }
    }
    if norm < tol {
        Ok(f)
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: norm,
        })
    }
}

/// `μ = ln(8c² / (1 + c²(u² + v²))²)`, an exact solution of `Δμ = −e^μ`.
pub fn liouville_analytic(c: f64, spec: &GridSpec) -> Result<ScalarField2D> {
    let l = crate::field::LiouvilleAnalytic::new(c)?;
    ScalarField2D::from_fn(*spec, |u, v| l.value(u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_square(n: usize) -> GridSpec {
        GridSpec::spanning(n + 1, n + 1, (0.0, 1.0), (0.0, 1.0)).unwrap()
    }

    #[test]
    fn residual_examples() {
        let s = unit_square(8);
        let zero = ScalarField2D::constant(s, 0.0).unwrap();
        let r = pde_residual(EquationKind::Liouville, &zero, None);
        assert!(r.at(0, 0).is_nan());
        assert!((r.at(3, 4) - 1.0).abs() < 1e-15);
        assert_eq!(pde_residual(EquationKind::SinhGordon, &zero, None).sup_norm(), 0.0);

        let s3 = GridSpec::spanning(9, 9, (0.0, 1.0), (0.3, 1.2)).unwrap();
        let b = ScalarField2D::constant(s3, 0.25 * 3f64.ln()).unwrap();
        assert!(pde_residual(EquationKind::BetaS3, &b, None).sup_norm() < 1e-12);
    }

    #[test]
    fn kind_parses() {
        assert_eq!("sinh_gordon".parse::<EquationKind>().unwrap(), EquationKind::SinhGordon);
        assert_eq!("beta-s3".parse::<EquationKind>().unwrap(), EquationKind::BetaS3);
        assert!("heat".parse::<EquationKind>().is_err());
    }

    #[test]
    fn liouville_analytic_values() {
        let s = GridSpec::spanning(5, 5, (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let m = liouville_analytic(1.0, &s).unwrap();
        assert!((m.at(2, 2) - 8f64.ln()).abs() < 1e-15);
        let m = liouville_analytic(2.0, &s).unwrap();
        assert!((m.at(2, 2) - 32f64.ln()).abs() < 1e-14);
        assert!(liouville_analytic(0.0, &s).is_err());

        let fine = GridSpec::spanning(101, 101, (-0.5, 0.5), (-0.5, 0.5)).unwrap();
        let m = liouville_analytic(1.0, &fine).unwrap();
        assert!(pde_residual(EquationKind::Liouville, &m, None).sup_norm() < 1e-3);
    }

    #[test]
    fn zero_data_sinh_gordon_is_trivial() {
        let s = GridSpec::spanning(7, 11, (-0.3, 0.4), (1.0, 2.0)).unwrap();
        let p = EllipticProblem::new(EquationKind::SinhGordon, s, Dirichlet::constant(&s, 0.0)).unwrap();
        let w = solve_elliptic(&p, 1e-12, 10).unwrap();
        assert!(w.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn beta_constant_root() {
        let s = GridSpec::spanning(12, 41, (0.0, 1.0), (0.4, 1.1)).unwrap();
        let b0 = 0.25 * 3f64.ln();
        let p = EllipticProblem::new(EquationKind::BetaS3, s, Dirichlet::constant(&s, b0)).unwrap();
        let b = solve_elliptic(&p, 1e-10, 30).unwrap();
        assert!(pde_residual(EquationKind::BetaS3, &b, None).sup_norm() < 1e-10);
        assert!(b.values.iter().all(|x| (x - b0).abs() < 1e-10));
    }

    #[test]
    fn beta_singular_range_is_rejected() {
        let s = GridSpec::spanning(9, 9, (0.0, 1.0), (0.05, 1.0)).unwrap();
        let p = EllipticProblem::new(EquationKind::BetaS3, s, Dirichlet::constant(&s, 0.3)).unwrap();
        assert!(matches!(solve_elliptic(&p, 1e-9, 10), Err(Error::Domain(_))));
        let s = GridSpec::spanning(9, 9, (0.0, 1.0), (1.2, 2.0)).unwrap();
        let p = EllipticProblem::new(EquationKind::BetaS3, s, Dirichlet::constant(&s, 0.3)).unwrap();
        assert!(matches!(solve_elliptic(&p, 1e-9, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn wrong_boundary_length_is_rejected() {
        let s = unit_square(4);
        let mut d = Dirichlet::constant(&s, 0.0);
        d.west.pop();
        assert!(EllipticProblem::new(EquationKind::Liouville, s, d).is_err());
    }

    fn liouville_error(n: usize) -> f64 {
        let s = unit_square(n);
        let exact = liouville_analytic(1.0, &s).unwrap();
        let p = EllipticProblem::new(EquationKind::Liouville, s, Dirichlet::from_field(&exact))
            .unwrap()
            .with_initial(InitialGuess::BoundaryMean);
        let mu = solve_elliptic(&p, 1e-10, 50).unwrap();
        assert!(pde_residual(EquationKind::Liouville, &mu, None).sup_norm() < 1e-10);
        mu.interior_max_diff(&exact)
    }

    #[test]
    fn liouville_converges_at_second_order() {
        let e: Vec<f64> = [16, 32, 64].iter().map(|&n| liouville_error(n)).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.5, "errors {e:?}");
        }
    }

    #[test]
    fn nonconvergence_is_reported() {
        let s = unit_square(16);
        let p = EllipticProblem::new(EquationKind::SinhGordon, s, Dirichlet::constant(&s, 2.0)).unwrap();
        match solve_elliptic(&p, 1e-12, 1) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manufactured_sinh_gordon() {
        let exact = |u: f64, v: f64| 0.5 * (PI * u).sin() * (PI * v).sin() + 0.3 * u * v;
        let lap = |u: f64, v: f64| -PI * PI * (PI * u).sin() * (PI * v).sin();
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let s = unit_square(n);
            let src = ScalarField2D::from_fn(s, |u, v| lap(u, v) + 8.0 * exact(u, v).sinh()).unwrap();
            let p = EllipticProblem::new(EquationKind::SinhGordon, s, Dirichlet::from_fn(&s, exact))
                .unwrap()
                .with_source(src)
                .unwrap();
            let w = solve_elliptic(&p, 1e-10, 50).unwrap();
            errs.push(w.interior_max_diff(&ScalarField2D::from_fn(s, exact).unwrap()));
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.5, "errors {errs:?}");
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let s = unit_square(12);
        let exact = liouville_analytic(1.0, &s).unwrap();
        let p = EllipticProblem::new(EquationKind::Liouville, s, Dirichlet::from_field(&exact)).unwrap();
        let a = solve_elliptic(&p, 1e-11, 30).unwrap();
        let b = solve_elliptic(&p, 1e-11, 30).unwrap();
        assert_eq!(a, b);
    }
}
