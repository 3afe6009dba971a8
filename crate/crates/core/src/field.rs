//! Scalar fields on the (u,v) parameter plane: uniform samples, their text
//! format, and smooth providers that also deliver first derivatives.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Uniform rectangular grid; node `(i, j)` sits at `(u0 + i·hu, v0 + j·hv)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n_u: usize,
    pub n_v: usize,
    pub u0: f64,
    pub v0: f64,
    pub hu: f64,
    pub hv: f64,
}

impl GridSpec {
    pub fn new(n_u: usize, n_v: usize, u0: f64, v0: f64, hu: f64, hv: f64) -> Result<Self> {
        let g = GridSpec { n_u, n_v, u0, v0, hu, hv };
        g.validate()?;
        Ok(g)
    }

    /// Grid with `n_u × n_v` nodes spanning `[u_min, u_max] × [v_min, v_max]`.
    pub fn spanning(n_u: usize, n_v: usize, u: (f64, f64), v: (f64, f64)) -> Result<Self> {
        if n_u < 2 || n_v < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 nodes per axis, got {n_u}x{n_v}")));
        }
        GridSpec::new(n_u, n_v, u.0, v.0, (u.1 - u.0) / (n_u - 1) as f64, (v.1 - v.0) / (n_v - 1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_u < 3 || self.n_v < 3 {
            return Err(Error::Domain(format!("grid must be at least 3x3, got {}x{}", self.n_u, self.n_v)));
        }
        let finite = [self.u0, self.v0, self.hu, self.hv].iter().all(|x| x.is_finite());
        if !finite || self.hu <= 0.0 || self.hv <= 0.0 {
            return Err(Error::Domain(format!(
                "grid spacing must be positive and finite: hu={}, hv={}",
                self.hu, self.hv
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_u + i
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u0 + i as f64 * self.hu
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v0 + j as f64 * self.hv
    }

    pub fn u_max(&self) -> f64 {
        self.u(self.n_u - 1)
    }

    pub fn v_max(&self) -> f64 {
        self.v(self.n_v - 1)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n_u || j + 1 == self.n_v
    }

    /// Number of boundary nodes.
    pub fn perimeter_len(&self) -> usize {
        2 * self.n_u + 2 * (self.n_v - 2)
    }
}

/// Samples of a scalar function on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField2D {
    pub spec: GridSpec,
    /// Row-major in v: `values[j * n_u + i]`.
    pub values: Vec<f64>,
}

impl ScalarField2D {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(Error::Domain(format!("expected {} values, got {}", spec.len(), values.len())));
        }
        Ok(ScalarField2D { spec, values })
    }

    pub fn constant(spec: GridSpec, c: f64) -> Result<Self> {
        ScalarField2D::new(spec, vec![c; spec.len()])
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.n_v {
            for i in 0..spec.n_u {
                values.push(f(spec.u(i), spec.v(j)));
            }
        }
        ScalarField2D::new(spec, values)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        let k = self.spec.index(i, j);
        self.values[k] = x;
    }

    /// Sup-norm over finite entries; boundary sentinels are skipped.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().filter(|x| x.is_finite()).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Sup-norm of `self − other` over interior nodes.
    pub fn interior_max_diff(&self, other: &ScalarField2D) -> f64 {
        let s = self.spec;
        let mut m: f64 = 0.0;
        for j in 1..s.n_v - 1 {
            for i in 1..s.n_u - 1 {
                m = m.max((self.at(i, j) - other.at(i, j)).abs());
            }
        }
        m
    }

    pub fn to_text(&self) -> String {
        let s = self.spec;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            s.n_u,
            s.n_v,
            fmt_f64(s.u0),
            fmt_f64(s.v0),
            fmt_f64(s.hu),
            fmt_f64(s.hv)
        );
        for j in 0..s.n_v {
            let row: Vec<String> = (0..s.n_u).map(|i| fmt_f64(self.at(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 6 {
            return Err(Error::Parse(format!("field header needs 6 entries, got {}", h.len())));
        }
        let n_u = parse_usize(h[0])?;
        let n_v = parse_usize(h[1])?;
        let spec = GridSpec::new(n_u, n_v, parse_f64(h[2])?, parse_f64(h[3])?, parse_f64(h[4])?, parse_f64(h[5])?)?;
        let mut values = Vec::with_capacity(spec.len());
        for (row, line) in lines.enumerate() {
            let vals: Vec<f64> = line.split_whitespace().map(parse_f64).collect::<Result<_>>()?;
            if vals.len() != n_u {
                return Err(Error::Parse(format!("row {row}: expected {n_u} values, got {}", vals.len())));
            }
            values.extend(vals);
        }
        if values.len() != spec.len() {
            return Err(Error::Parse(format!("expected {n_v} rows, got {}", values.len() / n_u)));
        }
        ScalarField2D::new(spec, values)
    }

    pub fn read(path: &Path) -> Result<Self> {
        ScalarField2D::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// 17 significant digits, which round-trips every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("not a count: {s:?}")))
}

/// Value and first partials at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub f: f64,
    pub fu: f64,
    pub fv: f64,
}

/// Where derivative information comes from; tolerances depend on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    Analytic,
    /// Interpolated from samples with the given largest spacing.
    Sampled {
        h: f64,
    },
}

impl Provenance {
    pub fn combine(self, other: Provenance) -> Provenance {
        match (self, other) {
            (Provenance::Analytic, o) | (o, Provenance::Analytic) => o,
            (Provenance::Sampled { h: a }, Provenance::Sampled { h: b }) => Provenance::Sampled { h: a.max(b) },
        }
    }

    pub fn is_analytic(self) -> bool {
        matches!(self, Provenance::Analytic)
    }
}

/// A scalar function of `(u, v)` that can be evaluated with its gradient anywhere
/// in its domain.
pub trait SmoothField: Send + Sync {
    fn eval(&self, u: f64, v: f64) -> Result<Jet>;
    fn provenance(&self) -> Provenance;
}

/// Constant function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub f64);

impl SmoothField for Constant {
    fn eval(&self, _u: f64, _v: f64) -> Result<Jet> {
        Ok(Jet { f: self.0, fu: 0.0, fv: 0.0 })
    }

    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
}

/// `μ(u,v) = ln(8c² / (1 + c²(u²+v²))²)`, a solution of `Δμ = −e^μ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiouvilleAnalytic {
    c: f64,
}

impl LiouvilleAnalytic {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("liouville parameter must be positive, got {c}")));
        }
        Ok(LiouvilleAnalytic { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn value(&self, u: f64, v: f64) -> f64 {
        let c2 = self.c * self.c;
        (8.0 * c2).ln() - 2.0 * (1.0 + c2 * (u * u + v * v)).ln()
    }
}

impl SmoothField for LiouvilleAnalytic {
    fn eval(&self, u: f64, v: f64) -> Result<Jet> {
        let c2 = self.c * self.c;
        let d = 1.0 + c2 * (u * u + v * v);
        Ok(Jet {
            f: self.value(u, v),
            fu: -4.0 * c2 * u / d,
            fv: -4.0 * c2 * v / d,
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
}

/// Piecewise-cubic tensor Lagrange interpolant of a [`ScalarField2D`].
///
/// Evaluation uses the 4×4 block of nodes around the point (3×3 on a grid
/// with only three nodes along an axis), shifted inward near the edges.
#[derive(Clone, Debug)]
pub struct Sampled {
    field: ScalarField2D,
}

impl Sampled {
    pub fn new(field: ScalarField2D) -> Self {
        Sampled { field }
    }

    pub fn field(&self) -> &ScalarField2D {
        &self.field
    }
}

/// Lagrange weights and their derivatives on `m` consecutive nodes starting at
/// `base`, evaluated at fractional index `s`.
fn lagrange(s: f64, base: usize, m: usize) -> ([f64; 4], [f64; 4]) {
    let mut w = [0.0; 4];
    let mut dw = [0.0; 4];
    let nodes: Vec<f64> = (0..m).map(|k| (base + k) as f64).collect();
    for a in 0..m {
        let mut num = 1.0;
        let mut den = 1.0;
        for b in 0..m {
            if b != a {
                num *= s - nodes[b];
                den *= nodes[a] - nodes[b];
            }
        }
        w[a] = num / den;
        let mut d = 0.0;
        for skip in 0..m {
            if skip == a {
                continue;
            }
            let mut prod = 1.0;
            for b in 0..m {
                if b != a && b != skip {
                    prod *= s - nodes[b];
                }
            }
            d += prod;
        }
        dw[a] = d / den;
    }
    (w, dw)
}

fn stencil_base(s: f64, n: usize, m: usize) -> usize {
    let lo = s.floor() as i64 - (m as i64 - 1) / 2;
    lo.clamp(0, (n - m) as i64) as usize
}

impl SmoothField for Sampled {
    fn eval(&self, u: f64, v: f64) -> Result<Jet> {
        let s = self.field.spec;
        let su = (u - s.u0) / s.hu;
        let sv = (v - s.v0) / s.hv;
        let slack = 1e-9;
        if !(su >= -slack && su <= (s.n_u - 1) as f64 + slack && sv >= -slack && sv <= (s.n_v - 1) as f64 + slack) {
            return Err(Error::Domain(format!("point ({u}, {v}) outside sampled field")));
        }
        let mu = s.n_u.min(4);
        let mv = s.n_v.min(4);
        let bu = stencil_base(su, s.n_u, mu);
        let bv = stencil_base(sv, s.n_v, mv);
        let (wu, dwu) = lagrange(su, bu, mu);
        let (wv, dwv) = lagrange(sv, bv, mv);
        let mut jet = Jet::default();
        for b in 0..mv {
            for a in 0..mu {
                let f = self.field.at(bu + a, bv + b);
                jet.f += wu[a] * wv[b] * f;
                jet.fu += dwu[a] * wv[b] * f;
                jet.fv += wu[a] * dwv[b] * f;
            }
        }
        jet.fu /= s.hu;
        jet.fv /= s.hv;
        Ok(jet)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Sampled {
            h: self.field.spec.hu.max(self.field.spec.hv),
        }
    }
}
