//! Reverse constructions: from a minimal surface (or a solution of the β
//! equation on S³) to a Lagrangian immersion `f = (p, q)` of a 3-dimensional
//! domain into S³×S³.
//!
//! Each case supplies `p`, the angle function `Λ` and three imaginary
//! quaternion forms `βₐ` with `∂ₐq = q βₐ` in the coordinates `(t, u, v)`.
//! `q` is then integrated over a grid along a fixed spanning tree and the
//! path dependence is measured against the opposite tree.

mod case1;
mod case2;
mod case3;

pub use case1::{lambda_case1, Case1, CubicCoefficients};
pub use case2::{chart, chart_derivatives, chart_inverse, integrate_x_curve, lambda_case2, Case2};
pub use case3::{lambda_case3, Case3};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Provenance;
use crate::nk::{NKPoint, NKTangent};
use crate::quat::{ImQuat, Quat};
use crate::verify::{self, Immersion};

/// Loop-closure defect above which integration is rejected.
pub const LOOP_TOL: f64 = 1e-4;

/// Uniform samples `start + i·step`, `i < n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, n: usize) -> Result<Self> {
        if n == 0 || !start.is_finite() || !step.is_finite() || step <= 0.0 {
            return Err(Error::Domain(format!("bad axis: start={start}, step={step}, n={n}")));
        }
        Ok(Axis { start, step, n })
    }

    /// `n ≥ 2` nodes from `a` to `b`.
    pub fn spanning(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 || !(b > a) {
            return Err(Error::Domain(format!("axis [{a}, {b}] with {n} nodes")));
        }
        Axis::new(a, (b - a) / (n - 1) as f64, n)
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.at(self.n - 1)
    }

    pub fn nearest(&self, x: f64) -> usize {
        ((x - self.start) / self.step).round().clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// Tensor grid in `(t, u, v)`; t varies fastest in storage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid3 {
    pub axes: [Axis; 3],
}

impl Grid3 {
    pub fn new(t: Axis, u: Axis, v: Axis) -> Self {
        Grid3 { axes: [t, u, v] }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].n, self.axes[1].n, self.axes[2].n]
    }

    pub fn steps(&self) -> [f64; 3] {
        [self.axes[0].step, self.axes[1].step, self.axes[2].step]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[2] * self.axes[1].n + i[1]) * self.axes[0].n + i[0]
    }

    pub fn unindex(&self, k: usize) -> [usize; 3] {
        let nt = self.axes[0].n;
        let nu = self.axes[1].n;
        [k % nt, (k / nt) % nu, k / (nt * nu)]
    }

    pub fn coords(&self, i: [usize; 3]) -> [f64; 3] {
        [self.axes[0].at(i[0]), self.axes[1].at(i[1]), self.axes[2].at(i[2])]
    }

    pub fn nearest(&self, x: [f64; 3]) -> [usize; 3] {
        [self.axes[0].nearest(x[0]), self.axes[1].nearest(x[1]), self.axes[2].nearest(x[2])]
    }

    pub fn is_interior(&self, i: [usize; 3]) -> bool {
        (0..3).all(|a| i[a] >= 1 && i[a] + 1 < self.axes[a].n)
    }
}

/// Local data of one reverse construction.
///
/// `anchor` pins which surface node sampled inputs are integrated from, so
/// that all evaluations around one site see a smooth function.
pub trait Construction: Send + Sync {
    fn case(&self) -> u8;

    /// `[β_t, β_u, β_v]`; errors at inadmissible points.
    fn forms(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<[ImQuat; 3]>;

    fn p(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<Quat>;

    /// `[∂_t p, ∂_u p, ∂_v p]`.
    fn dp(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<[Quat; 3]>;

    fn lambda(&self, x: [f64; 3]) -> Result<f64>;

    /// Default `q` at the grid origin.
    fn default_q0(&self, _origin: [f64; 3]) -> Quat {
        Quat::ONE
    }

    fn provenance(&self) -> Provenance;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stepper {
    /// Fourth-order Magnus step on two Gauss points.
    #[default]
    Magnus4,
    /// Exponential midpoint rule, second order.
    Midpoint,
}

impl FromStr for Stepper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "magnus4" => Ok(Stepper::Magnus4),
            "midpoint" => Ok(Stepper::Midpoint),
            other => Err(Error::Parse(format!("unknown stepper '{other}'"))),
        }
    }
}

impl fmt::Display for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stepper::Magnus4 => "magnus4",
            Stepper::Midpoint => "midpoint",
        })
    }
}

/// One group step of `q' = q β_axis` from `x` over `h` (which may be negative).
pub fn step_q(c: &dyn Construction, anchor: [f64; 3], q: Quat, x: [f64; 3], axis: usize, h: f64, stepper: Stepper) -> Result<Quat> {
    let at = |s: f64| {
        let mut y = x;
        y[axis] += s;
        c.forms(anchor, y).map(|f| f[axis])
    };
    let w = match stepper {
        Stepper::Midpoint => at(h / 2.0)? * h,
        Stepper::Magnus4 => {
            let d = 3f64.sqrt() / 6.0 * h;
            let b1 = at(h / 2.0 - d)?;
            let b2 = at(h / 2.0 + d)?;
            (b1 + b2) * (h / 2.0) + b1.cross(b2) * (3f64.sqrt() / 6.0 * h * h)
        }
    };
    let r = q * w.exp();
    Ok(r / r.norm())
}

/// Walks from `x` along `axis` by `d` in `n` equal steps.
fn walk(c: &dyn Construction, anchor: [f64; 3], mut q: Quat, mut x: [f64; 3], axis: usize, d: f64, n: usize, stepper: Stepper) -> Result<Quat> {
    let h = d / n as f64;
    let x0 = x[axis];
    for k in 0..n {
        x[axis] = x0 + k as f64 * h;
        q = step_q(c, anchor, q, x, axis, h, stepper)?;
    }
    Ok(q)
}

/// `q` on a grid together with its path-dependence diagnostic.
#[derive(Clone, Debug)]
pub struct QField {
    pub grid: Grid3,
    /// `None` where the spanning tree is blocked by an inadmissible site.
    pub q: Vec<Option<Quat>>,
    /// Largest `|q_tree − q_alt|` over sites reached by both trees.
    pub loop_closure: f64,
    pub worst_site: [usize; 3],
}

/// Integrates along the tree whose axes are visited in `order`: first the
/// line through the origin along `order[0]`, then lines along `order[1]`
/// from it, then lines along `order[2]`.
fn integrate_tree(c: &dyn Construction, grid: &Grid3, q0: Quat, stepper: Stepper, order: [usize; 3]) -> Vec<Option<Quat>> {
    let shape = grid.shape();
    let mut q: Vec<Option<Quat>> = vec![None; grid.len()];
    let origin = [0usize; 3];
    let ok = |i: [usize; 3]| c.forms(grid.coords(i), grid.coords(i)).is_ok();
    if !ok(origin) {
        return q;
    }
    q[0] = Some(q0);

    // integrates one line along `axis` starting at node `start`
    let line = |start: [usize; 3], q_start: Quat, axis: usize| -> Vec<([usize; 3], Option<Quat>)> {
        let mut out = Vec::with_capacity(shape[axis]);
        let mut cur = Some(q_start);
        let mut i = start;
        for k in 1..shape[axis] {
            let prev = i;
            i[axis] = k;
            cur = match cur {
                Some(qq) if ok(i) => {
                    let x = grid.coords(prev);
                    step_q(c, x, qq, x, axis, grid.axes[axis].step, stepper).ok()
                }
                _ => None,
            };
            out.push((i, cur));
        }
        out
    };

    for (i, v) in line(origin, q0, order[0]) {
        q[grid.index(i)] = v;
    }
    for stage in 1..3 {
        let axis = order[stage];
        let starts: Vec<[usize; 3]> = (0..grid.len())
            .map(|k| grid.unindex(k))
            .filter(|i| i[axis] == 0 && (stage == 2 || i[order[2]] == 0))
            .collect();
        let lines: Vec<Vec<([usize; 3], Option<Quat>)>> = starts
            .par_iter()
            .map(|&s| match q[grid.index(s)] {
                Some(qs) => line(s, qs, axis),
                None => Vec::new(),
            })
            .collect();
        for (i, v) in lines.into_iter().flatten() {
            q[grid.index(i)] = v;
        }
    }
    q
}

/// Integrates `q' = q βₐ` from `q0` at the grid origin along the tree
/// (t-line, then u-lines, then v-lines). The loop-closure defect is the
/// largest difference from the (v, u, t) tree; above [`LOOP_TOL`] the
/// result is rejected.
pub fn integrate_q(c: &dyn Construction, grid: &Grid3, q0: Quat, stepper: Stepper) -> Result<QField> {
    if !q0.is_unit(1e-12) {
        return Err(Error::Domain(format!("q0 must be a unit quaternion, |q0| = {}", q0.norm())));
    }
    if let Err(e) = c.forms(grid.coords([0; 3]), grid.coords([0; 3])) {
        return Err(Error::NoAdmissibleSites(format!("grid origin is not admissible: {e}")));
    }
    let (tree, alt) = rayon::join(
        || integrate_tree(c, grid, q0, stepper, [0, 1, 2]),
        || integrate_tree(c, grid, q0, stepper, [2, 1, 0]),
    );
    let mut worst = 0.0f64;
    let mut worst_site = [0; 3];
    for (k, (a, b)) in tree.iter().zip(&alt).enumerate() {
        if let (Some(a), Some(b)) = (a, b) {
            let d = a.max_abs_diff(*b);
            if d > worst {
                worst = d;
                worst_site = grid.unindex(k);
            }
        }
    }
    if worst > LOOP_TOL {
        return Err(Error::PathDependence {
            site: worst_site,
            defect: worst,
            tol: LOOP_TOL,
        });
    }
    Ok(QField {
        grid: *grid,
        q: tree,
        loop_closure: worst,
        worst_site,
    })
}

/// Forms sampled on a grid; `None` at inadmissible sites.
#[derive(Clone)]
pub struct ConnectionForms {
    pub grid: Grid3,
    pub samples: Vec<Option<[ImQuat; 3]>>,
    pub provenance: Provenance,
    pub source: Arc<dyn Construction>,
}

impl ConnectionForms {
    pub fn sample(source: Arc<dyn Construction>, grid: Grid3) -> Self {
        let samples = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let x = grid.coords(grid.unindex(k));
                source.forms(x, x).ok()
            })
            .collect();
        ConnectionForms {
            grid,
            samples,
            provenance: source.provenance(),
            source,
        }
    }

    pub fn admissible(&self) -> usize {
        self.samples.iter().filter(|s| s.is_some()).count()
    }
}

/// `[R₁₂, R₁₃, R₃₂]` from forms and their partial derivatives
/// `d[a][k] = ∂ₐ β_k`.
pub fn curvature(b: &[ImQuat; 3], d: &[[ImQuat; 3]; 3]) -> [ImQuat; 3] {
    [
        d[1][0] - d[0][1] - b[0].cross(b[1]) * 2.0,
        d[2][0] - d[0][2] - b[0].cross(b[2]) * 2.0,
        d[1][2] - d[2][1] - b[2].cross(b[1]) * 2.0,
    ]
}

const D1_4: [(i64, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const D1_2: [(i64, f64); 2] = [(-1, -0.5), (1, 0.5)];

/// Interior sup-norms of the three zero-curvature residuals from grid
/// differences: fourth order when an axis has at least 5 nodes, second
/// order otherwise. Sites whose stencil touches a masked site are skipped.
pub fn integrability_residual(forms: &ConnectionForms) -> [f64; 3] {
    let g = forms.grid;
    let shape = g.shape();
    let stencils: Vec<&[(i64, f64)]> = (0..3).map(|a| if shape[a] >= 5 { &D1_4[..] } else { &D1_2[..] }).collect();
    let reach: Vec<i64> = stencils.iter().map(|s| s.iter().map(|(o, _)| o.abs()).max().unwrap_or(1)).collect();
    let per_site: Vec<Option<[f64; 3]>> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let i = g.unindex(k);
            if (0..3).any(|a| (i[a] as i64) < reach[a] || (i[a] as i64) + reach[a] >= shape[a] as i64) {
                return None;
            }
            let b = forms.samples[k]?;
            let mut d = [[ImQuat::ZERO; 3]; 3];
            for a in 0..3 {
                for &(o, w) in stencils[a] {
                    let mut j = i;
                    j[a] = (i[a] as i64 + o) as usize;
                    let s = forms.samples[g.index(j)]?;
                    for kk in 0..3 {
                        d[a][kk] += s[kk] * (w / g.axes[a].step);
                    }
                }
            }
            let r = curvature(&b, &d);
            Some([r[0].max_abs(), r[1].max_abs(), r[2].max_abs()])
        })
        .collect();
    let mut out = [0.0f64; 3];
    for r in per_site.into_iter().flatten() {
        for a in 0..3 {
            out[a] = out[a].max(r[a]);
        }
    }
    out
}

const D1_6: [(i64, f64); 6] = [
    (-3, -1.0 / 60.0),
    (-2, 9.0 / 60.0),
    (-1, -45.0 / 60.0),
    (1, 45.0 / 60.0),
    (2, -9.0 / 60.0),
    (3, 1.0 / 60.0),
];

/// Residuals at one point from sixth-order differences of step `h` of the
/// forms themselves (no grid sampling). At `h = 1e-3` the truncation error
/// sits near roundoff, so this stands in for exact derivatives.
pub fn integrability_residual_at(c: &dyn Construction, x: [f64; 3], h: f64) -> Result<[f64; 3]> {
    let b = c.forms(x, x)?;
    let mut d = [[ImQuat::ZERO; 3]; 3];
    for a in 0..3 {
        for &(o, w) in &D1_6 {
            let mut y = x;
            y[a] += o as f64 * h;
            let s = c.forms(x, y)?;
            for k in 0..3 {
                d[a][k] += s[k] * (w / h);
            }
        }
    }
    let r = curvature(&b, &d);
    Ok([r[0].max_abs(), r[1].max_abs(), r[2].max_abs()])
}

/// One grid site of a built immersion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImmersionSite {
    pub x: [f64; 3],
    pub p: Quat,
    pub q: Quat,
    pub lambda: f64,
    /// Lagrangian residual from exact tangents `(p̄∂ₐp | βₐ)`.
    pub lag_residual: f64,
}

/// `(p, q)` on a grid; `None` marks masked sites.
#[derive(Clone, Debug)]
pub struct ImmersionGrid {
    pub case: u8,
    pub grid: Grid3,
    pub sites: Vec<Option<ImmersionSite>>,
    pub loop_closure: Option<f64>,
}

impl ImmersionGrid {
    pub fn masked(&self) -> usize {
        self.sites.iter().filter(|s| s.is_none()).count()
    }

    pub fn site(&self, i: [usize; 3]) -> Option<&ImmersionSite> {
        self.sites[self.grid.index(i)].as_ref()
    }

    pub fn max_unit_drift(&self) -> f64 {
        self.sites
            .iter()
            .flatten()
            .fold(0.0f64, |m, s| m.max((s.p.norm() - 1.0).abs()).max((s.q.norm() - 1.0).abs()))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub stepper: Stepper,
    /// `None` selects the construction's default.
    pub q0: Option<Quat>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            stepper: Stepper::Magnus4,
            q0: None,
        }
    }
}

/// A built immersion: grid samples plus the construction for evaluation
/// between nodes.
#[derive(Clone)]
pub struct BuiltImmersion {
    pub grid: ImmersionGrid,
    construction: Arc<dyn Construction>,
    stepper: Stepper,
}

/// Body-frame tangents from exact derivatives.
fn exact_tangents(c: &dyn Construction, x: [f64; 3], p: Quat, q: Quat) -> Result<[NKTangent; 3]> {
    let dp = c.dp(x, x)?;
    let b = c.forms(x, x)?;
    let pt = NKPoint { p, q };
    let mut out = [NKTangent::ZERO; 3];
    for a in 0..3 {
        let t = crate::nk::pullback(&pt, dp[a], q * b[a]).tangent;
        out[a] = t;
    }
    Ok(out)
}

/// Builds the immersion of `construction` on `grid`.
///
/// Inadmissible sites are masked. If every site is masked the error of the
/// grid origin is returned.
pub fn build(construction: Arc<dyn Construction>, grid: Grid3, opts: BuildOptions) -> Result<BuiltImmersion> {
    let c = construction.as_ref();
    let origin = grid.coords([0; 3]);
    let status: Vec<Result<()>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.coords(grid.unindex(k));
            c.forms(x, x).map(|_| ())
        })
        .collect();
    if status.iter().all(|s| s.is_err()) {
        return Err(status
            .into_iter()
            .next()
            .and_then(|s| s.err())
            .unwrap_or_else(|| Error::NoAdmissibleSites("empty grid".into())));
    }
    if let Err(e) = c.forms(origin, origin) {
        return Err(Error::NoAdmissibleSites(format!("grid origin is not admissible: {e}")));
    }
    let q0 = opts.q0.unwrap_or_else(|| c.default_q0(origin));
    let qf = integrate_q(c, &grid, q0, opts.stepper)?;
    let sites: Vec<Option<ImmersionSite>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let q = qf.q[k]?;
            let x = grid.coords(grid.unindex(k));
            let p = c.p(x, x).ok()?;
            let lambda = c.lambda(x).ok()?;
            let t = exact_tangents(c, x, p, q).ok()?;
            let lag = verify::lagrangian_defect(&t).unwrap_or(f64::NAN);
            Some(ImmersionSite {
                x,
                p,
                q,
                lambda,
                lag_residual: lag,
            })
        })
        .collect();
    let grid_out = ImmersionGrid {
        case: c.case(),
        grid,
        sites,
        loop_closure: Some(qf.loop_closure),
    };
    Ok(BuiltImmersion {
        grid: grid_out,
        construction,
        stepper: opts.stepper,
    })
}

impl BuiltImmersion {
    pub fn construction(&self) -> &Arc<dyn Construction> {
        &self.construction
    }

    /// Interior unmasked nodes, thinned by a deterministic stride so that at
    /// most about `max_sites` remain.
    pub fn verify_sites(&self, max_sites: usize) -> Vec<[f64; 3]> {
        let g = self.grid.grid;
        let all: Vec<[f64; 3]> = (0..g.len())
            .filter_map(|k| {
                let i = g.unindex(k);
                (g.is_interior(i) && self.grid.sites[k].is_some()).then(|| g.coords(i))
            })
            .collect();
        let stride = all.len().div_ceil(max_sites.max(1)).max(1);
        all.into_iter().step_by(stride).collect()
    }

    /// `q` at `x` by walking t, u, v from the unmasked node nearest `anchor`.
    pub fn q_at(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<Quat> {
        let g = self.grid.grid;
        let i = g.nearest(anchor);
        let site = self.grid.site(i).ok_or_else(|| Error::Domain(format!("site {i:?} is masked")))?;
        let c = self.construction.as_ref();
        let mut q = site.q;
        let mut y = site.x;
        for a in 0..3 {
            let d = x[a] - y[a];
            if d != 0.0 {
                // fixed substep count keeps q smooth in x
                let n = ((d.abs() / (g.axes[a].step / 8.0)).ceil() as usize).max(4);
                q = walk(c, anchor, q, y, a, d, n, self.stepper)?;
                y[a] = x[a];
            }
        }
        Ok(q)
    }
}

impl Immersion for BuiltImmersion {
    fn point(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<NKPoint> {
        let p = self.construction.p(anchor, x)?;
        let q = self.q_at(anchor, x)?;
        Ok(NKPoint { p, q })
    }

    fn lambda(&self, _anchor: [f64; 3], x: [f64; 3]) -> Option<f64> {
        self.construction.lambda(x).ok()
    }

    fn loop_closure(&self) -> Option<f64> {
        self.grid.loop_closure
    }

    fn max_unit_drift(&self) -> Option<f64> {
        Some(self.grid.max_unit_drift())
    }
}
