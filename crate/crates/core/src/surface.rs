//! Minimal surfaces in S³ in the isothermal gauge `|p_u|² = |p_v|² = 2e^ω`,
//! `σ(∂z,∂z) = −1`.
//!
//! Writing `z = u + Iv`, the complex Gauss formulas expand to the real frame
//! equations
//!
//! ```text
//! p_uu = ½(−4e^ω p + ω_u p_u − ω_v p_v − 4N)
//! p_vv = ½(−4e^ω p − ω_u p_u + ω_v p_v + 4N)
//! p_uv = ½(ω_v p_u + ω_u p_v)
//! N_u  =  e^{−ω} p_u
//! N_v  = −e^{−ω} p_v
//! ```
//!
//! with `N = p(α₂×α₃)/(2e^ω)`, `α₂ = p̄p_u`, `α₃ = p̄p_v`. Along either
//! coordinate line these equations preserve all frame invariants for any ω;
//! the sinh-Gordon equation is what makes them path independent.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{GridSpec, Jet, Provenance, Sampled, ScalarField2D, SmoothField};
use crate::pde::{pde_residual, EquationKind};
use crate::quat::{ImQuat, Quat};

/// Tolerances of the [`FrameSample`] invariants.
pub const ORTHO_TOL: f64 = 1e-10;
pub const METRIC_TOL: f64 = 1e-8;
pub const DET_TOL: f64 = 1e-8;

/// Steps between polar re-projections of the frame onto SO(4).
const REPROJECT_EVERY: usize = 32;
/// Frame drift that aborts integration.
const DRIFT_FAIL: f64 = 1e-6;

/// A surface point with its coordinate derivatives and unit normal in S³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameSample {
    pub p: Quat,
    pub du: Quat,
    pub dv: Quat,
    pub n: Quat,
}

/// Largest violations of the frame invariants at one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameDefects {
    pub unit: f64,
    pub ortho: f64,
    pub metric: f64,
    pub det: f64,
}

impl FrameDefects {
    pub fn max(&self) -> f64 {
        self.unit.max(self.ortho).max(self.metric).max(self.det)
    }

    pub fn within(&self) -> bool {
        self.unit < ORTHO_TOL && self.ortho < ORTHO_TOL && self.metric < METRIC_TOL && self.det < DET_TOL
    }
}

/// Sign of `σ(∂z,∂z)` for the Clifford fixture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalSign {
    Minus,
    Plus,
}

impl NormalSign {
    pub fn from_int(s: i64) -> Result<Self> {
        match s {
            -1 => Ok(NormalSign::Minus),
            1 => Ok(NormalSign::Plus),
            _ => Err(Error::Domain(format!("normal sign must be +1 or -1, got {s}"))),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NormalSign::Minus => -1.0,
            NormalSign::Plus => 1.0,
        }
    }
}

impl FrameSample {
    /// `α₂ = p̄ p_u`.
    pub fn alpha2(&self) -> ImQuat {
        (self.p.conj() * self.du).im()
    }

    /// `α₃ = p̄ p_v`.
    pub fn alpha3(&self) -> ImQuat {
        (self.p.conj() * self.dv).im()
    }

    /// Orientation-compatible normal `p(α₂×α₃)/(2e^ω)` with `2e^ω = |p_u|²`.
    pub fn oriented_normal(p: Quat, du: Quat, dv: Quat) -> Quat {
        let a2 = (p.conj() * du).im();
        let a3 = (p.conj() * dv).im();
        p * (a2.cross(a3) / du.norm_sq())
    }

    /// Frame at the origin of a surface with conformal factor `omega`:
    /// `p = 1`, `p_u ∝ i + j`, `p_v ∝ i − j`, `N = −k`.
    pub fn standard_seed(omega: f64) -> Self {
        let s = (omega / 2.0).exp();
        FrameSample {
            p: Quat::ONE,
            du: Quat::new(0.0, s, s, 0.0),
            dv: Quat::new(0.0, s, -s, 0.0),
            n: -Quat::K,
        }
    }

    pub fn defects(&self, omega: f64) -> FrameDefects {
        let e = 2.0 * omega.exp();
        let ortho = [
            self.p.dot(self.du),
            self.p.dot(self.dv),
            self.p.dot(self.n),
            self.du.dot(self.n),
            self.dv.dot(self.n),
        ]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
        let metric = (self.du.norm_sq() - e)
            .abs()
            .max((self.dv.norm_sq() - e).abs())
            .max(self.du.dot(self.dv).abs());
        let unit = (self.p.norm() - 1.0).abs().max((self.n.norm() - 1.0).abs());
        let det = (self.orientation_det() - 1.0).abs();
        FrameDefects { unit, ortho, metric, det }
    }

    /// Determinant of `(p, p_u/|p_u|, p_v/|p_v|, N)`.
    pub fn orientation_det(&self) -> f64 {
        let cols = [self.p, self.du / self.du.norm(), self.dv / self.dv.norm(), self.n];
        Matrix4::from_columns(&cols.map(|q| Vector4::from(q.to_array()))).determinant()
    }

    pub fn check(&self, omega: f64) -> Result<()> {
        let d = self.defects(omega);
        if !d.within() {
            return Err(Error::Domain(format!("frame violates gauge invariants for omega={omega}: {d:?}")));
        }
        Ok(())
    }
}

/// Clifford torus patch in the `σ(∂z,∂z) = ±1` gauge with `ω = 0`.
///
/// `p = (cos a cos b, cos a sin b, sin a cos b, sin a sin b)` with
/// `(a, b) = (u − v, u + v)` for [`NormalSign::Minus`] and `(u + v, u − v)`
/// for [`NormalSign::Plus`].
pub fn clifford_patch(u: f64, v: f64, sign: NormalSign) -> FrameSample {
    let (a, b, ua, va, ub, vb) = match sign {
        NormalSign::Minus => (u - v, u + v, 1.0, -1.0, 1.0, 1.0),
        NormalSign::Plus => (u + v, u - v, 1.0, 1.0, 1.0, -1.0),
    };
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let p = Quat::new(ca * cb, ca * sb, sa * cb, sa * sb);
    let pa = Quat::new(-sa * cb, -sa * sb, ca * cb, ca * sb);
    let pb = Quat::new(-ca * sb, ca * cb, -sa * sb, sa * cb);
    let du = pa * ua + pb * ub;
    let dv = pa * va + pb * vb;
    FrameSample {
        p,
        du,
        dv,
        n: FrameSample::oriented_normal(p, du, dv),
    }
}

/// The totally geodesic sphere of unit imaginary quaternions, framed by the
/// left-invariant fields: `p = x i x⁻¹`, `p_u = X₂p = −2xkx⁻¹`,
/// `p_v = X₃p = 2xjx⁻¹`, `N = −1`. Conformal factor `ω = ln 2`.
pub fn geodesic_sphere_patch(x: Quat) -> Result<FrameSample> {
    if !x.is_unit(1e-12) {
        return Err(Error::Domain(format!(
            "geodesic sphere patch needs a unit quaternion, got norm {}",
            x.norm()
        )));
    }
    let xc = x.conj();
    let p = x * Quat::I * xc;
    let du = x * Quat::K * xc * -2.0;
    let dv = x * Quat::J * xc * 2.0;
    Ok(FrameSample {
        p,
        du,
        dv,
        n: FrameSample::oriented_normal(p, du, dv),
    })
}

/// Conformal factor of [`geodesic_sphere_patch`].
pub const GEODESIC_SPHERE_OMEGA: f64 = std::f64::consts::LN_2;

/// A minimal surface that can be evaluated (with its frame) anywhere in its
/// parameter domain.
pub trait SurfaceMap: Send + Sync {
    fn frame(&self, u: f64, v: f64) -> Result<FrameSample>;

    /// Frame at `(u, v)` evaluated consistently for points near `anchor`.
    /// Sampled surfaces integrate from the node nearest `anchor`, which keeps
    /// finite-difference stencils around one site free of node-switching jumps.
    fn frame_near(&self, _anchor: (f64, f64), u: f64, v: f64) -> Result<FrameSample> {
        self.frame(u, v)
    }

    fn omega(&self, u: f64, v: f64) -> Result<Jet>;

    fn provenance(&self) -> Provenance;
}

/// Closed-form Clifford patch (`ω ≡ 0`).
#[derive(Clone, Copy, Debug)]
pub struct CliffordSurface {
    pub sign: NormalSign,
}

impl SurfaceMap for CliffordSurface {
    fn frame(&self, u: f64, v: f64) -> Result<FrameSample> {
        Ok(clifford_patch(u, v, self.sign))
    }

    fn omega(&self, _u: f64, _v: f64) -> Result<Jet> {
        Ok(Jet::default())
    }

    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
}

type State = [Quat; 4];

fn axpy(a: &State, s: f64, b: &State) -> State {
    [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s, a[3] + b[3] * s]
}

/// Right-hand side of the frame equations along u (`along_u`) or v.
fn frame_rhs(y: &State, w: &Jet, along_u: bool) -> State {
    let [p, pu, pv, n] = *y;
    let e = w.f.exp();
    let puv = (pu * w.fv + pv * w.fu) * 0.5;
    if along_u {
        let puu = (p * (-4.0 * e) + pu * w.fu - pv * w.fv - n * 4.0) * 0.5;
        [pu, puu, puv, pu / e]
    } else {
        let pvv = (p * (-4.0 * e) - pu * w.fu + pv * w.fv + n * 4.0) * 0.5;
        [pv, puv, pvv, -(pv / e)]
    }
}

fn rk4_step(omega: &dyn SmoothField, y: &State, u: f64, v: f64, h: f64, along_u: bool) -> Result<State> {
    let at = |s: f64| if along_u { omega.eval(u + s, v) } else { omega.eval(u, v + s) };
    let w0 = at(0.0)?;
    let wm = at(h / 2.0)?;
    let w1 = at(h)?;
    let k1 = frame_rhs(y, &w0, along_u);
    let k2 = frame_rhs(&axpy(y, h / 2.0, &k1), &wm, along_u);
    let k3 = frame_rhs(&axpy(y, h / 2.0, &k2), &wm, along_u);
    let k4 = frame_rhs(&axpy(y, h, &k3), &w1, along_u);
    let mut out = *y;
    for k in 0..4 {
        out[k] = y[k] + (k1[k] + k2[k] * 2.0 + k3[k] * 2.0 + k4[k]) * (h / 6.0);
    }
    Ok(out)
}

/// Nearest rotation to `(p, p_u/s, p_v/s, N)` via the polar decomposition,
/// with `s = √(2e^ω)`.
fn reproject(y: &State, omega: f64) -> Result<State> {
    let s = (2.0 * omega.exp()).sqrt();
    let cols = [y[0], y[1] / s, y[2] / s, y[3]];
    let m = Matrix4::from_columns(&cols.map(|q| Vector4::from(q.to_array())));
    let svd = m.svd(true, true);
    let (uu, vt) = match (svd.u, svd.v_t) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::IntegrationFailure("frame SVD failed".into())),
    };
    let r = uu * vt;
    let col = |k: usize| Quat::new(r[(0, k)], r[(1, k)], r[(2, k)], r[(3, k)]);
    Ok([col(0), col(1) * s, col(2) * s, col(3)])
}

fn to_state(f: &FrameSample) -> State {
    [f.p, f.du, f.dv, f.n]
}

fn to_frame(y: &State) -> FrameSample {
    FrameSample {
        p: y[0],
        du: y[1],
        dv: y[2],
        n: y[3],
    }
}

/// Integrates along one coordinate line from `(u, v)` over `n` steps of size
/// `h`, returning every intermediate frame (the start included).
/// RK4 substeps per grid step; keeps the truncation error far below what
/// second differences of the grid can resolve.
const SUBSTEPS: usize = 4;

fn integrate_line(
    omega: &dyn SmoothField,
    start: FrameSample,
    u: f64,
    v: f64,
    h: f64,
    n: usize,
    along_u: bool,
    site: impl Fn(usize) -> (usize, usize),
) -> Result<Vec<FrameSample>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(start);
    let mut y = to_state(&start);
    for k in 0..n {
        let (cu, cv) = if along_u { (u + k as f64 * h, v) } else { (u, v + k as f64 * h) };
        for s in 0..SUBSTEPS {
            let o = s as f64 * h / SUBSTEPS as f64;
            let (su, sv) = if along_u { (cu + o, cv) } else { (cu, cv + o) };
            y = rk4_step(omega, &y, su, sv, h / SUBSTEPS as f64, along_u)?;
        }
        let (nu, nv) = if along_u { (cu + h, cv) } else { (cu, cv + h) };
        let w = omega.eval(nu, nv)?.f;
        if (k + 1) % REPROJECT_EVERY == 0 {
            y = reproject(&y, w)?;
        }
        let f = to_frame(&y);
        let (i, j) = site(k + 1);
        let threshold = 1e-8 * (2.0 * w.exp()).sqrt();
        if f.du.norm() < threshold || f.dv.norm() < threshold {
            return Err(Error::BranchPoint {
                i,
                j,
                norm: f.du.norm().min(f.dv.norm()),
            });
        }
        let d = f.defects(w);
        if d.max() > DRIFT_FAIL {
            return Err(Error::IntegrationFailure(format!("frame drift {:e} at grid site ({i}, {j})", d.max())));
        }
        out.push(f);
    }
    Ok(out)
}

/// Frames of a minimal surface sampled on a grid.
#[derive(Clone, Debug)]
pub struct SurfaceGrid {
    pub spec: GridSpec,
    /// Row-major in v, like [`ScalarField2D`].
    pub frames: Vec<FrameSample>,
    pub omega: Vec<f64>,
}

impl SurfaceGrid {
    pub fn at(&self, i: usize, j: usize) -> &FrameSample {
        &self.frames[self.spec.index(i, j)]
    }

    pub fn from_fn(spec: GridSpec, omega: impl Fn(f64, f64) -> f64, f: impl Fn(f64, f64) -> FrameSample) -> Self {
        let mut frames = Vec::with_capacity(spec.len());
        let mut om = Vec::with_capacity(spec.len());
        for j in 0..spec.n_v {
            for i in 0..spec.n_u {
                frames.push(f(spec.u(i), spec.v(j)));
                om.push(omega(spec.u(i), spec.v(j)));
            }
        }
        SurfaceGrid { spec, frames, omega: om }
    }

    /// Largest invariant violation over the grid.
    pub fn max_defects(&self) -> FrameDefects {
        let mut d = FrameDefects::default();
        for (f, &w) in self.frames.iter().zip(&self.omega) {
            let e = f.defects(w);
            d.unit = d.unit.max(e.unit);
            d.ortho = d.ortho.max(e.ortho);
            d.metric = d.metric.max(e.metric);
            d.det = d.det.max(e.det);
        }
        d
    }
}

/// Reconstructs the surface with conformal factor `omega` from its frame at
/// the grid origin, by RK4 up the first column and then along every row.
pub fn integrate_surface(omega: &ScalarField2D, seed: FrameSample) -> Result<SurfaceGrid> {
    integrate_surface_with(&Sampled::new(omega.clone()), omega.spec, seed)
}

/// As [`integrate_surface`], with ω given by any smooth provider.
pub fn integrate_surface_with(omega: &dyn SmoothField, spec: GridSpec, seed: FrameSample) -> Result<SurfaceGrid> {
    spec.validate()?;
    seed.check(omega.eval(spec.u0, spec.v0)?.f)?;
    let column = integrate_line(omega, seed, spec.u0, spec.v0, spec.hv, spec.n_v - 1, false, |k| (0, k))?;
    let rows: Vec<Vec<FrameSample>> = column
        .par_iter()
        .enumerate()
        .map(|(j, start)| integrate_line(omega, *start, spec.u0, spec.v(j), spec.hu, spec.n_u - 1, true, |k| (k, j)))
        .collect::<Result<_>>()?;
    let mut frames = Vec::with_capacity(spec.len());
    let mut om = Vec::with_capacity(spec.len());
    for (j, row) in rows.into_iter().enumerate() {
        for (i, f) in row.into_iter().enumerate() {
            frames.push(f);
            om.push(omega.eval(spec.u(i), spec.v(j))?.f);
        }
    }
    Ok(SurfaceGrid { spec, frames, omega: om })
}

/// Largest `|p|` discrepancy between the grid (column first, then rows) and
/// the opposite order (row first, then columns).
pub fn surface_loop_defect(omega: &dyn SmoothField, spec: GridSpec, seed: FrameSample) -> Result<f64> {
    let grid = integrate_surface_with(omega, spec, seed)?;
    let row = integrate_line(omega, seed, spec.u0, spec.v0, spec.hu, spec.n_u - 1, true, |k| (k, 0))?;
    let cols: Vec<Vec<FrameSample>> = row
        .par_iter()
        .enumerate()
        .map(|(i, start)| integrate_line(omega, *start, spec.u(i), spec.v0, spec.hv, spec.n_v - 1, false, |k| (i, k)))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (i, col) in cols.iter().enumerate() {
        for (j, f) in col.iter().enumerate() {
            worst = worst.max(f.p.max_abs_diff(grid.at(i, j).p));
        }
    }
    Ok(worst)
}

/// A sampled surface evaluated off-grid by short integrations from a node.
pub struct IntegratedSurface {
    grid: SurfaceGrid,
    omega: Box<dyn SmoothField>,
}

impl IntegratedSurface {
    pub fn new(grid: SurfaceGrid, omega: Box<dyn SmoothField>) -> Self {
        IntegratedSurface { grid, omega }
    }

    /// Integrates `omega` from `seed` on `spec` and wraps the result.
    pub fn build(omega: Box<dyn SmoothField>, spec: GridSpec, seed: FrameSample) -> Result<Self> {
        let grid = integrate_surface_with(omega.as_ref(), spec, seed)?;
        Ok(IntegratedSurface { grid, omega })
    }

    pub fn grid(&self) -> &SurfaceGrid {
        &self.grid
    }

    fn nearest(&self, u: f64, v: f64) -> (usize, usize) {
        let s = self.grid.spec;
        let i = ((u - s.u0) / s.hu).round().clamp(0.0, (s.n_u - 1) as f64) as usize;
        let j = ((v - s.v0) / s.hv).round().clamp(0.0, (s.n_v - 1) as f64) as usize;
        (i, j)
    }

    fn walk(&self, from: FrameSample, u: f64, v: f64, d: f64, along_u: bool) -> Result<FrameSample> {
        let s = self.grid.spec;
        let h_max = if along_u { s.hu } else { s.hv } / 4.0;
        let n = (d.abs() / h_max).ceil().max(1.0) as usize;
        let h = d / n as f64;
        let mut y = to_state(&from);
        for k in 0..n {
            let (cu, cv) = if along_u { (u + k as f64 * h, v) } else { (u, v + k as f64 * h) };
            y = rk4_step(self.omega.as_ref(), &y, cu, cv, h, along_u)?;
        }
        Ok(to_frame(&y))
    }
}

impl SurfaceMap for IntegratedSurface {
    fn frame(&self, u: f64, v: f64) -> Result<FrameSample> {
        self.frame_near((u, v), u, v)
    }

    fn frame_near(&self, anchor: (f64, f64), u: f64, v: f64) -> Result<FrameSample> {
        let (i, j) = self.nearest(anchor.0, anchor.1);
        let s = self.grid.spec;
        let (ui, vj) = (s.u(i), s.v(j));
        let mut f = *self.grid.at(i, j);
        if u != ui {
            f = self.walk(f, ui, vj, u - ui, true)?;
        }
        if v != vj {
            f = self.walk(f, u, vj, v - vj, false)?;
        }
        Ok(f)
    }

    fn omega(&self, u: f64, v: f64) -> Result<Jet> {
        self.omega.eval(u, v)
    }

    fn provenance(&self) -> Provenance {
        self.omega.provenance()
    }
}

/// Second fundamental form components in the direction of N.
#[derive(Clone, Debug)]
pub struct SecondForm {
    pub spec: GridSpec,
    pub sigma_uu: Vec<f64>,
    pub sigma_uv: Vec<f64>,
    pub sigma_vv: Vec<f64>,
    pub mean_curvature: Vec<f64>,
}

impl SecondForm {
    /// Largest |H| over computed sites.
    pub fn max_mean_curvature(&self) -> f64 {
        self.mean_curvature.iter().filter(|x| x.is_finite()).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest deviation of `σ(∂z,∂z) = ¼(σ_uu − σ_vv − 2Iσ_uv)` from `target`.
    pub fn max_hopf_deviation(&self, target: f64) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..self.sigma_uu.len() {
            if self.sigma_uu[k].is_finite() {
                let re = (self.sigma_uu[k] - self.sigma_vv[k]) / 4.0 - target;
                let im = self.sigma_uv[k] / 2.0;
                m = m.max(re.hypot(im));
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        [&self.sigma_uu, &self.sigma_uv, &self.sigma_vv]
            .iter()
            .flat_map(|v| v.iter())
            .filter(|x| x.is_finite())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

const D1_4: [(i64, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const D2_4: [(i64, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 16.0 / 12.0),
    (0, -30.0 / 12.0),
    (1, 16.0 / 12.0),
    (2, -1.0 / 12.0),
];
const D1_2: [(i64, f64); 2] = [(-1, -0.5), (1, 0.5)];
const D2_2: [(i64, f64); 3] = [(-1, 1.0), (0, -2.0), (1, 1.0)];

/// `σ_ab = ⟨∂a∂b p, N⟩` by centered differences: fourth order where two
/// neighbours exist on each side, second order one node from the boundary.
/// Boundary sites are NaN.
pub fn second_form(grid: &SurfaceGrid) -> SecondForm {
    let s = grid.spec;
    let n = s.len();
    let mut out = SecondForm {
        spec: s,
        sigma_uu: vec![f64::NAN; n],
        sigma_uv: vec![f64::NAN; n],
        sigma_vv: vec![f64::NAN; n],
        mean_curvature: vec![f64::NAN; n],
    };
    let p = |i: i64, j: i64| grid.at(i as usize, j as usize).p;
    for j in 1..s.n_v - 1 {
        for i in 1..s.n_u - 1 {
            let wide = i >= 2 && j >= 2 && i + 2 < s.n_u && j + 2 < s.n_v;
            let (d1, d2): (&[(i64, f64)], &[(i64, f64)]) = if wide { (&D1_4, &D2_4) } else { (&D1_2, &D2_2) };
            let (ii, jj) = (i as i64, j as i64);
            let mut puu = Quat::ZERO;
            let mut pvv = Quat::ZERO;
            let mut puv = Quat::ZERO;
            for &(o, c) in d2 {
                puu += p(ii + o, jj) * c;
                pvv += p(ii, jj + o) * c;
            }
            for &(a, ca) in d1 {
                for &(b, cb) in d1 {
                    puv += p(ii + a, jj + b) * (ca * cb);
                }
            }
            let nrm = grid.at(i, j).n;
            let k = s.index(i, j);
            let suu = puu.dot(nrm) / (s.hu * s.hu);
            let svv = pvv.dot(nrm) / (s.hv * s.hv);
            let suv = puv.dot(nrm) / (s.hu * s.hv);
            out.sigma_uu[k] = suu;
            out.sigma_vv[k] = svv;
            out.sigma_uv[k] = suv;
            out.mean_curvature[k] = (suu + svv) / (2.0 * 2.0 * grid.omega[k].exp());
        }
    }
    out
}

/// Interior residual `Δω + 8 sinh ω`; boundary sites are NaN.
pub fn sinh_gordon_residual(omega: &ScalarField2D) -> ScalarField2D {
    pde_residual(EquationKind::SinhGordon, omega, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Constant;

    fn complex_mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
    }

    #[test]
    fn clifford_examples() {
        for sign in [NormalSign::Minus, NormalSign::Plus] {
            let f = clifford_patch(0.0, 0.0, sign);
            assert_eq!(f.p, Quat::ONE);
            for &(u, v) in &[(0.3, -0.2), (1.7, 2.9), (-4.0, 0.5)] {
                let f = clifford_patch(u, v, sign);
                assert!((f.du.norm_sq() - 2.0).abs() < 1e-12);
                assert!(f.defects(0.0).within(), "{:?}", f.defects(0.0));
            }
        }
        assert_eq!(FrameSample::standard_seed(0.0), clifford_patch(0.0, 0.0, NormalSign::Minus));
    }

    #[test]
    fn clifford_derivatives_match_differences() {
        let (u, v, h) = (0.4, -0.3, 1e-6);
        let f = clifford_patch(u, v, NormalSign::Minus);
        let pu = (clifford_patch(u + h, v, NormalSign::Minus).p - clifford_patch(u - h, v, NormalSign::Minus).p) / (2.0 * h);
        let pv = (clifford_patch(u, v + h, NormalSign::Minus).p - clifford_patch(u, v - h, NormalSign::Minus).p) / (2.0 * h);
        assert!(pu.max_abs_diff(f.du) < 1e-9);
        assert!(pv.max_abs_diff(f.dv) < 1e-9);
    }

    /// The real frame equations agree with the complex Gauss formulas
    /// `p_zz = ω_z p_z − N`, `p_{z z̄} = −e^ω p`, `N_z = e^{−ω} p_{z̄}`
    /// (with `σ(∂z,∂z) = −1`, `⟨p_z, p_z̄⟩ = e^ω`), evaluated in complex
    /// arithmetic on random data.
    #[test]
    fn real_expansion_matches_complex_gauss_formulas() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut q = || {
                Quat::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            };
            let y = [q(), q(), q(), q()];
            let w = Jet { f: 0.3, fu: -0.7, fv: 1.1 };
            let ru = frame_rhs(&y, &w, true);
            let rv = frame_rhs(&y, &w, false);
            let (p, pu, pv, n) = (y[0], y[1], y[2], y[3]);
            let (puu, puv, pvv) = (ru[1], ru[2], rv[2]);
            let e = w.f.exp();
            let wz = (w.fu / 2.0, -w.fv / 2.0);
            for c in 0..4 {
                let pc = |x: Quat| x.to_array()[c];
                // p_zz = ¼(p_uu − p_vv − 2I p_uv)
                let pzz = ((pc(puu) - pc(pvv)) / 4.0, -pc(puv) / 2.0);
                let pz = (pc(pu) / 2.0, -pc(pv) / 2.0);
                let wzpz = complex_mul(wz, pz);
                assert!((pzz.0 - (wzpz.0 - pc(n))).abs() < 1e-12);
                assert!((pzz.1 - wzpz.1).abs() < 1e-12);
                // p_{z z̄} = ¼(p_uu + p_vv)
                assert!(((pc(puu) + pc(pvv)) / 4.0 + e * pc(p)).abs() < 1e-12);
                // N_z = ½(N_u − I N_v) = e^{−ω} p_z̄
                let nz = (pc(ru[3]) / 2.0, -pc(rv[3]) / 2.0);
                assert!((nz.0 - pc(pu) / (2.0 * e)).abs() < 1e-12);
                assert!((nz.1 - pc(pv) / (2.0 * e)).abs() < 1e-12);
            }
            // mixed partials agree: ∂v of the u-equations equals ∂u of the v-equations at first order
            assert!((ru[2] - rv[1]).max_abs_diff(Quat::ZERO) < 1e-15);
        }
    }

    #[test]
    fn geodesic_sphere_examples() {
        let f = geodesic_sphere_patch(Quat::ONE).unwrap();
        assert_eq!(f.p, Quat::I);
        let x = (ImQuat::K * std::f64::consts::FRAC_PI_4).exp();
        let f = geodesic_sphere_patch(x).unwrap();
        assert!(f.p.max_abs_diff(Quat::J) < 1e-15);
        assert!(f.defects(GEODESIC_SPHERE_OMEGA).within(), "{:?}", f.defects(GEODESIC_SPHERE_OMEGA));
        assert!(f.n.max_abs_diff(-Quat::ONE) < 1e-15);
        assert!(geodesic_sphere_patch(Quat::new(1.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn geodesic_sphere_grid_is_totally_geodesic() {
        let spec = GridSpec::new(9, 9, 0.1, 0.2, 0.05, 0.05).unwrap();
        let x = |u: f64, v: f64| (ImQuat::K * u).exp() * (ImQuat::J * v).exp();
        let grid = SurfaceGrid::from_fn(spec, |_, _| GEODESIC_SPHERE_OMEGA, |u, v| geodesic_sphere_patch(x(u, v)).unwrap());
        let sf = second_form(&grid);
        assert!(sf.max_abs() < 1e-8);
    }

    #[test]
    fn clifford_second_form() {
        let spec = GridSpec::new(21, 21, -0.3, 0.1, 1e-2, 1e-2).unwrap();
        for (sign, target) in [(NormalSign::Minus, -1.0), (NormalSign::Plus, 1.0)] {
            let grid = SurfaceGrid::from_fn(spec, |_, _| 0.0, |u, v| clifford_patch(u, v, sign));
            let sf = second_form(&grid);
            assert!(sf.max_mean_curvature() < 1e-8);
            // second-order stencils next to the boundary
            assert!(sf.max_hopf_deviation(target) < 1e-3);
            for j in 2..spec.n_v - 2 {
                for i in 2..spec.n_u - 2 {
                    let k = spec.index(i, j);
                    let re = (sf.sigma_uu[k] - sf.sigma_vv[k]) / 4.0 - target;
                    assert!(re.hypot(sf.sigma_uv[k] / 2.0) < 1e-6);
                }
            }
        }
    }

    #[test]
    fn integrate_reproduces_clifford() {
        let spec = GridSpec::new(33, 33, 0.0, 0.0, 1e-2, 1e-2).unwrap();
        let omega = ScalarField2D::constant(spec, 0.0).unwrap();
        let grid = integrate_surface(&omega, clifford_patch(0.0, 0.0, NormalSign::Minus)).unwrap();
        let mut err: f64 = 0.0;
        for j in 0..spec.n_v {
            for i in 0..spec.n_u {
                let e = clifford_patch(spec.u(i), spec.v(j), NormalSign::Minus);
                let f = grid.at(i, j);
                err = err.max(f.p.max_abs_diff(e.p)).max(f.du.max_abs_diff(e.du)).max(f.n.max_abs_diff(e.n));
            }
        }
        assert!(err < 1e-8, "{err}");
        assert!(grid.max_defects().within());
    }

    #[test]
    fn integrate_rejects_bad_seed() {
        let spec = GridSpec::new(5, 5, 0.0, 0.0, 1e-2, 1e-2).unwrap();
        let omega = ScalarField2D::constant(spec, 0.5).unwrap();
        let r = integrate_surface(&omega, clifford_patch(0.0, 0.0, NormalSign::Minus));
        assert!(matches!(r, Err(Error::Domain(_))));
        let ok = integrate_surface(&omega, FrameSample::standard_seed(0.5)).unwrap();
        assert!(ok.max_defects().within());
    }

    /// `ω(u)` with `ω'' = −8 sinh ω`, `ω(0) = 0.3`, `ω'(0) = 0`: a sinh-Gordon
    /// solution whose coordinate flows do not commute. Tabulated by fine RK4
    /// and read back with cubic Hermite interpolation.
    struct TravellingWave {
        h: f64,
        table: Vec<(f64, f64)>,
    }

    impl TravellingWave {
        fn new() -> Self {
            let h = 1e-4;
            let f = |y: (f64, f64)| (y.1, -8.0 * y.0.sinh());
            let mut y = (0.3, 0.0);
            let mut table = vec![y];
            for _ in 0..20000 {
                let k1 = f(y);
                let k2 = f((y.0 + h / 2.0 * k1.0, y.1 + h / 2.0 * k1.1));
                let k3 = f((y.0 + h / 2.0 * k2.0, y.1 + h / 2.0 * k2.1));
                let k4 = f((y.0 + h * k3.0, y.1 + h * k3.1));
                y = (
                    y.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                    y.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                );
                table.push(y);
            }
            TravellingWave { h, table }
        }
    }

    impl SmoothField for TravellingWave {
        fn eval(&self, u: f64, _v: f64) -> Result<Jet> {
            let x = u / self.h;
            let k = (x.floor() as usize).min(self.table.len() - 2);
            let s = x - k as f64;
            let ((f0, d0), (f1, d1)) = (self.table[k], self.table[k + 1]);
            let (m0, m1) = (d0 * self.h, d1 * self.h);
            let f = (2.0 * s.powi(3) - 3.0 * s * s + 1.0) * f0
                + (s.powi(3) - 2.0 * s * s + s) * m0
                + (-2.0 * s.powi(3) + 3.0 * s * s) * f1
                + (s.powi(3) - s * s) * m1;
            let df = (6.0 * s * s - 6.0 * s) * f0 + (3.0 * s * s - 4.0 * s + 1.0) * m0 + (-6.0 * s * s + 6.0 * s) * f1 + (3.0 * s * s - 2.0 * s) * m1;
            Ok(Jet { f, fu: df / self.h, fv: 0.0 })
        }

        fn provenance(&self) -> Provenance {
            Provenance::Analytic
        }
    }

    #[test]
    fn loop_defect_shrinks_with_step() {
        let w = TravellingWave::new();
        let d = |n: usize| {
            let h = 0.32 / (n - 1) as f64;
            let spec = GridSpec::new(n, n, 0.0, 0.0, h, h).unwrap();
            surface_loop_defect(&w, spec, FrameSample::standard_seed(0.3)).unwrap()
        };
        let (a, b) = (d(9), d(17));
        assert!(a > 1e-12 && a / b >= 4.0, "{a} {b}");
    }

    #[test]
    fn integrated_surface_off_grid_matches_closed_form() {
        let spec = GridSpec::new(33, 33, 0.0, 0.0, 1e-2, 1e-2).unwrap();
        let s = IntegratedSurface::build(Box::new(Constant(0.0)), spec, FrameSample::standard_seed(0.0)).unwrap();
        let f = s.frame(0.123, 0.2049).unwrap();
        let e = clifford_patch(0.123, 0.2049, NormalSign::Minus);
        let err = f.p.max_abs_diff(e.p).max(f.du.max_abs_diff(e.du));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn sinh_gordon_residual_examples() {
        let spec = GridSpec::new(6, 5, 0.0, 0.0, 0.1, 0.1).unwrap();
        let r = sinh_gordon_residual(&ScalarField2D::constant(spec, 0.0).unwrap());
        assert_eq!(r.sup_norm(), 0.0);
        assert!(r.at(0, 0).is_nan());
        let c = 0.37;
        let r = sinh_gordon_residual(&ScalarField2D::constant(spec, c).unwrap());
        assert!((r.at(2, 2) - 8.0 * c.sinh()).abs() < 1e-12);
    }
}
