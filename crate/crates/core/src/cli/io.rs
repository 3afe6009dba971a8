//! Immersion CSV and OBJ mesh formats.

use std::fmt::Write as _;

use crate::builder::ImmersionGrid;
use crate::error::{Error, Result};
use crate::field::{fmt_f64, parse_f64};
use crate::nk::NKPoint;
use crate::quat::Quat;
use crate::verify::SampledImmersion;

pub const CSV_HEADER: &str = "u,v,t,p0,p1,p2,p3,q0,q1,q2,q3,Lambda,lag_residual";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub u: f64,
    pub v: f64,
    pub t: f64,
    pub p: Quat,
    pub q: Quat,
    pub lambda: f64,
    pub lag_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImmersionTable {
    pub rows: Vec<Row>,
    pub masked: usize,
}

impl ImmersionTable {
    pub fn from_grid(g: &ImmersionGrid) -> Self {
        let rows = g
            .sites
            .iter()
            .flatten()
            .map(|s| Row {
                t: s.x[0],
                u: s.x[1],
                v: s.x[2],
                p: s.p,
                q: s.q,
                lambda: s.lambda,
                lag_residual: s.lag_residual,
            })
            .collect();
        ImmersionTable { rows, masked: g.masked() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 300);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let fields = [r.u, r.v, r.t]
                .into_iter()
                .chain(r.p.to_array())
                .chain(r.q.to_array())
                .chain([r.lambda, r.lag_residual])
                .map(fmt_f64)
                .collect::<Vec<_>>();
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        let _ = writeln!(s, "# masked: {}", self.masked);
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::Parse(format!("immersion csv must start with '{CSV_HEADER}'")));
        }
        let mut rows = Vec::new();
        let mut masked = None;
        for (n, line) in lines.enumerate() {
            if let Some(rest) = line.strip_prefix("# masked:") {
                masked = Some(
                    rest.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad masked count {rest:?}")))?,
                );
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if masked.is_some() {
                return Err(Error::Parse("data after the masked-count line".into()));
            }
            let f: Vec<f64> = line.split(',').map(parse_f64).collect::<Result<_>>()?;
            if f.len() != 13 {
                return Err(Error::Parse(format!("line {}: expected 13 fields, got {}", n + 2, f.len())));
            }
            rows.push(Row {
                u: f[0],
                v: f[1],
                t: f[2],
                p: Quat::new(f[3], f[4], f[5], f[6]),
                q: Quat::new(f[7], f[8], f[9], f[10]),
                lambda: f[11],
                lag_residual: f[12],
            });
        }
        let masked = masked.ok_or_else(|| Error::Parse("missing '# masked: N' line".into()))?;
        Ok(ImmersionTable { rows, masked })
    }

    /// Recovers the uniform grid and the samples on it.
    pub fn to_sampled(&self) -> Result<SampledImmersion> {
        if self.rows.is_empty() {
            return Err(Error::NoAdmissibleSites("csv has no sites".into()));
        }
        let pick = |r: &Row, a: usize| [r.t, r.u, r.v][a];
        let mut start = [0.0; 3];
        let mut steps = [1.0; 3];
        let mut shape = [1usize; 3];
        for a in 0..3 {
            let mut vals: Vec<f64> = self.rows.iter().map(|r| pick(r, a)).collect();
            vals.sort_by(|x, y| x.total_cmp(y));
            vals.dedup();
            start[a] = vals[0];
            if vals.len() > 1 {
                let step = vals.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                let n = ((vals[vals.len() - 1] - vals[0]) / step).round() as usize + 1;
                for x in &vals {
                    let k = (x - vals[0]) / step;
                    if (k - k.round()).abs() > 1e-6 {
                        return Err(Error::Parse(format!("coordinate {x} is off the uniform grid")));
                    }
                }
                steps[a] = step;
                shape[a] = n;
            }
        }
        let mut points = vec![None; shape[0] * shape[1] * shape[2]];
        for r in &self.rows {
            let i = [0, 1, 2].map(|a| ((pick(r, a) - start[a]) / steps[a]).round() as usize);
            points[(i[2] * shape[1] + i[1]) * shape[0] + i[0]] = Some((NKPoint { p: r.p, q: r.q }, r.lambda));
        }
        Ok(SampledImmersion { start, steps, shape, points })
    }
}

/// Stereographic projection from `(0,0,0,−1)`.
pub fn stereographic(p: Quat) -> [f64; 3] {
    let d = 1.0 + p.z;
    [p.w / d, p.x / d, p.y / d]
}

/// The p-surface at the `t_index`-th t value as an OBJ mesh.
pub fn to_obj(s: &SampledImmersion, t_index: usize) -> Result<String> {
    let [nt, nu, nv] = s.shape;
    if t_index >= nt {
        return Err(Error::Domain(format!("t index {t_index} outside 0..{nt}")));
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# p-surface at t = {}, stereographic projection from (0,0,0,-1)",
        fmt_f64(s.start[0] + t_index as f64 * s.steps[0])
    );
    let mut vid = vec![0usize; nu * nv];
    let mut next = 1;
    for iv in 0..nv {
        for iu in 0..nu {
            if let Some((pt, _)) = s.points[(iv * nu + iu) * nt + t_index] {
                let x = stereographic(pt.p);
                let _ = writeln!(out, "v {} {} {}", fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(x[2]));
                vid[iv * nu + iu] = next;
                next += 1;
            }
        }
    }
    for iv in 0..nv.saturating_sub(1) {
        for iu in 0..nu.saturating_sub(1) {
            let (a, b, c, d) = (
                vid[iv * nu + iu],
                vid[iv * nu + iu + 1],
                vid[(iv + 1) * nu + iu + 1],
                vid[(iv + 1) * nu + iu],
            );
            if a > 0 && b > 0 && c > 0 && d > 0 {
                let _ = writeln!(out, "f {a} {b} {c}");
                let _ = writeln!(out, "f {a} {c} {d}");
            }
        }
    }
    Ok(out)
}
