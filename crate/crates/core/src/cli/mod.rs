//! Command-line front end.
//!
//! Every command ends with one line on stdout (`ok …`) or stderr
//! (`fail …` / `error kind=… …`) that scripts can parse. Exit status is 0
//! when every check is within tolerance, 1 on a tolerance failure and 2 on
//! configuration or domain errors.

pub mod config;
pub mod io;

use std::f64::consts::PI;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::builder::{build, Axis, BuildOptions, BuiltImmersion, Case1, Case2, Case3, Construction, Grid3, Stepper};
use crate::error::{Error, Result};
use crate::field::{fmt_f64, parse_f64, Constant, GridSpec, LiouvilleAnalytic, Sampled, ScalarField2D, SmoothField};
use crate::nk::structure_check;
use crate::pde::{liouville_analytic, solve_elliptic, Dirichlet, EllipticProblem, EquationKind, InitialGuess};
use crate::quat::Quat;
use crate::surface::{CliffordSurface, FrameSample, IntegratedSurface, NormalSign, SurfaceMap};
use crate::verify::{verify, Immersion, Thresholds, VerifyOptions};
use config::{split_source, RunConfig};
use io::{to_obj, ImmersionTable};

#[derive(Parser, Debug)]
#[command(name = "nk-lagrangian", version, about = "Lagrangian submanifolds of the nearly Kähler S³×S³")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Random-sample check of the structure identities.
    CheckStructure {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Solves a Dirichlet problem and writes the field.
    SolvePde {
        #[arg(long)]
        kind: EquationKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// `key=value` overrides applied after the config file.
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Builds an immersion on a grid and writes it as CSV.
    Build {
        #[arg(long)]
        case: u8,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Verifies an immersion CSV, or a build config rebuilt in memory.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-4)]
        fd_step: f64,
        #[arg(long, default_value_t = 64)]
        max_sites: usize,
    },
    /// Re-exports an immersion CSV as CSV or as an OBJ mesh of the p-surface.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
        /// Which t slice the mesh is taken at.
        #[arg(long, default_value_t = 0)]
        t_index: usize,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ExportFormat {
    Csv,
    Obj,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome { code, line }) => {
            if code == 0 {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
            code
        }
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            e.exit_code()
        }
    }
}

struct Outcome {
    code: i32,
    line: String,
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::CheckStructure { samples, seed, tol } => check_structure(samples, seed, tol),
        Command::SolvePde {
            kind,
            config,
            out,
            overrides,
        } => {
            let (cfg, base) = load(config.as_deref(), &overrides, PDE_KEYS)?;
            solve_pde(kind, &cfg, &base, &out)
        }
        Command::Build {
            case,
            config,
            out,
            overrides,
        } => {
            let (cfg, base) = load(config.as_deref(), &overrides, BUILD_KEYS)?;
            run_build(case, &cfg, &base, &out)
        }
        Command::Verify {
            input,
            report,
            fd_step,
            max_sites,
        } => run_verify(&input, report.as_deref(), fd_step, max_sites),
        Command::Export { input, format, out, t_index } => {
            let table = ImmersionTable::from_csv(&std::fs::read_to_string(&input)?)?;
            let text = match format {
                ExportFormat::Csv => table.to_csv(),
                ExportFormat::Obj => to_obj(&table.to_sampled()?, t_index)?,
            };
            std::fs::write(&out, text)?;
            Ok(Outcome {
                code: 0,
                line: format!("ok export sites={} out={}", table.rows.len(), out.display()),
            })
        }
    }
}

fn load(path: Option<&Path>, overrides: &[String], keys: &'static [&'static str]) -> Result<(RunConfig, PathBuf)> {
    let (mut cfg, base) = match path {
        Some(p) => (RunConfig::read(p, keys)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RunConfig::new(keys), PathBuf::new()),
    };
    for o in overrides {
        cfg.set(o)?;
    }
    Ok((cfg, base))
}

fn check_structure(samples: usize, seed: u64, tol: f64) -> Result<Outcome> {
    if samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let r = structure_check(samples, seed);
    for (name, v) in r.entries() {
        println!("{name}={}", fmt_f64(v));
    }
    let worst = r.max_violation();
    let code = if worst <= tol { 0 } else { 1 };
    let verdict = if code == 0 { "ok" } else { "fail" };
    Ok(Outcome {
        code,
        line: format!(
            "{verdict} check-structure samples={samples} seed={seed} max_violation={} tol={}",
            fmt_f64(worst),
            fmt_f64(tol)
        ),
    })
}

const PDE_KEYS: &[&str] = &[
    "n_u", "n_v", "u_min", "u_max", "v_min", "v_max", "boundary", "source", "tol", "max_iter", "initial",
];

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_param(arg: &str, name: &str) -> Result<f64> {
    let v = arg
        .strip_prefix(name)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::Config(format!("expected '{name}=<value>', got {arg:?}")))?;
    parse_f64(v).map_err(|_| Error::Config(format!("{name}: not a number: {v:?}")))
}

fn solve_pde(kind: EquationKind, cfg: &RunConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let spec = GridSpec::spanning(
        cfg.usize_or("n_u", 33)?,
        cfg.usize_or("n_v", 33)?,
        (cfg.f64_or("u_min", -0.5)?, cfg.f64_or("u_max", 0.5)?),
        (cfg.f64_or("v_min", -0.5)?, cfg.f64_or("v_max", 0.5)?),
    )?;
    let boundary = cfg.get("boundary").unwrap_or("constant:0");
    let dirichlet = match split_source(boundary) {
        ("constant", x) => Dirichlet::constant(&spec, parse_f64(x).map_err(|_| Error::Config(format!("boundary: bad constant {x:?}")))?),
        ("liouville", arg) => Dirichlet::from_field(&liouville_analytic(parse_param(arg, "c")?, &spec)?),
        ("file", path) => {
            let f = ScalarField2D::read(&resolve(base, path))?;
            if f.spec != spec {
                return Err(Error::Config("boundary file grid differs from the configured grid".into()));
            }
            Dirichlet::from_field(&f)
        }
        _ => {
            return Err(Error::Config(format!(
                "boundary: expected constant:X, liouville:c=X or file:PATH, got {boundary:?}"
            )))
        }
    };
    let initial = match cfg.get("initial").unwrap_or("zero") {
        "zero" => InitialGuess::Zero,
        "boundary-mean" => InitialGuess::BoundaryMean,
        other => return Err(Error::Config(format!("initial: expected zero or boundary-mean, got {other:?}"))),
    };
    let mut prob = EllipticProblem::new(kind, spec, dirichlet)?.with_initial(initial);
    if let Some(src) = cfg.get("source") {
        match split_source(src) {
            ("file", path) => prob = prob.with_source(ScalarField2D::read(&resolve(base, path))?)?,
            _ => return Err(Error::Config(format!("source: expected file:PATH, got {src:?}"))),
        }
    }
    let field = solve_elliptic(&prob, cfg.f64_or("tol", 1e-10)?, cfg.usize_or("max_iter", 50)?)?;
    field.write(out)?;
    Ok(Outcome {
        code: 0,
        line: format!(
            "ok solve-pde kind={} n_u={} n_v={} out={}",
            kind.name(),
            spec.n_u,
            spec.n_v,
            out.display()
        ),
    })
}

const BUILD_KEYS: &[&str] = &[
    "omega",
    "mu",
    "beta",
    "epsilon1",
    "h",
    "q0",
    "stepper",
    "normal_sign",
    "t_min",
    "t_max",
    "n_t",
    "u_min",
    "u_max",
    "n_u",
    "v_min",
    "v_max",
    "n_v",
    "case",
];

/// Default `(t, u, v)` windows per case.
fn default_window(case: u8) -> [(f64, f64, usize); 3] {
    match case {
        1 => [(PI / 8.0, 3.0 * PI / 8.0, 17), (0.55, 0.65, 9), (0.55, 0.65, 9)],
        2 => [(0.2, 0.28, 9), (0.3, 0.38, 9), (0.5, 0.58, 9)],
        _ => [(0.0, 0.008, 9), (0.2, 0.208, 9), (0.3, 0.308, 9)],
    }
}

fn parse_quat(s: &str) -> Result<Quat> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [w] => Ok(Quat::new(parse_f64(w)?, 0.0, 0.0, 0.0)),
        [w, x, y, z] => Ok(Quat::new(parse_f64(w)?, parse_f64(x)?, parse_f64(y)?, parse_f64(z)?)),
        _ => Err(Error::Config(format!("expected a quaternion 'w,x,y,z', got {s:?}"))),
    }
    .and_then(|q| q.normalize())
    .map_err(|e| Error::Config(format!("quaternion {s:?}: {e}")))
}

fn sampled_field(base: &Path, path: &str) -> Result<ScalarField2D> {
    ScalarField2D::read(&resolve(base, path))
}

fn surface_from(cfg: &RunConfig, base: &Path) -> Result<Arc<dyn SurfaceMap>> {
    let sign = NormalSign::from_int(cfg.get("normal_sign").map_or(Ok(-1), |s| {
        s.trim_start_matches('+')
            .parse()
            .map_err(|_| Error::Config(format!("normal_sign: {s:?}")))
    })?)?;
    let omega = cfg.get("omega").unwrap_or("zero");
    match split_source(omega) {
        ("zero", "") => Ok(Arc::new(CliffordSurface { sign })),
        ("file", path) => {
            let f = sampled_field(base, path)?;
            let seed = FrameSample::standard_seed(f.at(0, 0));
            let spec = f.spec;
            Ok(Arc::new(IntegratedSurface::build(Box::new(Sampled::new(f)), spec, seed)?))
        }
        _ => Err(Error::Config(format!("omega: expected zero or file:PATH, got {omega:?}"))),
    }
}

/// The construction and grid described by a build config.
pub fn construction_from_config(case: u8, cfg: &RunConfig, base: &Path) -> Result<(Arc<dyn Construction>, Grid3, BuildOptions)> {
    if let Some(c) = cfg.get("case") {
        if c.parse::<u8>().ok() != Some(case) {
            return Err(Error::Config(format!("config says case = {c} but case {case} was requested")));
        }
    }
    let construction: Arc<dyn Construction> = match case {
        1 => {
            let mu_s = cfg.get("mu").unwrap_or("analytic:c=1");
            let mu: Arc<dyn SmoothField> = match split_source(mu_s) {
                ("analytic", arg) => Arc::new(LiouvilleAnalytic::new(parse_param(arg, "c")?)?),
                ("file", path) => Arc::new(Sampled::new(sampled_field(base, path)?)),
                _ => return Err(Error::Config(format!("mu: expected analytic:c=X or file:PATH, got {mu_s:?}"))),
            };
            Arc::new(Case1::new(surface_from(cfg, base)?, mu, cfg.f64_or("epsilon1", 1.0)?)?)
        }
        2 => {
            let b = cfg.get("beta").unwrap_or("fixture");
            let beta: Arc<dyn SmoothField> = match split_source(b) {
                ("fixture", "") => Arc::new(Constant(0.25 * 3f64.ln())),
                ("constant", x) => Arc::new(Constant(parse_f64(x).map_err(|_| Error::Config(format!("beta: bad constant {x:?}")))?)),
                ("file", path) => Arc::new(Sampled::new(sampled_field(base, path)?)),
                _ => return Err(Error::Config(format!("beta: expected fixture, constant:X or file:PATH, got {b:?}"))),
            };
            let h = cfg.get("h").map_or(Ok(Quat::ONE), parse_quat)?;
            Arc::new(Case2::new(beta, h)?)
        }
        3 => Arc::new(Case3::new(surface_from(cfg, base)?)),
        other => return Err(Error::Config(format!("case must be 1, 2 or 3, got {other}"))),
    };
    let w = default_window(case);
    let axis = |name: &str, d: (f64, f64, usize)| -> Result<Axis> {
        Axis::spanning(
            cfg.f64_or(&format!("{name}_min"), d.0)?,
            cfg.f64_or(&format!("{name}_max"), d.1)?,
            cfg.usize_or(&format!("n_{name}"), d.2)?,
        )
    };
    let grid = Grid3::new(axis("t", w[0])?, axis("u", w[1])?, axis("v", w[2])?);
    let stepper: Stepper = cfg.get("stepper").unwrap_or("magnus4").parse()?;
    let q0 = match cfg.get("q0") {
        None | Some("default") => None,
        Some(s) => Some(parse_quat(s)?),
    };
    Ok((construction, grid, BuildOptions { stepper, q0 }))
}

/// Sites whose Lagrangian residual must stay below this for `build` to pass.
const BUILD_LAG_TOL: f64 = 1e-6;

fn build_from(case: u8, cfg: &RunConfig, base: &Path) -> Result<BuiltImmersion> {
    let (c, grid, opts) = construction_from_config(case, cfg, base)?;
    build(c, grid, opts)
}

fn run_build(case: u8, cfg: &RunConfig, base: &Path, out: &Path) -> Result<Outcome> {
    let b = build_from(case, cfg, base)?;
    let table = ImmersionTable::from_grid(&b.grid);
    std::fs::write(out, table.to_csv())?;
    let worst = table
        .rows
        .iter()
        .map(|r| r.lag_residual)
        .fold(0.0f64, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) });
    let loop_c = b.grid.loop_closure.unwrap_or(0.0);
    let code = if worst < BUILD_LAG_TOL { 0 } else { 1 };
    let verdict = if code == 0 { "ok" } else { "fail" };
    Ok(Outcome {
        code,
        line: format!(
            "{verdict} build case={case} sites={} masked={} max_lag_residual={} loop_closure={} out={}",
            table.rows.len(),
            table.masked,
            fmt_f64(worst),
            fmt_f64(loop_c),
            out.display()
        ),
    })
}

fn run_verify(input: &Path, report: Option<&Path>, fd_step: f64, max_sites: usize) -> Result<Outcome> {
    let text = std::fs::read_to_string(input)?;
    let opts = VerifyOptions {
        fd_step,
        ..Default::default()
    };
    opts.validate()?;
    let r = if text.starts_with(io::CSV_HEADER) {
        let s = ImmersionTable::from_csv(&text)?.to_sampled()?;
        let sites = thin(s.verifiable_sites(), max_sites);
        if sites.is_empty() {
            return Err(Error::NoAdmissibleSites(
                "no site has a complete 5-point stencil; the grid needs at least 5 nodes per axis".into(),
            ));
        }
        verify(&s, &sites, &opts)?
    } else {
        let cfg = RunConfig::parse(&text, BUILD_KEYS)?;
        let case = cfg
            .get("case")
            .ok_or_else(|| Error::Config("a build config given to verify needs 'case = N'".into()))?;
        let case = case.parse().map_err(|_| Error::Config(format!("case: {case:?}")))?;
        let base = input.parent().map(Path::to_path_buf).unwrap_or_default();
        let b = build_from(case, &cfg, &base)?;
        let sites = b.verify_sites(max_sites);
        verify(&b as &dyn Immersion, &sites, &opts)?
    };
    let body = r.to_text();
    match report {
        Some(p) => std::fs::write(p, &body)?,
        None => print!("{body}"),
    }
    let failures = r.failures(&Thresholds::default());
    if failures.is_empty() {
        Ok(Outcome {
            code: 0,
            line: format!("ok verify sites={}", r.sites),
        })
    } else {
        let first = r
            .site_errors
            .first()
            .map(|(x, e)| format!(" first_site_error={:?}", format!("{x:?}: {e}")))
            .unwrap_or_default();
        Ok(Outcome {
            code: 1,
            line: format!("fail verify sites={} checks={}{first}", r.sites, failures.join(",")),
        })
    }
}

fn thin(all: Vec<[f64; 3]>, max: usize) -> Vec<[f64; 3]> {
    let stride = all.len().div_ceil(max.max(1)).max(1);
    all.into_iter().step_by(stride).collect()
}
