use thiserror::Error;

/// Errors raised across the library.
///
/// [`Error::exit_code`] maps each variant to the CLI convention: 2 for
/// configuration and domain problems, 1 for numerical tolerance failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("outside admissible set V at (t={t}, u={u}, v={v}): e^(w+mu)-2-2cos4t = {value}")]
    OutsideV { t: f64, u: f64, v: f64, value: f64 },

    #[error("branch error at (t={t}, u={u}, v={v}): denominator {value} too small")]
    Branch { t: f64, u: f64, v: f64, value: f64 },

    #[error("no admissible sites: {0}")]
    NoAdmissibleSites(String),

    #[error("newton did not converge after {iterations} iterations, residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("branch point at grid site ({i}, {j}): |p_u| = {norm:e}")]
    BranchPoint { i: usize, j: usize, norm: f64 },

    #[error("path dependence: loop defect {defect:e} at site {site:?} exceeds {tol:e}")]
    PathDependence { site: [usize; 3], defect: f64, tol: f64 },

    #[error("frame quality: tangency defect {defect:e} exceeds {tol:e}")]
    FrameQuality { defect: f64, tol: f64 },

    #[error("structure violation: commutator norm {commutator:e} of A and B exceeds {tol:e}")]
    StructureViolation { commutator: f64, tol: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. }
            | Error::IntegrationFailure(_)
            | Error::BranchPoint { .. }
            | Error::PathDependence { .. }
            | Error::FrameQuality { .. }
            | Error::StructureViolation { .. } => 1,
            _ => 2,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::OutsideV { .. } => "outside-v",
            Error::Branch { .. } => "branch",
            Error::NoAdmissibleSites(_) => "no-admissible-sites",
            Error::NoConvergence { .. } => "no-convergence",
            Error::IntegrationFailure(_) => "integration-failure",
            Error::BranchPoint { .. } => "branch-point",
            Error::PathDependence { .. } => "path-dependence",
            Error::FrameQuality { .. } => "frame-quality",
            Error::StructureViolation { .. } => "structure-violation",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
