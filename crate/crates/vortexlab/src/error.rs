use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("vortex collision{}: {detail}", fmt_time(*.time))]
    Collision { time: Option<f64>, detail: String },
    #[error("boundary approach at t = {time}: {detail}")]
    Boundary { time: f64, detail: String },
    #[error("degenerate vortex strength: {0}")]
    DegenerateStrength(String),
    #[error("nonzero mass: {0}")]
    Mass(String),
    #[error("ill-conditioned moment matrix: {0}")]
    Conditioning(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("stereographic pole: {0}")]
    Pole(String),
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),
    #[error("solvability condition violated: {0}")]
    Solvability(String),
    #[error("characteristic left the domain: {0}")]
    Geometry(String),
    #[error("CFL stability violated: {0}")]
    Stability(String),
    #[error("centroid tracking lost: {0}")]
    Tracking(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("linear solver failure: {0}")]
    Solver(String),
}

fn fmt_time(t: Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl Error {
    /// True for the runtime guards (collision, boundary approach, CFL) as
    /// opposed to invalid input.
    pub fn is_runtime_guard(&self) -> bool {
        matches!(
            self,
            Error::Collision { .. } | Error::Boundary { .. } | Error::Stability(_)
        )
    }
}
