use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("static equilibrium failed: residual {residual:.3e} N")]
    EquilibriumFailure { residual: f64 },

    #[error("singular geometry: nodes {i} and {j} are {distance:.3e} m apart")]
    SingularGeometry { i: usize, j: usize, distance: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration failed at t = {t:.6e} s: {reason} ({steps} steps, {rejected} rejected)")]
    Integration {
        t: f64,
        reason: String,
        steps: usize,
        rejected: usize,
        /// Last accepted state, kept for post-mortem inspection.
        state: Vec<f64>,
    },

    #[error("faces {0} and {1} are not neighbors")]
    InvalidPair(usize, usize),

    #[error("attitude matrix is not a rotation (orthonormality error {0:.3e})")]
    InvalidAttitude(f64),

    #[error("linear program solver failed: {0}")]
    Solver(String),

    #[error("study aborted: {failed} of {total} samples failed")]
    StudyAborted { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
