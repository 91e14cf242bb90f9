/// Error taxonomy shared by every operation in the crate.
///
/// The CLI maps these onto process exit codes: parameter errors exit 1,
/// numerical failures (including percentile saturation) exit 2, resource
/// guards exit 3.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Rejected input: out-of-range parameter, unstable configuration,
    /// malformed file.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A computation produced values outside its certified range or an
    /// internal solve failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested CDF never exceeds the target probability on the grid.
    /// Callers that can extend the grid may retry with a larger horizon.
    #[error(
        "percentile saturated: CDF attains at most {max_attained} over the grid, \
         which does not exceed the target {target}"
    )]
    Saturated { target: f64, max_attained: f64 },

    /// Work-size guard tripped (state space, grid length, run length).
    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

impl Error {
    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 1,
            Error::Numerical(_) | Error::Saturated { .. } => 2,
            Error::Resource(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
