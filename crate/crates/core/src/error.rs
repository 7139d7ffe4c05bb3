use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("node index {0} out of range (expected 1..=6)")]
    NodeIndex(usize),

    #[error("infinite stiffness unsupported in inverse form (joint {joint} has zero compliance)")]
    ZeroCompliance { joint: usize },

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("buckling-like singularity: (K_theta - H) is not invertible")]
    Buckling,

    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Diverged { iterations: usize, residual: f64 },

    #[error("rank deficient problem: {context}; unidentifiable directions: {null_directions:?}")]
    RankDeficient {
        context: String,
        null_directions: Vec<Vec<f64>>,
    },

    #[error("angle direction mismatch: the best fit needs a reflection; negate the angles")]
    AngleDirectionMismatch,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Exit-code class used by the CLI: usage/input problems vs numerical failures.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularConfiguration(_)
                | Error::Buckling
                | Error::Diverged { .. }
                | Error::RankDeficient { .. }
                | Error::AngleDirectionMismatch
                | Error::DegenerateGeometry(_)
                | Error::ZeroCompliance { .. }
        )
    }
}
