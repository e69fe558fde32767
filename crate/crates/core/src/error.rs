use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (minimum eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("singular block for base-station subset {subset:?} (minimum eigenvalue {min_eig:.3e})")]
    SingularBlock { subset: Vec<usize>, min_eig: f64 },

    #[error("invalid subset {0:?}")]
    InvalidSubset(Vec<usize>),

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("{what} limited to {cap}, got {got}")]
    CapExceeded {
        what: &'static str,
        cap: usize,
        got: usize,
    },

    #[error("no strictly feasible starting point: {0}")]
    NoFeasibleStart(String),

    #[error("problem infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
