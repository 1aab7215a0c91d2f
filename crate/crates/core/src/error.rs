use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {block}: expected {expected}, found {found}")]
    Dimension {
        block: String,
        expected: String,
        found: String,
    },
    #[error("system does not satisfy the structure of case {0}")]
    CaseMismatch(crate::system::StructureCase),
    #[error("weight for {0} must be positive")]
    ZeroDataWeight(&'static str),
    #[error("weight for {block} must be finite and non-negative, got {value}")]
    InvalidWeight { block: &'static str, value: f64 },
    #[error("backward error denominator is zero")]
    ZeroDenominator,
    #[error("right-hand side is zero")]
    ZeroRhs,
    #[error("constraint matrix is numerically rank deficient (diagnostic {0:e})")]
    RankDeficient(f64),
    #[error("singular pivot in column {0}")]
    SingularPivot(usize),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("perturbation violates structure: {0}")]
    Structure(StructureViolation),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(block: impl Into<String>, expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::Dimension {
            block: block.into(),
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }

    pub(crate) fn len(block: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            block: block.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Symmetry,
    Sparsity,
    Equality,
}

/// A named structural defect in a perturbation, e.g. `dA symmetry`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureViolation {
    pub block: &'static str,
    pub kind: ViolationKind,
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::Symmetry => "symmetry",
            ViolationKind::Sparsity => "sparsity",
            ViolationKind::Equality => "equality",
        };
        write!(f, "{} {}", self.block, kind)
    }
}
