//! Dense Gaussian elimination with partial pivoting and GMRES with pluggable stopping tests.

mod gmres;
mod lu;

pub use gmres::{gmres, CriterionKind, GmresOptions, IterationRecord, SolveHistory, TerminationCriterion};
pub use lu::{gep_solve, Lu};
