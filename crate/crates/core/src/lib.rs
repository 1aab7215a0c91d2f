//! Structured backward errors for three-by-three block saddle point systems.
//!
//! A system here is
//!
//! ```text
//! [ A   B1ᵀ  0  ] [x]   [f]
//! [ B2  -C   D1ᵀ] [y] = [g]
//! [ 0   D2   E  ] [z]   [h]
//! ```
//!
//! and the crate answers one question about an approximate solution `w = (x, y, z)`:
//! how far must the data move, while keeping its block structure, for `w` to be exact?

pub mod assembly;
pub mod be;
pub mod error;
pub mod problems;
pub mod solvers;
pub mod symvec;
pub mod system;

pub use assembly::{assemble, AssembledJ, Segment, SegmentKind};
pub use be::{
    analyze, extract_perturbation, min_norm_solve, rigal_term1, rigal_term2, structured_be,
    unstructured_be, verify_perturbation, BeReport, MinNormSolution, SolveMethod, StructuredBe,
};
pub use error::{Error, Result, StructureViolation};
pub use system::{
    residuals, validate_case, ApproxSolution, Block, BlockSystem, Perturbation, Residuals,
    Sparsity, StructureCase, Weights,
};
