//! Test-problem generators and on-disk formats for block systems.

mod generators;
mod manifest;
pub mod mmio;

pub use generators::{
    example1, example1_reference_perturbation, example2, example3, example4, example4_with, example5, example6,
    LaplacianScaling,
};
pub use manifest::{load, read_perturbation, read_solution, store, write_perturbation, write_solution, ProblemManifest, RhsMode, RhsSpec};
