use std::path::PathBuf;

use anyhow::{bail, Context};
use nalgebra::{DMatrix, DVector};
use sbe_core::problems::{self, LaplacianScaling, RhsMode};
use sbe_core::solvers::{gep_solve, gmres, CriterionKind, GmresOptions, TerminationCriterion};
use sbe_core::{ApproxSolution, BlockSystem, StructureCase};

use crate::settings::Settings;

pub const BUILTINS: &[&str] =
    &["example1", "example2", "example3", "example4", "example4-unit", "example5", "example6", "identity"];

pub struct Problem {
    pub label: String,
    pub sys: BlockSystem,
    /// The structure the problem was built with; `--case` may override it.
    pub case: StructureCase,
    /// An approximate solution shipped with the problem (Examples 1 and 2).
    pub reference: Option<ApproxSolution>,
    /// Whether the exact solution is the all-ones vector.
    pub ones_exact: bool,
}

impl Problem {
    pub fn case(&self, settings: &Settings) -> StructureCase {
        settings.case.unwrap_or(self.case)
    }
}

/// A = I, C = −I, E = I, zero couplings and d = 1, so w = 1 exactly.
pub fn identity_system() -> BlockSystem {
    BlockSystem::new(
        DMatrix::identity(2, 2),
        DMatrix::zeros(1, 2),
        DMatrix::zeros(1, 2),
        -DMatrix::identity(1, 1),
        DMatrix::zeros(1, 1),
        DMatrix::zeros(1, 1),
        DMatrix::identity(1, 1),
        DVector::from_element(2, 1.0),
        DVector::from_element(1, 1.0),
        DVector::from_element(1, 1.0),
    )
    .expect("consistent dimensions")
}

fn builtin(name: &str, s: &Settings) -> anyhow::Result<Problem> {
    let r = s.r.unwrap_or(if name == "example6" { 6 } else { 4 });
    let k = s.k.unwrap_or(10);
    let seed = s.seed.unwrap_or(0);
    if r < 2 && name.starts_with("example4") || r < 2 && name == "example6" {
        bail!("--r must be at least 2");
    }
    if k < 2 && name == "example5" {
        bail!("--k must be at least 2");
    }
    let (label, sys, case, reference, ones_exact) = match name {
        "example1" => {
            let (sys, w) = problems::example1();
            ("example1".to_string(), sys, StructureCase::CaseI, Some(w), false)
        }
        "example2" => {
            let (sys, w) = problems::example2();
            ("example2".to_string(), sys, StructureCase::CaseI, Some(w), false)
        }
        "example3" => ("example3".to_string(), problems::example3(), StructureCase::CaseII, None, false),
        "example4" => (format!("example4(r={r})"), problems::example4(r), StructureCase::CaseI, None, true),
        "example4-unit" => (
            format!("example4-unit(r={r})"),
            problems::example4_with(r, LaplacianScaling::Unit),
            StructureCase::CaseI,
            None,
            true,
        ),
        "example5" => (format!("example5(k={k},seed={seed})"), problems::example5(k, seed), StructureCase::CaseIII, None, true),
        "example6" => (format!("example6(r={r})"), problems::example6(r), StructureCase::CaseI, None, true),
        "identity" => ("identity".to_string(), identity_system(), StructureCase::CaseI, None, true),
        other => bail!("unknown builtin `{other}` (available: {})", BUILTINS.join(", ")),
    };
    Ok(Problem { label, sys, case, reference, ones_exact })
}

pub fn load(s: &Settings) -> anyhow::Result<Problem> {
    match (&s.builtin, &s.manifest) {
        (Some(_), Some(_)) => bail!("give either --builtin or --manifest, not both"),
        (None, None) => bail!("no problem given: use --builtin NAME or --manifest PATH"),
        (Some(name), None) => builtin(name, s),
        (None, Some(path)) => {
            let (sys, man) =
                problems::load(path).with_context(|| format!("loading manifest {}", path.display()))?;
            Ok(Problem {
                label: man.name.clone(),
                sys,
                case: man.case,
                reference: None,
                ones_exact: man.rhs.mode == RhsMode::AllOnesSolution,
            })
        }
    }
}

/// Where the approximate solution comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionSource {
    File(PathBuf),
    Reference,
    Exact,
    Gep,
    Gmres,
}

impl SolutionSource {
    pub fn describe(&self) -> String {
        match self {
            SolutionSource::File(p) => format!("file:{}", p.display()),
            SolutionSource::Reference => "reference".into(),
            SolutionSource::Exact => "exact".into(),
            SolutionSource::Gep => "gep".into(),
            SolutionSource::Gmres => "gmres".into(),
        }
    }
}

pub fn solution_source(s: &Settings, prob: &Problem) -> anyhow::Result<SolutionSource> {
    if let Some(path) = &s.solution {
        if s.solver.is_some() {
            bail!("give either --solution or --solver, not both");
        }
        return Ok(SolutionSource::File(path.clone()));
    }
    Ok(match s.solver.as_deref() {
        None if prob.reference.is_some() => SolutionSource::Reference,
        None | Some("gep") => SolutionSource::Gep,
        Some("reference") => SolutionSource::Reference,
        Some("exact") => SolutionSource::Exact,
        Some("gmres") => SolutionSource::Gmres,
        Some(other) => bail!("unknown solver `{other}` (expected reference, exact, gep or gmres)"),
    })
}

pub fn obtain_solution(s: &Settings, prob: &Problem, src: &SolutionSource) -> anyhow::Result<ApproxSolution> {
    let (n, m, p) = prob.sys.dims();
    match src {
        SolutionSource::File(path) => problems::read_solution(path, n, m, p)
            .with_context(|| format!("reading solution {}", path.display())),
        SolutionSource::Reference => prob
            .reference
            .clone()
            .with_context(|| format!("{} has no reference approximate solution", prob.label)),
        SolutionSource::Exact => {
            if !prob.ones_exact {
                bail!("the exact solution of {} is not known", prob.label);
            }
            Ok(ApproxSolution::new(
                DVector::from_element(n, 1.0),
                DVector::from_element(m, 1.0),
                DVector::from_element(p, 1.0),
            ))
        }
        SolutionSource::Gep => Ok(gep_solve(&prob.sys)?),
        SolutionSource::Gmres => {
            let crit = TerminationCriterion::new(CriterionKind::Term2, s.tol.unwrap_or(1e-13))?;
            let opts = GmresOptions { max_iter: s.max_iter.unwrap_or(1000), restart: s.restart, ..Default::default() };
            let (sol, hist) = gmres(&prob.sys, &crit, &opts)?;
            if !hist.converged {
                log::warn!("gmres stopped after {} iterations without meeting term2 < {}", hist.iterations, crit.tol);
            }
            Ok(sol)
        }
    }
}
