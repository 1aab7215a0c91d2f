use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};
use sbe_core::be::{check_structure, problem_scale};
use sbe_core::problems::{self, LaplacianScaling};
use sbe_core::solvers::{gep_solve, gmres, CriterionKind, GmresOptions, IterationRecord, SolveHistory, TerminationCriterion};
use sbe_core::{
    residuals, rigal_term1, rigal_term2, structured_be, unstructured_be, validate_case, verify_perturbation,
    ApproxSolution, BlockSystem, Error, StructureCase, Weights,
};
use serde::Serialize;

use crate::problem::{self, obtain_solution, solution_source};
use crate::settings::{parse_weights, CriterionName, Settings, SparsityMode};

/// Exit code for runs that completed but did not meet their target.
pub const FAILED: u8 = 2;

#[derive(Debug, Serialize)]
struct ResidualNorms {
    f: f64,
    g: f64,
    h: f64,
    total: f64,
}

#[derive(Debug, Serialize)]
struct ComputeReport {
    problem: String,
    n: usize,
    m: usize,
    p: usize,
    case: StructureCase,
    solution: String,
    weights: [f64; 10],
    sparsity: SparsityMode,
    eta_unstructured: f64,
    eta_structured: Option<f64>,
    eta_structured_sparse: Option<f64>,
    term1: f64,
    term2: Option<f64>,
    residual_norms: ResidualNorms,
    problem_scale: f64,
    /// Largest defect of the written perturbations, null when none were written.
    verification_residual: Option<f64>,
    perturbation_dirs: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn require_case(sys: &BlockSystem, case: StructureCase) -> anyhow::Result<()> {
    if !validate_case(sys, case) {
        return Err(Error::CaseMismatch(case)).context("validating the system structure");
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"))
}

pub fn compute_be(s: &Settings) -> anyhow::Result<ExitCode> {
    let prob = problem::load(s)?;
    let case = prob.case(s);
    require_case(&prob.sys, case)?;
    let weights = s.weights_for(&prob.sys)?;
    let mode = s.sparsity.unwrap_or(SparsityMode::Both);
    let src = solution_source(s, &prob)?;
    let sol = obtain_solution(s, &prob, &src)?;
    let sys = &prob.sys;
    let out = s.out_dir();
    create_out(&out)?;

    let res = residuals(sys, &sol)?;
    let mut eta_structured = None;
    let mut eta_structured_sparse = None;
    let mut verification_residual: Option<f64> = None;
    let mut perturbation_dirs = Vec::new();
    for sparse in [false, true] {
        if (sparse && !mode.sparse()) || (!sparse && !mode.dense()) {
            continue;
        }
        let sbe = structured_be(sys, &sol, case, &weights, sparse)?;
        log::info!("structured BE (sparsity {sparse}) via {:?}", sbe.solution.method);
        if sparse {
            eta_structured_sparse = Some(sbe.eta);
        } else {
            eta_structured = Some(sbe.eta);
        }
        if s.write_perturbation.unwrap_or(false) {
            let pert = sbe.perturbation()?;
            let defect = verify_perturbation(sys, &sol, &pert)?;
            verification_residual = Some(verification_residual.map_or(defect, |v| v.max(defect)));
            let dir = out.join(if sparse { "perturbation-sps" } else { "perturbation" });
            problems::write_perturbation(&dir, &pert)?;
            perturbation_dirs.push(dir.display().to_string());
        }
    }
    problems::write_solution(&out.join("solution.mtx"), &sol)?;

    let (n, m, p) = sys.dims();
    let report = ComputeReport {
        problem: prob.label.clone(),
        n,
        m,
        p,
        case,
        solution: src.describe(),
        weights: weights.as_array(),
        sparsity: mode,
        eta_unstructured: unstructured_be(sys, &sol)?,
        eta_structured,
        eta_structured_sparse,
        term1: rigal_term1(sys, &sol)?,
        term2: rigal_term2(sys, &sol).ok(),
        residual_norms: ResidualNorms { f: res.rf.norm(), g: res.rg.norm(), h: res.rh.norm(), total: res.norm() },
        problem_scale: problem_scale(sys, &sol),
        verification_residual,
        perturbation_dirs,
    };
    let path = out.join("report.json");
    write_json(&path, &report)?;
    println!(
        "{} case {}: residual {:.4e}, eta {:.4e}, eta_S {}, eta_S_sps {} -> {}",
        report.problem,
        case,
        report.residual_norms.total,
        report.eta_unstructured,
        fmt_opt(report.eta_structured),
        fmt_opt(report.eta_structured_sparse),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn criterion_for(s: &Settings, sys: &BlockSystem, case: StructureCase, weights: Weights) -> anyhow::Result<TerminationCriterion> {
    let tol = s.tol.unwrap_or(1e-13);
    let kind = match s.criterion.unwrap_or(CriterionName::Term2) {
        CriterionName::Term1 => CriterionKind::Term1,
        CriterionName::Term2 => CriterionKind::Term2,
        CriterionName::Seta => {
            require_case(sys, case)?;
            let sparsity = match s.sparsity.unwrap_or(SparsityMode::Off) {
                SparsityMode::Off => false,
                SparsityMode::On => true,
                SparsityMode::Both => bail!("--sparsity both is not a stopping test; use on or off"),
            };
            CriterionKind::StructuredEta { case, weights, sparsity }
        }
    };
    Ok(TerminationCriterion::new(kind, tol)?)
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    problem: String,
    solver: String,
    criterion: String,
    tol: f64,
    converged: bool,
    iterations: usize,
    final_value: Option<f64>,
    final_relres: Option<f64>,
    breakdown: bool,
}

pub fn solve(s: &Settings) -> anyhow::Result<ExitCode> {
    let prob = problem::load(s)?;
    let case = prob.case(s);
    let weights = s.weights_for(&prob.sys)?;
    let crit = criterion_for(s, &prob.sys, case, weights)?;
    let sys = &prob.sys;
    let out = s.out_dir();
    create_out(&out)?;

    let solver = s.solver.as_deref().unwrap_or("gmres");
    let (sol, hist) = match solver {
        "gmres" => {
            let opts = GmresOptions { max_iter: s.max_iter.unwrap_or(1000), restart: s.restart, ..Default::default() };
            gmres(sys, &crit, &opts)?
        }
        "gep" => gep_history(sys, &crit)?,
        other => bail!("unknown solver `{other}` for solve (expected gmres or gep)"),
    };

    let hist_path = out.join("history.csv");
    let file = fs::File::create(&hist_path).with_context(|| format!("creating {}", hist_path.display()))?;
    hist.write_csv(std::io::BufWriter::new(file))?;
    problems::write_solution(&out.join("solution.mtx"), &sol)?;
    let summary = SolveSummary {
        problem: prob.label.clone(),
        solver: solver.to_string(),
        criterion: hist.criterion.clone(),
        tol: hist.tol,
        converged: hist.converged,
        iterations: hist.iterations,
        final_value: hist.final_value(),
        final_relres: hist.records.last().map(|r| r.relres),
        breakdown: hist.breakdown,
    };
    write_json(&out.join("solve.json"), &summary)?;

    println!(
        "{}: {} {} after {} iterations, {} = {}, relres {} -> {}",
        summary.problem,
        solver,
        if hist.converged { "converged" } else { "did not converge" },
        hist.iterations,
        hist.criterion,
        fmt_opt(summary.final_value),
        fmt_opt(summary.final_relres),
        hist_path.display()
    );
    Ok(if hist.converged { ExitCode::SUCCESS } else { ExitCode::from(FAILED) })
}

/// A direct solve reported as a one-step history.
fn gep_history(sys: &BlockSystem, crit: &TerminationCriterion) -> anyhow::Result<(ApproxSolution, SolveHistory)> {
    let start = std::time::Instant::now();
    let sol = gep_solve(sys)?;
    let value = crit.evaluate(sys, &sol)?;
    let relres = residuals(sys, &sol)?.norm() / sys.rhs().norm();
    let record = IterationRecord { iter: 1, value, relres, estimate: relres, seconds: start.elapsed().as_secs_f64() };
    let hist = SolveHistory {
        criterion: crit.name().to_string(),
        tol: crit.tol,
        records: vec![record],
        converged: value < crit.tol,
        iterations: 1,
        breakdown: false,
    };
    Ok((sol, hist))
}

pub fn verify(s: &Settings) -> anyhow::Result<ExitCode> {
    let prob = problem::load(s)?;
    let dir = s.perturbation.as_ref().context("verify needs --perturbation DIR")?;
    let src = solution_source(s, &prob)?;
    let sol = obtain_solution(s, &prob, &src)?;
    let (n, m, p) = prob.sys.dims();
    let pert = problems::read_perturbation(dir, n, m, p)
        .with_context(|| format!("reading perturbation from {}", dir.display()))?;
    if let Some(case) = s.case {
        if case != pert.case {
            bail!("perturbation was built for case {}, not {case}", pert.case);
        }
    }
    let tol = s.tol.unwrap_or(1e-12) * problem_scale(&prob.sys, &sol);

    match check_structure(&prob.sys, &pert) {
        Ok(()) => println!("structure: ok (case {}, sparsity {})", pert.case, pert.sparsity_preserving),
        Err(Error::Structure(v)) => {
            println!("structure: violated ({v})");
            eprintln!("error: {v}");
            return Ok(ExitCode::from(FAILED));
        }
        Err(e) => return Err(e.into()),
    }
    let defect = verify_perturbation(&prob.sys, &sol, &pert)?;
    let ok = defect <= tol;
    println!("defect: {defect:.4e} (tolerance {tol:.4e}) {}", if ok { "ok" } else { "too large" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(FAILED) })
}

/// Reference values of the grid run: relres, eta, eta_S1, eta_S1_sps.
const GRID_REFERENCE: [(usize, [f64; 4]); 4] = [
    (4, [1.0593e-15, 4.1823e-17, 1.3757e-16, 4.9831e-16]),
    (6, [2.4960e-14, 5.3825e-16, 1.8436e-15, 7.3871e-15]),
    (8, [2.0868e-14, 3.0086e-16, 9.6476e-16, 5.4875e-15]),
    (10, [3.2981e-14, 3.4862e-16, 1.3781e-15, 9.1775e-15]),
];
/// Half-width of the order-of-magnitude acceptance band, in decades.
const DECADES: f64 = 1.5;
const GMRES_TOL: f64 = 1e-13;
const CRITERIA_TOL: f64 = 1e-14;
/// Orders the k-sweep is expected to reach: unstructured, structured.
const SWEEP_ORDERS: (f64, f64) = (1e-16, 1e-15);

fn tag(value: f64, reference: Option<f64>) -> &'static str {
    match reference {
        None => "n/a",
        Some(r) if value > 0.0 && (value / r).log10().abs() <= DECADES => "pass",
        Some(_) => "fail",
    }
}

struct Tally {
    pass: usize,
    fail: usize,
}

impl Tally {
    fn count(&mut self, t: &str) -> &'static str {
        match t {
            "pass" => {
                self.pass += 1;
                "pass"
            }
            "fail" => {
                self.fail += 1;
                "fail"
            }
            _ => "n/a",
        }
    }
}

fn gmres_term2(sys: &BlockSystem, tol: f64) -> anyhow::Result<(ApproxSolution, SolveHistory)> {
    let crit = TerminationCriterion::new(CriterionKind::Term2, tol)?;
    Ok(gmres(sys, &crit, &GmresOptions::default())?)
}

fn grid(s: &Settings, out: &Path) -> anyhow::Result<Tally> {
    let rs = s.grid.clone().unwrap_or_else(|| vec![4, 6, 8, 10]);
    let scaling = match s.laplacian.as_deref().unwrap_or("unit") {
        "unit" => LaplacianScaling::Unit,
        "mesh" => LaplacianScaling::Mesh,
        other => bail!("unknown Laplacian scaling `{other}` (expected unit or mesh)"),
    };
    let mut csv = String::from(
        "r,iterations,relres,eta,eta_s1,eta_s1_sps,relres_tag,eta_tag,eta_s1_tag,eta_s1_sps_tag\n",
    );
    let mut tally = Tally { pass: 0, fail: 0 };
    for r in rs {
        if r < 2 {
            bail!("grid: r must be at least 2, got {r}");
        }
        let sys = problems::example4_with(r, scaling);
        let (sol, hist) = gmres_term2(&sys, GMRES_TOL)?;
        let w = parse_weights(s.weights.as_deref().unwrap_or("normalized"), &sys)?;
        let vals = [
            hist.records.last().map_or(f64::NAN, |rec| rec.relres),
            unstructured_be(&sys, &sol)?,
            structured_be(&sys, &sol, StructureCase::CaseI, &w, false)?.eta,
            structured_be(&sys, &sol, StructureCase::CaseI, &w, true)?.eta,
        ];
        let reference = GRID_REFERENCE.iter().find(|(pr, _)| *pr == r).map(|(_, v)| v);
        let _ = write!(csv, "{r},{}", hist.iterations);
        for v in vals {
            let _ = write!(csv, ",{v:.4e}");
        }
        for (i, v) in vals.iter().enumerate() {
            let t = tally.count(tag(*v, reference.map(|p| p[i])));
            let _ = write!(csv, ",{t}");
        }
        csv.push('\n');
        log::info!("grid r={r}: {} iterations", hist.iterations);
    }
    fs::write(out.join("grid.csv"), csv)?;
    Ok(tally)
}

fn sweep(s: &Settings, out: &Path) -> anyhow::Result<Tally> {
    let ks = s.sweep.clone().unwrap_or_else(|| (1..=7).map(|i| 10 * i).collect());
    let seed = s.seed.unwrap_or(0);
    let mut csv = String::from("k,iterations,relres,eta,eta_s3,eta_s3_sps,eta_tag,eta_s3_tag,eta_s3_sps_tag\n");
    let mut tally = Tally { pass: 0, fail: 0 };
    for k in ks {
        if k < 2 {
            bail!("sweep: k must be at least 2, got {k}");
        }
        let sys = problems::example5(k, seed);
        let (sol, hist) = gmres_term2(&sys, GMRES_TOL)?;
        let w = parse_weights(s.weights.as_deref().unwrap_or("normalized"), &sys)?;
        let vals = [
            unstructured_be(&sys, &sol)?,
            structured_be(&sys, &sol, StructureCase::CaseIII, &w, false)?.eta,
            structured_be(&sys, &sol, StructureCase::CaseIII, &w, true)?.eta,
        ];
        let relres = hist.records.last().map_or(f64::NAN, |rec| rec.relres);
        let _ = write!(csv, "{k},{},{relres:.4e}", hist.iterations);
        for v in vals {
            let _ = write!(csv, ",{v:.4e}");
        }
        let refs = [SWEEP_ORDERS.0, SWEEP_ORDERS.1, SWEEP_ORDERS.1];
        for (v, r) in vals.iter().zip(refs) {
            let t = tally.count(tag(*v, Some(r)));
            let _ = write!(csv, ",{t}");
        }
        csv.push('\n');
        log::info!("sweep k={k}: {} iterations", hist.iterations);
    }
    fs::write(out.join("example5_sweep.csv"), csv)?;
    Ok(tally)
}

fn criteria(s: &Settings, out: &Path) -> anyhow::Result<Tally> {
    let sys = problems::example6(6);
    let w = parse_weights(s.weights.as_deref().unwrap_or("normalized"), &sys)?;
    let kinds = [
        CriterionKind::Term1,
        CriterionKind::Term2,
        CriterionKind::StructuredEta { case: StructureCase::CaseI, weights: w, sparsity: false },
    ];
    let mut summary = String::from("criterion,iterations,converged,final_value\n");
    let mut iters = Vec::new();
    for kind in kinds {
        let crit = TerminationCriterion::new(kind, CRITERIA_TOL)?;
        let (_, hist) = gmres(&sys, &crit, &GmresOptions::default())?;
        let file = fs::File::create(out.join(format!("criteria_{}.csv", crit.name())))?;
        hist.write_csv(std::io::BufWriter::new(file))?;
        let _ = writeln!(
            summary,
            "{},{},{},{:.4e}",
            crit.name(),
            hist.iterations,
            hist.converged,
            hist.final_value().unwrap_or(f64::NAN)
        );
        iters.push((hist.iterations, hist.converged));
    }
    fs::write(out.join("criteria_summary.csv"), summary)?;
    let ok = iters[2].1 && iters[2].0 <= iters[1].0;
    Ok(if ok { Tally { pass: 1, fail: 0 } } else { Tally { pass: 0, fail: 1 } })
}

pub fn reproduce(s: &Settings) -> anyhow::Result<ExitCode> {
    let out = s.out_dir();
    create_out(&out)?;
    let t = grid(s, &out)?;
    println!("grid: {} cells pass, {} fail -> {}", t.pass, t.fail, out.join("grid.csv").display());
    let t = sweep(s, &out)?;
    println!("example5 sweep: {} cells pass, {} fail -> {}", t.pass, t.fail, out.join("example5_sweep.csv").display());
    if s.criteria.unwrap_or(true) {
        let t = criteria(s, &out)?;
        println!(
            "criteria: seta needs no more iterations than term2: {} -> {}",
            if t.fail == 0 { "pass" } else { "fail" },
            out.join("criteria_summary.csv").display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_use_decade_band() {
        assert_eq!(tag(3.0e-16, Some(3.0086e-16)), "pass");
        assert_eq!(tag(3.0e-18, Some(3.0086e-16)), "fail");
        assert_eq!(tag(0.0, Some(1e-16)), "fail");
        assert_eq!(tag(1.0, None), "n/a");
    }

    #[test]
    fn gep_history_on_identity() {
        let sys = problem::identity_system();
        let crit = TerminationCriterion::new(CriterionKind::Term2, 1e-14).unwrap();
        let (sol, hist) = gep_history(&sys, &crit).unwrap();
        assert!(hist.converged);
        assert_eq!(sol.stacked().as_slice(), &[1.0, 1.0, 1.0, 1.0]);
    }
}
