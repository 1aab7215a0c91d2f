use std::path::Path;
use std::process::{Command, Output};

use sbe_core::problems::{self, read_perturbation, write_perturbation};
use sbe_core::{Perturbation, StructureCase};
use serde_json::Value;

fn sbe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbe")).args(args).output().expect("run sbe")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn close(v: &Value, expected: f64, rel: f64) -> bool {
    let v = v.as_f64().unwrap();
    ((v - expected) / expected).abs() <= rel
}

#[test]
fn compute_be_example1_reports_all_three_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sbe(&["compute-be", "--builtin", "example1", "--case", "I", "--weights", "unit", "--sparsity", "both", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(dir.path());
    // the four-digit reference solution gives errors close to the reference values
    assert!(close(&r["eta_unstructured"], 5.0177e-5, 0.25), "{r}");
    assert!(close(&r["eta_structured"], 2.9142e-4, 0.25), "{r}");
    assert!(close(&r["eta_structured_sparse"], 2.8084e-3, 0.05), "{r}");
    assert!(close(&r["residual_norms"]["total"], 3.4180e-2, 1e-3), "{r}");
    assert_eq!(r["case"], "I");
    assert!(stdout(&o).contains("eta_S_sps"));
}

#[test]
fn compute_be_exact_solution_is_tiny() {
    for builtin in ["example4", "example5", "identity"] {
        let dir = tempfile::tempdir().unwrap();
        let o = sbe(&[
            "compute-be", "--builtin", builtin, "--solver", "exact", "--weights", "normalized",
            "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{builtin}: {}", stderr(&o));
        let r = report(dir.path());
        let scale = r["problem_scale"].as_f64().unwrap();
        for key in ["eta_unstructured", "eta_structured", "eta_structured_sparse"] {
            assert!(r[key].as_f64().unwrap() <= 1e-14 * scale, "{builtin} {key}: {r}");
        }
    }
}

#[test]
fn case_mismatch_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    problems::store(&problems::example5(4, 1), StructureCase::CaseIII, "e5", dir.path()).unwrap();
    let man = dir.path().join("manifest.json");
    let o = sbe(&[
        "compute-be", "--manifest", man.to_str().unwrap(), "--case", "II", "--weights", "normalized",
        "--out", dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("case II"), "{}", stderr(&o));
}

#[test]
fn missing_problem_and_unknown_builtin_fail() {
    assert_eq!(sbe(&["compute-be"]).status.code(), Some(1));
    let o = sbe(&["compute-be", "--builtin", "example9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("example9"));
}

#[test]
fn solve_example4_meets_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbe(&[
        "solve", "--builtin", "example4", "--r", "6", "--criterion", "term2", "--tol", "1e-13",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(csv.starts_with("iter,criterion,value,relres,seconds\n"));
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert!(last[3].parse::<f64>().unwrap() <= 1e-13);
    assert!(dir.path().join("solution.mtx").exists());
    assert!(stdout(&o).contains("converged after"));
}

#[test]
fn solve_identity_takes_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbe(&["solve", "--builtin", "identity", "--tol", "1e-14", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert_eq!(summary["iterations"], 1);
}

#[test]
fn solve_example6_seta_needs_no_more_iterations_than_term2() {
    let mut iters = Vec::new();
    for crit in ["term2", "seta"] {
        let dir = tempfile::tempdir().unwrap();
        let o = sbe(&[
            "solve", "--builtin", "example6", "--r", "6", "--criterion", crit, "--case", "I", "--weights",
            "normalized", "--tol", "1e-14", "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{crit}: {}", stderr(&o));
        let s: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
        iters.push(s["iterations"].as_u64().unwrap());
    }
    assert!(iters[1] <= iters[0], "{iters:?}");
}

#[test]
fn unconverged_solve_exits_nonzero_with_history() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbe(&[
        "solve", "--builtin", "example4", "--r", "4", "--tol", "1e-13", "--max-iter", "3",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let csv = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn compute_be_output_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sbe(&["compute-be", "--builtin", "example1", "--write-perturbation", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sol = dir.path().join("solution.mtx");
    for sub in ["perturbation", "perturbation-sps"] {
        let o = sbe(&[
            "verify", "--builtin", "example1", "--solution", sol.to_str().unwrap(), "--perturbation",
            dir.path().join(sub).to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{sub}: {}{}", stdout(&o), stderr(&o));
        assert!(stdout(&o).contains("structure: ok"));
    }
}

#[test]
fn zero_perturbation_with_exact_solution_verifies() {
    let dir = tempfile::tempdir().unwrap();
    write_perturbation(dir.path(), &Perturbation::zeros(2, 1, 1, StructureCase::CaseI, true)).unwrap();
    let o = sbe(&["verify", "--builtin", "identity", "--solver", "exact", "--perturbation", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn broken_symmetry_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(sbe(&["compute-be", "--builtin", "example1", "--sparsity", "off", "--write-perturbation", "--out", out])
        .status
        .success());
    let pdir = dir.path().join("perturbation");
    let mut pert = read_perturbation(&pdir, 5, 3, 2).unwrap();
    pert.da[(0, 1)] += 1e-3;
    write_perturbation(&pdir, &pert).unwrap();
    let o = sbe(&[
        "verify", "--builtin", "example1", "--solution", dir.path().join("solution.mtx").to_str().unwrap(),
        "--perturbation", pdir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("dA symmetry"), "{}", stdout(&o));
}

#[test]
fn reproduce_with_empty_lists_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbe(&["reproduce", "--grid", "--sweep", "--criteria", "false", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["grid.csv", "example5_sweep.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}");
    }
}

#[test]
fn reproduce_grid_row_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sbe(&["reproduce", "--grid", "8", "--sweep", "10,20", "--criteria", "false", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let row = table.lines().nth(1).unwrap();
    assert!(row.starts_with("8,"));
    assert!(!row.contains("fail"), "{row}");
    let sweep = std::fs::read_to_string(dir.path().join("example5_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "builtin = \"example4\"\nr = 3\ncriterion = \"term1\"\ntol = 1e-12\n").unwrap();
    let out = dir.path().join("out");
    let o = sbe(&[
        "solve", "--config", cfg.to_str().unwrap(), "--criterion", "term2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert_eq!(s["criterion"], "term2");
    assert_eq!(s["tol"], 1e-12);
    assert!(s["problem"].as_str().unwrap().contains("r=3"));

    std::fs::write(&cfg, "tolerance = 1.0\n").unwrap();
    let o = sbe(&["solve", "--config", cfg.to_str().unwrap(), "--builtin", "identity"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = sbe(&[
            "compute-be", "--builtin", "example5", "--k", "6", "--seed", "3", "--solver", "gmres", "--weights",
            "normalized", "--out", d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ra = std::fs::read_to_string(a.path().join("report.json")).unwrap();
    let rb = std::fs::read_to_string(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
}
