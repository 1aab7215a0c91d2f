//! Python bindings: systems, weights, backward errors, perturbations and solvers.
//!
//! Matrices cross the boundary as lists of rows and vectors as flat lists.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use sbe_core::problems;
use sbe_core::solvers::{self, CriterionKind, GmresOptions, TerminationCriterion};
use sbe_core::{Block, StructureCase};

create_exception!(sbe, SbeError, PyException);

fn err(e: sbe_core::Error) -> PyErr {
    SbeError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>, name: &str) -> PyResult<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(SbeError::new_err(format!("{name}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn from_matrix(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parse_case(case: &str) -> PyResult<StructureCase> {
    case.parse().map_err(err)
}

#[pyclass(name = "BlockSystem", module = "sbe")]
struct PySystem {
    inner: sbe_core::BlockSystem,
}

#[pymethods]
impl PySystem {
    #[new]
    #[allow(clippy::too_many_arguments)]
    fn new(
        a: Vec<Vec<f64>>,
        b1: Vec<Vec<f64>>,
        b2: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d1: Vec<Vec<f64>>,
        d2: Vec<Vec<f64>>,
        e: Vec<Vec<f64>>,
        f: Vec<f64>,
        g: Vec<f64>,
        h: Vec<f64>,
    ) -> PyResult<Self> {
        let inner = sbe_core::BlockSystem::new(
            to_matrix(a, "A")?,
            to_matrix(b1, "B1")?,
            to_matrix(b2, "B2")?,
            to_matrix(c, "C")?,
            to_matrix(d1, "D1")?,
            to_matrix(d2, "D2")?,
            to_matrix(e, "E")?,
            DVector::from_vec(f),
            DVector::from_vec(g),
            DVector::from_vec(h),
        )
        .map_err(err)?;
        Ok(PySystem { inner })
    }

    /// Built-in test problem; `r`, `k` and `seed` parametrize examples 4–6.
    #[staticmethod]
    #[pyo3(signature = (name, r=None, k=None, seed=0))]
    fn builtin(name: &str, r: Option<usize>, k: Option<usize>, seed: u64) -> PyResult<Self> {
        let at_least_2 = |v: usize, what: &str| {
            if v < 2 {
                Err(SbeError::new_err(format!("{what} must be at least 2")))
            } else {
                Ok(v)
            }
        };
        let inner = match name {
            "example1" => problems::example1().0,
            "example2" => problems::example2().0,
            "example3" => problems::example3(),
            "example4" => problems::example4(at_least_2(r.unwrap_or(4), "r")?),
            "example4-unit" => {
                problems::example4_with(at_least_2(r.unwrap_or(4), "r")?, problems::LaplacianScaling::Unit)
            }
            "example5" => problems::example5(at_least_2(k.unwrap_or(10), "k")?, seed),
            "example6" => problems::example6(at_least_2(r.unwrap_or(6), "r")?),
            other => return Err(SbeError::new_err(format!("unknown builtin `{other}`"))),
        };
        Ok(PySystem { inner })
    }

    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Self> {
        Ok(PySystem { inner: problems::load(&manifest).map_err(err)?.0 })
    }

    fn store(&self, case: &str, name: &str, dir: PathBuf) -> PyResult<()> {
        problems::store(&self.inner, parse_case(case)?, name, &dir).map(|_| ()).map_err(err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims()
    }

    fn block(&self, py: Python<'_>, name: &str) -> PyResult<Py<PyAny>> {
        let b: Block = name.parse().map_err(err)?;
        if b.is_vector() {
            Ok(self.inner.vector(b).as_slice().to_vec().into_pyobject(py)?.into_any().unbind())
        } else {
            Ok(from_matrix(self.inner.matrix(b)).into_pyobject(py)?.into_any().unbind())
        }
    }

    fn rhs(&self) -> Vec<f64> {
        self.inner.rhs().as_slice().to_vec()
    }

    fn apply(&self, w: Vec<f64>) -> PyResult<Vec<f64>> {
        if w.len() != self.inner.size() {
            return Err(SbeError::new_err(format!("w: expected length {}, found {}", self.inner.size(), w.len())));
        }
        Ok(self.inner.apply(&DVector::from_vec(w)).as_slice().to_vec())
    }

    fn validate_case(&self, case: &str) -> PyResult<bool> {
        Ok(sbe_core::validate_case(&self.inner, parse_case(case)?))
    }

    fn __repr__(&self) -> String {
        let (n, m, p) = self.inner.dims();
        format!("BlockSystem(n={n}, m={m}, p={p})")
    }
}

impl PySystem {
    fn solution(&self, w: Vec<f64>) -> PyResult<sbe_core::ApproxSolution> {
        let (n, m, p) = self.inner.dims();
        sbe_core::ApproxSolution::from_stacked(&DVector::from_vec(w), n, m, p).map_err(err)
    }
}

#[pyclass(name = "Weights", module = "sbe")]
struct PyWeights {
    inner: sbe_core::Weights,
}

#[pymethods]
impl PyWeights {
    /// θ1..θ10 for A, B1, B2, C, D1, D2, E, f, g, h.
    #[new]
    fn new(theta: [f64; 10]) -> PyResult<Self> {
        Ok(PyWeights { inner: sbe_core::Weights::new(theta).map_err(err)? })
    }

    #[staticmethod]
    fn unit() -> Self {
        PyWeights { inner: sbe_core::Weights::unit() }
    }

    #[staticmethod]
    fn normalized(system: &PySystem) -> Self {
        PyWeights { inner: sbe_core::Weights::normalized(&system.inner) }
    }

    #[getter]
    fn theta(&self) -> [f64; 10] {
        self.inner.as_array()
    }

    fn __repr__(&self) -> String {
        format!("Weights({:?})", self.inner.as_array())
    }
}

fn weights_or_unit(w: Option<PyRef<'_, PyWeights>>) -> sbe_core::Weights {
    w.map_or_else(sbe_core::Weights::unit, |w| w.inner)
}

#[pyclass(name = "Perturbation", module = "sbe")]
struct PyPerturbation {
    inner: sbe_core::Perturbation,
}

#[pymethods]
impl PyPerturbation {
    /// A block by name: "A" … "E" for matrices, "f", "g", "h" for vectors.
    fn block(&self, py: Python<'_>, name: &str) -> PyResult<Py<PyAny>> {
        let b: Block = name.parse().map_err(err)?;
        if b.is_vector() {
            Ok(self.inner.vector(b).as_slice().to_vec().into_pyobject(py)?.into_any().unbind())
        } else {
            Ok(from_matrix(self.inner.matrix(b)).into_pyobject(py)?.into_any().unbind())
        }
    }

    fn weighted_norm(&self, weights: &PyWeights) -> f64 {
        self.inner.weighted_norm(&weights.inner)
    }

    /// Structure checks, then the defect of the perturbed system at `w`.
    fn verify(&self, system: &PySystem, w: Vec<f64>) -> PyResult<f64> {
        sbe_core::verify_perturbation(&system.inner, &system.solution(w)?, &self.inner).map_err(err)
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        problems::write_perturbation(&dir, &self.inner).map_err(err)
    }

    #[getter]
    fn case(&self) -> String {
        self.inner.case.to_string()
    }

    #[getter]
    fn sparsity_preserving(&self) -> bool {
        self.inner.sparsity_preserving
    }
}

/// The four-digit approximate solution shipped with example1 / example2.
#[pyfunction]
fn reference_solution(name: &str) -> PyResult<Vec<f64>> {
    let sol = match name {
        "example1" => problems::example1().1,
        "example2" => problems::example2().1,
        other => return Err(SbeError::new_err(format!("{other} has no reference solution"))),
    };
    Ok(sol.stacked().as_slice().to_vec())
}

#[pyfunction]
fn unstructured_be(system: &PySystem, w: Vec<f64>) -> PyResult<f64> {
    sbe_core::unstructured_be(&system.inner, &system.solution(w)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (system, w, case, weights=None, sparsity=false))]
fn structured_be(
    system: &PySystem,
    w: Vec<f64>,
    case: &str,
    weights: Option<PyRef<'_, PyWeights>>,
    sparsity: bool,
) -> PyResult<f64> {
    let sol = system.solution(w)?;
    let s = sbe_core::structured_be(&system.inner, &sol, parse_case(case)?, &weights_or_unit(weights), sparsity)
        .map_err(err)?;
    Ok(s.eta)
}

/// The structured backward error together with the minimal perturbation attaining it.
#[pyfunction]
#[pyo3(signature = (system, w, case, weights=None, sparsity=false))]
fn minimal_perturbation(
    system: &PySystem,
    w: Vec<f64>,
    case: &str,
    weights: Option<PyRef<'_, PyWeights>>,
    sparsity: bool,
) -> PyResult<(f64, PyPerturbation)> {
    let sol = system.solution(w)?;
    let s = sbe_core::structured_be(&system.inner, &sol, parse_case(case)?, &weights_or_unit(weights), sparsity)
        .map_err(err)?;
    Ok((s.eta, PyPerturbation { inner: s.perturbation().map_err(err)? }))
}

#[pyfunction]
fn gep_solve(system: &PySystem) -> PyResult<Vec<f64>> {
    Ok(solvers::gep_solve(&system.inner).map_err(err)?.stacked().as_slice().to_vec())
}

/// GMRES with a term1 / term2 / seta stopping test.
///
/// Returns the final iterate, whether it converged, and the history as
/// (iter, value, relres, seconds) tuples.
#[pyfunction]
#[pyo3(signature = (system, criterion="term2", tol=1e-13, case=None, weights=None, sparsity=false, max_iter=1000, restart=None))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn gmres(
    system: &PySystem,
    criterion: &str,
    tol: f64,
    case: Option<&str>,
    weights: Option<PyRef<'_, PyWeights>>,
    sparsity: bool,
    max_iter: usize,
    restart: Option<usize>,
) -> PyResult<(Vec<f64>, bool, Vec<(usize, f64, f64, f64)>)> {
    let kind = match criterion {
        "term1" => CriterionKind::Term1,
        "term2" => CriterionKind::Term2,
        "seta" => CriterionKind::StructuredEta {
            case: parse_case(case.ok_or_else(|| SbeError::new_err("seta needs a case"))?)?,
            weights: weights_or_unit(weights),
            sparsity,
        },
        other => return Err(SbeError::new_err(format!("unknown criterion `{other}`"))),
    };
    let crit = TerminationCriterion::new(kind, tol).map_err(err)?;
    let opts = GmresOptions { max_iter, restart, ..Default::default() };
    let (sol, hist) = solvers::gmres(&system.inner, &crit, &opts).map_err(err)?;
    let records = hist.records.iter().map(|r| (r.iter, r.value, r.relres, r.seconds)).collect();
    Ok((sol.stacked().as_slice().to_vec(), hist.converged, records))
}

#[pymodule]
fn sbe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SbeError", m.py().get_type::<SbeError>())?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyWeights>()?;
    m.add_class::<PyPerturbation>()?;
    m.add_function(wrap_pyfunction!(reference_solution, m)?)?;
    m.add_function(wrap_pyfunction!(unstructured_be, m)?)?;
    m.add_function(wrap_pyfunction!(structured_be, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_perturbation, m)?)?;
    m.add_function(wrap_pyfunction!(gep_solve, m)?)?;
    m.add_function(wrap_pyfunction!(gmres, m)?)?;
    Ok(())
}
