use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assembly::{assemble, AssembledJ, SegmentKind, WideOperator};
use crate::error::{Error, Result, StructureViolation, ViolationKind};
use crate::symvec::{unvec, unvec_s};
use crate::system::{residuals, ApproxSolution, Block, BlockSystem, Perturbation, Residuals, StructureCase, Weights};

/// Normwise backward error ‖d − 𝒜w‖ / sqrt(‖𝒜‖_F²‖w‖² + ‖d‖²).
pub fn unstructured_be(sys: &BlockSystem, sol: &ApproxSolution) -> Result<f64> {
    let r = residuals(sys, sol)?.norm();
    let den = (sys.frobenius_norm().powi(2) * sol.norm().powi(2) + sys.rhs().norm_squared()).sqrt();
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(r / den)
}

/// ‖d − 𝒜w‖ / (‖𝒜‖_F‖w‖ + ‖d‖).
pub fn rigal_term1(sys: &BlockSystem, sol: &ApproxSolution) -> Result<f64> {
    let r = residuals(sys, sol)?.norm();
    let den = sys.frobenius_norm() * sol.norm() + sys.rhs().norm();
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(r / den)
}

/// ‖d − 𝒜w‖ / ‖d‖.
pub fn rigal_term2(sys: &BlockSystem, sol: &ApproxSolution) -> Result<f64> {
    let r = residuals(sys, sol)?.norm();
    let d = sys.rhs().norm();
    if d == 0.0 {
        return Err(Error::ZeroRhs);
    }
    Ok(r / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveMethod {
    Cholesky,
    Qr,
}

/// ΔX_min = Jᵀ(JJᵀ)⁻¹r.
#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub dx: DVector<f64>,
    pub norm: f64,
    /// Smallest Cholesky pivot of the row-equilibrated Gram matrix, or the smallest
    /// relative |R_ii| when the QR path was taken.
    pub rank_diagnostic: f64,
    pub method: SolveMethod,
}

/// Cholesky of an SPD matrix; returns the factor and the smallest pivot seen, or `None`
/// if a pivot is not positive.
fn cholesky(g: &DMatrix<f64>) -> (Option<DMatrix<f64>>, f64) {
    let n = g.nrows();
    let mut l = DMatrix::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        min_pivot = min_pivot.min(d);
        if d <= 0.0 || !d.is_finite() {
            return (None, d);
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    (Some(l), min_pivot)
}

fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Minimum-norm solution of J·dx = r for a full-row-rank J.
///
/// Rows are equilibrated first (this leaves the solution set unchanged), so the Gram matrix
/// has unit diagonal and the near-singularity threshold 1e-12·trace/N becomes 1e-12.
pub fn min_norm_solve<J: WideOperator>(j: &J, r: &DVector<f64>) -> Result<MinNormSolution> {
    let nr = j.nrows();
    if r.len() != nr {
        return Err(Error::len("r", nr, r.len()));
    }
    let g = j.gram();
    let mut s = DVector::zeros(nr);
    for i in 0..nr {
        if g[(i, i)] <= 0.0 {
            return Err(Error::RankDeficient(0.0));
        }
        s[i] = 1.0 / g[(i, i)].sqrt();
    }
    let gs = DMatrix::from_fn(nr, nr, |a, b| s[a] * g[(a, b)] * s[b]);
    let rs = r.component_mul(&s);
    let threshold = 1e-12 * gs.trace() / nr as f64;

    let (factor, min_pivot) = cholesky(&gs);
    if let Some(l) = factor.filter(|_| min_pivot >= threshold) {
        let lambda = cholesky_solve(&l, &rs).component_mul(&s);
        let dx = j.tr_mul(&lambda);
        let norm = dx.norm();
        return Ok(MinNormSolution { dx, norm, rank_diagnostic: min_pivot, method: SolveMethod::Cholesky });
    }

    log::debug!("Gram pivot {min_pivot:e} below {threshold:e}; falling back to QR of Jᵀ");
    if j.ncols() < nr {
        return Err(Error::RankDeficient(min_pivot));
    }
    let mut jt = j.to_dense().transpose();
    for (mut col, &si) in jt.column_iter_mut().zip(s.iter()) {
        col *= si;
    }
    let qr = jt.qr();
    let rmat = qr.r();
    let diag = rmat.diagonal().abs();
    let rel = diag.min() / diag.max();
    if !(rel > f64::EPSILON * nr as f64) {
        return Err(Error::RankDeficient(rel));
    }
    // Jsᵀ = QR  ⇒  dx = Q R⁻ᵀ rs
    let u = rmat
        .transpose()
        .solve_lower_triangular(&rs)
        .ok_or(Error::RankDeficient(rel))?;
    let dx = qr.q() * u;
    let norm = dx.norm();
    Ok(MinNormSolution { dx, norm, rank_diagnostic: rel, method: SolveMethod::Qr })
}

/// A structured backward error together with everything needed to rebuild its perturbation.
#[derive(Debug, Clone)]
pub struct StructuredBe {
    pub eta: f64,
    pub residuals: Residuals,
    pub assembled: AssembledJ,
    pub solution: MinNormSolution,
}

impl StructuredBe {
    pub fn perturbation(&self) -> Result<Perturbation> {
        extract_perturbation(&self.solution, &self.assembled)
    }
}

pub fn structured_be(
    sys: &BlockSystem,
    sol: &ApproxSolution,
    case: StructureCase,
    weights: &Weights,
    sparsity: bool,
) -> Result<StructuredBe> {
    let assembled = assemble(sys, sol, case, weights, sparsity)?;
    let residuals = residuals(sys, sol)?;
    let solution = min_norm_solve(&assembled, &residuals.stacked())?;
    Ok(StructuredBe { eta: solution.norm, residuals, assembled, solution })
}

/// Undo the θ and √2 scalings of ΔX and rebuild the perturbation blocks.
pub fn extract_perturbation(sol: &MinNormSolution, j: &AssembledJ) -> Result<Perturbation> {
    if sol.dx.len() != j.ncols() {
        return Err(Error::len("dx", j.ncols(), sol.dx.len()));
    }
    let n = j.segment(Block::F).map(|s| s.len).unwrap_or(0);
    let m = j.segment(Block::G).map(|s| s.len).unwrap_or(0);
    let p = j.segment(Block::H).map(|s| s.len).unwrap_or(0);
    let mut pert = Perturbation::zeros(n, m, p, j.case, j.sparsity);
    for seg in j.column_layout() {
        let v = sol.dx.rows(seg.offset, seg.len) / seg.theta;
        match seg.kind {
            SegmentKind::Symmetric { dim } => {
                let mut v = v;
                let mut k = 0;
                for c in 0..dim {
                    for r in c..dim {
                        if r != c {
                            v[k] /= std::f64::consts::SQRT_2;
                        }
                        k += 1;
                    }
                }
                *pert.matrix_mut(seg.block) = unvec_s(&v, dim)?;
            }
            SegmentKind::General { rows, cols } => {
                let x = unvec(&v, rows, cols)?;
                if let Some(other) = seg.shared_with {
                    *pert.matrix_mut(other) = x.clone();
                }
                *pert.matrix_mut(seg.block) = x;
            }
            SegmentKind::Vector { .. } => *pert.vector_mut(seg.block) = v,
        }
    }
    Ok(pert)
}

fn violation(block: Block, kind: ViolationKind) -> Error {
    Error::Structure(StructureViolation { block: block.delta_name(), kind })
}

/// Check symmetry, equality and (if flagged) sparsity of a perturbation against a system.
pub fn check_structure(sys: &BlockSystem, pert: &Perturbation) -> Result<()> {
    pert.check_dims(sys)?;
    let case = pert.case;
    let symmetric = |x: &DMatrix<f64>| x == &x.transpose();
    let mut sym_blocks = vec![Block::C, Block::E];
    if case.a_symmetric() {
        sym_blocks.insert(0, Block::A);
    }
    for b in sym_blocks {
        if !symmetric(pert.matrix(b)) {
            return Err(violation(b, ViolationKind::Symmetry));
        }
    }
    if case.b_shared() && pert.db1 != pert.db2 {
        return Err(violation(Block::B2, ViolationKind::Equality));
    }
    if case.d_shared() && pert.dd1 != pert.dd2 {
        return Err(violation(Block::D2, ViolationKind::Equality));
    }
    if pert.sparsity_preserving {
        for b in &Block::ALL[..7] {
            let (orig, delta) = (sys.matrix(*b), pert.matrix(*b));
            if orig.iter().zip(delta.iter()).any(|(&o, &d)| o == 0.0 && d != 0.0) {
                return Err(violation(*b, ViolationKind::Sparsity));
            }
        }
    }
    Ok(())
}

/// Structure checks, then ‖(𝒜+Δ𝒜)w − (d+Δd)‖.
pub fn verify_perturbation(sys: &BlockSystem, sol: &ApproxSolution, pert: &Perturbation) -> Result<f64> {
    check_structure(sys, pert)?;
    Ok(residuals(&sys.perturbed(pert)?, sol)?.norm())
}

/// The scale ‖𝒜‖_F‖w‖ + ‖d‖ used for relative tolerances.
pub fn problem_scale(sys: &BlockSystem, sol: &ApproxSolution) -> f64 {
    sys.frobenius_norm() * sol.norm() + sys.rhs().norm()
}

/// Unstructured and structured backward errors for one approximate solution.
#[derive(Debug, Clone, Serialize)]
pub struct BeReport {
    pub case: StructureCase,
    pub weights: [f64; 10],
    pub eta_unstructured: f64,
    pub eta_structured: f64,
    pub eta_structured_sparse: Option<f64>,
    pub term1: f64,
    pub term2: Option<f64>,
    pub residual_norm: f64,
    /// Largest defect of the extracted perturbations, 0 if none were extracted.
    pub verification_residual: f64,
    #[serde(skip)]
    pub residuals: Residuals,
    #[serde(skip)]
    pub perturbation: Option<Perturbation>,
    #[serde(skip)]
    pub perturbation_sparse: Option<Perturbation>,
}

/// Compute every backward error for `sol`; `sparse` adds the sparsity-preserving flavor and
/// `with_perturbation` extracts and verifies the minimal perturbations.
pub fn analyze(
    sys: &BlockSystem,
    sol: &ApproxSolution,
    case: StructureCase,
    weights: &Weights,
    sparse: bool,
    with_perturbation: bool,
) -> Result<BeReport> {
    let eta = unstructured_be(sys, sol)?;
    let term1 = rigal_term1(sys, sol)?;
    let term2 = rigal_term2(sys, sol).ok();
    let dense = structured_be(sys, sol, case, weights, false)?;
    let sps = if sparse { Some(structured_be(sys, sol, case, weights, true)?) } else { None };

    let mut verification_residual: f64 = 0.0;
    let mut extract = |s: &StructuredBe| -> Result<Perturbation> {
        let p = s.perturbation()?;
        verification_residual = verification_residual.max(verify_perturbation(sys, sol, &p)?);
        Ok(p)
    };
    let (perturbation, perturbation_sparse) = if with_perturbation {
        (Some(extract(&dense)?), sps.as_ref().map(&mut extract).transpose()?)
    } else {
        (None, None)
    };

    Ok(BeReport {
        case,
        weights: weights.as_array(),
        eta_unstructured: eta,
        eta_structured: dense.eta,
        eta_structured_sparse: sps.as_ref().map(|s| s.eta),
        term1,
        term2,
        residual_norm: dense.residuals.norm(),
        verification_residual,
        residuals: dense.residuals,
        perturbation,
        perturbation_sparse,
    })
}
