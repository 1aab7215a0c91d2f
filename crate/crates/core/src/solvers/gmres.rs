use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::be::{rigal_term1, rigal_term2, structured_be};
use crate::error::{Error, Result};
use crate::system::{validate_case, ApproxSolution, BlockSystem, StructureCase, Weights};

#[derive(Debug, Clone, PartialEq)]
pub enum CriterionKind {
    /// ‖r‖ / (‖𝒜‖_F‖w‖ + ‖d‖)
    Term1,
    /// ‖r‖ / ‖d‖
    Term2,
    /// Structured backward error of the iterate.
    StructuredEta { case: StructureCase, weights: Weights, sparsity: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminationCriterion {
    pub kind: CriterionKind,
    pub tol: f64,
}

impl TerminationCriterion {
    pub fn new(kind: CriterionKind, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        Ok(TerminationCriterion { kind, tol })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CriterionKind::Term1 => "term1",
            CriterionKind::Term2 => "term2",
            CriterionKind::StructuredEta { sparsity: false, .. } => "seta",
            CriterionKind::StructuredEta { sparsity: true, .. } => "seta_sps",
        }
    }

    pub fn evaluate(&self, sys: &BlockSystem, sol: &ApproxSolution) -> Result<f64> {
        match &self.kind {
            CriterionKind::Term1 => rigal_term1(sys, sol),
            CriterionKind::Term2 => rigal_term2(sys, sol),
            CriterionKind::StructuredEta { case, weights, sparsity } => {
                Ok(structured_be(sys, sol, *case, weights, *sparsity)?.eta)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOptions {
    pub x0: Option<DVector<f64>>,
    pub max_iter: usize,
    /// Restart length; `None` runs full GMRES.
    pub restart: Option<usize>,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { x0: None, max_iter: 1000, restart: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub value: f64,
    /// True relative residual ‖d − 𝒜w‖/‖d‖ of the iterate.
    pub relres: f64,
    /// The residual norm predicted by the Arnoldi least-squares problem, relative to ‖d‖.
    pub estimate: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveHistory {
    pub criterion: String,
    pub tol: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
    pub breakdown: bool,
}

impl SolveHistory {
    pub fn final_value(&self) -> Option<f64> {
        self.records.last().map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,criterion,value,relres,seconds")?;
        for r in &self.records {
            writeln!(out, "{},{},{:.17e},{:.17e},{:.6}", r.iter, self.criterion, r.value, r.relres, r.seconds)?;
        }
        Ok(())
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// GMRES (modified Gram–Schmidt Arnoldi, Givens least squares) on the monolithic system,
/// stopping when `criterion` evaluated on the reconstructed iterate drops below its tolerance.
pub fn gmres(
    sys: &BlockSystem,
    criterion: &TerminationCriterion,
    opts: &GmresOptions,
) -> Result<(ApproxSolution, SolveHistory)> {
    let (n, m, p) = sys.dims();
    let size = n + m + p;
    let d = sys.rhs();
    let dnorm = d.norm();
    if dnorm == 0.0 {
        return Err(Error::ZeroRhs);
    }
    if let CriterionKind::StructuredEta { case, weights, .. } = &criterion.kind {
        if !validate_case(sys, *case) {
            return Err(Error::CaseMismatch(*case));
        }
        weights.require_data_weights()?;
    }
    let mut x = match &opts.x0 {
        Some(x0) if x0.len() != size => return Err(Error::len("x0", size, x0.len())),
        Some(x0) => x0.clone(),
        None => DVector::zeros(size),
    };
    let kmax = opts.restart.unwrap_or(opts.max_iter).clamp(1, opts.max_iter.max(1));
    let k_mat = sys.monolithic();
    let start = Instant::now();

    let mut hist = SolveHistory {
        criterion: criterion.name().to_string(),
        tol: criterion.tol,
        records: Vec::new(),
        converged: false,
        iterations: 0,
        breakdown: false,
    };

    let as_sol = |w: &DVector<f64>| ApproxSolution::from_stacked(w, n, m, p);
    if opts.x0.is_some() && criterion.evaluate(sys, &as_sol(&x)?)? < criterion.tol {
        hist.converged = true;
        return Ok((as_sol(&x)?, hist));
    }

    'outer: while hist.iterations < opts.max_iter {
        let r0 = &d - &k_mat * &x;
        let beta = r0.norm();
        if beta == 0.0 {
            hist.breakdown = true;
            break;
        }
        let mut v: Vec<DVector<f64>> = vec![r0 / beta];
        let mut h = DMatrix::<f64>::zeros(kmax + 1, kmax);
        let mut cs = vec![0.0; kmax];
        let mut sn = vec![0.0; kmax];
        let mut g = DVector::<f64>::zeros(kmax + 1);
        g[0] = beta;

        for k in 0..kmax {
            let mut w = &k_mat * &v[k];
            let wnorm0 = w.norm();
            for (i, vi) in v.iter().enumerate() {
                let hik = vi.dot(&w);
                h[(i, k)] = hik;
                w.axpy(-hik, vi, 1.0);
            }
            let hk1 = w.norm();
            h[(k + 1, k)] = hk1;

            for i in 0..k {
                let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            cs[k] = c;
            sn[k] = s;
            h[(k, k)] = c * h[(k, k)] + s * h[(k + 1, k)];
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;

            // reconstruct the iterate from the triangular least-squares solve
            let kk = k + 1;
            let mut yk = DVector::zeros(kk);
            for i in (0..kk).rev() {
                let mut t = g[i];
                for j in i + 1..kk {
                    t -= h[(i, j)] * yk[j];
                }
                yk[i] = t / h[(i, i)];
            }
            let mut xk = x.clone();
            for (j, vj) in v.iter().take(kk).enumerate() {
                xk.axpy(yk[j], vj, 1.0);
            }

            hist.iterations += 1;
            let sol = as_sol(&xk)?;
            let value = criterion.evaluate(sys, &sol)?;
            let relres = (&d - &k_mat * &xk).norm() / dnorm;
            hist.records.push(IterationRecord {
                iter: hist.iterations,
                value,
                relres,
                estimate: g[k + 1].abs() / dnorm,
                seconds: start.elapsed().as_secs_f64(),
            });
            log::debug!("gmres iter {} {} = {value:e}, relres {relres:e}", hist.iterations, hist.criterion);

            if value < criterion.tol {
                hist.converged = true;
                return Ok((sol, hist));
            }
            let lucky = hk1 <= f64::EPSILON * wnorm0;
            if lucky || hist.iterations >= opts.max_iter {
                x = xk;
                if lucky {
                    hist.breakdown = true;
                    break 'outer;
                }
                break;
            }
            v.push(w / hk1);
            if k + 1 == kmax {
                x = xk;
            }
        }
    }
    Ok((as_sol(&x)?, hist))
}
