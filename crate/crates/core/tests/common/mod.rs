#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sbe_core::{ApproxSolution, Block, BlockSystem, StructureCase, Weights};

pub struct Instance {
    pub sys: BlockSystem,
    pub sol: ApproxSolution,
    pub case: StructureCase,
    pub weights: Weights,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry(rng: &mut ChaCha8Rng, zero_prob: f64) -> f64 {
    if rng.random::<f64>() < zero_prob {
        0.0
    } else {
        rng.sample(StandardNormal)
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, zero_prob: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| entry(rng, zero_prob))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, zero_prob: f64) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = entry(rng, zero_prob);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    x
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Random system of the given case with n, m, p in 1..=6, roughly 30% zero entries,
/// a random approximate solution and random positive weights (C or E occasionally unweighted).
pub fn random_instance(rng: &mut ChaCha8Rng, case: StructureCase) -> Instance {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=6);
    let p = rng.random_range(1..=6);
    let z = 0.3;
    let a = if case.a_symmetric() { random_symmetric(rng, n, z) } else { random_matrix(rng, n, n, z) };
    let b1 = random_matrix(rng, m, n, z);
    let b2 = if case.b_shared() { b1.clone() } else { random_matrix(rng, m, n, z) };
    let c = random_symmetric(rng, m, z);
    let d1 = random_matrix(rng, p, m, z);
    let d2 = if case.d_shared() { d1.clone() } else { random_matrix(rng, p, m, z) };
    let e = random_symmetric(rng, p, z);
    let sys = BlockSystem::new(a, b1, b2, c, d1, d2, e, random_vector(rng, n), random_vector(rng, m), random_vector(rng, p))
        .unwrap();
    let sol = ApproxSolution::new(random_vector(rng, n), random_vector(rng, m), random_vector(rng, p));
    let mut theta = [0.0; 10];
    for t in theta.iter_mut() {
        *t = rng.random_range(0.5..2.0);
    }
    for b in [Block::C, Block::E] {
        if rng.random::<f64>() < 0.2 {
            theta[b.index()] = 0.0;
        }
    }
    Instance { sys, sol, case, weights: Weights::new(theta).unwrap() }
}

/// J⁺r through a one-sided Jacobi SVD of Jᵀ, independent of the Gram/Cholesky route.
///
/// With Jᵀ V = W (orthogonal columns), σ_i = ‖W_i‖ and U_i = W_i/σ_i, we have
/// J = V Σ Uᵀ and J⁺r = Σ_i U_i (V_iᵀ r)/σ_i.
pub fn svd_min_norm(j: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let mut w = j.transpose();
    let k = w.ncols();
    let mut v = DMatrix::<f64>::identity(k, k);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let (a, b) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * a - s * b;
                        mat[(i, q)] = s * a + c * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..k).map(|i| w.column(i).norm()).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let mut out = DVector::zeros(w.nrows());
    for i in 0..k {
        if sigma[i] > smax * f64::EPSILON * k as f64 {
            let coef = v.column(i).dot(r) / (sigma[i] * sigma[i]);
            out.axpy(coef, &w.column(i), 1.0);
        }
    }
    out
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = b.norm();
    if scale == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / scale
    }
}

use sbe_core::assembly::{assemble, build_k, build_m, build_n, WideOperator};
use sbe_core::be::{check_structure, problem_scale};
use sbe_core::symvec::{sym_scaling, vec, vec_s};
use sbe_core::{min_norm_solve, residuals, rigal_term1, rigal_term2, structured_be, unstructured_be, verify_perturbation};

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// K, M, N identities on the instance's own blocks and solution.
pub fn check_operator_identities(inst: &Instance) -> Result<(), String> {
    let (sys, sol) = (&inst.sys, &inst.sol);
    let rel = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm() / b.norm().max(1e-300);
    let c_sym = sys.c();
    let k = build_k(&sol.y).matrix * vec_s(c_sym).unwrap();
    let e1 = rel(&k, &(c_sym * &sol.y));
    ensure(e1 <= 1e-13 || (c_sym * &sol.y).norm() == 0.0, || format!("K identity {e1:e}"))?;
    let mx = build_m(&sol.x, sys.m()).matrix * vec(sys.b2());
    let e2 = rel(&mx, &(sys.b2() * &sol.x));
    ensure(e2 <= 1e-13 || (sys.b2() * &sol.x).norm() == 0.0, || format!("M identity {e2:e}"))?;
    let ny = build_n(&sol.y, sys.n()).matrix * vec(sys.b1());
    let e3 = rel(&ny, &sys.b1().tr_mul(&sol.y));
    ensure(e3 <= 1e-13 || sys.b1().tr_mul(&sol.y).norm() == 0.0, || format!("N identity {e3:e}"))?;
    let ds = sym_scaling(sys.m()).apply(&vec_s(c_sym).unwrap()).norm();
    let fro = c_sym.norm();
    ensure((ds - fro).abs() <= 1e-14 * fro, || format!("D_S identity {ds} vs {fro}"))
}

/// Oracle agreement, certificate and exact-solution checks for one instance.
pub fn check_backward_errors(inst: &Instance) -> Result<(), String> {
    let (sys, sol, case, w) = (&inst.sys, &inst.sol, inst.case, &inst.weights);
    let scale = problem_scale(sys, sol);
    let mut etas = [0.0; 2];
    for (slot, sparsity) in [false, true].into_iter().enumerate() {
        let s = structured_be(sys, sol, case, w, sparsity).map_err(|e| e.to_string())?;
        etas[slot] = s.eta;
        let j = s.assembled.to_dense();
        let r = s.residuals.stacked();
        let oracle = svd_min_norm(&j, &r);
        let e = rel_err(&s.solution.dx, &oracle);
        ensure(e <= 1e-10, || format!("min-norm vs SVD oracle {e:e} (sparsity {sparsity})"))?;

        let pert = s.perturbation().map_err(|e| e.to_string())?;
        check_structure(sys, &pert).map_err(|e| e.to_string())?;
        let defect = verify_perturbation(sys, sol, &pert).map_err(|e| e.to_string())?;
        ensure(defect <= 1e-12 * scale, || format!("certificate defect {defect:e}, scale {scale:e}"))?;
        let repacked = s.assembled.pack(&pert);
        ensure(rel_err(&repacked, &s.solution.dx) <= 1e-13, || "pack/extract round trip".into())?;
        let weighted = pert.weighted_norm(w);
        ensure((weighted - s.eta).abs() <= 1e-12 * s.eta.max(1e-300), || format!("weighted norm {weighted} vs eta {}", s.eta))?;
    }
    ensure(etas[1] >= etas[0] * (1.0 - 1e-12), || format!("sparse {:e} < dense {:e}", etas[1], etas[0]))?;

    // the exact solution of the same matrix has negligible backward errors
    let exact = ApproxSolution::new(sol.x.clone(), sol.y.clone(), sol.z.clone());
    let sys_exact = sys.clone().with_solution(&exact.stacked());
    let scale_exact = problem_scale(&sys_exact, &exact);
    let unit = Weights::unit();
    for v in [unstructured_be(&sys_exact, &exact), rigal_term1(&sys_exact, &exact)] {
        let v = v.map_err(|e| e.to_string())?;
        ensure(v <= 1e-14, || format!("relative BE of exact solution {v:e}"))?;
    }
    if let Ok(t2) = rigal_term2(&sys_exact, &exact) {
        ensure(t2 <= 1e-14 * scale_exact / sys_exact.rhs().norm(), || format!("term2 of exact solution {t2:e}"))?;
    }
    for sparsity in [false, true] {
        let s = structured_be(&sys_exact, &exact, case, &unit, sparsity).map_err(|e| e.to_string())?;
        ensure(s.eta <= 1e-14 * scale_exact, || format!("structured BE of exact solution {:e}", s.eta))?;
    }
    Ok(())
}

/// Row-space bound and Gram consistency of the assembled J.
pub fn check_assembly(inst: &Instance) -> Result<(), String> {
    let (sys, sol, case, w) = (&inst.sys, &inst.sol, inst.case, &inst.weights);
    let j = assemble(sys, sol, case, w, true).map_err(|e| e.to_string())?;
    let dense = j.to_dense();
    let g = j.gram();
    ensure((&g - &dense * dense.transpose()).norm() <= 1e-12 * g.norm().max(1.0), || "gram mismatch".into())?;
    let bound = [Block::F, Block::G, Block::H].iter().map(|&b| w.get(b).powi(-2)).fold(f64::INFINITY, f64::min);
    let lmin = g.symmetric_eigenvalues().min();
    ensure(lmin >= bound * (1.0 - 1e-10), || format!("λmin(JJᵀ) {lmin:e} below {bound:e}"))?;
    let r = residuals(sys, sol).unwrap().stacked();
    let s = min_norm_solve(&j, &r).map_err(|e| e.to_string())?;
    let back = j.mul(&s.dx);
    ensure(rel_err(&back, &r) <= 1e-12, || "J dx != r".into())?;
    // dx lies in the row space of J
    let proj = &dense.transpose() * svd_min_norm(&(&dense * dense.transpose()), &(&dense * &s.dx));
    ensure((&s.dx - proj).norm() <= 1e-10 * s.dx.norm().max(1e-300), || "dx outside row space".into())
}
