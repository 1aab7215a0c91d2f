use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::system::{ApproxSolution, BlockSystem, Perturbation, StructureCase};

fn mat(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// rows×cols matrix with `sub`, `diag`, `sup` on the three central diagonals.
fn tridiag(rows: usize, cols: usize, sub: f64, diag: f64, sup: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        if i == j {
            diag
        } else if i == j + 1 {
            sub
        } else if j == i + 1 {
            sup
        } else {
            0.0
        }
    })
}

/// Set d so that the all-ones vector is the exact solution.
fn ones_rhs(sys: BlockSystem) -> BlockSystem {
    let w = DVector::from_element(sys.size(), 1.0);
    sys.with_solution(&w)
}

/// A 5/3/2 case-I system with four-digit data and a poor approximate solution.
pub fn example1() -> (BlockSystem, ApproxSolution) {
    let a = mat(5, 5, &[
        -0.4083, 0.3472, 0.0, 0.0636, 0.0,
        0.3472, -0.8593, 0.0647, 0.1433, 0.0,
        0.0, 0.0647, 0.0, 0.0, 0.3129,
        0.0636, 0.1433, 0.0, -0.4236, -1.2123,
        0.0, 0.0, 0.3129, -1.2123, 0.0,
    ]);
    let b = mat(3, 5, &[
        0.0, 0.0, 0.0, 0.0, 0.0961,
        -2.2777, 0.0, -0.1180, 0.0, 0.0,
        1.0582, 0.4363, 0.0, 1.4115, -0.0146,
    ]);
    let c = mat(3, 3, &[0.0, 0.0, -0.2299, 0.0, -0.7390, 1.0800, -0.2299, 1.0800, 0.0]);
    let d = mat(2, 3, &[0.0, 0.0, -0.38734, 0.0, 0.0, -0.31964]);
    let e = mat(2, 2, &[0.0, 0.5387, 0.5387, 0.0]);
    let f = vector(&[-2.5245, -1.0063, -0.4242, -0.6612, 0.7276]);
    let g = vector(&[0.4566, -0.5062, -1.1846]);
    let h = vector(&[0.7818, -0.0804]);
    let sys = BlockSystem::symmetric(a, b, c, d, e, f, g, h).expect("consistent dimensions");
    let sol = ApproxSolution::new(
        vector(&[-4.4871, 11.3517, 100.3742, 18.4213, -1.6524]),
        vector(&[-86.5918, 5.4127, 2.6903]),
        vector(&[1.4512, 3.3886]),
    );
    (sys, sol)
}

/// The sparsity-preserving minimal perturbation of [`example1`] as tabulated (4–5 digits).
pub fn example1_reference_perturbation() -> Perturbation {
    let da = mat(5, 5, &[
        -2.1152, 1.4013, 0.0, 4.4380, 0.0,
        1.4013, 6.4477, -1.6479, 4.9887, 0.0,
        0.0, -1.6479, 0.0, 0.0, 10.0133,
        4.4380, 4.9887, 0.0, -0.7883, 1.0675,
        0.0, 0.0, 10.0133, 1.0675, 0.0,
    ]) * 1e-4;
    let db = mat(3, 5, &[
        0.0, 0.0, 0.0, 0.0, 10.9193,
        1.1455, 0.0, 2.6987, 0.0, 0.0,
        2.9280, -2.6709, 0.0, -6.9292, 0.9127,
    ]) * 1e-4;
    let dc = mat(3, 3, &[0.0, 0.0, 7.7234, 0.0, -16.9623, 5.7956, 7.7234, 5.7956, 0.0]) * 1e-5;
    let dd = mat(2, 3, &[0.0, 0.0, -2.3102, 0.0, 0.0, -6.1506]) * 1e-4;
    let de = mat(2, 2, &[0.0, -2.4376, -2.4376, 0.0]) * 1e-4;
    Perturbation {
        da,
        db1: db.clone(),
        db2: db,
        dc,
        dd1: dd.clone(),
        dd2: dd,
        de,
        df: vector(&[-4.7141, -5.6800, 53.1269, 0.4279, -1.1206]) * 1e-5,
        dg: vector(&[124.8013, -3.1338, 3.6990]) * 1e-5,
        dh: vector(&[0.6591, 1.8203]) * 1e-4,
        case: StructureCase::CaseI,
        sparsity_preserving: true,
    }
}

/// A badly scaled 3/3/3 case-I system built from a graded Pascal-type matrix, with the
/// approximate solution obtained by elimination with partial pivoting.
pub fn example2() -> (BlockSystem, ApproxSolution) {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let p = DMatrix::from_fn(6, 6, |i, j| {
        let (i, j) = (i + 1, j + 1);
        fact(i + j - 1) / (fact(i - 1) * fact(j - 1))
    });
    let g = DMatrix::from_diagonal(&(vector(&[1.0, 5.0, 10.0, 50.0, 100.0, 500.0]) * 1e6));
    let gpg = &g * p * &g;
    let a = gpg.view((0, 0), (3, 3)).into_owned();
    let e = gpg.view((3, 3), (3, 3)).into_owned();
    let b = mat(3, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1e4, 0.0, 0.0]);
    let c = mat(3, 3, &[1.0, -2.0, 1.0, -2.0, 6.0, 0.0, 1.0, 0.0, 0.0]);
    let sys = BlockSystem::symmetric(
        a,
        b.clone(),
        c,
        b,
        e,
        vector(&[1e8, 10.0, 0.0]),
        vector(&[1e-8, 0.0, 0.0]),
        vector(&[1e-8, 0.0, 0.0]),
    )
    .expect("consistent dimensions");
    let sol = ApproxSolution::new(
        vector(&[60.0120, -8.0016, 1.0002]) * 1e-5,
        vector(&[6.0012, 2.0004, -2.0004]),
        vector(&[-1.7109, 0.8556, -0.0475]) * 1e-13,
    );
    (sys, sol)
}

/// A 4/2/2 system with B1 ≠ B2, D1 = D2 and zero C, E.
pub fn example3() -> BlockSystem {
    let a = mat(4, 4, &[
        0.0968, 0.0, -0.2438, -0.2823,
        0.0, 0.0, 1.1180, -1.1611,
        -0.2438, 1.1180, 1.6014, -0.8693,
        -0.2823, -1.1611, -0.8693, -0.4914,
    ]);
    let b1 = mat(2, 4, &[0.0, 0.0, 0.7090, 0.0, 1.9046, 0.0928, -0.0430, 0.0508]);
    let b2 = mat(2, 4, &[-0.2592, 0.0, 0.2543, 0.1248, 0.0876, 1.1375, 0.0, 0.0766]);
    let d = mat(2, 2, &[0.0, 1.8070, 1.0365, -1.5516]);
    BlockSystem::new(
        a,
        b1,
        b2,
        DMatrix::zeros(2, 2),
        d.clone(),
        d,
        DMatrix::zeros(2, 2),
        vector(&[-1.1251, -1.9000, -0.4320, -1.1422]),
        vector(&[-0.5516, 1.8738]),
        vector(&[0.4982, 0.8347]),
    )
    .expect("consistent dimensions")
}

/// Scaling of the 1-D Laplacian Z = s·tridiag(−1, 2, −1) in [`example4_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianScaling {
    /// s = 1/(r+1)², the mesh-width scaling.
    Mesh,
    /// s = 1.
    Unit,
}

/// Kronecker-structured case-I system of order 4r², exact solution all ones.
pub fn example4(r: usize) -> BlockSystem {
    example4_with(r, LaplacianScaling::Mesh)
}

pub fn example4_with(r: usize, scaling: LaplacianScaling) -> BlockSystem {
    assert!(r >= 2, "r must be at least 2");
    let rf = (r + 1) as f64;
    let s = match scaling {
        LaplacianScaling::Mesh => 1.0 / (rf * rf),
        LaplacianScaling::Unit => 1.0,
    };
    let i = eye(r);
    let z = tridiag(r, r, -1.0, 2.0, -1.0) * s;
    let h = tridiag(r, r, 0.0, 1.0, -1.0) / rf;
    let gd = DMatrix::from_diagonal(&DVector::from_fn(r, |j, _| (1 + j * r) as f64));
    let t = kron(&i, &z) + kron(&z, &i);
    let (n, m) = (2 * r * r, r * r);
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (m, m)).copy_from(&t);
    a.view_mut((m, m), (m, m)).copy_from(&t);
    let mut b = DMatrix::zeros(m, n);
    b.view_mut((0, 0), (m, m)).copy_from(&kron(&i, &h));
    b.view_mut((0, m), (m, m)).copy_from(&kron(&h, &i));
    let d = kron(&gd, &h);
    let sys = BlockSystem::symmetric(
        a,
        b,
        DMatrix::zeros(m, m),
        d,
        DMatrix::zeros(m, m),
        DVector::zeros(n),
        DVector::zeros(m),
        DVector::zeros(m),
    )
    .expect("consistent dimensions");
    ones_rhs(sys)
}

/// Standard-normal matrix where each entry is kept with probability `density`.
/// Entries are visited column by column; each draws a uniform, then a normal if kept.
fn sprandn(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            if rng.random::<f64>() < density {
                x[(i, j)] = rng.sample(StandardNormal);
            }
        }
    }
    x
}

fn randn(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    sprandn(rng, rows, cols, 1.0)
}

/// Random case-III system with n = 2k, m = p = k, exact solution all ones.
///
/// Uses ChaCha8 seeded by `seed`; normal variates come from `rand_distr::StandardNormal`.
pub fn example5(k: usize, seed: u64) -> BlockSystem {
    assert!(k >= 2, "k must be at least 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m, p) = (2 * k, k, k);
    let a = randn(&mut rng, n, n);
    let b = sprandn(&mut rng, m, n, 0.5);
    let c1 = sprandn(&mut rng, m, m, 0.2);
    let c = (&c1 + c1.transpose()) * 0.5;
    let d1 = sprandn(&mut rng, p, m, 0.5);
    let d2 = sprandn(&mut rng, p, m, 0.5);
    let e1 = sprandn(&mut rng, p, p, 0.3);
    let e = (&e1 + e1.transpose()) * 0.5;
    let sys = BlockSystem::new(a, b.clone(), b, c, d1, d2, e, DVector::zeros(n), DVector::zeros(m), DVector::zeros(p))
        .expect("consistent dimensions");
    ones_rhs(sys)
}

/// x_ij = exp(−2((i/3)² + (j/3)²)), 1-based.
fn gaussian_kernel(size: usize) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| {
        let (a, b) = ((i + 1) as f64 / 3.0, (j + 1) as f64 / 3.0);
        (-2.0 * (a * a + b * b)).exp()
    })
}

/// Stokes-like case-I system with r̂ = r², r̃ = r(r+1): n = r̂ + 4r̃, m = 2r̃, p = r̂.
///
/// The stated r×(r+1) Ĝ and (r+1)×r Ĥ only fit these dimensions transposed, so
/// G = [Ĝᵀ⊗I; I⊗Ĝᵀ] (2r̃×r̂) and H = [Ĥᵀ⊗I, I⊗Ĥᵀ] (r̂×2r̃).
pub fn example6(r: usize) -> BlockSystem {
    assert!(r >= 2, "r must be at least 2");
    let rh = r * r;
    let rt = r * (r + 1);
    let x = gaussian_kernel(rh);
    let a1 = &x * x.transpose() * 2.0 + eye(rh);
    let a1 = (&a1 + a1.transpose()) * 0.5;
    let d2 = DVector::from_fn(2 * rt, |j, _| {
        let j = j + 1;
        if j <= rt {
            1.0
        } else {
            1e-5 * ((j - rt) as f64).powi(2)
        }
    });
    let d3 = DVector::from_fn(2 * rt, |j, _| 1e-5 * ((j + 1 + rt) as f64).powi(2));
    let n = rh + 4 * rt;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (rh, rh)).copy_from(&a1);
    for j in 0..2 * rt {
        a[(rh + j, rh + j)] = d2[j];
        a[(rh + 2 * rt + j, rh + 2 * rt + j)] = d3[j];
    }

    let g_hat = tridiag(r, r + 1, 0.0, 2.0, -1.0);
    let ir = eye(r);
    let mut g = DMatrix::zeros(2 * rt, rh);
    g.view_mut((0, 0), (rt, rh)).copy_from(&kron(&g_hat.transpose(), &ir));
    g.view_mut((rt, 0), (rt, rh)).copy_from(&kron(&ir, &g_hat.transpose()));
    let m = 2 * rt;
    let mut b = DMatrix::zeros(m, n);
    b.view_mut((0, 0), (m, rh)).copy_from(&g);
    b.view_mut((0, rh), (m, m)).copy_from(&-eye(m));
    b.view_mut((0, rh + m), (m, m)).copy_from(&eye(m));

    let mut h_hat = DMatrix::from_fn(r + 1, r, |i, j| {
        let k = i.abs_diff(j);
        if i == r {
            0.0
        } else if k == 0 {
            ((i + 1) * r + 1) as f64
        } else {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * (r - k) as f64 / r as f64
        }
    });
    h_hat[(r, r - 1)] = 1.0;
    let p = rh;
    let mut d = DMatrix::zeros(p, m);
    d.view_mut((0, 0), (p, rt)).copy_from(&kron(&h_hat.transpose(), &ir));
    d.view_mut((0, rt), (p, rt)).copy_from(&kron(&ir, &h_hat.transpose()));

    let sys = BlockSystem::symmetric(
        a,
        b,
        DMatrix::zeros(m, m),
        d,
        DMatrix::zeros(p, p),
        DVector::zeros(n),
        DVector::zeros(m),
        DVector::zeros(p),
    )
    .expect("consistent dimensions");
    ones_rhs(sys)
}
