//! Column-stacking `vec`, the symmetric generator vector `vec_s`, the √2 scaling that makes
//! `vec_s` norm-preserving, and zero-pattern masks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// n(n+1)/2.
pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry (i, j), i >= j, in the column-wise lower-triangle layout.
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

pub fn vec(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::len("vec", rows * cols, v.len()));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Lower triangle of a symmetric matrix, stacked column by column.
pub fn vec_s(x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = x.nrows();
    if !x.is_square() {
        return Err(Error::dim("vec_s", (n, n), x.shape()));
    }
    let mut v = DVector::zeros(sym_len(n));
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if x[(i, j)] != x[(j, i)] {
                return Err(Error::NotSymmetric);
            }
            v[k] = x[(i, j)];
            k += 1;
        }
    }
    Ok(v)
}

pub fn unvec_s(v: &DVector<f64>, n: usize) -> Result<DMatrix<f64>> {
    if v.len() != sym_len(n) {
        return Err(Error::len("vec_s", sym_len(n), v.len()));
    }
    let mut x = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            x[(i, j)] = v[k];
            x[(j, i)] = v[k];
            k += 1;
        }
    }
    Ok(x)
}

/// The diagonal scaling with 1 at diagonal positions of `vec_s` and √2 elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SymScaling {
    pub n: usize,
    pub diag: DVector<f64>,
}

pub fn sym_scaling(n: usize) -> SymScaling {
    let mut diag = DVector::from_element(sym_len(n), std::f64::consts::SQRT_2);
    // 1-based: k = (2n - (i-2))(i-1)/2 + 1 for i = 1..n
    for i in 1..=n {
        let k = (2 * n + 2 - i) * (i - 1) / 2 + 1;
        diag[k - 1] = 1.0;
    }
    SymScaling { n, diag }
}

impl SymScaling {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_mul(&self.diag)
    }

    pub fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_div(&self.diag)
    }
}

/// 0/1 indicator of the nonzero entries of a matrix (exact zero test).
#[derive(Debug, Clone, PartialEq)]
pub struct SignMask {
    pub rows: usize,
    pub cols: usize,
    pub entries: DMatrix<f64>,
}

pub fn sign_mask(x: &DMatrix<f64>) -> SignMask {
    SignMask {
        rows: x.nrows(),
        cols: x.ncols(),
        entries: x.map(|v| if v != 0.0 { 1.0 } else { 0.0 }),
    }
}

impl SignMask {
    pub fn ones(rows: usize, cols: usize) -> Self {
        SignMask { rows, cols, entries: DMatrix::from_element(rows, cols, 1.0) }
    }

    pub fn is_set(&self, i: usize, j: usize) -> bool {
        self.entries[(i, j)] != 0.0
    }

    pub fn hadamard(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x.component_mul(&self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    #[test]
    fn vec_stacks_columns() {
        assert_eq!(vec(&dmatrix![1.0, 3.0; 2.0, 4.0]), dvector![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&DMatrix::zeros(2, 3)), DVector::zeros(6));
    }

    #[test]
    fn vec_s_small_cases() {
        assert_eq!(vec_s(&dmatrix![1.0, 2.0; 2.0, 3.0]).unwrap(), dvector![1.0, 2.0, 3.0]);
        assert_eq!(
            vec_s(&DMatrix::identity(3, 3)).unwrap(),
            dvector![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]
        );
        assert!(matches!(vec_s(&dmatrix![1.0, 2.0; 0.0, 1.0]), Err(Error::NotSymmetric)));
    }

    #[test]
    fn sym_index_matches_layout() {
        for n in 1..7 {
            let mut k = 0;
            for j in 0..n {
                for i in j..n {
                    assert_eq!(sym_index(n, i, j), k);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn scaling_small_cases() {
        let r2 = std::f64::consts::SQRT_2;
        assert_eq!(sym_scaling(2).diag, dvector![1.0, r2, 1.0]);
        assert_eq!(sym_scaling(1).diag, dvector![1.0]);
        // unit entries sit exactly on the diagonal positions of the layout
        let s = sym_scaling(5);
        for j in 0..5 {
            for i in j..5 {
                assert_eq!(s.diag[sym_index(5, i, j)] == 1.0, i == j);
            }
        }
    }

    #[test]
    fn sign_mask_basics() {
        assert_eq!(sign_mask(&dmatrix![0.0, 2.0; -1.0, 0.0]).entries, dmatrix![0.0, 1.0; 1.0, 0.0]);
        assert_eq!(sign_mask(&DMatrix::from_element(2, 2, 1.0)), SignMask::ones(2, 2));
    }

    fn sym_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
            let x = DMatrix::from_vec(n, n, v);
            (&x + x.transpose()) * 0.5
        })
    }

    proptest! {
        #[test]
        fn unvec_roundtrip(v in prop::collection::vec(-1e3f64..1e3, 12)) {
            let x = DMatrix::from_vec(3, 4, v);
            prop_assert_eq!(unvec(&vec(&x), 3, 4).unwrap(), x);
        }

        #[test]
        fn unvec_s_roundtrip(x in sym_matrix(5)) {
            prop_assert_eq!(unvec_s(&vec_s(&x).unwrap(), 5).unwrap(), x);
        }

        #[test]
        fn scaling_preserves_frobenius(n in 1usize..8, seed in prop::collection::vec(-10.0f64..10.0, 64)) {
            let x = DMatrix::from_fn(n, n, |i, j| seed[i.max(j) * 8 + i.min(j)]);
            let lhs = sym_scaling(n).apply(&vec_s(&x).unwrap()).norm();
            let rhs = x.norm();
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn mask_is_hadamard_idempotent(v in prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 12)) {
            let x = DMatrix::from_vec(4, 3, v);
            prop_assert_eq!(sign_mask(&x).hadamard(&x), x);
        }
    }
}
