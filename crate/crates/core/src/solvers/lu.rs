use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::{ApproxSolution, BlockSystem};

/// PA = LU with row partial pivoting, stored in place.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(mut a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::dim("matrix", (n, n), a.shape()));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, max) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if max == 0.0 {
                return Err(Error::SingularPivot(k));
            }
            if piv != k {
                a.swap_rows(piv, k);
                perm.swap(piv, k);
            }
            let akk = a[(k, k)];
            for i in k + 1..n {
                let l = a[(i, k)] / akk;
                a[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        a[(i, j)] -= l * a[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        let mut x = DVector::from_iterator(n, self.perm.iter().map(|&i| b[i]));
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

/// Solve the monolithic system by Gaussian elimination with partial pivoting.
pub fn gep_solve(sys: &BlockSystem) -> Result<ApproxSolution> {
    let w = Lu::new(sys.monolithic())?.solve(&sys.rhs());
    let (n, m, p) = sys.dims();
    ApproxSolution::from_stacked(&w, n, m, p)
}
