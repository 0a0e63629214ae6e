//! Tridiagonal matrices: products, LU with partial pivoting, condition numbers.

use crate::error::{Error, Result};

/// `A` with `sub[i] = A[i+1][i]`, `diag[i] = A[i][i]`, `sup[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        let off = n.saturating_sub(1);
        if sub.len() != off {
            return Err(Error::Dimension { expected: off, got: sub.len() });
        }
        if sup.len() != off {
            return Err(Error::Dimension { expected: off, got: sup.len() });
        }
        Ok(Self { sub, diag, sup })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j == i + 1 {
            self.sup[i]
        } else if i == j + 1 {
            self.sub[j]
        } else {
            0.0
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    pub fn norm_1(&self) -> f64 {
        (0..self.len())
            .map(|j| {
                let mut s = self.diag[j].abs();
                if j > 0 {
                    s += self.sup[j - 1].abs();
                }
                if j + 1 < self.len() {
                    s += self.sub[j].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn factor(&self) -> Result<TridiagonalLu> {
        TridiagonalLu::new(self)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(rhs)
    }

    /// Exact 1-norm condition number, `||A||_1 ||A^{-1}||_1`.
    pub fn condition_1(&self) -> Result<f64> {
        let lu = self.factor()?;
        let n = self.len();
        let mut inv_norm: f64 = 0.0;
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = lu.solve(&e)?;
            inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
        }
        Ok(self.norm_1() * inv_norm)
    }
}

/// LU factors with row interchanges (LAPACK `gttrf` layout).
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    l: Vec<f64>,
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn new(a: &Tridiagonal) -> Result<Self> {
        let n = a.len();
        let mut d = a.diag.clone();
        let mut du = a.sup.clone();
        let mut dl = a.sub.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(Error::SingularPivot { row: i });
                }
                let m = dl[i] / d[i];
                dl[i] = m;
                d[i + 1] -= m * du[i];
            } else {
                let m = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = m;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - m * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -m * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            return Err(Error::SingularPivot { row: n - 1 });
        }
        Ok(Self { l: dl, u0: d, u1: du, u2: du2, swapped })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.u0.len();
        if rhs.len() != n {
            return Err(Error::Dimension { expected: n, got: rhs.len() });
        }
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.l[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= self.u1[i] * b[i + 1];
            }
            if i + 2 < n {
                v -= self.u2[i] * b[i + 2];
            }
            b[i] = v / self.u0[i];
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_solve(a: &Tridiagonal, b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let x = m.lu().solve(&nalgebra::DVector::from_column_slice(b)).unwrap();
        x.iter().copied().collect()
    }

    #[test]
    fn needs_pivoting() {
        // Zero leading diagonal forces a row swap.
        let a = Tridiagonal::new(vec![1.0, 2.0], vec![0.0, 1.0, 3.0], vec![2.0, 1.0]).unwrap();
        let x = a.solve(&[1.0, 2.0, 3.0]).unwrap();
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = Tridiagonal::new(vec![1.0], vec![1.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(a.solve(&[1.0, 1.0]), Err(Error::SingularPivot { .. })));
    }

    #[test]
    fn condition_of_identity() {
        let a = Tridiagonal::new(vec![0.0; 4], vec![1.0; 5], vec![0.0; 4]).unwrap();
        assert_eq!(a.condition_1().unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn agrees_with_dense_lu(
            n in 1usize..30,
            seed in proptest::collection::vec(-1.0f64..1.0, 90 * 3),
        ) {
            let sub = seed[..n - 1].to_vec();
            let sup = seed[90..90 + n - 1].to_vec();
            let diag: Vec<f64> = seed[180..180 + n].iter().map(|v| v + 3.0 * v.signum()).collect();
            let a = Tridiagonal::new(sub, diag, sup).unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = a.solve(&b).unwrap();
            let y = dense_solve(&a, &b);
            for (xi, yi) in x.iter().zip(&y) {
                prop_assert!((xi - yi).abs() < 1e-10 * (1.0 + yi.abs()));
            }
        }
    }
}
