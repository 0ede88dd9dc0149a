//! Small dense real linear algebra: LU with partial pivoting and a one-norm
//! condition estimate. The Nyström systems here are a few hundred unknowns,
//! so a plain `O(n³)` factorization is more than enough.

use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct Matrix {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.at(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
    a_norm1: f64,
}

impl Lu {
    pub fn factor(m: &Matrix) -> Result<Self> {
        let n = m.n;
        let a_norm1 = m.one_norm();
        let mut lu = m.a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut max = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > max {
                    max = v;
                    p = i;
                }
            }
            if max == 0.0 {
                return Err(Error::LinearSolve {
                    reason: format!("singular pivot at column {k}"),
                    cond: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in (k + 1)..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Self { n, lu, piv, a_norm1 })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solve with the transpose (needed by the condition estimator).
    fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        // U^T y = b (forward)
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        // L^T z = y (backward)
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[j * n + i] * x[j];
            }
            x[i] = s;
        }
        // undo pivoting
        let mut out = vec![0.0; n];
        for (i, &p) in self.piv.iter().enumerate() {
            out[p] = x[i];
        }
        out
    }

    /// Hager-style one-norm condition estimate.
    pub fn cond_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_t(&xi);
            let (mut jmax, mut zmax) = (0, 0.0);
            for (j, v) in z.iter().enumerate() {
                if v.abs() > zmax {
                    zmax = v.abs();
                    jmax = j;
                }
            }
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= zx.abs() {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        est * self.a_norm1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let mut m = Matrix::zeros(3);
        let a = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, a[i][j]);
            }
        }
        let lu = Lu::factor(&m).unwrap();
        let x = lu.solve(&[8.0, -11.0, -3.0]);
        let expect = [2.0, 3.0, -1.0];
        for i in 0..3 {
            assert!((x[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_solve_consistent() {
        let mut m = Matrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                m.set(i, j, ((i * 7 + j * 3) % 5) as f64 + if i == j { 6.0 } else { 0.0 });
            }
        }
        let lu = Lu::factor(&m).unwrap();
        let b = [1.0, -2.0, 0.5, 3.0];
        let x = lu.solve_t(&b);
        // check A^T x = b
        for j in 0..4 {
            let mut s = 0.0;
            for i in 0..4 {
                s += m.at(i, j) * x[i];
            }
            assert!((s - b[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_estimate_order_of_magnitude() {
        let mut m = Matrix::zeros(2);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1e-6);
        let lu = Lu::factor(&m).unwrap();
        let c = lu.cond_estimate();
        assert!(c > 1e5 && c < 1e7, "cond {c}");
    }

    #[test]
    fn singular_matrix_reports_failure() {
        let m = Matrix::zeros(3);
        assert!(matches!(Lu::factor(&m), Err(Error::LinearSolve { .. })));
    }
}
