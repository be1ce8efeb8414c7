//! Linear solvers for the discrete Dirichlet problems.
//!
//! The systems are symmetric positive definite with constant diagonal and
//! small bandwidth under row-major vertex ordering, so the workhorse is a
//! banded Cholesky factorization. A matrix-free conjugate-gradient path
//! exists for repeated solves against a slowly changing system (the explorer
//! resolves one vertex per step and warm-starts from the previous solution).
//! `dense_solve_spd` is a deliberately simple reference solver used by tests
//! to check both against an independent elimination.

use crate::error::{MsleError, Result};

/// Symmetric positive definite band matrix, lower band plus diagonal stored
/// row-major: entry (i, j) with i - bw <= j <= i lives at
/// `data[i * (bw + 1) + (j - i + bw)]`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Set entry (i, j), j <= i (the mirror entry is implied).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            return 0.0;
        }
        self.data[self.idx(hi, lo)]
    }

    /// In-place Cholesky; errors if the matrix is not positive definite.
    pub fn cholesky(mut self) -> Result<BandedChol> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = self.data[i * w + (j + bw - i)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    sum -= self.data[i * w + (k + bw - i)] * self.data[j * w + (k + bw - j)];
                }
                if j == i {
                    if sum <= 0.0 {
                        return Err(MsleError::Solve(format!(
                            "matrix is not positive definite at pivot {i} (value {sum:.3e})"
                        )));
                    }
                    self.data[i * w + bw] = sum.sqrt();
                } else {
                    self.data[i * w + (j + bw - i)] = sum / self.data[j * w + bw];
                }
            }
        }
        Ok(BandedChol {
            n,
            bw,
            data: self.data,
        })
    }
}

/// Cholesky factor L (lower band) of a `BandedSpd`.
#[derive(Debug, Clone)]
pub struct BandedChol {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

impl BandedChol {
    /// Solve A x = rhs via forward and back substitution.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        assert_eq!(x.len(), n);
        // L y = rhs
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut sum = x[i];
            for k in lo..i {
                sum -= self.data[i * w + (k + bw - i)] * x[k];
            }
            x[i] = sum / self.data[i * w + bw];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut sum = x[i];
            for k in (i + 1)..=hi {
                sum -= self.data[k * w + (i + bw - k)] * x[k];
            }
            x[i] = sum / self.data[i * w + bw];
        }
    }
}

/// Conjugate gradients on a matrix-free SPD operator. `apply(x, y)` writes
/// A x into y. Converges to relative residual `tol`; `x0` warm-starts.
pub fn cg_solve(
    apply: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = match x0 {
        Some(x0) => {
            assert_eq!(x0.len(), n);
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], 0));
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let target = (tol * bnorm) * (tol * bnorm);
    let mut iters = 0;
    while rr > target && iters < max_iter {
        apply(&p, &mut ax);
        let pap: f64 = p.iter().zip(&ax).map(|(pi, ai)| pi * ai).sum();
        if pap <= 0.0 {
            return Err(MsleError::Solve(
                "conjugate gradients hit a non-positive curvature direction".into(),
            ));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iters += 1;
    }
    if rr > target {
        return Err(MsleError::Solve(format!(
            "conjugate gradients stalled after {iters} iterations \
             (residual {:.3e}, target {:.3e})",
            rr.sqrt(),
            target.sqrt()
        )));
    }
    Ok((x, iters))
}

/// Reference solver: dense Gaussian elimination with partial pivoting.
/// Quadratic memory; for small test systems only.
pub fn dense_solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        if a[pivot_row][col].abs() < 1e-14 {
            return Err(MsleError::Solve(format!("singular matrix at column {col}")));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in (row + 1)..n {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Ok(x)
}
