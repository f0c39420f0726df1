//! Small dense/banded direct solvers used by the Poisson and Newton steps.

use crate::scalar::Scalar;

/// Solves the tridiagonal system with sub-diagonal `lower` (first entry
/// unused), diagonal `diag` and super-diagonal `upper` (last entry unused).
/// No pivoting; callers pass diagonally dominant matrices.
pub fn solve_tridiagonal<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];
    if n == 0 {
        return x;
    }
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] = x[i] - c[i + 1] * x[i + 1];
    }
    x
}

/// Square band matrix with equal lower and upper half-bandwidth, stored
/// row-wise as `rows × (2 bw + 1)`.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![T::zero(); n * (2 * bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.bw >= i && j <= i + self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.bw < i || j > i + self.bw {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// In-place LU without pivoting followed by the two triangular solves.
    /// Stable for column diagonally dominant matrices.
    pub fn solve(mut self, rhs: &[T]) -> Vec<T> {
        let (n, bw) = (self.n, self.bw);
        let mut x = rhs.to_vec();
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                if l == T::zero() {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..=last {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] = self.data[ij] - l * kj;
                }
                x[i] = x[i] - l * x[k];
            }
        }
        for k in (0..n).rev() {
            let last = (k + bw).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last {
                s = s - self.data[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_band_solver() {
        let n = 9;
        let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut band = BandMatrix::zeros(n, 1);
        for i in 0..n {
            band.add(i, i, diag[i]);
            if i > 0 {
                band.add(i, i - 1, lower[i]);
            }
            if i + 1 < n {
                band.add(i, i + 1, upper[i]);
            }
        }
        // residual check
        for i in 0..n {
            let mut r = diag[i] * x[i] - rhs[i];
            if i > 0 {
                r += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                r += upper[i] * x[i + 1];
            }
            assert!(r.abs() < 1e-13);
        }
        let y = band.solve(&rhs);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn band_solver_wide() {
        let (n, bw) = (20, 4);
        let mut m = BandMatrix::zeros(n, bw);
        let mut dense = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                let v = if i == j { 10.0 } else { ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6 };
                m.add(i, j, v);
                dense[i][j] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 - 1.0).collect();
        let x = m.solve(&rhs);
        for i in 0..n {
            let r: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum::<f64>() - rhs[i];
            assert!(r.abs() < 1e-12);
        }
    }
}
