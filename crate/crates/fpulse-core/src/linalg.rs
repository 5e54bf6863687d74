//! Dense and iterative linear solvers sized for the bordered collocation
//! systems: partial-pivot LU for small windows, Householder least squares
//! as the rank-deficient fallback, and restarted GMRES with right
//! preconditioning for large windows.

use crate::real::Real;
use crate::util::pairwise_sum;

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is numerically singular at pivot {pivot} (|p| = {magnitude:e})")]
    Singular { pivot: usize, magnitude: f64 },
}

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(n: usize) -> Self {
        Dense { n, a: vec![T::zero(); n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    /// In-place LU with partial pivoting; returns the permutation.
    pub fn lu_factor(&mut self) -> Result<Vec<usize>, LinalgError> {
        let n = self.n;
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut best = col;
            let mut best_mag = self.at(col, col).abs();
            for r in col + 1..n {
                let m = self.at(r, col).abs();
                if m > best_mag {
                    best = r;
                    best_mag = m;
                }
            }
            if !(best_mag > T::zero()) || !best_mag.is_finite() {
                return Err(LinalgError::Singular {
                    pivot: col,
                    magnitude: best_mag.to_f64().unwrap_or(f64::NAN),
                });
            }
            if best != col {
                piv.swap(col, best);
                for j in 0..n {
                    self.a.swap(col * n + j, best * n + j);
                }
            }
            let d = self.at(col, col);
            for r in col + 1..n {
                let f = self.at(r, col) / d;
                self.set(r, col, f);
                if f != T::zero() {
                    for j in col + 1..n {
                        let v = self.at(r, j) - f * self.at(col, j);
                        self.set(r, j, v);
                    }
                }
            }
        }
        Ok(piv)
    }

    /// Solve with a factorization from `lu_factor`.
    pub fn lu_solve(&self, piv: &[usize], b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.at(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.at(i, j) * x[j];
            }
            x[i] = acc / self.at(i, i);
        }
        x
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.a[i * n..(i + 1) * n];
                let prods: Vec<T> = row.iter().zip(x).map(|(&a, &b)| a * b).collect();
                pairwise_sum(&prods)
            })
            .collect()
    }
}

/// Minimum-norm-residual solve of an (rows x cols) system, rows >= cols, by
/// Householder QR. Consumes the matrix (row-major) and right-hand side.
pub fn lstsq_qr<T: Real>(a: &mut [T], rows: usize, cols: usize, b: &mut [T]) -> Vec<T> {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    assert!(rows >= cols);
    for k in 0..cols {
        // Householder vector for column k below the diagonal
        let mut norm = T::zero();
        for i in k..rows {
            norm = norm + a[i * cols + k] * a[i * cols + k];
        }
        let norm = norm.sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if a[k * cols + k] > T::zero() { -norm } else { norm };
        let mut v = vec![T::zero(); rows - k];
        v[0] = a[k * cols + k] - alpha;
        for i in k + 1..rows {
            v[i - k] = a[i * cols + k];
        }
        let vtv = {
            let sq: Vec<T> = v.iter().map(|&x| x * x).collect();
            pairwise_sum(&sq)
        };
        if vtv == T::zero() {
            continue;
        }
        a[k * cols + k] = alpha;
        for i in k + 1..rows {
            a[i * cols + k] = T::zero();
        }
        // apply I - 2 v v^T / (v^T v) to the trailing columns and to b
        for j in k + 1..cols {
            let mut dot = T::zero();
            for i in k..rows {
                dot = dot + v[i - k] * a[i * cols + j];
            }
            let f = T::two() * dot / vtv;
            for i in k..rows {
                a[i * cols + j] = a[i * cols + j] - f * v[i - k];
            }
        }
        let mut dot = T::zero();
        for i in k..rows {
            dot = dot + v[i - k] * b[i];
        }
        let f = T::two() * dot / vtv;
        for i in k..rows {
            b[i] = b[i] - f * v[i - k];
        }
    }
    // back substitution on the upper-triangular cols x cols block
    let mut x = vec![T::zero(); cols];
    for i in (0..cols).rev() {
        let mut acc = b[i];
        for j in i + 1..cols {
            acc = acc - a[i * cols + j] * x[j];
        }
        let d = a[i * cols + i];
        x[i] = if d.abs() > T::zero() { acc / d } else { T::zero() };
    }
    x
}

#[derive(Debug, Clone)]
pub struct GmresOutcome<T> {
    pub x: Vec<T>,
    pub residual_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Restarted GMRES with right preconditioning: solves A x = b given the
/// action of A and of an approximate inverse M (so the reported residual is
/// that of the original system). Runs deterministically.
pub fn gmres<T: Real>(
    apply_a: &dyn Fn(&[T]) -> Vec<T>,
    apply_m: &dyn Fn(&[T]) -> Vec<T>,
    b: &[T],
    x0: &[T],
    restart: usize,
    max_restarts: usize,
    tol: T,
) -> GmresOutcome<T> {
    let n = b.len();
    let norm = |v: &[T]| -> T {
        let sq: Vec<T> = v.iter().map(|&x| x * x).collect();
        pairwise_sum(&sq).sqrt()
    };
    let mut x = x0.to_vec();
    let mut total_iters = 0usize;

    for _ in 0..max_restarts {
        let ax = apply_a(&x);
        let r0: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let beta = norm(&r0);
        if beta <= tol {
            return GmresOutcome { x, residual_norm: beta, iterations: total_iters, converged: true };
        }
        let m = restart.min(n);
        // Arnoldi basis (m+1 vectors), Hessenberg in compact columns
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        basis.push(r0.iter().map(|&v| v / beta).collect());
        let mut h = vec![T::zero(); (m + 1) * m];
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k_used = 0usize;
        let mut res_est = beta;

        for k in 0..m {
            let z = apply_m(&basis[k]);
            let mut w = apply_a(&z);
            // modified Gram-Schmidt
            for i in 0..=k {
                let dots: Vec<T> = w.iter().zip(&basis[i]).map(|(&a, &b)| a * b).collect();
                let hik = pairwise_sum(&dots);
                h[i * m + k] = hik;
                for (wj, bj) in w.iter_mut().zip(&basis[i]) {
                    *wj = *wj - hik * *bj;
                }
            }
            let hk1 = norm(&w);
            h[(k + 1) * m + k] = hk1;
            // apply accumulated Givens rotations to the new column
            for i in 0..k {
                let t = cs[i] * h[i * m + k] + sn[i] * h[(i + 1) * m + k];
                h[(i + 1) * m + k] = -sn[i] * h[i * m + k] + cs[i] * h[(i + 1) * m + k];
                h[i * m + k] = t;
            }
            let (c, s) = {
                let (p, q) = (h[k * m + k], h[(k + 1) * m + k]);
                let r = (p * p + q * q).sqrt();
                if r == T::zero() {
                    (T::one(), T::zero())
                } else {
                    (p / r, q / r)
                }
            };
            cs[k] = c;
            sn[k] = s;
            h[k * m + k] = c * h[k * m + k] + s * h[(k + 1) * m + k];
            h[(k + 1) * m + k] = T::zero();
            g[k + 1] = -s * g[k];
            g[k] = c * g[k];
            k_used = k + 1;
            total_iters += 1;
            res_est = g[k + 1].abs();
            if res_est <= tol || hk1 == T::zero() {
                break;
            }
            basis.push(w.iter().map(|&v| v / hk1).collect());
        }

        // solve the triangular system for the Krylov coefficients
        let mut y = vec![T::zero(); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc = acc - h[i * m + j] * y[j];
            }
            y[i] = acc / h[i * m + i];
        }
        // x += M (V y)
        let mut vy = vec![T::zero(); n];
        for (j, vj) in basis.iter().take(k_used).enumerate() {
            for (t, &vij) in vy.iter_mut().zip(vj) {
                *t = *t + y[j] * vij;
            }
        }
        let mz = apply_m(&vy);
        for (xi, zi) in x.iter_mut().zip(&mz) {
            *xi = *xi + *zi;
        }
        if res_est <= tol {
            let ax = apply_a(&x);
            let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
            let rn = norm(&r);
            return GmresOutcome { x, residual_norm: rn, iterations: total_iters, converged: rn <= tol * T::of(10.0) };
        }
    }
    let ax = apply_a(&x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let rn = norm(&r);
    GmresOutcome { x, residual_norm: rn, iterations: total_iters, converged: rn <= tol }
}
