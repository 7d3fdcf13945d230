//! Weighted non-negative least squares.
//!
//! Minimizes `Σ w_i (y_i − Σ_j X_ij β_j)²` subject to `β ≥ 0` with the
//! Lawson–Hanson active-set method. The passive-set subproblems are solved
//! with a Cholesky factorization of the weighted Gram matrix, which is formed
//! once; each iteration then costs `O(n³)` in the number of columns only,
//! independent of the number of rows.

use thiserror::Error;

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NnlsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("weight {index} is not a positive finite number")]
    NonPositiveWeight { index: usize },
    #[error("degenerate system: no columns or no rows")]
    DegenerateSystem,
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct NnlsOptions<T> {
    /// Stationarity tolerance, relative to `max(1, ‖Xᵀ W y‖∞)`.
    pub kkt_tol: T,
    /// Outer iteration cap; `None` means `max(50, 5 · columns)`.
    pub max_iter: Option<usize>,
}

impl<T: Scalar> Default for NnlsOptions<T> {
    fn default() -> Self {
        NnlsOptions { kkt_tol: T::default_kkt_tol(), max_iter: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution<T> {
    pub coef: Vec<T>,
    /// Weighted residual sum of squares at `coef`.
    pub objective: T,
    pub iterations: usize,
}

/// `Σ w_i (y_i − X_i · β)²`.
pub fn weighted_objective<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T], beta: &[T]) -> T {
    (0..x.nrows()).fold(T::zero(), |acc, i| {
        let fit = x.row(i).iter().zip(beta).fold(T::zero(), |s, (&a, &b)| s + a * b);
        let r = y[i] - fit;
        acc + w[i] * r * r
    })
}

pub fn solve_nnls<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T]) -> Result<NnlsSolution<T>, NnlsError> {
    solve_nnls_with(x, y, w, &NnlsOptions::default())
}

pub fn solve_nnls_with<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    w: &[T],
    opts: &NnlsOptions<T>,
) -> Result<NnlsSolution<T>, NnlsError> {
    let (m, n) = (x.nrows(), x.ncols());
    if y.len() != m || w.len() != m {
        return Err(NnlsError::DimensionMismatch(format!(
            "X is {m}x{n}, y has {}, w has {}",
            y.len(),
            w.len()
        )));
    }
    if m == 0 || n == 0 {
        return Err(NnlsError::DegenerateSystem);
    }
    if let Some(index) = w.iter().position(|&wi| wi <= T::zero() || !wi.is_finite()) {
        return Err(NnlsError::NonPositiveWeight { index });
    }

    let (gram, rhs) = normal_equations(x, y, w);
    let scale = rhs.iter().fold(T::one(), |a, &c| a.max(c.abs()));
    let tol = opts.kkt_tol * scale;
    let max_iter = opts.max_iter.unwrap_or_else(|| (5 * n).max(50));

    let mut coef = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let mut blocked = vec![false; n];
    let mut iterations = 0;

    loop {
        if iterations >= max_iter {
            return Err(NnlsError::NoConvergence { iterations });
        }
        iterations += 1;

        let grad = negative_gradient(&gram, &rhs, &coef);
        let candidates = || (0..n).filter(|&j| !passive[j] && !blocked[j] && grad[j] > tol);
        let Some(best) = candidates().map(|j| grad[j]).reduce(T::max) else { break };
        // Gradients within tolerance of the best count as tied; the lowest
        // index wins so rounding noise cannot reorder the active-set path.
        let j = candidates().find(|&j| grad[j] >= best - tol).expect("best is a candidate");
        passive[j] = true;

        let mut first = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z = match cholesky_solve(&gram, &rhs, &idx) {
                Some(z) => z,
                None if first => {
                    // j is numerically dependent on the current passive set.
                    passive[j] = false;
                    blocked[j] = true;
                    break;
                }
                None => return Err(NnlsError::NoConvergence { iterations }),
            };
            let zj = idx.iter().position(|&k| k == j).map(|p| z[p]);
            if first && zj.is_some_and(|v| v <= T::zero()) {
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first = false;

            if z.iter().all(|&v| v > T::zero()) {
                for (&k, &v) in idx.iter().zip(&z) {
                    coef[k] = v;
                }
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }

            // Step toward z as far as feasibility allows, then drop the
            // coefficients that hit zero.
            let mut step: Option<(T, usize)> = None;
            for (&k, &v) in idx.iter().zip(&z) {
                if v <= T::zero() {
                    let t = if coef[k] <= T::zero() { T::zero() } else { coef[k] / (coef[k] - v) };
                    if step.is_none_or(|(a, _)| t < a) {
                        step = Some((t, k));
                    }
                }
            }
            let (alpha, leaving) = step.expect("some passive coefficient is infeasible");
            for (&k, &v) in idx.iter().zip(&z) {
                coef[k] = coef[k] + alpha * (v - coef[k]);
            }
            for &k in &idx {
                if k == leaving || coef[k] <= T::zero() {
                    coef[k] = T::zero();
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
        }
    }

    let objective = weighted_objective(x, y, w, &coef);
    Ok(NnlsSolution { coef, objective, iterations })
}

fn normal_equations<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T]) -> (Matrix<T>, Vec<T>) {
    let n = x.ncols();
    let mut gram = Matrix::zeros(n, n);
    let mut rhs = vec![T::zero(); n];
    let mut nz: Vec<usize> = Vec::with_capacity(n);
    for i in 0..x.nrows() {
        let row = x.row(i);
        let wi = w[i];
        nz.clear();
        nz.extend((0..n).filter(|&j| row[j] != T::zero()));
        for (p, &j) in nz.iter().enumerate() {
            let a = wi * row[j];
            rhs[j] += a * y[i];
            let grow = &mut gram.data[j * n..(j + 1) * n];
            for &k in &nz[p..] {
                grow[k] += a * row[k];
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            gram.data[j * n + k] = gram.data[k * n + j];
        }
    }
    (gram, rhs)
}

fn negative_gradient<T: Scalar>(gram: &Matrix<T>, rhs: &[T], coef: &[T]) -> Vec<T> {
    (0..rhs.len())
        .map(|j| {
            let gx = gram.row(j).iter().zip(coef).fold(T::zero(), |s, (&g, &b)| s + g * b);
            rhs[j] - gx
        })
        .collect()
}

/// Solves `G[idx, idx] z = rhs[idx]`; `None` if the submatrix is numerically
/// singular.
fn cholesky_solve<T: Scalar>(gram: &Matrix<T>, rhs: &[T], idx: &[usize]) -> Option<Vec<T>> {
    let p = idx.len();
    let mut l = vec![T::zero(); p * p];
    let max_diag = idx.iter().fold(T::zero(), |a, &k| a.max(gram.get(k, k)));
    let floor = T::pivot_tol() * max_diag;
    for r in 0..p {
        for c in 0..=r {
            let mut s = gram.get(idx[r], idx[c]);
            for k in 0..c {
                s -= l[r * p + k] * l[c * p + k];
            }
            if r == c {
                if s.is_nan() || s <= floor {
                    return None;
                }
                l[r * p + r] = s.sqrt();
            } else {
                l[r * p + c] = s / l[c * p + c];
            }
        }
    }
    let mut z: Vec<T> = idx.iter().map(|&k| rhs[k]).collect();
    for r in 0..p {
        for k in 0..r {
            let t = l[r * p + k] * z[k];
            z[r] -= t;
        }
        z[r] /= l[r * p + r];
    }
    for r in (0..p).rev() {
        for k in r + 1..p {
            let t = l[k * p + r] * z[k];
            z[r] -= t;
        }
        z[r] /= l[r * p + r];
    }
    Some(z)
}
