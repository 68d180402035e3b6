//! Linear solves with the jittered null-gene correlation block, and the
//! brute-force Mahalanobis minimizer used to check the closed form.
//!
//! Two routes to `x = (C00 + delta I)^-1 t0`:
//!
//! - [`solve_dense`]: Cholesky factorization of the materialized `c x c` block,
//!   `O(c^3)`.
//! - [`solve_lowrank`]: the matrix inversion lemma applied to
//!   `delta I + Z0 Z0^T`, needing only an `n x n` factorization, `O(c n^2)`.
//!
//! When `n < c` the block is singular before jitter and its condition number
//! is of order `||C00|| / delta`. The relative residual `||C00 x - t0|| / ||t0||`
//! is then dominated by the rounding of `x` itself, so solves are accepted on
//! the normwise backward error instead; both are reported.

use std::fmt;

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};
use crate::numeric::{norm2, Accumulator};

/// Largest normwise backward error accepted from a solve.
pub const BACKWARD_ERROR_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DenseCholesky,
    LowRankWoodbury,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMethod::DenseCholesky => "dense-cholesky",
            SolveMethod::LowRankWoodbury => "lowrank-woodbury",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub method: SolveMethod,
    /// `||A x - t0||_2 / ||t0||_2`, with the residual accumulated in
    /// double-double precision.
    pub residual_norm: f64,
    /// `||A x - t0||_2 / (||A||_F ||x||_2 + ||t0||_2)`.
    pub backward_error: f64,
    /// `Z0^T x`, obtained without forming the large `x` (low-rank route only).
    pub projection: Option<Vec<f64>>,
}

fn column(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn to_vec(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

fn finish(
    solution: Vec<f64>,
    method: SolveMethod,
    residual: &[f64],
    matrix_norm: f64,
    t0: &[f64],
    projection: Option<Vec<f64>>,
) -> Result<SolveReport> {
    let r = norm2(residual);
    let t_norm = norm2(t0);
    let x_norm = norm2(&solution);
    let residual_norm = if t_norm > 0.0 { r / t_norm } else { r };
    let denom = matrix_norm * x_norm + t_norm;
    let backward_error = if denom > 0.0 { r / denom } else { 0.0 };
    if !(backward_error <= BACKWARD_ERROR_TOLERANCE) {
        return Err(Error::InaccurateSolve {
            backward_error,
            tolerance: BACKWARD_ERROR_TOLERANCE,
        });
    }
    Ok(SolveReport {
        solution,
        method,
        residual_norm,
        backward_error,
        projection,
    })
}

/// Solves `a x = t0` for symmetric positive definite `a` by Cholesky.
///
/// Only the lower triangle of `a` is factorized; the residual uses all of it.
pub fn solve_dense(a: MatRef<'_, f64>, t0: &[f64]) -> Result<SolveReport> {
    let c = t0.len();
    if a.nrows() != c || a.ncols() != c {
        return Err(Error::Dimension(format!(
            "{}x{} matrix with right-hand side of length {c}",
            a.nrows(),
            a.ncols()
        )));
    }
    let llt = a.llt(Side::Lower).map_err(|e| match e {
        faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
            Error::NotPositiveDefinite {
                stage: "dense",
                leading_minor: index + 1,
            }
        }
    })?;
    let x = to_vec(&llt.solve(column(t0)));

    let mut residual = vec![0.0; c];
    let mut frob = 0.0;
    for (i, r) in residual.iter_mut().enumerate() {
        let mut acc = Accumulator::default();
        for (j, &xj) in x.iter().enumerate() {
            let aij = a[(i, j)];
            acc.add_product(aij, xj);
            frob += aij * aij;
        }
        acc.add(-t0[i]);
        *r = acc.value();
    }
    finish(x, SolveMethod::DenseCholesky, &residual, frob.sqrt(), t0, None)
}

/// Solves `(delta I + Z0 Z0^T) x = t0` via the matrix inversion lemma:
/// `x = (t0 - Z0 (delta I_n + Z0^T Z0)^-1 Z0^T t0) / delta`.
pub fn solve_lowrank(z0: MatRef<'_, f64>, delta: f64, t0: &[f64]) -> Result<SolveReport> {
    solve_lowrank_diag(z0, &vec![delta; t0.len()], t0)
}

/// Solves `(Lambda + Z0 Z0^T) x = t0` for a positive diagonal `Lambda`.
///
/// With `d = min(Lambda)` and `q_i = d / Lambda_i`, the inner system is
/// `G = d I + Z0^T Q Z0`, `w = G^-1 Z0^T Q t0`, and `x = (t0 - Z0 w) / Lambda`.
/// Algebraically `Z0^T x = w`, which is returned as the projection.
pub fn solve_lowrank_diag(z0: MatRef<'_, f64>, diagonal: &[f64], t0: &[f64]) -> Result<SolveReport> {
    let (c, n) = (z0.nrows(), z0.ncols());
    if t0.len() != c || diagonal.len() != c {
        return Err(Error::Dimension(format!(
            "factor with {c} rows, diagonal of length {}, right-hand side of length {}",
            diagonal.len(),
            t0.len()
        )));
    }
    if let Some(d) = diagonal.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::invalid(format!("diagonal shift must be positive, got {d}")));
    }
    let d = diagonal.iter().copied().fold(f64::INFINITY, f64::min);
    let d = if d.is_finite() { d } else { 1.0 };
    let q: Vec<f64> = diagonal.iter().map(|l| d / l).collect();

    let scaled = Mat::from_fn(c, n, |i, j| q[i] * z0[(i, j)]);
    let mut g = Mat::<f64>::zeros(n, n);
    matmul(g.as_mut(), Accum::Replace, z0.transpose(), scaled.as_ref(), 1.0, Par::Seq);
    for k in 0..n {
        g[(k, k)] += d;
    }
    let llt = g.llt(Side::Lower).map_err(|e| match e {
        faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
            Error::NotPositiveDefinite {
                stage: "inner low-rank",
                leading_minor: index + 1,
            }
        }
    })?;
    let qt = column(&t0.iter().zip(&q).map(|(t, q)| t * q).collect::<Vec<_>>());
    let mut rhs = Mat::<f64>::zeros(n, 1);
    matmul(rhs.as_mut(), Accum::Replace, z0.transpose(), qt.as_ref(), 1.0, Par::Seq);
    let w = llt.solve(rhs);
    let mut zw = Mat::<f64>::zeros(c, 1);
    matmul(zw.as_mut(), Accum::Replace, z0, w.as_ref(), 1.0, Par::Seq);
    let x: Vec<f64> = (0..c).map(|i| (t0[i] - zw[(i, 0)]) / diagonal[i]).collect();

    // Residual Lambda x + Z0 (Z0^T x) - t0 in double-double.
    let proj: Vec<f64> = (0..n)
        .map(|k| {
            let mut acc = Accumulator::default();
            for (i, &xi) in x.iter().enumerate() {
                acc.add_product(z0[(i, k)], xi);
            }
            acc.value()
        })
        .collect();
    let residual: Vec<f64> = (0..c)
        .map(|i| {
            let mut acc = Accumulator::default();
            acc.add_product(diagonal[i], x[i]);
            for (k, &pk) in proj.iter().enumerate() {
                acc.add_product(z0[(i, k)], pk);
            }
            acc.add(-t0[i]);
            acc.value()
        })
        .collect();

    // ||Lambda + Z Z^T||_F^2 = ||Z^T Z||_F^2 + 2 sum Lambda_i |z_i|^2 + sum Lambda_i^2.
    let mut ztz = Mat::<f64>::zeros(n, n);
    matmul(ztz.as_mut(), Accum::Replace, z0.transpose(), z0, 1.0, Par::Seq);
    let mut frob2 = 0.0;
    for j in 0..n {
        for i in 0..n {
            frob2 += ztz[(i, j)] * ztz[(i, j)];
        }
    }
    for (i, &l) in diagonal.iter().enumerate() {
        let row2: f64 = (0..n).map(|k| z0[(i, k)] * z0[(i, k)]).sum();
        frob2 += 2.0 * l * row2 + l * l;
    }

    finish(
        x,
        SolveMethod::LowRankWoodbury,
        &residual,
        frob2.sqrt(),
        t0,
        Some(to_vec(&w)),
    )
}

fn spd_factor(sigma: MatRef<'_, f64>, stage: &'static str) -> Result<faer::linalg::solvers::Llt<f64>> {
    sigma.llt(Side::Lower).map_err(|e| match e {
        faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
            Error::NotPositiveDefinite {
                stage,
                leading_minor: index + 1,
            }
        }
    })
}

/// `sqrt((t - u)^T Sigma^-1 (t - u))`.
pub fn mahalanobis_distance(t: &[f64], u: &[f64], sigma: MatRef<'_, f64>) -> Result<f64> {
    let m = t.len();
    if u.len() != m || sigma.nrows() != m || sigma.ncols() != m {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}, matrix {}x{}",
            m,
            u.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let llt = spd_factor(sigma, "covariance")?;
    let diff: Vec<f64> = t.iter().zip(u).map(|(a, b)| a - b).collect();
    let y = llt.solve(column(&diff));
    let q: f64 = diff.iter().enumerate().map(|(i, d)| d * y[(i, 0)]).sum();
    Ok(q.max(0.0).sqrt())
}

/// Minimizes `(t - u)^T Sigma^-1 (t - u)` over `u = (0, u1)` by brute force.
///
/// Inverts `Sigma` explicitly, partitions the inverse as `[[A, B], [C, D]]`
/// (first block `cut x cut`) and solves the stationarity condition
/// `D (t1 - u1) = -C t0`. Independent of the closed form `t1 - S10 S00^-1 t0`;
/// meant for small `m` only.
pub fn brute_force_ustar(t: &[f64], sigma: MatRef<'_, f64>, cut: usize) -> Result<Vec<f64>> {
    let m = t.len();
    if sigma.nrows() != m || sigma.ncols() != m {
        return Err(Error::Dimension(format!(
            "{}x{} matrix for {m} statistics",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if cut == 0 || cut >= m {
        return Err(Error::Dimension(format!("cut {cut} for {m} statistics")));
    }
    let inv = sigma.partial_piv_lu().inverse();
    let rest = m - cut;
    let d = inv.submatrix(cut, cut, rest, rest).to_owned();
    let c = inv.submatrix(cut, 0, rest, cut);
    let rhs = Mat::from_fn(rest, 1, |i, _| -(0..cut).map(|j| c[(i, j)] * t[j]).sum::<f64>());
    let shift = d.partial_piv_lu().solve(rhs);
    Ok((0..rest).map(|i| t[cut + i] - shift[(i, 0)]).collect())
}

/// `t1 - S10 S00^-1 t0` with the dense solver.
pub fn closed_form_ustar(t: &[f64], sigma: MatRef<'_, f64>, cut: usize) -> Result<Vec<f64>> {
    let m = t.len();
    if sigma.nrows() != m || sigma.ncols() != m || cut == 0 || cut >= m {
        return Err(Error::Dimension(format!(
            "{}x{} matrix, {m} statistics, cut {cut}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let report = solve_dense(sigma.submatrix(0, 0, cut, cut), &t[..cut])?;
    Ok((cut..m)
        .map(|i| {
            let s: f64 = (0..cut).map(|j| sigma[(i, j)] * report.solution[j]).sum();
            t[i] - s
        })
        .collect())
}
