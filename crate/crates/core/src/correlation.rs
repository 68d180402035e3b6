//! Group-centred expression matrix and the correlation blocks `C00`, `C10`.
//!
//! Genes are indexed in ZA permutation order throughout: the first `cut`
//! positions are the genes declared null. The full `m x m` correlation matrix
//! is never formed. The dense representation stores `C00` (`c x c`) and `C10`
//! (`(m-c) x c`); the low-rank one stores only the unit-norm centred rows `Z`
//! (`m x n`), with `C = Z Z^T` off the diagonal.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};

use crate::data::{ExpressionMatrix, GroupLabels};
use crate::error::{Error, Result};
use crate::numeric::norm2;
use crate::tstats::ZaPartition;

/// Diagonal increment that makes the sample correlation block invertible.
pub const DEFAULT_JITTER: f64 = 1e-10;

/// Expression matrix with every gene's within-group mean removed.
#[derive(Debug, Clone)]
pub struct CenteredMatrix {
    values: Mat<f64>,
    row_norms: Vec<f64>,
}

impl CenteredMatrix {
    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    pub fn n_genes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }
}

pub fn remove_treatment_effects(x: &ExpressionMatrix, labels: &GroupLabels) -> Result<CenteredMatrix> {
    labels.check_matches(x)?;
    let (m, n) = (x.n_genes(), x.n_samples());
    let groups = labels.assignment();
    let counts = [labels.n1() as f64, labels.n2() as f64];
    let mut values = Mat::<f64>::zeros(m, n);
    let mut row_norms = Vec::with_capacity(m);
    let mut row = vec![0.0; n];
    for i in 0..m {
        let mut sums = [0.0; 2];
        let mut first = [f64::NAN; 2];
        let mut constant = [true; 2];
        for j in 0..n {
            let v = x.get(i, j);
            let k = groups[j].index();
            sums[k] += v;
            if first[k].is_nan() {
                first[k] = v;
            } else if v != first[k] {
                constant[k] = false;
            }
        }
        let means = [sums[0] / counts[0], sums[1] / counts[1]];
        for (j, slot) in row.iter_mut().enumerate() {
            let k = groups[j].index();
            *slot = if constant[k] { 0.0 } else { x.get(i, j) - means[k] };
            values[(i, j)] = *slot;
        }
        row_norms.push(norm2(&row));
    }
    Ok(CenteredMatrix { values, row_norms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Materialized `C00` and `C10`.
    Dense,
    /// Factor `Z` only.
    LowRank,
}

#[derive(Debug, Clone)]
enum Blocks {
    Dense {
        c00: Mat<f64>,
        c10: Mat<f64>,
    },
    LowRank {
        factor: Mat<f64>,
        degenerate: Vec<bool>,
    },
}

/// The correlation blocks needed by the score update, plus the jitter.
#[derive(Debug, Clone)]
pub struct CorrelationModel {
    permutation: Vec<usize>,
    cut: usize,
    jitter: f64,
    blocks: Blocks,
}

/// Rows of `xt` in permutation order scaled to unit norm; zero rows stay zero.
fn unit_rows(xt: &CenteredMatrix, permutation: &[usize]) -> (Mat<f64>, Vec<bool>) {
    let n = xt.n_samples();
    let degenerate: Vec<bool> = permutation.iter().map(|&g| xt.row_norms[g] == 0.0).collect();
    let z = Mat::from_fn(permutation.len(), n, |k, j| {
        let g = permutation[k];
        let norm = xt.row_norms[g];
        if norm == 0.0 {
            0.0
        } else {
            xt.values[(g, j)] / norm
        }
    });
    (z, degenerate)
}

fn gram(lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(lhs.nrows(), rhs.nrows());
    matmul(out.as_mut(), Accum::Replace, lhs, rhs.transpose(), 1.0, Par::Seq);
    out
}

fn check_jitter(jitter: f64) -> Result<()> {
    if jitter > 0.0 && jitter.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("jitter must be positive, got {jitter}")))
    }
}

impl CorrelationModel {
    /// Sample correlations between rows of `xt`, blocked by `part`.
    pub fn build(
        xt: &CenteredMatrix,
        part: &ZaPartition,
        jitter: f64,
        representation: Representation,
    ) -> Result<Self> {
        check_jitter(jitter)?;
        if part.n_genes() != xt.n_genes() {
            return Err(Error::Dimension(format!(
                "partition over {} genes, centred matrix has {}",
                part.n_genes(),
                xt.n_genes()
            )));
        }
        let cut = part.cut;
        let (z, degenerate) = unit_rows(xt, &part.permutation);
        let blocks = match representation {
            Representation::LowRank => Blocks::LowRank { factor: z, degenerate },
            Representation::Dense => {
                let z0 = z.subrows(0, cut);
                let z1 = z.subrows(cut, z.nrows() - cut);
                let mut c00 = gram(z0, z0);
                for j in 0..cut {
                    for i in j + 1..cut {
                        let v = c00[(i, j)].clamp(-1.0, 1.0);
                        c00[(i, j)] = v;
                        c00[(j, i)] = v;
                    }
                    c00[(j, j)] = 1.0;
                }
                let mut c10 = gram(z1, z0);
                for j in 0..c10.ncols() {
                    for i in 0..c10.nrows() {
                        c10[(i, j)] = c10[(i, j)].clamp(-1.0, 1.0);
                    }
                }
                Blocks::Dense { c00, c10 }
            }
        };
        Ok(Self {
            permutation: part.permutation.clone(),
            cut,
            jitter,
            blocks,
        })
    }

    /// Dense model from an explicit `m x m` symmetric matrix in original gene
    /// order (e.g. a known covariance), blocked by `part`.
    pub fn from_matrix(sigma: MatRef<'_, f64>, part: &ZaPartition, jitter: f64) -> Result<Self> {
        check_jitter(jitter)?;
        let m = part.n_genes();
        if sigma.nrows() != m || sigma.ncols() != m {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for {m} genes",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let p = &part.permutation;
        let cut = part.cut;
        let c00 = Mat::from_fn(cut, cut, |i, j| sigma[(p[i], p[j])]);
        let c10 = Mat::from_fn(m - cut, cut, |i, j| sigma[(p[cut + i], p[j])]);
        Ok(Self {
            permutation: p.clone(),
            cut,
            jitter,
            blocks: Blocks::Dense { c00, c10 },
        })
    }

    pub fn representation(&self) -> Representation {
        match self.blocks {
            Blocks::Dense { .. } => Representation::Dense,
            Blocks::LowRank { .. } => Representation::LowRank,
        }
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn cut(&self) -> usize {
        self.cut
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n_genes(&self) -> usize {
        self.permutation.len()
    }

    /// `Z0` (`c x n`) for the low-rank representation.
    pub fn null_factor(&self) -> Option<MatRef<'_, f64>> {
        match &self.blocks {
            Blocks::LowRank { factor, .. } => Some(factor.subrows(0, self.cut)),
            Blocks::Dense { .. } => None,
        }
    }

    /// `Z1` (`(m-c) x n`) for the low-rank representation.
    pub fn competing_factor(&self) -> Option<MatRef<'_, f64>> {
        match &self.blocks {
            Blocks::LowRank { factor, .. } => {
                Some(factor.subrows(self.cut, factor.nrows() - self.cut))
            }
            Blocks::Dense { .. } => None,
        }
    }

    /// Diagonal `Lambda` of the low-rank form `C00 + delta I = Lambda + Z0 Z0^T`:
    /// `delta` for ordinary genes, `1 + delta` for zero-norm ones.
    pub fn null_diagonal(&self) -> Vec<f64> {
        match &self.blocks {
            Blocks::LowRank { degenerate, .. } => degenerate[..self.cut]
                .iter()
                .map(|&d| if d { 1.0 + self.jitter } else { self.jitter })
                .collect(),
            Blocks::Dense { .. } => vec![self.jitter; self.cut],
        }
    }

    /// `C00` without jitter.
    pub fn c00(&self) -> Mat<f64> {
        match &self.blocks {
            Blocks::Dense { c00, .. } => c00.clone(),
            Blocks::LowRank { factor, degenerate } => {
                let z0 = factor.subrows(0, self.cut);
                let mut c = gram(z0, z0);
                for j in 0..self.cut {
                    for i in j + 1..self.cut {
                        c[(j, i)] = c[(i, j)];
                    }
                    if degenerate[j] {
                        c[(j, j)] = 1.0;
                    }
                }
                c
            }
        }
    }

    /// `C00 + delta I`.
    pub fn c00_jittered(&self) -> Mat<f64> {
        let mut c = self.c00();
        for i in 0..self.cut {
            c[(i, i)] += self.jitter;
        }
        c
    }

    pub fn c10(&self) -> Mat<f64> {
        match &self.blocks {
            Blocks::Dense { c10, .. } => c10.clone(),
            Blocks::LowRank { factor, .. } => {
                let m = factor.nrows();
                gram(factor.subrows(self.cut, m - self.cut), factor.subrows(0, self.cut))
            }
        }
    }

    /// Dense `C00` block, if materialized.
    pub fn dense_c00(&self) -> Option<MatRef<'_, f64>> {
        match &self.blocks {
            Blocks::Dense { c00, .. } => Some(c00.as_ref()),
            Blocks::LowRank { .. } => None,
        }
    }

    /// `C10 x` for a length-`c` vector.
    pub fn apply_c10(&self, x: &[f64]) -> Vec<f64> {
        let xs = Mat::from_fn(x.len(), 1, |i, _| x[i]);
        match &self.blocks {
            Blocks::Dense { c10, .. } => apply_factor(c10.as_ref(), &xs),
            Blocks::LowRank { factor, .. } => {
                let m = factor.nrows();
                let z0 = factor.subrows(0, self.cut);
                let mut w = Mat::<f64>::zeros(z0.ncols(), 1);
                matmul(w.as_mut(), Accum::Replace, z0.transpose(), xs.as_ref(), 1.0, Par::Seq);
                apply_factor(factor.subrows(self.cut, m - self.cut), &w)
            }
        }
    }
}

/// `Z1 w` for a length-`n` column `w`.
pub(crate) fn apply_factor(z1: MatRef<'_, f64>, w: &Mat<f64>) -> Vec<f64> {
    let mut out = Mat::<f64>::zeros(z1.nrows(), 1);
    matmul(out.as_mut(), Accum::Replace, z1, w.as_ref(), 1.0, Par::Seq);
    (0..out.nrows()).map(|i| out[(i, 0)]).collect()
}

/// Convenience wrapper over [`CorrelationModel::build`] using the dense blocks.
pub fn build_correlation_model(
    xt: &CenteredMatrix,
    part: &ZaPartition,
    jitter: f64,
) -> Result<CorrelationModel> {
    CorrelationModel::build(xt, part, jitter, Representation::Dense)
}

/// Approximate covariance of two t-statistics whose genes have within-group
/// correlations `rho1` (group 1) and `rho2` (group 2):
/// `(n2 * rho1 + n1 * rho2) / (n1 + n2) * nu / (nu - 2)`.
pub fn theoretical_tcov(rho1: f64, rho2: f64, n1: usize, n2: usize, nu: f64) -> Result<f64> {
    for rho in [rho1, rho2] {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("correlation {rho} outside [-1, 1]")));
        }
    }
    if !(nu > 2.0) {
        return Err(Error::invalid(format!("degrees of freedom must exceed 2, got {nu}")));
    }
    if n1 + n2 == 0 {
        return Err(Error::invalid("empty groups"));
    }
    let (n1, n2) = (n1 as f64, n2 as f64);
    Ok((n2 * rho1 + n1 * rho2) / (n1 + n2) * nu / (nu - 2.0))
}
