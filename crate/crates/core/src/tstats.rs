//! Two-sample t-statistics and the zero-assumption (ZA) partition.

use crate::data::{ExpressionMatrix, Group, GroupLabels};
use crate::error::{Error, Result};

/// Default percentage of genes declared null under the zero assumption.
pub const DEFAULT_PERCENT: f64 = 50.0;

/// Per-gene unpaired t-statistics, in input gene order.
#[derive(Debug, Clone, PartialEq)]
pub struct TStatistics {
    pub t: Vec<f64>,
    /// `[mean in group 1, mean in group 2]` per gene.
    pub group_means: Vec<[f64; 2]>,
    /// The t denominator `s_i = s_p * sqrt(1/n1 + 1/n2)`, where `s_p` is the
    /// pooled within-group standard deviation on `n1 + n2 - 2` degrees of freedom.
    pub pooled_sd: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl TStatistics {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Wraps precomputed statistics (group means and `s_i` left empty).
    pub fn from_values(t: Vec<f64>) -> Result<Self> {
        if let Some(i) = t.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("t[{i}] is not finite")));
        }
        let m = t.len();
        Ok(Self {
            t,
            group_means: vec![[0.0; 2]; m],
            pooled_sd: vec![0.0; m],
            zero_variance: vec![false; m],
        })
    }

    /// Gene indices by decreasing `|t|`, ties by ascending index.
    pub fn order_by_magnitude_desc(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.t.len()).collect();
        order.sort_by(|&a, &b| self.t[b].abs().total_cmp(&self.t[a].abs()));
        order
    }

    /// 1-based rank of every gene under `|t|` descending.
    pub fn magnitude_ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.t.len()];
        for (pos, gene) in self.order_by_magnitude_desc().into_iter().enumerate() {
            ranks[gene] = pos + 1;
        }
        ranks
    }
}

/// Per-gene summary for a single row; shared with the covariance lab.
pub(crate) struct RowT {
    pub t: f64,
    pub means: [f64; 2],
    pub sd: f64,
    pub zero_variance: bool,
}

pub(crate) fn row_t(row: &[f64], groups: &[Group], n1: usize, n2: usize) -> RowT {
    let mut sums = [0.0_f64; 2];
    let mut first = [f64::NAN; 2];
    let mut constant = [true; 2];
    for (&v, g) in row.iter().zip(groups) {
        let k = g.index();
        sums[k] += v;
        if first[k].is_nan() {
            first[k] = v;
        } else if v != first[k] {
            constant[k] = false;
        }
    }
    let counts = [n1 as f64, n2 as f64];
    let means = [sums[0] / counts[0], sums[1] / counts[1]];
    let diff = means[1] - means[0];

    if constant[0] && constant[1] {
        // Exact zero variance; avoid rounding noise from the mean subtraction.
        let means = [first[0], first[1]];
        return RowT {
            t: if means[0] == means[1] { 0.0 } else { f64::INFINITY },
            means,
            sd: 0.0,
            zero_variance: true,
        };
    }

    let mut ss = 0.0;
    for (&v, g) in row.iter().zip(groups) {
        let d = v - means[g.index()];
        ss += d * d;
    }
    let pooled_var = ss / (counts[0] + counts[1] - 2.0);
    let sd = pooled_var.sqrt() * (1.0 / counts[0] + 1.0 / counts[1]).sqrt();
    RowT {
        t: diff / sd,
        means,
        sd,
        zero_variance: false,
    }
}

/// Computes `t_i = (mean_2 - mean_1) / s_i` for every gene.
///
/// A gene that is constant within both groups gets `t = 0` when the two
/// constants agree and is rejected otherwise.
pub fn two_sample_t(x: &ExpressionMatrix, labels: &GroupLabels) -> Result<TStatistics> {
    labels.check_matches(x)?;
    let m = x.n_genes();
    let groups = labels.assignment();
    let (n1, n2) = (labels.n1(), labels.n2());
    let mut out = TStatistics {
        t: Vec::with_capacity(m),
        group_means: Vec::with_capacity(m),
        pooled_sd: Vec::with_capacity(m),
        zero_variance: Vec::with_capacity(m),
    };
    let mut row = vec![0.0; x.n_samples()];
    for i in 0..m {
        for (j, v) in row.iter_mut().enumerate() {
            *v = x.get(i, j);
        }
        let r = row_t(&row, groups, n1, n2);
        if !r.t.is_finite() {
            return Err(Error::DegenerateGene {
                gene: x.gene_ids()[i].clone(),
            });
        }
        out.t.push(r.t);
        out.group_means.push(r.means);
        out.pooled_sd.push(r.sd);
        out.zero_variance.push(r.zero_variance);
    }
    Ok(out)
}

/// Genes ordered by ascending `|t|` and split under the zero assumption.
#[derive(Debug, Clone, PartialEq)]
pub struct ZaPartition {
    /// `permutation[k]` is the original index of the gene at rank position `k`.
    pub permutation: Vec<usize>,
    /// Number of genes declared null, `ceil(m * P / 100)`.
    pub cut: usize,
    pub percent: f64,
    /// Statistics of the genes declared null (the first `cut` positions).
    pub t0: Vec<f64>,
    /// Statistics of the genes still competing.
    pub t1: Vec<f64>,
}

impl ZaPartition {
    pub fn n_genes(&self) -> usize {
        self.permutation.len()
    }

    /// Original indices of the genes declared null.
    pub fn null_genes(&self) -> &[usize] {
        &self.permutation[..self.cut]
    }

    /// Original indices of the competing genes.
    pub fn competing_genes(&self) -> &[usize] {
        &self.permutation[self.cut..]
    }
}

/// `ceil(m * P / 100)`, validated to leave both parts non-empty.
pub fn za_cut(m: usize, percent: f64) -> Result<usize> {
    if !(percent > 0.0 && percent < 100.0) {
        return Err(Error::invalid(format!("P out of range: {percent} (need 0 < P < 100)")));
    }
    let c = (m as f64 * percent / 100.0).ceil() as usize;
    if c == 0 || c >= m {
        return Err(Error::invalid(format!(
            "P = {percent} gives cut c = {c} for m = {m}; need 1 <= c <= m - 1"
        )));
    }
    Ok(c)
}

pub fn partition_za(stats: &TStatistics, percent: f64) -> Result<ZaPartition> {
    let m = stats.len();
    let cut = za_cut(m, percent)?;
    let mut permutation: Vec<usize> = (0..m).collect();
    // `sort_by` is stable, so equal magnitudes keep ascending index order.
    permutation.sort_by(|&a, &b| stats.t[a].abs().total_cmp(&stats.t[b].abs()));
    let t0 = permutation[..cut].iter().map(|&i| stats.t[i]).collect();
    let t1 = permutation[cut..].iter().map(|&i| stats.t[i]).collect();
    Ok(ZaPartition {
        permutation,
        cut,
        percent,
        t0,
        t1,
    })
}
