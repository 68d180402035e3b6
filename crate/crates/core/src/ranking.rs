//! Tellipsoid scores, ranked gene lists, and the end-to-end driver.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use faer::Mat;

use crate::correlation::{apply_factor, remove_treatment_effects, CorrelationModel, Representation};
use crate::data::{ExpressionMatrix, GroupLabels};
use crate::error::{Error, Result};
use crate::solver::{solve_dense, solve_lowrank_diag, SolveReport};
use crate::tstats::{partition_za, two_sample_t, TStatistics, ZaPartition, DEFAULT_PERCENT};
use crate::DEFAULT_JITTER;

/// Revised statistics `u*`, in ZA permutation order.
#[derive(Debug, Clone)]
pub struct TellipsoidScores {
    /// First `cut` entries are exactly zero; the rest are `t1 - C10 C00^-1 t0`.
    pub u_hat_star: Vec<f64>,
    pub permutation: Vec<usize>,
    pub cut: usize,
    pub solve: SolveReport,
}

impl TellipsoidScores {
    pub fn n_genes(&self) -> usize {
        self.permutation.len()
    }

    /// Scores indexed by original gene position.
    pub fn in_gene_order(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.permutation.len()];
        for (pos, &gene) in self.permutation.iter().enumerate() {
            out[gene] = self.u_hat_star[pos];
        }
        out
    }

    /// Competing genes (original indices) by decreasing `|u*|`, ties by index.
    pub fn competing_order(&self) -> Vec<usize> {
        let mut pos: Vec<usize> = (self.cut..self.permutation.len()).collect();
        pos.sort_by(|&a, &b| {
            self.u_hat_star[b]
                .abs()
                .total_cmp(&self.u_hat_star[a].abs())
                .then(self.permutation[a].cmp(&self.permutation[b]))
        });
        pos.into_iter().map(|p| self.permutation[p]).collect()
    }
}

/// Computes `u1 = t1 - C10 (C00 + delta I)^-1 t0`.
///
/// The dense model solves with the materialized block; the low-rank model
/// solves in the `n`-dimensional sample space and applies `C10 x = Z1 (Z0^T x)`.
pub fn tellipsoid_scores(part: &ZaPartition, corr: &CorrelationModel) -> Result<TellipsoidScores> {
    if part.permutation != corr.permutation() || part.cut != corr.cut() {
        return Err(Error::Dimension(
            "partition and correlation model disagree on gene order".into(),
        ));
    }
    let (solve, shift) = match corr.representation() {
        Representation::Dense => {
            let a = corr.c00_jittered();
            let report = solve_dense(a.as_ref(), &part.t0)?;
            let shift = corr.apply_c10(&report.solution);
            (report, shift)
        }
        Representation::LowRank => {
            let z0 = corr.null_factor().expect("low-rank model has a factor");
            let report = solve_lowrank_diag(z0, &corr.null_diagonal(), &part.t0)?;
            let proj = report.projection.as_deref().expect("low-rank solve returns Z0^T x");
            let w = Mat::from_fn(proj.len(), 1, |i, _| proj[i]);
            let shift = apply_factor(corr.competing_factor().expect("low-rank model"), &w);
            (report, shift)
        }
    };
    let mut u = vec![0.0; part.n_genes()];
    for (k, (t, s)) in part.t1.iter().zip(&shift).enumerate() {
        u[part.cut + k] = t - s;
    }
    Ok(TellipsoidScores {
        u_hat_star: u,
        permutation: part.permutation.clone(),
        cut: part.cut,
        solve,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub rank: usize,
    pub gene_id: String,
    /// Absent for the raw-t baseline.
    pub u_star: Option<f64>,
    pub t: f64,
    /// Rank of the gene under `|t|` descending.
    pub t_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ListMetadata {
    pub percent: Option<f64>,
    pub cut: Option<usize>,
    pub delta: Option<f64>,
    pub method: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedGeneList {
    pub rows: Vec<RankedRow>,
    pub metadata: ListMetadata,
}

const LIST_HEADER: &str = "rank\tgene_id\tu_star\tt\tt_rank";

impl RankedGeneList {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn gene_ids(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.gene_id.as_str()).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        s.push_str(LIST_HEADER);
        s.push('\n');
        for r in &self.rows {
            let u = r.u_star.map(|u| u.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", r.rank, r.gene_id, u, r.t, r.t_rank);
        }
        let md = &self.metadata;
        if let Some(p) = md.percent {
            let _ = writeln!(s, "# P={p}");
        }
        if let Some(c) = md.cut {
            let _ = writeln!(s, "# c={c}");
        }
        if let Some(d) = md.delta {
            let _ = writeln!(s, "# delta={d:e}");
        }
        let _ = writeln!(s, "# method={}", md.method);
        if let Some(seed) = md.seed {
            let _ = writeln!(s, "# seed={seed}");
        }
        s
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_tsv().as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut metadata = ListMetadata::default();
        let mut saw_header = false;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let perr = |column: usize, message: String| Error::Parse {
                line: lineno,
                column,
                message,
            };
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.trim().split_once('=') {
                    let bad = || perr(1, format!("bad metadata value for {k}: {v}"));
                    match k {
                        "P" => metadata.percent = Some(v.parse().map_err(|_| bad())?),
                        "c" => metadata.cut = Some(v.parse().map_err(|_| bad())?),
                        "delta" => metadata.delta = Some(v.parse().map_err(|_| bad())?),
                        "method" => metadata.method = v.to_string(),
                        "seed" => metadata.seed = Some(v.parse().map_err(|_| bad())?),
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !saw_header {
                if line.trim_end() != LIST_HEADER {
                    return Err(perr(1, format!("expected header '{LIST_HEADER}'")));
                }
                saw_header = true;
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(perr(1, format!("expected 5 fields, found {}", f.len())));
            }
            let int = |col: usize| {
                f[col]
                    .parse::<usize>()
                    .map_err(|_| perr(col + 1, format!("not an integer: '{}'", f[col])))
            };
            let float = |col: usize| {
                f[col]
                    .parse::<f64>()
                    .map_err(|_| perr(col + 1, format!("not a number: '{}'", f[col])))
            };
            let rank = int(0)?;
            if rank != rows.len() + 1 {
                return Err(perr(1, format!("rank {rank} out of sequence")));
            }
            rows.push(RankedRow {
                rank,
                gene_id: f[1].to_string(),
                u_star: if f[2].is_empty() { None } else { Some(float(2)?) },
                t: float(3)?,
                t_rank: int(4)?,
            });
        }
        if !saw_header {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "empty list file".into(),
            });
        }
        Ok(Self { rows, metadata })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Top `r` competing genes by `|u*|`. Genes declared null are not eligible,
/// so `r` may not exceed `m - c`.
pub fn rank_genes(
    scores: &TellipsoidScores,
    stats: &TStatistics,
    gene_ids: &[String],
    r: usize,
) -> Result<RankedGeneList> {
    let m = scores.n_genes();
    if stats.len() != m || gene_ids.len() != m {
        return Err(Error::Dimension(format!(
            "{m} scores, {} statistics, {} gene ids",
            stats.len(),
            gene_ids.len()
        )));
    }
    let eligible = m - scores.cut;
    if r == 0 || r > eligible {
        return Err(Error::invalid(format!(
            "R out of range: {r} (need 1 <= R <= m - c = {eligible})"
        )));
    }
    let u = scores.in_gene_order();
    let t_ranks = stats.magnitude_ranks();
    let rows = scores
        .competing_order()
        .into_iter()
        .take(r)
        .enumerate()
        .map(|(k, g)| RankedRow {
            rank: k + 1,
            gene_id: gene_ids[g].clone(),
            u_star: Some(u[g]),
            t: stats.t[g],
            t_rank: t_ranks[g],
        })
        .collect();
    Ok(RankedGeneList {
        rows,
        metadata: ListMetadata {
            method: "tellipsoid".into(),
            ..Default::default()
        },
    })
}

/// Baseline: top `r` genes by `|t|`.
pub fn rank_raw_t(stats: &TStatistics, gene_ids: &[String], r: usize) -> Result<RankedGeneList> {
    let m = stats.len();
    if gene_ids.len() != m {
        return Err(Error::Dimension(format!("{m} statistics, {} gene ids", gene_ids.len())));
    }
    if r == 0 || r > m {
        return Err(Error::invalid(format!("R out of range: {r} (need 1 <= R <= {m})")));
    }
    let rows = stats
        .order_by_magnitude_desc()
        .into_iter()
        .take(r)
        .enumerate()
        .map(|(k, g)| RankedRow {
            rank: k + 1,
            gene_id: gene_ids[g].clone(),
            u_star: None,
            t: stats.t[g],
            t_rank: k + 1,
        })
        .collect();
    Ok(RankedGeneList {
        rows,
        metadata: ListMetadata {
            method: "raw-t".into(),
            ..Default::default()
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// Low-rank when `n < c`, dense otherwise.
    #[default]
    Auto,
    Dense,
    LowRank,
}

impl SolverChoice {
    pub fn resolve(self, n_samples: usize, cut: usize) -> Representation {
        match self {
            SolverChoice::Dense => Representation::Dense,
            SolverChoice::LowRank => Representation::LowRank,
            SolverChoice::Auto if n_samples < cut => Representation::LowRank,
            SolverChoice::Auto => Representation::Dense,
        }
    }
}

impl std::str::FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "dense" => Ok(Self::Dense),
            "lowrank" | "low-rank" => Ok(Self::LowRank),
            _ => Err(Error::invalid(format!(
                "unknown solver '{s}' (expected auto, dense or lowrank)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TellipsoidConfig {
    pub r: usize,
    pub percent: f64,
    pub jitter: f64,
    pub solver: SolverChoice,
    /// Recorded in the output metadata only.
    pub seed: Option<u64>,
}

impl TellipsoidConfig {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            percent: DEFAULT_PERCENT,
            jitter: DEFAULT_JITTER,
            solver: SolverChoice::Auto,
            seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TellipsoidRun {
    pub stats: TStatistics,
    pub partition: ZaPartition,
    pub scores: TellipsoidScores,
    pub list: RankedGeneList,
}

/// t-statistics, ZA partition, centring, correlation blocks, scores, ranking.
pub fn run_tellipsoid(
    x: &ExpressionMatrix,
    labels: &GroupLabels,
    config: &TellipsoidConfig,
) -> Result<TellipsoidRun> {
    let stats = two_sample_t(x, labels)?;
    let partition = partition_za(&stats, config.percent)?;
    let eligible = partition.n_genes() - partition.cut;
    if config.r == 0 || config.r > eligible {
        return Err(Error::invalid(format!(
            "R out of range: {} (need 1 <= R <= m - c = {eligible})",
            config.r
        )));
    }
    let xt = remove_treatment_effects(x, labels)?;
    let repr = config.solver.resolve(x.n_samples(), partition.cut);
    let corr = CorrelationModel::build(&xt, &partition, config.jitter, repr)?;
    let scores = tellipsoid_scores(&partition, &corr)?;
    let mut list = rank_genes(&scores, &stats, x.gene_ids(), config.r)?;
    list.metadata = ListMetadata {
        percent: Some(config.percent),
        cut: Some(partition.cut),
        delta: Some(config.jitter),
        method: format!("tellipsoid/{}", scores.solve.method),
        seed: config.seed,
    };
    Ok(TellipsoidRun {
        stats,
        partition,
        scores,
        list,
    })
}
