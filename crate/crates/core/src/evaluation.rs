//! Scoring ranked lists against ground truth and multi-replicate studies.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, median};
use crate::ranking::{rank_raw_t, run_tellipsoid, RankedGeneList, SolverChoice, TellipsoidConfig};
use crate::simulation::{gaussian_generate, standardize_generate, BlockCovSpec, Direction, GroundTruth, SpikeSpec};
use crate::tstats::two_sample_t;
use crate::{DEFAULT_JITTER, DEFAULT_PERCENT};

/// False positives among the top `r` genes of a list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdrScore {
    pub r: usize,
    pub nofp: usize,
    pub fdr: f64,
}

fn truth_index(truth: &GroundTruth) -> HashMap<&str, Direction> {
    truth
        .gene_ids
        .iter()
        .map(String::as_str)
        .zip(truth.directions.iter().copied())
        .collect()
}

/// Null flag for each listed gene, in list order.
fn null_flags(list: &RankedGeneList, index: &HashMap<&str, Direction>) -> Result<Vec<bool>> {
    list.rows
        .iter()
        .map(|row| {
            index
                .get(row.gene_id.as_str())
                .map(|d| d.is_null())
                .ok_or_else(|| Error::UnknownGene(row.gene_id.clone()))
        })
        .collect()
}

/// `NoFP / R` over the whole list.
pub fn empirical_fdr(list: &RankedGeneList, truth: &GroundTruth) -> Result<FdrScore> {
    let flags = null_flags(list, &truth_index(truth))?;
    Ok(score_prefix(&flags, flags.len()))
}

fn score_prefix(flags: &[bool], r: usize) -> FdrScore {
    let nofp = flags[..r].iter().filter(|f| **f).count();
    FdrScore {
        r,
        nofp,
        fdr: if r == 0 { 0.0 } else { nofp as f64 / r as f64 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Tellipsoid,
    RawT,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tellipsoid => "tellipsoid",
            Method::RawT => "raw_t",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tellipsoid" => Ok(Method::Tellipsoid),
            "raw_t" | "raw-t" | "t" => Ok(Method::RawT),
            _ => Err(Error::invalid(format!("unknown method '{s}'"))),
        }
    }
}

/// Source of simulated replicates.
#[derive(Debug, Clone)]
pub enum Generator {
    Gaussian { cov: BlockCovSpec, spike: SpikeSpec },
    /// Row-standardized surrogate of a real matrix.
    Standardize { base: ExpressionMatrix, spike: SpikeSpec },
}

impl Generator {
    fn generate(&self, seed: u64) -> Result<(ExpressionMatrix, GroundTruth, crate::GroupLabels)> {
        match self {
            Generator::Gaussian { cov, spike } => gaussian_generate(cov, &SpikeSpec { seed, ..*spike }),
            Generator::Standardize { base, spike } => standardize_generate(base, &SpikeSpec { seed, ..*spike }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub generator: Generator,
    pub methods: Vec<Method>,
    pub r_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub percent: f64,
    pub jitter: f64,
    pub solver: SolverChoice,
}

impl StudyConfig {
    pub fn new(generator: Generator, r_values: Vec<usize>, replicates: usize, seed: u64) -> Self {
        Self {
            generator,
            methods: vec![Method::Tellipsoid, Method::RawT],
            r_values,
            replicates,
            seed,
            percent: DEFAULT_PERCENT,
            jitter: DEFAULT_JITTER,
            solver: SolverChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub replicate: usize,
    pub method: Method,
    pub score: FdrScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub method: Method,
    pub r: usize,
    pub median_fdr: f64,
    pub median_nofp: f64,
    pub frac_zero_fdr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub summary: Vec<StudySummary>,
    /// Tellipsoid list entries that belong to the ZA null partition; always 0
    /// unless the ranking is broken.
    pub za_violations: usize,
}

impl StudyReport {
    pub fn rows_tsv(&self) -> String {
        let mut s = String::from("replicate\tmethod\tR\tNoFP\tFDR\n");
        for row in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                row.replicate, row.method, row.score.r, row.score.nofp, row.score.fdr
            );
        }
        s
    }

    pub fn summary_tsv(&self) -> String {
        let mut s = String::from("method\tR\tmedian_FDR\tfrac_zero_FDR\n");
        for row in &self.summary {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", row.method, row.r, row.median_fdr, row.frac_zero_fdr);
        }
        s
    }

    pub fn summary_for(&self, method: Method, r: usize) -> Option<&StudySummary> {
        self.summary.iter().find(|s| s.method == method && s.r == r)
    }
}

fn replicate(config: &StudyConfig, rep: usize, r_max: usize) -> Result<(Vec<StudyRow>, usize)> {
    let (x, truth, labels) = config.generator.generate(derive_seed(config.seed, rep as u64))?;
    let index = truth_index(&truth);
    let mut rows = Vec::new();
    let mut violations = 0;
    for &method in &config.methods {
        let list = match method {
            Method::Tellipsoid => {
                let cfg = TellipsoidConfig {
                    r: r_max,
                    percent: config.percent,
                    jitter: config.jitter,
                    solver: config.solver,
                    seed: None,
                };
                let run = run_tellipsoid(&x, &labels, &cfg)?;
                let null: std::collections::HashSet<&str> = run
                    .partition
                    .null_genes()
                    .iter()
                    .map(|&g| x.gene_ids()[g].as_str())
                    .collect();
                violations += run.list.rows.iter().filter(|r| null.contains(r.gene_id.as_str())).count();
                run.list
            }
            Method::RawT => rank_raw_t(&two_sample_t(&x, &labels)?, x.gene_ids(), r_max)?,
        };
        let flags = null_flags(&list, &index)?;
        for &r in &config.r_values {
            rows.push(StudyRow {
                replicate: rep + 1,
                method,
                score: score_prefix(&flags, r),
            });
        }
    }
    Ok((rows, violations))
}

/// Generates `replicates` datasets from derived seeds, runs each method, and
/// scores the top `R` for every requested `R`. Replicates run in parallel;
/// results are gathered in replicate order.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    if config.replicates == 0 {
        return Err(Error::invalid("replicates must be at least 1"));
    }
    if config.methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    let r_max = *config
        .r_values
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("no R values requested"))?;
    if config.r_values.contains(&0) {
        return Err(Error::invalid("R out of range: 0"));
    }
    let per_rep: Vec<(Vec<StudyRow>, usize)> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| replicate(config, rep, r_max))
        .collect::<Result<_>>()?;
    let za_violations = per_rep.iter().map(|(_, v)| v).sum();
    let rows: Vec<StudyRow> = per_rep.into_iter().flat_map(|(rows, _)| rows).collect();

    let mut summary = Vec::new();
    for &method in &config.methods {
        for &r in &config.r_values {
            let scores: Vec<FdrScore> = rows
                .iter()
                .filter(|row| row.method == method && row.score.r == r)
                .map(|row| row.score)
                .collect();
            let fdr: Vec<f64> = scores.iter().map(|s| s.fdr).collect();
            let nofp: Vec<f64> = scores.iter().map(|s| s.nofp as f64).collect();
            summary.push(StudySummary {
                method,
                r,
                median_fdr: median(&fdr),
                median_nofp: median(&nofp),
                frac_zero_fdr: scores.iter().filter(|s| s.nofp == 0).count() as f64 / scores.len() as f64,
            });
        }
    }
    Ok(StudyReport {
        rows,
        summary,
        za_violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub rank: usize,
    pub u_star: f64,
    pub t: f64,
    pub t_rank: usize,
    pub null: bool,
}

/// Top-`R` Tellipsoid list laid out in two halves, truly null genes flagged,
/// with both methods' NoFP in the footer.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub tellipsoid_nofp: usize,
    pub raw_t_nofp: usize,
}

pub fn comparison_table(
    tellipsoid: &RankedGeneList,
    raw: &RankedGeneList,
    truth: &GroundTruth,
) -> Result<ComparisonTable> {
    let index = truth_index(truth);
    let flags = null_flags(tellipsoid, &index)?;
    let raw_flags = null_flags(raw, &index)?;
    let rows = tellipsoid
        .rows
        .iter()
        .zip(&flags)
        .map(|(row, &null)| {
            Ok(ComparisonRow {
                rank: row.rank,
                u_star: row
                    .u_star
                    .ok_or_else(|| Error::invalid("first list carries no u* values"))?,
                t: row.t,
                t_rank: row.t_rank,
                null,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonTable {
        rows,
        tellipsoid_nofp: flags.iter().filter(|f| **f).count(),
        raw_t_nofp: raw_flags.iter().filter(|f| **f).count(),
    })
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let half = self.rows.len().div_ceil(2);
        let cell = |r: &ComparisonRow| {
            let mark = if r.null { "*" } else { " " };
            format!(
                "{mark}{:>5} {:>8.2} {:>8.2} {:>7}",
                r.rank, r.u_star, r.t, r.t_rank
            )
        };
        let head = format!(" {:>5} {:>8} {:>8} {:>7}", "rank", "u*", "t", "t rank");
        writeln!(f, "{head} | {head}")?;
        for k in 0..half {
            let left = cell(&self.rows[k]);
            match self.rows.get(half + k) {
                Some(right) => writeln!(f, "{left} | {}", cell(right))?,
                None => writeln!(f, "{left} |")?,
            }
        }
        writeln!(f, "* truly null gene")?;
        write!(
            f,
            "Tellipsoid = {} NoFPs; raw t-statistics = {} NoFPs",
            self.tellipsoid_nofp, self.raw_t_nofp
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::{ListMetadata, RankedRow};

    fn list(ids: &[&str], with_u: bool) -> RankedGeneList {
        RankedGeneList {
            rows: ids
                .iter()
                .enumerate()
                .map(|(k, id)| RankedRow {
                    rank: k + 1,
                    gene_id: id.to_string(),
                    u_star: with_u.then_some(1.0),
                    t: 2.0,
                    t_rank: k + 1,
                })
                .collect(),
            metadata: ListMetadata::default(),
        }
    }

    fn truth(n: usize, null_from: usize) -> GroundTruth {
        GroundTruth {
            gene_ids: (0..n).map(|i| format!("g{i}")).collect(),
            directions: (0..n)
                .map(|i| if i < null_from { Direction::Up } else { Direction::Null })
                .collect(),
            metadata: vec![],
        }
    }

    fn ids(range: std::ops::Range<usize>) -> Vec<String> {
        range.map(|i| format!("g{i}")).collect()
    }

    #[test]
    fn fdr_counts_listed_nulls() {
        let t = truth(200, 78);
        let names = ids(0..100);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let s = empirical_fdr(&list(&refs, false), &t).unwrap();
        assert_eq!((s.r, s.nofp), (100, 22));
        assert!((s.fdr - 0.22).abs() < 1e-15);

        let t = truth(200, 32);
        let s = empirical_fdr(&list(&refs, false), &t).unwrap();
        assert!((s.fdr - 0.68).abs() < 1e-15);

        let s = empirical_fdr(&list(&["g0", "g1"], false), &t).unwrap();
        assert_eq!(s.fdr, 0.0);
        assert!(matches!(
            empirical_fdr(&list(&["g0", "nope"], false), &t),
            Err(Error::UnknownGene(g)) if g == "nope"
        ));
    }

    #[test]
    fn prefix_counts_are_monotone() {
        let flags = [false, true, true, false, true];
        let mut prev = 0;
        for r in 1..=5 {
            let s = score_prefix(&flags, r);
            assert!(s.nofp >= prev && s.nofp <= r);
            prev = s.nofp;
        }
    }

    #[test]
    fn table_layout_and_degenerate_truth() {
        let names = ids(0..5);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let all_null = truth(5, 0);
        let table = comparison_table(&list(&refs, true), &list(&refs, false), &all_null).unwrap();
        assert!(table.rows.iter().all(|r| r.null));
        assert_eq!((table.tellipsoid_nofp, table.raw_t_nofp), (5, 5));
        let text = table.to_string();
        assert_eq!(text.lines().count(), 1 + 3 + 2);
        assert!(text.ends_with("Tellipsoid = 5 NoFPs; raw t-statistics = 5 NoFPs"));

        let none_null = truth(5, 5);
        let table = comparison_table(&list(&refs, true), &list(&refs, false), &none_null).unwrap();
        assert!(table.rows.iter().all(|r| !r.null));
        assert_eq!(table.tellipsoid_nofp, 0);
        assert!(comparison_table(&list(&["x"], true), &list(&refs, false), &none_null).is_err());
    }

    #[test]
    fn small_study_is_deterministic() {
        let gen = Generator::Gaussian {
            cov: BlockCovSpec { m: 200, block_size: 10, rho: 0.5 },
            spike: SpikeSpec {
                up: 5,
                down: 5,
                up_offset: 1.5,
                down_offset: -1.5,
                n1: 6,
                n2: 6,
                seed: 0,
            },
        };
        let cfg = StudyConfig::new(gen, vec![5, 10], 3, 77);
        let a = run_study(&cfg).unwrap();
        assert_eq!(a.rows.len(), 3 * 2 * 2);
        assert_eq!(a.summary.len(), 4);
        assert_eq!(a.za_violations, 0);
        assert_eq!(a, run_study(&cfg).unwrap());
        assert!(a.rows_tsv().starts_with("replicate\tmethod\tR\tNoFP\tFDR\n1\ttellipsoid\t5\t"));
        assert!(a.summary_tsv().starts_with("method\tR\tmedian_FDR\tfrac_zero_FDR\n"));

        let one = run_study(&StudyConfig { replicates: 1, r_values: vec![10], ..cfg }).unwrap();
        assert_eq!(one.rows.len(), 2);
    }
}
