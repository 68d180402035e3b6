//! Data with known truth, and the t-statistic covariance lab.
//!
//! Two generators: row-standardized real data with spiked-in group-2 offsets,
//! and multivariate Gaussian columns with block-equicorrelated genes. Every
//! generator is a pure function of its seed.

use std::fmt;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use faer::{Mat, Side};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::correlation::theoretical_tcov;
use crate::data::{ExpressionMatrix, Group, GroupLabels};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;
use crate::tstats::row_t;

// Stream indices for seeds derived from one user seed.
const STREAM_SPLIT: u64 = 1;
const STREAM_SPIKE: u64 = 2;
const STREAM_DRAW: u64 = 3;
const STREAM_COLUMNS: u64 = 4;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Centres each gene within each group and scales it to unit mean square
/// (divisor `n_k`). Within-group correlations are unchanged.
pub fn row_standardize(x: &ExpressionMatrix, labels: &GroupLabels) -> Result<ExpressionMatrix> {
    labels.check_matches(x)?;
    let (m, n) = (x.n_genes(), x.n_samples());
    let groups = labels.assignment();
    let counts = [labels.n1() as f64, labels.n2() as f64];
    let mut out = Mat::<f64>::zeros(m, n);
    for i in 0..m {
        let mut sums = [0.0; 2];
        for (j, g) in groups.iter().enumerate() {
            sums[g.index()] += x.get(i, j);
        }
        let means = [sums[0] / counts[0], sums[1] / counts[1]];
        let mut ss = [0.0; 2];
        for (j, g) in groups.iter().enumerate() {
            let d = x.get(i, j) - means[g.index()];
            ss[g.index()] += d * d;
        }
        let scale = [(ss[0] / counts[0]).sqrt(), (ss[1] / counts[1]).sqrt()];
        if scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid(format!(
                "gene {} is constant within a group; cannot standardize",
                x.gene_ids()[i]
            )));
        }
        for (j, g) in groups.iter().enumerate() {
            let k = g.index();
            out[(i, j)] = (x.get(i, j) - means[k]) / scale[k];
        }
    }
    x.with_values(out)
}

/// Uniformly random labels with exactly `n1` samples in group 1.
pub fn random_group_split(n: usize, n1: usize, n2: usize, seed: u64) -> Result<GroupLabels> {
    if n1 + n2 != n {
        return Err(Error::invalid(format!("group sizes {n1} + {n2} do not sum to {n}")));
    }
    let mut assignment = vec![Group::Two; n];
    assignment[..n1].fill(Group::One);
    assignment.shuffle(&mut rng_for(seed, STREAM_SPLIT));
    GroupLabels::new(assignment)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Null,
}

impl Direction {
    pub fn token(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Null => "null",
        }
    }

    pub fn is_null(self) -> bool {
        self == Direction::Null
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            "null" => Ok(Direction::Null),
            _ => Err(Error::invalid(format!("unknown direction '{s}'"))),
        }
    }
}

/// Which genes were made differential, and how.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub gene_ids: Vec<String>,
    pub directions: Vec<Direction>,
    /// `key=value` pairs written as comments.
    pub metadata: Vec<(String, String)>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gene_ids.is_empty()
    }

    pub fn count(&self, direction: Direction) -> usize {
        self.directions.iter().filter(|d| **d == direction).count()
    }

    pub fn differential_flags(&self) -> Vec<bool> {
        self.directions.iter().map(|d| !d.is_null()).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str("gene_id\tdirection\n");
        for (g, d) in self.gene_ids.iter().zip(&self.directions) {
            let _ = writeln!(s, "{g}\t{d}");
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
        let mut truth = GroundTruth {
            gene_ids: Vec::new(),
            directions: Vec::new(),
            metadata: Vec::new(),
        };
        let mut saw_header = false;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.trim().split_once('=') {
                    truth.metadata.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !saw_header {
                saw_header = true;
                if fields == ["gene_id", "direction"] {
                    continue;
                }
            }
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("expected 2 fields, found {}", fields.len()),
                });
            }
            let d = fields[1].parse().map_err(|_| Error::Parse {
                line: line_no,
                column: 2,
                message: format!("unknown direction '{}'", fields[1]),
            })?;
            truth.gene_ids.push(fields[0].to_string());
            truth.directions.push(d);
        }
        Ok(truth)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Numbers and sizes of spiked-in differential genes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeSpec {
    pub up: usize,
    pub down: usize,
    /// Added to group-2 values of up-regulated genes; positive.
    pub up_offset: f64,
    /// Added to group-2 values of down-regulated genes; negative.
    pub down_offset: f64,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
}

impl SpikeSpec {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.up + self.down >= m {
            return Err(Error::invalid(format!(
                "m_u + m_d = {} must be below the gene count {m}",
                self.up + self.down
            )));
        }
        if !(self.up_offset > 0.0 && self.up_offset.is_finite()) {
            return Err(Error::invalid(format!("x_u must be positive, got {}", self.up_offset)));
        }
        if !(self.down_offset < 0.0 && self.down_offset.is_finite()) {
            return Err(Error::invalid(format!("x_d must be negative, got {}", self.down_offset)));
        }
        Ok(())
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("m_u".into(), self.up.to_string()),
            ("m_d".into(), self.down.to_string()),
            ("x_u".into(), self.up_offset.to_string()),
            ("x_d".into(), self.down_offset.to_string()),
            ("n1".into(), self.n1.to_string()),
            ("n2".into(), self.n2.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// Adds the offsets to the group-2 entries of `up + down` random genes.
pub fn spike_in(
    x: &ExpressionMatrix,
    labels: &GroupLabels,
    spec: &SpikeSpec,
) -> Result<(ExpressionMatrix, GroundTruth)> {
    labels.check_matches(x)?;
    let m = x.n_genes();
    spec.validate(m)?;
    if labels.n1() != spec.n1 || labels.n2() != spec.n2 {
        return Err(Error::invalid(format!(
            "labels have groups of {} and {}, spike settings expect {} and {}",
            labels.n1(),
            labels.n2(),
            spec.n1,
            spec.n2
        )));
    }
    let chosen = rand::seq::index::sample(&mut rng_for(spec.seed, STREAM_SPIKE), m, spec.up + spec.down);
    let mut directions = vec![Direction::Null; m];
    for (k, g) in chosen.into_iter().enumerate() {
        directions[g] = if k < spec.up { Direction::Up } else { Direction::Down };
    }
    let group2 = labels.columns(Group::Two);
    let mut values = x.values().to_owned();
    for (i, d) in directions.iter().enumerate() {
        let offset = match d {
            Direction::Up => spec.up_offset,
            Direction::Down => spec.down_offset,
            Direction::Null => continue,
        };
        for &j in &group2 {
            values[(i, j)] += offset;
        }
    }
    let truth = GroundTruth {
        gene_ids: x.gene_ids().to_vec(),
        directions,
        metadata: spec.metadata(),
    };
    Ok((x.with_values(values)?, truth))
}

/// Real-data surrogate: optionally subsample `n1 + n2` columns, split them at
/// random, row-standardize within groups, then spike in.
pub fn standardize_generate(
    x: &ExpressionMatrix,
    spec: &SpikeSpec,
) -> Result<(ExpressionMatrix, GroundTruth, GroupLabels)> {
    let n = x.n_samples();
    let total = spec.n1 + spec.n2;
    if total > n {
        return Err(Error::invalid(format!(
            "n1 + n2 = {total} exceeds the {n} available samples"
        )));
    }
    let base = if total < n {
        let mut cols = rand::seq::index::sample(&mut rng_for(spec.seed, STREAM_COLUMNS), n, total).into_vec();
        cols.sort_unstable();
        x.select_samples(&cols)?
    } else {
        x.clone()
    };
    let labels = random_group_split(total, spec.n1, spec.n2, spec.seed)?;
    let std = row_standardize(&base, &labels)?;
    let (data, mut truth) = spike_in(&std, &labels, spec)?;
    truth.metadata.insert(0, ("mode".into(), "standardize".into()));
    Ok((data, truth, labels))
}

/// Block-diagonal gene covariance: unit variances, correlation `rho` within
/// consecutive blocks of `block_size` genes (the last block may be shorter).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCovSpec {
    pub m: usize,
    pub block_size: usize,
    pub rho: f64,
}

impl BlockCovSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.block_size == 0 || self.block_size > self.m {
            return Err(Error::invalid(format!(
                "need m >= 2 and 1 <= block_size <= m, got m = {}, block_size = {}",
                self.m, self.block_size
            )));
        }
        let lower = if self.block_size > 1 {
            -1.0 / (self.block_size as f64 - 1.0)
        } else {
            -1.0
        };
        if !(self.rho > lower && self.rho < 1.0) {
            return Err(Error::invalid(format!(
                "rho = {} outside ({lower}, 1); covariance not positive definite",
                self.rho
            )));
        }
        Ok(())
    }

    /// Full `m x m` covariance, for small `m`.
    pub fn covariance(&self) -> Mat<f64> {
        let b = self.block_size;
        Mat::from_fn(self.m, self.m, |i, j| {
            if i == j {
                1.0
            } else if i / b == j / b {
                self.rho
            } else {
                0.0
            }
        })
    }

    fn block_factor(&self, size: usize) -> Result<Mat<f64>> {
        let w = Mat::from_fn(size, size, |i, j| if i == j { 1.0 } else { self.rho });
        let llt = w.llt(Side::Lower).map_err(|e| match e {
            faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
                Error::NotPositiveDefinite {
                    stage: "block covariance",
                    leading_minor: index + 1,
                }
            }
        })?;
        Ok(llt.L().to_owned())
    }
}

/// Draws `n1 + n2` independent columns from `N(0, W)`; the first `n1` form
/// group 1. Spike offsets are then added to group 2 of the chosen genes.
pub fn gaussian_generate(
    cov: &BlockCovSpec,
    spike: &SpikeSpec,
) -> Result<(ExpressionMatrix, GroundTruth, GroupLabels)> {
    cov.validate()?;
    spike.validate(cov.m)?;
    let (m, b) = (cov.m, cov.block_size);
    let n = spike.n1 + spike.n2;
    let full = cov.block_factor(b)?;
    let tail = m % b;
    let short = if tail > 0 { Some(cov.block_factor(tail)?) } else { None };

    let mut rng = rng_for(spike.seed, STREAM_DRAW);
    let mut values = Mat::<f64>::zeros(m, n);
    let mut z = vec![0.0; b];
    for j in 0..n {
        let mut start = 0;
        while start < m {
            let l = if start + b <= m { &full } else { short.as_ref().expect("tail block") };
            let size = l.nrows();
            for v in z[..size].iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for r in 0..size {
                let mut s = 0.0;
                for (c, zc) in z[..=r].iter().enumerate() {
                    s += l[(r, c)] * zc;
                }
                values[(start + r, j)] = s;
            }
            start += size;
        }
    }
    let gene_ids: Vec<String> = (0..m).map(|i| format!("g{}", i + 1)).collect();
    let sample_ids: Vec<String> = (0..n).map(|j| format!("s{}", j + 1)).collect();
    let x = ExpressionMatrix::new(gene_ids, sample_ids, values)?;
    let mut assignment = vec![Group::One; spike.n1];
    assignment.extend(vec![Group::Two; spike.n2]);
    let labels = GroupLabels::new(assignment)?;
    let (data, mut truth) = spike_in(&x, &labels, spike)?;
    let mut md = vec![
        ("mode".to_string(), "gaussian".to_string()),
        ("m".to_string(), m.to_string()),
        ("block_size".to_string(), b.to_string()),
        ("rho".to_string(), cov.rho.to_string()),
    ];
    md.append(&mut truth.metadata);
    truth.metadata = md;
    Ok((data, truth, labels))
}

/// Which approximation of `cov(t_i, t_j)` to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// Both genes null, one correlation in both groups.
    One,
    /// One gene null, the other shifted in group 2; group-specific correlations.
    Two,
    /// Equal group sizes; group-specific correlations.
    Three,
}

impl std::str::FromStr for Observation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Observation::One),
            "2" => Ok(Observation::Two),
            "3" => Ok(Observation::Three),
            _ => Err(Error::invalid(format!("observation must be 1, 2 or 3, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationResult {
    pub empirical: f64,
    pub theoretical: f64,
    pub abs_error: f64,
}

pub const MIN_REPLICATES: usize = 10_000;
/// Mean shift of the non-null gene, in within-group standard deviations.
const OBSERVATION_SHIFT: f64 = 1.0;
const CHUNK: usize = 1_000;

/// Monte Carlo estimate of `cov(t_1, t_2)` for two Gaussian genes, against
/// the closed-form approximation with `nu = n1 + n2 - 2`.
pub fn verify_observation(
    obs: Observation,
    rho1: f64,
    rho2: f64,
    n1: usize,
    n2: usize,
    reps: usize,
    seed: u64,
) -> Result<ObservationResult> {
    for rho in [rho1, rho2] {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::invalid(format!("correlation {rho} outside (-1, 1)")));
        }
    }
    if obs == Observation::One && rho1 != rho2 {
        return Err(Error::invalid("observation 1 uses one correlation for both groups"));
    }
    if obs == Observation::Three && n1 != n2 {
        return Err(Error::invalid("observation 3 needs n1 = n2"));
    }
    if n1 < 2 || n2 < 2 {
        return Err(Error::invalid("each group needs at least 2 samples"));
    }
    if reps < MIN_REPLICATES {
        return Err(Error::invalid(format!("need at least {MIN_REPLICATES} replicates, got {reps}")));
    }
    let nu = (n1 + n2 - 2) as f64;
    let theoretical = theoretical_tcov(rho1, rho2, n1, n2, nu)?;

    let mut groups = vec![Group::One; n1];
    groups.extend(vec![Group::Two; n2]);
    let shift = if obs == Observation::Two { OBSERVATION_SHIFT } else { 0.0 };
    let rhos = [rho1, rho2];
    let n_chunks = reps.div_ceil(CHUNK);
    let pairs: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, chunk as u64));
            let count = CHUNK.min(reps - chunk * CHUNK);
            let mut a = vec![0.0; n1 + n2];
            let mut b = vec![0.0; n1 + n2];
            let groups = &groups;
            (0..count)
                .map(|_| {
                    for (j, g) in groups.iter().enumerate() {
                        let rho = rhos[g.index()];
                        let z1: f64 = StandardNormal.sample(&mut rng);
                        let z2: f64 = StandardNormal.sample(&mut rng);
                        a[j] = z1;
                        b[j] = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                        if *g == Group::Two {
                            b[j] += shift;
                        }
                    }
                    (row_t(&a, groups, n1, n2).t, row_t(&b, groups, n1, n2).t)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let k = pairs.len() as f64;
    let (ma, mb) = pairs
        .iter()
        .fold((0.0, 0.0), |(sa, sb), (a, b)| (sa + a, sb + b));
    let (ma, mb) = (ma / k, mb / k);
    let empirical = pairs.iter().map(|(a, b)| (a - ma) * (b - mb)).sum::<f64>() / (k - 1.0);
    Ok(ObservationResult {
        empirical,
        theoretical,
        abs_error: (empirical - theoretical).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn matrix(m: usize, n: usize, seed: u64) -> ExpressionMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random::<f64>() * 4.0).collect()).collect();
        ExpressionMatrix::from_rows(
            (0..m).map(|i| format!("g{i}")).collect(),
            (0..n).map(|j| format!("s{j}")).collect(),
            &rows,
        )
        .unwrap()
    }

    fn within_group_corr(x: &ExpressionMatrix, cols: &[usize], a: usize, b: usize) -> f64 {
        let mean = |g: usize| cols.iter().map(|&j| x.get(g, j)).sum::<f64>() / cols.len() as f64;
        let (ma, mb) = (mean(a), mean(b));
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for &j in cols {
            let (da, db) = (x.get(a, j) - ma, x.get(b, j) - mb);
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn two_point_standardization() {
        let x = ExpressionMatrix::from_rows(
            vec!["a".into(), "b".into()],
            (0..4).map(|j| format!("s{j}")).collect(),
            &[vec![1.0, 3.0, 10.0, 20.0], vec![0.0, 1.0, 5.0, 9.0]],
        )
        .unwrap();
        let labels = GroupLabels::new(vec![Group::One, Group::One, Group::Two, Group::Two]).unwrap();
        let s = row_standardize(&x, &labels).unwrap();
        assert_eq!(s.row(0), vec![-1.0, 1.0, -1.0, 1.0]);
        let again = row_standardize(&s, &labels).unwrap();
        for i in 0..2 {
            for j in 0..4 {
                assert!((again.get(i, j) - s.get(i, j)).abs() < 1e-12);
            }
        }
        let flat = ExpressionMatrix::from_rows(
            vec!["a".into(), "b".into()],
            (0..4).map(|j| format!("s{j}")).collect(),
            &[vec![1.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 5.0, 9.0]],
        )
        .unwrap();
        assert!(row_standardize(&flat, &labels).is_err());
    }

    #[test]
    fn standardization_preserves_within_group_correlation() {
        let x = matrix(20, 10, 5);
        let labels = random_group_split(10, 5, 5, 11).unwrap();
        let s = row_standardize(&x, &labels).unwrap();
        for g in [Group::One, Group::Two] {
            let cols = labels.columns(g);
            for a in 0..20 {
                let row: Vec<f64> = cols.iter().map(|&j| s.get(a, j)).collect();
                let mean = row.iter().sum::<f64>() / row.len() as f64;
                let ms = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
                assert!(mean.abs() < 1e-9 && (ms - 1.0).abs() < 1e-9);
                for b in 0..a {
                    let before = within_group_corr(&x, &cols, a, b);
                    let after = within_group_corr(&s, &cols, a, b);
                    assert!((before - after).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn splits_are_exact_and_reproducible() {
        let l = random_group_split(102, 50, 52, 1).unwrap();
        assert_eq!((l.n1(), l.n2()), (50, 52));
        assert_eq!(random_group_split(4, 2, 2, 9).unwrap(), random_group_split(4, 2, 2, 9).unwrap());
        assert!(random_group_split(4, 0, 4, 9).is_err());
        assert!(random_group_split(5, 2, 2, 9).is_err());
    }

    #[test]
    fn spike_in_touches_only_group_two_of_chosen_genes() {
        let x = matrix(50, 8, 2);
        let labels = random_group_split(8, 4, 4, 3).unwrap();
        let spec = SpikeSpec {
            up: 6,
            down: 3,
            up_offset: 0.1,
            down_offset: -0.1,
            n1: 4,
            n2: 4,
            seed: 7,
        };
        let (y, truth) = spike_in(&x, &labels, &spec).unwrap();
        assert_eq!(truth.count(Direction::Up), 6);
        assert_eq!(truth.count(Direction::Down), 3);
        let mut changed = 0;
        for i in 0..50 {
            for j in 0..8 {
                if y.get(i, j) != x.get(i, j) {
                    changed += 1;
                    assert_eq!(labels.assignment()[j], Group::Two);
                    assert!(!truth.directions[i].is_null());
                }
            }
        }
        assert_eq!(changed, 9 * 4);
        assert_eq!(spike_in(&x, &labels, &spec).unwrap().1, truth);

        let bad = SpikeSpec { up_offset: 0.0, ..spec };
        assert!(spike_in(&x, &labels, &bad).is_err());
        let bad = SpikeSpec { up: 40, down: 10, ..spec };
        assert!(spike_in(&x, &labels, &bad).is_err());
    }

    #[test]
    fn truth_round_trips() {
        let truth = GroundTruth {
            gene_ids: vec!["a".into(), "b".into(), "c".into()],
            directions: vec![Direction::Up, Direction::Null, Direction::Down],
            metadata: vec![("seed".into(), "3".into())],
        };
        let text = truth.to_tsv();
        assert_eq!(text, "# seed=3\ngene_id\tdirection\na\tup\nb\tnull\nc\tdown\n");
        assert_eq!(GroundTruth::parse(&text).unwrap(), truth);
        assert!(GroundTruth::parse("a\tsideways\n").is_err());
    }

    #[test]
    fn gaussian_generator_is_reproducible_and_labelled() {
        let cov = BlockCovSpec { m: 45, block_size: 10, rho: 0.5 };
        let spike = SpikeSpec {
            up: 2,
            down: 2,
            up_offset: 1.0,
            down_offset: -1.0,
            n1: 3,
            n2: 4,
            seed: 42,
        };
        let (x, truth, labels) = gaussian_generate(&cov, &spike).unwrap();
        assert_eq!((x.n_genes(), x.n_samples()), (45, 7));
        assert_eq!(labels.assignment()[..3], [Group::One; 3]);
        assert_eq!(truth.count(Direction::Up) + truth.count(Direction::Down), 4);
        let (y, _, _) = gaussian_generate(&cov, &spike).unwrap();
        assert_eq!(x, y);
        assert!(gaussian_generate(&BlockCovSpec { rho: 1.0, ..cov }, &spike).is_err());
        assert!(gaussian_generate(&BlockCovSpec { rho: -0.2, ..cov }, &spike).is_err());
    }

    #[test]
    fn block_correlation_is_recovered() {
        // 10^4 columns, block of 20 at rho = 0.8.
        let cov = BlockCovSpec { m: 20, block_size: 20, rho: 0.8 };
        let spike = SpikeSpec {
            up: 1,
            down: 1,
            up_offset: 1e-300,
            down_offset: -1e-300,
            n1: 5000,
            n2: 5000,
            seed: 1,
        };
        let (x, _, _) = gaussian_generate(&cov, &spike).unwrap();
        let cols: Vec<usize> = (0..10_000).collect();
        let mut total = 0.0;
        for a in 0..20 {
            for b in 0..a {
                total += within_group_corr(&x, &cols, a, b);
            }
        }
        let mean = total / 190.0;
        assert!((mean - 0.8).abs() < 0.03, "{mean}");
    }

    #[test]
    fn observation_one_independent_genes() {
        let r = verify_observation(Observation::One, 0.0, 0.0, 25, 25, 20_000, 5).unwrap();
        assert_eq!(r.theoretical, 0.0);
        assert!(r.abs_error < 0.03, "{r:?}");
        let again = verify_observation(Observation::One, 0.0, 0.0, 25, 25, 20_000, 5).unwrap();
        assert_eq!(r, again);
        assert!(verify_observation(Observation::One, 1.5, 1.5, 25, 25, 20_000, 5).is_err());
        assert!(verify_observation(Observation::Three, 0.8, 0.2, 25, 20, 20_000, 5).is_err());
        assert!(verify_observation(Observation::One, 0.0, 0.0, 25, 25, 100, 5).is_err());
    }
}
