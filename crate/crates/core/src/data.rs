//! Labeled expression matrix and the TSV formats it is read from.
//!
//! Expression TSV: a header `gene_id<TAB>s1<TAB>...<TAB>sn` followed by one row
//! per gene, `gene<TAB>v1<TAB>...<TAB>vn`. Labels TSV: `sample_id<TAB>group`
//! with group `1` or `2`, one row per sample in any order, optional header.
//! Lines starting with `#` are comments in both formats.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub const MIN_GENES: usize = 2;
pub const MIN_SAMPLES: usize = 4;
pub const MIN_GROUP_SIZE: usize = 2;

/// `m x n` matrix of expression values, genes in rows and samples in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    gene_ids: Vec<String>,
    sample_ids: Vec<String>,
    values: Mat<f64>,
}

impl ExpressionMatrix {
    pub fn new(gene_ids: Vec<String>, sample_ids: Vec<String>, values: Mat<f64>) -> Result<Self> {
        if values.nrows() != gene_ids.len() || values.ncols() != sample_ids.len() {
            return Err(Error::Dimension(format!(
                "{} gene ids and {} sample ids for a {}x{} matrix",
                gene_ids.len(),
                sample_ids.len(),
                values.nrows(),
                values.ncols()
            )));
        }
        if gene_ids.len() < MIN_GENES {
            return Err(Error::invalid(format!(
                "need at least {MIN_GENES} genes, got {}",
                gene_ids.len()
            )));
        }
        if sample_ids.len() < MIN_SAMPLES {
            return Err(Error::invalid(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                sample_ids.len()
            )));
        }
        check_unique("gene", &gene_ids)?;
        check_unique("sample", &sample_ids)?;
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::invalid(format!(
                        "non-finite value at gene {} sample {}",
                        gene_ids[i], sample_ids[j]
                    )));
                }
            }
        }
        Ok(Self {
            gene_ids,
            sample_ids,
            values,
        })
    }

    /// Builds a matrix from row vectors, one per gene.
    pub fn from_rows(gene_ids: Vec<String>, sample_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = sample_ids.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {i} has {} values, expected {n}",
                r.len()
            )));
        }
        let values = Mat::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Self::new(gene_ids, sample_ids, values)
    }

    pub fn n_genes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn get(&self, gene: usize, sample: usize) -> f64 {
        self.values[(gene, sample)]
    }

    pub fn row(&self, gene: usize) -> Vec<f64> {
        (0..self.n_samples()).map(|j| self.values[(gene, j)]).collect()
    }

    /// Same ids, new values (validated).
    pub fn with_values(&self, values: Mat<f64>) -> Result<Self> {
        Self::new(self.gene_ids.clone(), self.sample_ids.clone(), values)
    }

    /// Keeps the listed sample columns, in the given order.
    pub fn select_samples(&self, columns: &[usize]) -> Result<Self> {
        let values = Mat::from_fn(self.n_genes(), columns.len(), |i, j| self.values[(i, columns[j])]);
        let ids = columns.iter().map(|&j| self.sample_ids[j].clone()).collect();
        Self::new(self.gene_ids.clone(), ids, values)
    }

    pub fn log10(&self) -> Result<Self> {
        let mut values = self.values.clone();
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                let v = values[(i, j)];
                if v <= 0.0 {
                    return Err(Error::invalid(format!(
                        "log10 requires positive values; gene {} sample {} is {v}",
                        self.gene_ids[i], self.sample_ids[j]
                    )));
                }
                values[(i, j)] = v.log10();
            }
        }
        self.with_values(values)
    }

    /// Writes the expression TSV. Values use the shortest round-trip
    /// representation, so re-reading yields bit-identical numbers.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "gene_id")?;
        for s in &self.sample_ids {
            write!(out, "\t{s}")?;
        }
        writeln!(out)?;
        for (i, g) in self.gene_ids.iter().enumerate() {
            write!(out, "{g}")?;
            for j in 0..self.n_samples() {
                write!(out, "\t{:?}", self.values[(i, j)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

fn check_unique(kind: &str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate {kind} id {id}")));
        }
    }
    Ok(())
}

/// Parses the expression TSV format from a string.
pub fn parse_expression_tsv(text: &str) -> Result<ExpressionMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "empty file".into(),
    })?;
    let sample_ids: Vec<String> = header.split('\t').skip(1).map(str::to_owned).collect();
    let n = sample_ids.len();

    let mut gene_ids = Vec::new();
    let mut flat = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut fields = line.split('\t');
        let gene = fields.next().unwrap_or_default().to_owned();
        let mut count = 0;
        for (k, field) in fields.enumerate() {
            count += 1;
            if count > n {
                break;
            }
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                column: k + 2,
                message: format!("cannot parse {field:?} as a number (sample {})", sample_ids[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    column: k + 2,
                    message: format!("non-finite value {field:?}"),
                });
            }
            flat.push(v);
        }
        if count != n {
            return Err(Error::Parse {
                line: line_no,
                column: count.min(n) + 2,
                message: format!(
                    "gene {gene}: expected {n} values, found {}",
                    line.split('\t').count() - 1
                ),
            });
        }
        gene_ids.push(gene);
    }
    let m = gene_ids.len();
    let values = Mat::from_fn(m, n, |i, j| flat[i * n + j]);
    ExpressionMatrix::new(gene_ids, sample_ids, values)
}

/// Reads an expression TSV; with `apply_log10` every value is replaced by its
/// base-10 logarithm (all raw values must then be positive).
pub fn load_expression_matrix(path: impl AsRef<Path>, apply_log10: bool) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let x = parse_expression_tsv(&text)?;
    if apply_log10 {
        x.log10()
    } else {
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    One,
    Two,
}

impl Group {
    pub fn index(self) -> usize {
        match self {
            Group::One => 0,
            Group::Two => 1,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Group::One => "1",
            Group::Two => "2",
        }
    }
}

/// Group membership of every sample, aligned to the matrix columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLabels {
    assignment: Vec<Group>,
    n1: usize,
    n2: usize,
}

impl GroupLabels {
    pub fn new(assignment: Vec<Group>) -> Result<Self> {
        let n1 = assignment.iter().filter(|&&g| g == Group::One).count();
        let n2 = assignment.len() - n1;
        if n1 < MIN_GROUP_SIZE || n2 < MIN_GROUP_SIZE {
            return Err(Error::invalid(format!(
                "each group needs at least {MIN_GROUP_SIZE} samples (n1={n1}, n2={n2})"
            )));
        }
        Ok(Self { assignment, n1, n2 })
    }

    pub fn assignment(&self) -> &[Group] {
        &self.assignment
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn size(&self, group: Group) -> usize {
        match group {
            Group::One => self.n1,
            Group::Two => self.n2,
        }
    }

    /// Column indices belonging to `group`, ascending.
    pub fn columns(&self, group: Group) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == group)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn swapped(&self) -> Self {
        let assignment = self
            .assignment
            .iter()
            .map(|g| match g {
                Group::One => Group::Two,
                Group::Two => Group::One,
            })
            .collect();
        Self {
            assignment,
            n1: self.n2,
            n2: self.n1,
        }
    }

    pub(crate) fn check_matches(&self, x: &ExpressionMatrix) -> Result<()> {
        if self.len() != x.n_samples() {
            return Err(Error::Dimension(format!(
                "{} labels for {} samples",
                self.len(),
                x.n_samples()
            )));
        }
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, sample_ids: &[String], mut out: W) -> std::io::Result<()> {
        writeln!(out, "sample_id\tgroup")?;
        for (s, g) in sample_ids.iter().zip(&self.assignment) {
            writeln!(out, "{s}\t{}", g.token())?;
        }
        Ok(())
    }

    pub fn save(&self, sample_ids: &[String], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_tsv(sample_ids, &mut buf).map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Parses a labels TSV and aligns it to `sample_ids`.
pub fn parse_labels_tsv(text: &str, sample_ids: &[String]) -> Result<GroupLabels> {
    let position: HashMap<&str, usize> = sample_ids
        .iter()
        .enumerate()
        .map(|(j, s)| (s.as_str(), j))
        .collect();
    let mut slots: Vec<Option<Group>> = vec![None; sample_ids.len()];
    let mut first = true;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let is_header = first && fields.first().map(|f| f.trim()) == Some("sample_id");
        first = false;
        if is_header {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                column: fields.len().min(2) + 1,
                message: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let sample = fields[0].trim();
        let group = match fields[1].trim() {
            "1" => Group::One,
            "2" => Group::Two,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    column: 2,
                    message: format!("group must be 1 or 2, got {other:?}"),
                })
            }
        };
        let j = *position
            .get(sample)
            .ok_or_else(|| Error::invalid(format!("labels name unknown sample {sample}")))?;
        if slots[j].replace(group).is_some() {
            return Err(Error::invalid(format!("sample {sample} labeled twice")));
        }
    }
    let assignment = slots
        .into_iter()
        .zip(sample_ids)
        .map(|(g, s)| g.ok_or_else(|| Error::invalid(format!("no label for sample {s}"))))
        .collect::<Result<Vec<_>>>()?;
    GroupLabels::new(assignment)
}

pub fn load_labels(path: impl AsRef<Path>, sample_ids: &[String]) -> Result<GroupLabels> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels_tsv(&text, sample_ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn parses_small_matrix() {
        let text = "gene_id\ts1\ts2\ts3\ts4\n\
                    g1\t1\t2\t3\t4\n\
                    g2\t0.5\t-1\t2e-3\t7\n\
                    g3\t1\t1\t1\t1\n";
        let x = parse_expression_tsv(text).unwrap();
        assert_eq!((x.n_genes(), x.n_samples()), (3, 4));
        assert_eq!(x.get(1, 2), 2e-3);
        assert_eq!(x.gene_ids()[2], "g3");
    }

    #[test]
    fn na_is_reported_with_position() {
        let text = "gene_id\ts1\ts2\ts3\ts4\ng1\t1\t2\t3\t4\ng2\t1\tNA\t3\t4\n";
        match parse_expression_tsv(text) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 3)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_is_rejected() {
        let text = "gene_id\ts1\ts2\ts3\ts4\ng1\t1\t2\t3\ng2\t1\t2\t3\t4\n";
        assert!(matches!(parse_expression_tsv(text), Err(Error::Parse { line: 2, .. })));
        let text = "gene_id\ts1\ts2\ts3\ts4\ng1\t1\t2\t3\t4\t5\ng2\t1\t2\t3\t4\n";
        assert!(matches!(parse_expression_tsv(text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn non_finite_and_duplicates_are_rejected() {
        let text = "gene_id\ts1\ts2\ts3\ts4\ng1\t1\tinf\t3\t4\ng2\t1\t2\t3\t4\n";
        assert!(matches!(parse_expression_tsv(text), Err(Error::Parse { column: 3, .. })));
        let text = "gene_id\ts1\ts2\ts3\ts4\ng1\t1\t2\t3\t4\ng1\t1\t2\t3\t4\n";
        assert!(matches!(parse_expression_tsv(text), Err(Error::Invalid(_))));
        let text = "gene_id\ts1\ts1\ts3\ts4\ng1\t1\t2\t3\t4\ng2\t1\t2\t3\t4\n";
        assert!(matches!(parse_expression_tsv(text), Err(Error::Invalid(_))));
    }

    #[test]
    fn log10_option() {
        let x = ExpressionMatrix::from_rows(
            ids("g", 2),
            ids("s", 4),
            &[vec![1.0, 10.0, 100.0, 1000.0], vec![1.0, 1.0, 1.0, 1.0]],
        )
        .unwrap();
        let y = x.log10().unwrap();
        assert_eq!(y.row(0), vec![0.0, 1.0, 2.0, 3.0]);

        let bad = ExpressionMatrix::from_rows(
            ids("g", 2),
            ids("s", 4),
            &[vec![1.0, 0.0, 1.0, 1.0], vec![1.0, 1.0, 1.0, 1.0]],
        )
        .unwrap();
        assert!(bad.log10().is_err());
    }

    #[test]
    fn labels_align_to_sample_order() {
        let samples = ids("s", 4);
        let text = "sample_id\tgroup\ns3\t2\ns1\t1\ns4\t2\ns2\t1\n";
        let l = parse_labels_tsv(text, &samples).unwrap();
        assert_eq!(l.assignment(), &[Group::One, Group::One, Group::Two, Group::Two]);
        assert_eq!((l.n1(), l.n2()), (2, 2));
    }

    #[test]
    fn label_validation() {
        let samples = ids("s", 4);
        let unbalanced = "s1\t1\ns2\t1\ns3\t1\ns4\t2\n";
        assert!(parse_labels_tsv(unbalanced, &samples).is_err());
        let unknown = "s1\t1\ns2\t1\ns3\t2\ns9\t2\n";
        assert!(parse_labels_tsv(unknown, &samples).is_err());
        let missing = "s1\t1\ns2\t1\ns3\t2\n";
        assert!(parse_labels_tsv(missing, &samples).is_err());
        let token = "s1\t1\ns2\t1\ns3\t2\ns4\t3\n";
        assert!(matches!(
            parse_labels_tsv(token, &samples),
            Err(Error::Parse { line: 4, column: 2, .. })
        ));
    }

    #[test]
    fn fifty_fifty_two_design_counts() {
        let samples = ids("s", 102);
        let text: String = samples
            .iter()
            .enumerate()
            .map(|(j, s)| format!("{s}\t{}\n", if j < 50 { 1 } else { 2 }))
            .collect();
        let l = parse_labels_tsv(&text, &samples).unwrap();
        assert_eq!((l.n1(), l.n2()), (50, 52));
    }
}
