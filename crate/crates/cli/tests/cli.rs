use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tellipsoid"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rank_fixture(extra: &[&str]) -> Output {
    let input = fixture("small.tsv");
    let labels = fixture("small_labels.tsv");
    let mut args = vec!["rank", "--input", input.to_str().unwrap(), "--labels", labels.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn gene_column(tsv: &[u8]) -> Vec<String> {
    String::from_utf8_lossy(tsv)
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').nth(1).unwrap().to_string())
        .collect()
}

#[test]
fn rank_writes_requested_rows() {
    let out = rank_fixture(&["--R", "30"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("rank\tgene_id\tu_star\tt\tt_rank\n"));
    assert_eq!(gene_column(text.as_bytes()).len(), 30);
    assert!(text.contains("# P=50\n# c=100\n# delta=1e-10\n# method=tellipsoid/lowrank-woodbury\n"));
}

#[test]
fn solvers_agree_on_fixture() {
    let dense = rank_fixture(&["--R", "100", "--solver", "dense"]);
    let low = rank_fixture(&["--R", "100", "--solver", "lowrank"]);
    assert!(dense.status.success() && low.status.success());
    assert_eq!(gene_column(&dense.stdout), gene_column(&low.stdout));
}

#[test]
fn validation_errors_exit_one() {
    let out = rank_fixture(&["--R", "30", "--P", "120"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("P out of range"));

    let out = rank_fixture(&["--R", "101"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("R out of range"));

    let out = rank_fixture(&["--R", "5", "--solver", "qr"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["rank", "--input", "x.tsv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_exits_two() {
    let labels = fixture("small_labels.tsv");
    let out = run(&["rank", "--input", "/nonexistent/x.tsv", "--labels", labels.to_str().unwrap(), "--R", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "simulate".to_string(),
            "--mode".into(),
            "gaussian".into(),
            "--m".into(),
            "300".into(),
            "--mu".into(),
            "10".into(),
            "--md".into(),
            "5".into(),
            "--xu".into(),
            "1".into(),
            "--xd".into(),
            "-1".into(),
            "--n1".into(),
            "5".into(),
            "--n2".into(),
            "6".into(),
            "--out-dir".into(),
            d.to_str().unwrap().into(),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let mut v = args(d);
        v.extend(["--seed".to_string(), "17".to_string()]);
        let out = bin().args(&v).output().unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for f in ["data.tsv", "labels.tsv", "truth.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let truth = std::fs::read_to_string(a.join("truth.tsv")).unwrap();
    assert!(truth.contains("# seed=17\n"));
    assert_eq!(truth.lines().filter(|l| l.ends_with("\tup")).count(), 10);

    let out = bin().args(args(&dir.path().join("c"))).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--seed"));
}

#[test]
fn simulate_standardize_mode_subsamples_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("small.tsv");
    let out = run(&[
        "simulate", "--mode", "standardize", "--input", input.to_str().unwrap(), "--mu", "5", "--md", "5",
        "--xu", "0.1", "--xd", "-0.1", "--n1", "6", "--n2", "6", "--seed", "3", "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let data = std::fs::read_to_string(dir.path().join("data.tsv")).unwrap();
    assert_eq!(data.lines().next().unwrap().split('\t').count(), 13);
}

#[test]
fn evaluate_scores_lists_and_rejects_unknown_genes() {
    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("list.tsv");
    let raw = dir.path().join("raw.tsv");
    let out = rank_fixture(&["--R", "20", "--output", list.to_str().unwrap()]);
    assert!(out.status.success());
    let out = rank_fixture(&["--R", "20", "--method", "raw_t", "--output", raw.to_str().unwrap()]);
    assert!(out.status.success());

    let truth = fixture("small_truth.tsv");
    let table = dir.path().join("table.txt");
    let out = run(&[
        "evaluate", "--list", list.to_str().unwrap(), "--list", raw.to_str().unwrap(), "--truth",
        truth.to_str().unwrap(), "--table", table.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = String::from_utf8(out.stdout).unwrap();
    assert_eq!(report.lines().count(), 3);
    assert!(report.starts_with("list\tmethod\tR\tNoFP\tFDR\n"));
    let table = std::fs::read_to_string(table).unwrap();
    assert!(table.contains("NoFPs; raw t-statistics ="));

    let partial = dir.path().join("partial.tsv");
    let text = std::fs::read_to_string(&truth).unwrap();
    let first_gene = gene_column(&std::fs::read(&list).unwrap())[0].clone();
    let kept: String = text
        .lines()
        .filter(|l| !l.starts_with(&format!("{first_gene}\t")))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&partial, kept).unwrap();
    let out = run(&["evaluate", "--list", list.to_str().unwrap(), "--truth", partial.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains(&first_gene));
}

#[test]
fn evaluate_study_mode() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.tsv");
    let out = run(&[
        "--threads", "2", "evaluate", "--replicates", "3", "--m", "300", "--mu", "10", "--md", "10",
        "--xu", "1", "--xd", "-1", "--n1", "6", "--n2", "6", "--R", "10,20", "--seed", "5",
        "--summary", summary.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = String::from_utf8(out.stdout).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3 * 2 * 2);
    let summary = std::fs::read_to_string(summary).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn covlab_exit_codes() {
    let ok = run(&["covlab", "--obs", "1", "--rho", "0", "--reps", "20000", "--seed", "1"]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    let line = String::from_utf8(ok.stdout).unwrap();
    assert!(line.starts_with("empirical_cov\ttheoretical_cov\tabs_error\n"));

    let bad = run(&["covlab", "--obs", "1", "--rho", "1.5", "--seed", "1"]);
    assert_eq!(bad.status.code(), Some(1));

    let tight = run(&["covlab", "--obs", "1", "--rho", "0.5", "--reps", "20000", "--tol", "0", "--seed", "1"]);
    assert_eq!(tight.status.code(), Some(3));
}
