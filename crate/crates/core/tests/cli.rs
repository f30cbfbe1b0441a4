use std::path::Path;
use std::process::{Command, Output};

fn netsample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netsample"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pop = dir.path().join("pop");
    let sample = dir.path().join("sample");
    let freq = dir.path().join("freq");
    let est = dir.path().join("estimates.csv");

    let out = netsample(&[
        "gen-population",
        "--out",
        path(&pop),
        "-D",
        "synthetic.nodes=300",
        "-D",
        "synthetic.attributes=flag:0.3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(pop.join("edges.txt").exists() && pop.join("attributes.csv").exists());

    let out = netsample(&[
        "survey",
        "--edges",
        path(&pop.join("edges.txt")),
        "--attributes",
        path(&pop.join("attributes.csv")),
        "--design",
        "sb",
        "--seed",
        "4",
        "-D",
        "design.target-n=50",
        "--out",
        path(&sample),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let members = std::fs::read_to_string(sample.join("members.csv")).unwrap();
    assert_eq!(members.lines().count(), 51);

    let out = netsample(&[
        "resample",
        "--sample",
        path(&sample),
        "-D",
        "resample.iterations=500",
        "-D",
        "resample.target-m=15",
        "-D",
        "resample.pairs=true",
        "--out",
        path(&freq),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(freq.join("frequencies.csv").exists());

    let out = netsample(&[
        "estimate",
        "--sample",
        path(&sample),
        "--frequencies",
        path(&freq),
        "--variables",
        "degree,flag",
        "--estimators",
        "adherent:taylor_edges,vh_current",
        "--out",
        path(&est),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&est).unwrap();
    assert!(text.contains("taylor_edges") && text.contains("vh_current"));
}

#[test]
fn study_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.conf");
    std::fs::write(
        &cfg,
        "designs = rds\nreplications = 4\nsynthetic.nodes = 300\nrds.target-n = 40\n\
         resample.iterations = 300\nresample.target-m = 12\nvariables = degree\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = netsample(&["study", "--config", path(&cfg), "--threads", "1", "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics_rds.csv", "coverage_rds.csv", "summary.csv", "diagnostics.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn exact_oracle_on_a_small_sample() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.txt");
    std::fs::write(&edges, "a b\nb c\nc d\n").unwrap();
    let sample = dir.path().join("sample");
    let out = netsample(&["survey", "--edges", path(&edges), "-D", "design.target-n=4", "--out", path(&sample)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("oracle");
    let out = netsample(&[
        "oracle",
        "--kind",
        "exact",
        "--sample",
        path(&sample),
        "-D",
        "resample.target-m=2",
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let marginals = std::fs::read_to_string(out_dir.join("marginals.csv")).unwrap();
    assert_eq!(marginals.lines().count(), 5);

    // without reseeding the empty state absorbs the chain
    let out = netsample(&[
        "oracle",
        "--kind",
        "exact",
        "--sample",
        path(&sample),
        "-D",
        "resample.reseed-p=0",
        "--out",
        path(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reducible"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = netsample(&["study", "-D", "no-such-key=1", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = netsample(&["survey", "--edges", "/nonexistent/edges.txt", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = netsample(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = netsample(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let out = netsample(&["study", "-D", "replications=zero", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}
