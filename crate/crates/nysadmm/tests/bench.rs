use std::path::PathBuf;
use std::process::Command;

use nysadmm::bench::{run_bench, write_csv, write_json, BenchConfig, DataSource, ProblemKind, RunRecord, CSV_HEADER};
use nysadmm::generators::{huber_data, lasso_data, low_rank_regression, portfolio_data};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn qp_file(dir: &str) -> BenchConfig {
    BenchConfig { source: DataSource::File(fixture(dir)), ..BenchConfig::synthetic(ProblemKind::QpFile, 0, 0) }
}

#[test]
fn csv_header_matches_golden_file() {
    let golden = std::fs::read_to_string(fixture("header.csv")).unwrap();
    assert_eq!(golden.trim_end(), CSV_HEADER);
    let rec = run_bench(&BenchConfig::synthetic(ProblemKind::Lasso, 20, 1)).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &[rec]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), CSV_HEADER.split(',').count());
    assert_eq!(row[0], "lasso");
    assert_eq!(row[2], "optimal");
}

#[test]
fn json_round_trip() {
    let mut cfg = BenchConfig::synthetic(ProblemKind::ElasticNet, 30, 2);
    cfg.record_history = true;
    let rec = run_bench(&cfg).unwrap();
    assert!(!rec.history.is_empty());
    let mut buf = Vec::new();
    write_json(&mut buf, std::slice::from_ref(&rec)).unwrap();
    let back: Vec<RunRecord> = serde_json::from_slice(&buf).unwrap();
    assert_eq!(back, vec![rec]);
}

#[test]
fn json_writes_non_finite_values_as_null() {
    let mut rec = run_bench(&qp_file("primal_infeasible")).unwrap();
    assert_eq!(rec.status, "primal_infeasible");
    rec.rp = f64::NAN;
    rec.rd = f64::INFINITY;
    let mut buf = Vec::new();
    write_json(&mut buf, std::slice::from_ref(&rec)).unwrap();
    let value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert!(value[0]["rp"].is_null() && value[0]["rd"].is_null());
    let back: Vec<RunRecord> = serde_json::from_slice(&buf).unwrap();
    assert_eq!(back[0].status, rec.status);
    assert!(back[0].rp.is_nan() && back[0].rd.is_nan());
    assert_eq!(back[0].objective, rec.objective);
}

#[test]
fn timings_are_consistent() {
    for problem in [ProblemKind::Lasso, ProblemKind::Logistic, ProblemKind::BoundedLs, ProblemKind::Portfolio] {
        let n = if problem == ProblemKind::Portfolio { 0 } else { 40 };
        let r = run_bench(&BenchConfig::synthetic(problem, n, 3)).unwrap();
        let parts = r.setup_s + r.linsys_total_s + r.prox_total_s;
        assert!(r.total_s >= parts - 1e-3, "{}: {} < {}", r.problem, r.total_s, parts);
        assert!(r.precond_s >= 0.0 && r.setup_s >= 0.0);
    }
}

#[test]
fn infeasible_fixture_reports_status() {
    let r = run_bench(&qp_file("primal_infeasible")).unwrap();
    assert_eq!(r.status, "primal_infeasible");
    assert_eq!(r.exit_code(), 2);
    let r = run_bench(&qp_file("dual_infeasible")).unwrap();
    assert_eq!(r.status, "dual_infeasible");
}

#[test]
fn preconditioner_ablation_keeps_iteration_counts() {
    let mut on = BenchConfig::synthetic(ProblemKind::ElasticNet, 200, 0);
    on.problem = ProblemKind::Lasso;
    on.samples = Some(400);
    let mut off = on.clone();
    off.no_preconditioner = true;
    let a = run_bench(&on).unwrap();
    let b = run_bench(&off).unwrap();
    assert_eq!(a.status, "optimal");
    assert_eq!(b.status, "optimal");
    let ratio = a.iters as f64 / b.iters as f64;
    assert!((0.9..=1.1).contains(&ratio), "{} vs {}", a.iters, b.iters);
    assert!(a.cg_iters <= b.cg_iters, "{} vs {}", a.cg_iters, b.cg_iters);
}

#[test]
fn generators_are_deterministic() {
    assert_eq!(lasso_data(40, 20, 7), lasso_data(40, 20, 7));
    assert_ne!(lasso_data(40, 20, 7).a, lasso_data(40, 20, 8).a);
    assert_eq!(low_rank_regression(30, 20, 1), low_rank_regression(30, 20, 1));
    assert_eq!(huber_data(20, 5), huber_data(20, 5));
    let p1 = portfolio_data(1, 3);
    let p2 = portfolio_data(1, 3);
    assert_eq!((p1.d, p1.f, p1.mu), (p2.d, p2.f, p2.mu));
}

#[test]
fn huber_outliers_are_shifted_by_ten() {
    let h = huber_data(400, 2);
    assert_eq!(h.outliers.len(), 10);
    for i in 0..h.b.len() {
        let d = h.b[i] - h.clean_b[i];
        if h.outliers.contains(&i) {
            assert_eq!(d.abs(), 10.0);
        } else {
            assert_eq!(d, 0.0);
        }
    }
}

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

#[test]
fn cli_exit_codes() {
    let ok = bench().args(["lasso", "--n", "20"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let out = String::from_utf8(ok.stdout).unwrap();
    assert!(out.starts_with(CSV_HEADER));

    let inf = bench().args(["qp_file", "--data"]).arg(fixture("primal_infeasible")).output().unwrap();
    assert_eq!(inf.status.code(), Some(2));

    let limit = bench().args(["bounded_ls", "--n", "20", "--max-iter", "3", "--tol", "1e-12"]).output().unwrap();
    assert_eq!(limit.status.code(), Some(3));

    let bad = bench().args(["lasso", "--n", "nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(4));
    let missing = bench().args(["lasso", "--data", "/no/such/file.svm"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(4));
    let no_dir = bench().args(["qp_file"]).output().unwrap();
    assert_eq!(no_dir.status.code(), Some(4));
}

#[test]
fn cli_writes_json_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let st = bench().args(["huber", "--n", "40", "--format", "json", "--out"]).arg(&path).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let recs: Vec<RunRecord> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(recs[0].problem, "huber");
    assert!(!recs[0].history.is_empty());
}
