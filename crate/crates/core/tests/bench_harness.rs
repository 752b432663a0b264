use std::collections::BTreeMap;

use graphclust::bench::{
    run_bench_on, run_single, AlgorithmConfig, BenchPlan, RunStatus, MCL_NOT_CONVERGED,
};
use graphclust::ingest::Dataset;
use graphclust::mcl::MclConfig;
use graphclust::metrics::{MetricsReport, CSV_HEADER};
use graphclust::numerics::DenseMatrix;
use graphclust::sbm::planted_partition;
use graphclust::Graph;

fn triangle_pair() -> Dataset {
    let g = Graph::from_edges(&[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)], 6).unwrap();
    Dataset::new("pair", g, DenseMatrix::identity(6), vec![0, 0, 0, 1, 1, 1], 2).unwrap()
}

fn planted(name: &str, seed: u64) -> Dataset {
    let (g, z) = planted_partition(60, 3, 0.4, 0.02, seed).unwrap();
    Dataset::new(name, g, DenseMatrix::identity(60), z, 3).unwrap()
}

fn plan(body: &str) -> BenchPlan {
    BenchPlan::parse(&format!("[plan]\ndatasets = x\noutput = unused\n{body}")).unwrap()
}

fn schema_ok(csv: &str) -> bool {
    let mut lines = csv.lines();
    lines.next() == Some(CSV_HEADER) && lines.all(|l| l.split(',').count() == CSV_HEADER.split(',').count())
}

#[test]
fn spectral_smoke_report() {
    let ds = triangle_pair();
    let out = run_single(&AlgorithmConfig::default_for("spectral").unwrap(), "spectral", &ds, 0).unwrap();
    let r = &out.report;
    assert_eq!((r.algorithm.as_str(), r.dataset.as_str(), r.num_clusters), ("spectral", "pair", 2));
    assert_eq!(r.acc, 1.0);
    assert!((r.modularity - 5.0 / 14.0).abs() < 1e-12);
    assert!(r.wall_ms.is_none());
    assert!(schema_ok(&format!("{CSV_HEADER}\n{}", r.to_csv_row())));
}

#[test]
fn mcl_non_convergence_is_flagged() {
    let ds = planted("p", 1);
    let cfg = AlgorithmConfig::Mcl(MclConfig {
        max_rounds: 1,
        ..MclConfig::default()
    });
    let r = run_single(&cfg, "mcl", &ds, 0).unwrap().report;
    assert!(r.degenerate.iter().any(|d| d == MCL_NOT_CONVERGED));
    let r = run_single(&AlgorithmConfig::default_for("mcl").unwrap(), "mcl", &ds, 0).unwrap().report;
    assert!(!r.degenerate.iter().any(|d| d == MCL_NOT_CONVERGED));
}

#[test]
fn report_json_round_trips() {
    for algo in ["leiden", "mcl", "spectral"] {
        let r = run_single(&AlgorithmConfig::default_for(algo).unwrap(), algo, &triangle_pair(), 2)
            .unwrap()
            .report;
        let back: MetricsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back.to_json(), r.to_json());
        assert_eq!(back.to_csv_row(), r.to_csv_row());
    }
}

#[test]
fn every_algorithm_runs_on_a_toy_graph() {
    let ds = planted("p", 2);
    for name in ["spectral", "sbm", "mcl", "leiden", "gae", "arga", "mvgrl"] {
        let mut params = BTreeMap::new();
        if matches!(name, "gae" | "arga" | "mvgrl") {
            params.insert("epochs".to_string(), "3".to_string());
            params.insert("latent_dim".to_string(), "8".to_string());
        }
        let cfg = AlgorithmConfig::from_params(name, &params).unwrap();
        let out = run_single(&cfg, name, &ds, 0).unwrap();
        assert_eq!(out.partition.assignment().len(), 60, "{name}");
        assert_eq!(out.embedding.is_some(), matches!(name, "gae" | "arga" | "mvgrl"));
    }
    let mut params = BTreeMap::new();
    params.insert("method".to_string(), "mh".to_string());
    params.insert("iters".to_string(), "3000".to_string());
    params.insert("burn_in".to_string(), "1000".to_string());
    let out = run_single(&AlgorithmConfig::from_params("sbm", &params).unwrap(), "sbm-mh", &ds, 0).unwrap();
    assert!(!out.chain_trace.unwrap().is_empty());
}

#[test]
fn unknown_algorithm_fails_validation() {
    let err = BenchPlan::parse("[plan]\ndatasets = x\noutput = o\n[algorithm louvain]\n").unwrap_err();
    assert!(err.to_string().contains("louvain"));
    assert!(BenchPlan::parse("[plan]\ndatasets = x\noutput = o\n").is_err());
}

#[test]
fn bench_is_deterministic_across_worker_counts() {
    let data = [planted("a", 3), planted("b", 4)];
    let body = "seeds = 0, 1, 2\n[algorithm leiden]\n[algorithm spectral]\n[algorithm mcl]\n";
    let mut p = plan(body);
    p.workers = 1;
    let one = run_bench_on(&p, &data).unwrap();
    p.workers = 4;
    let four = run_bench_on(&p, &data).unwrap();
    assert_eq!(one.summary_csv(), four.summary_csv());
    assert_eq!(one.runs_csv(), four.runs_csv());
    assert_eq!(one.to_json(), four.to_json());
    // MCL ignores the seed and runs once per dataset.
    assert_eq!(one.runs.len(), 3 * 2 + 3 * 2 + 2);
    assert_eq!(one.summary.len(), 6);
    assert!(schema_ok(&one.summary_csv()) && schema_ok(&one.runs_csv()));
    let leiden_a = &one.summary[0];
    let best = leiden_a.best.as_ref().unwrap();
    let max_q = one
        .runs
        .iter()
        .filter(|r| r.algorithm == "leiden" && r.dataset == "a")
        .map(|r| match &r.status {
            RunStatus::Ok { report } => report.modularity,
            RunStatus::Failed { .. } => f64::NAN,
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best.modularity, max_q);
}

#[test]
fn failed_cells_are_recorded_and_the_rest_continue() {
    let data = [triangle_pair()];
    let p = plan("seeds = 0, 1\n[algorithm leiden]\n[algorithm big]\nkind = spectral\nk = 50\n");
    let res = run_bench_on(&p, &data).unwrap();
    assert_eq!(res.failures(), 2);
    assert!(res.summary[0].best.is_some());
    assert!(res.summary[1].best.is_none());
    assert_eq!(res.summary[1].failed, 2);
    assert!(schema_ok(&res.runs_csv()));
    assert!(res.text_table(&p.metrics).contains("0/2 (2 failed)"));
    let json: serde_json::Value = serde_json::from_str(&res.to_json()).unwrap();
    assert_eq!(json["runs"][2]["status"], "failed");
}

#[test]
fn writes_all_four_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan("[algorithm leiden]\n");
    let res = run_bench_on(&p, &[triangle_pair()]).unwrap();
    let files = res.write(&dir.path().join("nested/table"), &p.metrics).unwrap();
    assert_eq!(files.len(), 4);
    let txt = std::fs::read_to_string(&files[3]).unwrap();
    assert!(txt.starts_with("algorithm"));
    assert!(txt.lines().nth(1).unwrap().starts_with("leiden"));
}

#[test]
fn shipped_plan_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans/comparison.plan");
    let p = BenchPlan::load(&path).unwrap();
    assert_eq!(p.datasets, vec!["cora", "citeseer", "uat"]);
    assert_eq!(p.algorithms.len(), 8);
    assert_eq!(p.seeds.len(), 5);
}
