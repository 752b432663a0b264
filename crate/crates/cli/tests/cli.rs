use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphclust::ingest::{save_canonical, Dataset};
use graphclust::numerics::DenseMatrix;
use graphclust::sbm::planted_partition;
use graphclust::Graph;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_graphclust"));
    c.env_remove("GRAPHCLUST_DATA");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Planted 3-block graph with identity features, saved as `toy.gct`.
fn toy(dir: &TempDir) -> PathBuf {
    let (g, z) = planted_partition(45, 3, 0.5, 0.03, 7).unwrap();
    let ds = Dataset::new("toy", g, DenseMatrix::identity(45), z, 3).unwrap();
    let p = dir.path().join("toy.gct");
    save_canonical(&ds, &p).unwrap();
    p
}

fn with_isolated(dir: &TempDir) -> PathBuf {
    let g = Graph::from_edges(&[(0, 1), (1, 2), (0, 2)], 4).unwrap();
    let ds = Dataset::new("iso", g, DenseMatrix::identity(4), vec![0, 0, 0, 1], 2).unwrap();
    let p = dir.path().join("iso.gct");
    save_canonical(&ds, &p).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_prints_csv_report() {
    let dir = TempDir::new().unwrap();
    let data = toy(&dir);
    let o = run(&["run", "leiden", "--dataset", s(&data), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], graphclust::metrics::CSV_HEADER);
    assert!(lines[1].starts_with("leiden,toy,3,"));
    assert!(lines[1].ends_with(','), "wall_ms stays empty without --timing");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let data = toy(&dir);
    let cases: [&[&str]; 7] = [
        &["spectral", "--k", "3"],
        &["sbm", "--method", "mh", "--iters", "4000", "--burn-in", "1000"],
        &["mcl", "--inflation", "1.8"],
        &["leiden", "--objective", "cpm", "--gamma", "0.2"],
        &["gae", "--epochs", "5", "--latent-dim", "8"],
        &["arga", "--epochs", "5", "--latent-dim", "8", "--disc-iters", "2"],
        &["mvgrl", "--epochs", "3", "--latent-dim", "8"],
    ];
    for extra in cases {
        let mut args = vec!["run"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--dataset", s(&data), "--seed", "11", "--format", "json"]);
        let a = run(&args);
        let b = run(&args);
        assert_eq!(code(&a), 0, "{extra:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{extra:?}");
    }
}

#[test]
fn timing_fills_wall_ms() {
    let dir = TempDir::new().unwrap();
    let data = toy(&dir);
    let o = run(&["run", "mcl", "--dataset", s(&data), "--timing"]);
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    assert!(!row.ends_with(','));
}

#[test]
fn text_and_file_output() {
    let dir = TempDir::new().unwrap();
    let data = toy(&dir);
    let out = dir.path().join("r.txt");
    let o = run(&["run", "spectral", "--dataset", s(&data), "--format", "text", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(out).unwrap();
    assert!(text.lines().any(|l| l.starts_with("modularity")));
    assert!(text.lines().any(|l| l.starts_with("clusters")));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let data = toy(&dir);
    assert_eq!(code(&run(&["run", "louvain", "--dataset", s(&data)])), 1);
    assert_eq!(code(&run(&["run", "leiden", "--dataset", "no-such-dataset"])), 1);
    assert_eq!(code(&run(&["run", "leiden", "--dataset", s(&data), "--theta", "0"])), 1);
    assert_eq!(code(&run(&["run", "mcl", "--dataset", s(&data), "--inflation", "1.0"])), 1);
    let iso = with_isolated(&dir);
    let o = run(&["run", "mcl", "--no-self-loops", "--dataset", s(&iso)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("node 3"));
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn bench_partial_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let data = toy(&dir);
    let plan = dir.path().join("plan.txt");
    let prefix = dir.path().join("out/table");
    fs::write(
        &plan,
        format!(
            "[plan]\ndatasets = {}\nseeds = 0, 1\noutput = {}\n\n[algorithm leiden]\n\n[algorithm too-many]\nkind = spectral\nk = 100\n",
            s(&data),
            s(&prefix)
        ),
    )
    .unwrap();
    let o = run(&["bench", "--plan", s(&plan)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    for ext in ["csv", "runs.csv", "json", "txt"] {
        assert!(dir.path().join(format!("out/table.{ext}")).is_file(), "{ext}");
    }
    let first = fs::read(dir.path().join("out/table.csv")).unwrap();
    let o = run(&["bench", "--plan", s(&plan)]);
    assert_eq!(code(&o), 3);
    assert_eq!(fs::read(dir.path().join("out/table.csv")).unwrap(), first);

    fs::write(&plan, "[plan]\ndatasets = x\noutput = o\n[algorithm nope]\n").unwrap();
    assert_eq!(code(&run(&["bench", "--plan", s(&plan)])), 1);
}

#[test]
fn export_embeddings_writes_csv() {
    let dir = TempDir::new().unwrap();
    let data = toy(&dir);
    let emb = dir.path().join("emb.csv");
    let o = run(&[
        "export-embeddings",
        "--model",
        "gae",
        "--dataset",
        s(&data),
        "--epochs",
        "3",
        "--latent-dim",
        "4",
        "--out",
        s(&emb),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(emb).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "node_id,dim_0,dim_1,dim_2,dim_3,label");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 45);
    assert!(rows[0].starts_with("0,"));
    assert_eq!(rows[44].split(',').count(), 6);
}

#[test]
fn convert_then_list() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("e.txt"), "0 1\n1 2\n# comment\n2 0\n").unwrap();
    fs::write(p.join("f.csv"), "1,0\n0,1\n1,1\n").unwrap();
    fs::write(p.join("l.txt"), "a\nb\na\n").unwrap();
    let out = p.join("uat.gct");
    let o = run(&[
        "convert",
        "--name",
        "uat",
        "--edges",
        s(&p.join("e.txt")),
        "--features",
        s(&p.join("f.csv")),
        "--labels",
        s(&p.join("l.txt")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("n=3 m=3 d=2 k=2"));

    let o = bin().env("GRAPHCLUST_DATA", p).arg("datasets").output().unwrap();
    assert_eq!(code(&o), 0);
    let listing = stdout(&o);
    assert!(listing.lines().any(|l| l.starts_with("uat") && l.contains("ok")));
    assert!(listing.lines().any(|l| l.starts_with("cora") && l.contains("missing")));

    let o = bin().env("GRAPHCLUST_DATA", p).args(["datasets", "uat"]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(code(&run(&["datasets", "cora"])), 1);
}
