//! Benchmark harness: per-algorithm configuration, single runs with the full
//! metric suite, and plan-driven sweeps over datasets and seeds.
//!
//! Plan files are line-oriented. Blank lines and `#` comments are ignored.
//!
//! ```text
//! [plan]
//! datasets = cora, citeseer
//! seeds = 0, 1, 2, 3, 4
//! metrics = acc, nmi, ari, modularity
//! output = results/table
//! workers = 4
//!
//! [algorithm leiden]
//! objective = modularity
//!
//! [algorithm sbm-mh]
//! kind = sbm
//! method = mh
//! iters = 200000
//! ```
//!
//! A section's label names the report rows; `kind` selects the algorithm and
//! defaults to the label.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deep::{encode_and_cluster, train, DeepHyper, DeepModel};
use crate::error::{invalid, Error, Result};
use crate::graph::Partition;
use crate::ingest::{resolve, Dataset};
use crate::leiden::{leiden, LeidenConfig, ObjectiveKind, QualityObjective};
use crate::mcl::{mcl, MclConfig};
use crate::metrics::{evaluate, MetricsReport, CSV_HEADER};
use crate::numerics::DenseMatrix;
use crate::sbm::{dcsbm_mh, sbm_em, sbm_mh, EmConfig, McmcConfig, SbmPriors, TracePoint};
use crate::spectral::{spectral_clustering, SpectralConfig};

/// Degenerate flag recorded when MCL hits its round limit.
pub const MCL_NOT_CONVERGED: &str = "mcl_not_converged";

/// Metric columns a plan may select for the text table.
pub const METRIC_NAMES: [&str; 8] = [
    "acc",
    "acc_maj",
    "nmi",
    "ari",
    "modularity",
    "conductance_mean",
    "internal_density",
    "wall_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SbmMethod {
    Em,
    Mh,
    DcsbmMh,
}

impl fmt::Display for SbmMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SbmMethod::Em => "em",
            SbmMethod::Mh => "mh",
            SbmMethod::DcsbmMh => "dcsbm-mh",
        })
    }
}

impl FromStr for SbmMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(SbmMethod::Em),
            "mh" => Ok(SbmMethod::Mh),
            "dcsbm-mh" | "dcsbm" => Ok(SbmMethod::DcsbmMh),
            other => invalid(format!("unknown SBM method {other:?}")),
        }
    }
}

/// Settings for the deep models; `None` fields take the model defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeepOverrides {
    pub epochs: Option<usize>,
    pub latent_dim: Option<usize>,
    pub lr: Option<f64>,
    pub ppr_alpha: Option<f64>,
    pub disc_iters: Option<usize>,
}

/// One algorithm with its settings. A `k` of `None` means the dataset's
/// class count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlgorithmConfig {
    Spectral {
        k: Option<usize>,
        normalize_rows: bool,
    },
    Sbm {
        k: Option<usize>,
        method: SbmMethod,
        iters: usize,
        burn_in: usize,
    },
    Mcl(MclConfig),
    Leiden {
        objective: ObjectiveKind,
        gamma: f64,
        theta: f64,
    },
    Deep {
        model: DeepModel,
        k: Option<usize>,
        overrides: DeepOverrides,
    },
}

pub const ALGORITHMS: [&str; 7] = ["spectral", "sbm", "mcl", "leiden", "gae", "arga", "mvgrl"];

impl AlgorithmConfig {
    /// Default settings for an algorithm name.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "spectral" => AlgorithmConfig::Spectral {
                k: None,
                normalize_rows: false,
            },
            "sbm" => AlgorithmConfig::Sbm {
                k: None,
                method: SbmMethod::Em,
                iters: 200_000,
                burn_in: 50_000,
            },
            "mcl" => AlgorithmConfig::Mcl(MclConfig::default()),
            "leiden" => AlgorithmConfig::Leiden {
                objective: ObjectiveKind::Modularity,
                gamma: 1.0,
                theta: 0.01,
            },
            "gae" | "arga" | "mvgrl" => AlgorithmConfig::Deep {
                model: name.parse()?,
                k: None,
                overrides: DeepOverrides::default(),
            },
            other => return invalid(format!("unknown algorithm {other:?}; expected one of {}", ALGORITHMS.join(", "))),
        })
    }

    /// Defaults for `name` with `key = value` settings applied. Unknown keys
    /// are rejected.
    pub fn from_params(name: &str, params: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default_for(name)?;
        for (key, value) in params {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for `{key}`")))
        }
        let unknown = || invalid(format!("unknown setting `{key}`"));
        match self {
            AlgorithmConfig::Spectral { k, normalize_rows } => match key {
                "k" => *k = Some(num(key, value)?),
                "normalize_rows" => *normalize_rows = num(key, value)?,
                _ => return unknown(),
            },
            AlgorithmConfig::Sbm {
                k,
                method,
                iters,
                burn_in,
            } => match key {
                "k" => *k = Some(num(key, value)?),
                "method" => *method = value.parse()?,
                "iters" => *iters = num(key, value)?,
                "burn_in" => *burn_in = num(key, value)?,
                _ => return unknown(),
            },
            AlgorithmConfig::Mcl(c) => match key {
                "expansion" => c.expansion = num(key, value)?,
                "inflation" => c.inflation = num(key, value)?,
                "eps" | "epsilon" => c.epsilon = num(key, value)?,
                "max_rounds" => c.max_rounds = num(key, value)?,
                "prune" => c.prune_threshold = num(key, value)?,
                "self_loops" => c.add_self_loops = num(key, value)?,
                _ => return unknown(),
            },
            AlgorithmConfig::Leiden { objective, gamma, theta } => match key {
                "objective" => *objective = value.parse()?,
                "gamma" => *gamma = num(key, value)?,
                "theta" => *theta = num(key, value)?,
                _ => return unknown(),
            },
            AlgorithmConfig::Deep { k, overrides: o, .. } => match key {
                "k" => *k = Some(num(key, value)?),
                "epochs" => o.epochs = Some(num(key, value)?),
                "latent_dim" => o.latent_dim = Some(num(key, value)?),
                "lr" => o.lr = Some(num(key, value)?),
                "ppr_alpha" => o.ppr_alpha = Some(num(key, value)?),
                "disc_iters" => o.disc_iters = Some(num(key, value)?),
                _ => return unknown(),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::Spectral { k, .. } | AlgorithmConfig::Sbm { k, .. } | AlgorithmConfig::Deep { k, .. }
                if *k == Some(0) =>
            {
                invalid("k must be positive")
            }
            AlgorithmConfig::Sbm { iters, burn_in, method, .. } if *method != SbmMethod::Em && iters <= burn_in => {
                invalid("iters must exceed burn_in")
            }
            AlgorithmConfig::Mcl(c) => c.validate(),
            AlgorithmConfig::Leiden { gamma, theta, .. } => {
                if !(gamma.is_finite() && *gamma >= 0.0) || !(*theta > 0.0) {
                    invalid("gamma must be non-negative and theta positive")
                } else {
                    Ok(())
                }
            }
            AlgorithmConfig::Deep { .. } => self.deep_hyper(0).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            AlgorithmConfig::Spectral { .. } => "spectral".into(),
            AlgorithmConfig::Sbm { .. } => "sbm".into(),
            AlgorithmConfig::Mcl(_) => "mcl".into(),
            AlgorithmConfig::Leiden { .. } => "leiden".into(),
            AlgorithmConfig::Deep { model, .. } => model.to_string(),
        }
    }

    /// MCL ignores the seed, so one run covers every seed.
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, AlgorithmConfig::Mcl(_))
    }

    /// Hyperparameters for a deep model run; `None` for other algorithms.
    pub fn deep_hyper(&self, seed: u64) -> Result<Option<DeepHyper>> {
        let AlgorithmConfig::Deep { model, overrides: o, .. } = self else {
            return Ok(None);
        };
        let mut h = DeepHyper::defaults(*model, seed);
        if let Some(e) = o.epochs {
            h.epochs = e;
        }
        if let Some(d) = o.latent_dim {
            h.hidden_dim = d;
        }
        if let Some(lr) = o.lr {
            h.lr = lr;
        }
        if let Some(a) = o.ppr_alpha {
            h.ppr_alpha = a;
        }
        if let Some(k) = o.disc_iters {
            h.disc_iters = k;
        }
        h.validate()?;
        Ok(Some(h))
    }
}

/// Everything one run produces beyond the report.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: MetricsReport,
    pub partition: Partition,
    /// Node embedding for the deep models.
    pub embedding: Option<DenseMatrix>,
    /// Chain trace for the SBM samplers.
    pub chain_trace: Option<Vec<TracePoint>>,
    pub elapsed_ms: f64,
}

fn resolve_k(k: Option<usize>, ds: &Dataset) -> usize {
    k.unwrap_or(ds.num_classes)
}

/// Runs one algorithm on one dataset and scores it. `wall_ms` in the report
/// stays empty; callers fill it when timing is wanted.
pub fn run_single(algo: &AlgorithmConfig, label: &str, ds: &Dataset, seed: u64) -> Result<RunOutcome> {
    algo.validate()?;
    let start = Instant::now();
    let mut embedding = None;
    let mut chain_trace = None;
    let mut degenerate = Vec::new();
    let partition = match algo {
        AlgorithmConfig::Spectral { k, normalize_rows } => {
            let mut cfg = SpectralConfig::new(resolve_k(*k, ds), seed);
            cfg.normalize_rows = *normalize_rows;
            spectral_clustering(&ds.graph, &cfg)?.partition
        }
        AlgorithmConfig::Sbm {
            k,
            method,
            iters,
            burn_in,
        } => {
            let k = resolve_k(*k, ds);
            match method {
                SbmMethod::Em => {
                    let r = sbm_em(&ds.graph, &EmConfig::new(k, seed))?;
                    Partition::new(r.params.memberships)?
                }
                SbmMethod::Mh | SbmMethod::DcsbmMh => {
                    let mut cfg = McmcConfig::new(k, *iters, *burn_in, seed);
                    cfg.thin = 0;
                    let r = if *method == SbmMethod::Mh {
                        sbm_mh(&ds.graph, &SbmPriors::uniform(k), &cfg)?
                    } else {
                        dcsbm_mh(&ds.graph, &cfg)?
                    };
                    chain_trace = Some(r.trace);
                    r.map_partition
                }
            }
        }
        AlgorithmConfig::Mcl(cfg) => {
            let r = mcl(&ds.graph, cfg)?;
            if !r.converged {
                degenerate.push(MCL_NOT_CONVERGED.to_string());
            }
            r.partition
        }
        AlgorithmConfig::Leiden { objective, gamma, theta } => {
            let obj = QualityObjective {
                kind: *objective,
                gamma: *gamma,
            };
            let mut cfg = LeidenConfig::new(obj, seed);
            cfg.theta = *theta;
            leiden(&ds.graph, &cfg)?.partition
        }
        AlgorithmConfig::Deep { k, .. } => {
            let hyper = algo.deep_hyper(seed)?.expect("deep config");
            let model = train(ds, &hyper)?;
            let (p, emb) = encode_and_cluster(&model, resolve_k(*k, ds), seed)?;
            embedding = Some(emb);
            p
        }
    };
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut report = evaluate(label, &ds.name, seed, &ds.graph, &ds.labels, &partition)?;
    report.degenerate.extend(degenerate);
    Ok(RunOutcome {
        report,
        partition,
        embedding,
        chain_trace,
        elapsed_ms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanAlgorithm {
    /// Row label in the reports.
    pub label: String,
    pub config: AlgorithmConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    pub datasets: Vec<String>,
    pub algorithms: Vec<PlanAlgorithm>,
    pub seeds: Vec<u64>,
    /// Columns shown in the text table.
    pub metrics: Vec<String>,
    /// Output prefix; `.csv`, `.runs.csv`, `.json` and `.txt` are appended.
    pub output: PathBuf,
    /// Concurrent runs; 0 uses every core.
    pub workers: usize,
    /// Record wall time in the reports (breaks byte-identical output).
    pub timing: bool,
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl BenchPlan {
    pub fn parse(text: &str) -> Result<Self> {
        let plan_err = |line: usize, msg: String| Error::Parse {
            path: "<plan>".into(),
            line,
            msg,
        };
        let mut plan: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut sections: Vec<(usize, String, BTreeMap<String, String>)> = Vec::new();
        let mut in_plan = false;
        let mut seen_plan = false;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let mut words = head.split_whitespace();
                match (words.next(), words.next(), words.next()) {
                    (Some("plan"), None, _) => {
                        if seen_plan {
                            return Err(plan_err(lineno, "duplicate [plan] section".into()));
                        }
                        seen_plan = true;
                        in_plan = true;
                    }
                    (Some("algorithm"), Some(label), None) => {
                        if sections.iter().any(|(_, l, _)| l == label) {
                            return Err(plan_err(lineno, format!("duplicate algorithm label `{label}`")));
                        }
                        sections.push((lineno, label.to_string(), BTreeMap::new()));
                        in_plan = false;
                    }
                    _ => return Err(plan_err(lineno, format!("unknown section header `[{head}]`"))),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(plan_err(lineno, "expected `key = value`".into()));
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            let target = if in_plan {
                plan.insert(key.clone(), (lineno, value)).is_some()
            } else if let Some((_, _, params)) = sections.last_mut() {
                params.insert(key.clone(), value).is_some()
            } else {
                return Err(plan_err(lineno, "setting outside any section".into()));
            };
            if target {
                return Err(plan_err(lineno, format!("duplicate key `{key}`")));
            }
        }

        let mut datasets = Vec::new();
        let mut seeds = vec![0];
        let mut metrics: Vec<String> = ["acc", "nmi", "ari", "modularity"].map(String::from).to_vec();
        let mut output = None;
        let mut workers = 0;
        let mut timing = false;
        for (key, (lineno, value)) in &plan {
            let bad = |what: &str| plan_err(*lineno, format!("bad {what} {value:?}"));
            match key.as_str() {
                "datasets" => datasets = split_list(value),
                "seeds" => {
                    seeds = split_list(value)
                        .iter()
                        .map(|s| s.parse().map_err(|_| bad("seed")))
                        .collect::<Result<_>>()?
                }
                "metrics" => metrics = split_list(value),
                "output" => output = Some(PathBuf::from(value)),
                "workers" => workers = value.parse().map_err(|_| bad("worker count"))?,
                "timing" => timing = value.parse().map_err(|_| bad("timing flag"))?,
                other => return Err(plan_err(*lineno, format!("unknown plan key `{other}`"))),
            }
        }
        let mut algorithms = Vec::new();
        for (lineno, label, mut params) in sections {
            let kind = params.remove("kind").unwrap_or_else(|| label.clone());
            let config = AlgorithmConfig::from_params(&kind, &params).map_err(|e| plan_err(lineno, e.to_string()))?;
            algorithms.push(PlanAlgorithm { label, config });
        }
        let plan = BenchPlan {
            datasets,
            algorithms,
            seeds,
            metrics,
            output: output.ok_or_else(|| plan_err(0, "missing `output` in [plan]".into()))?,
            workers,
            timing,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                msg,
            },
            other => other,
        })
    }

    /// Checks list contents; dataset resolution happens in [`run_bench`].
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() || self.metrics.is_empty() {
            return invalid("plan needs non-empty datasets, algorithms, seeds and metrics");
        }
        if let Some(m) = self.metrics.iter().find(|m| !METRIC_NAMES.contains(&m.as_str())) {
            return invalid(format!("unknown metric {m:?}"));
        }
        if self.metrics.iter().any(|m| m == "wall_ms") && !self.timing {
            return invalid("metric wall_ms needs `timing = true`");
        }
        for a in &self.algorithms {
            a.config.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Ok { report: MetricsReport },
    Failed { error: String },
}

/// One (algorithm, dataset, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub dataset: String,
    pub seed: u64,
    #[serde(flatten)]
    pub status: RunStatus,
}

/// Best-of-seeds row for one (algorithm, dataset).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub dataset: String,
    /// Best value per metric over the successful seeds; lower is better for
    /// conductance, higher for the rest. `wall_ms` is the mean.
    pub best: Option<MetricsReport>,
    pub runs: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResults {
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<RunRecord>,
}

impl BenchResults {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| matches!(r.status, RunStatus::Failed { .. })).count()
    }

    /// Best-of-seeds rows in the report schema; the seed column holds the
    /// number of successful seeds.
    pub fn summary_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for row in &self.summary {
            match &row.best {
                Some(best) => {
                    let mut r = best.clone();
                    r.seed = (row.runs - row.failed) as u64;
                    out.push_str(&r.to_csv_row());
                }
                None => out.push_str(&failed_row(&row.algorithm, &row.dataset, 0)),
            }
            out.push('\n');
        }
        out
    }

    /// Per-seed rows; failed runs have empty metric fields.
    pub fn runs_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for run in &self.runs {
            match &run.status {
                RunStatus::Ok { report } => out.push_str(&report.to_csv_row()),
                RunStatus::Failed { .. } => out.push_str(&failed_row(&run.algorithm, &run.dataset, run.seed)),
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results are serializable")
    }

    /// Aligned table of the summary rows over the chosen metric columns.
    pub fn text_table(&self, metrics: &[String]) -> String {
        let mut header: Vec<String> = vec!["algorithm".into(), "dataset".into()];
        header.extend(metrics.iter().cloned());
        header.push("runs".into());
        let mut rows = vec![header];
        for s in &self.summary {
            let mut row = vec![s.algorithm.clone(), s.dataset.clone()];
            for m in metrics {
                row.push(match s.best.as_ref().and_then(|b| b.get(m)) {
                    Some(v) if v.is_finite() => format!("{v:.4}"),
                    _ => "-".into(),
                });
            }
            row.push(if s.failed > 0 {
                format!("{}/{} ({} failed)", s.runs - s.failed, s.runs, s.failed)
            } else {
                s.runs.to_string()
            });
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| if c < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    /// Writes `<prefix>.csv`, `<prefix>.runs.csv`, `<prefix>.json` and
    /// `<prefix>.txt`.
    pub fn write(&self, prefix: &Path, metrics: &[String]) -> Result<Vec<PathBuf>> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let with = |ext: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        let files = [
            (with(".csv"), self.summary_csv()),
            (with(".runs.csv"), self.runs_csv()),
            (with(".json"), self.to_json()),
            (with(".txt"), self.text_table(metrics)),
        ];
        let mut written = Vec::new();
        for (path, body) in files {
            fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn failed_row(algorithm: &str, dataset: &str, seed: u64) -> String {
    let blank = MetricsReport {
        algorithm: algorithm.to_string(),
        dataset: dataset.to_string(),
        seed,
        acc: f64::NAN,
        acc_maj: f64::NAN,
        nmi: f64::NAN,
        ari: f64::NAN,
        modularity: f64::NAN,
        conductance_mean: f64::NAN,
        internal_density: f64::NAN,
        wall_ms: None,
        num_clusters: 0,
        degenerate: Vec::new(),
    };
    blank.to_csv_row()
}

fn best_of(reports: &[&MetricsReport]) -> Option<MetricsReport> {
    let first = (*reports.first()?).clone();
    let pick = |f: fn(&MetricsReport) -> f64, lower: bool| {
        reports
            .iter()
            .map(|r| f(r))
            .filter(|v| v.is_finite())
            .reduce(|a, b| if (b < a) == lower { b } else { a })
            .unwrap_or(f64::NAN)
    };
    let walls: Vec<f64> = reports.iter().filter_map(|r| r.wall_ms).collect();
    let mut degenerate: Vec<String> = reports.iter().flat_map(|r| r.degenerate.iter().cloned()).collect();
    degenerate.sort();
    degenerate.dedup();
    Some(MetricsReport {
        acc: pick(|r| r.acc, false),
        acc_maj: pick(|r| r.acc_maj, false),
        nmi: pick(|r| r.nmi, false),
        ari: pick(|r| r.ari, false),
        modularity: pick(|r| r.modularity, false),
        conductance_mean: pick(|r| r.conductance_mean, true),
        internal_density: pick(|r| r.internal_density, false),
        wall_ms: (!walls.is_empty()).then(|| walls.iter().sum::<f64>() / walls.len() as f64),
        num_clusters: first.num_clusters,
        degenerate,
        ..first
    })
}

/// Runs every (algorithm, dataset, seed) cell of the plan. Datasets and
/// settings are checked before anything runs; a failing cell is recorded and
/// the rest continue. Output order follows the plan, independent of
/// scheduling.
pub fn run_bench(plan: &BenchPlan) -> Result<BenchResults> {
    plan.validate()?;
    let datasets: Vec<Dataset> = plan.datasets.iter().map(|d| resolve(d)).collect::<Result<_>>()?;
    run_bench_on(plan, &datasets)
}

/// [`run_bench`] over already-loaded datasets, ignoring `plan.datasets`.
pub fn run_bench_on(plan: &BenchPlan, datasets: &[Dataset]) -> Result<BenchResults> {
    plan.validate()?;
    let mut cells = Vec::new();
    for a in &plan.algorithms {
        for ds in datasets {
            let seeds: &[u64] = if a.config.is_stochastic() { &plan.seeds } else { &plan.seeds[..1] };
            for &seed in seeds {
                cells.push((a, ds, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, ds, seed)| {
                let status = match run_single(&a.config, &a.label, ds, seed) {
                    Ok(mut out) => {
                        if plan.timing {
                            out.report.wall_ms = Some(out.elapsed_ms);
                        }
                        RunStatus::Ok { report: out.report }
                    }
                    Err(e) => RunStatus::Failed { error: e.to_string() },
                };
                RunRecord {
                    algorithm: a.label.clone(),
                    dataset: ds.name.clone(),
                    seed,
                    status,
                }
            })
            .collect()
    });

    let mut summary = Vec::new();
    for a in &plan.algorithms {
        for ds in datasets {
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.algorithm == a.label && r.dataset == ds.name)
                .collect();
            let ok: Vec<&MetricsReport> = group
                .iter()
                .filter_map(|r| match &r.status {
                    RunStatus::Ok { report } => Some(report),
                    RunStatus::Failed { .. } => None,
                })
                .collect();
            summary.push(SummaryRow {
                algorithm: a.label.clone(),
                dataset: ds.name.clone(),
                best: best_of(&ok),
                runs: group.len(),
                failed: group.len() - ok.len(),
            });
        }
    }
    Ok(BenchResults { summary, runs })
}
