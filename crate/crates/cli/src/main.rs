use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphclust::bench::{run_bench, run_single, AlgorithmConfig, BenchPlan, DeepOverrides, RunOutcome, SbmMethod};
use graphclust::deep::DeepModel;
use graphclust::ingest::{convert_loose, resolve, save_canonical, Dataset, BUNDLED, DATA_DIR_ENV};
use graphclust::leiden::ObjectiveKind;
use graphclust::mcl::MclConfig;
use graphclust::metrics::{MetricsReport, CSV_HEADER};
use graphclust::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "graphclust", version, about = "Graph clustering toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on one dataset and print its metric report.
    Run {
        #[command(subcommand)]
        algo: Algo,
    },
    /// Run a benchmark plan.
    Bench {
        #[arg(long)]
        plan: PathBuf,
        /// Record wall time per run (overrides the plan).
        #[arg(long)]
        timing: bool,
        /// Override the plan's output prefix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a deep model and write its node embeddings as CSV.
    ExportEmbeddings {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        deep: DeepArgs,
    },
    /// Convert loose edge/feature/label files to the canonical format.
    Convert {
        #[arg(long)]
        name: String,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the bundled datasets, or load and summarize the named ones.
    Datasets { names: Vec<String> },
}

#[derive(Args, Clone)]
struct Common {
    /// Dataset name (looked up under $GRAPHCLUST_DATA) or file path.
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fill the wall_ms column.
    #[arg(long)]
    timing: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Clone)]
struct RunCommon {
    #[command(flatten)]
    common: Common,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModelArg {
    Gae,
    Arga,
    Mvgrl,
}

impl From<ModelArg> for DeepModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Gae => DeepModel::Gae,
            ModelArg::Arga => DeepModel::Arga,
            ModelArg::Mvgrl => DeepModel::Mvgrl,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum MethodArg {
    Em,
    Mh,
    DcsbmMh,
}

#[derive(Copy, Clone, ValueEnum)]
enum ObjectiveArg {
    Modularity,
    Cpm,
}

#[derive(Args, Clone)]
struct DeepArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Number of k-means clusters (defaults to the class count).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ppr_alpha: Option<f64>,
    #[arg(long)]
    disc_iters: Option<usize>,
}

impl DeepArgs {
    fn config(&self, model: DeepModel) -> AlgorithmConfig {
        AlgorithmConfig::Deep {
            model,
            k: self.k,
            overrides: DeepOverrides {
                epochs: self.epochs,
                latent_dim: self.latent_dim,
                lr: self.lr,
                ppr_alpha: self.ppr_alpha,
                disc_iters: self.disc_iters,
            },
        }
    }
}

#[derive(Subcommand)]
enum Algo {
    Spectral {
        #[command(flatten)]
        common: RunCommon,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        normalize_rows: bool,
    },
    Sbm {
        #[command(flatten)]
        common: RunCommon,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = MethodArg::Em)]
        method: MethodArg,
        #[arg(long, default_value_t = 200_000)]
        iters: usize,
        #[arg(long, default_value_t = 50_000)]
        burn_in: usize,
        /// Write the chain trace (iteration, log-posterior, occupied blocks).
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    Mcl {
        #[command(flatten)]
        common: RunCommon,
        #[arg(long, default_value_t = 2)]
        expansion: u32,
        #[arg(long, default_value_t = 2.0)]
        inflation: f64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long)]
        no_self_loops: bool,
        #[arg(long, default_value_t = 1e-8)]
        prune: f64,
        #[arg(long, default_value_t = 100)]
        max_rounds: usize,
    },
    Leiden {
        #[command(flatten)]
        common: RunCommon,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Modularity)]
        objective: ObjectiveArg,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.01)]
        theta: f64,
    },
    Gae {
        #[command(flatten)]
        common: RunCommon,
        #[command(flatten)]
        deep: DeepArgs,
    },
    Arga {
        #[command(flatten)]
        common: RunCommon,
        #[command(flatten)]
        deep: DeepArgs,
    },
    Mvgrl {
        #[command(flatten)]
        common: RunCommon,
        #[command(flatten)]
        deep: DeepArgs,
    },
}

impl Algo {
    fn split(self) -> (RunCommon, AlgorithmConfig, Option<PathBuf>) {
        match self {
            Algo::Spectral { common, k, normalize_rows } => (common, AlgorithmConfig::Spectral { k, normalize_rows }, None),
            Algo::Sbm {
                common,
                k,
                method,
                iters,
                burn_in,
                trace_out,
            } => {
                let method = match method {
                    MethodArg::Em => SbmMethod::Em,
                    MethodArg::Mh => SbmMethod::Mh,
                    MethodArg::DcsbmMh => SbmMethod::DcsbmMh,
                };
                (
                    common,
                    AlgorithmConfig::Sbm {
                        k,
                        method,
                        iters,
                        burn_in,
                    },
                    trace_out,
                )
            }
            Algo::Mcl {
                common,
                expansion,
                inflation,
                eps,
                no_self_loops,
                prune,
                max_rounds,
            } => (
                common,
                AlgorithmConfig::Mcl(MclConfig {
                    expansion,
                    inflation,
                    epsilon: eps,
                    max_rounds,
                    prune_threshold: prune,
                    add_self_loops: !no_self_loops,
                }),
                None,
            ),
            Algo::Leiden {
                common,
                objective,
                gamma,
                theta,
            } => {
                let objective = match objective {
                    ObjectiveArg::Modularity => ObjectiveKind::Modularity,
                    ObjectiveArg::Cpm => ObjectiveKind::Cpm,
                };
                (common, AlgorithmConfig::Leiden { objective, gamma, theta }, None)
            }
            Algo::Gae { common, deep } => (common, deep.config(DeepModel::Gae), None),
            Algo::Arga { common, deep } => (common, deep.config(DeepModel::Arga), None),
            Algo::Mvgrl { common, deep } => (common, deep.config(DeepModel::Mvgrl), None),
        }
    }
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Format(_)
            | Error::DatasetNotFound { .. }
            | Error::NodeOutOfRange { .. } => Failure::Validation(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn render(report: &MetricsReport, format: Format) -> String {
    match format {
        Format::Csv => format!("{CSV_HEADER}\n{}\n", report.to_csv_row()),
        Format::Json => format!("{}\n", report.to_json()),
        Format::Text => {
            let fields: Vec<String> = report.to_csv_row().split(',').map(String::from).collect();
            let mut out = String::new();
            for (name, value) in CSV_HEADER.split(',').zip(&fields) {
                let value = if value.is_empty() { "-" } else { value };
                let _ = writeln!(out, "{name:<17} {value}");
            }
            let _ = writeln!(out, "{:<17} {}", "clusters", report.num_clusters);
            if !report.degenerate.is_empty() {
                let _ = writeln!(out, "{:<17} {}", "degenerate", report.degenerate.join(" "));
            }
            out
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(spec: &str) -> Result<Dataset, Failure> {
    let ds = resolve(spec)?;
    if ds.dangling_citations > 0 {
        eprintln!("note: {} citations with unknown endpoints were dropped", ds.dangling_citations);
    }
    Ok(ds)
}

fn run_once(common: &Common, algo: &AlgorithmConfig) -> Result<(Dataset, RunOutcome), Failure> {
    algo.validate()?;
    let ds = load(&common.dataset)?;
    let mut outcome = run_single(algo, &algo.name(), &ds, common.seed)?;
    if common.timing {
        outcome.report.wall_ms = Some(outcome.elapsed_ms);
    }
    Ok((ds, outcome))
}

fn cmd_run(algo: Algo) -> Result<(), Failure> {
    let (run, cfg, trace_out) = algo.split();
    let (_, outcome) = run_once(&run.common, &cfg)?;
    if let (Some(path), Some(trace)) = (trace_out, &outcome.chain_trace) {
        let mut csv = String::from("iteration,log_posterior,occupied_blocks\n");
        for t in trace {
            let _ = writeln!(csv, "{},{:.6},{}", t.iteration, t.log_posterior, t.occupied_blocks);
        }
        fs::write(path, csv)?;
    }
    for flag in &outcome.report.degenerate {
        eprintln!("note: degenerate {flag}");
    }
    emit(&render(&outcome.report, run.common.format), run.out.as_deref())
}

fn cmd_bench(plan: &Path, timing: bool, out: Option<PathBuf>) -> Result<bool, Failure> {
    let mut plan = BenchPlan::load(plan)?;
    plan.timing |= timing;
    if let Some(o) = out {
        plan.output = o;
    }
    let results = run_bench(&plan)?;
    let files = results.write(&plan.output, &plan.metrics)?;
    print!("{}", results.text_table(&plan.metrics));
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    for run in &results.runs {
        if let graphclust::bench::RunStatus::Failed { error } = &run.status {
            eprintln!("failed: {} on {} (seed {}): {error}", run.algorithm, run.dataset, run.seed);
        }
    }
    Ok(results.failures() == 0)
}

fn cmd_export(model: ModelArg, out: &Path, common: &Common, deep: &DeepArgs) -> Result<(), Failure> {
    let cfg = deep.config(model.into());
    let (ds, outcome) = run_once(common, &cfg)?;
    let emb = outcome.embedding.expect("deep runs produce embeddings");
    let mut csv = String::from("node_id");
    for j in 0..emb.cols() {
        let _ = write!(csv, ",dim_{j}");
    }
    csv.push_str(",label\n");
    for i in 0..emb.rows() {
        let _ = write!(csv, "{i}");
        for v in emb.row(i) {
            let _ = write!(csv, ",{v:.8}");
        }
        let _ = writeln!(csv, ",{}", ds.labels[i]);
    }
    fs::write(out, csv)?;
    eprintln!("wrote {} embeddings of width {} to {}", emb.rows(), emb.cols(), out.display());
    emit(&render(&outcome.report, common.format), None)
}

fn summary(ds: &Dataset) -> String {
    format!(
        "n={} m={} d={} k={} isolated={}",
        ds.num_nodes(),
        ds.graph.num_edges(),
        ds.num_features(),
        ds.num_classes,
        ds.graph.isolated_nodes().len()
    )
}

fn cmd_datasets(names: Vec<String>) -> Result<(), Failure> {
    if names.is_empty() {
        match std::env::var_os(DATA_DIR_ENV) {
            Some(d) => println!("{DATA_DIR_ENV}={}", PathBuf::from(d).display()),
            None => println!("{DATA_DIR_ENV} is unset"),
        }
        for name in BUNDLED {
            match resolve(name) {
                Ok(ds) => println!("{name:<10} ok       {}", summary(&ds)),
                Err(_) => println!("{name:<10} missing"),
            }
        }
        return Ok(());
    }
    let mut missing = Vec::new();
    for name in &names {
        match resolve(name) {
            Ok(ds) => println!("{name}: {}", summary(&ds)),
            Err(e) => {
                eprintln!("{name}: {e}");
                missing.push(name.as_str());
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("could not load {}", missing.join(", "))))
    }
}

fn cmd_convert(name: &str, edges: &Path, features: &Path, labels: &Path, out: &Path) -> Result<(), Failure> {
    let ds = convert_loose(name, edges, features, labels)?;
    save_canonical(&ds, out)?;
    println!("{name}: {}", summary(&ds));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run { algo } => cmd_run(algo).map(|_| true),
        Command::Bench { plan, timing, out } => cmd_bench(&plan, timing, out),
        Command::ExportEmbeddings {
            model,
            out,
            common,
            deep,
        } => cmd_export(model, &out, &common, &deep).map(|_| true),
        Command::Convert {
            name,
            edges,
            features,
            labels,
            out,
        } => cmd_convert(&name, &edges, &features, &labels, &out).map(|_| true),
        Command::Datasets { names } => cmd_datasets(names).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_PARTIAL),
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
