use std::fs;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cropchain_core::dataset::{load_dataset, stratified_split, SplitSpec};
use cropchain_core::models::{
    benchmark_suite, evaluate, fit, save_model, Algorithm, ClassifierSpec,
};
use cropchain_core::telemetry::{SimConfig, SimMode, Simulator};
use cropchain_core::Dataset;
use cropchain_ledger::{load_chain_unverified, render_fixed, Chain};

use crate::api::Service;
use crate::config::ServiceConfig;
use crate::http;
use crate::simulate::run_simulation;

pub const DEFAULT_DATA: &str = "data/crop_surrogate.csv";

#[derive(Debug, Parser)]
#[command(
    name = "cropchain",
    version,
    about = "Crop forecasting with a tamper-evident prediction ledger"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit and score every classifier on one split; write report files.
    Bench(BenchArgs),
    /// Fit one classifier and save it.
    Train(TrainArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Send simulated sensor messages to a running service.
    Simulate(SimulateArgs),
    /// Inspect a chain file offline.
    Chain {
        #[command(subcommand)]
        command: ChainCommand,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Crop dataset CSV.
    #[arg(long, env = "CROPCHAIN_DATA", default_value = DEFAULT_DATA)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    /// Split uniformly instead of per label.
    #[arg(long)]
    pub no_stratify: bool,
}

impl DataArgs {
    fn split(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.test_fraction,
            seed: self.seed,
            stratified: !self.no_stratify,
        }
    }

    fn load(&self) -> anyhow::Result<Dataset> {
        load_dataset(&self.data).with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated subset of DT,NB,SVM,LR,RF,KNN,NN.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<Algorithm>,
    /// Directory for report.json, report.txt and accuracy.csv.
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "RF")]
    pub model: Algorithm,
    /// Fit on every row instead of the training split.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML file with service settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
}

impl ServeArgs {
    pub fn resolve(&self) -> anyhow::Result<ServiceConfig> {
        let mut cfg = match &self.config {
            Some(p) => ServiceConfig::load(p)?,
            None => ServiceConfig::default(),
        };
        if let Some(v) = self.listen {
            cfg.listen = v;
        }
        if let Some(v) = &self.model {
            cfg.model = v.clone();
        }
        if let Some(v) = &self.chain {
            cfg.chain = v.clone();
        }
        if let Some(v) = &self.report {
            cfg.report = v.clone();
        }
        if let Some(v) = &self.static_dir {
            cfg.static_dir = v.clone();
        }
        if let Some(v) = self.k {
            cfg.default_k = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Replay,
    Synthetic,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Base URL of the service, e.g. http://127.0.0.1:8080
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value = "replay")]
    pub mode: ModeArg,
    #[arg(long, env = "CROPCHAIN_DATA", default_value = DEFAULT_DATA)]
    pub data: PathBuf,
    /// Messages per second across all devices.
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub devices: usize,
    /// Number of messages; defaults to one pass over the dataset.
    #[arg(long)]
    pub count: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum ChainCommand {
    /// Audit a chain file; exits nonzero on the first violation.
    Verify {
        #[arg(long, default_value = "chain.jsonl")]
        chain: PathBuf,
    },
    /// Print blocks newest first.
    Show {
        #[arg(long, default_value = "chain.jsonl")]
        chain: PathBuf,
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Bench(a) => bench(&a),
        Command::Train(a) => train(&a),
        Command::Serve(a) => serve(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Chain { command } => match command {
            ChainCommand::Verify { chain } => chain_verify(&chain),
            ChainCommand::Show { chain, limit } => chain_show(&chain, limit),
        },
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn bench(a: &BenchArgs) -> anyhow::Result<()> {
    let data = a.data.load()?;
    let algorithms = if a.models.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        a.models.clone()
    };
    let specs: Vec<ClassifierSpec> = algorithms
        .iter()
        .map(|&alg| ClassifierSpec::new(alg, a.data.seed))
        .collect();
    let report = benchmark_suite(&data, &a.data.split(), &specs)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_file(&a.out.join("report.json"), &report.to_json())?;
    let table = report.to_table();
    write_file(&a.out.join("report.txt"), &table)?;
    write_file(&a.out.join("accuracy.csv"), &report.chart_csv())?;
    print!("{table}");
    println!("wrote {}", a.out.display());
    Ok(())
}

fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let data = a.data.load()?;
    let spec = ClassifierSpec::new(a.model, a.data.seed);
    let (train, test) = if a.full {
        (data, None)
    } else {
        let (tr, te) = stratified_split(&data, &a.data.split())?;
        (tr, Some(te))
    };
    let model = fit(&spec, &train)?;
    let file = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_model(&model, BufWriter::new(file))?;
    match test {
        Some(test) => {
            let r = evaluate(&model, &test)?;
            println!(
                "{}: trained on {} rows in {:.3}s, held-out accuracy {:.2}%, saved to {}",
                a.model.display_name(),
                train.len(),
                model.training_time,
                r.accuracy,
                a.out.display()
            );
        }
        None => println!(
            "{}: trained on all {} rows in {:.3}s, saved to {}",
            a.model.display_name(),
            train.len(),
            model.training_time,
            a.out.display()
        ),
    }
    Ok(())
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

fn serve(a: &ServeArgs) -> anyhow::Result<()> {
    let cfg = a.resolve()?;
    let svc = Arc::new(Service::open(&cfg)?);
    let static_dir = cfg.static_dir.is_dir().then_some(cfg.static_dir.as_path());
    if static_dir.is_none() {
        tracing::info!(
            "no static assets at {}; serving the API only",
            cfg.static_dir.display()
        );
    }
    let app = http::router(svc, static_dir);
    runtime()?.block_on(http::serve(
        app,
        cfg.listen,
        |addr| println!("listening on http://{addr}"),
        async {
            let _ = tokio::signal::ctrl_c().await;
        },
    ))
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let data: Dataset =
        load_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let cfg = SimConfig {
        mode: match a.mode {
            ModeArg::Replay => SimMode::Replay,
            ModeArg::Synthetic => SimMode::Synthetic,
        },
        rate: a.rate,
        seed: a.seed,
        devices: a.devices,
        ..SimConfig::default()
    };
    let sim = Simulator::new(cfg, &data)?;
    let steps = a.count.unwrap_or(data.len() as u64);
    let summary = runtime()?.block_on(run_simulation(&sim, &a.target, steps))?;
    println!(
        "sent {}, accepted {}, rejected {}, failed {}",
        summary.sent, summary.accepted, summary.rejected, summary.failed
    );
    if summary.failed > 0 {
        bail!("{} messages could not be delivered", summary.failed);
    }
    Ok(())
}

fn open_chain(path: &Path) -> anyhow::Result<Chain> {
    load_chain_unverified(path).with_context(|| format!("reading {}", path.display()))
}

fn chain_verify(path: &Path) -> anyhow::Result<()> {
    let chain = open_chain(path)?;
    match chain.verify_chain() {
        Ok(()) => {
            println!(
                "ok: {} blocks, {} predictions",
                chain.blocks().len(),
                chain.prediction_count()
            );
            Ok(())
        }
        Err(v) => bail!("tampered: {v}"),
    }
}

fn chain_show(path: &Path, limit: usize) -> anyhow::Result<()> {
    let chain = open_chain(path)?;
    println!(
        "{:>7}  {:>10}  {:>8}  {:>3}  {:<66}  record",
        "block", "timestamp", "gas", "txs", "hash"
    );
    let predictions = chain.contract_state();
    for b in chain.blocks().iter().rev().take(limit) {
        let record = match b
            .number
            .checked_sub(1)
            .and_then(|i| predictions.get(i as usize))
        {
            Some(r) => format!(
                "{} ph {} rain {}",
                r.crop_name,
                render_fixed(r.ph),
                render_fixed(r.rain)
            ),
            None => String::new(),
        };
        println!(
            "{:>7}  {:>10}  {:>8}  {:>3}  {:<66}  {}",
            b.number,
            b.timestamp,
            b.gas_used,
            b.transactions.len(),
            b.hash.to_string(),
            record
        );
    }
    Ok(())
}
