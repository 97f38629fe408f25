//! `imac`: train, map, infer, snr and sweep from the command line.
//!
//! CSV goes to stdout and diagnostics to stderr (`RUST_LOG` controls the
//! level, default `info`). Exit codes: 0 success, 2 usage or input error,
//! 3 numerical failure. Every random choice derives from `--seed`, which
//! defaults to 0.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use imac_core::analysis::{
    measure_snr, normalize_snr, run_sweep, sweep_csv, Normalization, SweepPoint, SweepRow, SweepSpec,
};
use imac_core::io::{load_mnist, resolve_data_dir, Config, Dataset, Split, DATA_DIR_ENV};
use imac_core::pipeline::{deploy, evaluate};
use imac_core::train::{train_with_progress, TrainSpec};
use imac_core::{plan_network, BinarizedModel, BitcellType, Error, FabricConfig, TechnologyProfile};

#[derive(Parser)]
#[command(name = "imac", version, about = "Partitioned in-memory analog computing simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// TOML config; explicit flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a binarized network and write its weight file.
    Train(TrainArgs),
    /// Print the partition plan of a network.
    Map(MapArgs),
    /// Classify test images on the simulated fabric.
    Infer(InferArgs),
    /// SNR of a single fabric.
    Snr(SnrArgs),
    /// SNR, accuracy and power over sizes, technologies and bitcells.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Directory with the MNIST IDX files (falls back to IMAC_MNIST_DIR).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f32,
    #[arg(long, default_value_t = 0.0)]
    momentum: f32,
    /// Train on only the first N images.
    #[arg(long)]
    train_limit: Option<usize>,
}

#[derive(Args)]
struct FabricArgs {
    /// Subarray shape, rows x physical columns.
    #[arg(long, value_name = "NxM", value_parser = parse_size)]
    subarray: Option<(usize, usize)>,
    #[arg(long = "tech")]
    tech: Option<String>,
    #[arg(long, value_parser = parse_bitcell)]
    bitcell: Option<BitcellType>,
    #[arg(long)]
    no_parasitics: bool,
    /// Disable neuron noise.
    #[arg(long)]
    no_noise: bool,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, value_name = "NxM", value_parser = parse_size)]
    subarray: Option<(usize, usize)>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    fabric: FabricArgs,
    #[arg(long, default_value_t = 1000)]
    images: usize,
}

#[derive(Args)]
struct SnrArgs {
    #[command(flatten)]
    fabric: FabricArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Global,
    PerTech,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_size,
          default_value = "32x32,64x64,128x128,256x256")]
    sizes: Vec<(usize, usize)>,
    #[arg(long, value_delimiter = ',', default_value = "MRAM,CBRAM,PCM")]
    techs: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_bitcell, default_value = "0t1r,1t1r")]
    bitcells: Vec<BitcellType>,
    #[arg(long)]
    no_parasitics: bool,
    #[arg(long)]
    no_noise: bool,
    /// Images per point; 0 skips inference.
    #[arg(long, default_value_t = 0)]
    images: usize,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "global")]
    normalization: NormArg,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (n, m) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NxM, got `{s}`"))?;
    let n = n.trim().parse().map_err(|_| format!("bad row count in `{s}`"))?;
    let m = m.trim().parse().map_err(|_| format!("bad column count in `{s}`"))?;
    Ok((n, m))
}

fn parse_bitcell(s: &str) -> Result<BitcellType, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failures carry their exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    info!(
        "seed {} jobs {} config {}",
        cli.common.seed,
        cli.common.jobs,
        cli.common.config.as_deref().map_or("none".into(), |p| p.display().to_string())
    );
    match cli.command {
        Command::Train(a) => cmd_train(&a, &cli.common),
        Command::Map(a) => cmd_map(&a, &config),
        Command::Infer(a) => cmd_infer(&a, &cli.common, &config),
        Command::Snr(a) => cmd_snr(&a, &config),
        Command::Sweep(a) => cmd_sweep(&a, &cli.common, &config),
    }
}

fn data_dir(explicit: Option<&Path>) -> Result<PathBuf, Failure> {
    let dir = resolve_data_dir(explicit)
        .ok_or_else(|| usage(format!("no data directory: pass --data or set {DATA_DIR_ENV}")))?;
    if !dir.is_dir() {
        return Err(usage(format!("data directory {} does not exist", dir.display())));
    }
    Ok(dir)
}

fn load_split(explicit: Option<&Path>, split: Split) -> Result<Dataset, Failure> {
    let dir = data_dir(explicit)?;
    let ds = load_mnist(&dir, split)?;
    info!("loaded {} {} images from {}", ds.len(), split, dir.display());
    Ok(ds)
}

fn technology(config: &Config, name: &str, no_noise: bool) -> Result<TechnologyProfile, Failure> {
    let mut tech = config.technology(name)?;
    if no_noise {
        tech.sigma_noise = 0.0;
    }
    Ok(tech)
}

/// Flags over config file over defaults (32x32, MRAM, 1T1R, parasitics on).
fn resolve_fabric(args: &FabricArgs, config: &Config) -> Result<FabricConfig, Failure> {
    let section = &config.fabric;
    let (rows, cols) = args
        .subarray
        .unwrap_or((section.rows.unwrap_or(32), section.cols.unwrap_or(32)));
    let name = args
        .tech
        .clone()
        .or_else(|| section.technology.clone())
        .unwrap_or_else(|| "MRAM".into());
    let bitcell = args.bitcell.or(section.bitcell).unwrap_or(BitcellType::OneT1R);
    let parasitics = !args.no_parasitics && section.parasitics.unwrap_or(true);
    let mut fabric = FabricConfig::new(rows, cols, technology(config, &name, args.no_noise)?, bitcell, parasitics)?;
    fabric.r_source = section.r_source.unwrap_or(0.0);
    fabric.solver = config.solver;
    fabric.validate()?;
    info!("fabric {fabric:?}");
    Ok(fabric)
}

fn write_stdout(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn cmd_train(a: &TrainArgs, common: &Common) -> Result<(), Failure> {
    let train = load_split(a.data.as_deref(), Split::Train)?;
    let test = load_split(a.data.as_deref(), Split::Test)?;
    let spec = TrainSpec {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        momentum: a.momentum,
        seed: common.seed,
        train_limit: a.train_limit,
        ..TrainSpec::default()
    };
    info!("train {spec:?}");
    let mut csv = String::from("epoch,mean_loss,test_accuracy\n");
    let outcome = train_with_progress(&train, Some(&test), &spec, |s| {
        let acc = s.test_accuracy.unwrap_or(f64::NAN);
        info!("epoch {} loss {:.4} test accuracy {:.4}", s.epoch, s.mean_loss, acc);
        csv.push_str(&format!("{},{:.6},{:.6}\n", s.epoch, s.mean_loss, acc));
    })?;
    outcome.model.save(&a.out)?;
    let acc = outcome.test_accuracy.unwrap_or(f64::NAN);
    info!("wrote {}", a.out.display());
    write_stdout(&csv)?;
    eprintln!("digital test accuracy {acc:.4}");
    Ok(())
}

fn cmd_map(a: &MapArgs, config: &Config) -> Result<(), Failure> {
    let model = BinarizedModel::load(&a.weights)?;
    let (rows, cols) = a
        .subarray
        .unwrap_or((config.fabric.rows.unwrap_or(32), config.fabric.cols.unwrap_or(32)));
    let fabric = FabricConfig::new(rows, cols, TechnologyProfile::mram(), BitcellType::OneT1R, true)?;
    let plans = plan_network(&model, &fabric)?;
    write_stdout(&imac_core::partition::format_plans(&plans))
}

fn cmd_infer(a: &InferArgs, common: &Common, config: &Config) -> Result<(), Failure> {
    let model = BinarizedModel::load(&a.weights)?;
    let fabric = resolve_fabric(&a.fabric, config)?;
    let test = load_split(a.data.as_deref(), Split::Test)?;
    info!("images {}", a.images);
    let net = deploy(&model, &fabric)?;
    let report = evaluate(&net, &model, &test, a.images, common.seed, common.jobs)?;
    write_stdout(&report.to_csv()?)?;
    eprintln!("{report}");
    Ok(())
}

/// One sweep row, normalized against the same technology and bitcell at
/// 32x32 without parasitics.
fn cmd_snr(a: &SnrArgs, config: &Config) -> Result<(), Failure> {
    let fabric = resolve_fabric(&a.fabric, config)?;
    let snr = measure_snr(&fabric)?;
    let mut base = FabricConfig::new(32, 32, fabric.technology.clone(), fabric.bitcell, false)?;
    base.r_source = fabric.r_source;
    let snr = normalize_snr(&[snr], &measure_snr(&base)?)?.remove(0);
    eprintln!("{snr}");
    let row = SweepRow {
        size: (fabric.rows, fabric.cols),
        technology: fabric.technology.name.clone(),
        bitcell: fabric.bitcell,
        parasitics: fabric.parasitics_enabled,
        outcome: Ok(SweepPoint { report: None, snr }),
    };
    write_stdout(&sweep_csv(&[row])?)
}

fn cmd_sweep(a: &SweepArgs, common: &Common, config: &Config) -> Result<(), Failure> {
    let technologies = a
        .techs
        .iter()
        .map(|t| technology(config, t, a.no_noise))
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = SweepSpec::new(a.sizes.clone(), technologies, a.bitcells.clone());
    spec.parasitics = !a.no_parasitics && config.fabric.parasitics.unwrap_or(true);
    spec.images = a.images;
    spec.seed = common.seed;
    spec.jobs = common.jobs;
    spec.normalization = match a.normalization {
        NormArg::Global => Normalization::Global,
        NormArg::PerTech => Normalization::PerTechnology,
    };
    let mut template = FabricConfig::new(32, 32, TechnologyProfile::mram(), BitcellType::OneT1R, spec.parasitics)?;
    template.r_source = config.fabric.r_source.unwrap_or(0.0);
    template.solver = config.solver;
    spec.fabric_template = Some(template);
    info!("sweep {spec:?}");

    let (model, dataset) = if a.images > 0 {
        let w = a
            .weights
            .as_ref()
            .ok_or_else(|| usage("--images needs --weights"))?;
        (Some(BinarizedModel::load(w)?), Some(load_split(a.data.as_deref(), Split::Test)?))
    } else {
        (None, None)
    };
    let rows = run_sweep(&spec, model.as_ref(), dataset.as_ref())?;
    for r in &rows {
        if let Err(msg) = &r.outcome {
            log::warn!("{}x{} {} {}: {msg}", r.size.0, r.size.1, r.technology, r.bitcell);
        }
    }
    write_stdout(&sweep_csv(&rows)?)
}
