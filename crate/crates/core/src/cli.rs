//! The `bitwise` command line.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 data or file error,
//! 4 capacity or payload error, 5 numeric failure. Errors are written to
//! stderr as one JSON object.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::{analyze, write_analysis_csv, AnalysisPlan, PerturbMode};
use crate::bits::{chance_sparsity, BitMask};
use crate::data::{load_cifar10, load_mnist, Dataset, Split};
use crate::engine::Architecture;
use crate::error::{Error, Result};
use crate::model_io::{self, BitEncoding};
use crate::stego;
use crate::trainer::{
    argmax_agreement, evaluate, fold, sparsity, sweep_bit_depths, sweep_masks,
    sweep_trainable_prefix, train, train_run, weight_histogram, write_metrics_csv, DatasetKind,
    MetricsRecord, SweepResult, TrainConfig, TrainData, TrainOutcome,
};

#[derive(Debug, Parser)]
#[command(name = "bitwise", version, about = "Train and inspect networks with bit-plane weights")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Runs trained concurrently.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    /// f32 virtual bits
    Full,
    /// one bit per plane
    Packed,
}

impl From<Encoding> for BitEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Full => BitEncoding::VirtualBits,
            Encoding::Packed => BitEncoding::Packed,
        }
    }
}

/// Config file plus flags that override its keys.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_parser = parse_dataset)]
    pub dataset: Option<DatasetKind>,
    /// lenet300, conv6 or mlp:a-b-c
    #[arg(long)]
    pub arch: Option<String>,
    /// Train plain float weights.
    #[arg(long)]
    pub float: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub milestones: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub train_limit: Option<usize>,
    #[arg(long)]
    pub test_limit: Option<usize>,
    /// Print per-epoch progress to stderr.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_dataset, default_value = "mnist")]
    pub dataset: DatasetKind,
    /// Evaluate on the first N test samples only.
    #[arg(long)]
    pub test_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepOut {
    /// Per-run CSV.
    #[arg(long)]
    pub runs_out: Option<PathBuf>,
    /// Summary JSON.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration for every repeat.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        k: Option<usize>,
        /// Trainable planes, sign first (e.g. 11100000).
        #[arg(long)]
        mask: Option<String>,
        /// Start every repeat from this model instead of a fresh init.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Best network of the best run.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        encoding: Encoding,
    },
    /// Test accuracy and sparsity of a model file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// All-trainable runs at several bit depths.
    SweepBits {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[command(flatten)]
        out: SweepOut,
    },
    /// One setting per trainability mask.
    SweepMasks {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated masks, or "all" for every non-zero mask of --k.
        #[arg(long)]
        masks: String,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        out: SweepOut,
    },
    /// Freeze the p lowest magnitude bits for each p.
    SweepPrefix {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        k: usize,
        /// List or inclusive range, e.g. 0,2,4 or 0..6. Defaults to 0..k-1.
        #[arg(long)]
        p: Option<String>,
        #[command(flatten)]
        out: SweepOut,
    },
    /// Fold a quantized model into integer weights and one input scale.
    Fold {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Report argmax agreement on this dataset's test split.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_dataset, default_value = "mnist")]
        dataset: DatasetKind,
        #[arg(long)]
        test_limit: Option<usize>,
    },
    /// Histogram of one weight layer.
    Hist {
        #[arg(long)]
        model: PathBuf,
        /// Index among weight layers.
        #[arg(long, default_value_t = 0)]
        layer: usize,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// lo,hi
        #[arg(long, value_delimiter = ',', num_args = 2)]
        range: Option<Vec<f64>>,
    },
    /// Perturb low magnitude bits of a float model and re-evaluate.
    AnalyzeBits {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        p_max: u32,
        #[arg(long, value_delimiter = ',', default_value = "zero,one,random")]
        modes: Vec<PerturbMode>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Perturb only this weight layer.
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a payload into the untrainable planes.
    Embed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        payload: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        encoding: Encoding,
    },
    /// Read a payload back.
    Extract {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chance of an all-zero magnitude at bit depth k.
    Chance {
        #[arg(long)]
        k: usize,
    },
}

fn parse_dataset(s: &str) -> std::result::Result<DatasetKind, String> {
    match s {
        "mnist" => Ok(DatasetKind::Mnist),
        "cifar10" => Ok(DatasetKind::Cifar10),
        _ => Err(format!("unknown dataset {s:?} (mnist or cifar10)")),
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::ShapeMismatch { .. } | Error::Unsupported(_) => 2,
        Error::Data(_) | Error::Format(_) | Error::Io(_) => 3,
        Error::Capacity { .. } | Error::NoCarrier | Error::CorruptPayload(_) => 4,
        Error::Numeric(_) => 5,
    }
}

fn error_json(kind: &str, message: &str, code: i32) -> String {
    json!({ "error": kind, "message": message, "exit_code": code }).to_string()
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim(), 2));
            return 2;
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match execute(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("{}", error_json(e.kind(), &e.to_string(), code));
            code
        }
    }
}

fn data_error(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        other => other,
    }
}

fn resolve_config(args: &ConfigArgs, jobs: Option<usize>) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(d) = &args.data {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(d) = args.dataset {
        cfg.dataset = d;
    }
    if let Some(a) = &args.arch {
        cfg.architecture = a.parse::<Architecture>().map_err(|e| Error::Config(e.to_string()))?;
    }
    if args.float {
        cfg.quantized = false;
    }
    macro_rules! set {
        ($($field:ident <- $flag:expr),*) => { $( if let Some(v) = $flag.clone() { cfg.$field = v; } )* };
    }
    set!(epochs <- args.epochs, batch_size <- args.batch_size, base_lr <- args.lr,
         milestones <- args.milestones, seed <- args.seed, repeats <- args.repeats);
    if args.train_limit.is_some() {
        cfg.train_limit = args.train_limit;
    }
    if args.test_limit.is_some() {
        cfg.test_limit = args.test_limit;
    }
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    Ok(cfg)
}

fn load_data(cfg: &TrainConfig) -> Result<TrainData> {
    let dir = cfg.data_dir.clone().unwrap_or_default();
    TrainData::load(cfg).map_err(|e| data_error(&dir, e))
}

fn load_test(args: &DataArgs) -> Result<Dataset> {
    let test = match args.dataset {
        DatasetKind::Mnist => load_mnist(&args.data, Split::Test),
        DatasetKind::Cifar10 => load_cifar10(&args.data, Split::Test),
    }
    .map_err(|e| data_error(&args.data, e))?;
    Ok(args.test_limit.map_or(test.clone(), |n| test.truncated(n)))
}

fn progress(verbose: bool) -> impl Fn(&MetricsRecord) + Sync {
    move |m: &MetricsRecord| {
        if verbose {
            eprintln!(
                "run {} epoch {} loss {:.4} train {:.4} test {:.4} sparsity {:.4}",
                m.run, m.epoch, m.train_loss, m.train_acc, m.test_acc, m.sparsity
            );
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<crate::engine::Network> {
    model_io::from_bytes(&read_file(path)?)
}

fn parse_p_list(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad --p value {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}

fn parse_masks(s: &str, k: usize) -> Result<Vec<BitMask>> {
    if s == "all" {
        if k > 16 {
            return Err(Error::Config(format!("--masks all enumerates 2^{k} masks; use k <= 16")));
        }
        return Ok(BitMask::enumerate_nonzero(k));
    }
    s.split(',')
        .map(|m| m.trim().parse::<BitMask>().map_err(|e| Error::Config(e.to_string())))
        .collect()
}

fn emit_sweep(cli: &Cli, out: &mut dyn Write, result: &SweepResult, files: &SweepOut) -> Result<()> {
    if let Some(p) = &files.runs_out {
        let mut buf = Vec::new();
        result.write_runs_csv(&mut buf)?;
        write_file(p, &buf)?;
    }
    if let Some(p) = &files.summary_out {
        write_file(p, result.summary_json().as_bytes())?;
    }
    if cli.json {
        writeln!(out, "{}", serde_json::to_string(&result.summary).expect("serializes"))?;
    } else {
        write!(out, "{}", result.table())?;
    }
    Ok(())
}

fn train_command(
    cli: &Cli,
    out: &mut dyn Write,
    cfg: TrainConfig,
    init: Option<&Path>,
    verbose: bool,
) -> Result<TrainOutcome> {
    let data = load_data(&cfg)?;
    let observer = progress(verbose);
    let outcome = match init {
        None => train(&cfg, &data, &observer)?,
        Some(path) => {
            let net = load_model(path)?;
            let runs = (0..cfg.repeats)
                .map(|r| train_run(&cfg, r, &data, Some(net.clone()), &mut |m| observer(m)))
                .collect::<Result<Vec<_>>>()?;
            TrainOutcome { runs }
        }
    };
    if cli.json {
        let runs: Vec<_> = outcome
            .runs
            .iter()
            .map(|r| {
                json!({
                    "run": r.run, "seed": r.seed, "best_epoch": r.best_epoch,
                    "best_test_acc": r.best_test_acc, "best_sparsity": r.best_sparsity,
                    "final_test_acc": r.final_test_acc(), "final_sparsity": r.final_sparsity(),
                })
            })
            .collect();
        writeln!(out, "{}", json!({ "runs": runs }))?;
    } else {
        for r in &outcome.runs {
            writeln!(
                out,
                "run {} seed {}: best test acc {:.4} at epoch {} (sparsity {:.4}), final {:.4} (sparsity {:.4})",
                r.run, r.seed, r.best_test_acc, r.best_epoch, r.best_sparsity,
                r.final_test_acc(), r.final_sparsity()
            )?;
        }
    }
    Ok(outcome)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Train { config, k, mask, init, out: model_out, metrics, encoding } => {
            let mut cfg = resolve_config(config, cli.jobs)?;
            if let Some(m) = mask {
                let m: BitMask = m.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
                cfg.k = m.len();
                cfg.mask = Some(m);
            }
            if let Some(k) = k {
                if cfg.mask.as_ref().is_some_and(|m| m.len() != *k) && mask.is_none() {
                    cfg.mask = None;
                }
                cfg.k = *k;
            }
            if let Some(p) = model_out {
                cfg.model_out = Some(p.clone());
            }
            if let Some(p) = metrics {
                cfg.metrics_out = Some(p.clone());
            }
            cfg.validate()?;
            let outcome = train_command(cli, out, cfg.clone(), init.as_deref(), config.verbose)?;
            if let Some(p) = &cfg.metrics_out {
                let mut buf = Vec::new();
                write_metrics_csv(&mut buf, outcome.metrics())?;
                write_file(p, &buf)?;
            }
            if let Some(p) = &cfg.model_out {
                let bytes = model_io::to_bytes(&outcome.best_run().best, (*encoding).into())?;
                write_file(p, &bytes)?;
            }
        }
        Command::Eval { model, data } => {
            let bytes = read_file(model)?;
            let test = load_test(data)?;
            if bytes.starts_with(model_io::INTEGER_MAGIC) {
                let net = model_io::integer_from_bytes(&bytes)?;
                let pred = net.predictions(&test)?;
                let correct = pred.iter().zip(test.labels()).filter(|(p, l)| **p == **l as usize).count();
                let acc = correct as f64 / test.len().max(1) as f64;
                if cli.json {
                    writeln!(out, "{}", json!({ "test_acc": acc, "samples": test.len() }))?;
                } else {
                    writeln!(out, "test accuracy {acc:.4} on {} samples", test.len())?;
                }
            } else {
                let net = model_io::from_bytes(&bytes)?;
                let acc = evaluate(&net, &test)?;
                let sp = sparsity(&net);
                if cli.json {
                    writeln!(out, "{}", json!({ "test_acc": acc, "sparsity": sp, "samples": test.len() }))?;
                } else {
                    writeln!(out, "test accuracy {acc:.4} on {} samples, sparsity {sp:.6}", test.len())?;
                }
            }
        }
        Command::SweepBits { config, k, out: files } => {
            let cfg = resolve_config(config, cli.jobs)?;
            let data = load_data(&cfg)?;
            let p = progress(config.verbose);
            let r = sweep_bit_depths(&cfg, k, &data, &|_, m| p(m))?;
            emit_sweep(cli, out, &r, files)?;
        }
        Command::SweepMasks { config, masks, k, out: files } => {
            let cfg = resolve_config(config, cli.jobs)?;
            let masks = parse_masks(masks, k.unwrap_or(cfg.k))?;
            let data = load_data(&cfg)?;
            let p = progress(config.verbose);
            let r = sweep_masks(&cfg, &masks, &data, &|_, m| p(m))?;
            emit_sweep(cli, out, &r, files)?;
        }
        Command::SweepPrefix { config, k, p: plist, out: files } => {
            let cfg = resolve_config(config, cli.jobs)?;
            let frozen = match plist {
                Some(s) => parse_p_list(s)?,
                None => (0..*k).collect(),
            };
            let data = load_data(&cfg)?;
            let p = progress(config.verbose);
            let r = sweep_trainable_prefix(&cfg, *k, &frozen, &data, &|_, m| p(m))
                .map_err(|e| match e {
                    Error::InvalidInput(m) => Error::Config(m),
                    other => other,
                })?;
            emit_sweep(cli, out, &r, files)?;
        }
        Command::Fold { model, out: path, data, dataset, test_limit } => {
            let net = load_model(model)?;
            let folded = fold(&net)?;
            write_file(path, &model_io::integer_to_bytes(&folded)?)?;
            let agreement = match data {
                Some(dir) => {
                    let args = DataArgs { data: dir.clone(), dataset: *dataset, test_limit: *test_limit };
                    Some(argmax_agreement(&net, &folded, &load_test(&args)?)?)
                }
                None => None,
            };
            if cli.json {
                writeln!(out, "{}", json!({ "input_scale": folded.input_scale(), "agreement": agreement }))?;
            } else {
                writeln!(out, "input scale {:e}", folded.input_scale())?;
                if let Some(a) = agreement {
                    writeln!(out, "argmax agreement {a:.6}")?;
                }
            }
        }
        Command::Hist { model, layer, bins, range } => {
            let net = load_model(model)?;
            let range = range.as_ref().map(|r| (r[0], r[1]));
            let h = weight_histogram(&net, *layer, *bins, range)?;
            if cli.json {
                writeln!(out, "{}", serde_json::to_string(&h).expect("serializes"))?;
            } else {
                write!(out, "{}", h.to_csv())?;
            }
        }
        Command::AnalyzeBits { model, data, p_max, modes, seeds, layer, out: path } => {
            let net = load_model(model)?;
            let test = load_test(data)?;
            let mut plan = AnalysisPlan::up_to(*p_max, modes, seeds);
            plan.layer = *layer;
            let rows = analyze(&net, &test, &plan)?;
            let mut csv = Vec::new();
            write_analysis_csv(&mut csv, &rows)?;
            if let Some(p) = path {
                write_file(p, &csv)?;
            }
            if cli.json {
                writeln!(out, "{}", serde_json::to_string(&rows).expect("serializes"))?;
            } else {
                out.write_all(&csv)?;
            }
        }
        Command::Embed { model, payload, out: path, encoding } => {
            let mut net = load_model(model)?;
            let bytes = read_file(payload)?;
            stego::embed(&mut net, &bytes)?;
            write_file(path, &model_io::to_bytes(&net, (*encoding).into())?)?;
            let cap = stego::capacity_bytes(&net);
            if cli.json {
                writeln!(out, "{}", json!({ "payload_bytes": bytes.len(), "capacity_bytes": cap }))?;
            } else {
                writeln!(out, "embedded {} bytes ({cap} bytes capacity)", bytes.len())?;
            }
        }
        Command::Extract { model, out: path } => {
            let net = load_model(model)?;
            let payload = stego::extract(&net)?;
            write_file(path, &payload)?;
            if cli.json {
                writeln!(out, "{}", json!({ "payload_bytes": payload.len() }))?;
            } else {
                writeln!(out, "extracted {} bytes", payload.len())?;
            }
        }
        Command::Chance { k } => {
            crate::bits::check_depth(*k).map_err(|e| Error::Config(e.to_string()))?;
            let c = chance_sparsity(*k);
            if cli.json {
                writeln!(out, "{}", json!({ "k": k, "chance_sparsity": c }))?;
            } else {
                writeln!(out, "{c:.9e}")?;
            }
        }
    }
    Ok(())
}
