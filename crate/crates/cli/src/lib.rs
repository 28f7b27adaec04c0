//! Command-line front end: `train`, `eval` and `table1`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dcrelu::baseline::{train_baseline, BaselineConfig, Optimizer};
use dcrelu::dataset::{load_delimited, sniff_delimiter};
use dcrelu::dca::{run_dca, DcaConfig, DcaStatus};
use dcrelu::model::{loss, read_weights, write_weights};
use dcrelu::{Activation, Dataset, GridSpec, Norm, Synthetic, Weights};

pub mod table;

#[derive(Debug, Parser)]
#[command(
    name = "dcrelu",
    version,
    about = "Train pair-form ReLU networks by DCA or Adam/Adamax"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network and write its weights, trace and summary.
    Train(TrainArgs),
    /// Print the loss of a saved weights file on a dataset.
    Eval(EvalArgs),
    /// Run the loss x activation x pairs grid for both engines.
    Table1(TableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Dca,
    Adam,
    Adamax,
}

impl Engine {
    pub fn label(self) -> &'static str {
        match self {
            Engine::Dca => "dca",
            Engine::Adam => "adam",
            Engine::Adamax => "adamax",
        }
    }
}

/// `synthetic:phi1`, `synthetic:phi2` or a delimited file (label first).
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(Synthetic),
    File(PathBuf),
}

impl FromStr for DataSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.strip_prefix("synthetic:") {
            Some("phi1") => Ok(DataSource::Synthetic(Synthetic::Phi1)),
            Some("phi2") => Ok(DataSource::Synthetic(Synthetic::Phi2)),
            Some(other) => Err(format!("unknown synthetic function {other:?}")),
            None if s.is_empty() => Err("empty data source".into()),
            None => Ok(DataSource::File(PathBuf::from(s))),
        }
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Synthetic(s) => write!(f, "synthetic:{}", s.name()),
            DataSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl DataSource {
    pub fn load(&self, augment_bias: bool) -> anyhow::Result<Dataset> {
        let data = match self {
            DataSource::Synthetic(s) => s.dataset(GridSpec::default_square())?,
            DataSource::File(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                load_delimited(path, sniff_delimiter(&text), true)?
            }
        };
        Ok(if augment_bias {
            data.with_bias_feature()
        } else {
            data
        })
    }

    /// Short name for tables and file names.
    pub fn name(&self) -> String {
        match self {
            DataSource::Synthetic(s) => s.name().to_string(),
            DataSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into()),
        }
    }
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    s.parse().map_err(|e: dcrelu::Error| e.to_string())
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse().map_err(|e: dcrelu::Error| e.to_string())
}

fn parse_pairs(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("pairs must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// Budget flags shared by `train` and `table1`.
#[derive(Debug, Clone, Args)]
pub struct Budget {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// DCA iterations, or epochs for the baselines (defaults 200 and 5000).
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Wall-clock seconds per DCA run; exceeding it is reported as "F".
    #[arg(long, default_value_t = 1800.0)]
    pub time_budget: f64,
    #[arg(long, default_value_t = 1e3)]
    pub trust_radius: f64,
}

impl Budget {
    pub fn dca_config(&self, seed: u64) -> DcaConfig {
        let mut cfg = DcaConfig {
            eps_objective: self.eps,
            time_budget_secs: self.time_budget,
            trust_radius: self.trust_radius,
            seed,
            ..DcaConfig::default()
        };
        if let Some(k) = self.max_iters {
            cfg.max_iters = k;
        }
        cfg
    }

    pub fn baseline_config(&self, optimizer: Optimizer, seed: u64) -> BaselineConfig {
        let mut cfg = BaselineConfig {
            seed,
            ..BaselineConfig::new(optimizer)
        };
        if let Some(k) = self.max_iters {
            cfg.max_epochs = k;
        }
        cfg
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: DataSource,
    #[arg(long, default_value = "uniform", value_parser = parse_norm)]
    pub loss: Norm,
    #[arg(long, default_value = "relu", value_parser = parse_activation)]
    pub activation: Activation,
    #[arg(long, default_value = "1", value_parser = parse_pairs)]
    pub pairs: usize,
    #[arg(long, value_enum, default_value_t = Engine::Dca)]
    pub engine: Engine,
    #[command(flatten)]
    pub budget: Budget,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Append a constant 1 feature to every sample.
    #[arg(long)]
    pub augment_bias: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Weights file written by `train`.
    pub weights: PathBuf,
    #[arg(long)]
    pub data: DataSource,
    #[arg(long, default_value = "uniform", value_parser = parse_norm)]
    pub loss: Norm,
    /// Defaults to the activation recorded in the weights file.
    #[arg(long, value_parser = parse_activation)]
    pub activation: Option<Activation>,
    #[arg(long)]
    pub augment_bias: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    /// Extra datasets (e.g. UCR ECG files) added after the synthetic ones.
    #[arg(long)]
    pub data: Vec<DataSource>,
    #[command(flatten)]
    pub budget: Budget,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub augment_bias: bool,
    /// Worker threads (default: all hardware threads).
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub weights: Weights,
    pub objective: f64,
    /// `converged`, `iter_limit`, `time_budget`, `lp_failure` or
    /// `completed` (baselines).
    pub status: &'static str,
    pub wall_ms: f64,
    /// Trace or loss-curve CSV.
    pub curve_csv: String,
}

impl RunOutcome {
    pub fn timed_out(&self) -> bool {
        self.status == DcaStatus::TimeBudget.label()
    }

    pub fn failed(&self) -> bool {
        self.status == DcaStatus::LpFailure.label()
    }
}

/// Trains with the chosen engine; the reported objective is the best seen,
/// and `weights` attain it.
pub fn train_once(
    data: &Dataset,
    engine: Engine,
    norm: Norm,
    act: Activation,
    pairs: usize,
    budget: &Budget,
    seed: u64,
) -> anyhow::Result<RunOutcome> {
    let start = Instant::now();
    let out = match engine {
        Engine::Dca => {
            let t = run_dca(data, pairs, act, norm, &budget.dca_config(seed))?;
            RunOutcome {
                objective: t.best_p,
                status: t.status.label(),
                curve_csv: t.to_csv(),
                weights: t.best_weights,
                wall_ms: 0.0,
            }
        }
        Engine::Adam | Engine::Adamax => {
            let opt = if engine == Engine::Adam {
                Optimizer::Adam
            } else {
                Optimizer::Adamax
            };
            let run = train_baseline(data, pairs, act, norm, &budget.baseline_config(opt, seed))?;
            RunOutcome {
                objective: run.final_loss,
                status: "completed",
                curve_csv: run.to_csv(),
                weights: run.final_weights,
                wall_ms: 0.0,
            }
        }
    };
    Ok(RunOutcome {
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        ..out
    })
}

pub const SUMMARY_HEADER: &str = "engine,loss,activation,pairs,final_objective,status,wall_ms";

pub fn summary_line(
    engine: Engine,
    norm: Norm,
    act: Activation,
    pairs: usize,
    run: &RunOutcome,
) -> String {
    format!(
        "{},{},{},{},{:?},{},{:.0}",
        engine.label(),
        norm.label(),
        act.label(),
        pairs,
        run.objective,
        run.status,
        run.wall_ms
    )
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_train(args: &TrainArgs) -> anyhow::Result<u8> {
    let data = args.data.load(args.augment_bias)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let run = train_once(
        &data,
        args.engine,
        args.loss,
        args.activation,
        args.pairs,
        &args.budget,
        args.budget.seed,
    )?;
    write_weights(&args.out.join("weights.txt"), &run.weights, args.activation)?;
    let curve = match args.engine {
        Engine::Dca => "trace.csv",
        _ => "loss_curve.csv",
    };
    write_file(&args.out.join(curve), &run.curve_csv)?;
    let line = summary_line(args.engine, args.loss, args.activation, args.pairs, &run);
    write_file(
        &args.out.join("summary.csv"),
        &format!("{SUMMARY_HEADER}\n{line}\n"),
    )?;
    println!("{line}");
    if run.failed() {
        bail!(
            "an LP subproblem could not be solved; see {}",
            args.out.join(curve).display()
        );
    }
    Ok(if run.timed_out() { 2 } else { 0 })
}

pub fn cmd_eval(args: &EvalArgs) -> anyhow::Result<u8> {
    let (w, file_act) = read_weights(&args.weights)?;
    let act = args.activation.unwrap_or(file_act);
    let data = args.data.load(args.augment_bias)?;
    if data.dim() != w.dim() {
        bail!(
            "weights have d = {} but {} has d = {}",
            w.dim(),
            args.data,
            data.dim()
        );
    }
    println!("{:.6}", loss(&w, act, args.loss, &data)?);
    Ok(0)
}

pub fn run(cli: &Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Table1(a) => table::cmd_table1(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_sources() {
        assert_eq!(
            "synthetic:phi2".parse::<DataSource>().unwrap(),
            DataSource::Synthetic(Synthetic::Phi2)
        );
        assert!("synthetic:phi3".parse::<DataSource>().is_err());
        assert_eq!(
            "ECG200_TRAIN.tsv".parse::<DataSource>().unwrap().name(),
            "ECG200_TRAIN"
        );
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "dcrelu",
            "train",
            "--data",
            "synthetic:phi1",
            "--activation",
            "leaky:0.01",
            "--loss",
            "l1",
            "--pairs",
            "2",
            "--engine",
            "adam",
        ])
        .unwrap();
        let Command::Train(a) = cli.command else {
            panic!("expected train")
        };
        assert_eq!(a.activation, Activation::LeakyRelu { alpha: 0.01 });
        assert_eq!(a.loss, Norm::Manhattan);
        assert_eq!(a.engine, Engine::Adam);
        assert!(Cli::try_parse_from(["dcrelu", "train", "--data", "x", "--pairs", "0"]).is_err());
        assert!(Cli::try_parse_from(["dcrelu", "train", "--data", "x", "--bogus"]).is_err());
    }
}
