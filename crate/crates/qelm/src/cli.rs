//! Command line front end. [`dispatch`] parses arguments, runs one
//! subcommand and maps failures to a single-line JSON message on stderr and
//! a nonzero exit code.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use qelm_core::estimator::{ideal_weights, mse, predict, train, TrainingSet};
use qelm_core::linalg::RMatrix;
use qelm_core::qubit::Observable;
use qelm_core::reservoir::{effective_povm, frame_rank, pauli_coordinates, ReservoirMap};
use qelm_core::sampling::FeatureVector;
use serde_json::json;

use crate::config::{self, InfTag, RunConfig, SamplingName, ShotsSpec};
use crate::error::config_err;
use crate::formats::{
    read_data_csv, repetitions_csv, summary_csv, unix_now, write_data_csv, AtomicOutputs,
    DataTable, Manifest, WeightsFile,
};
use crate::harness::{optimize_config, run_sweep, simulate_dataset};
use crate::{QelmError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "qelm",
    version,
    about = "Quantum-walk extreme learning machine simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the effective POVM, frame singular values and dual-frame weights.
    PovmInfo(RunArgs),
    /// Training-curve sweep: summary.csv, repetitions.csv, manifest.json.
    Sweep(RunArgs),
    /// Random search over coin angles and projection: optimized.cfg, optimize.json, manifest.json.
    Optimize(OptimizeArgs),
    /// Simulated measurement records for pool_size random states: data.csv, manifest.json.
    Simulate(RunArgs),
    /// Fit readout weights to a data CSV: weights.json, manifest.json.
    Train(TrainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Poisson,
    Multinomial,
    /// Infinite statistics; implies `--shots inf`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeaturesArg {
    Raw,
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    SigmaMin,
    ValMse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NTrain(pub Vec<usize>);

fn parse_ntrain_arg(s: &str) -> std::result::Result<NTrain, String> {
    config::parse_ntrain(s).map(NTrain)
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Key-value config file, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mean detected counts per state, or `inf`.
    #[arg(long, value_parser = config::parse_shots)]
    pub shots: Option<ShotsSpec>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Training-set sizes: `2..100`, `10..100:10` or `5,10,20`.
    #[arg(long, value_parser = parse_ntrain_arg)]
    pub ntrain: Option<NTrain>,
    #[arg(long, value_enum)]
    pub sampling: Option<SamplingArg>,
    #[arg(long, value_enum)]
    pub features: Option<FeaturesArg>,
    #[arg(long, value_enum)]
    pub intercept: Option<OnOff>,
    /// Reuse the same measurement records in every repetition.
    #[arg(long)]
    pub fixed_records: bool,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// CSV with columns p0..p{m-1} followed by observable targets.
    #[arg(long)]
    pub data: PathBuf,
}

impl RunArgs {
    /// Config file (or defaults) with the command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.harness.seed = seed;
        }
        if let Some(reps) = self.reps {
            cfg.harness.repetitions = reps;
        }
        if let Some(n) = &self.ntrain {
            cfg.harness.n_train = n.0.clone();
        }
        if self.fixed_records {
            cfg.harness.fixed_records = true;
        }
        if let Some(i) = self.intercept {
            cfg.sampling.intercept = i == OnOff::On;
        }
        if let Some(s) = self.shots {
            cfg.sampling.shots = s;
            if matches!(s, ShotsSpec::Finite(_))
                && cfg.sampling.features == config::FeatureName::Exact
            {
                cfg.sampling.features = config::FeatureName::Raw;
            }
        }
        match self.sampling {
            Some(SamplingArg::Exact) => {
                if matches!(self.shots, Some(ShotsSpec::Finite(_))) {
                    return Err(config_err("--sampling exact conflicts with finite --shots"));
                }
                cfg.sampling.shots = ShotsSpec::Infinite(InfTag::Inf);
            }
            Some(mode) => {
                if matches!(cfg.sampling.shots, ShotsSpec::Infinite(_)) {
                    return Err(config_err(
                        "poisson or multinomial sampling needs finite --shots",
                    ));
                }
                cfg.sampling.mode = if mode == SamplingArg::Poisson {
                    SamplingName::Poisson
                } else {
                    SamplingName::Multinomial
                };
            }
            None => {}
        }
        if let Some(f) = self.features {
            if matches!(cfg.sampling.shots, ShotsSpec::Infinite(_)) {
                return Err(config_err(
                    "--features needs finite shots; infinite shots use exact probabilities",
                ));
            }
            cfg.sampling.features = if f == FeaturesArg::Raw {
                config::FeatureName::Raw
            } else {
                config::FeatureName::Conditional
            };
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| config_err("--out is required for this subcommand"))
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code: 0 on success, 2 for usage and config
/// errors, 1 otherwise.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or(&msg)
                .trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            match e {
                QelmError::Config(_) | QelmError::Parse { .. } => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let started = unix_now();
    match cli.command {
        Command::PovmInfo(args) => povm_info(&args, started),
        Command::Sweep(args) => sweep(&args, started),
        Command::Optimize(args) => optimize(&args, started),
        Command::Simulate(args) => simulate(&args, started),
        Command::Train(args) => train_cmd(&args, started),
    }
}

fn observables(cfg: &RunConfig) -> Result<Vec<Observable>> {
    Ok(cfg.experiment()?.observables)
}

fn povm_info(args: &RunArgs, started: u64) -> Result<()> {
    let cfg = args.resolve()?;
    let walk = cfg.walk_config()?;
    let povm = effective_povm(&ReservoirMap::from_config(&walk)?);
    let frame = frame_rank(&povm);
    let obs = observables(&cfg)?;
    let ideal = ideal_weights(&povm, &obs);
    let report = json!({
        "outcomes": povm.len(),
        "rank": frame.rank,
        "informationally_complete": frame.is_informationally_complete(),
        "singular_values": frame.singular_values,
        "sigma_min": frame.sigma_min(),
        "elements": povm.elements().iter().map(|e| pauli_coordinates(e).to_vec()).collect::<Vec<_>>(),
        "ideal_weights": {
            "observables": cfg.harness.observables,
            "weights": (0..obs.len()).map(|j| ideal.weights.w.row(j).to_vec()).collect::<Vec<_>>(),
            "residuals": ideal.residuals,
            "in_span": ideal.in_span,
        },
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = &args.out {
        let mut out = AtomicOutputs::new(dir)?;
        out.stage_json("povm.json", &report)?;
        finish(out, "povm-info", &cfg, args.threads, started)?;
    }
    Ok(())
}

fn sweep(args: &RunArgs, started: u64) -> Result<()> {
    let cfg = args.resolve()?;
    let dir = args.out_dir()?;
    let exp = cfg.experiment()?;
    info!(
        "sweep: {} repetitions over {} training sizes",
        exp.repetitions,
        exp.n_train_grid.len()
    );
    let res = run_sweep(&exp, args.threads)?;
    if res.dropped_states > 0 {
        info!(
            "{} state records dropped after repeated zero counts",
            res.dropped_states
        );
    }
    let mut out = AtomicOutputs::new(dir)?;
    out.stage("summary.csv", summary_csv(&res.cells).as_bytes())?;
    out.stage("repetitions.csv", repetitions_csv(&res).as_bytes())?;
    finish(out, "sweep", &cfg, args.threads, started)
}

fn optimize(args: &OptimizeArgs, started: u64) -> Result<()> {
    let mut cfg = args.run.resolve()?;
    if let Some(c) = args.criterion {
        cfg.optimize.criterion = if c == CriterionArg::SigmaMin {
            config::CriterionName::SigmaMin
        } else {
            config::CriterionName::ValMse
        };
    }
    if let Some(b) = args.budget {
        cfg.optimize.budget = b;
    }
    let dir = args.run.out_dir()?;
    let template = cfg.experiment()?;
    let spec = cfg.search_spec();
    let best = optimize_config(&spec, &template, args.run.threads)?;
    let search = cfg.optimize.clone();
    cfg.set_walk(&best.walk);
    let report = json!({
        "criterion": spec.criterion.name(),
        "budget": search.budget,
        "candidate": best.candidate,
        "score": best.score,
        "rank": best.frame.rank,
        "singular_values": best.frame.singular_values,
        "sigma_min": best.frame.sigma_min(),
    });
    println!("{report}");
    let mut out = AtomicOutputs::new(dir)?;
    out.stage("optimized.cfg", cfg.to_kv().as_bytes())?;
    out.stage_json("optimize.json", &report)?;
    finish(out, "optimize", &cfg, args.run.threads, started)
}

fn simulate(args: &RunArgs, started: u64) -> Result<()> {
    let cfg = args.resolve()?;
    let dir = args.out_dir()?;
    let exp = cfg.experiment()?;
    let sim = simulate_dataset(&exp)?;
    let table = DataTable {
        probabilities: sim.features,
        observables: exp.observables.iter().map(|o| o.label).collect(),
        targets: sim.targets,
    };
    let mut out = AtomicOutputs::new(dir)?;
    out.stage("data.csv", write_data_csv(&table).as_bytes())?;
    finish(out, "simulate", &cfg, args.threads, started)
}

fn train_cmd(args: &TrainArgs, started: u64) -> Result<()> {
    let cfg = args.run.resolve()?;
    let dir = args.run.out_dir()?;
    let data = read_data_csv(&args.data)?;
    let mode = cfg.feature_mode();
    let intercept = cfg.sampling.intercept;
    let rows: Vec<FeatureVector> = data
        .probabilities
        .iter()
        .map(|p| {
            let mut values = p.clone();
            if intercept {
                values.push(1.0);
            }
            FeatureVector {
                values,
                mode,
                intercept,
            }
        })
        .collect();
    let targets = RMatrix::from_rows(&data.targets);
    let ts = TrainingSet::new(&rows, targets.clone(), data.observables.clone())?;
    let w = train(&ts, cfg.experiment()?.train)?;
    let preds = rows
        .iter()
        .map(|r| predict(&w, r))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let train_mse = mse(&RMatrix::from_rows(&preds), &targets)?;
    println!(
        "{}",
        json!({
            "samples": rows.len(),
            "observables": data.observables.iter().map(|l| l.name()).collect::<Vec<_>>(),
            "train_mse": train_mse,
        })
    );
    let mut out = AtomicOutputs::new(dir)?;
    out.stage_json("weights.json", &WeightsFile::from_weights(&w))?;
    finish(out, "train", &cfg, args.run.threads, started)
}

fn finish(
    mut out: AtomicOutputs,
    subcommand: &str,
    cfg: &RunConfig,
    threads: usize,
    started: u64,
) -> Result<()> {
    let mut manifest = Manifest::new(subcommand, cfg, threads, started);
    manifest.outputs = out.names();
    manifest.outputs.push("manifest.json".into());
    out.stage_json("manifest.json", &manifest)?;
    for p in out.commit()? {
        info!("wrote {}", p.display());
    }
    Ok(())
}
