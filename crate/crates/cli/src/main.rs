//! `stepnet`: generate data, train, roll out, evaluate, sweep and run studies.
//!
//! Failures print one JSON line `{"error": KIND, "message": ...}` on stderr
//! and exit nonzero (1 for runtime errors, 2 for bad usage).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use stepnet::benchmarks::{BenchmarkRegistry, DatasetOptions, GlycolyticConfig};
use stepnet::experiments::{
    parse_percent, relative_l2_error, run_study, run_sweep, train_on_data, write_bundle, write_json, DataSource,
    RunSpec, SeedPolicy, StudyOptions, SweepConfig, SweepKind,
};
use stepnet::integrators::{integrate_substepped, DEFAULT_SUBSTEPS};
use stepnet::{Error, Family, MlpModel, Result, TimeSeries};

#[derive(Parser)]
#[command(name = "stepnet", version, about = "Multistep neural identification of dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a benchmark and write its trajectories as CSV.
    Generate(GenerateArgs),
    /// Fit a network to a benchmark or a CSV file.
    Train(RunArgs),
    /// Integrate a trained model from the first state of the reference data.
    Rollout(RunArgs),
    /// Roll out and report per-component relative errors against the reference.
    Eval(RunArgs),
    /// Run a grid of identifications.
    Sweep {
        #[arg(value_enum)]
        kind: SweepArg,
        #[command(flatten)]
        run: RunArgs,
        /// Cells trained concurrently.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Use the master seed for every cell instead of per-cell seeds.
        #[arg(long)]
        shared_seed: bool,
    },
    /// Run one of the end-to-end studies.
    Study {
        #[arg(value_enum)]
        name: StudyArg,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Scheme,
    Dtnoise,
    Arch,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Hopf,
    Cylinder,
    Glycolytic,
    Lorenz,
    Oscillator,
}

impl StudyArg {
    fn name(self) -> &'static str {
        match self {
            StudyArg::Hopf => "hopf",
            StudyArg::Cylinder => "cylinder",
            StudyArg::Glycolytic => "glycolytic",
            StudyArg::Lorenz => "lorenz",
            StudyArg::Oscillator => "oscillator",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Ab,
    Am,
    Bdf,
}

impl From<SchemeArg> for Family {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Ab => Family::AdamsBashforth,
            SchemeArg::Am => Family::AdamsMoulton,
            SchemeArg::Bdf => Family::Bdf,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// oscillator, lorenz, hopf, glycolytic or meanfield (alias: cylinder).
    benchmark: String,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Glycolytic parameter file (TOML).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Built-in data source; ignored when --data is given.
    #[arg(long)]
    benchmark: Option<String>,
    /// Trajectory CSV (`t,x1,...` with optional `traj` column).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file for rollout/eval; glycolytic parameter file otherwise.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Number of multistep steps M.
    #[arg(long)]
    steps: Option<usize>,
    /// Hidden layers.
    #[arg(long)]
    layers: Option<usize>,
    /// Neurons per hidden layer.
    #[arg(long)]
    neurons: Option<usize>,
    /// Keep every k-th sample of the data.
    #[arg(long)]
    dt_subsample: Option<usize>,
    /// Noise level: a fraction (0.0001) or a percent label ("0.01%").
    #[arg(long)]
    noise: Option<String>,
    /// Adam iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Decay the learning rate geometrically to this value.
    #[arg(long)]
    lr_final: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Standardize network inputs and outputs from the data.
    #[arg(long)]
    standardize: bool,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_noise(text: &str) -> Result<f64> {
    if text.trim_end().ends_with('%') {
        return parse_percent(text);
    }
    match text.trim().parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(Error::Config(format!("invalid noise level `{text}`"))),
    }
}

impl RunArgs {
    fn source(&self) -> DataSource {
        match &self.data {
            Some(path) => DataSource::file(path),
            None => DataSource::Benchmark {
                name: self.benchmark.clone().unwrap_or_else(|| "oscillator".into()),
                options: DatasetOptions::default(),
                params: self.params.clone(),
            },
        }
    }

    fn scheme(&self) -> Option<(Family, usize)> {
        match (self.scheme, self.steps) {
            (None, None) => None,
            (family, steps) => Some((family.map_or(Family::AdamsMoulton, Family::from), steps.unwrap_or(1))),
        }
    }

    fn run_spec(&self) -> Result<RunSpec> {
        let options = self.study_options()?;
        let spec = options.run_spec(self.source());
        spec.validate()?;
        Ok(spec)
    }

    fn study_options(&self) -> Result<StudyOptions> {
        Ok(StudyOptions {
            seed: self.seed.unwrap_or(0),
            iters: self.iters,
            learning_rate: self.lr,
            final_learning_rate: self.lr_final,
            scheme: self.scheme(),
            hidden_layers: self.layers,
            neurons: self.neurons,
            dt_subsample: self.dt_subsample,
            noise: self.noise.as_deref().map(parse_noise).transpose()?,
            standardize: self.standardize.then_some(true),
            data: self.data.clone(),
            params: self.params.clone(),
            out: self.out.clone(),
        })
    }

    fn require_out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("--out DIR is required".into()))
    }

    /// Reference trajectories on the requested grid.
    fn reference(&self) -> Result<Vec<TimeSeries>> {
        let mut source = self.source();
        if let DataSource::Benchmark { params, .. } = &mut source {
            // --params names the model here.
            *params = None;
        }
        let factor = self.dt_subsample.unwrap_or(1);
        source.load()?.iter().map(|ts| ts.subsample(factor)).collect()
    }

    fn model(&self) -> Result<MlpModel> {
        let path = self
            .params
            .as_deref()
            .ok_or_else(|| Error::Config("--params MODEL.json is required".into()))?;
        MlpModel::load(path)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn generate(args: &GenerateArgs) -> Result<serde_json::Value> {
    let mut options = DatasetOptions {
        dt: args.dt,
        horizon: args.horizon,
        seed: args.seed,
        ..DatasetOptions::default()
    };
    if let Some(path) = &args.params {
        options.glycolytic = Some(GlycolyticConfig::load(path)?);
    }
    let registry = BenchmarkRegistry::default();
    let benchmark = registry.get(&args.benchmark)?;
    let data = benchmark.dataset(&options)?.into_vec();
    create_dir(&args.out)?;
    let file = args.out.join("data.csv");
    write_bundle(&data, &file)?;
    let config = json!({
        "verb": "generate",
        "benchmark": benchmark.name(),
        "options": options,
        "glycolytic": options.glycolytic.clone().or_else(|| (benchmark.name() == "glycolytic").then(GlycolyticConfig::default)),
        "dt": data[0].dt(),
        "trajectories": data.len(),
        "rows": data[0].len(),
    });
    write_json(&args.out.join("config.json"), &config)?;
    Ok(json!({ "data": file, "trajectories": data.len(), "rows": data[0].len(), "dt": data[0].dt() }))
}

fn train(args: &RunArgs) -> Result<serde_json::Value> {
    let out = args.require_out()?;
    let spec = args.run_spec()?;
    let clean = spec.source.load()?;
    let (_, model, report, _) = train_on_data(&spec, &clean, Some(out))?;
    write_json(&out.join("train_report.json"), &report)?;
    Ok(json!({
        "model": out.join("model.json"),
        "final_loss": report.final_loss,
        "iterations": report.iterations_run,
        "parameters": model.parameter_count(),
    }))
}

fn rollout(args: &RunArgs, evaluate: bool) -> Result<serde_json::Value> {
    let out = args.require_out()?;
    let model = args.model()?;
    let reference = args.reference()?;
    create_dir(out)?;
    write_json(
        &out.join("config.json"),
        &json!({
            "verb": if evaluate { "eval" } else { "rollout" },
            "model": args.params,
            "source": args.source(),
            "dt_subsample": args.dt_subsample.unwrap_or(1),
            "substeps": DEFAULT_SUBSTEPS,
            "layer_dims": model.layer_dims(),
        }),
    )?;
    let predicted = reference
        .iter()
        .map(|ts| integrate_substepped(&model, ts.row(0), ts.t0(), ts.dt(), ts.len() - 1, DEFAULT_SUBSTEPS))
        .collect::<Result<Vec<_>>>()?;
    write_bundle(&predicted, &out.join("rollout.csv"))?;
    if !evaluate {
        return Ok(json!({ "rollout": out.join("rollout.csv"), "trajectories": predicted.len() }));
    }
    let mut per_trajectory = Vec::new();
    for (p, e) in predicted.iter().zip(&reference) {
        let errors = (0..e.dim()).map(|c| relative_l2_error(p, e, c)).collect::<Result<Vec<_>>>()?;
        per_trajectory.push(errors);
    }
    let metrics = json!({ "relative_l2_errors": per_trajectory });
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(metrics)
}

fn sweep(kind: SweepArg, args: &RunArgs, workers: usize, shared_seed: bool) -> Result<serde_json::Value> {
    let kind = match kind {
        SweepArg::Scheme => SweepKind::Scheme,
        SweepArg::Dtnoise => SweepKind::DtNoise,
        SweepArg::Arch => SweepKind::Arch,
    };
    let mut config = SweepConfig::new(args.run_spec()?);
    config.workers = workers;
    config.seed_policy = if shared_seed { SeedPolicy::Shared } else { SeedPolicy::PerCell };
    config.out = args.out.clone();
    let result = run_sweep(kind, &config)?;
    Ok(json!({ "sweep": kind, "grids": result.grids }))
}

fn study(name: StudyArg, args: &RunArgs) -> Result<serde_json::Value> {
    let report = run_study(name.name(), &args.study_options()?)?;
    for check in &report.checks {
        eprintln!("{check}");
    }
    Ok(json!({ "study": report.study, "passed": report.passed(), "checks": report.checks }))
}

fn execute(cli: &Cli) -> Result<serde_json::Value> {
    match &cli.command {
        Command::Generate(args) => generate(args),
        Command::Train(args) => train(args),
        Command::Rollout(args) => rollout(args, false),
        Command::Eval(args) => rollout(args, true),
        Command::Sweep {
            kind,
            run,
            workers,
            shared_seed,
        } => sweep(*kind, run, *workers, *shared_seed),
        Command::Study { name, run } => study(*name, run),
    }
}

fn error_line(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            error_line("UsageError", message.lines().next().unwrap_or_default());
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            error_line(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
