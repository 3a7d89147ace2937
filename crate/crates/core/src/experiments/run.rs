use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::benchmarks::{add_noise, BenchmarkRegistry, DatasetOptions, GlycolyticConfig};
use crate::dataio::{read_timeseries_csv, write_timeseries_csv, write_trajectories_csv};
use crate::error::{Error, Result};
use crate::experiments::grid::pooled_relative_l2_error;
use crate::experiments::seeds::derive_seed;
use crate::integrators::{rollout_like, DEFAULT_SUBSTEPS};
use crate::model::{self, MlpModel};
use crate::schemes::Family;
use crate::timeseries::TimeSeries;
use crate::training::{train_multi, TrainConfig, TrainReport, DEFAULT_ITERS};

/// Where the clean trajectories come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Benchmark {
        name: String,
        #[serde(default)]
        options: DatasetOptions,
        /// Glycolytic parameter file, if not the built-in defaults.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<PathBuf>,
    },
    File {
        path: PathBuf,
    },
}

impl DataSource {
    pub fn benchmark(name: &str) -> Self {
        DataSource::Benchmark {
            name: name.to_string(),
            options: DatasetOptions::default(),
            params: None,
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        DataSource::File { path: path.into() }
    }

    /// Clean trajectories, before subsampling.
    pub fn load(&self) -> Result<Vec<TimeSeries>> {
        match self {
            DataSource::Benchmark { name, options, params } => {
                let mut options = options.clone();
                if let Some(path) = params {
                    options.glycolytic = Some(GlycolyticConfig::load(path)?);
                }
                Ok(BenchmarkRegistry::default().get(name)?.dataset(&options)?.into_vec())
            }
            DataSource::File { path } => read_timeseries_csv(path),
        }
    }
}

/// Fully resolved settings of one identification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub source: DataSource,
    pub family: Family,
    pub steps: usize,
    pub hidden_layers: usize,
    pub neurons: usize,
    /// Keep every k-th clean sample.
    pub dt_subsample: usize,
    /// Noise level as a fraction of each component's standard deviation.
    pub noise: f64,
    pub iters: usize,
    pub learning_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_learning_rate: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub standardize: bool,
    pub rollout_substeps: usize,
    pub log_every: usize,
}

impl RunSpec {
    /// Trapezoidal rule, 1×256, clean data at the native step, default budget.
    pub fn new(source: DataSource) -> Self {
        Self {
            source,
            family: Family::AdamsMoulton,
            steps: 1,
            hidden_layers: 1,
            neurons: 256,
            dt_subsample: 1,
            noise: 0.0,
            iters: DEFAULT_ITERS,
            learning_rate: 1e-3,
            final_learning_rate: None,
            seed: 0,
            standardize: false,
            rollout_substeps: DEFAULT_SUBSTEPS,
            log_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt_subsample < 1 {
            return Err(Error::Config("dt_subsample must be >= 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise level {} must be >= 0", self.noise)));
        }
        if self.hidden_layers < 1 || self.neurons < 1 {
            return Err(Error::Config("need at least one hidden layer of width >= 1".into()));
        }
        if self.rollout_substeps < 1 {
            return Err(Error::Config("rollout_substeps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn train_config(&self, dim: usize) -> Result<TrainConfig> {
        let mut config = TrainConfig::new(dim)
            .with_scheme(self.family, self.steps)?
            .with_architecture(self.hidden_layers, self.neurons)
            .with_iters(self.iters)
            .with_learning_rate(self.learning_rate)
            .with_final_learning_rate(self.final_learning_rate)
            .with_seed(self.seed)
            .with_standardize(self.standardize);
        config.log_every = self.log_every;
        config.validate()?;
        Ok(config)
    }
}

/// What ends up in `config.json` of a run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub run: RunSpec,
    pub train: TrainConfig,
    pub dt: f64,
    pub trajectories: usize,
    pub rows_per_trajectory: Vec<usize>,
    pub parameter_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Pooled relative error per component; `None` for a failed rollout.
    pub errors: Vec<Option<f64>>,
    pub failure: Option<String>,
    pub final_loss: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub parameter_count: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ResolvedConfig,
    pub metrics: RunMetrics,
    pub model: MlpModel,
    pub report: TrainReport,
    /// Clean reference trajectories on the training grid.
    pub exact: Vec<TimeSeries>,
    /// Learned rollouts, empty if any blew up.
    pub predicted: Vec<TimeSeries>,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.metrics.failure.is_some()
    }
}

/// Loads the data and runs [`run_on_data`].
pub fn run_identification(spec: &RunSpec, out_dir: Option<&Path>) -> Result<RunOutcome> {
    spec.validate()?;
    let clean = spec.source.load()?;
    run_on_data(spec, &clean, out_dir)
}

/// Subsample → noise → train → roll out from the clean initial states →
/// pooled per-component errors. With `out_dir`, every artifact plus the
/// resolved config is written there.
pub fn run_on_data(spec: &RunSpec, clean: &[TimeSeries], out_dir: Option<&Path>) -> Result<RunOutcome> {
    let (exact, model, report, config) = train_on_data(spec, clean, out_dir)?;
    let dim = exact[0].dim();

    let mut failure = None;
    let mut predicted = Vec::with_capacity(exact.len());
    for (i, ts) in exact.iter().enumerate() {
        match rollout_like(&model, ts, spec.rollout_substeps) {
            Ok(p) => predicted.push(p),
            Err(Error::NonFiniteState { last_finite }) => {
                let msg = format!("rollout {i} blew up after row {last_finite}");
                warn!("{msg}");
                failure = Some(msg);
                predicted.clear();
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let errors: Vec<Option<f64>> = if failure.is_some() {
        vec![None; dim]
    } else {
        (0..dim)
            .map(|c| match pooled_relative_l2_error(&predicted, &exact, c) {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                Ok(_) => Ok(None),
                Err(Error::ZeroReference(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?
    };
    let metrics = RunMetrics {
        errors,
        failure,
        final_loss: report.final_loss,
        iterations: report.iterations_run,
        wall_time: report.wall_time,
        parameter_count: config.parameter_count,
    };

    if let Some(dir) = out_dir {
        write_json(&dir.join("metrics.json"), &metrics)?;
        write_bundle(&exact, &dir.join("exact.csv"))?;
        if !predicted.is_empty() {
            write_bundle(&predicted, &dir.join("rollout.csv"))?;
        }
    }
    Ok(RunOutcome {
        config,
        metrics,
        model,
        report,
        exact,
        predicted,
    })
}

/// Clean trajectories on the training grid and the (possibly noisy) copies
/// the network is fitted to.
pub fn prepare_data(spec: &RunSpec, clean: &[TimeSeries]) -> Result<(Vec<TimeSeries>, Vec<TimeSeries>)> {
    spec.validate()?;
    if clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    let exact = clean
        .iter()
        .map(|ts| ts.subsample(spec.dt_subsample))
        .collect::<Result<Vec<_>>>()?;
    let training = exact
        .iter()
        .enumerate()
        .map(|(i, ts)| add_noise(ts, spec.noise, derive_seed(spec.seed, &[0x006e_6f69_7365, i as u64])))
        .collect::<Result<_>>()?;
    Ok((exact, training))
}

/// Training half of [`run_on_data`]: writes `config.json` and the loss log
/// (plus `model.json`) when `out_dir` is given.
pub fn train_on_data(
    spec: &RunSpec,
    clean: &[TimeSeries],
    out_dir: Option<&Path>,
) -> Result<(Vec<TimeSeries>, MlpModel, TrainReport, ResolvedConfig)> {
    let (exact, training) = prepare_data(spec, clean)?;
    let mut train_config = spec.train_config(exact[0].dim())?;
    let config = ResolvedConfig {
        run: spec.clone(),
        train: train_config.clone(),
        dt: exact[0].dt(),
        trajectories: exact.len(),
        rows_per_trajectory: exact.iter().map(TimeSeries::len).collect(),
        parameter_count: model::parameter_count(&train_config.layer_dims),
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("config.json"), &config)?;
        train_config.log_path = Some(dir.join("train_log.csv"));
    }
    info!(
        "training {} M={} {:?} on {} trajectories (dt {})",
        spec.family, spec.steps, train_config.layer_dims, exact.len(), config.dt
    );
    let (model, report) = train_multi(&train_config, &training)?;
    if let Some(dir) = out_dir {
        model.save(dir.join("model.json"))?;
    }
    Ok((exact, model, report, config))
}

/// Single trajectories get the plain layout, bundles a `traj` column.
pub fn write_bundle(bundle: &[TimeSeries], path: &Path) -> Result<()> {
    match bundle {
        [one] => write_timeseries_csv(one, path),
        many => write_trajectories_csv(many, path),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
