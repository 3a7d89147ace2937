use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmarks::{
    hopf_augmented, BenchmarkRegistry, DatasetOptions, GlycolyticConfig, MeanFieldParams,
};
use crate::error::{Error, Result};
use crate::experiments::grid::{relative_l2_error, relative_l2_error_until};
use crate::experiments::run::{run_on_data, write_bundle, write_json, DataSource, RunOutcome, RunSpec};
use crate::experiments::seeds::derive_seed;
use crate::field::VectorField;
use crate::integrators::{integrate_substepped, rollout_like, DEFAULT_SUBSTEPS};
use crate::model::MlpModel;
use crate::schemes::Family;
use crate::timeseries::TimeSeries;

/// Lorenz needs a tighter fit than the default budget gives for the
/// short-horizon forecast to hold.
pub const LORENZ_ITERS: usize = 150_000;
pub const LORENZ_FINAL_LEARNING_RATE: f64 = 1e-5;
/// The Hopf study fits every 10th sample of the bundle (step 0.1).
pub const HOPF_SUBSAMPLE: usize = 10;
/// Held-out `(mu, x0, y0)` starts of the Hopf study.
pub const HOPF_TEST_STARTS: [(f64, f64, f64); 2] = [(-0.15, 0.0, 0.5), (0.35, 0.0, 0.5)];
/// Glycolytic rollouts from fresh random starts.
pub const GLYCOLYTIC_FRESH_STARTS: usize = 3;
/// Fraction of a rollout treated as its terminal window.
pub const TERMINAL_FRACTION: f64 = 0.2;

/// User overrides shared by every study; `None` keeps the study default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub seed: u64,
    pub iters: Option<usize>,
    pub learning_rate: Option<f64>,
    pub final_learning_rate: Option<f64>,
    pub scheme: Option<(Family, usize)>,
    pub hidden_layers: Option<usize>,
    pub neurons: Option<usize>,
    pub dt_subsample: Option<usize>,
    pub noise: Option<f64>,
    pub standardize: Option<bool>,
    /// Input trajectories (cylinder study).
    pub data: Option<PathBuf>,
    /// Parameter file (glycolytic study).
    pub params: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl StudyOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Run settings for `source` after applying the overrides.
    pub fn run_spec(&self, source: DataSource) -> RunSpec {
        self.run_spec_with(source, |_| {})
    }

    /// Like [`run_spec`](Self::run_spec), with study defaults applied before
    /// the overrides.
    pub fn run_spec_with(&self, source: DataSource, defaults: impl FnOnce(&mut RunSpec)) -> RunSpec {
        let mut spec = RunSpec::new(source);
        defaults(&mut spec);
        spec.seed = self.seed;
        if let Some(on) = self.standardize {
            spec.standardize = on;
        }
        if let Some(iters) = self.iters {
            spec.iters = iters;
            spec.log_every = spec.log_every.min(iters.max(1));
        }
        if let Some(lr) = self.learning_rate {
            spec.learning_rate = lr;
        }
        if let Some(lr) = self.final_learning_rate {
            spec.final_learning_rate = Some(lr);
        }
        if let Some((family, steps)) = self.scheme {
            spec.family = family;
            spec.steps = steps;
        }
        if let Some(layers) = self.hidden_layers {
            spec.hidden_layers = layers;
        }
        if let Some(neurons) = self.neurons {
            spec.neurons = neurons;
        }
        if let Some(k) = self.dt_subsample {
            spec.dt_subsample = k;
        }
        if let Some(noise) = self.noise {
            spec.noise = noise;
        }
        spec
    }

    fn subdir(&self, name: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|o| o.join(name))
    }
}

/// One gated quantity of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `"<"` or `">="`.
    pub relation: String,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            relation: "<".into(),
            passed: value < limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            relation: ">=".into(),
            passed: value >= limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.4e} {} {:.4e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.relation,
            self.limit
        )
    }
}

/// A named figure panel and the data file behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub title: String,
    pub file: String,
    pub x: String,
    pub y: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub checks: Vec<Check>,
    /// Reported but ungated numbers.
    pub metrics: BTreeMap<String, f64>,
    pub panels: Vec<Panel>,
    #[serde(skip)]
    pub model: Option<MlpModel>,
}

impl StudyReport {
    fn new(study: &str) -> Self {
        Self {
            study: study.to_string(),
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            panels: Vec::new(),
            model: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn panel(&mut self, title: &str, file: &str, x: &str, y: &[&str]) {
        self.panels.push(Panel {
            title: title.into(),
            file: file.into(),
            x: x.into(),
            y: y.iter().map(|s| s.to_string()).collect(),
        });
    }

    fn finish(mut self, options: &StudyOptions, model: MlpModel) -> Result<Self> {
        if let Some(out) = &options.out {
            fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            write_json(&out.join("config.json"), options)?;
            write_json(&out.join("report.json"), &self)?;
            let manifest = serde_json::json!({ "study": self.study, "panels": self.panels });
            write_json(&out.join("manifest.json"), &manifest)?;
        }
        self.model = Some(model);
        Ok(self)
    }
}

/// An end-to-end experiment selected by name.
pub trait Study: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(&self, options: &StudyOptions) -> Result<StudyReport>;
}

pub struct StudyRegistry {
    entries: BTreeMap<&'static str, Box<dyn Study>>,
}

impl StudyRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, study: Box<dyn Study>) {
        self.entries.insert(study.name(), study);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Study> {
        self.entries.get(name).map(|s| &**s).ok_or_else(|| Error::Unknown {
            kind: "study",
            name: name.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl Default for StudyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(OscillatorStudy));
        r.register(Box::new(LorenzStudy));
        r.register(Box::new(HopfStudy));
        r.register(Box::new(CylinderStudy));
        r.register(Box::new(GlycolyticStudy));
        r
    }
}

pub fn run_study(name: &str, options: &StudyOptions) -> Result<StudyReport> {
    StudyRegistry::default().get(name)?.run(options)
}

fn benchmark_source(name: &str, options: DatasetOptions, params: Option<PathBuf>) -> DataSource {
    DataSource::Benchmark {
        name: name.to_string(),
        options,
        params,
    }
}

fn record_errors(report: &mut StudyReport, outcome: &RunOutcome, prefix: &str) {
    for (c, e) in outcome.metrics.errors.iter().enumerate() {
        report
            .metrics
            .insert(format!("{prefix}error_x{}", c + 1), e.unwrap_or(f64::NAN));
    }
    report.metrics.insert("final_loss".into(), outcome.metrics.final_loss);
    let (best_iteration, _) = outcome.report.best_entry();
    report
        .metrics
        .insert("best_loss_iteration_fraction".into(), best_iteration as f64 / outcome.report.iterations_run as f64);
    report.metrics.insert("wall_time".into(), outcome.metrics.wall_time);
}

fn state_columns(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

fn trajectory_panels(report: &mut StudyReport, run: &str, dim: usize) {
    for col in state_columns(dim) {
        report.panel(
            &format!("{col}(t): exact vs learned"),
            &format!("{run}/exact.csv|{run}/rollout.csv"),
            "t",
            &[&col],
        );
    }
}

/// Number of sign changes of component `c`, ignoring exact zeros.
pub fn sign_changes(ts: &TimeSeries, c: usize) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for v in ts.component(c) {
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
    }
    count
}

fn planar_radius(row: &[f64], a: usize, b: usize) -> f64 {
    row[a].hypot(row[b])
}

/// Relative change of the mean radius in the `(a, b)` plane between the two
/// halves of the terminal window.
pub fn terminal_orbit_drift(ts: &TimeSeries, a: usize, b: usize) -> f64 {
    let n = ts.len();
    let start = n - ((n as f64 * TERMINAL_FRACTION).round() as usize).clamp(2, n);
    let mid = start + (n - start) / 2;
    let mean = |lo: usize, hi: usize| (lo..hi).map(|i| planar_radius(ts.row(i), a, b)).sum::<f64>() / (hi - lo) as f64;
    let (first, second) = (mean(start, mid), mean(mid, n));
    (second - first).abs() / first
}

/// Mean radius in the `(a, b)` plane over the terminal window.
pub fn terminal_radius(ts: &TimeSeries, a: usize, b: usize) -> f64 {
    let n = ts.len();
    let start = n - ((n as f64 * TERMINAL_FRACTION).round() as usize).clamp(1, n);
    (start..n).map(|i| planar_radius(ts.row(i), a, b)).sum::<f64>() / (n - start) as f64
}

/// Writes `a,b` projections of exact and learned trajectories for phase portraits.
fn write_phase_portrait(path: &Path, exact: &TimeSeries, learned: &TimeSeries, a: usize, b: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    let (ea, eb, la, lb) = (
        format!("exact_x{}", a + 1),
        format!("exact_x{}", b + 1),
        format!("learned_x{}", a + 1),
        format!("learned_x{}", b + 1),
    );
    let csv_err = |e: csv::Error| Error::Config(e.to_string());
    w.write_record([ea.as_str(), eb.as_str(), la.as_str(), lb.as_str()]).map_err(csv_err)?;
    for (e, l) in exact.rows().zip(learned.rows()) {
        w.write_record([e[a], e[b], l[a], l[b]].map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct OscillatorStudy;

impl Study for OscillatorStudy {
    fn name(&self) -> &'static str {
        "oscillator"
    }

    fn run(&self, options: &StudyOptions) -> Result<StudyReport> {
        let spec = options.run_spec(benchmark_source("oscillator", DatasetOptions::default(), None));
        let clean = spec.source.load()?;
        let outcome = run_on_data(&spec, &clean, options.subdir("run").as_deref())?;
        let mut report = StudyReport::new(self.name());
        record_errors(&mut report, &outcome, "");
        for (c, e) in outcome.metrics.errors.iter().enumerate() {
            report.checks.push(Check::below(
                format!("relative error x{}", c + 1),
                e.unwrap_or(f64::NAN),
                5e-2,
            ));
        }
        trajectory_panels(&mut report, "run", 2);
        report.panel("phase portrait", "run/exact.csv|run/rollout.csv", "x1", &["x2"]);
        report.finish(options, outcome.model)
    }
}

/// Short window on which Lorenz rollouts are compared pointwise.
pub const LORENZ_WINDOW: f64 = 2.0;

struct LorenzStudy;

impl Study for LorenzStudy {
    fn name(&self) -> &'static str {
        "lorenz"
    }

    fn run(&self, options: &StudyOptions) -> Result<StudyReport> {
        let spec = options.run_spec_with(benchmark_source("lorenz", DatasetOptions::default(), None), |spec| {
            spec.iters = LORENZ_ITERS;
            spec.final_learning_rate = Some(LORENZ_FINAL_LEARNING_RATE);
            spec.standardize = true;
        });
        let clean = spec.source.load()?;
        let outcome = run_on_data(&spec, &clean, options.subdir("run").as_deref())?;
        let mut report = StudyReport::new(self.name());
        record_errors(&mut report, &outcome, "full_");
        let predicted = outcome.predicted.first();
        let exact = &outcome.exact[0];
        for c in 0..3 {
            let windowed = match predicted {
                Some(p) => relative_l2_error_until(p, exact, c, LORENZ_WINDOW)?,
                None => f64::NAN,
            };
            report
                .checks
                .push(Check::below(format!("relative error x{} on [0,2]", c + 1), windowed, 1e-1));
        }
        let max_abs = predicted.map_or(f64::INFINITY, |p| p.states().iter().fold(0.0f64, |m, v| m.max(v.abs())));
        report.checks.push(Check::below("max |state|", max_abs, 100.0));
        let crossings = predicted.map_or(0, |p| sign_changes(p, 0));
        report
            .checks
            .push(Check::at_least("x1 sign changes", crossings as f64, 10.0));
        report.metrics.insert("exact_x1_sign_changes".into(), sign_changes(exact, 0) as f64);
        trajectory_panels(&mut report, "run", 3);
        report.panel("attractor", "run/exact.csv|run/rollout.csv", "x1", &["x3"]);
        report.finish(options, outcome.model)
    }
}

struct HopfStudy;

impl Study for HopfStudy {
    fn name(&self) -> &'static str {
        "hopf"
    }

    fn run(&self, options: &StudyOptions) -> Result<StudyReport> {
        let spec = options.run_spec_with(benchmark_source("hopf", DatasetOptions::default(), None), |spec| {
            spec.dt_subsample = HOPF_SUBSAMPLE;
        });
        let clean = spec.source.load()?;
        let outcome = run_on_data(&spec, &clean, options.subdir("train").as_deref())?;
        let mut report = StudyReport::new(self.name());
        record_errors(&mut report, &outcome, "train_");

        let reference = &outcome.exact[0];
        let steps = reference.len() - 1;
        let dt = reference.dt();
        let exact_field = hopf_augmented();
        let mut exact_tests = Vec::new();
        let mut learned_tests = Vec::new();
        for &(mu, x0, y0) in &HOPF_TEST_STARTS {
            let start = [mu, x0, y0];
            let exact = integrate_substepped(&exact_field, &start, 0.0, dt, steps, DEFAULT_SUBSTEPS)?;
            let learned = rollout_like(&outcome.model, &exact, spec.rollout_substeps);
            let tag = format!("mu={mu}");
            let Ok(learned) = learned else {
                report.checks.push(Check::below(format!("{tag} rollout finite"), f64::NAN, 0.0));
                exact_tests.push(exact);
                continue;
            };
            let last = learned.row(learned.len() - 1);
            if mu < 0.0 {
                report
                    .checks
                    .push(Check::below(format!("{tag} final radius"), planar_radius(last, 1, 2), 0.05));
            } else {
                let r = terminal_radius(&learned, 1, 2);
                let target = mu.sqrt();
                report
                    .checks
                    .push(Check::below(format!("{tag} orbit radius deviation"), (r - target).abs() / target, 0.15));
                report.metrics.insert(format!("{tag} orbit radius"), r);
            }
            let (mut mu_rate, mut planar_rate) = (0.0, 0.0);
            for row in learned.rows() {
                let v = outcome.model.eval_vec(row);
                mu_rate += v[0].abs();
                planar_rate += v[1].hypot(v[2]);
            }
            report
                .checks
                .push(Check::below(format!("{tag} mean |mu'| / mean |(x',y')|"), mu_rate / planar_rate, 1e-2));
            report.metrics.insert(format!("{tag} final mu"), last[0]);
            exact_tests.push(exact);
            learned_tests.push(learned);
        }
        if let Some(out) = &options.out {
            fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            write_bundle(&exact_tests, &out.join("test_exact.csv"))?;
            if learned_tests.len() == exact_tests.len() {
                write_bundle(&learned_tests, &out.join("test_learned.csv"))?;
            }
        }
        report.panel("training data phase portraits", "train/exact.csv", "x2", &["x3"]);
        report.panel("learned phase portraits at held-out mu", "test_exact.csv|test_learned.csv", "x2", &["x3"]);
        report.finish(options, outcome.model)
    }
}

struct CylinderStudy;

/// Samples spanning one period of component `c`, measured between upward
/// crossings of its mean; `None` if fewer than two crossings exist.
pub fn first_period_rows(ts: &TimeSeries, c: usize) -> Option<usize> {
    let mean = ts.component(c).sum::<f64>() / ts.len() as f64;
    let values: Vec<f64> = ts.component(c).map(|v| v - mean).collect();
    let ups: Vec<usize> = (1..values.len())
        .filter(|&i| values[i - 1] < 0.0 && values[i] >= 0.0)
        .take(2)
        .collect();
    match ups.as_slice() {
        [a, b] => Some(b - a + 1),
        _ => None,
    }
}

impl Study for CylinderStudy {
    fn name(&self) -> &'static str {
        "cylinder"
    }

    fn run(&self, options: &StudyOptions) -> Result<StudyReport> {
        let source = match &options.data {
            Some(path) => DataSource::file(path),
            None => benchmark_source("meanfield", DatasetOptions::default(), None),
        };
        let from_file = options.data.is_some();
        let spec = options.run_spec(source);
        let clean = spec.source.load()?;
        for ts in &clean {
            if ts.dim() != 3 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    actual: ts.dim(),
                });
            }
        }
        let outcome = run_on_data(&spec, &clean, options.subdir("run").as_deref())?;
        let mut report = StudyReport::new(self.name());
        record_errors(&mut report, &outcome, "");
        match outcome.predicted.first() {
            Some(learned) => {
                let exact = &outcome.exact[0];
                report
                    .checks
                    .push(Check::below("terminal orbit drift", terminal_orbit_drift(learned, 0, 1), 0.05));
                report.metrics.insert("learned terminal radius".into(), terminal_radius(learned, 0, 1));
                report.metrics.insert("exact terminal radius".into(), terminal_radius(exact, 0, 1));
                if !from_file {
                    report.metrics.insert(
                        "surrogate limit-cycle radius".into(),
                        MeanFieldParams::default().limit_cycle_radius(),
                    );
                } else if let Some(rows) = first_period_rows(exact, 0) {
                    for c in 0..3 {
                        let e = crate::experiments::grid::relative_l2_error_window(learned, exact, c, rows)?;
                        report
                            .checks
                            .push(Check::below(format!("first-period relative error x{}", c + 1), e, 2e-1));
                    }
                }
                if let Some(out) = &options.out {
                    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
                    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                        let file = format!("phase_x{}_x{}.csv", a + 1, b + 1);
                        write_phase_portrait(&out.join(&file), exact, learned, a, b)?;
                        let (xa, xb) = (format!("x{}", a + 1), format!("x{}", b + 1));
                        report.panel(
                            &format!("phase portrait {xa}-{xb}"),
                            &file,
                            &format!("exact_{xa}|learned_{xa}"),
                            &[&format!("exact_{xb}"), &format!("learned_{xb}")],
                        );
                    }
                }
            }
            None => report.checks.push(Check::below("terminal orbit drift", f64::NAN, 0.05)),
        }
        trajectory_panels(&mut report, "run", 3);
        report.finish(options, outcome.model)
    }
}

struct GlycolyticStudy;

impl Study for GlycolyticStudy {
    fn name(&self) -> &'static str {
        "glycolytic"
    }

    fn run(&self, options: &StudyOptions) -> Result<StudyReport> {
        let config = match &options.params {
            Some(path) => GlycolyticConfig::load(path)?,
            None => GlycolyticConfig::default(),
        };
        let data_options = DatasetOptions {
            seed: options.seed,
            ..DatasetOptions::default()
        };
        let spec = options.run_spec(benchmark_source("glycolytic", data_options.clone(), options.params.clone()));
        let clean = spec.source.load()?;
        let outcome = run_on_data(&spec, &clean, options.subdir("run").as_deref())?;
        let mut report = StudyReport::new(self.name());
        record_errors(&mut report, &outcome, "");
        report.metrics.insert("samples per trajectory".into(), outcome.exact[0].len() as f64);
        for (c, e) in outcome.metrics.errors.iter().enumerate() {
            report
                .checks
                .push(Check::below(format!("relative error S{}", c + 1), e.unwrap_or(f64::NAN), 2e-1));
        }
        let min_s7 = |ts: &TimeSeries| ts.component(6).fold(f64::INFINITY, f64::min);
        report.checks.push(Check::at_least("exact S7 minimum > 0", min_s7(&outcome.exact[0]), f64::MIN_POSITIVE));
        let learned_min = outcome.predicted.first().map_or(f64::NAN, min_s7);
        report.checks.push(Check::at_least("learned S7 minimum > 0", learned_min, f64::MIN_POSITIVE));

        // Fresh starts drawn from the configured ranges.
        let field = BenchmarkRegistry::default().get("glycolytic")?.field(&DatasetOptions {
            glycolytic: Some(config.clone()),
            ..data_options
        })?;
        let reference = &outcome.exact[0];
        let mut fresh_exact = Vec::new();
        let mut fresh_learned = Vec::new();
        for k in 0..GLYCOLYTIC_FRESH_STARTS {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(options.seed, &[0x0067_6c79, k as u64]));
            let x0 = config.sample_initial_condition(&mut rng);
            let exact = integrate_substepped(&*field, &x0, 0.0, reference.dt(), reference.len() - 1, DEFAULT_SUBSTEPS)?;
            match rollout_like(&outcome.model, &exact, spec.rollout_substeps) {
                Ok(learned) => {
                    for c in 0..7 {
                        report
                            .metrics
                            .insert(format!("fresh{k}_error_S{}", c + 1), relative_l2_error(&learned, &exact, c)?);
                    }
                    fresh_learned.push(learned);
                }
                Err(Error::NonFiniteState { .. }) => {
                    report.metrics.insert(format!("fresh{k}_failed"), 1.0);
                }
                Err(e) => return Err(e),
            }
            fresh_exact.push(exact);
        }
        if let Some(out) = &options.out {
            fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            write_bundle(&fresh_exact, &out.join("fresh_exact.csv"))?;
            if fresh_learned.len() == fresh_exact.len() {
                write_bundle(&fresh_learned, &out.join("fresh_learned.csv"))?;
            }
        }
        trajectory_panels(&mut report, "run", 7);
        for col in state_columns(7) {
            report.panel(
                &format!("{col}(t) from random starts: exact vs learned"),
                "fresh_exact.csv|fresh_learned.csv",
                "t",
                &[&col],
            );
        }
        report.finish(options, outcome.model)
    }
}
