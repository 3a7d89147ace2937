//! Full-batch Adam on the multistep-residual loss.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, mlp_init, MlpModel, Normalization};
use crate::objective::Objective;
use crate::schemes::{scheme_coefficients, Family, MultistepScheme};
use crate::timeseries::TimeSeries;

pub const DEFAULT_ITERS: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub scheme: MultistepScheme,
    pub layer_dims: Vec<usize>,
    pub max_iters: usize,
    pub learning_rate: f64,
    /// When set, the step size decays geometrically from `learning_rate` to
    /// this value over the run; otherwise it stays constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_learning_rate: Option<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Record the loss every `log_every` iterations (plus the final one).
    pub log_every: usize,
    /// Wrap the network in a data-derived standardization.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
}

impl TrainConfig {
    /// Trapezoidal rule, one hidden layer of 256 tanh units, Adam defaults.
    pub fn new(dim: usize) -> Self {
        Self {
            scheme: MultistepScheme::trapezoidal(),
            layer_dims: model::architecture(dim, 1, 256),
            max_iters: DEFAULT_ITERS,
            learning_rate: 1e-3,
            final_learning_rate: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            log_every: 100,
            standardize: false,
            log_path: None,
        }
    }

    pub fn with_scheme(mut self, family: Family, steps: usize) -> Result<Self> {
        self.scheme = scheme_coefficients(family, steps)?;
        Ok(self)
    }

    pub fn with_architecture(mut self, hidden_layers: usize, neurons: usize) -> Self {
        let dim = self.layer_dims[0];
        self.layer_dims = model::architecture(dim, hidden_layers, neurons);
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn with_final_learning_rate(mut self, lr: Option<f64>) -> Self {
        self.final_learning_rate = lr;
        self
    }

    /// Step size used for update `iteration`.
    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        match self.final_learning_rate {
            Some(end) if self.max_iters > 1 => {
                let progress = iteration as f64 / (self.max_iters - 1) as f64;
                self.learning_rate * (end / self.learning_rate).powf(progress)
            }
            _ => self.learning_rate,
        }
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if let Some(end) = self.final_learning_rate {
            if !(end > 0.0 && end.is_finite()) {
                return bad("final_learning_rate must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if self.log_every < 1 {
            return bad("log_every must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_loss: f64,
    /// `(updates applied, loss)` pairs.
    pub loss_history: Vec<(usize, f64)>,
    pub wall_time: f64,
    pub iterations_run: usize,
}

impl TrainReport {
    /// The `(iteration, loss)` entry with the smallest recorded loss.
    pub fn best_entry(&self) -> (usize, f64) {
        self.loss_history
            .iter()
            .copied()
            .fold((0, f64::INFINITY), |best, e| if e.1 < best.1 { e } else { best })
    }
}

/// Adam with bias correction on a flat parameter buffer.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Trains on one trajectory.
pub fn train(config: &TrainConfig, ts: &TimeSeries) -> Result<(MlpModel, TrainReport)> {
    train_multi(config, std::slice::from_ref(ts))
}

/// Trains on several trajectories, minimizing the sum of their losses.
/// Residual windows never straddle two trajectories.
pub fn train_multi(config: &TrainConfig, datasets: &[TimeSeries]) -> Result<(MlpModel, TrainReport)> {
    config.validate()?;
    let first = datasets.first().ok_or(Error::EmptyInput)?;
    for ts in &datasets[1..] {
        if ts.dim() != first.dim() {
            return Err(Error::MixedDims {
                what: "state dimension",
                first: first.dim() as f64,
                other: ts.dim() as f64,
            });
        }
        if ts.dt() != first.dt() {
            return Err(Error::MixedDims {
                what: "time step",
                first: first.dt(),
                other: ts.dt(),
            });
        }
    }
    let dims = &config.layer_dims;
    if dims.len() < 2 {
        return Err(Error::BadDims(dims.clone()));
    }
    let mut objective = Objective::new(&config.scheme, datasets, dims)?;

    let normalization = if config.standardize {
        Some(Normalization::from_data(datasets)?)
    } else {
        None
    };
    let mut model = mlp_init(dims, config.seed)?.with_normalization(normalization)?;

    let params = model.parameter_count();
    let entries = objective.residual_entries();
    if params > 10 * entries {
        log::warn!(
            "{params} parameters for {entries} residual entries; the fit is heavily overparameterized"
        );
    }

    let mut log_file = match &config.log_path {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            writeln!(w, "iteration,loss,elapsed_seconds").map_err(|e| Error::io(path, e))?;
            Some((path.clone(), w))
        }
        None => None,
    };
    let start = Instant::now();
    let mut history = Vec::new();
    let mut record = |iteration: usize, loss: f64, history: &mut Vec<(usize, f64)>| -> Result<()> {
        history.push((iteration, loss));
        let elapsed = start.elapsed().as_secs_f64();
        log::debug!("iter {iteration:>7}  loss {loss:.6e}  {elapsed:.1}s");
        if let Some((path, w)) = log_file.as_mut() {
            writeln!(w, "{iteration},{loss},{elapsed}").map_err(|e| Error::io(path.clone(), e))?;
        }
        Ok(())
    };

    let mut adam = Adam::new(
        params,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
    );
    let mut grad = vec![0.0; params];
    for iteration in 0..config.max_iters {
        let loss = objective.loss_and_gradient(&model, &mut grad);
        if !loss.is_finite() {
            return Err(Error::DivergedLoss { iteration });
        }
        if iteration % config.log_every == 0 {
            record(iteration, loss, &mut history)?;
        }
        adam.lr = config.learning_rate_at(iteration);
        adam.update(model.params_mut(), &grad);
    }
    let final_loss = objective.loss(&model);
    if !final_loss.is_finite() || model.parameters().as_slice().iter().any(|p| !p.is_finite()) {
        return Err(Error::DivergedLoss {
            iteration: config.max_iters,
        });
    }
    record(config.max_iters, final_loss, &mut history)?;
    if let Some((path, mut w)) = log_file {
        w.flush().map_err(|e| Error::io(path, e))?;
    }

    Ok((
        model,
        TrainReport {
            final_loss,
            loss_history: history,
            wall_time: start.elapsed().as_secs_f64(),
            iterations_run: config.max_iters,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;

    fn circle(len: usize, dt: f64) -> TimeSeries {
        let states: Vec<f64> = (0..len)
            .flat_map(|n| {
                let t = n as f64 * dt;
                [t.cos(), -t.sin()]
            })
            .collect();
        TimeSeries::new(0.0, dt, 2, states).unwrap()
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(2, 0.1, 0.9, 0.999, 1e-8);
        let mut p = vec![1.0, -1.0];
        adam.update(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn learning_rate_schedule() {
        let constant = TrainConfig::new(2).with_iters(11);
        assert_eq!(constant.learning_rate_at(7), 1e-3);
        let decayed = constant.with_final_learning_rate(Some(1e-5));
        assert_eq!(decayed.learning_rate_at(0), 1e-3);
        assert!((decayed.learning_rate_at(5) - 1e-4).abs() < 1e-18);
        assert!((decayed.learning_rate_at(10) - 1e-5).abs() < 1e-18);
        assert!(decayed.with_final_learning_rate(Some(0.0)).validate().is_err());
    }

    #[test]
    fn single_iteration_bookkeeping() {
        let ts = circle(50, 0.05);
        let config = TrainConfig::new(2).with_architecture(1, 8).with_iters(1);
        let (_, report) = train(&config, &ts).unwrap();
        assert_eq!(report.iterations_run, 1);
        assert_eq!(report.loss_history.len(), 2);
        assert_eq!(report.loss_history[0].0, 0);
        assert_eq!(report.loss_history[1], (1, report.final_loss));

        let mut config = config.with_iters(25);
        config.log_every = 10;
        let (_, report) = train(&config, &ts).unwrap();
        let its: Vec<usize> = report.loss_history.iter().map(|e| e.0).collect();
        assert_eq!(its, vec![0, 10, 20, 25]);
        assert!(report.loss_history.iter().all(|e| e.1 >= 0.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let ts = circle(80, 0.05);
        let config = TrainConfig::new(2).with_architecture(1, 16).with_iters(200).with_seed(3);
        let (a, ra) = train(&config, &ts).unwrap();
        let (b, rb) = train(&config, &ts).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.loss_history, rb.loss_history);
    }

    #[test]
    fn constant_data_learns_zero_field() {
        let ts = TimeSeries::new(0.0, 0.01, 2, [0.7, -0.4].repeat(100)).unwrap();
        let config = TrainConfig::new(2).with_architecture(1, 16).with_iters(3000);
        let (model, _) = train(&config, &ts).unwrap();
        let f = model.eval_vec(&[0.7, -0.4]);
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "|f| = {norm}");
    }

    #[test]
    fn input_errors() {
        let ts = circle(10, 0.1);
        let config = TrainConfig::new(3);
        assert!(matches!(train(&config, &ts), Err(Error::DimensionMismatch { .. })));
        let config = TrainConfig::new(2).with_scheme(Family::Bdf, 5).unwrap();
        let short = circle(5, 0.1);
        assert!(matches!(train(&config, &short), Err(Error::InsufficientSamples { .. })));
        let three = TimeSeries::new(0.0, 0.1, 3, vec![0.0; 30]).unwrap();
        assert!(matches!(
            train_multi(&TrainConfig::new(2), &[ts.clone(), three]),
            Err(Error::MixedDims { .. })
        ));
        let mut bad = TrainConfig::new(2);
        bad.learning_rate = 0.0;
        assert!(matches!(train(&bad, &ts), Err(Error::Config(_))));
    }

    #[test]
    fn huge_learning_rate_is_reported() {
        let ts = circle(40, 0.05);
        let mut config = TrainConfig::new(2).with_architecture(1, 8).with_iters(50);
        config.learning_rate = 1e300;
        match train(&config, &ts) {
            Err(Error::DivergedLoss { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn log_file_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let ts = circle(40, 0.05);
        let mut config = TrainConfig::new(2).with_architecture(1, 8).with_iters(20);
        config.log_every = 5;
        config.log_path = Some(path.clone());
        let (_, report) = train(&config, &ts).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iteration,loss,elapsed_seconds");
        assert_eq!(lines.len(), report.loss_history.len() + 1);
        let last: Vec<&str> = lines.last().unwrap().split(',').collect();
        assert_eq!(last[0], "20");
        assert_eq!(last[1].parse::<f64>().unwrap(), report.final_loss);
    }
}
