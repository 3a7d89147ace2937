//! Reference systems and their standard training data.
//!
//! Every benchmark implements [`Benchmark`] and is looked up by name through
//! [`BenchmarkRegistry`], so experiments and the CLI select them at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FnField, VectorField};
use crate::integrators::{integrate_substepped, DEFAULT_SUBSTEPS};
use crate::timeseries::TimeSeries;

/// Shipped glycolytic constants and initial-condition ranges.
pub const GLYCOLYTIC_DEFAULTS: &str = include_str!("../config/glycolytic.toml");

/// `dx/dt = -0.1 x^3 + 2 y^3`, `dy/dt = -2 x^3 - 0.1 y^3`.
pub fn cubic_oscillator() -> impl VectorField {
    FnField::new(2, |s: &[f64], out: &mut [f64]| {
        let (x3, y3) = (s[0].powi(3), s[1].powi(3));
        out[0] = -0.1 * x3 + 2.0 * y3;
        out[1] = -2.0 * x3 - 0.1 * y3;
    })
}

/// Lorenz system with sigma = 10, rho = 28, beta = 8/3.
pub fn lorenz() -> impl VectorField {
    FnField::new(3, |s: &[f64], out: &mut [f64]| {
        let (x, y, z) = (s[0], s[1], s[2]);
        out[0] = 10.0 * (y - x);
        out[1] = x * (28.0 - z) - y;
        out[2] = x * y - (8.0 / 3.0) * z;
    })
}

/// Hopf normal form with the parameter carried as a constant state, ordered
/// `(mu, x, y)`.
pub fn hopf_augmented() -> impl VectorField {
    FnField::new(3, |s: &[f64], out: &mut [f64]| {
        let (mu, x, y) = (s[0], s[1], s[2]);
        let r2 = x * x + y * y;
        out[0] = 0.0;
        out[1] = mu * x + y - x * r2;
        out[2] = -x + mu * y - y * r2;
    })
}

/// Mean-field model of vortex shedding: an unstable focus whose trajectories
/// spiral out onto the limit cycle `x^2 + y^2 = -mu / a`, `z = x^2 + y^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldParams {
    pub mu: f64,
    pub omega: f64,
    pub a: f64,
    pub lambda: f64,
}

impl Default for MeanFieldParams {
    fn default() -> Self {
        Self {
            mu: 0.1,
            omega: 1.0,
            a: -0.1,
            lambda: 10.0,
        }
    }
}

impl MeanFieldParams {
    pub fn limit_cycle_radius(&self) -> f64 {
        (-self.mu / self.a).sqrt()
    }
}

pub fn mean_field(p: MeanFieldParams) -> impl VectorField {
    FnField::new(3, move |s: &[f64], out: &mut [f64]| {
        let (x, y, z) = (s[0], s[1], s[2]);
        out[0] = p.mu * x - p.omega * y + p.a * x * z;
        out[1] = p.omega * x + p.mu * y + p.a * y * z;
        out[2] = -p.lambda * (z - x * x - y * y);
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlycolyticParams {
    #[serde(rename = "J0")]
    pub j0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k: f64,
    pub kappa: f64,
    #[serde(rename = "K1")]
    pub big_k1: f64,
    pub q: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub psi: f64,
}

impl GlycolyticParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.j0, self.k1, self.k2, self.k3, self.k4, self.k5, self.k6, self.k, self.kappa,
            self.big_k1, self.q, self.n, self.a, self.psi,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("glycolytic constants must be positive".into()));
        }
        if self.q < 1.0 {
            return Err(Error::Config("glycolytic exponent q must be >= 1".into()));
        }
        Ok(())
    }
}

/// Constants, sampling ranges and optional fixed start for the glycolytic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlycolyticConfig {
    pub parameters: GlycolyticParams,
    pub initial_ranges: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub initial_condition: Option<Vec<f64>>,
}

impl Default for GlycolyticConfig {
    fn default() -> Self {
        Self::from_toml(GLYCOLYTIC_DEFAULTS).expect("shipped glycolytic config parses")
    }
}

impl GlycolyticConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| text[..s.start].lines().count()),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.parameters.validate()?;
        for i in 1..=7 {
            let key = format!("S{i}");
            match self.initial_ranges.get(&key) {
                Some([lo, hi]) if lo.is_finite() && hi.is_finite() && lo <= hi => {}
                _ => return Err(Error::Config(format!("missing or invalid range for {key}"))),
            }
        }
        if let Some(ic) = &self.initial_condition {
            if ic.len() != 7 || ic.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("initial_condition needs 7 finite values".into()));
            }
        }
        Ok(())
    }

    /// Uniform draw from the configured ranges.
    pub fn sample_initial_condition(&self, rng: &mut impl Rng) -> Vec<f64> {
        (1..=7)
            .map(|i| {
                let [lo, hi] = self.initial_ranges[&format!("S{i}")];
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..hi)
                }
            })
            .collect()
    }
}

/// Seven-species glycolytic oscillator.
///
/// The `S3 -> S4` flux is `k3 S3 (A - S6)` wherever it appears; with
/// `(N - S6)` in the `S3` balance the system blows up within a fraction of a
/// time unit from every start in the shipped ranges.
pub fn glycolytic(p: GlycolyticParams) -> impl VectorField {
    FnField::new(7, move |s: &[f64], out: &mut [f64]| {
        let (s1, s2, s3, s4, s5, s6, s7) = (s[0], s[1], s[2], s[3], s[4], s[5], s[6]);
        let uptake = p.k1 * s1 * s6 / (1.0 + (s6 / p.big_k1).powf(p.q));
        let v2 = p.k2 * s2 * (p.n - s5);
        let v6 = p.k6 * s2 * s5;
        let v3 = p.k3 * s3 * (p.a - s6);
        let v4 = p.k4 * s4 * s5;
        let exchange = p.kappa * (s4 - s7);
        out[0] = p.j0 - uptake;
        out[1] = 2.0 * uptake - v2 - v6;
        out[2] = v2 - v3;
        out[3] = v3 - v4 - exchange;
        out[4] = v2 - v4 - v6;
        out[5] = -2.0 * uptake + 2.0 * v3 - p.k5 * s6;
        out[6] = p.psi * exchange - p.k * s7;
    })
}

/// Adds Gaussian noise with per-component standard deviation
/// `level * std(clean component)`. A zero level returns the input unchanged.
pub fn add_noise(ts: &TimeSeries, level: f64, seed: u64) -> Result<TimeSeries> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::Config(format!("noise level must be >= 0, got {level}")));
    }
    if level == 0.0 {
        return Ok(ts.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma: Vec<f64> = ts.component_std().into_iter().map(|s| s * level).collect();
    let dim = ts.dim();
    let mut states = ts.states().to_vec();
    for row in states.chunks_exact_mut(dim) {
        for (v, &s) in row.iter_mut().zip(&sigma) {
            let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(&mut rng);
            *v += s * z;
        }
    }
    TimeSeries::new(ts.t0(), ts.dt(), dim, states)
}

/// Training data of a benchmark: one trajectory or a bundle.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Single(TimeSeries),
    Bundle(Vec<TimeSeries>),
}

impl Dataset {
    pub fn into_vec(self) -> Vec<TimeSeries> {
        match self {
            Dataset::Single(ts) => vec![ts],
            Dataset::Bundle(v) => v,
        }
    }

    pub fn trajectories(&self) -> &[TimeSeries] {
        match self {
            Dataset::Single(ts) => std::slice::from_ref(ts),
            Dataset::Bundle(v) => v,
        }
    }

    pub fn single(self) -> Result<TimeSeries> {
        match self {
            Dataset::Single(ts) => Ok(ts),
            Dataset::Bundle(mut v) if v.len() == 1 => Ok(v.remove(0)),
            Dataset::Bundle(_) => Err(Error::Config("expected a single trajectory".into())),
        }
    }
}

/// Knobs shared by every dataset recipe. `None` keeps the benchmark's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub initial_condition: Option<Vec<f64>>,
    pub substeps: Option<usize>,
    pub seed: u64,
    #[serde(skip)]
    pub glycolytic: Option<GlycolyticConfig>,
}

/// A named reference system.
pub trait Benchmark: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn field(&self, options: &DatasetOptions) -> Result<Box<dyn VectorField>>;

    fn default_dt(&self) -> f64 {
        0.01
    }

    fn default_horizon(&self) -> f64;

    /// Initial condition of the standard trajectory.
    fn initial_condition(&self, options: &DatasetOptions) -> Result<Vec<f64>>;

    /// Generates the standard training data.
    fn dataset(&self, options: &DatasetOptions) -> Result<Dataset> {
        let x0 = match &options.initial_condition {
            Some(x0) => x0.clone(),
            None => self.initial_condition(options)?,
        };
        simulate(&*self.field(options)?, &x0, self.default_dt(), self.default_horizon(), options)
    }
}

/// Integrates one trajectory honoring the option overrides.
fn simulate(
    f: &dyn VectorField,
    x0: &[f64],
    default_dt: f64,
    default_horizon: f64,
    options: &DatasetOptions,
) -> Result<Dataset> {
    let dt = options.dt.unwrap_or(default_dt);
    let horizon = options.horizon.unwrap_or(default_horizon);
    let steps = (horizon / dt).round() as usize;
    let substeps = options.substeps.unwrap_or(DEFAULT_SUBSTEPS);
    Ok(Dataset::Single(integrate_substepped(f, x0, 0.0, dt, steps, substeps)?))
}

struct CubicOscillator;

impl Benchmark for CubicOscillator {
    fn name(&self) -> &'static str {
        "oscillator"
    }

    fn dim(&self) -> usize {
        2
    }

    fn field(&self, _: &DatasetOptions) -> Result<Box<dyn VectorField>> {
        Ok(Box::new(cubic_oscillator()))
    }

    fn default_horizon(&self) -> f64 {
        25.0
    }

    fn initial_condition(&self, _: &DatasetOptions) -> Result<Vec<f64>> {
        Ok(vec![2.0, 0.0])
    }
}

struct Lorenz;

impl Benchmark for Lorenz {
    fn name(&self) -> &'static str {
        "lorenz"
    }

    fn dim(&self) -> usize {
        3
    }

    fn field(&self, _: &DatasetOptions) -> Result<Box<dyn VectorField>> {
        Ok(Box::new(lorenz()))
    }

    fn default_horizon(&self) -> f64 {
        25.0
    }

    fn initial_condition(&self, _: &DatasetOptions) -> Result<Vec<f64>> {
        Ok(vec![-8.0, 7.0, 27.0])
    }
}

/// Training grid of the Hopf bundle: every `mu` is started once inside and
/// once outside its limit cycle, from `(r, 0)`.
pub const HOPF_TRAIN_MU: [f64; 7] = [-0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5];
pub const HOPF_TRAIN_RADII: [f64; 2] = [0.1, 1.0];

struct Hopf;

impl Benchmark for Hopf {
    fn name(&self) -> &'static str {
        "hopf"
    }

    fn dim(&self) -> usize {
        3
    }

    fn field(&self, _: &DatasetOptions) -> Result<Box<dyn VectorField>> {
        Ok(Box::new(hopf_augmented()))
    }

    fn default_horizon(&self) -> f64 {
        25.0
    }

    fn initial_condition(&self, _: &DatasetOptions) -> Result<Vec<f64>> {
        Ok(vec![HOPF_TRAIN_MU[0], HOPF_TRAIN_RADII[0], 0.0])
    }

    fn dataset(&self, options: &DatasetOptions) -> Result<Dataset> {
        let f = hopf_augmented();
        let (dt, horizon) = (self.default_dt(), self.default_horizon());
        if let Some(x0) = &options.initial_condition {
            return simulate(&f, x0, dt, horizon, options);
        }
        let mut bundle = Vec::new();
        for &mu in &HOPF_TRAIN_MU {
            for &r in &HOPF_TRAIN_RADII {
                bundle.push(simulate(&f, &[mu, r, 0.0], dt, horizon, options)?.single()?);
            }
        }
        Ok(Dataset::Bundle(bundle))
    }
}

struct Glycolytic;

impl Glycolytic {
    fn config(options: &DatasetOptions) -> GlycolyticConfig {
        options.glycolytic.clone().unwrap_or_default()
    }
}

impl Benchmark for Glycolytic {
    fn name(&self) -> &'static str {
        "glycolytic"
    }

    fn dim(&self) -> usize {
        7
    }

    fn field(&self, options: &DatasetOptions) -> Result<Box<dyn VectorField>> {
        let config = Self::config(options);
        config.validate()?;
        Ok(Box::new(glycolytic(config.parameters)))
    }

    fn default_horizon(&self) -> f64 {
        10.0
    }

    fn initial_condition(&self, options: &DatasetOptions) -> Result<Vec<f64>> {
        let config = Self::config(options);
        Ok(match config.initial_condition {
            Some(ic) => ic,
            None => config.sample_initial_condition(&mut ChaCha8Rng::seed_from_u64(options.seed)),
        })
    }
}

struct MeanField;

impl Benchmark for MeanField {
    fn name(&self) -> &'static str {
        "meanfield"
    }

    fn dim(&self) -> usize {
        3
    }

    fn field(&self, _: &DatasetOptions) -> Result<Box<dyn VectorField>> {
        Ok(Box::new(mean_field(MeanFieldParams::default())))
    }

    fn default_dt(&self) -> f64 {
        0.02
    }

    fn default_horizon(&self) -> f64 {
        60.0
    }

    fn initial_condition(&self, _: &DatasetOptions) -> Result<Vec<f64>> {
        Ok(vec![0.1, 0.0, 0.0])
    }
}

/// Name-indexed set of benchmarks.
pub struct BenchmarkRegistry {
    entries: BTreeMap<&'static str, Box<dyn Benchmark>>,
}

impl BenchmarkRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, benchmark: Box<dyn Benchmark>) {
        self.entries.insert(benchmark.name(), benchmark);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Benchmark> {
        let key = canonical_name(name);
        self.entries
            .get(key.as_str())
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "dataset",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl Default for BenchmarkRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(CubicOscillator));
        r.register(Box::new(Lorenz));
        r.register(Box::new(Hopf));
        r.register(Box::new(Glycolytic));
        r.register(Box::new(MeanField));
        r
    }
}

impl fmt::Debug for BenchmarkRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

fn canonical_name(name: &str) -> String {
    let lower = name.to_ascii_lowercase().replace(['-', '_', ' '], "");
    match lower.as_str() {
        "cubicoscillator" | "cubic" | "oscillator" => "oscillator".into(),
        "glycolyticoscillator" => "glycolytic".into(),
        "cylinder" | "cylindersurrogate" => "meanfield".into(),
        _ => lower,
    }
}

/// Standard data of the benchmark called `name`.
pub fn standard_dataset(name: &str, options: &DatasetOptions) -> Result<Dataset> {
    BenchmarkRegistry::default().get(name)?.dataset(options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(f: &dyn VectorField, x: &[f64]) -> Vec<f64> {
        f.eval_vec(x)
    }

    #[test]
    fn oscillator_values() {
        let f = cubic_oscillator();
        assert_eq!(eval(&f, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(eval(&f, &[2.0, 0.0]), vec![-0.8, -16.0]);
        let v = eval(&f, &[1.0, 1.0]);
        assert!((v[0] - 1.9).abs() < 1e-15 && (v[1] + 2.1).abs() < 1e-15);
    }

    #[test]
    fn lorenz_values() {
        let f = lorenz();
        assert_eq!(eval(&f, &[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(eval(&f, &[-8.0, 7.0, 27.0]), vec![150.0, -15.0, -128.0]);
        let r = 72f64.sqrt();
        assert!(eval(&f, &[r, r, 27.0]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn hopf_values() {
        let f = hopf_augmented();
        for mu in [-0.3, 0.0, 0.7] {
            assert_eq!(eval(&f, &[mu, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        }
        assert_eq!(eval(&f, &[0.5, 1.0, 0.0]), vec![0.0, -0.5, -1.0]);
        let mu: f64 = 0.36;
        for theta in [0.0, 0.7, 2.0, 4.5] {
            let (x, y) = (mu.sqrt() * f64::cos(theta), mu.sqrt() * f64::sin(theta));
            let v = eval(&f, &[mu, x, y]);
            assert!((x * v[1] + y * v[2]).abs() < 1e-14);
        }
    }

    #[test]
    fn hopf_parameter_rate_is_zero() {
        use rand::Rng;
        let f = hopf_augmented();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert_eq!(eval(&f, &x)[0], 0.0);
        }
    }

    #[test]
    fn mean_field_cycle_is_invariant() {
        let p = MeanFieldParams::default();
        let f = mean_field(p);
        let r = p.limit_cycle_radius();
        let v = eval(&f, &[r, 0.0, r * r]);
        // Purely tangential motion on the cycle.
        assert!(v[0].abs() < 1e-15 && v[2].abs() < 1e-14);
        assert!((v[1] - p.omega * r).abs() < 1e-15);
    }

    /// Independent transcription of the glycolytic right-hand side.
    fn glycolytic_reference(p: &GlycolyticParams, s: &[f64]) -> Vec<f64> {
        let [s1, s2, s3, s4, s5, s6, s7] = [s[0], s[1], s[2], s[3], s[4], s[5], s[6]];
        let hill = 1.0 + (s6 / p.big_k1).powf(p.q);
        vec![
            p.j0 - (p.k1 * s1 * s6) / hill,
            2.0 * (p.k1 * s1 * s6) / hill - p.k2 * s2 * (p.n - s5) - p.k6 * s2 * s5,
            p.k2 * s2 * (p.n - s5) - p.k3 * s3 * (p.a - s6),
            p.k3 * s3 * (p.a - s6) - p.k4 * s4 * s5 - p.kappa * (s4 - s7),
            p.k2 * s2 * (p.n - s5) - p.k4 * s4 * s5 - p.k6 * s2 * s5,
            -2.0 * (p.k1 * s1 * s6) / hill + 2.0 * p.k3 * s3 * (p.a - s6) - p.k5 * s6,
            p.psi * p.kappa * (s4 - s7) - p.k * s7,
        ]
    }

    #[test]
    fn glycolytic_matches_reference_transcription() {
        let config = GlycolyticConfig::default();
        let p = config.parameters;
        let f = glycolytic(p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s: Vec<f64> = (0..7).map(|_| rng.gen_range(0.01..3.0)).collect();
            let a = eval(&f, &s);
            let b = glycolytic_reference(&p, &s);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn glycolytic_special_states() {
        let p = GlycolyticConfig::default().parameters;
        let f = glycolytic(p);
        assert_eq!(eval(&f, &[0.0; 7])[0], p.j0);
        let v = eval(&f, &[0.3, 0.2, 0.1, 0.08, 0.1, 0.5, 0.08]);
        assert!((v[6] + p.k * 0.08).abs() < 1e-15);
    }

    #[test]
    fn shipped_glycolytic_config() {
        let config = GlycolyticConfig::default();
        assert_eq!(config.parameters.j0, 2.5);
        assert_eq!(config.parameters.q, 4.0);
        assert_eq!(config.initial_ranges.len(), 7);
        let mut bad = config.clone();
        bad.parameters.q = 0.5;
        assert!(bad.validate().is_err());
        assert!(GlycolyticConfig::from_toml("[parameters]\nJ0 = 1.0\n").is_err());
    }

    #[test]
    fn noise_level_zero_is_identity() {
        let ts = TimeSeries::new(0.0, 0.1, 2, vec![1.0, 2.0, 3.0, 5.0, 4.0, 1.0]).unwrap();
        let out = add_noise(&ts, 0.0, 4).unwrap();
        assert_eq!(ts, out);
        assert!(add_noise(&ts, -0.1, 4).is_err());
    }

    #[test]
    fn noise_is_seeded_and_scaled() {
        let clean = standard_dataset("oscillator", &DatasetOptions::default())
            .unwrap()
            .single()
            .unwrap();
        assert_eq!(clean.len(), 2501);
        let level = 0.01;
        let a = add_noise(&clean, level, 11).unwrap();
        let b = add_noise(&clean, level, 11).unwrap();
        assert_eq!(a, b);
        let std = clean.component_std();
        for c in 0..2 {
            let diff: Vec<f64> = a.component(c).zip(clean.component(c)).map(|(x, y)| x - y).collect();
            let n = diff.len() as f64;
            let mean = diff.iter().sum::<f64>() / n;
            let sd = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!((sd / (level * std[c]) - 1.0).abs() < 0.05, "component {c}: {sd}");
        }
    }

    #[test]
    fn standard_datasets_have_expected_shapes() {
        let opts = DatasetOptions::default();
        let osc = standard_dataset("CubicOscillator", &opts).unwrap().single().unwrap();
        assert_eq!((osc.len(), osc.dim()), (2501, 2));
        assert_eq!(osc.row(0), &[2.0, 0.0]);
        let lor = standard_dataset("lorenz", &opts).unwrap().single().unwrap();
        assert_eq!(lor.row(0), &[-8.0, 7.0, 27.0]);
        assert_eq!(lor.len(), 2501);
        let gly = standard_dataset("glycolytic", &opts).unwrap().single().unwrap();
        assert_eq!((gly.len(), gly.dim()), (1001, 7));
        let hopf = standard_dataset("hopf", &opts).unwrap().into_vec();
        assert_eq!(hopf.len(), HOPF_TRAIN_MU.len() * HOPF_TRAIN_RADII.len());
        for ts in &hopf {
            assert_eq!(ts.len(), 2501);
            assert!(ts.component(0).all(|mu| mu == ts.row(0)[0]));
        }
        assert!(matches!(
            standard_dataset("navier-stokes", &opts),
            Err(Error::Unknown { .. })
        ));
    }

    #[test]
    fn glycolytic_start_is_seeded_and_in_range() {
        let b = BenchmarkRegistry::default();
        let g = b.get("glycolytic").unwrap();
        let opts = DatasetOptions {
            seed: 3,
            ..Default::default()
        };
        let a = g.initial_condition(&opts).unwrap();
        assert_eq!(a, g.initial_condition(&opts).unwrap());
        let ranges = GlycolyticConfig::default().initial_ranges;
        for (i, v) in a.iter().enumerate() {
            let [lo, hi] = ranges[&format!("S{}", i + 1)];
            assert!(*v >= lo && *v <= hi);
        }
    }
}
