use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::write_error_grid;
use crate::error::{Error, Result};
use crate::experiments::grid::ErrorGrid;
use crate::experiments::run::{run_on_data, write_json, RunSpec};
use crate::experiments::seeds::SeedPolicy;
use crate::model;
use crate::schemes::{Family, MAX_STEPS};

pub const DEFAULT_DT_FACTORS: [usize; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_NOISE_LABELS: [&str; 3] = ["0.00%", "0.01%", "0.02%"];
pub const DEFAULT_LAYERS: [usize; 3] = [1, 2, 3];
pub const DEFAULT_NEURONS: [usize; 3] = [64, 128, 256];

pub fn default_steps() -> Vec<usize> {
    (1..=MAX_STEPS).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Scheme,
    DtNoise,
    Arch,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Scheme => "scheme",
            SweepKind::DtNoise => "dtnoise",
            SweepKind::Arch => "arch",
        })
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scheme" => Ok(SweepKind::Scheme),
            "dtnoise" => Ok(SweepKind::DtNoise),
            "arch" => Ok(SweepKind::Arch),
            _ => Err(Error::Unknown {
                kind: "sweep",
                name: s.to_string(),
            }),
        }
    }
}

/// Parses a percent label such as `"0.01%"` into a fraction (`0.0001`).
pub fn parse_percent(label: &str) -> Result<f64> {
    let bad = || Error::Config(format!("`{label}` is not a percentage"));
    let number = label.trim().strip_suffix('%').ok_or_else(bad)?;
    let value: f64 = number.trim().parse().map_err(|_| bad())?;
    if !(value >= 0.0 && value.is_finite()) {
        return Err(bad());
    }
    Ok(value / 100.0)
}

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: RunSpec,
    pub workers: usize,
    pub seed_policy: SeedPolicy,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(base: RunSpec) -> Self {
        Self {
            base,
            workers: 1,
            seed_policy: SeedPolicy::PerCell,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub row: usize,
    pub col: usize,
    pub row_key: String,
    pub col_key: String,
    pub seed: u64,
    pub parameter_count: usize,
    pub errors: Vec<Option<f64>>,
    pub failure: Option<String>,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub config: SweepConfig,
    /// One grid per state component.
    pub grids: Vec<ErrorGrid>,
    pub cells: Vec<CellRecord>,
}

struct Layout {
    kind: SweepKind,
    row_label: &'static str,
    col_label: &'static str,
    row_keys: Vec<String>,
    col_keys: Vec<String>,
}

/// Rows are scheme families, columns the number of steps.
pub fn sweep_scheme_by_steps(config: &SweepConfig, families: &[Family], steps: &[usize]) -> Result<SweepResult> {
    let layout = Layout {
        kind: SweepKind::Scheme,
        row_label: "scheme",
        col_label: "M",
        row_keys: families.iter().map(|f| f.display_name().to_string()).collect(),
        col_keys: steps.iter().map(usize::to_string).collect(),
    };
    run_grid(config, layout, |spec, r, c| {
        spec.family = families[r];
        spec.steps = steps[c];
        Ok(())
    })
}

/// Rows are sampling steps (as multiples of the data step), columns noise
/// levels given as percent labels. All cells share one clean trajectory.
pub fn sweep_dt_by_noise(config: &SweepConfig, dt_factors: &[usize], noise_labels: &[&str]) -> Result<SweepResult> {
    let noise: Vec<f64> = noise_labels.iter().map(|l| parse_percent(l)).collect::<Result<_>>()?;
    let clean_dt = config.base.source.load()?.first().ok_or(Error::EmptyInput)?.dt();
    let base_factor = config.base.dt_subsample;
    let layout = Layout {
        kind: SweepKind::DtNoise,
        row_label: "dt",
        col_label: "noise",
        row_keys: dt_factors
            .iter()
            .map(|&k| format!("{}", round_sig(clean_dt * (k * base_factor) as f64)))
            .collect(),
        col_keys: noise_labels.iter().map(|s| s.to_string()).collect(),
    };
    run_grid(config, layout, |spec, r, c| {
        spec.dt_subsample = dt_factors[r] * base_factor;
        spec.noise = noise[c];
        Ok(())
    })
}

/// Rows are hidden-layer counts, columns hidden widths.
pub fn sweep_architecture(config: &SweepConfig, layers: &[usize], neurons: &[usize]) -> Result<SweepResult> {
    let layout = Layout {
        kind: SweepKind::Arch,
        row_label: "layers",
        col_label: "neurons",
        row_keys: layers.iter().map(usize::to_string).collect(),
        col_keys: neurons.iter().map(usize::to_string).collect(),
    };
    run_grid(config, layout, |spec, r, c| {
        spec.hidden_layers = layers[r];
        spec.neurons = neurons[c];
        Ok(())
    })
}

/// The full default grid of the given kind.
pub fn run_sweep(kind: SweepKind, config: &SweepConfig) -> Result<SweepResult> {
    match kind {
        SweepKind::Scheme => sweep_scheme_by_steps(config, &Family::ALL, &default_steps()),
        SweepKind::DtNoise => sweep_dt_by_noise(config, &DEFAULT_DT_FACTORS, &DEFAULT_NOISE_LABELS),
        SweepKind::Arch => sweep_architecture(config, &DEFAULT_LAYERS, &DEFAULT_NEURONS),
    }
}

/// Spec of cell `(row, col)` as the sweep would run it.
pub fn cell_spec(config: &SweepConfig, base: &RunSpec, row: usize, col: usize) -> RunSpec {
    let mut spec = base.clone();
    spec.seed = config.seed_policy.cell_seed(config.base.seed, row, col);
    spec
}

fn round_sig(v: f64) -> f64 {
    let scale = 10f64.powi(9 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}

fn cell_dir(out: &Path, row: usize, col: usize) -> PathBuf {
    out.join("cells").join(format!("r{row}_c{col}"))
}

fn run_grid(
    config: &SweepConfig,
    layout: Layout,
    apply: impl Fn(&mut RunSpec, usize, usize) -> Result<()> + Sync,
) -> Result<SweepResult> {
    config.base.validate()?;
    if layout.row_keys.is_empty() || layout.col_keys.is_empty() {
        return Err(Error::EmptyInput);
    }
    let clean = config.base.source.load()?;
    let dim = clean.first().ok_or(Error::EmptyInput)?.dim();
    let (rows, cols) = (layout.row_keys.len(), layout.col_keys.len());

    let mut specs = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut spec = cell_spec(config, &config.base, r, c);
            apply(&mut spec, r, c)?;
            specs.push((r, c, spec));
        }
    }
    if let Some(out) = &config.out {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_json(&out.join("config.json"), config)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let cells: Vec<CellRecord> = pool.install(|| {
        specs
            .par_iter()
            .map(|(r, c, spec)| {
                let dir = config.out.as_ref().map(|out| cell_dir(out, *r, *c));
                let mut record = CellRecord {
                    row: *r,
                    col: *c,
                    row_key: layout.row_keys[*r].clone(),
                    col_key: layout.col_keys[*c].clone(),
                    seed: spec.seed,
                    parameter_count: model::parameter_count(&model::architecture(
                        dim,
                        spec.hidden_layers,
                        spec.neurons,
                    )),
                    errors: vec![None; dim],
                    failure: None,
                    final_loss: None,
                };
                info!(
                    "cell {}={} {}={} ({} parameters)",
                    layout.row_label, record.row_key, layout.col_label, record.col_key, record.parameter_count
                );
                match run_on_data(spec, &clean, dir.as_deref()) {
                    Ok(outcome) => {
                        record.errors = outcome.metrics.errors;
                        record.failure = outcome.metrics.failure;
                        record.final_loss = Some(outcome.metrics.final_loss);
                    }
                    Err(e) => {
                        warn!("cell ({r}, {c}) failed: {e}");
                        record.failure = Some(e.to_string());
                    }
                }
                record
            })
            .collect()
    });

    let grids: Vec<ErrorGrid> = (0..dim)
        .map(|component| {
            let mut grid = ErrorGrid::new(
                layout.row_label,
                layout.col_label,
                layout.row_keys.clone(),
                layout.col_keys.clone(),
            );
            for cell in &cells {
                grid.set(cell.row, cell.col, cell.errors[component]);
            }
            grid
        })
        .collect();
    if let Some(out) = &config.out {
        for (component, grid) in grids.iter().enumerate() {
            write_error_grid(grid, out.join(format!("grid_x{}.csv", component + 1)))?;
        }
    }
    let result = SweepResult {
        kind: layout.kind,
        config: config.clone(),
        grids,
        cells,
    };
    if let Some(out) = &config.out {
        write_json(&out.join("sweep.json"), &result)?;
    }
    Ok(result)
}
