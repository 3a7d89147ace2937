//! End-to-end runs: train on a benchmark or a file, roll out, score, sweep.

mod grid;
mod run;
mod seeds;
mod studies;
mod sweep;

pub use grid::{
    pooled_relative_l2_error, relative_l2_error, relative_l2_error_until, relative_l2_error_window, ErrorGrid,
};
pub use run::{
    prepare_data, run_identification, run_on_data, train_on_data, write_bundle, write_json, DataSource, ResolvedConfig, RunMetrics, RunOutcome, RunSpec,
};
pub use seeds::{derive_seed, SeedPolicy};
pub use studies::{
    first_period_rows, run_study, sign_changes, terminal_orbit_drift, terminal_radius, Check, Panel, Study,
    StudyOptions, StudyRegistry, StudyReport, HOPF_SUBSAMPLE, HOPF_TEST_STARTS, LORENZ_FINAL_LEARNING_RATE, LORENZ_ITERS, LORENZ_WINDOW,
};
pub use sweep::{
    cell_spec, default_steps, parse_percent, run_sweep, sweep_architecture, sweep_dt_by_noise, sweep_scheme_by_steps,
    CellRecord, SweepConfig, SweepKind, SweepResult, DEFAULT_DT_FACTORS, DEFAULT_LAYERS, DEFAULT_NEURONS,
    DEFAULT_NOISE_LABELS,
};
