//! Identification of autonomous dynamical systems from sampled trajectories.
//!
//! A neural network `f` is fitted so that observed snapshots satisfy a linear
//! multistep relation; the learned field can then be integrated forward.

pub mod benchmarks;
pub mod dataio;
pub mod error;
pub mod experiments;
pub mod field;
pub mod integrators;
pub mod model;
pub mod objective;
pub mod schemes;
pub mod timeseries;
pub mod training;

pub use error::{Error, Result};
pub use field::VectorField;
pub use model::{mlp_init, MlpModel, ParameterVector};
pub use schemes::{scheme_coefficients, Family, MultistepScheme};
pub use timeseries::{validate_timeseries, TimeSeries};
