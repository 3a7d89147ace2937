//! Uniformly sampled trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A state trajectory sampled on the grid `t0 + n * dt`, stored row-major
/// (row `n` is the state at sample `n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    dim: usize,
    states: Vec<f64>,
}

impl TimeSeries {
    /// Builds and validates a series from a flat row-major state buffer.
    pub fn new(t0: f64, dt: f64, dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || states.len() % dim != 0 {
            return Err(Error::TooShort {
                rows: if dim == 0 { 0 } else { states.len() / dim },
                cols: dim,
            });
        }
        validate_timeseries(TimeSeries {
            t0,
            dt,
            dim,
            states,
        })
    }

    pub fn from_rows(t0: f64, dt: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::new(t0, dt, dim, rows.concat())
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Time stamp of row `n`.
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.states.chunks_exact(self.dim)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn into_states(self) -> Vec<f64> {
        self.states
    }

    pub fn component(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[c])
    }

    pub fn last_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Keeps every `factor`-th row starting from the first; `dt` scales accordingly.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("subsample factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let states: Vec<f64> = self
            .rows()
            .step_by(factor)
            .flat_map(|r| r.iter().copied())
            .collect();
        Self::new(self.t0, self.dt * factor as f64, self.dim, states)
    }

    /// First `rows` samples.
    pub fn truncate(&self, rows: usize) -> Result<Self> {
        let rows = rows.min(self.len());
        Self::new(self.t0, self.dt, self.dim, self.states[..rows * self.dim].to_vec())
    }

    /// Per-component population standard deviation.
    pub fn component_std(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim)
            .map(|c| {
                let mean = self.component(c).sum::<f64>() / n;
                (self.component(c).map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
            })
            .collect()
    }

    pub fn component_mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim)
            .map(|c| self.component(c).sum::<f64>() / n)
            .collect()
    }
}

/// Checks the trajectory invariants and hands the series back untouched.
pub fn validate_timeseries(ts: TimeSeries) -> Result<TimeSeries> {
    let rows = if ts.dim == 0 { 0 } else { ts.states.len() / ts.dim };
    if ts.dim == 0 || rows < 2 {
        return Err(Error::TooShort {
            rows,
            cols: ts.dim,
        });
    }
    if !(ts.dt.is_finite() && ts.dt > 0.0) {
        return Err(Error::BadStep(ts.dt));
    }
    if !ts.t0.is_finite() {
        return Err(Error::Config(format!("t0 must be finite, got {}", ts.t0)));
    }
    if let Some(i) = ts.states.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i / ts.dim,
            col: i % ts.dim,
        });
    }
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(dt: f64, states: Vec<f64>, dim: usize) -> TimeSeries {
        TimeSeries {
            t0: 0.0,
            dt,
            dim,
            states,
        }
    }

    #[test]
    fn minimal_series_is_valid() {
        let ts = validate_timeseries(raw(0.01, vec![0.0, 1.0], 1)).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.dim(), 1);
    }

    #[test]
    fn zero_step_is_rejected() {
        let err = validate_timeseries(raw(0.0, vec![0.0, 1.0], 1)).unwrap_err();
        assert!(matches!(err, Error::BadStep(_)));
        let err = validate_timeseries(raw(-0.1, vec![0.0, 1.0], 1)).unwrap_err();
        assert!(matches!(err, Error::BadStep(_)));
        let err = validate_timeseries(raw(f64::INFINITY, vec![0.0, 1.0], 1)).unwrap_err();
        assert!(matches!(err, Error::BadStep(_)));
    }

    #[test]
    fn nan_is_rejected() {
        let err = validate_timeseries(raw(0.1, vec![0.0, 1.0, f64::NAN, 2.0], 2)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 0 }));
    }

    #[test]
    fn single_row_is_too_short() {
        let err = validate_timeseries(raw(0.1, vec![1.0, 2.0], 2)).unwrap_err();
        assert!(matches!(err, Error::TooShort { rows: 1, cols: 2 }));
    }

    #[test]
    fn validation_is_idempotent() {
        let ts = TimeSeries::new(0.5, 0.02, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let again = validate_timeseries(ts.clone()).unwrap();
        assert_eq!(ts, again);
        for (a, b) in ts.states().iter().zip(again.states()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn row_times_follow_grid() {
        let ts = TimeSeries::new(1.25, 0.01, 1, (0..10).map(f64::from).collect()).unwrap();
        for n in 0..ts.len() {
            assert_eq!(ts.time(n).to_bits(), (1.25 + n as f64 * 0.01).to_bits());
        }
    }

    #[test]
    fn subsample_keeps_every_kth_row() {
        let ts = TimeSeries::new(0.0, 0.01, 1, (0..10).map(f64::from).collect()).unwrap();
        let sub = ts.subsample(3).unwrap();
        assert_eq!(sub.states(), &[0.0, 3.0, 6.0, 9.0]);
        assert_eq!(sub.dt(), 0.03);
    }
}
