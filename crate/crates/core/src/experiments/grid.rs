use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

/// Labeled table of relative errors; `None` marks a failed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorGrid {
    pub row_label: String,
    pub col_label: String,
    pub row_keys: Vec<String>,
    pub col_keys: Vec<String>,
    /// Row-major, `row_keys.len() * col_keys.len()` entries.
    pub values: Vec<Option<f64>>,
}

impl ErrorGrid {
    /// A grid with every cell marked failed.
    pub fn new(
        row_label: impl Into<String>,
        col_label: impl Into<String>,
        row_keys: Vec<String>,
        col_keys: Vec<String>,
    ) -> Self {
        let cells = row_keys.len() * col_keys.len();
        Self {
            row_label: row_label.into(),
            col_label: col_label.into(),
            row_keys,
            col_keys,
            values: vec![None; cells],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_keys.len(), self.col_keys.len())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.col_keys.len() + col]
    }

    /// Stores a value; non-finite or negative errors are recorded as failed.
    pub fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        let cols = self.col_keys.len();
        self.values[row * cols + col] = value.filter(|v| v.is_finite() && *v >= 0.0);
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let cols = self.col_keys.len();
        &self.values[row * cols..(row + 1) * cols]
    }

    pub fn failed_cells(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn check(&self) -> Result<()> {
        if self.row_keys.is_empty() || self.col_keys.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.values.len() != self.row_keys.len() * self.col_keys.len() {
            return Err(Error::DimensionMismatch {
                expected: self.row_keys.len() * self.col_keys.len(),
                actual: self.values.len(),
            });
        }
        if self.values.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("grid entries must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn check_grids(predicted: &TimeSeries, exact: &TimeSeries, component: usize) -> Result<()> {
    let same_step = (predicted.dt() - exact.dt()).abs() <= 1e-12 * exact.dt();
    if predicted.len() != exact.len() || predicted.dim() != exact.dim() || !same_step {
        return Err(Error::GridMismatch);
    }
    if component >= exact.dim() {
        return Err(Error::DimensionMismatch {
            expected: exact.dim(),
            actual: component + 1,
        });
    }
    Ok(())
}

fn ratio(num: f64, den: f64, component: usize) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::ZeroReference(component));
    }
    Ok((num / den).sqrt())
}

/// `‖p_c − e_c‖ / ‖e_c‖` over all samples of component `c`.
pub fn relative_l2_error(predicted: &TimeSeries, exact: &TimeSeries, component: usize) -> Result<f64> {
    relative_l2_error_window(predicted, exact, component, usize::MAX)
}

/// Same as [`relative_l2_error`] restricted to the first `rows` samples.
pub fn relative_l2_error_window(
    predicted: &TimeSeries,
    exact: &TimeSeries,
    component: usize,
    rows: usize,
) -> Result<f64> {
    check_grids(predicted, exact, component)?;
    let (num, den) = sums(predicted, exact, component, rows);
    ratio(num, den, component)
}

/// Restricts to samples with `t <= t_max` (up to rounding of the grid).
pub fn relative_l2_error_until(
    predicted: &TimeSeries,
    exact: &TimeSeries,
    component: usize,
    t_max: f64,
) -> Result<f64> {
    let rows = ((t_max - exact.t0()) / exact.dt() + 1e-9).floor() as usize + 1;
    relative_l2_error_window(predicted, exact, component, rows)
}

/// Pools several trajectories into one norm per component.
pub fn pooled_relative_l2_error(predicted: &[TimeSeries], exact: &[TimeSeries], component: usize) -> Result<f64> {
    if predicted.len() != exact.len() || exact.is_empty() {
        return Err(Error::GridMismatch);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (p, e) in predicted.iter().zip(exact) {
        check_grids(p, e, component)?;
        let (n, d) = sums(p, e, component, usize::MAX);
        num += n;
        den += d;
    }
    ratio(num, den, component)
}

fn sums(predicted: &TimeSeries, exact: &TimeSeries, component: usize, rows: usize) -> (f64, f64) {
    predicted
        .component(component)
        .zip(exact.component(component))
        .take(rows)
        .fold((0.0, 0.0), |(num, den), (p, e)| (num + (p - e) * (p - e), den + e * e))
}
