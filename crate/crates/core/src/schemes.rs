//! Linear multistep schemes used as residual templates.
//!
//! A scheme with `M` steps is stored in the form
//!
//! ```text
//! sum_{m=0}^{M} [ alpha_m x_{n-m} + dt * beta_m f(x_{n-m}) ] = 0
//! ```
//!
//! with `alpha_0 = -1` on the newest sample. Residuals evaluate the left-hand
//! side on observed data; implicit schemes never need a nonlinear solve here
//! because `f` is only ever evaluated at observed states.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::timeseries::TimeSeries;

pub const MAX_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    AdamsBashforth,
    AdamsMoulton,
    Bdf,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::AdamsBashforth, Family::AdamsMoulton, Family::Bdf];

    pub fn short_name(self) -> &'static str {
        match self {
            Family::AdamsBashforth => "ab",
            Family::AdamsMoulton => "am",
            Family::Bdf => "bdf",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Family::AdamsBashforth => "Adams-Bashforth",
            Family::AdamsMoulton => "Adams-Moulton",
            Family::Bdf => "BDF",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "ab" | "adamsbashforth" => Ok(Family::AdamsBashforth),
            "am" | "adamsmoulton" | "trapezoidal" => Ok(Family::AdamsMoulton),
            "bdf" => Ok(Family::Bdf),
            _ => Err(Error::Unknown {
                kind: "scheme family",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistepScheme {
    pub family: Family,
    pub steps: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl MultistepScheme {
    /// The trapezoidal rule (one-step Adams-Moulton).
    pub fn trapezoidal() -> Self {
        scheme_coefficients(Family::AdamsMoulton, 1).expect("M=1 is supported")
    }

    /// Classical order of accuracy.
    pub fn order(&self) -> usize {
        match self.family {
            Family::AdamsMoulton => self.steps + 1,
            Family::AdamsBashforth | Family::Bdf => self.steps,
        }
    }

    pub fn is_explicit(&self) -> bool {
        self.beta[0] == 0.0
    }

    /// Sum of the beta weights; the scale of `f` inside a residual.
    pub fn beta_sum(&self) -> f64 {
        self.beta.iter().sum()
    }
}

// Rows are m = 1..=M for Adams-Bashforth and m = 0..=M for Adams-Moulton,
// in the usual `x_n = x_{n-1} + dt * sum b_m f_{n-m}` normalisation.
const AB: [&[f64]; MAX_STEPS] = [
    &[1.0],
    &[3.0 / 2.0, -1.0 / 2.0],
    &[23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0],
    &[55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0],
    &[
        1901.0 / 720.0,
        -2774.0 / 720.0,
        2616.0 / 720.0,
        -1274.0 / 720.0,
        251.0 / 720.0,
    ],
];

const AM: [&[f64]; MAX_STEPS] = [
    &[1.0 / 2.0, 1.0 / 2.0],
    &[5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0],
    &[9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0],
    &[
        251.0 / 720.0,
        646.0 / 720.0,
        -264.0 / 720.0,
        106.0 / 720.0,
        -19.0 / 720.0,
    ],
    &[
        475.0 / 1440.0,
        1427.0 / 1440.0,
        -798.0 / 1440.0,
        482.0 / 1440.0,
        -173.0 / 1440.0,
        27.0 / 1440.0,
    ],
];

// (a_1..a_M, b_0) for `x_n + sum a_m x_{n-m} = dt * b_0 f_n`.
const BDF: [(&[f64], f64); MAX_STEPS] = [
    (&[-1.0], 1.0),
    (&[-4.0 / 3.0, 1.0 / 3.0], 2.0 / 3.0),
    (&[-18.0 / 11.0, 9.0 / 11.0, -2.0 / 11.0], 6.0 / 11.0),
    (
        &[-48.0 / 25.0, 36.0 / 25.0, -16.0 / 25.0, 3.0 / 25.0],
        12.0 / 25.0,
    ),
    (
        &[
            -300.0 / 137.0,
            300.0 / 137.0,
            -200.0 / 137.0,
            75.0 / 137.0,
            -12.0 / 137.0,
        ],
        60.0 / 137.0,
    ),
];

/// Coefficients of the standard `steps`-step member of `family`.
pub fn scheme_coefficients(family: Family, steps: usize) -> Result<MultistepScheme> {
    if !(1..=MAX_STEPS).contains(&steps) {
        return Err(Error::UnsupportedSteps(steps));
    }
    let mut alpha = vec![0.0; steps + 1];
    let mut beta = vec![0.0; steps + 1];
    alpha[0] = -1.0;
    match family {
        Family::AdamsBashforth => {
            alpha[1] = 1.0;
            beta[1..].copy_from_slice(AB[steps - 1]);
        }
        Family::AdamsMoulton => {
            alpha[1] = 1.0;
            beta.copy_from_slice(AM[steps - 1]);
        }
        Family::Bdf => {
            let (a, b0) = BDF[steps - 1];
            for (dst, src) in alpha[1..].iter_mut().zip(a) {
                *dst = -src;
            }
            beta[0] = b0;
        }
    }
    Ok(MultistepScheme {
        family,
        steps,
        alpha,
        beta,
    })
}

/// Residual matrix: row `n - M` holds `y_n` for `n = M..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    dim: usize,
    data: Vec<f64>,
}

impl Residuals {
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn check_window(scheme: &MultistepScheme, ts: &TimeSeries) -> Result<()> {
    if ts.len() <= scheme.steps {
        return Err(Error::InsufficientSamples {
            samples: ts.len(),
            steps: scheme.steps,
        });
    }
    Ok(())
}

/// Assembles residuals from precomputed evaluations `fx` (row-major, one row
/// per sample of `ts`). Rows whose beta weight is never used may hold anything.
pub(crate) fn assemble_residuals(scheme: &MultistepScheme, ts: &TimeSeries, fx: &[f64]) -> Vec<f64> {
    let dim = ts.dim();
    let dt = ts.dt();
    let states = ts.states();
    let count = ts.len() - scheme.steps;
    let mut out = vec![0.0; count * dim];
    for (r, y) in out.chunks_exact_mut(dim).enumerate() {
        let n = r + scheme.steps;
        for (m, (&a, &b)) in scheme.alpha.iter().zip(&scheme.beta).enumerate() {
            let j = (n - m) * dim;
            let x = &states[j..j + dim];
            if b == 0.0 {
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi += a * xi;
                }
            } else {
                let f = &fx[j..j + dim];
                let db = dt * b;
                for ((yi, xi), fi) in y.iter_mut().zip(x).zip(f) {
                    *yi += a * xi + db * fi;
                }
            }
        }
    }
    out
}

/// Sample indices at which `f` enters some residual with a nonzero weight.
pub(crate) fn needs_eval(scheme: &MultistepScheme, samples: usize) -> Vec<bool> {
    let mut needed = vec![false; samples];
    for n in scheme.steps..samples {
        for (m, &b) in scheme.beta.iter().enumerate() {
            if b != 0.0 {
                needed[n - m] = true;
            }
        }
    }
    needed
}

/// Multistep residuals of `field` on the observed trajectory.
pub fn residuals(
    scheme: &MultistepScheme,
    field: &dyn VectorField,
    ts: &TimeSeries,
) -> Result<Residuals> {
    if field.dim() != ts.dim() {
        return Err(Error::DimensionMismatch {
            expected: ts.dim(),
            actual: field.dim(),
        });
    }
    check_window(scheme, ts)?;
    let dim = ts.dim();
    let mut fx = vec![0.0; ts.len() * dim];
    for (n, needed) in needs_eval(scheme, ts.len()).into_iter().enumerate() {
        if needed {
            field.eval(ts.row(n), &mut fx[n * dim..(n + 1) * dim]);
        }
    }
    Ok(Residuals {
        dim,
        data: assemble_residuals(scheme, ts, &fx),
    })
}

/// Mean squared residual with the divisor `N - M + 1`, i.e. one more than
/// the number of residual rows. The extra one comes from counting `n = M..N`
/// on a 1-based sample grid while the residual rows here are 0-based.
pub fn mse_loss(residuals: &Residuals) -> Result<f64> {
    mse_loss_with_divisor(residuals, (residuals.rows() + 1) as f64)
}

pub fn mse_loss_with_divisor(residuals: &Residuals, divisor: f64) -> Result<f64> {
    if residuals.data.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(residuals.data.iter().map(|v| v * v).sum::<f64>() / divisor)
}
