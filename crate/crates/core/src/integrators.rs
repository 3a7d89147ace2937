//! Fixed-step classical Runge-Kutta integration.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::timeseries::TimeSeries;

/// Default number of internal RK4 steps per reported sample.
pub const DEFAULT_SUBSTEPS: usize = 10;

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, f: &dyn VectorField, x: &mut [f64], h: f64) {
        let Rk4Scratch { k1, k2, k3, k4, tmp } = self;
        f.eval(x, k1);
        for i in 0..x.len() {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        f.eval(tmp, k2);
        for i in 0..x.len() {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        f.eval(tmp, k3);
        for i in 0..x.len() {
            tmp[i] = x[i] + h * k3[i];
        }
        f.eval(tmp, k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Integrates `f` from `x0`, reporting every `dt` for `steps` steps, with
/// `substeps` RK4 steps of size `dt / substeps` between reports.
pub fn integrate_substepped(
    f: &dyn VectorField,
    x0: &[f64],
    t0: f64,
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<TimeSeries> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::BadStep(dt));
    }
    if steps < 1 || substeps < 1 {
        return Err(Error::Config("steps and substeps must be >= 1".into()));
    }
    if f.dim() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { last_finite: 0 });
    }
    let dim = x0.len();
    let h = dt / substeps as f64;
    let mut scratch = Rk4Scratch::new(dim);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity((steps + 1) * dim);
    states.extend_from_slice(x0);
    for n in 1..=steps {
        for _ in 0..substeps {
            scratch.step(f, &mut x, h);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { last_finite: n - 1 });
        }
        states.extend_from_slice(&x);
    }
    TimeSeries::new(t0, dt, dim, states)
}

/// Classical RK4 with step `dt`; `steps + 1` rows starting at `x0`.
pub fn integrate_rk4(f: &dyn VectorField, x0: &[f64], dt: f64, steps: usize) -> Result<TimeSeries> {
    integrate_substepped(f, x0, 0.0, dt, steps, 1)
}

/// Forecasts with a learned field on the reporting grid `dt`.
pub fn rollout(
    model: &dyn VectorField,
    x0: &[f64],
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<TimeSeries> {
    integrate_substepped(model, x0, 0.0, dt, steps, substeps)
}

/// Rolls out over the same grid (start time, step, length) as `reference`,
/// starting from its first row.
pub fn rollout_like(model: &dyn VectorField, reference: &TimeSeries, substeps: usize) -> Result<TimeSeries> {
    integrate_substepped(
        model,
        reference.row(0),
        reference.t0(),
        reference.dt(),
        reference.len() - 1,
        substeps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FnField, ZeroField};
    use crate::model::mlp_init;

    #[test]
    fn zero_field_gives_constant_trajectory() {
        let ts = integrate_rk4(&ZeroField(2), &[1.5, -2.0], 0.1, 10).unwrap();
        assert_eq!(ts.len(), 11);
        assert!(ts.rows().all(|r| r == [1.5, -2.0]));
    }

    #[test]
    fn exponential_growth_to_e() {
        let f = FnField::new(1, |x: &[f64], o: &mut [f64]| o[0] = x[0]);
        let ts = integrate_rk4(&f, &[1.0], 0.01, 100).unwrap();
        assert!((ts.row(100)[0] - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn fourth_order_on_exponential() {
        let f = FnField::new(1, |x: &[f64], o: &mut [f64]| o[0] = x[0]);
        let err = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            (integrate_rk4(&f, &[1.0], dt, steps).unwrap().row(steps)[0] - 1f64.exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio / 16.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn blow_up_reports_last_finite_row() {
        let f = FnField::new(1, |x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0]);
        match integrate_rk4(&f, &[1.0], 0.3, 100) {
            Err(Error::NonFiniteState { last_finite }) => assert!(last_finite > 0 && last_finite < 100),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn rollout_with_one_substep_matches_rk4() {
        let model = mlp_init(&[2, 12, 2], 9).unwrap();
        let a = rollout(&model, &[0.3, -0.2], 0.05, 40, 1).unwrap();
        let b = integrate_rk4(&model, &[0.3, -0.2], 0.05, 40).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_model_rollout_is_exponential() {
        let mut model = mlp_init(&[2, 2], 0).unwrap();
        model.weights_mut(0).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let x0 = [0.4, -1.1];
        let ts = rollout(&model, &x0, 0.01, 100, 10).unwrap();
        for (got, start) in ts.row(100).iter().zip(x0) {
            assert!((got - start * 1f64.exp()).abs() < 1e-8);
        }
        for n in 0..ts.len() {
            assert_eq!(ts.time(n), n as f64 * 0.01);
        }
    }

    #[test]
    fn argument_checks() {
        assert!(matches!(integrate_rk4(&ZeroField(1), &[0.0], 0.0, 5), Err(Error::BadStep(_))));
        assert!(matches!(
            integrate_rk4(&ZeroField(2), &[0.0], 0.1, 5),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(integrate_rk4(&ZeroField(1), &[0.0], 0.1, 0).is_err());
    }
}
