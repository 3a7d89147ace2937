//! Multistep-residual loss of a network and its exact gradient.
//!
//! The network is evaluated once per sample that carries a nonzero beta
//! weight. Samples are split into fixed-size chunks that are processed in
//! parallel; per-chunk gradients are summed in chunk order, so results do not
//! depend on the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MlpModel, ParameterVector};
use crate::schemes::{self, MultistepScheme};
use crate::timeseries::TimeSeries;

const CHUNK: usize = 256;

struct Chunk {
    dataset: usize,
    samples: Vec<usize>,
    input: Vec<f64>,
    acts: Vec<Vec<f64>>,
    out: Vec<f64>,
    grad: Vec<f64>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

/// Reusable evaluator of the summed per-trajectory loss.
pub struct Objective<'a> {
    scheme: MultistepScheme,
    datasets: &'a [TimeSeries],
    dim: usize,
    chunks: Vec<Chunk>,
    fx: Vec<Vec<f64>>,
    upstream: Vec<Vec<f64>>,
}

impl<'a> Objective<'a> {
    pub fn new(scheme: &MultistepScheme, datasets: &'a [TimeSeries], layer_dims: &[usize]) -> Result<Self> {
        let first = datasets.first().ok_or(Error::EmptyInput)?;
        let dim = first.dim();
        for ts in datasets {
            if ts.dim() != dim {
                return Err(Error::MixedDims {
                    what: "state dimension",
                    first: dim as f64,
                    other: ts.dim() as f64,
                });
            }
            schemes::check_window(scheme, ts)?;
        }
        for &d in [layer_dims[0], *layer_dims.last().unwrap()].iter() {
            if d != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: d,
                });
            }
        }
        let hidden = &layer_dims[1..layer_dims.len() - 1];
        let params = crate::model::parameter_count(layer_dims);
        let max_width = layer_dims.iter().copied().max().unwrap_or(0);
        let mut chunks = Vec::new();
        for (k, ts) in datasets.iter().enumerate() {
            let needed: Vec<usize> = schemes::needs_eval(scheme, ts.len())
                .into_iter()
                .enumerate()
                .filter_map(|(n, need)| need.then_some(n))
                .collect();
            for samples in needed.chunks(CHUNK) {
                let s = samples.len();
                chunks.push(Chunk {
                    dataset: k,
                    samples: samples.to_vec(),
                    input: vec![0.0; s * dim],
                    acts: hidden.iter().map(|&w| vec![0.0; s * w]).collect(),
                    out: vec![0.0; s * dim],
                    grad: vec![0.0; params],
                    delta: Vec::with_capacity(max_width),
                    delta_prev: Vec::with_capacity(max_width),
                });
            }
        }
        Ok(Self {
            scheme: scheme.clone(),
            datasets,
            dim,
            chunks,
            fx: datasets.iter().map(|ts| vec![0.0; ts.len() * dim]).collect(),
            upstream: datasets.iter().map(|ts| vec![0.0; ts.len() * dim]).collect(),
        })
    }

    /// Number of residual entries (rows times state dimension) over all datasets.
    pub fn residual_entries(&self) -> usize {
        self.datasets
            .iter()
            .map(|ts| (ts.len() - self.scheme.steps) * ts.dim())
            .sum()
    }

    fn forward(&mut self, model: &MlpModel) {
        let dim = self.dim;
        let datasets = self.datasets;
        self.chunks.par_iter_mut().for_each(|chunk| {
            let ts = &datasets[chunk.dataset];
            let widths: Vec<usize> = chunk.acts.iter().map(|a| a.len() / chunk.samples.len()).collect();
            for (i, &n) in chunk.samples.iter().enumerate() {
                let mut acts: Vec<&mut [f64]> = chunk
                    .acts
                    .iter_mut()
                    .zip(&widths)
                    .map(|(a, &w)| &mut a[i * w..(i + 1) * w])
                    .collect();
                model.forward_cached(
                    ts.row(n),
                    &mut chunk.input[i * dim..(i + 1) * dim],
                    &mut acts,
                    &mut chunk.out[i * dim..(i + 1) * dim],
                );
            }
        });
        for chunk in &self.chunks {
            let fx = &mut self.fx[chunk.dataset];
            for (i, &n) in chunk.samples.iter().enumerate() {
                fx[n * dim..(n + 1) * dim].copy_from_slice(&chunk.out[i * dim..(i + 1) * dim]);
            }
        }
    }

    /// Loss only.
    pub fn loss(&mut self, model: &MlpModel) -> f64 {
        self.forward(model);
        let mut total = 0.0;
        for (k, ts) in self.datasets.iter().enumerate() {
            let y = schemes::assemble_residuals(&self.scheme, ts, &self.fx[k]);
            let divisor = (ts.len() - self.scheme.steps + 1) as f64;
            total += y.iter().map(|v| v * v).sum::<f64>() / divisor;
        }
        total
    }

    /// Loss, with the gradient written into `grad`.
    pub fn loss_and_gradient(&mut self, model: &MlpModel, grad: &mut [f64]) -> f64 {
        self.forward(model);
        let dim = self.dim;
        let steps = self.scheme.steps;
        let mut total = 0.0;
        for (k, ts) in self.datasets.iter().enumerate() {
            let y = schemes::assemble_residuals(&self.scheme, ts, &self.fx[k]);
            let divisor = (ts.len() - steps + 1) as f64;
            total += y.iter().map(|v| v * v).sum::<f64>() / divisor;
            // dL/df(x_j) = (2 dt / divisor) * sum_m beta_m y_{j+m}
            let g = &mut self.upstream[k];
            g.fill(0.0);
            let scale = 2.0 * ts.dt() / divisor;
            for (r, yn) in y.chunks_exact(dim).enumerate() {
                let n = r + steps;
                for (m, &b) in self.scheme.beta.iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    let j = n - m;
                    for (gi, yi) in g[j * dim..(j + 1) * dim].iter_mut().zip(yn) {
                        *gi += scale * b * yi;
                    }
                }
            }
        }

        let upstream = &self.upstream;
        self.chunks.par_iter_mut().for_each(|chunk| {
            chunk.grad.fill(0.0);
            let g = &upstream[chunk.dataset];
            let widths: Vec<usize> = chunk.acts.iter().map(|a| a.len() / chunk.samples.len()).collect();
            for (i, &n) in chunk.samples.iter().enumerate() {
                let acts: Vec<&[f64]> = chunk
                    .acts
                    .iter()
                    .zip(&widths)
                    .map(|(a, &w)| &a[i * w..(i + 1) * w])
                    .collect();
                model.backward_cached(
                    &g[n * dim..(n + 1) * dim],
                    &chunk.input[i * dim..(i + 1) * dim],
                    &acts,
                    &mut chunk.grad,
                    &mut chunk.delta,
                    &mut chunk.delta_prev,
                );
            }
        });
        grad.fill(0.0);
        for chunk in &self.chunks {
            for (a, b) in grad.iter_mut().zip(&chunk.grad) {
                *a += b;
            }
        }
        total
    }
}

/// Loss of `model` on one trajectory and its gradient with respect to the
/// flattened parameters.
pub fn loss_and_gradient(
    model: &MlpModel,
    scheme: &MultistepScheme,
    ts: &TimeSeries,
) -> Result<(f64, ParameterVector)> {
    let data = std::slice::from_ref(ts);
    let mut objective = Objective::new(scheme, data, model.layer_dims())?;
    let mut grad = ParameterVector::zeros(model.parameter_count());
    let loss = objective.loss_and_gradient(model, grad.as_mut_slice());
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mlp_init, parameter_count, Normalization};
    use crate::schemes::{mse_loss, residuals, scheme_coefficients, Family};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wavy_series(dim: usize, len: usize, dt: f64) -> TimeSeries {
        let states: Vec<f64> = (0..len)
            .flat_map(|n| {
                (0..dim).map(move |c| (0.7 * n as f64 * dt + c as f64).sin() * (1.0 + 0.3 * c as f64))
            })
            .collect();
        TimeSeries::new(0.0, dt, dim, states).unwrap()
    }

    #[test]
    fn loss_matches_residual_route() {
        let ts = wavy_series(2, 40, 0.05);
        let model = mlp_init(&[2, 8, 8, 2], 1).unwrap();
        for fam in Family::ALL {
            for steps in [1, 3, 5] {
                let s = scheme_coefficients(fam, steps).unwrap();
                let (loss, _) = loss_and_gradient(&model, &s, &ts).unwrap();
                let direct = mse_loss(&residuals(&s, &model, &ts).unwrap()).unwrap();
                assert!((loss - direct).abs() <= 1e-14 * direct.max(1e-300), "{loss} vs {direct}");
            }
        }
    }

    #[test]
    fn zero_network_closed_form_bias_gradient() {
        let ts = wavy_series(2, 30, 0.1);
        let dims = [2, 5, 2];
        let model = MlpModel::from_parameters(&dims, ParameterVector::zeros(parameter_count(&dims))).unwrap();
        for fam in Family::ALL {
            let s = scheme_coefficients(fam, 2).unwrap();
            let (loss, grad) = loss_and_gradient(&model, &s, &ts).unwrap();
            // With f = 0 the residual is the pure state combination.
            let rows: Vec<Vec<f64>> = (s.steps..ts.len())
                .map(|n| {
                    (0..2)
                        .map(|c| (0..=s.steps).map(|m| s.alpha[m] * ts.row(n - m)[c]).sum())
                        .collect()
                })
                .collect();
            let divisor = (ts.len() - s.steps + 1) as f64;
            let expected_loss: f64 =
                rows.iter().flatten().map(|v: &f64| v * v).sum::<f64>() / divisor;
            assert!((loss - expected_loss).abs() <= 1e-14 * expected_loss);
            let bias_grad = &grad.as_slice()[grad.len() - 2..];
            for c in 0..2 {
                let ysum: f64 = rows.iter().map(|r| r[c]).sum();
                let expected = 2.0 * ts.dt() / divisor * ysum * s.beta_sum();
                assert!((bias_grad[c] - expected).abs() <= 1e-13 * expected.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ts = wavy_series(3, 25, 0.05);
        let norm = Normalization::from_data(std::slice::from_ref(&ts)).unwrap();
        for (case, fam) in Family::ALL.into_iter().enumerate() {
            let s = scheme_coefficients(fam, 1 + 2 * case).unwrap();
            let mut model = mlp_init(&[3, 6, 4, 3], case as u64).unwrap();
            for p in model.params_mut() {
                *p += rng.gen_range(-0.3..0.3);
            }
            let model = if case == 1 { model.with_normalization(Some(norm.clone())).unwrap() } else { model };
            let (_, grad) = loss_and_gradient(&model, &s, &ts).unwrap();
            let theta = model.flatten();
            for i in 0..theta.len() {
                let h = 1e-6;
                let mut plus = theta.clone();
                plus.0[i] += h;
                let mut minus = theta.clone();
                minus.0[i] -= h;
                let lp = loss_and_gradient(&model.unflatten(plus).unwrap(), &s, &ts).unwrap().0;
                let lm = loss_and_gradient(&model.unflatten(minus).unwrap(), &s, &ts).unwrap().0;
                let fd = (lp - lm) / (2.0 * h);
                let g = grad.0[i];
                let err = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
                assert!(err < 1e-5, "{fam} param {i}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn chunk_boundaries_do_not_change_results() {
        // Longer than one chunk.
        let ts = wavy_series(2, 3 * CHUNK + 17, 0.01);
        let model = mlp_init(&[2, 10, 2], 4).unwrap();
        let s = scheme_coefficients(Family::AdamsMoulton, 3).unwrap();
        let (loss, grad) = loss_and_gradient(&model, &s, &ts).unwrap();
        let direct = mse_loss(&residuals(&s, &model, &ts).unwrap()).unwrap();
        assert!((loss - direct).abs() <= 1e-13 * direct);
        let (loss2, grad2) = loss_and_gradient(&model, &s, &ts).unwrap();
        assert_eq!(loss.to_bits(), loss2.to_bits());
        assert_eq!(grad, grad2);
    }

    #[test]
    fn dimension_checks() {
        let ts = wavy_series(2, 10, 0.1);
        let model = mlp_init(&[3, 4, 3], 0).unwrap();
        assert!(matches!(
            loss_and_gradient(&model, &MultistepScheme::trapezoidal(), &ts),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
