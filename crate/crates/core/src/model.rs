//! Dense tanh networks used as the vector-field approximator.
//!
//! Parameters live in one flat buffer: every weight matrix first (layer by
//! layer, each `out x in` row-major), then every bias vector in layer order.
//! The optimizer and the model file both use this order.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::timeseries::TimeSeries;

const FILE_FORMAT: &str = "stepnet-mlp";
const FILE_VERSION: u32 = 1;
const PARAMETER_ORDER: &str =
    "weights of layers 1..L (each out x in, row-major), then biases of layers 1..L";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Fixed per-component affine maps around the network:
/// `f(x) = output_scale * net((x - input_shift) / input_scale) + output_shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub output_shift: Vec<f64>,
    pub output_scale: Vec<f64>,
}

impl Normalization {
    /// Standardizes states by their mean and standard deviation, and outputs by
    /// the spread of first differences `(x_{n+1} - x_n) / dt`.
    pub fn from_data(datasets: &[TimeSeries]) -> Result<Self> {
        let first = datasets.first().ok_or(Error::EmptyInput)?;
        let dim = first.dim();
        let mut count = 0.0;
        let mut sum = vec![0.0; dim];
        let mut sum_sq = vec![0.0; dim];
        let mut dcount = 0.0;
        let mut dsum = vec![0.0; dim];
        let mut dsum_sq = vec![0.0; dim];
        for ts in datasets {
            if ts.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: ts.dim(),
                });
            }
            for row in ts.rows() {
                count += 1.0;
                for c in 0..dim {
                    sum[c] += row[c];
                    sum_sq[c] += row[c] * row[c];
                }
            }
            for n in 1..ts.len() {
                dcount += 1.0;
                let (a, b) = (ts.row(n - 1), ts.row(n));
                for c in 0..dim {
                    let d = (b[c] - a[c]) / ts.dt();
                    dsum[c] += d;
                    dsum_sq[c] += d * d;
                }
            }
        }
        let spread = |s: f64, sq: f64, n: f64| {
            let mean = s / n;
            let sd = (sq / n - mean * mean).max(0.0).sqrt();
            (mean, if sd > 1e-12 { sd } else { 1.0 })
        };
        let mut norm = Normalization {
            input_shift: vec![0.0; dim],
            input_scale: vec![1.0; dim],
            output_shift: vec![0.0; dim],
            output_scale: vec![1.0; dim],
        };
        for c in 0..dim {
            let (m, s) = spread(sum[c], sum_sq[c], count);
            norm.input_shift[c] = m;
            norm.input_scale[c] = s;
            let (_, ds) = spread(dsum[c], dsum_sq[c], dcount);
            norm.output_scale[c] = ds;
        }
        Ok(norm)
    }

    fn check(&self, input: usize, output: usize) -> Result<()> {
        let ok = self.input_shift.len() == input
            && self.input_scale.len() == input
            && self.output_shift.len() == output
            && self.output_scale.len() == output
            && self
                .input_scale
                .iter()
                .chain(&self.output_scale)
                .all(|s| s.is_finite() && *s != 0.0)
            && self
                .input_shift
                .iter()
                .chain(&self.output_shift)
                .all(|s| s.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config("normalization does not match the network".into()))
        }
    }
}

/// Flat view of every trainable parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: usize,
    pub bias: usize,
}

/// Number of trainable parameters for the given layer widths.
pub fn parameter_count(layer_dims: &[usize]) -> usize {
    layer_dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn layout(layer_dims: &[usize]) -> Vec<Layer> {
    let weight_total: usize = layer_dims.windows(2).map(|w| w[0] * w[1]).sum();
    let mut w = 0;
    let mut b = weight_total;
    layer_dims
        .windows(2)
        .map(|d| {
            let layer = Layer {
                inputs: d[0],
                outputs: d[1],
                weights: w,
                bias: b,
            };
            w += d[0] * d[1];
            b += d[1];
            layer
        })
        .collect()
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::BadDims(layer_dims.to_vec()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    activation: Activation,
    params: ParameterVector,
    normalization: Option<Normalization>,
    layers: Vec<Layer>,
}

/// Glorot-uniform weights, zero biases, seeded.
pub fn mlp_init(layer_dims: &[usize], seed: u64) -> Result<MlpModel> {
    check_dims(layer_dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layout(layer_dims);
    let mut params = vec![0.0; parameter_count(layer_dims)];
    for layer in &layers {
        let bound = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for w in &mut params[layer.weights..layer.weights + layer.inputs * layer.outputs] {
            *w = dist.sample(&mut rng);
        }
    }
    Ok(MlpModel {
        layer_dims: layer_dims.to_vec(),
        activation: Activation::Tanh,
        params: ParameterVector(params),
        normalization: None,
        layers,
    })
}

/// Layer widths `[input, hidden * layers, output]`.
pub fn architecture(dim: usize, hidden_layers: usize, neurons: usize) -> Vec<usize> {
    let mut dims = vec![dim];
    dims.extend(std::iter::repeat_n(neurons, hidden_layers));
    dims.push(dim);
    dims
}

impl MlpModel {
    pub fn from_parameters(layer_dims: &[usize], params: ParameterVector) -> Result<Self> {
        check_dims(layer_dims)?;
        let expected = parameter_count(layer_dims);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        if params.0.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("model parameters must be finite".into()));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activation: Activation::Tanh,
            params,
            normalization: None,
            layers: layout(layer_dims),
        })
    }

    pub fn with_normalization(mut self, normalization: Option<Normalization>) -> Result<Self> {
        if let Some(n) = &normalization {
            n.check(self.input_dim(), self.output_dim())?;
        }
        self.normalization = normalization;
        Ok(self)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn parameters(&self) -> &ParameterVector {
        &self.params
    }

    pub fn flatten(&self) -> ParameterVector {
        self.params.clone()
    }

    /// Replaces the parameters; the layout must match.
    pub fn unflatten(&self, params: ParameterVector) -> Result<Self> {
        Self::from_parameters(&self.layer_dims, params)?.with_normalization(self.normalization.clone())
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params.0
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let l = self.layers[layer];
        &self.params.0[l.weights..l.weights + l.inputs * l.outputs]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let l = self.layers[layer];
        &self.params.0[l.bias..l.bias + l.outputs]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.params.0[l.weights..l.weights + l.inputs * l.outputs]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.params.0[l.bias..l.bias + l.outputs]
    }

    /// Hidden-layer widths (everything between input and output).
    pub(crate) fn hidden_widths(&self) -> &[usize] {
        &self.layer_dims[1..self.layer_dims.len() - 1]
    }

    /// Evaluates the network, leaving the normalized input and every hidden
    /// activation in `acts` (one slice per entry of `hidden_widths()`, plus the
    /// input in `input`).
    pub(crate) fn forward_cached(
        &self,
        x: &[f64],
        input: &mut [f64],
        acts: &mut [&mut [f64]],
        out: &mut [f64],
    ) {
        match &self.normalization {
            Some(n) => {
                for c in 0..input.len() {
                    input[c] = (x[c] - n.input_shift[c]) / n.input_scale[c];
                }
            }
            None => input.copy_from_slice(x),
        }
        let p = &self.params.0;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (prev, rest): (&[f64], &mut [&mut [f64]]) = if i == 0 {
                (&*input, &mut acts[..])
            } else {
                let (head, tail) = acts.split_at_mut(i);
                (&*head[i - 1], tail)
            };
            let w = &p[layer.weights..layer.weights + layer.inputs * layer.outputs];
            let b = &p[layer.bias..layer.bias + layer.outputs];
            let dst: &mut [f64] = if i == last { &mut *out } else { &mut *rest[0] };
            for (o, (row, bias)) in dst.iter_mut().zip(w.chunks_exact(layer.inputs).zip(b)) {
                *o = dot(row, prev) + bias;
            }
            if i != last {
                for v in dst.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
        }
        if let Some(n) = &self.normalization {
            for c in 0..out.len() {
                out[c] = n.output_scale[c] * out[c] + n.output_shift[c];
            }
        }
    }

    /// Accumulates `J^T upstream` into `grad` given the cached activations of
    /// one sample. `delta`/`delta_prev` are scratch of at least `max_width()`.
    pub(crate) fn backward_cached(
        &self,
        upstream: &[f64],
        input: &[f64],
        acts: &[&[f64]],
        grad: &mut [f64],
        delta: &mut Vec<f64>,
        delta_prev: &mut Vec<f64>,
    ) {
        let p = &self.params.0;
        delta.clear();
        match &self.normalization {
            Some(n) => delta.extend(upstream.iter().zip(&n.output_scale).map(|(g, s)| g * s)),
            None => delta.extend_from_slice(upstream),
        }
        for i in (0..self.layers.len()).rev() {
            let layer = self.layers[i];
            let prev: &[f64] = if i == 0 { input } else { acts[i - 1] };
            let (gw, gb) = {
                let (lo, hi) = grad.split_at_mut(layer.bias);
                (
                    &mut lo[layer.weights..layer.weights + layer.inputs * layer.outputs],
                    &mut hi[..layer.outputs],
                )
            };
            for ((grow, gbias), &d) in gw.chunks_exact_mut(layer.inputs).zip(gb.iter_mut()).zip(delta.iter()) {
                *gbias += d;
                if d != 0.0 {
                    axpy(d, prev, grow);
                }
            }
            if i == 0 {
                break;
            }
            let w = &p[layer.weights..layer.weights + layer.inputs * layer.outputs];
            delta_prev.clear();
            delta_prev.resize(layer.inputs, 0.0);
            for (row, &d) in w.chunks_exact(layer.inputs).zip(delta.iter()) {
                if d != 0.0 {
                    axpy(d, row, delta_prev);
                }
            }
            for (dp, &a) in delta_prev.iter_mut().zip(prev) {
                *dp *= self.activation.derivative_from_output(a);
            }
            std::mem::swap(delta, delta_prev);
        }
    }

    /// Plain evaluation.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let mut input = vec![0.0; self.input_dim()];
        let mut storage: Vec<Vec<f64>> = self.hidden_widths().iter().map(|&w| vec![0.0; w]).collect();
        let mut acts: Vec<&mut [f64]> = storage.iter_mut().map(Vec::as_mut_slice).collect();
        self.forward_cached(x, &mut input, &mut acts, out);
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&ModelFile::from(self))
            .map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if file.format != FILE_FORMAT {
            return Err(Error::Config(format!("not a model file: format `{}`", file.format)));
        }
        if file.version != FILE_VERSION {
            return Err(Error::Config(format!("unsupported model version {}", file.version)));
        }
        let mut model = MlpModel::from_parameters(&file.layer_dims, file.parameters)?
            .with_normalization(file.normalization)?;
        model.activation = file.activation;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    activation: Activation,
    normalization: Option<Normalization>,
    parameter_order: String,
    parameters: ParameterVector,
}

impl From<&MlpModel> for ModelFile {
    fn from(m: &MlpModel) -> Self {
        ModelFile {
            format: FILE_FORMAT.into(),
            version: FILE_VERSION,
            layer_dims: m.layer_dims.clone(),
            activation: m.activation,
            normalization: m.normalization.clone(),
            parameter_order: PARAMETER_ORDER.into(),
            parameters: m.params.clone(),
        }
    }
}

impl VectorField for MlpModel {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.forward_into(x, out);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociating.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
