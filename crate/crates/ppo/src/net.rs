//! Fully connected networks with cached forward passes and exact
//! reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::PpoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Shape and nonlinearity of one dense layer. Dropout acts on the layer
/// output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(inputs: usize, outputs: usize, activation: Activation, dropout: f64) -> Self {
        Self { inputs, outputs, activation, dropout }
    }

    pub fn n_params(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Dot product with four independent accumulators so the compiler can
/// vectorize it.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

enum Masks<'a> {
    Off,
    Draw(&'a mut dyn rand::RngCore),
    Given(&'a [Vec<f64>]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Dense network. Parameters are stored flat: for every layer the row-major
/// `outputs x inputs` weight matrix followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass, needed by `backward`.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    /// Input of every layer, plus the network output at the end.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    /// Post-activation values before dropout.
    post: Vec<Vec<f64>>,
    /// Inverted-dropout multipliers (`0` or `1 / (1 - p)`), empty when
    /// dropout was inactive.
    masks: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn masks(&self) -> &[Vec<f64>] {
        &self.masks
    }

    pub fn into_masks(self) -> Vec<Vec<f64>> {
        self.masks
    }
}

impl DenseNet {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self, PpoError> {
        if layers.is_empty() {
            return Err(PpoError::InvalidArchitecture("no layers".into()));
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(PpoError::InvalidArchitecture(format!(
                    "layer of width {} feeds a layer expecting {}",
                    w[0].outputs, w[1].inputs
                )));
            }
        }
        if layers.iter().any(|l| !(0.0..1.0).contains(&l.dropout) || l.inputs == 0 || l.outputs == 0) {
            return Err(PpoError::InvalidArchitecture("dropout must lie in [0, 1) and widths be positive".into()));
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.n_params();
        }
        offsets.push(total);
        Ok(Self { layers, offsets, params: vec![0.0; total] })
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization of weights
    /// and biases.
    pub fn init(&mut self, rng: &mut impl Rng) {
        for (k, l) in self.layers.iter().enumerate() {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            for p in &mut self.params[self.offsets[k]..self.offsets[k + 1]] {
                *p = rng.random_range(-bound..bound);
            }
        }
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Weights and bias of layer `k`.
    pub fn layer_params(&self, k: usize) -> (&[f64], &[f64]) {
        let l = &self.layers[k];
        let start = self.offsets[k];
        let split = start + l.inputs * l.outputs;
        (&self.params[start..split], &self.params[split..self.offsets[k + 1]])
    }

    /// Forward pass. In training mode dropout masks are drawn from `rng`;
    /// evaluation mode is deterministic and ignores `rng`.
    pub fn forward(&self, x: &[f64], mode: Mode, rng: Option<&mut dyn rand::RngCore>) -> Result<ForwardCache, PpoError> {
        match (mode, rng) {
            (Mode::Eval, _) => self.run(x, Masks::Off),
            (Mode::Train, Some(r)) => self.run(x, Masks::Draw(r)),
            (Mode::Train, None) if self.layers.iter().all(|l| l.dropout == 0.0) => self.run(x, Masks::Off),
            (Mode::Train, None) => Err(PpoError::MissingRng),
        }
    }

    /// Forward pass replaying the dropout masks of an earlier pass, as
    /// returned by `ForwardCache::masks`.
    pub fn forward_masked(&self, x: &[f64], masks: &[Vec<f64>]) -> Result<ForwardCache, PpoError> {
        if masks.len() != self.layers.len()
            || masks.iter().zip(&self.layers).any(|(m, l)| !m.is_empty() && m.len() != l.outputs)
        {
            return Err(PpoError::InvalidArchitecture("dropout masks do not fit the network".into()));
        }
        self.run(x, Masks::Given(masks))
    }

    fn run(&self, x: &[f64], mut masks: Masks<'_>) -> Result<ForwardCache, PpoError> {
        if x.len() != self.input_dim() {
            return Err(PpoError::DimensionMismatch { expected: self.input_dim(), found: x.len() });
        }
        let mut cache = ForwardCache::default();
        let mut current = x.to_vec();
        for (k, l) in self.layers.iter().enumerate() {
            let (w, b) = self.layer_params(k);
            let mut z = b.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * l.inputs..(o + 1) * l.inputs];
                *zo += dot(row, &current);
            }
            let y: Vec<f64> = z.iter().map(|&v| l.activation.apply(v)).collect();
            let mut out = y.clone();
            let mask = match &mut masks {
                Masks::Draw(r) if l.dropout > 0.0 => {
                    let keep = 1.0 / (1.0 - l.dropout);
                    (0..l.outputs).map(|_| if r.random::<f64>() < l.dropout { 0.0 } else { keep }).collect()
                }
                Masks::Given(m) => m[k].clone(),
                _ => Vec::new(),
            };
            for (v, m) in out.iter_mut().zip(&mask) {
                *v *= m;
            }
            cache.inputs.push(std::mem::replace(&mut current, out));
            cache.pre.push(z);
            cache.post.push(y);
            cache.masks.push(mask);
        }
        cache.inputs.push(current);
        Ok(cache)
    }

    /// Convenience deterministic evaluation.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, PpoError> {
        Ok(self.forward(x, Mode::Eval, None)?.inputs.pop().unwrap())
    }

    /// Accumulates into `grad` the gradient of a scalar loss with respect to
    /// all parameters, given `upstream = dL/d(output)`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64]) -> Result<(), PpoError> {
        if cache.pre.len() != self.layers.len() {
            return Err(PpoError::MissingForwardCache);
        }
        if upstream.len() != self.output_dim() {
            return Err(PpoError::DimensionMismatch { expected: self.output_dim(), found: upstream.len() });
        }
        if grad.len() != self.params.len() {
            return Err(PpoError::DimensionMismatch { expected: self.params.len(), found: grad.len() });
        }
        let mut g = upstream.to_vec();
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            if !cache.masks[k].is_empty() {
                for (gi, m) in g.iter_mut().zip(&cache.masks[k]) {
                    *gi *= m;
                }
            }
            for ((gi, &z), &y) in g.iter_mut().zip(&cache.pre[k]).zip(&cache.post[k]) {
                *gi *= l.activation.derivative(z, y);
            }
            let x = &cache.inputs[k];
            let start = self.offsets[k];
            let split = start + l.inputs * l.outputs;
            let (gw, gb) = grad[start..self.offsets[k + 1]].split_at_mut(split - start);
            let w = &self.params[start..split];
            let mut gx = vec![0.0; l.inputs];
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                gb[o] += go;
                let row = o * l.inputs..(o + 1) * l.inputs;
                for ((gwi, xi), (gxi, wi)) in gw[row.clone()].iter_mut().zip(x).zip(gx.iter_mut().zip(&w[row])) {
                    *gwi += go * xi;
                    *gxi += go * wi;
                }
            }
            g = gx;
        }
        Ok(())
    }
}
