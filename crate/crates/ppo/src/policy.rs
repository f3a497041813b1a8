//! Actor and critic networks and the Gaussian exploration policy.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::net::{Activation, DenseNet, ForwardCache, LayerSpec, Mode};
use crate::PpoError;

pub const DROPOUT: f64 = 0.5;

/// Actor layout: widths 64, 128, 256, 512 with ReLU, dropout after the
/// 64, 128 and 512 layers, and a tanh output.
pub fn actor_layers(state_dim: usize, action_dim: usize) -> Vec<LayerSpec> {
    use Activation::*;
    vec![
        LayerSpec::new(state_dim, 64, Relu, DROPOUT),
        LayerSpec::new(64, 128, Relu, DROPOUT),
        LayerSpec::new(128, 256, Relu, 0.0),
        LayerSpec::new(256, 512, Relu, DROPOUT),
        LayerSpec::new(512, action_dim, Tanh, 0.0),
    ]
}

/// Critic layout: two hidden ReLU layers of width 32 and a linear output.
pub fn critic_layers(state_dim: usize) -> Vec<LayerSpec> {
    use Activation::*;
    vec![
        LayerSpec::new(state_dim, 32, Relu, 0.0),
        LayerSpec::new(32, 32, Relu, 0.0),
        LayerSpec::new(32, 1, Identity, 0.0),
    ]
}

/// Network input for a state tuple. The relative drop is clipped to
/// `[-1, 1]`: below `-1` the residual has more than doubled and the exact
/// amount carries no useful signal, while unbounded inputs saturate the net.
pub fn features(state: &[f64]) -> Vec<f64> {
    let mut f = state.to_vec();
    if let Some(d) = f.first_mut() {
        *d = d.clamp(-1.0, 1.0);
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorPolicy {
    pub net: DenseNet,
    /// Fixed per-channel log standard deviation.
    pub log_std: Vec<f64>,
}

impl ActorPolicy {
    pub fn new(state_dim: usize, action_dim: usize, std: f64, rng: &mut impl Rng) -> Result<Self, PpoError> {
        let mut net = DenseNet::new(actor_layers(state_dim, action_dim))?;
        net.init(rng);
        Ok(Self { net, log_std: vec![std.ln(); action_dim] })
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn set_std(&mut self, std: f64) {
        self.log_std.iter_mut().for_each(|l| *l = std.ln());
    }

    /// Mean action; dropout only in training mode.
    pub fn forward(&self, state: &[f64], mode: Mode, rng: Option<&mut dyn RngCore>) -> Result<ForwardCache, PpoError> {
        self.net.forward(&features(state), mode, rng)
    }

    /// Deterministic action used at evaluation time.
    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>, PpoError> {
        self.net.predict(&features(state))
    }

    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> f64 {
        gaussian_log_prob(mean, &self.log_std, action)
    }

    /// Draws `mean + std * noise`. Returns the clipped action handed to the
    /// environment, the unclipped sample and its log-probability.
    pub fn sample_action(&self, state: &[f64], rng: &mut impl Rng) -> Result<Sample, PpoError> {
        let mean = self.mean(state)?;
        Ok(self.perturb(mean, rng))
    }

    /// Exploratory action around a dropout-thinned mean. The masks are part
    /// of the draw and are returned so updates can replay them; since their
    /// distribution does not depend on the weights, the Gaussian likelihood
    /// ratio under a fixed mask is a valid importance weight.
    pub fn explore(
        &self,
        state: &[f64],
        noise: &mut impl Rng,
        dropout: &mut dyn RngCore,
    ) -> Result<(Sample, Vec<Vec<f64>>), PpoError> {
        let mut cache = self.forward(state, Mode::Train, Some(dropout))?;
        let mean = cache.output().to_vec();
        Ok((self.perturb(mean, noise), std::mem::take(&mut cache).into_masks()))
    }

    fn perturb(&self, mean: Vec<f64>, rng: &mut impl Rng) -> Sample {
        let raw: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let z: f64 = StandardNormal.sample(rng);
                m + ls.exp() * z
            })
            .collect();
        sample_from(mean, raw, &self.log_std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub mean: Vec<f64>,
    pub unclipped: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

/// Builds a sample from an explicit draw; the log-probability belongs to the
/// unclipped value.
pub fn sample_from(mean: Vec<f64>, unclipped: Vec<f64>, log_std: &[f64]) -> Sample {
    let log_prob = gaussian_log_prob(&mean, log_std, &unclipped);
    let action = unclipped.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    Sample { mean, unclipped, action, log_prob }
}

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), v)| {
            let z = (v - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Gradient of `gaussian_log_prob` with respect to the mean.
pub fn gaussian_log_prob_grad(mean: &[f64], log_std: &[f64], x: &[f64]) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), v)| (v - m) / (2.0 * ls).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet {
    pub net: DenseNet,
}

impl CriticNet {
    pub fn new(state_dim: usize, rng: &mut impl Rng) -> Result<Self, PpoError> {
        let mut net = DenseNet::new(critic_layers(state_dim))?;
        net.init(rng);
        Ok(Self { net })
    }

    pub fn value(&self, state: &[f64]) -> Result<f64, PpoError> {
        Ok(self.net.predict(&features(state))?[0])
    }
}
