//! On-policy PPO-clip training against the solver environment.

use std::io::Write;
use std::time::Instant;

use hpmg_core::env::{EpisodeConfig, RawAction, SolverEnv, Termination};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::net::Mode;
use crate::objective::{clipped_term, clipped_term_grad, discounted_returns, normalize};
use crate::policy::{features, gaussian_log_prob, gaussian_log_prob_grad, ActorPolicy, CriticNet};
use crate::PpoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub episodes: usize,
    pub timesteps_per_batch: usize,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip_eps: f64,
    pub updates_per_batch: usize,
    /// Exploration standard deviation at the first episode, annealed
    /// linearly to `action_std_end` at the last.
    pub action_std_start: f64,
    pub action_std_end: f64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            timesteps_per_batch: 16,
            gamma: 0.98,
            actor_lr: 1e-5,
            critic_lr: 0.05,
            clip_eps: 0.2,
            updates_per_batch: 4,
            action_std_start: 0.15,
            action_std_end: 0.05,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.timesteps_per_batch == 0 || self.updates_per_batch == 0 || self.episodes == 0 {
            return bad("episodes, timesteps_per_batch and updates_per_batch must be positive");
        }
        if !(self.action_std_start > 0.0 && self.action_std_end > 0.0) {
            return bad("action std must be positive");
        }
        Ok(())
    }

    /// Exploration std for `episode`.
    pub fn action_std(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.action_std_start;
        }
        let t = episode as f64 / (self.episodes - 1) as f64;
        self.action_std_start + t * (self.action_std_end - self.action_std_start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Unclipped Gaussian sample.
    pub raw_action: Vec<f64>,
    /// Dropout masks of the actor pass that produced the action.
    pub masks: Vec<Vec<f64>>,
    pub log_prob: f64,
    /// Exploration log-std in force when the action was drawn.
    pub log_std: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub actor: ActorPolicy,
    pub critic: CriticNet,
}

impl Agent {
    pub fn new(state_dim: usize, action_dim: usize, std: f64, rng: &mut ChaCha8Rng) -> Result<Self, PpoError> {
        let actor = ActorPolicy::new(state_dim, action_dim, std, rng)?;
        let critic = CriticNet::new(state_dim, rng)?;
        Ok(Self { actor, critic })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.action_dim()
    }

    /// Noise-free action for deployment.
    pub fn act(&self, state: &[f64]) -> Result<RawAction, PpoError> {
        Ok(RawAction::clamped(&self.actor.mean(state)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Progress {
    pub episodes: u64,
    pub steps: u64,
    pub updates: u64,
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub mean_reward: f64,
    pub final_residual: f64,
    pub wall_time: f64,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub log: Vec<EpisodeLog>,
    pub progress: Progress,
}

/// Writes the training log as CSV.
pub fn write_training_log(log: &[EpisodeLog], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "episode,steps,mean_reward,final_residual,wall_time")?;
    for e in log {
        writeln!(out, "{},{},{},{:e},{}", e.episode, e.steps, e.mean_reward, e.final_residual, e.wall_time)?;
    }
    Ok(())
}

struct Learner {
    agent: Agent,
    actor_opt: Adam,
    critic_opt: Adam,
    dropout_rng: ChaCha8Rng,
    actor_grad: Vec<f64>,
    critic_grad: Vec<f64>,
}

impl Learner {
    /// Clipped actor updates and value regression on one batch.
    fn update(&mut self, batch: &[Transition], bootstrap_state: Option<&[f64]>, cfg: &PpoConfig) -> Result<(), PpoError> {
        let n = batch.len() as f64;
        let critic = &self.agent.critic;
        let bootstrap = match bootstrap_state {
            Some(s) => critic.value(s)?,
            None => 0.0,
        };
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = batch.iter().map(|t| t.done).collect();
        let returns = discounted_returns(&rewards, &dones, cfg.gamma, bootstrap);
        let mut adv = Vec::with_capacity(batch.len());
        for (t, g) in batch.iter().zip(&returns) {
            adv.push(g - critic.value(&t.state)?);
        }
        normalize(&mut adv);

        for _ in 0..cfg.updates_per_batch {
            self.actor_grad.iter_mut().for_each(|g| *g = 0.0);
            for (t, &a) in batch.iter().zip(&adv) {
                let cache = self.agent.actor.net.forward_masked(&features(&t.state), &t.masks)?;
                let mean = cache.output();
                let lp = gaussian_log_prob(mean, &t.log_std, &t.raw_action);
                let ratio = (lp - t.log_prob).exp();
                let coef = clipped_term_grad(ratio, a, cfg.clip_eps) / n;
                if coef == 0.0 {
                    continue;
                }
                let upstream: Vec<f64> =
                    gaussian_log_prob_grad(mean, &t.log_std, &t.raw_action).iter().map(|g| coef * g).collect();
                self.agent.actor.net.backward(&cache, &upstream, &mut self.actor_grad)?;
            }
            self.actor_opt.step(self.agent.actor.net.params_mut(), &self.actor_grad);

            self.critic_grad.iter_mut().for_each(|g| *g = 0.0);
            for (t, g) in batch.iter().zip(&returns) {
                let cache = self.agent.critic.net.forward(&features(&t.state), Mode::Eval, None)?;
                let v = cache.output()[0];
                self.agent.critic.net.backward(&cache, &[2.0 * (v - g) / n], &mut self.critic_grad)?;
            }
            self.critic_opt.step(self.agent.critic.net.params_mut(), &self.critic_grad);
        }
        Ok(())
    }
}

/// Surrogate loss of the current actor on a batch, evaluated without
/// dropout. Useful for diagnostics.
pub fn batch_loss(agent: &Agent, batch: &[Transition], advantages: &[f64], clip_eps: f64) -> Result<f64, PpoError> {
    let mut total = 0.0;
    for (t, &a) in batch.iter().zip(advantages) {
        let mean = agent.actor.mean(&t.state)?;
        let ratio = (gaussian_log_prob(&mean, &t.log_std, &t.raw_action) - t.log_prob).exp();
        total += clipped_term(ratio, a, clip_eps);
    }
    Ok(total / batch.len() as f64)
}

/// Incremental trainer: holds the networks, optimizers, generators and the
/// partially filled batch between episodes.
pub struct Trainer {
    cfg: PpoConfig,
    learner: Learner,
    env_rng: ChaCha8Rng,
    action_rng: ChaCha8Rng,
    batch: Vec<Transition>,
    progress: Progress,
}

impl Trainer {
    pub fn new(cfg: &PpoConfig, state_dim: usize, action_dim: usize) -> Result<Self, PpoError> {
        cfg.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let agent = Agent::new(state_dim, action_dim, cfg.action_std_start, &mut init_rng)?;
        let learner = Learner {
            actor_opt: Adam::new(agent.actor.net.n_params(), cfg.actor_lr),
            critic_opt: Adam::new(agent.critic.net.n_params(), cfg.critic_lr),
            actor_grad: vec![0.0; agent.actor.net.n_params()],
            critic_grad: vec![0.0; agent.critic.net.n_params()],
            agent,
            dropout_rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3)),
        };
        Ok(Self {
            cfg: cfg.clone(),
            learner,
            env_rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)),
            action_rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2)),
            batch: Vec::with_capacity(cfg.timesteps_per_batch),
            progress: Progress::default(),
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.learner.agent
    }

    pub fn agent_mut(&mut self) -> &mut Agent {
        &mut self.learner.agent
    }

    pub fn progress(&self) -> Progress {
        self.progress
    }

    /// Generator reserved for sampling episode configurations.
    pub fn env_rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.env_rng
    }

    /// Runs one exploratory episode, updating the networks every
    /// `timesteps_per_batch` transitions.
    pub fn run_episode(&mut self, env_cfg: EpisodeConfig) -> Result<EpisodeLog, PpoError> {
        let start = Instant::now();
        let agent = &self.learner.agent;
        if env_cfg.state_dim() != agent.state_dim() {
            return Err(PpoError::DimensionMismatch { expected: agent.state_dim(), found: env_cfg.state_dim() });
        }
        if env_cfg.action_dim() != agent.action_dim() {
            return Err(PpoError::DimensionMismatch { expected: agent.action_dim(), found: env_cfg.action_dim() });
        }
        let episode = self.progress.episodes as usize;
        self.learner.agent.actor.set_std(self.cfg.action_std(episode));
        let (mut env, mut state) = SolverEnv::reset(env_cfg)?;
        let mut reward_sum = 0.0;
        let mut steps = 0;
        while !env.is_done() {
            let s = state.to_vec();
            let (sample, masks) =
                self.learner.agent.actor.explore(&s, &mut self.action_rng, &mut self.learner.dropout_rng)?;
            let step = env.step(&RawAction::clamped(&sample.action))?;
            reward_sum += step.reward;
            steps += 1;
            self.batch.push(Transition {
                state: s,
                raw_action: sample.unclipped,
                masks,
                log_prob: sample.log_prob,
                log_std: self.learner.agent.actor.log_std.clone(),
                reward: step.reward,
                done: step.done,
            });
            if self.batch.len() == self.cfg.timesteps_per_batch {
                let next = step.state.to_vec();
                self.learner.update(&self.batch, (!step.done).then_some(next.as_slice()), &self.cfg)?;
                self.progress.updates += 1;
                self.batch.clear();
            }
            state = step.state;
        }
        self.progress.episodes += 1;
        self.progress.steps += steps as u64;
        Ok(EpisodeLog {
            episode,
            steps,
            mean_reward: if steps > 0 { reward_sum / steps as f64 } else { 0.0 },
            final_residual: env.residual(),
            wall_time: start.elapsed().as_secs_f64(),
            termination: env.termination(),
        })
    }

    pub fn finish(self, log: Vec<EpisodeLog>) -> TrainOutcome {
        TrainOutcome { agent: self.learner.agent, log, progress: self.progress }
    }
}

/// Trains an agent for `cfg.episodes` episodes. `factory` produces the
/// configuration of every episode from the episode index and a seeded
/// generator, so coefficient and mesh resampling are reproducible.
pub fn train(
    factory: &mut dyn FnMut(usize, &mut ChaCha8Rng) -> EpisodeConfig,
    cfg: &PpoConfig,
    mut on_episode: Option<&mut dyn FnMut(&EpisodeLog)>,
) -> Result<TrainOutcome, PpoError> {
    cfg.validate()?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let first = factory(0, &mut env_rng);
    let mut trainer = Trainer::new(cfg, first.state_dim(), first.action_dim())?;
    *trainer.env_rng() = env_rng;
    let mut log = Vec::with_capacity(cfg.episodes);
    let mut pending = Some(first);
    for episode in 0..cfg.episodes {
        let env_cfg = match pending.take() {
            Some(c) => c,
            None => factory(episode, trainer.env_rng()),
        };
        let entry = trainer.run_episode(env_cfg)?;
        if let Some(cb) = on_episode.as_deref_mut() {
            cb(&entry);
        }
        log.push(entry);
    }
    Ok(trainer.finish(log))
}
