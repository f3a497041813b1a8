//! Returns, advantages and the clipped surrogate objective.

/// Discounted returns `G_t = r_t + gamma G_{t+1}`, restarted after every
/// `done` flag. `bootstrap` is the value estimate of the state following
/// the last transition, used when that transition is not terminal.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], gamma: f64, bootstrap: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), dones.len());
    let mut out = vec![0.0; rewards.len()];
    let mut g = bootstrap;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            g = 0.0;
        }
        g = rewards[t] + gamma * g;
        out[t] = g;
    }
    out
}

/// Shifts to zero mean and scales to unit variance. A constant batch is only
/// centred.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v -= mean;
        if std > 1e-12 {
            *v /= std;
        }
    }
}

/// Per-sample clipped term `-min(rho A, clip(rho, 1-eps, 1+eps) A)`.
#[inline]
pub fn clipped_term(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    -(ratio * advantage).min(clipped * advantage)
}

/// Mean clipped surrogate loss over the batch.
pub fn ppo_clip_loss(log_probs_new: &[f64], log_probs_old: &[f64], advantages: &[f64], clip_eps: f64) -> f64 {
    assert!(log_probs_new.len() == log_probs_old.len() && log_probs_old.len() == advantages.len());
    let n = advantages.len() as f64;
    log_probs_new
        .iter()
        .zip(log_probs_old)
        .zip(advantages)
        .map(|((ln, lo), a)| clipped_term((ln - lo).exp(), *a, clip_eps))
        .sum::<f64>()
        / n
}

/// Derivative of one sample's clipped term with respect to its new
/// log-probability. Zero whenever the clipped branch is active.
#[inline]
pub fn clipped_term_grad(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    if ratio * advantage <= clipped * advantage {
        -ratio * advantage
    } else {
        0.0
    }
}
