//! The α-balanced focal loss and its gradient.
//!
//! For a probability vector `p` and true class `t`, the loss is
//! −α_t·(1−p_t)^γ·log(p_t): cross-entropy damped on examples the model
//! already gets right (the (1−p_t)^γ factor) and reweighted per class (α).
//! With γ = 0 and uniform α it reduces to plain cross-entropy.

/// Probabilities are clamped into [ε, 1−ε] before taking the logarithm.
pub const PROB_EPSILON: f64 = 1e-12;

/// The probability and weight vectors disagree in shape, or the class index
/// is out of range.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("focal loss over {probs} probabilities, {alphas} weights, true class {true_class}")]
pub struct DimensionMismatch {
    pub probs: usize,
    pub alphas: usize,
    pub true_class: usize,
}

fn check_shapes(
    probs: &[f64],
    true_class: usize,
    alpha: &[f64],
) -> Result<(), DimensionMismatch> {
    if probs.len() != alpha.len() || true_class >= probs.len() {
        return Err(DimensionMismatch {
            probs: probs.len(),
            alphas: alpha.len(),
            true_class,
        });
    }
    Ok(())
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

/// −α_t·(1−p_t)^γ·log(p_t), with p_t clamped away from 0 and 1.
pub fn focal_loss(
    probs: &[f64],
    true_class: usize,
    alpha: &[f64],
    gamma: f64,
) -> Result<f64, DimensionMismatch> {
    check_shapes(probs, true_class, alpha)?;
    let p_t = clamp(probs[true_class]);
    Ok(-alpha[true_class] * (1.0 - p_t).powf(gamma) * p_t.ln())
}

/// Gradient of the focal loss with respect to the softmax *inputs* (logits),
/// given the softmax outputs. This is what backpropagation consumes.
///
/// dL/dz_k = dL/dp_t · p_t·(δ_tk − p_k), where
/// dL/dp_t = −α_t·[(1−p_t)^γ / p_t − γ·(1−p_t)^(γ−1)·log(p_t)].
pub fn focal_loss_grad_logits(
    probs: &[f64],
    true_class: usize,
    alpha: &[f64],
    gamma: f64,
) -> Result<Vec<f64>, DimensionMismatch> {
    check_shapes(probs, true_class, alpha)?;
    let p_t = clamp(probs[true_class]);
    let one_minus = 1.0 - p_t;
    // γ = 0 keeps the γ·(1−p_t)^(γ−1) term out even when p_t → 1, where the
    // general expression would raise 0 to a negative power.
    let dl_dpt = if gamma == 0.0 {
        -alpha[true_class] / p_t
    } else {
        -alpha[true_class] * (one_minus.powf(gamma) / p_t - gamma * one_minus.powf(gamma - 1.0) * p_t.ln())
    };
    Ok(probs
        .iter()
        .enumerate()
        .map(|(k, &p_k)| {
            let indicator = if k == true_class { 1.0 } else { 0.0 };
            dl_dpt * p_t * (indicator - p_k)
        })
        .collect())
}

/// Per-class weights proportional to inverse class frequency, normalized so
/// they average 1. Balanced counts give uniform weights.
pub fn inverse_frequency_alpha(counts: &[usize; 3]) -> [f64; 3] {
    let raw = counts.map(|c| 1.0 / (c.max(1) as f64));
    let sum: f64 = raw.iter().sum();
    raw.map(|r| 3.0 * r / sum)
}
