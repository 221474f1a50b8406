//! Trace-guided group policy optimization.
//!
//! Each step samples a group of outputs, evaluates them with the planning
//! pipeline and a reviewer, asks an improver to rewrite the decomposition
//! trace of every failed output, regenerates those outputs with the rewritten
//! trace forced, and takes one gradient-ascent step on a clipped surrogate
//! objective over the augmented group. Forced tokens are excluded from the
//! ratios, the KL term and the gradient.

mod improver;
pub mod micro;
mod policy;
mod rollout;
mod tokens;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use improver::{improve_trace, parse_trace_block, render_trace_block, Feedback, MicroImprover, Prerequisite};
pub use policy::{
    log_softmax, point_logprob, row, softmax, token_logprobs, DecisionPoint, DifferentiablePolicy, Grounding,
    PolicyInterface, Prompt, ToyPolicy, ToySpec,
};
pub use rollout::{
    constrained_rollout, evaluate_sequence, rollout_group, select_failed, tgpo_step, Candidate, CandidateGroup,
    EvalContext, Origin, StepOutcome, StepReport,
};
pub use tokens::{join_tokens, split_tokens, TokenSequence, Vocabulary};

use crate::llm_client::ChatError;
use crate::reward::RewardError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TgpoError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("token `{0}` is not in the vocabulary")]
    Vocabulary(String),
    #[error("token sequence does not follow the output grammar: {0}")]
    Structure(String),
    #[error("trace must contain at least one subtask")]
    EmptyTrace,
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("improver response has no valid trace block: {0}")]
    TraceParse(String),
    #[error(transparent)]
    Service(#[from] ChatError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("{pass} pass, candidate {index}: {source}")]
    Candidate {
        pass: &'static str,
        index: usize,
        source: Box<TgpoError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageScheme {
    #[default]
    MeanCenter,
    MeanStd,
}

/// How per-token likelihood ratios are combined into the surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMode {
    /// One ratio per output: exp of the summed unforced log-ratio.
    #[default]
    Sequence,
    /// One clipped term per unforced token, averaged over unforced tokens.
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TgpoConfig {
    /// First-pass group size N.
    pub group_size: usize,
    /// Outputs with reward strictly below this are regenerated.
    pub tau: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub advantage: AdvantageScheme,
    pub ratio: RatioMode,
    pub learning_rate: f64,
}

impl Default for TgpoConfig {
    fn default() -> Self {
        TgpoConfig {
            group_size: 8,
            tau: 0.5,
            epsilon: 0.2,
            beta: 0.02,
            advantage: AdvantageScheme::MeanCenter,
            ratio: RatioMode::Sequence,
            learning_rate: 0.5,
        }
    }
}

impl TgpoConfig {
    pub fn validate(&self) -> Result<(), TgpoError> {
        if self.group_size < 2 {
            return Err(TgpoError::Config(format!("group size {} < 2", self.group_size)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(TgpoError::Config(format!("tau {} outside (0, 1)", self.tau)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(TgpoError::Config(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(TgpoError::Config(format!("beta {} is negative", self.beta)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TgpoError::Config(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Floor added to the standard deviation under [`AdvantageScheme::MeanStd`].
pub const STD_FLOOR: f64 = 1e-8;

/// Group-relative advantages. The standard deviation is the population one
/// (divides by N).
pub fn group_advantages(rewards: &[f64], scheme: AdvantageScheme) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    match scheme {
        AdvantageScheme::MeanCenter => rewards.iter().map(|r| r - mean).collect(),
        AdvantageScheme::MeanStd => {
            let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
            let denom = var.sqrt() + STD_FLOOR;
            rewards.iter().map(|r| (r - mean) / denom).collect()
        }
    }
}

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// `min(rho * a, clip(rho) * a)` and its derivative with respect to `rho`.
fn clipped(rho: f64, a: f64, eps: f64) -> (f64, f64) {
    let raw = rho * a;
    let capped = clip(rho, 1.0 - eps, 1.0 + eps) * a;
    if raw <= capped {
        (raw, a)
    } else {
        (capped, 0.0)
    }
}

fn check_shapes(new: &[f64], old: &[f64], forced: &[bool]) -> Result<(), TgpoError> {
    if new.len() != old.len() || old.len() != forced.len() {
        return Err(TgpoError::Shape(format!(
            "{} new, {} old logprobs, {} mask entries",
            new.len(),
            old.len(),
            forced.len()
        )));
    }
    for i in 0..new.len() {
        if !forced[i] && !(new[i].is_finite() && old[i].is_finite()) {
            return Err(TgpoError::NonFinite(format!("logprob at unforced position {i}")));
        }
    }
    Ok(())
}

/// Clipped surrogate for one output and its gradient with respect to the
/// new per-token logprobs. Forced positions get zero gradient and are never
/// read.
pub fn surrogate(
    new: &[f64],
    old: &[f64],
    forced: &[bool],
    advantage: f64,
    eps: f64,
    mode: RatioMode,
) -> Result<(f64, Vec<f64>), TgpoError> {
    check_shapes(new, old, forced)?;
    let mut grad = vec![0.0; new.len()];
    let free: Vec<usize> = (0..new.len()).filter(|&i| !forced[i]).collect();
    match mode {
        RatioMode::Sequence => {
            let log_ratio: f64 = free.iter().map(|&i| new[i] - old[i]).sum();
            let rho = log_ratio.exp();
            let (value, d_rho) = clipped(rho, advantage, eps);
            for &i in &free {
                grad[i] = d_rho * rho;
            }
            Ok((value, grad))
        }
        RatioMode::Token => {
            if free.is_empty() {
                return Ok((0.0, grad));
            }
            let w = 1.0 / free.len() as f64;
            let mut value = 0.0;
            for &i in &free {
                let rho = (new[i] - old[i]).exp();
                let (v, d_rho) = clipped(rho, advantage, eps);
                value += w * v;
                grad[i] = w * d_rho * rho;
            }
            Ok((value, grad))
        }
    }
}

/// Per-token KL estimate `exp(r) - r - 1` with `r = ref - new`, summed over
/// unforced tokens (sequence mode) or averaged (token mode), with its
/// gradient with respect to the new logprobs.
pub fn k3_kl(new: &[f64], reference: &[f64], forced: &[bool], mode: RatioMode) -> Result<(f64, Vec<f64>), TgpoError> {
    check_shapes(new, reference, forced)?;
    let free: Vec<usize> = (0..new.len()).filter(|&i| !forced[i]).collect();
    let w = match mode {
        RatioMode::Sequence => 1.0,
        RatioMode::Token if free.is_empty() => 0.0,
        RatioMode::Token => 1.0 / free.len() as f64,
    };
    let mut grad = vec![0.0; new.len()];
    let mut value = 0.0;
    for &i in &free {
        let r = reference[i] - new[i];
        value += w * (r.exp() - r - 1.0);
        grad[i] = w * (1.0 - r.exp());
    }
    Ok((value, grad))
}

/// Per-output inputs to the objective when only token logprobs are known.
#[derive(Debug, Clone, PartialEq)]
pub struct LogprobItem {
    pub new: Vec<f64>,
    pub old: Vec<f64>,
    pub reference: Vec<f64>,
    pub forced: Vec<bool>,
    pub advantage: f64,
}

/// Objective over a group given token logprobs, using the sampled KL
/// estimate. Returns the value and, per output, the gradient with respect to
/// its new logprobs.
pub fn tgpo_objective(items: &[LogprobItem], eps: f64, beta: f64, mode: RatioMode) -> Result<(f64, Vec<Vec<f64>>), TgpoError> {
    if items.is_empty() {
        return Err(TgpoError::Shape("empty group".into()));
    }
    let n = items.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(items.len());
    for it in items {
        let (s, ds) = surrogate(&it.new, &it.old, &it.forced, it.advantage, eps, mode)?;
        let (kl, dkl) = k3_kl(&it.new, &it.reference, &it.forced, mode)?;
        total += (s - beta * kl) / n;
        grads.push(ds.iter().zip(&dkl).map(|(a, b)| (a - beta * b) / n).collect());
    }
    Ok((total, grads))
}

/// Per-output inputs to the exact objective of a differentiable policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyItem {
    pub decisions: Vec<DecisionPoint>,
    /// Logprobs under the rollout policy, as stored with the sequence.
    pub old: Vec<f64>,
    pub forced: Vec<bool>,
    pub advantage: f64,
}

/// Exact KL between two categorical rows and its gradient with respect to
/// the logits of `p`.
fn row_kl(p_logits: &[f64], q_logits: &[f64]) -> (f64, Vec<f64>) {
    let lp = log_softmax(p_logits);
    let lq = log_softmax(q_logits);
    let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum();
    let grad = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b - kl)).collect();
    (kl, grad)
}

/// Objective value and its gradient with respect to `theta`'s parameters,
/// with exact per-decision KL to `reference`.
pub fn policy_objective(
    theta: &[f64],
    reference: &[f64],
    items: &[PolicyItem],
    eps: f64,
    beta: f64,
    mode: RatioMode,
) -> Result<(f64, Vec<f64>), TgpoError> {
    if items.is_empty() {
        return Err(TgpoError::Shape("empty group".into()));
    }
    if theta.len() != reference.len() {
        return Err(TgpoError::Shape("reference parameter count differs".into()));
    }
    let n = items.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for it in items {
        let new = token_logprobs(theta, &it.decisions, it.forced.len());
        let (s, ds) = surrogate(&new, &it.old, &it.forced, it.advantage, eps, mode)?;
        total += s / n;
        let free = it.forced.iter().filter(|f| !**f).count();
        let kl_w = match mode {
            RatioMode::Sequence => 1.0,
            RatioMode::Token if free == 0 => 0.0,
            RatioMode::Token => 1.0 / free as f64,
        };
        for dp in &it.decisions {
            if it.forced[dp.position] {
                continue;
            }
            let logits = row(theta, dp);
            let probs = softmax(logits);
            let chosen = dp.chosen.ok_or_else(|| TgpoError::NonFinite(format!("unscorable decision at {}", dp.position)))?;
            let up = ds[dp.position] / n;
            for (j, pj) in probs.iter().enumerate() {
                let onehot = if j == chosen { 1.0 } else { 0.0 };
                grad[dp.offset + j] += up * (onehot - pj);
            }
            if beta != 0.0 {
                let (kl, dkl) = row_kl(logits, row(reference, dp));
                total -= beta * kl_w * kl / n;
                for (j, d) in dkl.iter().enumerate() {
                    grad[dp.offset + j] -= beta * kl_w * d / n;
                }
            }
        }
    }
    Ok((total, grad))
}
