use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::improver::{improve_trace, Feedback};
use super::policy::{DifferentiablePolicy, PolicyInterface, Prompt};
use super::tokens::TokenSequence;
use super::{group_advantages, policy_objective, PolicyItem, TgpoConfig, TgpoError};
use crate::llm_client::ChatService;
use crate::pddl::Domain;
use crate::pipeline::{self, PipelineOptions, PipelineResult, PolicyOutput};
use crate::planner::Plan;
use crate::reward::{self, CompletionLabel, RewardBreakdown, ReviewerVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    FirstPass,
    /// Regenerated from the first-pass candidate with this index.
    Regenerated { source: usize },
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub sequence: TokenSequence,
    pub text: String,
    pub parsed: Result<PolicyOutput, String>,
    pub result: Option<Result<PipelineResult, String>>,
    pub verdict: Option<ReviewerVerdict>,
    pub breakdown: RewardBreakdown,
    pub origin: Origin,
}

impl Candidate {
    pub fn reward(&self) -> f64 {
        self.breakdown.reward
    }

    pub fn trace(&self) -> Option<Vec<String>> {
        self.parsed
            .as_ref()
            .ok()
            .map(|o| o.trace_texts().into_iter().map(str::to_string).collect())
    }

    pub fn feedback(&self) -> Feedback {
        let mut fb = Feedback::default();
        match (&self.parsed, &self.result) {
            (Err(e), _) => fb.error = Some(format!("output does not parse: {e}")),
            (Ok(_), Some(Err(e))) => fb.error = Some(e.clone()),
            (Ok(_), Some(Ok(r))) => {
                fb.subtasks = r.subtasks.iter().map(|s| (s.k, s.result.status())).collect();
            }
            (Ok(_), None) => {}
        }
        if let Some(v) = &self.verdict {
            fb.label = Some(v.label.to_string());
            fb.critique = v.critique.clone();
            fb.unmet = v.unmet.clone();
        }
        fb
    }
}

#[derive(Debug, Clone)]
pub struct CandidateGroup {
    pub instruction: String,
    pub candidates: Vec<Candidate>,
    /// Filled in once the group is complete.
    pub advantages: Vec<f64>,
}

impl CandidateGroup {
    pub fn rewards(&self) -> Vec<f64> {
        self.candidates.iter().map(Candidate::reward).collect()
    }
}

/// Everything needed to score an output.
pub struct EvalContext<'a> {
    pub domain: &'a Domain,
    pub pipeline: PipelineOptions,
    pub reviewer: &'a dyn ChatService,
    pub reviewer_model: &'a str,
}

/// Parses, plans and reviews one sequence. Unparseable outputs get reward 0
/// and no review.
pub fn evaluate_sequence(
    ctx: &EvalContext<'_>,
    policy: &dyn PolicyInterface,
    prompt: &Prompt<'_>,
    sequence: TokenSequence,
    origin: Origin,
) -> Result<Candidate, TgpoError> {
    let text = policy.vocabulary().decode(&sequence.tokens)?;
    let parsed = pipeline::parse_output(&text).map_err(|e| e.to_string());
    let Ok(out) = &parsed else {
        return Ok(Candidate {
            sequence,
            text,
            parsed,
            result: None,
            verdict: None,
            breakdown: RewardBreakdown::new(false, CompletionLabel::Bad),
            origin,
        });
    };
    let result = pipeline::solve_sequence(prompt.scene, out, ctx.domain, &ctx.pipeline).map_err(|e| e.to_string());
    let (feasible, partial) = match &result {
        Ok(r) => (reward::feasibility(r) == 1, pipeline::compose(&r.subplans().into_iter().cloned().collect::<Vec<_>>())),
        Err(_) => (false, Plan::default()),
    };
    let verdict = reward::review(ctx.reviewer, ctx.reviewer_model, prompt.instruction, prompt.scene, &partial)?;
    let breakdown = RewardBreakdown::new(feasible, verdict.label);
    Ok(Candidate {
        sequence,
        text,
        parsed,
        result: Some(result),
        verdict: Some(verdict),
        breakdown,
        origin,
    })
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples and evaluates `n` independent outputs. Candidate `i` draws from
/// its own random stream, so results do not depend on scheduling.
pub fn rollout_group(
    policy: &dyn PolicyInterface,
    prompt: &Prompt<'_>,
    n: usize,
    ctx: &EvalContext<'_>,
    seed: u64,
) -> Result<CandidateGroup, TgpoError> {
    if n < 2 {
        return Err(TgpoError::Config(format!("group size {n} < 2")));
    }
    let candidates = (0..n)
        .into_par_iter()
        .map(|i| {
            let seq = policy.sample(prompt, None, &mut rng_for(seed, i as u64))?;
            evaluate_sequence(ctx, policy, prompt, seq, Origin::FirstPass)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CandidateGroup {
        instruction: prompt.instruction.to_string(),
        candidates,
        advantages: Vec::new(),
    })
}

/// Indices of candidates with reward strictly below `tau`, in order.
pub fn select_failed(group: &CandidateGroup, tau: f64) -> Result<Vec<usize>, TgpoError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(TgpoError::Config(format!("tau {tau} outside (0, 1)")));
    }
    Ok((0..group.candidates.len())
        .filter(|&i| group.candidates[i].reward() < tau)
        .collect())
}

/// Samples subgoals with the trace fixed to `trace` and evaluates the result.
pub fn constrained_rollout(
    policy: &dyn PolicyInterface,
    prompt: &Prompt<'_>,
    trace: &[String],
    ctx: &EvalContext<'_>,
    rng: &mut ChaCha8Rng,
    source: usize,
) -> Result<Candidate, TgpoError> {
    let seq = policy.sample(prompt, Some(trace), rng)?;
    evaluate_sequence(ctx, policy, prompt, seq, Origin::Regenerated { source })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub instruction: String,
    pub n: usize,
    pub n_prime: usize,
    pub first_pass_rewards: Vec<f64>,
    pub regenerated_rewards: Vec<f64>,
    pub first_pass_mean: f64,
    pub augmented_mean: f64,
    /// Objective at the rollout parameters, before the update.
    pub objective: f64,
    /// Objective at the updated parameters, same group and advantages.
    pub objective_after: f64,
    pub gradient_norm: f64,
    /// Share of regenerated candidates that beat their source; `None` when
    /// nothing was regenerated.
    pub improvement_fraction: Option<f64>,
}

pub struct StepOutcome<P> {
    pub policy: P,
    pub report: StepReport,
    pub group: CandidateGroup,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// One optimization step for a single prompt. The rollout snapshot is the
/// learner as passed in.
#[allow(clippy::too_many_arguments)]
pub fn tgpo_step<P: DifferentiablePolicy>(
    learner: &P,
    reference: &P,
    prompt: &Prompt<'_>,
    cfg: &TgpoConfig,
    ctx: &EvalContext<'_>,
    improver: &dyn ChatService,
    improver_model: &str,
    seed: u64,
) -> Result<StepOutcome<P>, TgpoError> {
    cfg.validate()?;
    let old = learner.clone();
    let n = cfg.group_size;
    let mut group = rollout_group(&old, prompt, n, ctx, seed)?;
    let first_pass_rewards = group.rewards();
    let failed = select_failed(&group, cfg.tau)?;

    let regenerated = failed
        .par_iter()
        .map(|&i| {
            let wrap = |pass, e| TgpoError::Candidate {
                pass,
                index: i,
                source: Box::new(e),
            };
            let cand = &group.candidates[i];
            let trace = match cand.trace() {
                Some(t) => t,
                // Nothing to rewrite without a parsed trace.
                None => return Ok(None),
            };
            let improved = improve_trace(improver, improver_model, prompt.instruction, &trace, &cand.feedback())
                .map_err(|e| wrap("improve", e))?;
            let mut rng = rng_for(seed, (n + i) as u64);
            constrained_rollout(&old, prompt, &improved, ctx, &mut rng, i)
                .map(Some)
                .map_err(|e| wrap("regenerate", e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let regenerated: Vec<Candidate> = regenerated.into_iter().flatten().collect();
    let regenerated_rewards: Vec<f64> = regenerated.iter().map(Candidate::reward).collect();
    let improved = regenerated
        .iter()
        .filter(|c| match c.origin {
            Origin::Regenerated { source } => c.reward() > first_pass_rewards[source],
            Origin::FirstPass => false,
        })
        .count();
    let improvement_fraction = (!regenerated.is_empty()).then(|| improved as f64 / regenerated.len() as f64);
    group.candidates.extend(regenerated);

    let rewards = group.rewards();
    group.advantages = group_advantages(&rewards, cfg.advantage);
    let items = group
        .candidates
        .iter()
        .zip(&group.advantages)
        .map(|(c, &a)| {
            Ok(PolicyItem {
                decisions: old.decision_points(prompt, &c.sequence.tokens)?,
                old: c.sequence.logprobs.clone(),
                forced: c.sequence.forced.clone(),
                advantage: a,
            })
        })
        .collect::<Result<Vec<_>, TgpoError>>()?;
    let (objective, grad) =
        policy_objective(old.params(), reference.params(), &items, cfg.epsilon, cfg.beta, cfg.ratio)?;
    let updated: Vec<f64> = old
        .params()
        .iter()
        .zip(&grad)
        .map(|(p, g)| p + cfg.learning_rate * g)
        .collect();
    let (objective_after, _) = policy_objective(&updated, reference.params(), &items, cfg.epsilon, cfg.beta, cfg.ratio)?;
    let report = StepReport {
        instruction: prompt.instruction.to_string(),
        n,
        n_prime: group.candidates.len(),
        first_pass_mean: mean(&first_pass_rewards),
        augmented_mean: mean(&rewards),
        first_pass_rewards,
        regenerated_rewards,
        objective,
        objective_after,
        gradient_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        improvement_fraction,
    };
    Ok(StepOutcome {
        policy: old.with_params(updated),
        report,
        group,
    })
}
