//! Policy interfaces and the toy categorical policy used for training checks.
//!
//! The toy policy makes one categorical decision per trace line (which
//! phrase, or stop) and one per subgoal block (which grounding from a fixed
//! menu). Every other token is determined by the grammar. A decision's
//! log-probability is attributed to the first token of the segment it
//! produces; all other tokens carry log-probability 0.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::tokens::{split_tokens, TokenSequence, Vocabulary, NEWLINE};
use super::TgpoError;
use crate::pddl::Literal;
use crate::scene_graph::SceneGraph;

/// What a policy is conditioned on.
#[derive(Debug, Clone, Copy)]
pub struct Prompt<'a> {
    pub instruction: &'a str,
    pub scene: &'a SceneGraph,
}

/// Sampling and scoring of output token sequences. The learner, the rollout
/// snapshot and the reference policy are all instances of this trait.
pub trait PolicyInterface: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Samples an output. With `forced_trace`, the trace block is fixed to
    /// those lines and only the subgoal blocks are sampled.
    fn sample(
        &self,
        prompt: &Prompt<'_>,
        forced_trace: Option<&[String]>,
        rng: &mut dyn RngCore,
    ) -> Result<TokenSequence, TgpoError>;

    /// Per-token log-probabilities of `tokens` under this policy.
    fn logprobs(&self, prompt: &Prompt<'_>, tokens: &[u32]) -> Result<Vec<f64>, TgpoError>;
}

/// One categorical choice: softmax over `params[offset..offset + len]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionPoint {
    /// Token position that carries the decision's log-probability.
    pub position: usize,
    pub offset: usize,
    pub len: usize,
    /// `None` when the observed segment is not one of the options.
    pub chosen: Option<usize>,
}

/// A policy whose log-probabilities are softmax rows of a parameter vector.
pub trait DifferentiablePolicy: PolicyInterface + Clone {
    fn params(&self) -> &[f64];
    fn with_params(&self, params: Vec<f64>) -> Self;
    /// The decisions behind `tokens`. They depend on the tokens only, not on
    /// the parameter values.
    fn decision_points(&self, prompt: &Prompt<'_>, tokens: &[u32]) -> Result<Vec<DecisionPoint>, TgpoError>;
}

pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    log_softmax(row).into_iter().map(f64::exp).collect()
}

pub fn row<'a>(params: &'a [f64], dp: &DecisionPoint) -> &'a [f64] {
    &params[dp.offset..dp.offset + dp.len]
}

pub fn point_logprob(params: &[f64], dp: &DecisionPoint) -> f64 {
    match dp.chosen {
        Some(c) => log_softmax(row(params, dp))[c],
        None => f64::NEG_INFINITY,
    }
}

/// Token log-probabilities implied by decision points: zero except at
/// decision positions.
pub fn token_logprobs(params: &[f64], dps: &[DecisionPoint], n_tokens: usize) -> Vec<f64> {
    let mut lp = vec![0.0; n_tokens];
    for dp in dps {
        lp[dp.position] = point_logprob(params, dp);
    }
    lp
}

/// One subgoal block the toy policy can emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grounding {
    pub objects: Vec<String>,
    pub goals: Vec<Literal>,
}

impl Grounding {
    /// Body of the block: the `objects:` and `goals:` lines.
    pub fn body(&self) -> String {
        let goals: Vec<String> = self.goals.iter().map(ToString::to_string).collect();
        format!("objects: {}\ngoals: {}\n", self.objects.join(" "), goals.join(" "))
    }
}

/// The fixed structure of a toy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub tasks: Vec<String>,
    pub phrases: Vec<String>,
    pub menu: Vec<Grounding>,
    pub max_lines: usize,
}

#[derive(Debug)]
struct ToyShared {
    spec: ToySpec,
    vocab: Vocabulary,
    phrase_ids: HashMap<String, usize>,
    menu_tokens: Vec<Vec<u32>>,
    trace_size: usize,
}

/// Categorical policy over trace phrases and subgoal groundings.
///
/// Parameters: for each task and previous phrase (or start), a row over the
/// phrases plus stop; then for each phrase (or unknown), a row over the menu.
#[derive(Debug, Clone)]
pub struct ToyPolicy {
    shared: Arc<ToyShared>,
    params: Vec<f64>,
    greedy: bool,
}

impl ToyPolicy {
    pub fn new(spec: ToySpec, params: Option<Vec<f64>>) -> Result<ToyPolicy, TgpoError> {
        if spec.phrases.is_empty() || spec.menu.is_empty() || spec.tasks.is_empty() || spec.max_lines == 0 {
            return Err(TgpoError::Config("toy policy needs tasks, phrases, menu and max_lines > 0".into()));
        }
        let mut words: Vec<String> = Vec::new();
        for p in &spec.phrases {
            words.extend(split_tokens(p));
        }
        for g in &spec.menu {
            words.extend(split_tokens(&g.body()));
        }
        let vocab = Vocabulary::new(spec.max_lines.max(8), words);
        let menu_tokens = spec
            .menu
            .iter()
            .map(|g| vocab.encode(&g.body()))
            .collect::<Result<Vec<_>, _>>()?;
        let phrase_ids = spec.phrases.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let p1 = spec.phrases.len() + 1;
        let trace_size = spec.tasks.len() * p1 * p1;
        let total = trace_size + p1 * spec.menu.len();
        let params = params.unwrap_or_else(|| vec![0.0; total]);
        if params.len() != total {
            return Err(TgpoError::Shape(format!("expected {total} parameters, got {}", params.len())));
        }
        Ok(ToyPolicy {
            shared: Arc::new(ToyShared {
                spec,
                vocab,
                phrase_ids,
                menu_tokens,
                trace_size,
            }),
            params,
            greedy: false,
        })
    }

    /// Always picks the most likely option (lowest index on ties).
    pub fn greedy(mut self) -> Self {
        self.greedy = true;
        self
    }

    pub fn spec(&self) -> &ToySpec {
        &self.shared.spec
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn n_phrases(&self) -> usize {
        self.shared.spec.phrases.len()
    }

    /// Index of the stop option in a trace row.
    pub fn stop_option(&self) -> usize {
        self.n_phrases()
    }

    /// Offset of the trace row for `task` after `prev` (`None` = start).
    pub fn trace_row(&self, task: usize, prev: Option<usize>) -> usize {
        let p1 = self.n_phrases() + 1;
        (task * p1 + prev.unwrap_or(self.n_phrases())) * p1
    }

    /// Offset of the grounding row for `phrase` (`None` = unknown phrase).
    pub fn grounding_row(&self, phrase: Option<usize>) -> usize {
        self.shared.trace_size + phrase.unwrap_or(self.n_phrases()) * self.shared.spec.menu.len()
    }

    pub fn phrase_index(&self, text: &str) -> Option<usize> {
        self.shared.phrase_ids.get(text).copied()
    }

    fn task_index(&self, instruction: &str) -> Result<usize, TgpoError> {
        self.shared
            .spec
            .tasks
            .iter()
            .position(|t| t == instruction)
            .ok_or_else(|| TgpoError::UnknownTask(instruction.to_string()))
    }

    fn choose(&self, offset: usize, len: usize, rng: &mut dyn RngCore) -> usize {
        let r = &self.params[offset..offset + len];
        if self.greedy {
            let mut best = 0;
            for (i, v) in r.iter().enumerate() {
                if *v > r[best] {
                    best = i;
                }
            }
            return best;
        }
        let probs = softmax(r);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        len - 1
    }

    fn id(&self, w: &str) -> Result<u32, TgpoError> {
        self.shared.vocab.id(w).ok_or_else(|| TgpoError::Vocabulary(w.to_string()))
    }

    fn push_line(&self, tokens: &mut Vec<u32>, i: usize, text: &str) -> Result<(), TgpoError> {
        tokens.push(self.id(&format!("{i}."))?);
        for w in split_tokens(text) {
            tokens.push(self.id(&w)?);
        }
        tokens.push(self.id(NEWLINE)?);
        Ok(())
    }
}

fn structure(msg: impl Into<String>) -> TgpoError {
    TgpoError::Structure(msg.into())
}

impl PolicyInterface for ToyPolicy {
    fn vocabulary(&self) -> &Vocabulary {
        &self.shared.vocab
    }

    fn sample(
        &self,
        prompt: &Prompt<'_>,
        forced_trace: Option<&[String]>,
        rng: &mut dyn RngCore,
    ) -> Result<TokenSequence, TgpoError> {
        let task = self.task_index(prompt.instruction)?;
        let mut tokens = vec![self.id("<trace>")?, self.id(NEWLINE)?];
        let mut lines: Vec<Option<usize>> = Vec::new();
        match forced_trace {
            Some(trace) => {
                if trace.is_empty() {
                    return Err(TgpoError::EmptyTrace);
                }
                for (i, text) in trace.iter().enumerate() {
                    self.push_line(&mut tokens, i + 1, text)?;
                    lines.push(self.phrase_index(text));
                }
            }
            None => {
                let mut prev = None;
                while lines.len() < self.shared.spec.max_lines {
                    let len = if lines.is_empty() { self.n_phrases() } else { self.n_phrases() + 1 };
                    let pick = self.choose(self.trace_row(task, prev), len, rng);
                    if pick == self.stop_option() {
                        break;
                    }
                    let i = lines.len() + 1;
                    let text = self.shared.spec.phrases[pick].clone();
                    self.push_line(&mut tokens, i, &text)?;
                    lines.push(Some(pick));
                    prev = Some(pick);
                }
            }
        }
        tokens.push(self.id("</trace>")?);
        tokens.push(self.id(NEWLINE)?);
        let forced_len = if forced_trace.is_some() { tokens.len() } else { 0 };
        for (k, phrase) in lines.iter().enumerate() {
            let g = self.choose(self.grounding_row(*phrase), self.shared.spec.menu.len(), rng);
            tokens.push(self.id(&format!("<subgoal k={}>", k + 1))?);
            tokens.push(self.id(NEWLINE)?);
            tokens.extend_from_slice(&self.shared.menu_tokens[g]);
            tokens.push(self.id("</subgoal>")?);
            tokens.push(self.id(NEWLINE)?);
        }
        let logprobs = self.logprobs(prompt, &tokens)?;
        let forced = (0..tokens.len()).map(|i| i < forced_len).collect();
        Ok(TokenSequence {
            tokens,
            logprobs,
            forced,
        })
    }

    fn logprobs(&self, prompt: &Prompt<'_>, tokens: &[u32]) -> Result<Vec<f64>, TgpoError> {
        let dps = self.decision_points(prompt, tokens)?;
        Ok(token_logprobs(&self.params, &dps, tokens.len()))
    }
}

impl DifferentiablePolicy for ToyPolicy {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn with_params(&self, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), self.params.len(), "parameter count is fixed");
        ToyPolicy {
            shared: Arc::clone(&self.shared),
            params,
            greedy: self.greedy,
        }
    }

    fn decision_points(&self, prompt: &Prompt<'_>, tokens: &[u32]) -> Result<Vec<DecisionPoint>, TgpoError> {
        let task = self.task_index(prompt.instruction)?;
        let vocab = &self.shared.vocab;
        let words: Vec<&str> = tokens
            .iter()
            .map(|&t| vocab.word(t).ok_or_else(|| TgpoError::Vocabulary(format!("#{t}"))))
            .collect::<Result<_, _>>()?;
        let mut pos = 0usize;
        let expect = |pos: &mut usize, w: &str| -> Result<(), TgpoError> {
            if words.get(*pos) == Some(&w) {
                *pos += 1;
                Ok(())
            } else {
                Err(structure(format!("expected `{}` at token {}", w.escape_debug(), *pos)))
            }
        };
        expect(&mut pos, "<trace>")?;
        expect(&mut pos, NEWLINE)?;

        let p = self.n_phrases();
        let max_lines = self.shared.spec.max_lines;
        let mut dps = Vec::new();
        let mut lines: Vec<Option<usize>> = Vec::new();
        let mut prev = None;
        loop {
            if words.get(pos) == Some(&"</trace>") {
                if lines.is_empty() {
                    return Err(TgpoError::EmptyTrace);
                }
                if lines.len() < max_lines {
                    dps.push(DecisionPoint {
                        position: pos,
                        offset: self.trace_row(task, prev),
                        len: p + 1,
                        chosen: Some(self.stop_option()),
                    });
                }
                pos += 1;
                expect(&mut pos, NEWLINE)?;
                break;
            }
            let i = lines.len() + 1;
            let start = pos;
            expect(&mut pos, &format!("{i}."))?;
            let end = words[pos..]
                .iter()
                .position(|w| *w == NEWLINE)
                .map(|e| pos + e)
                .ok_or_else(|| structure("unterminated trace line"))?;
            let phrase = self.phrase_index(&words[pos..end].join(" "));
            let chosen = if i > max_lines { None } else { phrase };
            dps.push(DecisionPoint {
                position: start,
                offset: self.trace_row(task, prev),
                len: if i == 1 { p } else { p + 1 },
                chosen,
            });
            lines.push(phrase);
            prev = phrase;
            pos = end + 1;
        }

        let menu = &self.shared.menu_tokens;
        for (k, phrase) in lines.iter().enumerate() {
            let header = pos;
            expect(&mut pos, &format!("<subgoal k={}>", k + 1))?;
            expect(&mut pos, NEWLINE)?;
            let close = self.id("</subgoal>")?;
            let end = tokens[pos..]
                .iter()
                .position(|t| *t == close)
                .map(|e| pos + e)
                .ok_or_else(|| structure("unterminated subgoal block"))?;
            let body = &tokens[pos..end];
            dps.push(DecisionPoint {
                position: header,
                offset: self.grounding_row(*phrase),
                len: menu.len(),
                chosen: menu.iter().position(|m| m.as_slice() == body),
            });
            pos = end + 1;
            expect(&mut pos, NEWLINE)?;
        }
        if pos != tokens.len() {
            return Err(structure(format!("{} trailing tokens", tokens.len() - pos)));
        }
        Ok(dps)
    }
}
