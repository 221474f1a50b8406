//! Rewards for policy outputs: a feasibility indicator times a completion
//! score from a reviewer, and the success rate over a set of tasks.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm_client::{ChatError, ChatMessage, ChatRequest, ChatService};
use crate::pddl::{self, Domain, Goal, Literal, Problem};
use crate::pipeline::PipelineResult;
use crate::planner::{self, Plan};
use crate::scene_graph::{self, SceneGraph};

/// Score given to a `Normal` review.
pub const ALPHA: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewardError {
    #[error("success rate of an empty evaluation set")]
    EmptyEvaluation,
    #[error(transparent)]
    Service(#[from] ChatError),
    #[error("reviewer response has no valid `LABEL:` line: {0}")]
    VerdictParse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompletionLabel {
    Bad,
    Normal,
    Good,
}

impl CompletionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CompletionLabel::Bad => "Bad",
            CompletionLabel::Normal => "Normal",
            CompletionLabel::Good => "Good",
        }
    }
}

impl fmt::Display for CompletionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CompletionLabel {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Bad" => Ok(CompletionLabel::Bad),
            "Normal" => Ok(CompletionLabel::Normal),
            "Good" => Ok(CompletionLabel::Good),
            other => Err(RewardError::VerdictParse(format!("unknown label `{other}`"))),
        }
    }
}

pub fn completion_score(label: CompletionLabel) -> f64 {
    match label {
        CompletionLabel::Bad => 0.0,
        CompletionLabel::Normal => ALPHA,
        CompletionLabel::Good => 1.0,
    }
}

/// 1 when every subtask was solved, 0 otherwise (resource limits included).
pub fn feasibility(result: &PipelineResult) -> u8 {
    let all = !result.subtasks.is_empty() && result.subtasks.iter().all(|s| s.result.is_solved());
    u8::from(all && result.plan.is_some())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub feasible: u8,
    pub completion: f64,
    pub reward: f64,
}

impl RewardBreakdown {
    pub fn new(feasible: bool, label: CompletionLabel) -> Self {
        let feasible = u8::from(feasible);
        let completion = completion_score(label);
        RewardBreakdown {
            feasible,
            completion,
            reward: f64::from(feasible) * completion,
        }
    }
}

pub fn reward(result: &PipelineResult, verdict: &ReviewerVerdict) -> RewardBreakdown {
    RewardBreakdown::new(feasibility(result) == 1, verdict.label)
}

/// Mean reward over evaluations.
pub fn success_rate(evals: &[RewardBreakdown]) -> Result<f64, RewardError> {
    if evals.is_empty() {
        return Err(RewardError::EmptyEvaluation);
    }
    Ok(evals.iter().map(|e| e.reward).sum::<f64>() / evals.len() as f64)
}

/// A category the reviewer says is missing, with the node it should go under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingObject {
    pub category: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerVerdict {
    pub label: CompletionLabel,
    pub critique: String,
    /// Goal literals the reviewer reports as not achieved.
    pub unmet: Vec<String>,
    pub missing_objects: Vec<MissingObject>,
}

pub const REVIEWER_SYSTEM: &str = "You review household robot plans. Judge whether executing the plan in the scene \
fulfils the user's instruction. List unmet goals as `UNMET: (literal)` lines and objects the scene lacks as \
`MISSING: <category> <parent id>` lines, add a short critique, and end with one line `LABEL: Bad`, \
`LABEL: Normal` or `LABEL: Good`.";

/// The reviewer request for an instruction, scene and (possibly partial) plan.
pub fn review_request(model: &str, q: &str, sg: &SceneGraph, plan: &Plan) -> ChatRequest {
    let mut user = format!("INSTRUCTION: {q}\nSCENE: {}\nPLAN:\n", sg.to_json_compact());
    for a in &plan.actions {
        user.push_str(&a.to_string());
        user.push('\n');
    }
    user.push_str("END PLAN\n");
    ChatRequest::new(model, vec![ChatMessage::system(REVIEWER_SYSTEM), ChatMessage::user(user)])
}

/// Parses a reviewer response. The last nonblank line must be the label.
pub fn parse_verdict(text: &str) -> Result<ReviewerVerdict, RewardError> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let last = lines.last().ok_or_else(|| RewardError::VerdictParse("empty response".into()))?;
    let label = last
        .strip_prefix("LABEL:")
        .ok_or_else(|| RewardError::VerdictParse(format!("last line is `{last}`")))?
        .trim()
        .parse()?;
    let mut critique = Vec::new();
    let mut unmet = Vec::new();
    let mut missing_objects = Vec::new();
    for line in &lines[..lines.len() - 1] {
        if let Some(rest) = line.strip_prefix("UNMET:") {
            unmet.push(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("MISSING:") {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(category), Some(parent), None) => missing_objects.push(MissingObject {
                    category: category.to_string(),
                    parent: parent.to_string(),
                }),
                _ => return Err(RewardError::VerdictParse(format!("bad MISSING line `{line}`"))),
            }
        } else {
            critique.push(*line);
        }
    }
    Ok(ReviewerVerdict {
        label,
        critique: critique.join("\n"),
        unmet,
        missing_objects,
    })
}

pub fn review(
    client: &dyn ChatService,
    model: &str,
    q: &str,
    sg: &SceneGraph,
    plan: &Plan,
) -> Result<ReviewerVerdict, RewardError> {
    let response = client.complete(&review_request(model, q, sg, plan))?;
    parse_verdict(&response.content)
}

/// Reviewer ground truth for one instruction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskTruth {
    pub goals: Vec<Literal>,
    /// Categories the scene must contain, with a suggested parent.
    pub requires: Vec<MissingObject>,
}

/// Offline reviewer. It reads the scene and plan back out of the prompt,
/// executes the plan up to its first inapplicable step, and labels the
/// result by how many ground-truth literals hold: all of them is `Good`, at
/// least one is `Normal`, none is `Bad`. Required categories absent from the
/// scene are reported as `MISSING` with label `Bad`.
pub struct GroundTruthReviewer {
    domain: Domain,
    truths: HashMap<String, TaskTruth>,
}

impl GroundTruthReviewer {
    pub fn new(domain: Domain) -> Self {
        GroundTruthReviewer {
            domain,
            truths: HashMap::new(),
        }
    }

    pub fn with_task(mut self, instruction: &str, truth: TaskTruth) -> Self {
        self.truths.insert(instruction.to_string(), truth);
        self
    }

    fn judge(&self, prompt: &str) -> Result<String, ChatError> {
        let decode = |m: &str| ChatError::Decode(format!("mock reviewer: {m}"));
        let q = field(prompt, "INSTRUCTION: ").ok_or_else(|| decode("no instruction"))?;
        let scene_text = field(prompt, "SCENE: ").ok_or_else(|| decode("no scene"))?;
        let sg = scene_graph::parse_scene_graph(scene_text).map_err(|e| decode(&e.to_string()))?;
        let truth = self.truths.get(q).ok_or_else(|| decode(&format!("no ground truth for `{q}`")))?;

        let missing: Vec<&MissingObject> = truth
            .requires
            .iter()
            .filter(|m| !sg.nodes().any(|n| n.category == m.category))
            .collect();
        if !missing.is_empty() {
            let mut out = String::new();
            for m in missing {
                out.push_str(&format!("MISSING: {} {}\n", m.category, m.parent));
            }
            out.push_str("The scene lacks objects the instruction needs.\nLABEL: Bad\n");
            return Ok(out);
        }

        let plan_text: String = prompt
            .lines()
            .skip_while(|l| *l != "PLAN:")
            .skip(1)
            .take_while(|l| *l != "END PLAN")
            .map(|l| format!("{l}\n"))
            .collect();
        let init = scene_graph::to_init_atoms(&sg, &self.domain).map_err(|e| decode(&e.to_string()))?;
        let known: Vec<Literal> = truth
            .goals
            .iter()
            .filter(|l| l.atom.args.iter().all(|a| sg.node(a).is_some()))
            .cloned()
            .collect();
        let mut state = init.clone();
        if let Ok(goal) = Goal::new(known) {
            let problem = Problem {
                name: "review".into(),
                domain: self.domain.name.clone(),
                objects: sg.pddl_objects(),
                init,
                goal,
            };
            // An unreadable plan counts as doing nothing.
            if let Ok(plan) = planner::parse_plan(&plan_text, &self.domain, &problem) {
                for a in &plan.actions {
                    match pddl::apply(&state, a) {
                        Ok(next) => state = next,
                        Err(_) => break,
                    }
                }
            }
        }
        let held: Vec<&Literal> = truth
            .goals
            .iter()
            .filter(|l| state.contains(&l.atom) == l.positive)
            .collect();
        let label = if held.len() == truth.goals.len() {
            CompletionLabel::Good
        } else if !held.is_empty() {
            CompletionLabel::Normal
        } else {
            CompletionLabel::Bad
        };
        let mut out = String::new();
        for l in &truth.goals {
            if !held.contains(&l) {
                out.push_str(&format!("UNMET: {l}\n"));
            }
        }
        out.push_str(&format!("{} of {} goals achieved.\nLABEL: {label}\n", held.len(), truth.goals.len()));
        Ok(out)
    }
}

fn field<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix))
}

impl ChatService for GroundTruthReviewer {
    fn complete(&self, req: &ChatRequest) -> Result<crate::llm_client::ChatResponse, ChatError> {
        req.validate()?;
        self.judge(req.last_user()).map(crate::llm_client::ChatResponse::text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_scores() {
        assert_eq!(completion_score(CompletionLabel::Bad), 0.0);
        assert_eq!(completion_score(CompletionLabel::Normal), 0.5);
        assert_eq!(completion_score(CompletionLabel::Good), 1.0);
    }

    #[test]
    fn product_rule() {
        assert_eq!(RewardBreakdown::new(false, CompletionLabel::Good).reward, 0.0);
        assert_eq!(RewardBreakdown::new(true, CompletionLabel::Normal).reward, 0.5);
        assert_eq!(RewardBreakdown::new(true, CompletionLabel::Good).reward, 1.0);
    }

    #[test]
    fn success_rates() {
        let mk = |r: f64| RewardBreakdown {
            feasible: 1,
            completion: r,
            reward: r,
        };
        assert_eq!(success_rate(&[mk(1.0), mk(0.0)]).unwrap(), 0.5);
        assert_eq!(success_rate(&[mk(1.0), mk(0.5), mk(0.0), mk(1.0)]).unwrap(), 0.625);
        assert_eq!(success_rate(&[]), Err(RewardError::EmptyEvaluation));
    }

    #[test]
    fn verdict_grammar() {
        let v = parse_verdict("UNMET: (clean cup_1)\nMISSING: towel towel_rack\nnot quite\nLABEL: Normal\n").unwrap();
        assert_eq!(v.label, CompletionLabel::Normal);
        assert_eq!(v.unmet, vec!["(clean cup_1)"]);
        assert_eq!(v.missing_objects[0].category, "towel");
        assert_eq!(v.critique, "not quite");
        assert!(parse_verdict("LABEL: Great").is_err());
        assert!(parse_verdict("LABEL: Good\ntrailing words").is_err());
        assert!(parse_verdict("").is_err());
    }
}
