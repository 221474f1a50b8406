//! Task synthesis: persona sampling, instruction generation at three
//! abstractness levels, and the annotate-check-repair loop that turns an
//! instruction into a verified decomposition.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm_client::{ChatError, ChatMessage, ChatRequest, ChatResponse, ChatService};
use crate::pddl::{parse_literal, Atom, Domain, Goal, Literal, Problem};
use crate::pipeline::{self, render_output, PipelineOptions, PolicyOutput, Subgoal, Subtask};
use crate::planner::{self, Plan, Validation};
use crate::reward::{self, CompletionLabel, MissingObject, RewardError};
use crate::scene_graph::{self, NodeKind, NodeState, Relation, SceneError, SceneGraph, SceneNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Service(#[from] ChatError),
    #[error("generator returned no usable instructions")]
    EmptyGeneration,
    #[error("unknown parent `{0}`")]
    UnknownParent(String),
    #[error("candidate set for `{0}` is empty")]
    EmptyCandidateSet(String),
    #[error("invalid weights for `{0}`")]
    Weights(String),
    #[error("retry budget must be at least 1")]
    Budget,
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Attribute values personas are drawn from. `weights` may give a weight
/// vector for any attribute by name; the rest are uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateSets {
    pub age: Vec<String>,
    pub occupation: Vec<String>,
    pub culture: Vec<String>,
    pub role: Vec<String>,
    pub extra: BTreeMap<String, Vec<String>>,
    pub weights: BTreeMap<String, Vec<f64>>,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for CandidateSets {
    fn default() -> Self {
        CandidateSets {
            age: strings(&["18-24", "25-34", "35-44", "45-54", "55-64", "65+"]),
            occupation: strings(&[
                "nurse",
                "teacher",
                "software engineer",
                "chef",
                "student",
                "retired",
                "accountant",
                "electrician",
                "artist",
                "farmer",
                "shop owner",
                "doctor",
                "driver",
                "researcher",
                "lawyer",
                "cleaner",
                "musician",
                "police officer",
                "pharmacist",
                "stay-at-home parent",
            ]),
            culture: strings(&[
                "East Asian",
                "South Asian",
                "Southeast Asian",
                "Middle Eastern",
                "North African",
                "Sub-Saharan African",
                "Western European",
                "Eastern European",
                "Latin American",
                "North American",
            ]),
            role: strings(&["parent", "child", "grandparent", "roommate", "live-alone"]),
            extra: BTreeMap::new(),
            weights: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaSkeleton {
    pub age: String,
    pub occupation: String,
    pub culture: String,
    pub role: String,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl PersonaSkeleton {
    pub fn describe(&self) -> String {
        let mut s = format!(
            "age {}, {}, {} background, household role {}",
            self.age, self.occupation, self.culture, self.role
        );
        for (k, v) in &self.extra {
            let _ = write!(s, ", {k} {v}");
        }
        s
    }
}

fn draw(rng: &mut ChaCha8Rng, name: &str, values: &[String], sets: &CandidateSets) -> Result<String, SynthError> {
    if values.is_empty() {
        return Err(SynthError::EmptyCandidateSet(name.to_string()));
    }
    let i = match sets.weights.get(name) {
        Some(w) => {
            if w.len() != values.len() {
                return Err(SynthError::Weights(name.to_string()));
            }
            WeightedIndex::new(w)
                .map_err(|_| SynthError::Weights(name.to_string()))?
                .sample(rng)
        }
        None => rng.random_range(0..values.len()),
    };
    Ok(values[i].clone())
}

/// Draws one persona. The same seed and sets always give the same persona.
pub fn sample_persona(seed: u64, sets: &CandidateSets) -> Result<PersonaSkeleton, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let age = draw(&mut rng, "age", &sets.age, sets)?;
    let occupation = draw(&mut rng, "occupation", &sets.occupation, sets)?;
    let culture = draw(&mut rng, "culture", &sets.culture, sets)?;
    let role = draw(&mut rng, "role", &sets.role, sets)?;
    let mut extra = BTreeMap::new();
    for (k, values) in &sets.extra {
        extra.insert(k.clone(), draw(&mut rng, k, values, sets)?);
    }
    Ok(PersonaSkeleton {
        age,
        occupation,
        culture,
        role,
        extra,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Abstractness {
    /// The instruction names the action to take.
    Easy,
    /// Long-horizon, with several steps and constraints.
    Complex,
    /// States a need without saying how to meet it.
    Abstract,
}

impl Abstractness {
    pub const ALL: [Abstractness; 3] = [Abstractness::Easy, Abstractness::Complex, Abstractness::Abstract];

    pub fn as_str(self) -> &'static str {
        match self {
            Abstractness::Easy => "easy",
            Abstractness::Complex => "complex",
            Abstractness::Abstract => "abstract",
        }
    }

    pub fn templates(self) -> &'static [&'static str] {
        match self {
            Abstractness::Easy => &[
                "Write household instructions this person might give a robot. Each must name the exact action and the objects involved.",
                "List simple one-step chores this person would ask for, stating the action and the object explicitly.",
            ],
            Abstractness::Complex => &[
                "Write long-horizon household instructions this person might give a robot. Each should chain several steps and include ordering constraints.",
                "List multi-step chores with conditions, such as doing one thing before another, that fit this person's routine.",
            ],
            Abstractness::Abstract => &[
                "Write household requests this person might make that express a need at a high level without naming the actions to take.",
                "List things this person might say to a robot when they want something done but leave the steps implicit.",
            ],
        }
    }
}

/// An abstractness level plus which of its prompt templates to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier {
    pub level: Abstractness,
    pub template: usize,
}

impl Tier {
    pub fn new(level: Abstractness, template: usize) -> Tier {
        Tier { level, template }
    }

    pub fn template_text(&self) -> &'static str {
        let t = self.level.templates();
        t[self.template % t.len()]
    }
}

pub const GENERATOR_SYSTEM: &str = "You write household task instructions for a robot operating in the given \
scene. Answer with one instruction per line, each line starting with `- `.";

pub fn generation_request(model: &str, sg: &SceneGraph, persona: &PersonaSkeleton, tier: Tier) -> ChatRequest {
    let user = format!(
        "TIER: {}\nTEMPLATE: {}\nPERSONA: {}\nSCENE: {}\n",
        tier.level.as_str(),
        tier.template_text(),
        persona.describe(),
        sg.to_json_compact()
    );
    ChatRequest::new(model, vec![ChatMessage::system(GENERATOR_SYSTEM), ChatMessage::user(user)])
}

/// Instruction lines from a generator reply. Only lines marked as list items
/// (`- `, `* ` or `N. `) count.
pub fn parse_instructions(text: &str) -> Result<Vec<String>, SynthError> {
    let out: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter_map(|l| {
            if let Some(rest) = l.strip_prefix("- ").or_else(|| l.strip_prefix("* ")) {
                return Some(rest);
            }
            let (num, rest) = l.split_once(". ")?;
            (!num.is_empty() && num.bytes().all(|b| b.is_ascii_digit())).then_some(rest)
        })
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if out.is_empty() {
        Err(SynthError::EmptyGeneration)
    } else {
        Ok(out)
    }
}

pub fn generate_tasks(
    client: &dyn ChatService,
    model: &str,
    sg: &SceneGraph,
    persona: &PersonaSkeleton,
    tier: Tier,
) -> Result<Vec<String>, SynthError> {
    let response = client.complete(&generation_request(model, sg, persona, tier))?;
    parse_instructions(&response.content)
}

/// Places one new object per entry under its suggested parent. Existing
/// nodes and edges are untouched. Ids are `<category>_<n>` with the smallest
/// unused `n >= 1`.
pub fn repair_scene(sg: &SceneGraph, missing: &[MissingObject]) -> Result<SceneGraph, SynthError> {
    let mut out = sg.clone();
    for m in missing {
        let parent = out
            .node(&m.parent)
            .ok_or_else(|| SynthError::UnknownParent(m.parent.clone()))?;
        let relation = match parent.kind {
            NodeKind::Room => Relation::In,
            NodeKind::Furniture | NodeKind::Object if parent.state.openness.is_some() => Relation::In,
            _ => Relation::On,
        };
        let id = (1..)
            .map(|n| format!("{}_{n}", m.category))
            .find(|id| out.node(id).is_none())
            .expect("unbounded search");
        let node = SceneNode {
            id,
            kind: NodeKind::Object,
            category: m.category.clone(),
            state: NodeState::default(),
        };
        out = out.with_node(node, &m.parent, relation)?;
    }
    Ok(out)
}

pub const ANNOTATOR_SYSTEM: &str = "You decompose household instructions for a robot. Given the instruction and \
the scene, reply with a `<trace>` block of numbered subtasks followed by one `<subgoal k=N>` block per subtask \
listing `objects:` and `goals:` as PDDL literals. Use the feedback from earlier attempts when present.";

fn annotation_request(model: &str, q: &str, sg: &SceneGraph, feedback: &[String]) -> ChatRequest {
    let mut user = format!("INSTRUCTION: {q}\nSCENE: {}\n", sg.to_json_compact());
    if !feedback.is_empty() {
        user.push_str("FEEDBACK:\n");
        for f in feedback {
            let _ = writeln!(user, "{f}");
        }
        user.push_str("END FEEDBACK\n");
    }
    ChatRequest::new(model, vec![ChatMessage::system(ANNOTATOR_SYSTEM), ChatMessage::user(user)])
}

/// Everything needed to check one annotation.
pub struct AnnotateContext<'a> {
    pub domain: &'a Domain,
    pub pipeline: PipelineOptions,
    pub reviewer: &'a dyn ChatService,
    pub reviewer_model: &'a str,
    pub annotator_model: &'a str,
}

/// A verified annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub instruction: String,
    pub scene_id: String,
    /// Scene the plan was checked against, after any repairs (compact JSON).
    pub scene: String,
    pub trace: Vec<String>,
    /// The full output text: trace and subgoal blocks.
    pub output: String,
    pub plan: Vec<String>,
    pub label: CompletionLabel,
    pub retries: usize,
    /// Ids of objects injected by scene repair.
    pub injected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Annotation {
    Accepted(AnnotationRecord),
    Rejected {
        instruction: String,
        scene_id: String,
        reason: String,
        attempts: usize,
    },
}

/// Asks `annotator` for a decomposition, plans it and has it reviewed,
/// feeding problems back until a feasible `Normal` or `Good` result is
/// found or `budget` generation calls have been made.
pub fn hi_pddl_annotate(
    annotator: &dyn ChatService,
    ctx: &AnnotateContext<'_>,
    q: &str,
    scene_id: &str,
    sg: &SceneGraph,
    budget: usize,
) -> Result<Annotation, SynthError> {
    if budget == 0 {
        return Err(SynthError::Budget);
    }
    let mut scene = sg.clone();
    let mut injected = Vec::new();
    let mut feedback: Vec<String> = Vec::new();
    for attempt in 0..budget {
        let response = annotator.complete(&annotation_request(ctx.annotator_model, q, &scene, &feedback))?;
        feedback.clear();
        let out = match pipeline::parse_output(&response.content) {
            Ok(o) => o,
            Err(e) => {
                feedback.push(format!("error: output does not parse: {e}"));
                continue;
            }
        };
        let (result, partial) = match pipeline::solve_sequence(&scene, &out, ctx.domain, &ctx.pipeline) {
            Ok(r) => {
                for s in &r.subtasks {
                    feedback.push(format!("subtask {}: {}", s.k, s.result.status()));
                }
                let plans: Vec<Plan> = r.subplans().into_iter().cloned().collect();
                let partial = pipeline::compose(&plans);
                (Some(r), partial)
            }
            Err(e) => {
                feedback.push(format!("error: {e}"));
                (None, Plan::default())
            }
        };
        let verdict = reward::review(ctx.reviewer, ctx.reviewer_model, q, &scene, &partial)?;
        let feasible = result.as_ref().is_some_and(|r| r.feasible());
        if feasible && verdict.label != CompletionLabel::Bad && verdict.missing_objects.is_empty() {
            return Ok(Annotation::Accepted(AnnotationRecord {
                instruction: q.to_string(),
                scene_id: scene_id.to_string(),
                scene: scene.to_json_compact(),
                trace: out.trace_texts().into_iter().map(str::to_string).collect(),
                output: render_output(&out),
                plan: partial.actions.iter().map(ToString::to_string).collect(),
                label: verdict.label,
                retries: attempt,
                injected,
            }));
        }
        feedback.push(format!("reviewer: {}", verdict.label));
        feedback.extend(verdict.critique.lines().map(|c| format!("critique: {c}")));
        feedback.extend(verdict.unmet.iter().map(|u| format!("UNMET: {u}")));
        if !verdict.missing_objects.is_empty() {
            let before: Vec<String> = scene.nodes().map(|n| n.id.clone()).collect();
            scene = repair_scene(&scene, &verdict.missing_objects)?;
            for n in scene.nodes() {
                if !before.contains(&n.id) {
                    feedback.push(format!("added: {} ({})", n.id, n.category));
                    injected.push(n.id.clone());
                }
            }
        }
    }
    Ok(Annotation::Rejected {
        instruction: q.to_string(),
        scene_id: scene_id.to_string(),
        reason: "budget exhausted".into(),
        attempts: budget,
    })
}

/// Re-checks a record from scratch: the plan must execute in the recorded
/// scene and leave the last subgoal satisfied.
pub fn validate_record(record: &AnnotationRecord, domain: &Domain) -> Result<Validation, String> {
    let sg = scene_graph::parse_scene_graph(&record.scene).map_err(|e| e.to_string())?;
    let out = pipeline::parse_output(&record.output).map_err(|e| e.to_string())?;
    let last = out.subgoals.last().ok_or("no subgoals")?;
    let problem = Problem {
        name: "record".into(),
        domain: domain.name.clone(),
        objects: sg.pddl_objects(),
        init: scene_graph::to_init_atoms(&sg, domain).map_err(|e| e.to_string())?,
        goal: Goal::new(last.literals.iter().cloned()).map_err(|e| e.to_string())?,
    };
    let plan = planner::parse_plan(&record.plan.join("\n"), domain, &problem).map_err(|e| e.to_string())?;
    Ok(planner::validate_plan(domain, &problem, &plan))
}

/// Goals of an instruction in the canonical form the offline generator
/// writes: clauses `make <id> <state>` or `put <id> on|in <id>`, joined by
/// ` and then `.
pub fn canonical_goals(instruction: &str) -> Option<Vec<Literal>> {
    instruction
        .split(" and then ")
        .map(|clause| {
            let w: Vec<&str> = clause.split_whitespace().collect();
            match w.as_slice() {
                ["make", id, state] => Some(Literal::pos(Atom::new(*state, [*id]))),
                ["put", id, rel @ ("on" | "in"), target] => Some(Literal::pos(Atom::new(*rel, [*id, *target]))),
                _ => None,
            }
        })
        .collect()
}

fn opposite(state: &str) -> Option<&'static str> {
    Some(match state {
        "open" => "closed",
        "closed" => "open",
        "clean" => "dirty",
        "dirty" => "clean",
        "powered-on" => "powered-off",
        "powered-off" => "powered-on",
        "filled" => "empty",
        "empty" => "filled",
        _ => return None,
    })
}

fn scene_field(prompt: &str) -> Result<SceneGraph, ChatError> {
    let text = prompt
        .lines()
        .find_map(|l| l.strip_prefix("SCENE: "))
        .ok_or_else(|| ChatError::Decode("no scene in prompt".into()))?;
    scene_graph::parse_scene_graph(text).map_err(|e| ChatError::Decode(e.to_string()))
}

/// Offline instruction generator. It proposes canonical instructions that
/// change some state in the scene: single clauses for the easy level, two or
/// three chained clauses otherwise. Choices are seeded by the request
/// fingerprint.
#[derive(Debug, Clone)]
pub struct SceneTaskGenerator {
    pub per_request: usize,
}

impl Default for SceneTaskGenerator {
    fn default() -> Self {
        SceneTaskGenerator { per_request: 3 }
    }
}

impl SceneTaskGenerator {
    fn clauses(sg: &SceneGraph) -> Vec<String> {
        let mut out = Vec::new();
        let surfaces: Vec<&str> = sg
            .nodes()
            .filter(|n| n.kind == NodeKind::Furniture && n.state.openness.is_none())
            .map(|n| n.id.as_str())
            .collect();
        for n in sg.nodes() {
            if n.kind == NodeKind::Room {
                continue;
            }
            for p in n.state.predicates() {
                if let Some(o) = opposite(p) {
                    if o == "dirty" || o == "empty" || o == "powered-off" {
                        continue;
                    }
                    out.push(format!("make {} {o}", n.id));
                }
            }
            if n.kind == NodeKind::Object {
                let parent = sg.parent(&n.id).map(|(p, _)| p);
                for s in &surfaces {
                    if Some(*s) != parent {
                        out.push(format!("put {} on {s}", n.id));
                    }
                }
            }
        }
        out
    }

    fn answer(&self, prompt: &str, seed: u64) -> Result<String, ChatError> {
        let sg = scene_field(prompt)?;
        let level = prompt
            .lines()
            .find_map(|l| l.strip_prefix("TIER: "))
            .unwrap_or("easy");
        let clauses = Self::clauses(&sg);
        if clauses.is_empty() {
            return Ok("There is nothing to do in this scene.".into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = String::new();
        for _ in 0..self.per_request {
            let parts = if level == "easy" { 1 } else { rng.random_range(2..=3) };
            let mut picked: Vec<&str> = Vec::new();
            for _ in 0..parts {
                let c = &clauses[rng.random_range(0..clauses.len())];
                if !picked.contains(&c.as_str()) {
                    picked.push(c);
                }
            }
            let _ = writeln!(out, "- {}", picked.join(" and then "));
        }
        Ok(out)
    }
}

impl ChatService for SceneTaskGenerator {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate()?;
        let fp = req.fingerprint();
        let seed = u64::from_str_radix(&fp[..16], 16).map_err(|e| ChatError::Decode(e.to_string()))?;
        self.answer(req.last_user(), seed).map(ChatResponse::text)
    }
}

/// Offline annotator for canonical instructions. One subtask per clause. On
/// the first attempt it forgets that closed containers must be opened; once
/// feedback is present it opens the container holding (or receiving) each
/// object first.
#[derive(Debug, Clone, Default)]
pub struct CanonicalAnnotator;

impl CanonicalAnnotator {
    fn answer(&self, prompt: &str) -> Result<String, ChatError> {
        let q = prompt
            .lines()
            .find_map(|l| l.strip_prefix("INSTRUCTION: "))
            .ok_or_else(|| ChatError::Decode("no instruction in prompt".into()))?;
        let sg = scene_field(prompt)?;
        let careful = prompt.lines().any(|l| l == "FEEDBACK:");
        let goals = canonical_goals(q).ok_or_else(|| ChatError::Decode(format!("cannot read `{q}`")))?;
        let mut trace = Vec::new();
        let mut subgoals = Vec::new();
        let mut opened: Vec<String> = Vec::new();
        let mut push = |text: String, objects: Vec<String>, lit: Literal| {
            trace.push(Subtask {
                index: trace.len() + 1,
                text,
            });
            subgoals.push(Subgoal {
                index: subgoals.len() + 1,
                objects: objects.into_iter().collect(),
                literals: vec![lit],
            });
        };
        for g in goals {
            if careful {
                for id in &g.atom.args {
                    let container = match sg.parent(id) {
                        Some((p, Relation::In)) => Some(p.to_string()),
                        _ if g.atom.args.len() == 2 && id == &g.atom.args[1] => Some(id.clone()),
                        _ => None,
                    };
                    let Some(c) = container else { continue };
                    let closed = sg
                        .node(&c)
                        .is_some_and(|n| n.state.openness == Some(scene_graph::Openness::Closed));
                    if closed && !opened.contains(&c) {
                        let lit = parse_literal(&format!("(open {c})")).map_err(|e| ChatError::Decode(e.to_string()))?;
                        push(format!("open {c}"), vec![c.clone()], lit);
                        opened.push(c);
                    }
                }
            }
            let text = match g.atom.args.as_slice() {
                [x] => format!("make {x} {}", g.atom.predicate),
                [x, y] => format!("put {x} {} {y}", g.atom.predicate),
                _ => g.atom.to_string(),
            };
            push(text, g.atom.args.clone(), g);
        }
        Ok(render_output(&PolicyOutput { trace, subgoals }))
    }
}

impl ChatService for CanonicalAnnotator {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate()?;
        self.answer(req.last_user()).map(ChatResponse::text)
    }
}

/// Ground truth for a canonical instruction, for the offline reviewer.
pub fn canonical_truth(instruction: &str) -> Option<reward::TaskTruth> {
    canonical_goals(instruction).map(|goals| reward::TaskTruth {
        goals,
        requires: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persona_is_seeded() {
        let sets = CandidateSets::default();
        assert_eq!(sets.age.len(), 6);
        assert_eq!(sets.occupation.len(), 20);
        assert_eq!(sets.culture.len(), 10);
        assert_eq!(sets.role.len(), 5);
        assert_eq!(sample_persona(7, &sets).unwrap(), sample_persona(7, &sets).unwrap());
        let empty = CandidateSets {
            role: vec![],
            ..sets
        };
        assert_eq!(sample_persona(7, &empty), Err(SynthError::EmptyCandidateSet("role".into())));
    }

    #[test]
    fn instruction_lines() {
        assert_eq!(
            parse_instructions("Here you go:\n- make cup_1 clean\n2. put cup_1 on table\n").unwrap(),
            vec!["make cup_1 clean", "put cup_1 on table"]
        );
        assert_eq!(
            parse_instructions("Wash the cup then\nput it away.\n"),
            Err(SynthError::EmptyGeneration)
        );
    }

    #[test]
    fn canonical_grammar() {
        let g = canonical_goals("make cup_1 clean and then put cup_1 on counter_1").unwrap();
        assert_eq!(g[0].to_string(), "(clean cup_1)");
        assert_eq!(g[1].to_string(), "(on cup_1 counter_1)");
        assert!(canonical_goals("tidy up").is_none());
    }

    #[test]
    fn templates_differ_by_tier() {
        let texts: Vec<&str> = Abstractness::ALL.iter().map(|l| Tier::new(*l, 0).template_text()).collect();
        assert!(texts[0] != texts[1] && texts[1] != texts[2] && texts[0] != texts[2]);
    }
}
