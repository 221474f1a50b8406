//! A scripted three-task kitchen environment for exercising the training
//! loop end to end with the toy policy, a ground-truth reviewer and the
//! rule-based improver.
//!
//! Because the toy policy's output space is small, the exact expected reward
//! of a policy can be computed by enumerating traces and groundings, with
//! planner calls memoized by scene.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use serde::Serialize;

use super::improver::{MicroImprover, Prerequisite};
use super::policy::{log_softmax, DifferentiablePolicy, Grounding, Prompt, ToyPolicy, ToySpec};
use super::rollout::{rollout_group, tgpo_step, EvalContext, StepReport};
use super::{TgpoConfig, TgpoError};
use crate::llm_client::ChatService;
use crate::pddl::{parse_literal, Domain, Literal};
use crate::pipeline::{construct_problem, PipelineOptions, Subgoal};
use crate::planner;
use crate::reward::{CompletionLabel, GroundTruthReviewer, RewardBreakdown, TaskTruth};
use crate::scene_graph::{
    self, AgentState, Cleanliness, Fill, NodeKind, NodeState, Openness, Power, Relation, SceneEdge, SceneGraph,
    SceneNode,
};

pub const REVIEWER_MODEL: &str = "micro-reviewer";
pub const IMPROVER_MODEL: &str = "micro-improver";

pub const TASK_CUP_ON_COUNTER: &str = "wash the cup and leave it on the counter";
pub const TASK_LAMP_KETTLE: &str = "turn on the lamp and fill the kettle";
pub const TASK_CLEAN_CUP_CLOSED: &str = "get a clean cup and make sure the cabinet is closed";

/// `(phrase, grounding objects, grounding goals)` for the correct menu entries.
const PHRASES: &[(&str, &[&str], &[&str])] = &[
    ("open the cabinet", &["kitchen_cabinet"], &["(open kitchen_cabinet)"]),
    ("close the cabinet", &["kitchen_cabinet"], &["(closed kitchen_cabinet)"]),
    ("wash the cup", &["cup_1"], &["(clean cup_1)"]),
    ("put the cup on the counter", &["cup_1", "counter_1"], &["(on cup_1 counter_1)"]),
    ("turn on the lamp", &["lamp_1"], &["(powered-on lamp_1)"]),
    ("fill the kettle", &["kettle_1"], &["(filled kettle_1)"]),
];

/// Menu entries no phrase maps to. Neither is ever solvable here.
const DISTRACTORS: &[(&[&str], &[&str])] = &[
    (&["cup_1"], &["(on cup_1 counter_1)"]),
    (&["lamp_1"], &["(filled lamp_1)"]),
];

const TASKS: &[(&str, &[&str])] = &[
    (TASK_CUP_ON_COUNTER, &["(clean cup_1)", "(on cup_1 counter_1)"]),
    (TASK_LAMP_KETTLE, &["(powered-on lamp_1)", "(filled kettle_1)"]),
    (TASK_CLEAN_CUP_CLOSED, &["(clean cup_1)", "(closed kitchen_cabinet)"]),
];

pub const MAX_LINES: usize = 4;

/// Training settings used for the micro environment.
pub fn micro_config() -> TgpoConfig {
    TgpoConfig {
        group_size: 16,
        learning_rate: 1.0,
        ..TgpoConfig::default()
    }
}

fn lit(s: &str) -> Literal {
    parse_literal(s).expect("fixture literal parses")
}

fn grounding(objects: &[&str], goals: &[&str]) -> Grounding {
    Grounding {
        objects: objects.iter().map(|s| s.to_string()).collect(),
        goals: goals.iter().map(|g| lit(g)).collect(),
    }
}

pub struct MicroEnv {
    pub domain: Domain,
    pub scene: SceneGraph,
    pub spec: ToySpec,
    pub truths: Vec<TaskTruth>,
    pub reviewer: GroundTruthReviewer,
    pub improver: MicroImprover,
    pub pipeline: PipelineOptions,
    cache: Mutex<SceneCache>,
}

/// Scenes seen during enumeration, interned by their text rendering, with
/// memoized subtask outcomes and per-task final rewards.
#[derive(Default)]
struct SceneCache {
    scenes: Vec<SceneGraph>,
    ids: HashMap<String, usize>,
    steps: HashMap<(usize, usize), Option<usize>>,
    rewards: HashMap<(usize, usize), f64>,
}

impl SceneCache {
    fn intern(&mut self, scene: SceneGraph) -> usize {
        let key = scene_graph::render_text(&scene);
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        self.scenes.push(scene);
        self.ids.insert(key, self.scenes.len() - 1);
        self.scenes.len() - 1
    }
}

fn node(id: &str, kind: NodeKind, category: &str, state: NodeState) -> SceneNode {
    SceneNode {
        id: id.into(),
        kind,
        category: category.into(),
        state,
    }
}

fn edge(child: &str, parent: &str, relation: Relation) -> SceneEdge {
    SceneEdge {
        child: child.into(),
        parent: parent.into(),
        relation,
    }
}

/// The kitchen scene: the dirty cup sits in a closed cabinet, the kettle is
/// empty on the counter, the lamp is off in the living room where the agent
/// starts.
pub fn micro_scene() -> SceneGraph {
    let none = NodeState::default();
    let nodes = vec![
        node("kitchen", NodeKind::Room, "kitchen", none),
        node("living_room", NodeKind::Room, "living_room", none),
        node(
            "kitchen_cabinet",
            NodeKind::Furniture,
            "cabinet",
            NodeState {
                openness: Some(Openness::Closed),
                ..none
            },
        ),
        node("counter_1", NodeKind::Furniture, "counter", none),
        node("sofa_table", NodeKind::Furniture, "table", none),
        node(
            "cup_1",
            NodeKind::Object,
            "cup",
            NodeState {
                cleanliness: Some(Cleanliness::Dirty),
                ..none
            },
        ),
        node(
            "kettle_1",
            NodeKind::Object,
            "kettle",
            NodeState {
                fill: Some(Fill::Empty),
                ..none
            },
        ),
        node(
            "lamp_1",
            NodeKind::Object,
            "lamp",
            NodeState {
                power: Some(Power::Off),
                ..none
            },
        ),
    ];
    let edges = vec![
        edge("kitchen_cabinet", "kitchen", Relation::In),
        edge("counter_1", "kitchen", Relation::In),
        edge("sofa_table", "living_room", Relation::In),
        edge("cup_1", "kitchen_cabinet", Relation::In),
        edge("kettle_1", "counter_1", Relation::On),
        edge("lamp_1", "sofa_table", Relation::On),
    ];
    let agent = AgentState {
        location: "living_room".into(),
        holding: Vec::new(),
    };
    SceneGraph::build(nodes, edges, agent, scene_graph::DEFAULT_HAND_CAPACITY).expect("micro scene is valid")
}

impl Default for MicroEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl MicroEnv {
    pub fn new() -> MicroEnv {
        let domain = Domain::household();
        let mut menu: Vec<Grounding> = PHRASES.iter().map(|(_, o, g)| grounding(o, g)).collect();
        menu.extend(DISTRACTORS.iter().map(|(o, g)| grounding(o, g)));
        let spec = ToySpec {
            tasks: TASKS.iter().map(|(t, _)| t.to_string()).collect(),
            phrases: PHRASES.iter().map(|(p, _, _)| p.to_string()).collect(),
            menu,
            max_lines: MAX_LINES,
        };
        let truths: Vec<TaskTruth> = TASKS
            .iter()
            .map(|(_, goals)| TaskTruth {
                goals: goals.iter().map(|g| lit(g)).collect(),
                requires: Vec::new(),
            })
            .collect();
        let mut reviewer = GroundTruthReviewer::new(domain.clone());
        for ((task, _), truth) in TASKS.iter().zip(&truths) {
            reviewer = reviewer.with_task(task, truth.clone());
        }
        let improver = MicroImprover {
            achievers: PHRASES.iter().map(|(p, _, g)| (g[0].to_string(), p.to_string())).collect(),
            prerequisites: vec![Prerequisite {
                needs: "open the cabinet".into(),
                undone_by: "close the cabinet".into(),
                for_phrases: vec!["wash the cup".into(), "put the cup on the counter".into()],
            }],
        };
        MicroEnv {
            domain,
            scene: micro_scene(),
            spec,
            truths,
            reviewer,
            improver,
            pipeline: PipelineOptions::default(),
            cache: Mutex::new(SceneCache::default()),
        }
    }

    pub fn tasks(&self) -> &[String] {
        &self.spec.tasks
    }

    pub fn prompt<'a>(&'a self, task: &'a str) -> Prompt<'a> {
        Prompt {
            instruction: task,
            scene: &self.scene,
        }
    }

    pub fn context(&self) -> EvalContext<'_> {
        self.context_with(&self.reviewer)
    }

    pub fn context_with<'a>(&'a self, reviewer: &'a dyn ChatService) -> EvalContext<'a> {
        EvalContext {
            domain: &self.domain,
            pipeline: self.pipeline,
            reviewer,
            reviewer_model: REVIEWER_MODEL,
        }
    }

    /// The environment's own offline reviewer and improver.
    pub fn services(&self) -> Services<'_> {
        Services {
            reviewer: &self.reviewer,
            improver: &self.improver,
        }
    }

    /// Index of the correct menu entry for each phrase.
    pub fn correct_grounding(&self, phrase: usize) -> usize {
        phrase
    }

    /// Uniform trace rows; each phrase's grounding row favours its correct
    /// entry by `margin` logits.
    pub fn policy(&self, margin: f64) -> ToyPolicy {
        let base = ToyPolicy::new(self.spec.clone(), None).expect("micro spec is valid");
        let mut params = base.params().to_vec();
        for p in 0..self.spec.phrases.len() {
            params[base.grounding_row(Some(p)) + self.correct_grounding(p)] = margin;
        }
        base.with_params(params)
    }

    /// Starting point for training.
    pub fn warm_start(&self) -> ToyPolicy {
        self.policy(3.0)
    }

    /// Groundings almost always right, so every failure is a trace failure
    /// the improver knows how to fix.
    pub fn fixable(&self) -> ToyPolicy {
        self.policy(12.0)
    }

    fn cache(&self) -> std::sync::MutexGuard<'_, SceneCache> {
        self.cache.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn solve_option(&self, scene: &SceneGraph, option: usize) -> Option<SceneGraph> {
        let g = &self.spec.menu[option];
        let subgoal = Subgoal {
            index: 1,
            objects: g.objects.iter().cloned().collect::<BTreeSet<_>>(),
            literals: g.goals.clone(),
        };
        construct_problem(scene, &subgoal, &self.domain, self.pipeline.prune)
            .ok()
            .and_then(|p| planner::solve(&self.domain, &p, &self.pipeline.search).ok())
            .and_then(|r| r.plan().cloned())
            .and_then(|plan| scene_graph::apply_plan(scene, &plan, &self.domain).ok())
    }

    /// Interned scene after solving menu entry `option` from scene `id`, or
    /// `None` when that subtask fails.
    fn step_id(&self, id: usize, option: usize) -> Option<usize> {
        if let Some(hit) = self.cache().steps.get(&(id, option)) {
            return *hit;
        }
        let scene = self.cache().scenes[id].clone();
        let next = self.solve_option(&scene, option);
        let mut cache = self.cache();
        let next = next.map(|s| cache.intern(s));
        cache.steps.insert((id, option), next);
        next
    }

    fn reward_id(&self, task: usize, id: usize) -> f64 {
        if let Some(r) = self.cache().rewards.get(&(task, id)) {
            return *r;
        }
        let scene = self.cache().scenes[id].clone();
        let r = self.final_reward(task, &scene);
        self.cache().rewards.insert((task, id), r);
        r
    }

    fn final_reward(&self, task: usize, scene: &SceneGraph) -> f64 {
        let atoms = scene_graph::to_init_atoms(scene, &self.domain).expect("micro scene converts");
        let goals = &self.truths[task].goals;
        let held = goals.iter().filter(|l| atoms.contains(&l.atom) == l.positive).count();
        let label = if held == goals.len() {
            CompletionLabel::Good
        } else if held > 0 {
            CompletionLabel::Normal
        } else {
            CompletionLabel::Bad
        };
        RewardBreakdown::new(true, label).reward
    }

    /// Exact expected reward of `policy` on task `task`.
    pub fn expected_reward(&self, policy: &ToyPolicy, task: usize) -> f64 {
        let root = self.cache().intern(self.scene.clone());
        let mut memo = HashMap::new();
        self.expect_from(policy, task, root, None, 0, &mut memo)
    }

    /// Mean of [`MicroEnv::expected_reward`] over all tasks.
    pub fn mean_expected_reward(&self, policy: &ToyPolicy) -> f64 {
        let n = self.spec.tasks.len();
        (0..n).map(|t| self.expected_reward(policy, t)).sum::<f64>() / n as f64
    }

    fn expect_from(
        &self,
        policy: &ToyPolicy,
        task: usize,
        scene: usize,
        prev: Option<usize>,
        depth: usize,
        memo: &mut HashMap<(usize, Option<usize>, usize), f64>,
    ) -> f64 {
        if depth == self.spec.max_lines {
            return self.reward_id(task, scene);
        }
        if let Some(v) = memo.get(&(scene, prev, depth)) {
            return *v;
        }
        let n_phrases = self.spec.phrases.len();
        let len = if depth == 0 { n_phrases } else { n_phrases + 1 };
        let off = policy.trace_row(task, prev);
        let trace_lp = log_softmax(&policy.params()[off..off + len]);
        let mut total = 0.0;
        if depth > 0 {
            total += trace_lp[n_phrases].exp() * self.reward_id(task, scene);
        }
        let menu = self.spec.menu.len();
        for (p, plp) in trace_lp.iter().take(n_phrases).enumerate() {
            let goff = policy.grounding_row(Some(p));
            let g_lp = log_softmax(&policy.params()[goff..goff + menu]);
            for (g, glp) in g_lp.iter().enumerate() {
                // Once a subtask fails the reward is zero whatever follows.
                if let Some(next) = self.step_id(scene, g) {
                    total += (plp + glp).exp() * self.expect_from(policy, task, next, Some(p), depth + 1, memo);
                }
            }
        }
        memo.insert((scene, prev, depth), total);
        total
    }
}

/// Reviewer and improver used during training; either may be replaced by a
/// recording or replaying client.
#[derive(Clone, Copy)]
pub struct Services<'a> {
    pub reviewer: &'a dyn ChatService,
    pub improver: &'a dyn ChatService,
}

/// One line of a training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRecord {
    pub step: usize,
    pub task: String,
    pub expected_reward_before: f64,
    pub expected_reward_after: f64,
    #[serde(flatten)]
    pub report: StepReport,
}

/// Summary of a training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub steps: usize,
    pub initial_expected_reward: f64,
    pub final_expected_reward: f64,
    /// Mean first-pass reward of one evaluation group per task, before and
    /// after training, drawn with the same seeds.
    pub initial_group_reward: f64,
    pub final_group_reward: f64,
    pub improvement_fraction: Option<f64>,
}

fn group_mean(env: &MicroEnv, ctx: &EvalContext<'_>, policy: &ToyPolicy, n: usize, seed: u64) -> Result<f64, TgpoError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, task) in env.tasks().iter().enumerate() {
        let g = rollout_group(policy, &env.prompt(task), n, ctx, seed.wrapping_add(i as u64))?;
        sum += g.rewards().iter().sum::<f64>();
        count += g.candidates.len();
    }
    Ok(sum / count as f64)
}

/// Runs `steps` training steps cycling through the tasks, starting from
/// `start`. The reference policy is the starting policy.
pub fn simulate(
    env: &MicroEnv,
    services: Services<'_>,
    start: &ToyPolicy,
    cfg: &TgpoConfig,
    steps: usize,
    seed: u64,
) -> Result<(ToyPolicy, Vec<SimRecord>, SimSummary), TgpoError> {
    if steps == 0 {
        return Err(TgpoError::Config("step count must be positive".into()));
    }
    cfg.validate()?;
    let ctx = env.context_with(services.reviewer);
    let eval_seed = seed ^ 0x5eed_e7a1;
    let initial_group_reward = group_mean(env, &ctx, start, cfg.group_size, eval_seed)?;
    let mut policy = start.clone();
    let mut records = Vec::with_capacity(steps);
    let mut before = env.mean_expected_reward(&policy);
    let initial_expected_reward = before;
    let (mut regenerated, mut improved) = (0.0, 0.0);
    for step in 0..steps {
        let task = &env.tasks()[step % env.tasks().len()];
        let out = tgpo_step(
            &policy,
            start,
            &env.prompt(task),
            cfg,
            &ctx,
            services.improver,
            IMPROVER_MODEL,
            seed.wrapping_add(step as u64),
        )?;
        if let Some(f) = out.report.improvement_fraction {
            let n = out.report.regenerated_rewards.len() as f64;
            regenerated += n;
            improved += f * n;
        }
        policy = out.policy;
        let after = env.mean_expected_reward(&policy);
        tracing::debug!(step, before, after, "micro step");
        records.push(SimRecord {
            step,
            task: task.clone(),
            expected_reward_before: before,
            expected_reward_after: after,
            report: out.report,
        });
        before = after;
    }
    let summary = SimSummary {
        steps,
        initial_expected_reward,
        final_expected_reward: before,
        initial_group_reward,
        final_group_reward: group_mean(env, &ctx, &policy, cfg.group_size, eval_seed)?,
        improvement_fraction: (regenerated > 0.0).then(|| improved / regenerated),
    };
    Ok((policy, records, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_scene_is_consistent() {
        let env = MicroEnv::new();
        assert_eq!(env.spec.menu.len(), 8);
        for (p, _, goals) in PHRASES {
            assert_eq!(env.improver.achievers[goals[0]], *p);
        }
        // The right trace for each task earns full reward.
        let solve = |options: &[usize]| {
            let mut s = env.scene.clone();
            for &o in options {
                s = env.solve_option(&s, o).expect("solvable");
            }
            s
        };
        assert_eq!(env.final_reward(0, &solve(&[0, 2, 3])), 1.0);
        assert_eq!(env.final_reward(1, &solve(&[4, 5])), 1.0);
        assert_eq!(env.final_reward(2, &solve(&[0, 2, 1])), 1.0);
        assert!(env.solve_option(&env.scene, 2).is_none(), "cup is behind a closed door");
        assert!(env.solve_option(&env.scene, 6).is_none());
        assert!(env.solve_option(&env.scene, 7).is_none());
    }
}
