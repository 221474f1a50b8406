//! Subgoal-by-subgoal planning: build a pruned problem for each subgoal from
//! the current scene, solve it, execute the subplan on the scene, and
//! concatenate the subplans.

mod output;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

pub use output::{parse_output, render_output, OutputError, PolicyOutput, Subgoal, Subtask};

use crate::pddl::{Domain, Goal, Literal, PddlError, Problem};
use crate::planner::{self, Plan, PlannerError, SearchConfig, SolveResult, Validation};
use crate::scene_graph::{self, NodeKind, SceneError, SceneGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructError {
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("subtask {k}: {source}")]
    Construct { k: usize, source: ConstructError },
    #[error("subtask {k}: {source}")]
    Planner { k: usize, source: PlannerError },
    #[error("subtask {k}: executing the subplan failed: {source}")]
    Execute { k: usize, source: SceneError },
}

impl PipelineError {
    /// Subtask index the error is attached to, if any.
    pub fn subtask(&self) -> Option<usize> {
        match self {
            PipelineError::Output(_) => None,
            PipelineError::Construct { k, .. } | PipelineError::Planner { k, .. } | PipelineError::Execute { k, .. } => {
                Some(*k)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub search: SearchConfig,
    /// Restrict each problem to the subgoal's objects and their context.
    pub prune: bool,
    /// Build subtask k against the scene left by subtasks 1..k-1. When false,
    /// every subtask is built against the original scene.
    pub thread_scene: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            search: SearchConfig::default(),
            prune: true,
            thread_scene: true,
        }
    }
}

/// Builds the planning problem for one subgoal.
///
/// With `prune`, the objects are the subgoal's objects and goal arguments,
/// their placement ancestors, every room, everything the agent holds, and the
/// hand levels. Only the subgoal's own objects are marked `relevant`, so other
/// objects cannot be manipulated. Without `prune` the whole scene is used.
pub fn construct_problem(
    sg: &SceneGraph,
    subgoal: &Subgoal,
    domain: &Domain,
    prune: bool,
) -> Result<Problem, ConstructError> {
    let mut mentioned: BTreeSet<&str> = subgoal.objects.iter().map(String::as_str).collect();
    for lit in &subgoal.literals {
        mentioned.extend(lit.atom.args.iter().map(String::as_str));
    }
    if let Some(missing) = mentioned.iter().find(|id| sg.node(id).is_none()) {
        return Err(ConstructError::UnknownObject(missing.to_string()));
    }
    let full = scene_graph::to_init_atoms(sg, domain)?;
    let all_objects = sg.pddl_objects();
    let (objects, init) = if prune {
        let mut keep: BTreeSet<String> = BTreeSet::new();
        for id in &mentioned {
            keep.insert(id.to_string());
            keep.extend(sg.ancestors(id).into_iter().map(str::to_string));
        }
        keep.extend(sg.rooms().map(|r| r.id.clone()));
        for h in &sg.agent().holding {
            keep.insert(h.clone());
            keep.extend(sg.ancestors(h).into_iter().map(str::to_string));
        }
        let objects: BTreeMap<String, String> = all_objects
            .into_iter()
            .filter(|(id, ty)| keep.contains(id) || ty == "level")
            .collect();
        let init = full
            .into_iter()
            .filter(|a| a.args.iter().all(|x| objects.contains_key(x)))
            .filter(|a| a.predicate != "relevant" || subgoal.objects.contains(&a.args[0]))
            .collect();
        (objects, init)
    } else {
        (all_objects, full)
    };
    let goal = Goal::new(subgoal.literals.iter().cloned())?;
    let problem = Problem {
        name: format!("subtask_{}", subgoal.index),
        domain: domain.name.clone(),
        objects,
        init,
        goal,
    };
    problem.validate(domain)?;
    Ok(problem)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtaskReport {
    pub k: usize,
    pub problem: Problem,
    pub result: SolveResult,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub subtasks: Vec<SubtaskReport>,
    /// Present exactly when every subtask was solved.
    pub plan: Option<Plan>,
    /// Scene after the last solved subtask.
    pub final_scene: SceneGraph,
    pub failure: Option<Failure>,
}

impl PipelineResult {
    pub fn feasible(&self) -> bool {
        self.plan.is_some()
    }

    pub fn subplans(&self) -> Vec<&Plan> {
        self.subtasks.iter().filter_map(|s| s.result.plan()).collect()
    }

    pub fn expanded(&self) -> usize {
        self.subtasks.iter().map(|s| s.result.stats().expanded).sum()
    }

    pub fn generated(&self) -> usize {
        self.subtasks.iter().map(|s| s.result.stats().generated).sum()
    }
}

/// Solves the subgoals in order, updating the scene after each subplan.
pub fn solve_sequence(
    sg: &SceneGraph,
    out: &PolicyOutput,
    domain: &Domain,
    opts: &PipelineOptions,
) -> Result<PipelineResult, PipelineError> {
    let mut scene = sg.clone();
    let mut subtasks = Vec::with_capacity(out.subgoals.len());
    for subgoal in &out.subgoals {
        let k = subgoal.index;
        let basis = if opts.thread_scene { &scene } else { sg };
        let problem =
            construct_problem(basis, subgoal, domain, opts.prune).map_err(|source| PipelineError::Construct { k, source })?;
        let result = planner::solve(domain, &problem, &opts.search).map_err(|source| PipelineError::Planner { k, source })?;
        let solved = result.plan().cloned();
        let status = result.status();
        tracing::debug!(k, status = %status, expanded = result.stats().expanded, "subtask searched");
        subtasks.push(SubtaskReport { k, problem, result });
        match solved {
            Some(plan) => {
                scene =
                    scene_graph::apply_plan(basis, &plan, domain).map_err(|source| PipelineError::Execute { k, source })?;
            }
            None => {
                return Ok(PipelineResult {
                    subtasks,
                    plan: None,
                    final_scene: scene,
                    failure: Some(Failure { k, reason: status }),
                });
            }
        }
    }
    let plans: Vec<Plan> = subtasks.iter().filter_map(|s| s.result.plan().cloned()).collect();
    Ok(PipelineResult {
        subtasks,
        plan: Some(compose(&plans)),
        final_scene: scene,
        failure: None,
    })
}

/// Concatenates plans in order.
pub fn compose(plans: &[Plan]) -> Plan {
    Plan::new(plans.iter().flat_map(|p| p.actions.iter().cloned()).collect())
}

/// Plan-file text for a pipeline run with `; subtask k` separators.
pub fn write_composed(result: &PipelineResult) -> String {
    let mut s = String::new();
    for report in &result.subtasks {
        let _ = writeln!(s, "; subtask {}", report.k);
        match report.result.plan() {
            Some(plan) => s.push_str(&plan.to_string()),
            None => {
                let _ = writeln!(s, "; {}", report.result.status());
            }
        }
    }
    let length = result.plan.as_ref().map_or(0, Plan::len);
    let _ = writeln!(s, "; length {length}");
    let _ = writeln!(s, "; expanded {}", result.expanded());
    let _ = writeln!(s, "; generated {}", result.generated());
    s
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("the run has no composed plan")]
    NoPlan,
    #[error(transparent)]
    Construct(ConstructError),
    /// Subplan `k` failed to validate against the unpruned scene.
    #[error("subplan {k} does not replay on the full scene: {validation:?}")]
    Subtask { k: usize, validation: Validation },
}

/// Re-executes every subplan against the full, unpruned scene, checking that
/// each step applies and that each subgoal holds at its boundary.
pub fn replay_check(sg: &SceneGraph, out: &PolicyOutput, result: &PipelineResult, domain: &Domain) -> Result<(), ReplayError> {
    if result.plan.is_none() {
        return Err(ReplayError::NoPlan);
    }
    let mut scene = sg.clone();
    for (subgoal, report) in out.subgoals.iter().zip(&result.subtasks) {
        let problem = construct_problem(&scene, subgoal, domain, false).map_err(ReplayError::Construct)?;
        let plan = report.result.plan().ok_or(ReplayError::NoPlan)?;
        let validation = planner::validate_plan(domain, &problem, plan);
        if !validation.is_valid() {
            return Err(ReplayError::Subtask { k: subgoal.index, validation });
        }
        scene = scene_graph::apply_plan(&scene, plan, domain)
            .map_err(|e| ReplayError::Construct(ConstructError::Scene(e)))?;
    }
    Ok(())
}

/// A subgoal naming every non-room node of the scene.
pub fn unpruned_subgoal(sg: &SceneGraph, subgoal: &Subgoal) -> Subgoal {
    Subgoal {
        index: subgoal.index,
        objects: sg.nodes().filter(|n| n.kind != NodeKind::Room).map(|n| n.id.clone()).collect(),
        literals: subgoal.literals.clone(),
    }
}

/// The literals that are false in `sg`.
pub fn unmet_literals(sg: &SceneGraph, literals: &[Literal], domain: &Domain) -> Result<Vec<Literal>, SceneError> {
    let state = scene_graph::to_init_atoms(sg, domain)?;
    Ok(literals
        .iter()
        .filter(|l| state.contains(&l.atom) != l.positive)
        .cloned()
        .collect())
}
