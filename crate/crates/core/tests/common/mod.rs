//! Shared helpers for integration tests: random household scenes and goals,
//! plus a naive grounding and breadth-first oracle that shares no code with
//! the planner.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};

use houseplan::pddl::{Atom, Domain, GroundedAction, Literal, Problem, Term};
use houseplan::pipeline::{construct_problem, Subgoal};
use houseplan::scene_graph::{
    AgentState, Cleanliness, Fill, NodeKind, NodeState, Openness, Power, Relation, SceneEdge, SceneGraph, SceneNode,
};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{FIXTURES}/{name}")).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const FURNITURE: &[(&str, bool)] = &[
    ("cabinet", true),
    ("fridge", true),
    ("drawer", true),
    ("table", false),
    ("counter", false),
    ("shelf", false),
];

const ITEMS: &[&str] = &["cup", "kettle", "lamp", "towel", "book", "bowl"];

fn node(id: String, kind: NodeKind, category: &str, state: NodeState) -> SceneNode {
    SceneNode {
        id,
        kind,
        category: category.to_string(),
        state,
    }
}

fn item_state(rng: &mut impl Rng, category: &str) -> NodeState {
    let mut s = NodeState::default();
    let clean = |rng: &mut dyn rand::RngCore| {
        if rng.random_bool(0.5) {
            Cleanliness::Dirty
        } else {
            Cleanliness::Clean
        }
    };
    match category {
        "cup" | "bowl" => {
            s.cleanliness = Some(clean(rng));
            s.fill = Some(if rng.random_bool(0.6) { Fill::Empty } else { Fill::Filled });
        }
        "kettle" => {
            s.fill = Some(if rng.random_bool(0.6) { Fill::Empty } else { Fill::Filled });
            s.power = Some(if rng.random_bool(0.7) { Power::Off } else { Power::On });
        }
        "lamp" => s.power = Some(if rng.random_bool(0.7) { Power::Off } else { Power::On }),
        "towel" => s.cleanliness = Some(clean(rng)),
        _ => {}
    }
    s
}

/// A random valid scene with the given counts. Openable furniture holds its
/// items `in`, other furniture `on`. With `allow_holding`, the agent may
/// start holding one item.
pub fn random_scene(rng: &mut impl Rng, rooms: usize, furniture: usize, items: usize, allow_holding: bool) -> SceneGraph {
    assert!(rooms >= 1 && furniture >= 1);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for r in 0..rooms {
        nodes.push(node(format!("room_{r}"), NodeKind::Room, "room", NodeState::default()));
    }
    let mut furn = Vec::new();
    for f in 0..furniture {
        let (category, openable) = *FURNITURE.choose(rng).unwrap();
        let mut state = NodeState::default();
        if openable {
            state.openness = Some(if rng.random_bool(0.6) { Openness::Closed } else { Openness::Open });
        }
        if rng.random_bool(0.25) {
            state.cleanliness = Some(Cleanliness::Dirty);
        }
        let id = format!("{category}_{f}");
        edges.push(SceneEdge {
            child: id.clone(),
            parent: format!("room_{}", rng.random_range(0..rooms)),
            relation: Relation::In,
        });
        furn.push((id.clone(), openable));
        nodes.push(node(id, NodeKind::Furniture, category, state));
    }
    let mut holding = Vec::new();
    for i in 0..items {
        let category = *ITEMS.choose(rng).unwrap();
        let id = format!("{category}_{i}");
        if allow_holding && holding.is_empty() && rng.random_bool(0.2) {
            holding.push(id.clone());
        } else {
            let (parent, openable) = furn.choose(rng).unwrap().clone();
            edges.push(SceneEdge {
                child: id.clone(),
                parent,
                relation: if openable { Relation::In } else { Relation::On },
            });
        }
        let state = item_state(rng, category);
        nodes.push(node(id, NodeKind::Object, category, state));
    }
    let agent = AgentState {
        location: format!("room_{}", rng.random_range(0..rooms)),
        holding,
    };
    SceneGraph::build(nodes, edges, agent, 2).expect("generated scene is valid")
}

fn lit(pred: &str, args: &[&str]) -> Literal {
    Literal::pos(Atom::new(pred, args.iter().copied()))
}

/// Goal literals that are currently false and achievable in the household
/// domain.
pub fn goal_candidates(sg: &SceneGraph) -> Vec<Literal> {
    let mut out = Vec::new();
    let furniture: Vec<&SceneNode> = sg.nodes().filter(|n| n.kind == NodeKind::Furniture).collect();
    for n in sg.nodes() {
        let s = &n.state;
        match n.kind {
            NodeKind::Room => {}
            NodeKind::Furniture => {
                match s.openness {
                    Some(Openness::Closed) => out.push(lit("open", &[&n.id])),
                    Some(Openness::Open) => out.push(lit("closed", &[&n.id])),
                    None => {}
                }
                if s.cleanliness == Some(Cleanliness::Dirty) {
                    out.push(lit("clean", &[&n.id]));
                }
            }
            NodeKind::Object => {
                if s.cleanliness == Some(Cleanliness::Dirty) {
                    out.push(lit("clean", &[&n.id]));
                }
                if s.fill == Some(Fill::Empty) {
                    out.push(lit("filled", &[&n.id]));
                }
                if s.power == Some(Power::Off) {
                    out.push(lit("powered-on", &[&n.id]));
                }
                if !sg.agent().holding.contains(&n.id) {
                    out.push(lit("holding", &[&n.id]));
                }
                for f in &furniture {
                    if sg.parent(&n.id).map(|(p, _)| p) == Some(f.id.as_str()) {
                        continue;
                    }
                    let pred = if f.state.openness.is_some() { "in" } else { "on" };
                    out.push(lit(pred, &[&n.id, &f.id]));
                }
            }
        }
    }
    out
}

/// One or two goal literals over distinct nodes.
pub fn random_goal(rng: &mut impl Rng, sg: &SceneGraph, max_literals: usize) -> Vec<Literal> {
    let candidates = goal_candidates(sg);
    assert!(!candidates.is_empty(), "scene has nothing to achieve");
    let k = rng.random_range(1..=max_literals.max(1));
    let mut chosen: Vec<Literal> = Vec::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    for _ in 0..20 {
        if chosen.len() == k {
            break;
        }
        let c = candidates.choose(rng).unwrap();
        if c.atom.args.iter().any(|a| used.contains(a)) {
            continue;
        }
        used.extend(c.atom.args.iter().cloned());
        chosen.push(c.clone());
    }
    chosen
}

/// Whole-scene problem (every node relevant) for the goal.
pub fn full_problem(sg: &SceneGraph, goal: &[Literal], domain: &Domain) -> Problem {
    let subgoal = Subgoal {
        index: 1,
        objects: sg.nodes().filter(|n| n.kind != NodeKind::Room).map(|n| n.id.clone()).collect(),
        literals: goal.to_vec(),
    };
    construct_problem(sg, &subgoal, domain, false).expect("problem builds")
}

/// Every schema instantiated over every type-correct argument tuple, with
/// its own substitution. Nothing is filtered.
pub fn naive_ground(domain: &Domain, problem: &Problem) -> Vec<GroundedAction> {
    let mut out = Vec::new();
    for schema in &domain.actions {
        let pools: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| {
                problem
                    .objects
                    .iter()
                    .filter(|(_, ty)| domain.types.is_subtype(ty, &p.ty))
                    .map(|(o, _)| o.as_str())
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; pools.len()];
        if pools.iter().any(Vec::is_empty) {
            continue;
        }
        loop {
            let binding: Vec<&str> = idx.iter().zip(&pools).map(|(&i, p)| p[i]).collect();
            let sub = |terms: &[Term]| -> Vec<String> {
                terms
                    .iter()
                    .map(|t| match t {
                        Term::Const(c) => c.clone(),
                        Term::Var(v) => {
                            let k = schema.params.iter().position(|p| &p.name == v).unwrap();
                            binding[k].to_string()
                        }
                    })
                    .collect()
            };
            let mut ga = GroundedAction {
                name: schema.name.clone(),
                args: binding.iter().map(|s| s.to_string()).collect(),
                pre_pos: Vec::new(),
                pre_neg: Vec::new(),
                add: Vec::new(),
                del: Vec::new(),
            };
            for l in &schema.pre {
                let a = Atom {
                    predicate: l.atom.predicate.clone(),
                    args: sub(&l.atom.args),
                };
                if l.positive {
                    ga.pre_pos.push(a);
                } else {
                    ga.pre_neg.push(a);
                }
            }
            for a in &schema.add {
                ga.add.push(Atom {
                    predicate: a.predicate.clone(),
                    args: sub(&a.args),
                });
            }
            for a in &schema.del {
                ga.del.push(Atom {
                    predicate: a.predicate.clone(),
                    args: sub(&a.args),
                });
            }
            out.push(ga);
            // Odometer increment.
            let mut d = idx.len();
            loop {
                if d == 0 {
                    break;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < pools[d].len() {
                    break;
                }
                idx[d] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    out
}

pub type Facts = BTreeSet<Atom>;

pub fn sim_applicable(s: &Facts, a: &GroundedAction) -> bool {
    a.pre_pos.iter().all(|p| s.contains(p)) && a.pre_neg.iter().all(|p| !s.contains(p))
}

/// Delete-then-add successor.
pub fn sim_apply(s: &Facts, a: &GroundedAction) -> Facts {
    let mut next = s.clone();
    for d in &a.del {
        next.remove(d);
    }
    for x in &a.add {
        next.insert(x.clone());
    }
    next
}

pub fn sim_goal(s: &Facts, goal: &[Literal]) -> bool {
    goal.iter().all(|l| s.contains(&l.atom) == l.positive)
}

/// Length of a shortest plan by exhaustive breadth-first enumeration, or
/// `None` if the goal is unreachable within `state_cap` states.
pub fn oracle_shortest(problem: &Problem, actions: &[GroundedAction], state_cap: usize) -> Option<usize> {
    let goal: Vec<Literal> = problem.goal.literals().cloned().collect();
    let init: Facts = problem.init.iter().cloned().collect();
    if sim_goal(&init, &goal) {
        return Some(0);
    }
    let mut seen: HashSet<Facts> = HashSet::new();
    seen.insert(init.clone());
    let mut frontier = VecDeque::from([(init, 0usize)]);
    while let Some((s, depth)) = frontier.pop_front() {
        for a in actions {
            if !sim_applicable(&s, a) {
                continue;
            }
            let next = sim_apply(&s, a);
            if seen.contains(&next) {
                continue;
            }
            if sim_goal(&next, &goal) {
                return Some(depth + 1);
            }
            assert!(seen.len() < state_cap, "oracle state cap reached");
            seen.insert(next.clone());
            frontier.push_back((next, depth + 1));
        }
    }
    None
}

/// Replays a plan with the oracle simulator; true when every step applies
/// and the goal holds at the end.
pub fn oracle_accepts(problem: &Problem, actions: &[GroundedAction]) -> bool {
    let goal: Vec<Literal> = problem.goal.literals().cloned().collect();
    let mut s: Facts = problem.init.iter().cloned().collect();
    for a in actions {
        if !sim_applicable(&s, a) {
            return false;
        }
        s = sim_apply(&s, a);
    }
    sim_goal(&s, &goal)
}
