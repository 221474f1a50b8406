//! Household scene graphs: rooms, furniture and objects linked by `in`/`on`
//! placement edges, plus the single agent's location and held objects.
//!
//! A [`SceneGraph`] is immutable once built; [`apply_plan`] returns a new one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{self, Atom, Domain, GroundedAction, Literal, State};
use crate::planner::Plan;

pub const DEFAULT_HAND_CAPACITY: usize = 2;

/// Prefix of the hand-level objects added to every problem.
pub const HAND_LEVEL_PREFIX: &str = "free_hands_";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("malformed scene document: {0}")]
    Schema(String),
    #[error("invariant `{rule}` violated at `{node}`")]
    Invariant { node: String, rule: &'static str },
    #[error("no domain predicate `{predicate}` for scene state")]
    UnknownPredicate { predicate: String },
    #[error("action {index} is not applicable; missing {}", fmt_literals(.missing))]
    InapplicableAction { index: usize, missing: Vec<Literal> },
}

fn fmt_literals(lits: &[Literal]) -> String {
    let parts: Vec<String> = lits.iter().map(ToString::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

fn invariant(node: &str, rule: &'static str) -> SceneError {
    SceneError::Invariant {
        node: node.to_string(),
        rule,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Room,
    Furniture,
    Object,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Room => "room",
            NodeKind::Furniture => "furniture",
            NodeKind::Object => "object",
        }
    }

    /// Declared PDDL type of nodes of this kind in the household domain.
    pub fn pddl_type(self) -> &'static str {
        match self {
            NodeKind::Room => "room",
            NodeKind::Furniture => "furniture",
            NodeKind::Object => "item",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Openness {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cleanliness {
    Clean,
    Dirty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Power {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fill {
    Filled,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub openness: Option<Openness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleanliness: Option<Cleanliness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<Power>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill: Option<Fill>,
}

impl NodeState {
    /// Predicate names for the attributes that are set, in a fixed order.
    pub fn predicates(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if let Some(o) = self.openness {
            out.push(match o {
                Openness::Open => "open",
                Openness::Closed => "closed",
            });
        }
        if let Some(c) = self.cleanliness {
            out.push(match c {
                Cleanliness::Clean => "clean",
                Cleanliness::Dirty => "dirty",
            });
        }
        if let Some(p) = self.power {
            out.push(match p {
                Power::On => "powered-on",
                Power::Off => "powered-off",
            });
        }
        if let Some(f) = self.fill {
            out.push(match f {
                Fill::Filled => "filled",
                Fill::Empty => "empty",
            });
        }
        out
    }

    fn allowed_for(&self, kind: NodeKind) -> bool {
        match kind {
            NodeKind::Room => *self == NodeState::default(),
            NodeKind::Furniture => self.fill.is_none(),
            NodeKind::Object => true,
        }
    }

    /// Sets the attribute named by a state predicate; false if `pred` is not one.
    fn set(&mut self, pred: &str) -> bool {
        match pred {
            "open" => self.openness = Some(Openness::Open),
            "closed" => self.openness = Some(Openness::Closed),
            "clean" => self.cleanliness = Some(Cleanliness::Clean),
            "dirty" => self.cleanliness = Some(Cleanliness::Dirty),
            "powered-on" => self.power = Some(Power::On),
            "powered-off" => self.power = Some(Power::Off),
            "filled" => self.fill = Some(Fill::Filled),
            "empty" => self.fill = Some(Fill::Empty),
            _ => return false,
        }
        true
    }

    fn clear(&mut self, pred: &str) -> bool {
        let current = self.predicates();
        if !current.contains(&pred) {
            return STATE_PREDICATES.contains(&pred);
        }
        match pred {
            "open" | "closed" => self.openness = None,
            "clean" | "dirty" => self.cleanliness = None,
            "powered-on" | "powered-off" => self.power = None,
            _ => self.fill = None,
        }
        true
    }
}

const STATE_PREDICATES: &[&str] = &[
    "open",
    "closed",
    "clean",
    "dirty",
    "powered-on",
    "powered-off",
    "filled",
    "empty",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneNode {
    pub id: String,
    pub kind: NodeKind,
    pub category: String,
    #[serde(default)]
    pub state: NodeState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    In,
    On,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::In => "in",
            Relation::On => "on",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEdge {
    pub child: String,
    pub parent: String,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentState {
    pub location: String,
    #[serde(default)]
    pub holding: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDocument {
    nodes: Vec<SceneNode>,
    edges: Vec<SceneEdge>,
    agent: AgentState,
}

/// Validated scene graph. Nodes are keyed by id; each placed node has one parent edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneGraph {
    nodes: BTreeMap<String, SceneNode>,
    /// child id -> (parent id, relation)
    parents: BTreeMap<String, (String, Relation)>,
    agent: AgentState,
    capacity: usize,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Parses and validates a scene-graph JSON document.
pub fn parse_scene_graph(text: &str) -> Result<SceneGraph, SceneError> {
    let doc: SceneDocument = serde_json::from_str(text).map_err(|e| SceneError::Schema(e.to_string()))?;
    SceneGraph::build(doc.nodes, doc.edges, doc.agent, DEFAULT_HAND_CAPACITY)
}

impl SceneGraph {
    /// Builds and validates a graph from parts.
    pub fn build(
        nodes: Vec<SceneNode>,
        edges: Vec<SceneEdge>,
        agent: AgentState,
        capacity: usize,
    ) -> Result<SceneGraph, SceneError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            if !valid_id(&n.id) {
                return Err(invariant(&n.id, "id-format"));
            }
            if n.id.starts_with(HAND_LEVEL_PREFIX) {
                return Err(invariant(&n.id, "reserved-id"));
            }
            if !valid_id(&n.category) {
                return Err(invariant(&n.id, "category-format"));
            }
            if map.contains_key(&n.id) {
                return Err(invariant(&n.id, "unique-id"));
            }
            map.insert(n.id.clone(), n);
        }
        let mut parents = BTreeMap::new();
        for e in edges {
            if parents.contains_key(&e.child) {
                return Err(invariant(&e.child, "single-parent"));
            }
            parents.insert(e.child.clone(), (e.parent, e.relation));
        }
        let sg = SceneGraph {
            nodes: map,
            parents,
            agent,
            capacity,
        };
        sg.validate()?;
        Ok(sg)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), SceneError> {
        for n in self.nodes.values() {
            if !n.state.allowed_for(n.kind) {
                return Err(invariant(&n.id, "attribute-applicability"));
            }
        }
        for (child, (parent, _)) in &self.parents {
            let c = self.nodes.get(child).ok_or_else(|| invariant(child, "edge-endpoint"))?;
            let p = self.nodes.get(parent).ok_or_else(|| invariant(parent, "edge-endpoint"))?;
            if c.kind == NodeKind::Room {
                return Err(invariant(child, "room-has-no-parent"));
            }
            if p.kind == NodeKind::Object && c.kind != NodeKind::Object {
                return Err(invariant(child, "object-parent"));
            }
        }
        let held: BTreeSet<&str> = self.agent.holding.iter().map(String::as_str).collect();
        if held.len() != self.agent.holding.len() {
            return Err(invariant(&self.agent.location, "holding-unique"));
        }
        if self.agent.holding.len() > self.capacity {
            return Err(invariant(&self.agent.location, "holding-capacity"));
        }
        match self.nodes.get(&self.agent.location) {
            Some(n) if n.kind == NodeKind::Room => {}
            _ => return Err(invariant(&self.agent.location, "agent-location")),
        }
        for h in &self.agent.holding {
            match self.nodes.get(h) {
                Some(n) if n.kind == NodeKind::Object => {}
                _ => return Err(invariant(h, "held-object")),
            }
            if self.parents.contains_key(h) {
                return Err(invariant(h, "held-not-placed"));
            }
        }
        for n in self.nodes.values() {
            let placed = self.parents.contains_key(&n.id);
            if n.kind != NodeKind::Room && !placed && !held.contains(n.id.as_str()) {
                return Err(invariant(&n.id, "single-parent"));
            }
        }
        // Acyclicity: every chain of parents must terminate.
        for start in self.parents.keys() {
            let mut cur = start.as_str();
            let mut steps = 0;
            while let Some((p, _)) = self.parents.get(cur) {
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(invariant(start, "acyclic"));
                }
                cur = p;
            }
        }
        Ok(())
    }

    pub fn with_capacity(mut self, capacity: usize) -> Result<SceneGraph, SceneError> {
        self.capacity = capacity;
        self.validate()?;
        Ok(self)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn node(&self, id: &str) -> Option<&SceneNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> Vec<SceneEdge> {
        self.parents
            .iter()
            .map(|(c, (p, r))| SceneEdge {
                child: c.clone(),
                parent: p.clone(),
                relation: *r,
            })
            .collect()
    }

    pub fn parent(&self, id: &str) -> Option<(&str, Relation)> {
        self.parents.get(id).map(|(p, r)| (p.as_str(), *r))
    }

    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.parents
            .iter()
            .filter(move |(_, (p, _))| p == id)
            .map(|(c, _)| c.as_str())
    }

    pub fn agent(&self) -> &AgentState {
        &self.agent
    }

    pub fn rooms(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes.values().filter(|n| n.kind == NodeKind::Room)
    }

    /// Placement ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some((p, _)) = self.parents.get(cur) {
            out.push(p.as_str());
            cur = p;
        }
        out
    }

    /// Room reachable from `id` through furniture only, if any.
    pub fn reachable_room(&self, id: &str) -> Option<&str> {
        let mut cur: &str = &self.parents.get(id)?.0;
        loop {
            match self.nodes[cur].kind {
                NodeKind::Room => return Some(cur),
                NodeKind::Object => return None,
                NodeKind::Furniture => cur = &self.parents.get(cur)?.0,
            }
        }
    }

    fn document(&self) -> SceneDocument {
        SceneDocument {
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges(),
            agent: self.agent.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document()).expect("scene graph serializes")
    }

    /// Single-line JSON, as embedded in prompts.
    pub fn to_json_compact(&self) -> String {
        serde_json::to_string(&self.document()).expect("scene graph serializes")
    }

    /// Adds a node placed under `parent`. Used by scene repair.
    pub fn with_node(&self, node: SceneNode, parent: &str, relation: Relation) -> Result<SceneGraph, SceneError> {
        let mut next = self.clone();
        if next.nodes.contains_key(&node.id) {
            return Err(invariant(&node.id, "unique-id"));
        }
        next.parents.insert(node.id.clone(), (parent.to_string(), relation));
        next.nodes.insert(node.id.clone(), node);
        next.validate()?;
        Ok(next)
    }

    /// Problem objects for the whole scene, including hand levels.
    pub fn pddl_objects(&self) -> BTreeMap<String, String> {
        let mut objects: BTreeMap<String, String> = self
            .nodes
            .values()
            .map(|n| (n.id.clone(), n.kind.pddl_type().to_string()))
            .collect();
        for level in 0..=self.capacity {
            objects.insert(hand_level(level), "level".to_string());
        }
        objects
    }
}

pub fn hand_level(n: usize) -> String {
    format!("{HAND_LEVEL_PREFIX}{n}")
}

impl fmt::Display for SceneGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_text(self))
    }
}

/// Canonical text form: rooms, furniture, then objects (each sorted by id),
/// then relation lines in the same order, then the agent line.
pub fn render_text(sg: &SceneGraph) -> String {
    let mut ordered: Vec<&SceneNode> = sg.nodes.values().collect();
    ordered.sort_by(|a, b| (a.kind, &a.id).cmp(&(b.kind, &b.id)));
    let mut out = String::new();
    for n in &ordered {
        let _ = write!(out, "{} {} [{}]", n.kind.as_str(), n.id, n.category);
        let preds = n.state.predicates();
        if !preds.is_empty() {
            let _ = write!(out, " {{{}}}", preds.join(", "));
        }
        out.push('\n');
    }
    for n in &ordered {
        if let Some((p, r)) = sg.parents.get(&n.id) {
            let _ = writeln!(out, "{} {} {}", n.id, r.as_str(), p);
        }
    }
    let _ = writeln!(
        out,
        "agent at {} holding [{}] capacity {}",
        sg.agent.location,
        sg.agent.holding.join(", "),
        sg.capacity
    );
    out
}

/// Every atom that is true in the scene, checked against the domain's predicates.
pub fn to_init_atoms(sg: &SceneGraph, domain: &Domain) -> Result<State, SceneError> {
    let mut atoms = State::new();
    let mut push = |pred: &str, args: Vec<&str>| -> Result<(), SceneError> {
        match domain.predicates.get(pred) {
            Some(p) if p.arity() == args.len() => {
                atoms.insert(Atom::new(pred, args));
                Ok(())
            }
            _ => Err(SceneError::UnknownPredicate {
                predicate: pred.to_string(),
            }),
        }
    };
    for n in sg.nodes.values() {
        if let Some((parent, rel)) = sg.parents.get(&n.id) {
            push(rel.as_str(), vec![&n.id, parent])?;
            push("placed", vec![&n.id, parent])?;
        }
        if let Some(room) = sg.reachable_room(&n.id) {
            push("in-room", vec![&n.id, room])?;
        }
        if n.kind != NodeKind::Room {
            push("relevant", vec![&n.id])?;
        }
        for pred in n.state.predicates() {
            push(pred, vec![&n.id])?;
        }
    }
    push("at-agent", vec![&sg.agent.location])?;
    for h in &sg.agent.holding {
        push("holding", vec![h])?;
    }
    let free = sg.capacity - sg.agent.holding.len();
    let free_level = hand_level(free);
    push("free-hands", vec![&free_level])?;
    for lvl in 0..sg.capacity {
        let (lo, hi) = (hand_level(lvl), hand_level(lvl + 1));
        push("hand-succ", vec![&lo, &hi])?;
    }
    Ok(atoms)
}

/// Executes `plan` on the scene, translating each action's effects into graph edits.
pub fn apply_plan(sg: &SceneGraph, plan: &Plan, domain: &Domain) -> Result<SceneGraph, SceneError> {
    let mut cur = sg.clone();
    for (index, action) in plan.actions.iter().enumerate() {
        let state = to_init_atoms(&cur, domain)?;
        if !pddl::applicable(&state, action) {
            return Err(SceneError::InapplicableAction {
                index,
                missing: pddl::missing_preconditions(&state, action),
            });
        }
        cur.apply_effects(action)?;
        cur.validate()?;
    }
    Ok(cur)
}

impl SceneGraph {
    fn node_mut(&mut self, id: &str) -> Result<&mut SceneNode, SceneError> {
        self.nodes.get_mut(id).ok_or_else(|| invariant(id, "edge-endpoint"))
    }

    fn apply_effects(&mut self, action: &GroundedAction) -> Result<(), SceneError> {
        for atom in &action.del {
            let args: Vec<&str> = atom.args.iter().map(String::as_str).collect();
            match (atom.predicate.as_str(), args.as_slice()) {
                ("in" | "on", [child, parent]) => {
                    let rel = if atom.predicate == "in" { Relation::In } else { Relation::On };
                    if self.parents.get(*child) == Some(&(parent.to_string(), rel)) {
                        self.parents.remove(*child);
                    }
                }
                ("holding", [o]) => self.agent.holding.retain(|h| h != o),
                ("placed" | "in-room" | "free-hands" | "hand-succ" | "relevant" | "at-agent", _) => {}
                (p, [x]) => {
                    let node = self.node_mut(x)?;
                    if !node.state.clear(p) {
                        return Err(SceneError::UnknownPredicate { predicate: p.to_string() });
                    }
                }
                (p, _) => return Err(SceneError::UnknownPredicate { predicate: p.to_string() }),
            }
        }
        for atom in &action.add {
            let args: Vec<&str> = atom.args.iter().map(String::as_str).collect();
            match (atom.predicate.as_str(), args.as_slice()) {
                ("in" | "on", [child, parent]) => {
                    let rel = if atom.predicate == "in" { Relation::In } else { Relation::On };
                    self.parents.insert(child.to_string(), (parent.to_string(), rel));
                }
                ("holding", [o]) => {
                    if !self.agent.holding.iter().any(|h| h == o) {
                        self.agent.holding.push(o.to_string());
                    }
                }
                ("at-agent", [r]) => self.agent.location = r.to_string(),
                ("placed" | "in-room" | "free-hands" | "hand-succ" | "relevant", _) => {}
                (p, [x]) => {
                    let node = self.node_mut(x)?;
                    if !node.state.set(p) {
                        return Err(SceneError::UnknownPredicate { predicate: p.to_string() });
                    }
                }
                (p, _) => return Err(SceneError::UnknownPredicate { predicate: p.to_string() }),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r#"{
      "nodes": [
        {"id": "kitchen", "kind": "room", "category": "kitchen", "state": {}},
        {"id": "cabinet", "kind": "furniture", "category": "kitchen_cabinet", "state": {"openness": "closed"}},
        {"id": "cup_1", "kind": "object", "category": "cup", "state": {"cleanliness": "dirty"}}
      ],
      "edges": [
        {"child": "cabinet", "parent": "kitchen", "relation": "in"},
        {"child": "cup_1", "parent": "cabinet", "relation": "on"}
      ],
      "agent": {"location": "kitchen", "holding": []}
    }"#;

    #[test]
    fn minimal_document() {
        let sg = parse_scene_graph(MINI).unwrap();
        assert_eq!(sg.len(), 3);
        assert_eq!(sg.edges().len(), 2);
    }

    #[test]
    fn render_three_nodes() {
        let sg = parse_scene_graph(MINI).unwrap();
        let expected = "room kitchen [kitchen]\n\
                        furniture cabinet [kitchen_cabinet] {closed}\n\
                        object cup_1 [cup] {dirty}\n\
                        cabinet in kitchen\n\
                        cup_1 on cabinet\n\
                        agent at kitchen holding [] capacity 2\n";
        assert_eq!(render_text(&sg), expected);
        assert_eq!(render_text(&sg), render_text(&sg.clone()));
    }

    #[test]
    fn two_parents_rejected() {
        let text = MINI.replace(
            r#"{"child": "cup_1", "parent": "cabinet", "relation": "on"}"#,
            r#"{"child": "cup_1", "parent": "cabinet", "relation": "on"},
               {"child": "cup_1", "parent": "kitchen", "relation": "in"}"#,
        );
        assert_eq!(
            parse_scene_graph(&text),
            Err(SceneError::Invariant {
                node: "cup_1".into(),
                rule: "single-parent"
            })
        );
    }

    #[test]
    fn orphan_and_bad_relation() {
        let orphan = MINI.replace(r#",
        {"child": "cup_1", "parent": "cabinet", "relation": "on"}"#, "");
        assert_eq!(
            parse_scene_graph(&orphan),
            Err(SceneError::Invariant {
                node: "cup_1".into(),
                rule: "single-parent"
            })
        );
        let rel = MINI.replace(r#""relation": "on""#, r#""relation": "under""#);
        assert!(matches!(parse_scene_graph(&rel), Err(SceneError::Schema(_))));
    }

    #[test]
    fn room_cannot_carry_power() {
        let text = MINI.replace(
            r#""category": "kitchen", "state": {}"#,
            r#""category": "kitchen", "state": {"power": "on"}"#,
        );
        assert_eq!(
            parse_scene_graph(&text),
            Err(SceneError::Invariant {
                node: "kitchen".into(),
                rule: "attribute-applicability"
            })
        );
    }

    #[test]
    fn cycle_rejected() {
        let text = r#"{
          "nodes": [
            {"id": "r", "kind": "room", "category": "room"},
            {"id": "a", "kind": "object", "category": "box"},
            {"id": "b", "kind": "object", "category": "box"}
          ],
          "edges": [
            {"child": "a", "parent": "b", "relation": "in"},
            {"child": "b", "parent": "a", "relation": "in"}
          ],
          "agent": {"location": "r", "holding": []}
        }"#;
        assert!(matches!(
            parse_scene_graph(text),
            Err(SceneError::Invariant { rule: "acyclic", .. })
        ));
    }

    #[test]
    fn single_room_atoms() {
        let text = r#"{"nodes": [{"id": "hall", "kind": "room", "category": "hall"}],
                       "edges": [], "agent": {"location": "hall", "holding": []}}"#;
        let sg = parse_scene_graph(text).unwrap();
        let atoms = to_init_atoms(&sg, &Domain::household()).unwrap();
        let expected: State = [
            Atom::new("at-agent", ["hall"]),
            Atom::new("free-hands", ["free_hands_2"]),
            Atom::new("hand-succ", ["free_hands_0", "free_hands_1"]),
            Atom::new("hand-succ", ["free_hands_1", "free_hands_2"]),
        ]
        .into();
        assert_eq!(atoms, expected);
    }

    #[test]
    fn unknown_predicate_reported() {
        let sg = parse_scene_graph(MINI).unwrap();
        let mut d = Domain::household();
        d.predicates.remove("dirty");
        assert_eq!(
            to_init_atoms(&sg, &d),
            Err(SceneError::UnknownPredicate {
                predicate: "dirty".into()
            })
        );
    }
}
