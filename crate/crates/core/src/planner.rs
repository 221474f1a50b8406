//! Forward state-space search over grounded STRIPS actions.
//!
//! Two algorithms are available: A* guided by the additive delete-relaxation
//! heuristic, and breadth-first search, which returns shortest plans.
//! [`validate_plan`] simulates a plan on plain atom sets and shares no code
//! with the search.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{self, Atom, Domain, Goal, GroundedAction, GroundingOptions, Literal, PddlError, Problem, State};

pub const DEFAULT_NODE_CAP: usize = 500_000;
pub const DEFAULT_TIME_CAP: Duration = Duration::from_secs(10);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error("plan file line {line}: {message}")]
    PlanSyntax { line: usize, message: String },
    #[error("invalid search configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<GroundedAction>,
}

impl Plan {
    pub fn new(actions: Vec<GroundedAction>) -> Plan {
        Plan { actions }
    }

    /// Unit costs: the cost is the number of actions.
    pub fn cost(&self) -> usize {
        self.actions.len()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.actions {
            writeln!(f, "{a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// A* guided by the additive delete-relaxation heuristic. Fast, but the
    /// heuristic is not admissible, so plans can be longer than optimal.
    AstarHadd,
    /// Uniform-cost breadth-first search; returns a shortest plan.
    Bfs,
}

impl std::str::FromStr for Algorithm {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "astar_hadd" | "astar" => Ok(Algorithm::AstarHadd),
            "bfs" => Ok(Algorithm::Bfs),
            other => Err(PlannerError::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Search settings. Ties on equal f are broken first-in-first-out; successors
/// are generated in lexicographic `(name, args)` order, so equal-f nodes are
/// expanded in that order too.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub node_cap: usize,
    pub time_cap: Duration,
    pub grounding: GroundingOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            algorithm: Algorithm::AstarHadd,
            node_cap: DEFAULT_NODE_CAP,
            time_cap: DEFAULT_TIME_CAP,
            grounding: GroundingOptions::default(),
        }
    }
}

impl SearchConfig {
    pub fn bfs() -> Self {
        SearchConfig {
            algorithm: Algorithm::Bfs,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<(), PlannerError> {
        if self.node_cap == 0 || self.time_cap.is_zero() || self.grounding.cap == 0 {
            return Err(PlannerError::Config("caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LimitReason {
    NodeCap(usize),
    TimeCap(Duration),
    Grounding { count: u128, cap: usize },
}

impl fmt::Display for LimitReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitReason::NodeCap(n) => write!(f, "node cap of {n} expansions reached"),
            LimitReason::TimeCap(t) => write!(f, "time cap of {:.3}s reached", t.as_secs_f64()),
            LimitReason::Grounding { count, cap } => write!(f, "grounding produced {count} actions, cap is {cap}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Solved { plan: Plan, stats: SearchStats },
    Unsolvable { stats: SearchStats },
    ResourceLimit { reason: LimitReason, stats: SearchStats },
}

impl SolveResult {
    pub fn stats(&self) -> &SearchStats {
        match self {
            SolveResult::Solved { stats, .. }
            | SolveResult::Unsolvable { stats }
            | SolveResult::ResourceLimit { stats, .. } => stats,
        }
    }

    pub fn plan(&self) -> Option<&Plan> {
        match self {
            SolveResult::Solved { plan, .. } => Some(plan),
            _ => None,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, SolveResult::Solved { .. })
    }

    /// Short status word used in reports.
    pub fn status(&self) -> String {
        match self {
            SolveResult::Solved { .. } => "solved".into(),
            SolveResult::Unsolvable { .. } => "unsolvable".into(),
            SolveResult::ResourceLimit { reason, .. } => format!("resource limit: {reason}"),
        }
    }
}

/// Atom interning shared by the search and the heuristic.
#[derive(Default)]
struct Interner {
    ids: HashMap<Atom, u32>,
}

impl Interner {
    fn id(&mut self, a: &Atom) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(a.clone()).or_insert(next)
    }

    fn get(&self, a: &Atom) -> Option<u32> {
        self.ids.get(a).copied()
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

struct CompiledAction {
    pre_pos: Vec<u32>,
    pre_neg: Vec<u32>,
    add: Vec<u32>,
    del: Vec<u32>,
}

fn sorted_ids(interner: &mut Interner, atoms: &[Atom]) -> Vec<u32> {
    let mut v: Vec<u32> = atoms.iter().map(|a| interner.id(a)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

struct Task {
    actions: Vec<CompiledAction>,
    /// Actions keyed by their first positive precondition.
    by_first_pre: Vec<Vec<usize>>,
    unconditional: Vec<usize>,
    goal_pos: Vec<u32>,
    /// Negative goal atoms that some action or the initial state mentions.
    goal_neg: Vec<u32>,
    n_atoms: usize,
}

impl Task {
    fn compile(actions: &[GroundedAction], init: &State, goal: &Goal) -> (Task, Vec<u32>) {
        let mut interner = Interner::default();
        let init_ids = {
            let v: Vec<Atom> = init.iter().cloned().collect();
            sorted_ids(&mut interner, &v)
        };
        let compiled: Vec<CompiledAction> = actions
            .iter()
            .map(|a| CompiledAction {
                pre_pos: sorted_ids(&mut interner, &a.pre_pos),
                pre_neg: sorted_ids(&mut interner, &a.pre_neg),
                add: sorted_ids(&mut interner, &a.add),
                del: sorted_ids(&mut interner, &a.del),
            })
            .collect();
        let mut goal_pos = Vec::new();
        let mut goal_neg = Vec::new();
        for lit in goal.literals() {
            if lit.positive {
                goal_pos.push(interner.id(&lit.atom));
            } else if let Some(id) = interner.get(&lit.atom) {
                goal_neg.push(id);
            }
        }
        let n_atoms = interner.len();
        let mut by_first_pre = vec![Vec::new(); n_atoms];
        let mut unconditional = Vec::new();
        for (i, a) in compiled.iter().enumerate() {
            match a.pre_pos.first() {
                Some(&p) => by_first_pre[p as usize].push(i),
                None => unconditional.push(i),
            }
        }
        let task = Task {
            actions: compiled,
            by_first_pre,
            unconditional,
            goal_pos,
            goal_neg,
            n_atoms,
        };
        (task, init_ids)
    }

    fn is_goal(&self, s: &[u32]) -> bool {
        self.goal_pos.iter().all(|g| s.binary_search(g).is_ok())
            && self.goal_neg.iter().all(|g| s.binary_search(g).is_err())
    }

    /// Indices of applicable actions in ascending (lexicographic) order.
    fn successors(&self, s: &[u32]) -> Vec<usize> {
        let mut cands: Vec<usize> = self.unconditional.clone();
        for &atom in s {
            cands.extend_from_slice(&self.by_first_pre[atom as usize]);
        }
        cands.sort_unstable();
        cands.retain(|&i| {
            let a = &self.actions[i];
            a.pre_pos.iter().all(|p| s.binary_search(p).is_ok())
                && a.pre_neg.iter().all(|p| s.binary_search(p).is_err())
        });
        cands
    }

    fn apply(&self, s: &[u32], i: usize) -> Vec<u32> {
        let a = &self.actions[i];
        let mut next: Vec<u32> = s.iter().copied().filter(|x| a.del.binary_search(x).is_err()).collect();
        next.extend_from_slice(&a.add);
        next.sort_unstable();
        next.dedup();
        next
    }

    /// Additive relaxed cost of the positive goal; `None` if unreachable.
    fn h_add(&self, s: &[u32]) -> Option<u64> {
        const INF: u64 = u64::MAX;
        let mut cost = vec![INF; self.n_atoms];
        let mut heap = BinaryHeap::new();
        for &a in s {
            cost[a as usize] = 0;
            heap.push(Reverse((0u64, a)));
        }
        let mut unmet: Vec<usize> = self.actions.iter().map(|a| a.pre_pos.len()).collect();
        let mut pre_sum = vec![0u64; self.actions.len()];
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); self.n_atoms];
        for (i, a) in self.actions.iter().enumerate() {
            for &p in &a.pre_pos {
                users[p as usize].push(i);
            }
        }
        let relax = |i: usize, base: u64, cost: &mut Vec<u64>, heap: &mut BinaryHeap<Reverse<(u64, u32)>>| {
            let c = base.saturating_add(1);
            for &q in &self.actions[i].add {
                if c < cost[q as usize] {
                    cost[q as usize] = c;
                    heap.push(Reverse((c, q)));
                }
            }
        };
        for &i in &self.unconditional {
            relax(i, 0, &mut cost, &mut heap);
        }
        let mut done = vec![false; self.n_atoms];
        while let Some(Reverse((c, atom))) = heap.pop() {
            if done[atom as usize] || c > cost[atom as usize] {
                continue;
            }
            done[atom as usize] = true;
            for &i in &users[atom as usize] {
                unmet[i] -= 1;
                pre_sum[i] = pre_sum[i].saturating_add(c);
                if unmet[i] == 0 {
                    relax(i, pre_sum[i], &mut cost, &mut heap);
                }
            }
        }
        let mut total = 0u64;
        for &g in &self.goal_pos {
            let c = cost[g as usize];
            if c == INF {
                return None;
            }
            total = total.saturating_add(c);
        }
        Some(total)
    }
}

/// Additive delete-relaxation estimate of the cost of reaching the positive
/// part of `goal` from `s`. `None` means the goal is unreachable even when
/// delete effects are ignored.
pub fn h_add(s: &State, goal: &Goal, actions: &[GroundedAction]) -> Option<u64> {
    let (task, init) = Task::compile(actions, s, goal);
    task.h_add(&init)
}

struct Node {
    parent: Option<(usize, usize)>,
    g: u64,
}

struct Search<'a> {
    task: &'a Task,
    cfg: &'a SearchConfig,
    start: Instant,
    states: Vec<Vec<u32>>,
    nodes: Vec<Node>,
    index: HashMap<Vec<u32>, usize>,
    stats: SearchStats,
}

enum Outcome {
    Found(usize),
    Exhausted,
    Limit(LimitReason),
}

impl<'a> Search<'a> {
    fn new(task: &'a Task, cfg: &'a SearchConfig, start: Instant) -> Self {
        Search {
            task,
            cfg,
            start,
            states: Vec::new(),
            nodes: Vec::new(),
            index: HashMap::new(),
            stats: SearchStats::default(),
        }
    }

    /// Returns the node id and whether it is new.
    fn intern(&mut self, s: Vec<u32>, parent: Option<(usize, usize)>, g: u64) -> (usize, bool) {
        if let Some(&id) = self.index.get(&s) {
            return (id, false);
        }
        let id = self.nodes.len();
        self.index.insert(s.clone(), id);
        self.states.push(s);
        self.nodes.push(Node { parent, g });
        (id, true)
    }

    fn limit(&self) -> Option<LimitReason> {
        if self.stats.expanded >= self.cfg.node_cap {
            return Some(LimitReason::NodeCap(self.cfg.node_cap));
        }
        if self.stats.expanded.is_multiple_of(128) && self.start.elapsed() > self.cfg.time_cap {
            return Some(LimitReason::TimeCap(self.cfg.time_cap));
        }
        None
    }

    fn bfs(&mut self, init: Vec<u32>) -> Outcome {
        let (root, _) = self.intern(init, None, 0);
        if self.task.is_goal(&self.states[root]) {
            return Outcome::Found(root);
        }
        let mut queue = VecDeque::from([root]);
        while let Some(id) = queue.pop_front() {
            if let Some(r) = self.limit() {
                return Outcome::Limit(r);
            }
            self.stats.expanded += 1;
            let s = self.states[id].clone();
            let g = self.nodes[id].g;
            for ai in self.task.successors(&s) {
                let next = self.task.apply(&s, ai);
                self.stats.generated += 1;
                let (nid, fresh) = self.intern(next, Some((id, ai)), g + 1);
                if fresh {
                    if self.task.is_goal(&self.states[nid]) {
                        return Outcome::Found(nid);
                    }
                    queue.push_back(nid);
                }
            }
        }
        Outcome::Exhausted
    }

    fn astar(&mut self, init: Vec<u32>) -> Outcome {
        let Some(h0) = self.task.h_add(&init) else {
            return Outcome::Exhausted;
        };
        let (root, _) = self.intern(init, None, 0);
        let mut h_cache: Vec<Option<u64>> = vec![Some(h0)];
        let mut closed_g: Vec<Option<u64>> = vec![None];
        let mut seq = 0u64;
        // Min-heap on (f, insertion sequence): FIFO among equal f.
        let mut open = BinaryHeap::new();
        open.push(Reverse((h0, seq, root, 0u64)));
        while let Some(Reverse((_, _, id, g))) = open.pop() {
            if g > self.nodes[id].g {
                continue;
            }
            if closed_g[id].is_some_and(|cg| cg <= g) {
                continue;
            }
            if self.task.is_goal(&self.states[id]) {
                return Outcome::Found(id);
            }
            if let Some(r) = self.limit() {
                return Outcome::Limit(r);
            }
            closed_g[id] = Some(g);
            self.stats.expanded += 1;
            let s = self.states[id].clone();
            for ai in self.task.successors(&s) {
                let next = self.task.apply(&s, ai);
                self.stats.generated += 1;
                let ng = g + 1;
                let (nid, fresh) = self.intern(next, Some((id, ai)), ng);
                if fresh {
                    h_cache.push(self.task.h_add(&self.states[nid]));
                    closed_g.push(None);
                } else if ng < self.nodes[nid].g {
                    // Cheaper path found: reparent and reopen.
                    self.nodes[nid] = Node {
                        parent: Some((id, ai)),
                        g: ng,
                    };
                    closed_g[nid] = None;
                } else {
                    continue;
                }
                let Some(h) = h_cache[nid] else { continue };
                seq += 1;
                open.push(Reverse((ng.saturating_add(h), seq, nid, ng)));
            }
        }
        Outcome::Exhausted
    }

    fn extract(&self, mut id: usize, actions: &[GroundedAction]) -> Plan {
        let mut rev = Vec::new();
        while let Some((parent, ai)) = self.nodes[id].parent {
            rev.push(actions[ai].clone());
            id = parent;
        }
        rev.reverse();
        Plan::new(rev)
    }
}

/// Searches for a plan from the problem's initial state to its goal.
pub fn solve(domain: &Domain, problem: &Problem, cfg: &SearchConfig) -> Result<SolveResult, PlannerError> {
    cfg.check()?;
    problem.validate(domain)?;
    let start = Instant::now();
    let actions = match pddl::ground(domain, problem, cfg.grounding) {
        Ok(a) => a,
        Err(PddlError::GroundingExplosion { count, cap }) => {
            return Ok(SolveResult::ResourceLimit {
                reason: LimitReason::Grounding { count, cap },
                stats: SearchStats {
                    wall: start.elapsed(),
                    ..Default::default()
                },
            })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(search(&actions, &problem.init, &problem.goal, cfg, start))
}

/// Runs the configured search over an already grounded action set.
pub fn search(actions: &[GroundedAction], init: &State, goal: &Goal, cfg: &SearchConfig, start: Instant) -> SolveResult {
    let (task, init_ids) = Task::compile(actions, init, goal);
    let mut s = Search::new(&task, cfg, start);
    let outcome = match cfg.algorithm {
        Algorithm::Bfs => s.bfs(init_ids),
        Algorithm::AstarHadd => s.astar(init_ids),
    };
    s.stats.wall = start.elapsed();
    match outcome {
        Outcome::Found(id) => SolveResult::Solved {
            plan: s.extract(id, actions),
            stats: s.stats,
        },
        Outcome::Exhausted => SolveResult::Unsolvable { stats: s.stats },
        Outcome::Limit(reason) => SolveResult::ResourceLimit { reason, stats: s.stats },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Valid,
    /// Step `index` is not applicable; `missing` lists the failed preconditions.
    FirstFailure { index: usize, missing: Vec<Literal> },
    /// Every step applied but these goal literals are false at the end.
    GoalUnsatisfied { unmet: Vec<Literal> },
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid)
    }
}

/// Simulates `plan` from the problem's initial state.
pub fn validate_plan(domain: &Domain, problem: &Problem, plan: &Plan) -> Validation {
    let _ = domain;
    let mut state: State = problem.init.clone();
    for (index, action) in plan.actions.iter().enumerate() {
        let mut missing = Vec::new();
        for p in &action.pre_pos {
            if !state.contains(p) {
                missing.push(Literal::pos(p.clone()));
            }
        }
        for p in &action.pre_neg {
            if state.contains(p) {
                missing.push(Literal::neg(p.clone()));
            }
        }
        if !missing.is_empty() {
            return Validation::FirstFailure { index, missing };
        }
        for d in &action.del {
            state.remove(d);
        }
        for a in &action.add {
            state.insert(a.clone());
        }
    }
    let unmet: Vec<Literal> = problem
        .goal
        .literals()
        .filter(|l| state.contains(&l.atom) != l.positive)
        .cloned()
        .collect();
    if unmet.is_empty() {
        Validation::Valid
    } else {
        Validation::GoalUnsatisfied { unmet }
    }
}

/// Plan file text: one `(name args)` per line, then a `;` footer.
pub fn write_plan(plan: &Plan, stats: Option<&SearchStats>) -> String {
    let mut out = plan.to_string();
    let _ = writeln!(out, "; length {}", plan.len());
    if let Some(s) = stats {
        let _ = writeln!(out, "; expanded {}", s.expanded);
        let _ = writeln!(out, "; generated {}", s.generated);
    }
    out
}

/// Reads a plan file, grounding each line against the problem's objects.
/// Lines starting with `;` and blank lines are ignored.
pub fn parse_plan(text: &str, domain: &Domain, problem: &Problem) -> Result<Plan, PlannerError> {
    let mut actions = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let syntax = |message: &str| PlannerError::PlanSyntax {
            line: i + 1,
            message: message.to_string(),
        };
        let inner = line
            .strip_prefix('(')
            .and_then(|l| l.strip_suffix(')'))
            .ok_or_else(|| syntax("expected `(name args...)`"))?;
        let lower = inner.to_ascii_lowercase();
        let mut words = lower.split_whitespace();
        let name = words.next().ok_or_else(|| syntax("empty action"))?;
        let args: Vec<&str> = words.collect();
        actions.push(domain.instantiate(problem, name, &args)?);
    }
    Ok(Plan::new(actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    const LINE: &str = "(define (domain line) (:requirements :strips)
        (:predicates (at ?x) (link ?x ?y) (exit ?x) (done))
        (:action move :parameters (?a ?b) :precondition (and (at ?a) (link ?a ?b))
            :effect (and (at ?b) (not (at ?a))))
        (:action finish :parameters (?x) :precondition (and (at ?x) (exit ?x)) :effect (done)))";

    fn line_problem(goal: &str) -> (Domain, Problem) {
        let d = parse_domain(LINE).unwrap();
        let p = parse_problem(
            &format!(
                "(define (problem p) (:domain line) (:objects a b c d)
                 (:init (at a) (link a b) (link b c) (link c d) (link a c) (exit d))
                 (:goal {goal}))"
            ),
            &d,
        )
        .unwrap();
        (d, p)
    }

    #[test]
    fn goal_true_initially() {
        let (d, p) = line_problem("(at a)");
        for cfg in [SearchConfig::default(), SearchConfig::bfs()] {
            let r = solve(&d, &p, &cfg).unwrap();
            assert_eq!(r.plan().unwrap().len(), 0);
        }
    }

    #[test]
    fn both_algorithms_find_shortcut() {
        let (d, p) = line_problem("(done)");
        for cfg in [SearchConfig::default(), SearchConfig::bfs()] {
            let r = solve(&d, &p, &cfg).unwrap();
            let plan = r.plan().unwrap();
            assert_eq!(plan.to_string(), "(move a c)\n(move c d)\n(finish d)\n");
            assert!(validate_plan(&d, &p, plan).is_valid());
        }
    }

    #[test]
    fn unreachable_goal() {
        let (d, p) = line_problem("(link d a)");
        assert!(matches!(solve(&d, &p, &SearchConfig::bfs()).unwrap(), SolveResult::Unsolvable { .. }));
        assert!(matches!(solve(&d, &p, &SearchConfig::default()).unwrap(), SolveResult::Unsolvable { .. }));
    }

    #[test]
    fn node_cap_is_not_unsolvable() {
        let (d, p) = line_problem("(done)");
        let cfg = SearchConfig {
            node_cap: 1,
            algorithm: Algorithm::Bfs,
            ..Default::default()
        };
        assert!(matches!(
            solve(&d, &p, &cfg).unwrap(),
            SolveResult::ResourceLimit {
                reason: LimitReason::NodeCap(1),
                ..
            }
        ));
    }

    #[test]
    fn h_add_chain() {
        let (d, p) = line_problem("(done)");
        let acts = pddl::ground(&d, &p, GroundingOptions::default()).unwrap();
        // at c costs 1 (move a c), at d costs 1 + 1 = 2, done costs 2 + 1 = 3.
        assert_eq!(h_add(&p.init, &p.goal, &acts), Some(3));
        let goal = Goal::new([Literal::pos(Atom::new("at", ["a"]))]).unwrap();
        assert_eq!(h_add(&p.init, &goal, &acts), Some(0));
    }

    #[test]
    fn plan_file_round_trip() {
        let (d, p) = line_problem("(done)");
        let r = solve(&d, &p, &SearchConfig::bfs()).unwrap();
        let text = write_plan(r.plan().unwrap(), Some(r.stats()));
        assert!(text.ends_with(&format!("; generated {}\n", r.stats().generated)));
        assert_eq!(&parse_plan(&text, &d, &p).unwrap(), r.plan().unwrap());
        assert!(matches!(
            parse_plan("(move a\n", &d, &p),
            Err(PlannerError::PlanSyntax { line: 1, .. })
        ));
    }

    #[test]
    fn reordered_plan_fails_at_first_step() {
        let (d, p) = line_problem("(done)");
        let plan = solve(&d, &p, &SearchConfig::bfs()).unwrap().plan().unwrap().clone();
        let mut shuffled = plan.clone();
        shuffled.actions.swap(0, 1);
        match validate_plan(&d, &p, &shuffled) {
            Validation::FirstFailure { index, missing } => {
                assert_eq!(index, 0);
                assert_eq!(missing, vec![Literal::pos(Atom::new("at", ["c"]))]);
            }
            other => panic!("{other:?}"),
        }
    }
}
