//! STRIPS subset of PDDL: typing, negative preconditions and conjunctive goals.
//!
//! Domains and problems are parsed into plain value types. Grounding turns
//! action schemas into [`GroundedAction`]s; states are sets of [`Atom`]s.

mod ground;
mod parse;
pub mod sexpr;
mod state;
mod write;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ground::{ground, GroundingOptions, DEFAULT_GROUNDING_CAP};
pub use parse::{parse_domain, parse_literal, parse_problem};
pub use state::{applicable, apply, holds, missing_preconditions, State};
pub use write::serialize_problem;

/// Root of every type hierarchy.
pub const ROOT_TYPE: &str = "object";

/// Requirements accepted by the parser.
pub const SUPPORTED_REQUIREMENTS: &[&str] = &[":strips", ":typing", ":negative-preconditions"];

const HOUSEHOLD_DOMAIN_TEXT: &str = include_str!("../../fixtures/household_domain.pddl");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PddlError {
    #[error("syntax error at line {line} near `{token}`")]
    Syntax { line: usize, token: String },
    #[error("unsupported feature `{0}`")]
    UnsupportedFeature(String),
    #[error("type mismatch in `{0}`")]
    TypeMismatch(String),
    #[error("undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("arity mismatch in `{0}`")]
    Arity(String),
    #[error("duplicate declaration `{0}`")]
    Duplicate(String),
    #[error("variable `{var}` is not a parameter of action `{action}`")]
    UnboundVariable { action: String, var: String },
    #[error("action `{0}` adds and deletes the same atom")]
    ConflictingEffects(String),
    #[error("type hierarchy has a cycle through `{0}`")]
    TypeCycle(String),
    #[error("problem refers to domain `{found}` but `{expected}` was supplied")]
    DomainMismatch { expected: String, found: String },
    #[error("goal must contain at least one literal")]
    EmptyGoal,
    #[error("grounding produced {count} instantiations, cap is {cap}")]
    GroundingExplosion { count: u128, cap: usize },
    #[error("action `{0}` is not applicable")]
    InapplicableAction(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

/// A ground atom such as `(in cup_1 cabinet)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<P: Into<String>, A: Into<String>>(predicate: P, args: impl IntoIterator<Item = A>) -> Self {
        Atom {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// A positive or negated ground atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, positive: true }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, positive: false }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedParam {
    /// Variable name without the leading `?`.
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub params: Vec<TypedParam>,
}

impl Predicate {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// Argument of a schema atom: a parameter reference or a constant object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomSchema {
    pub predicate: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralSchema {
    pub atom: AtomSchema,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
    pub pre: Vec<LiteralSchema>,
    pub add: Vec<AtomSchema>,
    pub del: Vec<AtomSchema>,
}

impl ActionSchema {
    fn substitute(&self, atom: &AtomSchema, binding: &[&str]) -> Atom {
        Atom {
            predicate: atom.predicate.clone(),
            args: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => c.clone(),
                    Term::Var(v) => {
                        let idx = self
                            .params
                            .iter()
                            .position(|p| &p.name == v)
                            .expect("schema variables are validated at parse time");
                        binding[idx].to_string()
                    }
                })
                .collect(),
        }
    }

    /// Instantiates this schema with concrete arguments (no type check).
    pub fn instantiate(&self, args: &[&str]) -> GroundedAction {
        assert_eq!(args.len(), self.params.len(), "binding length");
        let mut pre_pos = Vec::new();
        let mut pre_neg = Vec::new();
        for lit in &self.pre {
            let atom = self.substitute(&lit.atom, args);
            if lit.positive {
                pre_pos.push(atom);
            } else {
                pre_neg.push(atom);
            }
        }
        GroundedAction {
            name: self.name.clone(),
            args: args.iter().map(|a| a.to_string()).collect(),
            pre_pos,
            pre_neg,
            add: self.add.iter().map(|a| self.substitute(a, args)).collect(),
            del: self.del.iter().map(|a| self.substitute(a, args)).collect(),
        }
    }
}

/// Single-inheritance type tree rooted at [`ROOT_TYPE`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypeHierarchy {
    parent: BTreeMap<String, String>,
}

impl TypeHierarchy {
    pub fn declare(&mut self, ty: &str, parent: &str) -> Result<(), PddlError> {
        if ty == ROOT_TYPE {
            return Err(PddlError::Duplicate(ty.into()));
        }
        if self.parent.insert(ty.to_string(), parent.to_string()).is_some() {
            return Err(PddlError::Duplicate(ty.into()));
        }
        Ok(())
    }

    pub fn contains(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.parent.contains_key(ty)
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        std::iter::once(ROOT_TYPE).chain(self.parent.keys().map(String::as_str))
    }

    pub fn parent_of(&self, ty: &str) -> Option<&str> {
        self.parent.get(ty).map(String::as_str)
    }

    /// True when `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut cur = ty;
        for _ in 0..=self.parent.len() {
            if cur == ancestor {
                return true;
            }
            match self.parent.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }

    fn validate(&self) -> Result<(), PddlError> {
        for (ty, parent) in &self.parent {
            if !self.contains(parent) {
                return Err(PddlError::UndeclaredType(parent.clone()));
            }
            let mut cur = parent.as_str();
            let mut steps = 0;
            while cur != ROOT_TYPE {
                if cur == ty || steps > self.parent.len() {
                    return Err(PddlError::TypeCycle(ty.clone()));
                }
                cur = &self.parent[cur];
                steps += 1;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: TypeHierarchy,
    pub predicates: BTreeMap<String, Predicate>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    /// The shipped twelve-action household domain.
    pub fn household() -> Domain {
        parse_domain(HOUSEHOLD_DOMAIN_TEXT).expect("shipped household domain parses")
    }

    pub fn household_text() -> &'static str {
        HOUSEHOLD_DOMAIN_TEXT
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Grounds `(name args...)` against a problem's typed objects.
    pub fn instantiate(
        &self,
        problem: &Problem,
        name: &str,
        args: &[&str],
    ) -> Result<GroundedAction, PddlError> {
        let schema = self
            .action(name)
            .ok_or_else(|| PddlError::UnknownAction(name.to_string()))?;
        if schema.params.len() != args.len() {
            return Err(PddlError::Arity(format!("({name} {})", args.join(" "))));
        }
        for (param, arg) in schema.params.iter().zip(args) {
            let ty = problem
                .objects
                .get(*arg)
                .ok_or_else(|| PddlError::UndeclaredObject(arg.to_string()))?;
            if !self.types.is_subtype(ty, &param.ty) {
                return Err(PddlError::TypeMismatch(format!("({name} {})", args.join(" "))));
            }
        }
        Ok(schema.instantiate(args))
    }

    /// Checks a ground atom against predicate arity and parameter types.
    pub fn check_atom(&self, atom: &Atom, objects: &BTreeMap<String, String>) -> Result<(), PddlError> {
        let pred = self
            .predicates
            .get(&atom.predicate)
            .ok_or_else(|| PddlError::UndeclaredPredicate(atom.predicate.clone()))?;
        if pred.arity() != atom.args.len() {
            return Err(PddlError::Arity(atom.to_string()));
        }
        for (arg, param) in atom.args.iter().zip(&pred.params) {
            let ty = objects
                .get(arg)
                .ok_or_else(|| PddlError::UndeclaredObject(arg.clone()))?;
            if !self.types.is_subtype(ty, &param.ty) {
                return Err(PddlError::TypeMismatch(atom.to_string()));
            }
        }
        Ok(())
    }
}

/// Conjunctive goal; literals are kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Goal {
    literals: BTreeSet<Literal>,
}

impl Goal {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Result<Goal, PddlError> {
        let literals: BTreeSet<Literal> = literals.into_iter().collect();
        if literals.is_empty() {
            return Err(PddlError::EmptyGoal);
        }
        Ok(Goal { literals })
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.literals.iter()
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    /// Object id to declared type.
    pub objects: BTreeMap<String, String>,
    pub init: BTreeSet<Atom>,
    pub goal: Goal,
}

impl Problem {
    /// Type-checks init and goal against the domain.
    pub fn validate(&self, domain: &Domain) -> Result<(), PddlError> {
        if self.domain != domain.name {
            return Err(PddlError::DomainMismatch {
                expected: domain.name.clone(),
                found: self.domain.clone(),
            });
        }
        for ty in self.objects.values() {
            if !domain.types.contains(ty) {
                return Err(PddlError::UndeclaredType(ty.clone()));
            }
        }
        for atom in &self.init {
            domain.check_atom(atom, &self.objects)?;
        }
        for lit in self.goal.literals() {
            domain.check_atom(&lit.atom, &self.objects)?;
        }
        Ok(())
    }
}

/// A fully instantiated action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundedAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<Atom>,
    pub pre_neg: Vec<Atom>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

impl GroundedAction {
    /// Sort key used wherever a deterministic action order is needed.
    pub fn sort_key(&self) -> (&str, &[String]) {
        (&self.name, &self.args)
    }
}

impl fmt::Display for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn household_domain_shape() {
        let d = Domain::household();
        assert_eq!(d.name, "household");
        let names: Vec<_> = d.actions.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "goto", "pick", "place_on", "place_in", "open", "close", "turn_on", "turn_off", "clean",
                "fill", "empty", "wipe"
            ]
        );
        assert!(d.types.is_subtype("item", ROOT_TYPE));
        assert!(!d.types.is_subtype("item", "room"));
    }

    #[test]
    fn display_forms() {
        let a = Atom::new("in", ["cup_1", "cabinet"]);
        assert_eq!(a.to_string(), "(in cup_1 cabinet)");
        assert_eq!(Literal::neg(a).to_string(), "(not (in cup_1 cabinet))");
        assert_eq!(Atom::new::<_, &str>("hand-empty", []).to_string(), "(hand-empty)");
    }

    #[test]
    fn goal_rejects_empty() {
        assert_eq!(Goal::new([]), Err(PddlError::EmptyGoal));
    }

    #[test]
    fn type_cycle_detected() {
        let mut h = TypeHierarchy::default();
        h.declare("a", "b").unwrap();
        h.declare("b", "a").unwrap();
        assert!(matches!(h.validate(), Err(PddlError::TypeCycle(_))));
    }
}
