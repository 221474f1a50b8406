use std::collections::{BTreeMap, BTreeSet};

use super::sexpr::{parse_one, Sexpr};
use super::{
    ActionSchema, Atom, AtomSchema, Domain, Goal, Literal, LiteralSchema, PddlError, Predicate, Problem,
    Term, TypeHierarchy, TypedParam, ROOT_TYPE, SUPPORTED_REQUIREMENTS,
};

fn syntax(e: &Sexpr) -> PddlError {
    PddlError::Syntax {
        line: e.line(),
        token: e.describe(),
    }
}

fn expect_list(e: &Sexpr) -> Result<&[Sexpr], PddlError> {
    e.as_list().ok_or_else(|| syntax(e))
}

fn expect_atom(e: &Sexpr) -> Result<&str, PddlError> {
    e.as_atom().ok_or_else(|| syntax(e))
}

/// Splits `a b - t c - u d` into (name, type) pairs; untyped names get the root type.
fn typed_list(items: &[Sexpr], strip_var: bool) -> Result<Vec<(String, String)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let word = expect_atom(&items[i])?;
        if word == "-" {
            let ty_expr = items.get(i + 1).ok_or_else(|| syntax(&items[i]))?;
            if ty_expr.head() == Some("either") {
                return Err(PddlError::UnsupportedFeature("either".into()));
            }
            let ty = expect_atom(ty_expr)?;
            if pending.is_empty() {
                return Err(syntax(&items[i]));
            }
            out.extend(pending.drain(..).map(|n| (n, ty.to_string())));
            i += 2;
            continue;
        }
        let name = if strip_var {
            word.strip_prefix('?').ok_or_else(|| syntax(&items[i]))?
        } else {
            if word.starts_with('?') {
                return Err(syntax(&items[i]));
            }
            word
        };
        pending.push(name.to_string());
        i += 1;
    }
    out.extend(pending.into_iter().map(|n| (n, ROOT_TYPE.to_string())));
    Ok(out)
}

fn check_define<'a>(root: &'a Sexpr, kind: &str) -> Result<(&'a [Sexpr], String), PddlError> {
    let items = expect_list(root)?;
    if root.head() != Some("define") || items.len() < 2 {
        return Err(syntax(root));
    }
    let header = expect_list(&items[1])?;
    if items[1].head() != Some(kind) || header.len() != 2 {
        return Err(syntax(&items[1]));
    }
    let name = expect_atom(&header[1])?.to_string();
    Ok((&items[2..], name))
}

/// Parses a domain in the `:strips :typing :negative-preconditions` dialect.
pub fn parse_domain(text: &str) -> Result<Domain, PddlError> {
    let root = parse_one(text)?;
    let (sections, name) = check_define(&root, "domain")?;

    let mut requirements = Vec::new();
    let mut types = TypeHierarchy::default();
    let mut predicates = BTreeMap::new();
    let mut actions: Vec<ActionSchema> = Vec::new();

    for section in sections {
        let items = expect_list(section)?;
        match section.head() {
            Some(":requirements") => {
                for r in &items[1..] {
                    let r = expect_atom(r)?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(PddlError::UnsupportedFeature(r.to_string()));
                    }
                    requirements.push(r.to_string());
                }
            }
            Some(":types") => {
                for (ty, parent) in typed_list(&items[1..], false)? {
                    types.declare(&ty, &parent)?;
                }
            }
            Some(":predicates") => {
                for p in &items[1..] {
                    let pitems = expect_list(p)?;
                    let pname = p.head().ok_or_else(|| syntax(p))?.to_string();
                    let params = typed_list(&pitems[1..], true)?
                        .into_iter()
                        .map(|(name, ty)| TypedParam { name, ty })
                        .collect();
                    if predicates
                        .insert(pname.clone(), Predicate { name: pname.clone(), params })
                        .is_some()
                    {
                        return Err(PddlError::Duplicate(pname));
                    }
                }
            }
            Some(":action") => {
                let action = parse_action(items)?;
                if actions.iter().any(|a| a.name == action.name) {
                    return Err(PddlError::Duplicate(action.name));
                }
                actions.push(action);
            }
            Some(other) if other.starts_with(':') => {
                return Err(PddlError::UnsupportedFeature(other.to_string()));
            }
            _ => return Err(syntax(section)),
        }
    }

    types.validate()?;
    let negative_allowed = requirements.iter().any(|r| r == ":negative-preconditions");
    let typing = requirements.iter().any(|r| r == ":typing");
    let domain = Domain {
        name,
        requirements,
        types,
        predicates,
        actions,
    };
    validate_domain(&domain, negative_allowed, typing)?;
    Ok(domain)
}

fn validate_domain(domain: &Domain, negative_allowed: bool, typing: bool) -> Result<(), PddlError> {
    let uses_types = domain.types.types().count() > 1
        || domain
            .predicates
            .values()
            .flat_map(|p| &p.params)
            .any(|p| p.ty != ROOT_TYPE);
    if uses_types && !typing {
        return Err(PddlError::UnsupportedFeature("types without :typing".into()));
    }
    for pred in domain.predicates.values() {
        for p in &pred.params {
            if !domain.types.contains(&p.ty) {
                return Err(PddlError::UndeclaredType(p.ty.clone()));
            }
        }
    }
    for action in &domain.actions {
        for p in &action.params {
            if !domain.types.contains(&p.ty) {
                return Err(PddlError::UndeclaredType(p.ty.clone()));
            }
        }
        let schemas = action
            .pre
            .iter()
            .map(|l| &l.atom)
            .chain(&action.add)
            .chain(&action.del);
        for atom in schemas {
            let pred = domain
                .predicates
                .get(&atom.predicate)
                .ok_or_else(|| PddlError::UndeclaredPredicate(atom.predicate.clone()))?;
            if pred.arity() != atom.args.len() {
                return Err(PddlError::Arity(format!("{} in {}", atom.predicate, action.name)));
            }
            for (term, slot) in atom.args.iter().zip(&pred.params) {
                match term {
                    Term::Var(v) => {
                        let param = action.params.iter().find(|p| &p.name == v).ok_or_else(|| {
                            PddlError::UnboundVariable {
                                action: action.name.clone(),
                                var: v.clone(),
                            }
                        })?;
                        let compatible = domain.types.is_subtype(&param.ty, &slot.ty)
                            || domain.types.is_subtype(&slot.ty, &param.ty);
                        if !compatible {
                            return Err(PddlError::TypeMismatch(format!(
                                "?{v} - {} in ({} ...) of {}",
                                param.ty, atom.predicate, action.name
                            )));
                        }
                    }
                    Term::Const(c) => return Err(PddlError::UndeclaredObject(c.clone())),
                }
            }
        }
        if !negative_allowed && action.pre.iter().any(|l| !l.positive) {
            return Err(PddlError::UnsupportedFeature(
                "negative preconditions without :negative-preconditions".into(),
            ));
        }
        if action.add.iter().any(|a| action.del.contains(a)) {
            return Err(PddlError::ConflictingEffects(action.name.clone()));
        }
    }
    Ok(())
}

fn parse_action(items: &[Sexpr]) -> Result<ActionSchema, PddlError> {
    let name = items.get(1).ok_or_else(|| syntax(&items[0])).and_then(expect_atom)?.to_string();
    let mut params = Vec::new();
    let mut pre = Vec::new();
    let mut add = Vec::new();
    let mut del = Vec::new();
    let mut i = 2;
    while i < items.len() {
        let key = expect_atom(&items[i])?;
        let value = items.get(i + 1).ok_or_else(|| syntax(&items[i]))?;
        match key {
            ":parameters" => {
                params = typed_list(expect_list(value)?, true)?
                    .into_iter()
                    .map(|(name, ty)| TypedParam { name, ty })
                    .collect();
            }
            ":precondition" => pre = parse_condition(value)?,
            ":effect" => {
                for lit in parse_effect(value)? {
                    if lit.positive {
                        add.push(lit.atom);
                    } else {
                        del.push(lit.atom);
                    }
                }
            }
            other => return Err(PddlError::UnsupportedFeature(other.to_string())),
        }
        i += 2;
    }
    Ok(ActionSchema {
        name,
        params,
        pre,
        add,
        del,
    })
}

fn parse_term(e: &Sexpr) -> Result<Term, PddlError> {
    let word = expect_atom(e)?;
    Ok(match word.strip_prefix('?') {
        Some(v) => Term::Var(v.to_string()),
        None => Term::Const(word.to_string()),
    })
}

const UNSUPPORTED_CONNECTIVES: &[&str] = &[
    "or", "imply", "forall", "exists", "when", "=", "increase", "decrease", "assign", "either",
];

fn parse_atom_schema(e: &Sexpr) -> Result<AtomSchema, PddlError> {
    let items = expect_list(e)?;
    let head = e.head().ok_or_else(|| syntax(e))?;
    if UNSUPPORTED_CONNECTIVES.contains(&head) {
        return Err(PddlError::UnsupportedFeature(head.to_string()));
    }
    if head == "and" || head == "not" {
        return Err(syntax(e));
    }
    Ok(AtomSchema {
        predicate: head.to_string(),
        args: items[1..].iter().map(parse_term).collect::<Result<_, _>>()?,
    })
}

fn parse_literal_schema(e: &Sexpr) -> Result<LiteralSchema, PddlError> {
    if e.head() == Some("not") {
        let items = expect_list(e)?;
        if items.len() != 2 {
            return Err(syntax(e));
        }
        return Ok(LiteralSchema {
            atom: parse_atom_schema(&items[1])?,
            positive: false,
        });
    }
    Ok(LiteralSchema {
        atom: parse_atom_schema(e)?,
        positive: true,
    })
}

/// A conjunction, a single literal, or `()`.
fn conjuncts(e: &Sexpr) -> Result<Vec<&Sexpr>, PddlError> {
    let items = expect_list(e)?;
    if items.is_empty() {
        return Ok(Vec::new());
    }
    if e.head() == Some("and") {
        Ok(items[1..].iter().collect())
    } else {
        Ok(vec![e])
    }
}

fn parse_condition(e: &Sexpr) -> Result<Vec<LiteralSchema>, PddlError> {
    conjuncts(e)?.into_iter().map(parse_literal_schema).collect()
}

fn parse_effect(e: &Sexpr) -> Result<Vec<LiteralSchema>, PddlError> {
    conjuncts(e)?.into_iter().map(parse_literal_schema).collect()
}

fn ground_atom(schema: AtomSchema, at: &Sexpr) -> Result<Atom, PddlError> {
    let args = schema
        .args
        .into_iter()
        .map(|t| match t {
            Term::Const(c) => Ok(c),
            Term::Var(_) => Err(syntax(at)),
        })
        .collect::<Result<_, _>>()?;
    Ok(Atom {
        predicate: schema.predicate,
        args,
    })
}

/// Parses a single ground literal such as `(open cabinet)` or `(not (dirty cup_1))`.
pub fn parse_literal(text: &str) -> Result<Literal, PddlError> {
    let e = parse_one(text)?;
    let lit = parse_literal_schema(&e)?;
    Ok(Literal {
        atom: ground_atom(lit.atom, &e)?,
        positive: lit.positive,
    })
}

/// Parses and type-checks a problem against `domain`.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, PddlError> {
    let root = parse_one(text)?;
    let (sections, name) = check_define(&root, "problem")?;
    let mut domain_name = None;
    let mut objects = BTreeMap::new();
    let mut init = BTreeSet::new();
    let mut goal = None;

    for section in sections {
        let items = expect_list(section)?;
        match section.head() {
            Some(":domain") => {
                let d = items.get(1).ok_or_else(|| syntax(section)).and_then(expect_atom)?;
                domain_name = Some(d.to_string());
            }
            Some(":objects") => {
                for (obj, ty) in typed_list(&items[1..], false)? {
                    if objects.insert(obj.clone(), ty).is_some() {
                        return Err(PddlError::Duplicate(obj));
                    }
                }
            }
            Some(":init") => {
                for a in &items[1..] {
                    let atom = ground_atom(parse_atom_schema(a)?, a)?;
                    if !init.insert(atom.clone()) {
                        return Err(PddlError::Duplicate(atom.to_string()));
                    }
                }
            }
            Some(":goal") => {
                let g = items.get(1).ok_or_else(|| syntax(section))?;
                let mut lits = Vec::new();
                for c in conjuncts(g)? {
                    let l = parse_literal_schema(c)?;
                    lits.push(Literal {
                        atom: ground_atom(l.atom, c)?,
                        positive: l.positive,
                    });
                }
                goal = Some(Goal::new(lits)?);
            }
            Some(other) if other.starts_with(':') => {
                return Err(PddlError::UnsupportedFeature(other.to_string()));
            }
            _ => return Err(syntax(section)),
        }
    }

    let problem = Problem {
        name,
        domain: domain_name.ok_or_else(|| syntax(&root))?,
        objects,
        init,
        goal: goal.ok_or(PddlError::EmptyGoal)?,
    };
    problem.validate(domain)?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "(define (domain tiny) (:requirements :strips :typing)
        (:types box)
        (:predicates (full ?b - box) (mark))
        (:action fill :parameters (?b - box) :precondition () :effect (full ?b)))";

    #[test]
    fn household_counts() {
        let d = Domain::household();
        assert_eq!(d.actions.len(), 12);
        assert_eq!(d.predicates.len(), 17);
        let pick = d.action("pick").unwrap();
        assert_eq!(pick.pre.len(), 7);
        assert_eq!(pick.pre.iter().filter(|l| !l.positive).count(), 1);
    }

    #[test]
    fn durative_actions_rejected() {
        let text = "(define (domain d) (:requirements :strips :durative-actions))";
        assert_eq!(
            parse_domain(text),
            Err(PddlError::UnsupportedFeature(":durative-actions".into()))
        );
    }

    #[test]
    fn empty_predicates_block() {
        let d = parse_domain("(define (domain d) (:requirements :strips) (:predicates))").unwrap();
        assert!(d.predicates.is_empty());
        assert!(d.actions.is_empty());
    }

    #[test]
    fn negative_precondition_requires_flag() {
        let text = "(define (domain d) (:requirements :strips)
            (:predicates (p))
            (:action a :parameters () :precondition (not (p)) :effect (p)))";
        assert!(matches!(parse_domain(text), Err(PddlError::UnsupportedFeature(_))));
    }

    #[test]
    fn unbound_variable_rejected() {
        let text = "(define (domain d) (:requirements :strips)
            (:predicates (p ?x))
            (:action a :parameters (?y) :precondition (p ?x) :effect (p ?y)))";
        assert!(matches!(parse_domain(text), Err(PddlError::UnboundVariable { .. })));
    }

    #[test]
    fn conditional_effects_rejected() {
        let text = "(define (domain d) (:requirements :strips)
            (:predicates (p ?x))
            (:action a :parameters (?y) :precondition () :effect (when (p ?y) (p ?y))))";
        assert_eq!(parse_domain(text), Err(PddlError::UnsupportedFeature("when".into())));
    }

    #[test]
    fn problem_errors() {
        let d = parse_domain(TINY).unwrap();
        let ok = "(define (problem p) (:domain tiny) (:objects b1 - box) (:init) (:goal (and (full b1))))";
        let p = parse_problem(ok, &d).unwrap();
        assert_eq!(p.goal.len(), 1);

        let ghost = "(define (problem p) (:domain tiny) (:objects b1 - box) (:init) (:goal (and (full ghost_1))))";
        assert_eq!(
            parse_problem(ghost, &d),
            Err(PddlError::UndeclaredObject("ghost_1".into()))
        );

        let untyped = "(define (problem p) (:domain tiny) (:objects x) (:init (full x)) (:goal (mark)))";
        assert!(matches!(parse_problem(untyped, &d), Err(PddlError::TypeMismatch(_))));

        let wrong = "(define (problem p) (:domain other) (:objects) (:init) (:goal (mark)))";
        assert!(matches!(parse_problem(wrong, &d), Err(PddlError::DomainMismatch { .. })));

        let bad = "(define (problem p) (:domain tiny) (:init (full";
        assert!(matches!(parse_problem(bad, &d), Err(PddlError::Syntax { .. })));
    }

    #[test]
    fn literal_parsing() {
        let l = parse_literal("(not (open cabinet))").unwrap();
        assert!(!l.positive);
        assert_eq!(l.atom, Atom::new("open", ["cabinet"]));
        assert!(parse_literal("(open ?x)").is_err());
    }
}
