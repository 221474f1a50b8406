use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::{ActionSchema, Atom, Domain, GroundedAction, PddlError, Problem, Term};

pub const DEFAULT_GROUNDING_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundingOptions {
    /// Keep only actions whose positive preconditions are reachable in the
    /// delete relaxation from the initial state.
    pub prune_unreachable: bool,
    pub cap: usize,
}

impl Default for GroundingOptions {
    fn default() -> Self {
        GroundingOptions {
            prune_unreachable: true,
            cap: DEFAULT_GROUNDING_CAP,
        }
    }
}

/// Instantiates every schema over the problem objects, sorted by `(name, args)`.
pub fn ground(
    domain: &Domain,
    problem: &Problem,
    opts: GroundingOptions,
) -> Result<Vec<GroundedAction>, PddlError> {
    let by_type = objects_by_type(domain, &problem.objects);
    let mut out = if opts.prune_unreachable {
        ground_reachable(domain, problem, &by_type, opts.cap)?
    } else {
        ground_full(domain, &by_type, opts.cap)?
    };
    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(out)
}

/// For every declared type, the sorted objects that are instances of it.
fn objects_by_type<'a>(domain: &Domain, objects: &'a BTreeMap<String, String>) -> HashMap<String, Vec<&'a str>> {
    let mut map: HashMap<String, Vec<&str>> = HashMap::new();
    for ty in domain.types.types() {
        let members = objects
            .iter()
            .filter(|(_, t)| domain.types.is_subtype(t, ty))
            .map(|(o, _)| o.as_str())
            .collect();
        map.insert(ty.to_string(), members);
    }
    map
}

fn ground_full(
    domain: &Domain,
    by_type: &HashMap<String, Vec<&str>>,
    cap: usize,
) -> Result<Vec<GroundedAction>, PddlError> {
    let empty = Vec::new();
    let mut total: u128 = 0;
    let domains: Vec<Vec<&Vec<&str>>> = domain
        .actions
        .iter()
        .map(|a| {
            a.params
                .iter()
                .map(|p| by_type.get(&p.ty).unwrap_or(&empty))
                .collect()
        })
        .collect();
    for d in &domains {
        let count = d.iter().map(|v| v.len() as u128).product::<u128>();
        total += count;
    }
    if total > cap as u128 {
        return Err(PddlError::GroundingExplosion { count: total, cap });
    }
    let mut out = Vec::with_capacity(total as usize);
    for (schema, dom) in domain.actions.iter().zip(&domains) {
        let mut binding: Vec<&str> = Vec::with_capacity(dom.len());
        cartesian(dom, &mut binding, &mut |b| out.push(schema.instantiate(b)));
    }
    Ok(out)
}

fn cartesian<'a>(dom: &[&Vec<&'a str>], binding: &mut Vec<&'a str>, emit: &mut dyn FnMut(&[&'a str])) {
    if binding.len() == dom.len() {
        emit(binding);
        return;
    }
    for obj in dom[binding.len()].iter() {
        binding.push(obj);
        cartesian(dom, binding, emit);
        binding.pop();
    }
}

/// Relaxed-reachability grounding: repeatedly joins positive preconditions
/// against the atoms reachable so far until no new atom appears.
fn ground_reachable(
    domain: &Domain,
    problem: &Problem,
    by_type: &HashMap<String, Vec<&str>>,
    cap: usize,
) -> Result<Vec<GroundedAction>, PddlError> {
    let mut reached: HashSet<Atom> = problem.init.iter().cloned().collect();
    let mut index: HashMap<String, BTreeSet<Vec<String>>> = HashMap::new();
    for a in &problem.init {
        index.entry(a.predicate.clone()).or_default().insert(a.args.clone());
    }
    let mut seen: HashSet<(usize, Vec<String>)> = HashSet::new();
    let mut out = Vec::new();

    loop {
        let mut fresh_atoms = Vec::new();
        for (si, schema) in domain.actions.iter().enumerate() {
            let mut bindings = Vec::new();
            let mut slots: Vec<Option<&str>> = vec![None; schema.params.len()];
            join(schema, 0, &mut slots, &index, by_type, domain, problem, &mut bindings);
            for b in bindings {
                if seen.contains(&(si, b.clone())) {
                    continue;
                }
                if seen.len() >= cap {
                    return Err(PddlError::GroundingExplosion {
                        count: seen.len() as u128 + 1,
                        cap,
                    });
                }
                let refs: Vec<&str> = b.iter().map(String::as_str).collect();
                let action = schema.instantiate(&refs);
                for add in &action.add {
                    if !reached.contains(add) {
                        fresh_atoms.push(add.clone());
                    }
                }
                seen.insert((si, b));
                out.push(action);
            }
        }
        let mut changed = false;
        for atom in fresh_atoms {
            if reached.insert(atom.clone()) {
                index.entry(atom.predicate.clone()).or_default().insert(atom.args);
                changed = true;
            }
        }
        if !changed {
            return Ok(out);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn join<'a>(
    schema: &ActionSchema,
    pre_idx: usize,
    slots: &mut Vec<Option<&'a str>>,
    index: &'a HashMap<String, BTreeSet<Vec<String>>>,
    by_type: &'a HashMap<String, Vec<&'a str>>,
    domain: &Domain,
    problem: &'a Problem,
    out: &mut Vec<Vec<String>>,
) {
    // Skip negative literals: the relaxation ignores them.
    let next_pos = schema.pre[pre_idx..].iter().position(|l| l.positive).map(|p| p + pre_idx);
    let Some(pi) = next_pos else {
        fill_free(schema, 0, slots, by_type, out);
        return;
    };
    let lit = &schema.pre[pi];
    let Some(candidates) = index.get(&lit.atom.predicate) else {
        return;
    };
    for args in candidates {
        if args.len() != lit.atom.args.len() {
            continue;
        }
        let mut assigned = Vec::new();
        let mut ok = true;
        for (term, value) in lit.atom.args.iter().zip(args) {
            match term {
                Term::Const(c) => {
                    if c != value {
                        ok = false;
                        break;
                    }
                }
                Term::Var(v) => {
                    let idx = schema.params.iter().position(|p| &p.name == v).expect("validated");
                    match slots[idx] {
                        Some(bound) if bound != value => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            let ty = problem.objects.get(value);
                            let well_typed = ty.is_some_and(|t| domain.types.is_subtype(t, &schema.params[idx].ty));
                            if !well_typed {
                                ok = false;
                                break;
                            }
                            slots[idx] = Some(value.as_str());
                            assigned.push(idx);
                        }
                    }
                }
            }
        }
        if ok {
            join(schema, pi + 1, slots, index, by_type, domain, problem, out);
        }
        for idx in assigned {
            slots[idx] = None;
        }
    }
}

fn fill_free<'a>(
    schema: &ActionSchema,
    from: usize,
    slots: &mut Vec<Option<&'a str>>,
    by_type: &'a HashMap<String, Vec<&'a str>>,
    out: &mut Vec<Vec<String>>,
) {
    let Some(free) = (from..slots.len()).find(|&i| slots[i].is_none()) else {
        out.push(slots.iter().map(|s| s.expect("all bound").to_string()).collect());
        return;
    };
    if let Some(objs) = by_type.get(&schema.params[free].ty) {
        for obj in objs {
            slots[free] = Some(obj);
            fill_free(schema, free + 1, slots, by_type, out);
        }
    }
    slots[free] = None;
}

#[cfg(test)]
mod tests {
    use super::super::{parse_domain, parse_problem};
    use super::*;

    const D: &str = "(define (domain g) (:requirements :strips :typing)
        (:types a b - object)
        (:predicates (p ?x - object) (q ?x - a ?y - b) (r ?x - a))
        (:action one :parameters (?x - object) :precondition () :effect (p ?x))
        (:action two :parameters (?x - a ?y - b) :precondition (r ?x) :effect (q ?x ?y)))";

    fn problem(d: &Domain, objects: &str, init: &str) -> Problem {
        let text = format!("(define (problem t) (:domain g) (:objects {objects}) (:init {init}) (:goal (p x)))");
        parse_problem(&text, d).unwrap()
    }

    #[test]
    fn one_param_three_objects() {
        let d = parse_domain(
            "(define (domain g) (:requirements :strips) (:predicates (p ?x)) (:action one :parameters (?x) :precondition () :effect (p ?x)))",
        )
        .unwrap();
        let p = parse_problem(
            "(define (problem t) (:domain g) (:objects x y z) (:init) (:goal (p x)))",
            &d,
        )
        .unwrap();
        let full = ground(&d, &p, GroundingOptions { prune_unreachable: false, cap: 100 }).unwrap();
        assert_eq!(full.len(), 3);
    }

    #[test]
    fn typed_bindings_two_by_three() {
        // Objects: a1 a2 of type a, b1 b2 b3 of type b: `two` has 2x3 bindings.
        let d = parse_domain(D).unwrap();
        let p = problem(&d, "a1 a2 - a b1 b2 b3 - b x - object", "(r a1) (r a2)");
        let full = ground(&d, &p, GroundingOptions { prune_unreachable: false, cap: 100 }).unwrap();
        assert_eq!(full.iter().filter(|a| a.name == "two").count(), 6);
        assert_eq!(full.iter().filter(|a| a.name == "one").count(), 6);
        let pruned = ground(&d, &p, GroundingOptions::default()).unwrap();
        assert_eq!(pruned, full);
    }

    #[test]
    fn pruning_drops_unreachable() {
        let d = parse_domain(D).unwrap();
        let p = problem(&d, "a1 a2 - a b1 - b x - object", "(r a1)");
        let full = ground(&d, &p, GroundingOptions { prune_unreachable: false, cap: 100 }).unwrap();
        let pruned = ground(&d, &p, GroundingOptions::default()).unwrap();
        assert!(pruned.len() < full.len());
        assert!(pruned.iter().all(|a| full.contains(a)));
        assert!(pruned.iter().any(|a| a.name == "two" && a.args == ["a1", "b1"]));
        assert!(!pruned.iter().any(|a| a.name == "two" && a.args == ["a2", "b1"]));
    }

    #[test]
    fn cap_exceeded() {
        let d = parse_domain(D).unwrap();
        let p = problem(&d, "a1 a2 a3 - a b1 b2 b3 - b x - object", "(r a1) (r a2) (r a3)");
        let err = ground(&d, &p, GroundingOptions { prune_unreachable: false, cap: 10 }).unwrap_err();
        assert!(matches!(err, PddlError::GroundingExplosion { cap: 10, .. }));
        let err = ground(&d, &p, GroundingOptions { prune_unreachable: true, cap: 10 }).unwrap_err();
        assert!(matches!(err, PddlError::GroundingExplosion { cap: 10, .. }));
    }
}
