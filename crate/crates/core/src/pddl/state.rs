use std::collections::BTreeSet;

use super::{Atom, Goal, GroundedAction, Literal, PddlError};

/// A symbolic state: the set of true ground atoms.
pub type State = BTreeSet<Atom>;

/// Positive preconditions are contained in `s` and negated ones are absent.
pub fn applicable(s: &State, a: &GroundedAction) -> bool {
    a.pre_pos.iter().all(|p| s.contains(p)) && a.pre_neg.iter().all(|p| !s.contains(p))
}

/// Precondition literals of `a` that do not hold in `s`.
pub fn missing_preconditions(s: &State, a: &GroundedAction) -> Vec<Literal> {
    let mut missing: Vec<Literal> = a
        .pre_pos
        .iter()
        .filter(|p| !s.contains(*p))
        .cloned()
        .map(Literal::pos)
        .collect();
    missing.extend(a.pre_neg.iter().filter(|p| s.contains(*p)).cloned().map(Literal::neg));
    missing
}

/// `(s \ del) ∪ add`.
pub fn apply(s: &State, a: &GroundedAction) -> Result<State, PddlError> {
    if !applicable(s, a) {
        return Err(PddlError::InapplicableAction(a.to_string()));
    }
    let mut next = s.clone();
    for d in &a.del {
        next.remove(d);
    }
    for ad in &a.add {
        next.insert(ad.clone());
    }
    Ok(next)
}

pub fn holds(s: &State, g: &Goal) -> bool {
    g.literals().all(|l| s.contains(&l.atom) == l.positive)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(p: &str, args: &[&str]) -> Atom {
        Atom::new(p, args.iter().copied())
    }

    fn action(pre_pos: Vec<Atom>, pre_neg: Vec<Atom>, add: Vec<Atom>, del: Vec<Atom>) -> GroundedAction {
        GroundedAction {
            name: "a".into(),
            args: vec![],
            pre_pos,
            pre_neg,
            add,
            del,
        }
    }

    #[test]
    fn empty_precondition_always_applicable() {
        let a = action(vec![], vec![], vec![], vec![]);
        assert!(applicable(&State::new(), &a));
        let s: State = [atom("x", &[])].into();
        assert!(applicable(&s, &a));
        assert_eq!(apply(&s, &a).unwrap(), s);
    }

    #[test]
    fn open_requires_open_atom() {
        let a = action(vec![atom("open", &["c"])], vec![], vec![], vec![]);
        let s: State = [atom("closed", &["c"])].into();
        assert!(!applicable(&s, &a));
        assert_eq!(missing_preconditions(&s, &a), vec![Literal::pos(atom("open", &["c"]))]);
        assert!(matches!(apply(&s, &a), Err(PddlError::InapplicableAction(_))));
    }

    #[test]
    fn open_then_close_round_trips() {
        let open = action(
            vec![atom("closed", &["c"])],
            vec![],
            vec![atom("open", &["c"])],
            vec![atom("closed", &["c"])],
        );
        let close = action(
            vec![atom("open", &["c"])],
            vec![],
            vec![atom("closed", &["c"])],
            vec![atom("open", &["c"])],
        );
        let s: State = [atom("closed", &["c"]), atom("in", &["c", "k"])].into();
        let s1 = apply(&s, &open).unwrap();
        let diff: Vec<_> = s.symmetric_difference(&s1).cloned().collect();
        assert_eq!(diff, vec![atom("closed", &["c"]), atom("open", &["c"])]);
        assert_eq!(apply(&s1, &close).unwrap(), s);
    }

    #[test]
    fn negated_goal_literal() {
        let s: State = [atom("dirty", &["cup"])].into();
        let g = Goal::new([Literal::pos(atom("dirty", &["cup"]))]).unwrap();
        assert!(holds(&s, &g));
        let g = Goal::new([Literal::neg(atom("dirty", &["cup"]))]).unwrap();
        assert!(!holds(&s, &g));
    }
}
