use std::fmt::Write as _;

use super::Problem;

/// Canonical problem text: one object, atom or goal literal per line, each
/// block sorted lexicographically by its printed form.
pub fn serialize_problem(p: &Problem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain);

    out.push_str("  (:objects\n");
    // BTreeMap iteration is already lexicographic by id.
    for (obj, ty) in &p.objects {
        let _ = writeln!(out, "    {obj} - {ty}");
    }
    out.push_str("  )\n");

    let mut init: Vec<String> = p.init.iter().map(ToString::to_string).collect();
    init.sort();
    out.push_str("  (:init\n");
    for a in init {
        let _ = writeln!(out, "    {a}");
    }
    out.push_str("  )\n");

    let mut goal: Vec<String> = p.goal.literals().map(ToString::to_string).collect();
    goal.sort();
    out.push_str("  (:goal (and\n");
    for g in goal {
        let _ = writeln!(out, "    {g}");
    }
    out.push_str("  ))\n)\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::{parse_problem, Domain};
    use super::*;

    #[test]
    fn permuted_input_same_bytes() {
        let d = Domain::household();
        let a = "(define (problem p) (:domain household)
            (:objects k - room c - furniture)
            (:init (at-agent k) (in c k) (closed c))
            (:goal (and (open c) (not (closed c)))))";
        let b = "(define (problem p) (:domain household)
            (:objects c - furniture k - room)
            (:init (closed c) (in c k) (at-agent k))
            (:goal (and (not (closed c)) (open c))))";
        let pa = parse_problem(a, &d).unwrap();
        let pb = parse_problem(b, &d).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(serialize_problem(&pa), serialize_problem(&pb));
        let text = serialize_problem(&pa);
        assert_eq!(parse_problem(&text, &d).unwrap(), pa);
        assert!(text.contains("    (at-agent k)\n    (closed c)\n    (in c k)\n"));
    }
}
