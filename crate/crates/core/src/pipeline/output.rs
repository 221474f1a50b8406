//! The tagged text format a policy emits: a numbered `<trace>` block followed
//! by one `<subgoal k=..>` block per trace line.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::pddl::{self, Literal};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OutputError {
    #[error("line {line}: {message}")]
    Grammar { line: usize, message: String },
    #[error("trace has {trace} subtasks but there are {subgoals} subgoal blocks")]
    Misaligned { trace: usize, subgoals: usize },
    #[error("subgoal {0} has no goal literals")]
    EmptySubgoal(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtask {
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgoal {
    pub index: usize,
    pub objects: BTreeSet<String>,
    pub literals: Vec<Literal>,
}

/// A decomposition trace plus the aligned subgoals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyOutput {
    pub trace: Vec<Subtask>,
    pub subgoals: Vec<Subgoal>,
}

impl PolicyOutput {
    pub fn len(&self) -> usize {
        self.trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.is_empty()
    }

    pub fn trace_texts(&self) -> Vec<&str> {
        self.trace.iter().map(|t| t.text.as_str()).collect()
    }
}

fn grammar(line: usize, message: impl Into<String>) -> OutputError {
    OutputError::Grammar {
        line,
        message: message.into(),
    }
}

/// Splits `(a b) (not (c d))` into top-level parenthesized groups.
fn split_groups(text: &str, line: usize) -> Result<Vec<&str>, OutputError> {
    let mut groups = Vec::new();
    let mut depth = 0usize;
    let mut start = None;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            ')' => {
                if depth == 0 {
                    return Err(grammar(line, "unbalanced `)`"));
                }
                depth -= 1;
                if depth == 0 {
                    groups.push(&text[start.take().unwrap_or(0)..=i]);
                }
            }
            c if depth == 0 && !c.is_whitespace() => {
                return Err(grammar(line, format!("unexpected `{c}` outside a literal")));
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(grammar(line, "unbalanced `(`"));
    }
    Ok(groups)
}

/// Parses policy output text. Blank lines are ignored everywhere.
pub fn parse_output(text: &str) -> Result<PolicyOutput, OutputError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    match lines.next() {
        Some((_, "<trace>")) => {}
        Some((n, other)) => return Err(grammar(n, format!("expected `<trace>`, found `{other}`"))),
        None => return Err(grammar(1, "empty output")),
    }
    let mut trace = Vec::new();
    loop {
        let Some((n, line)) = lines.next() else {
            return Err(grammar(text.lines().count(), "missing `</trace>`"));
        };
        if line == "</trace>" {
            break;
        }
        let expected = trace.len() + 1;
        let rest = line
            .strip_prefix(&format!("{expected}."))
            .ok_or_else(|| grammar(n, format!("expected trace line numbered `{expected}.`")))?;
        let body = rest.trim();
        if body.is_empty() {
            return Err(grammar(n, "empty subtask text"));
        }
        trace.push(Subtask {
            index: expected,
            text: body.to_string(),
        });
    }

    let mut subgoals = Vec::new();
    while let Some((n, line)) = lines.next() {
        let expected = subgoals.len() + 1;
        let header = format!("<subgoal k={expected}>");
        if line != header {
            return Err(grammar(n, format!("expected `{header}`, found `{line}`")));
        }
        let (n_obj, obj_line) = lines.next().ok_or_else(|| grammar(n, "missing `objects:` line"))?;
        let objects_text = obj_line
            .strip_prefix("objects:")
            .ok_or_else(|| grammar(n_obj, "expected `objects:`"))?;
        let objects: BTreeSet<String> = objects_text.split_whitespace().map(str::to_string).collect();
        let (n_goal, goal_line) = lines.next().ok_or_else(|| grammar(n_obj, "missing `goals:` line"))?;
        let goals_text = goal_line
            .strip_prefix("goals:")
            .ok_or_else(|| grammar(n_goal, "expected `goals:`"))?;
        let mut literals = Vec::new();
        for group in split_groups(goals_text, n_goal)? {
            let lit = pddl::parse_literal(group).map_err(|e| grammar(n_goal, e.to_string()))?;
            if !literals.contains(&lit) {
                literals.push(lit);
            }
        }
        match lines.next() {
            Some((_, "</subgoal>")) => {}
            Some((m, other)) => return Err(grammar(m, format!("expected `</subgoal>`, found `{other}`"))),
            None => return Err(grammar(n_goal, "missing `</subgoal>`")),
        }
        if literals.is_empty() {
            return Err(OutputError::EmptySubgoal(expected));
        }
        subgoals.push(Subgoal {
            index: expected,
            objects,
            literals,
        });
    }

    if trace.len() != subgoals.len() {
        return Err(OutputError::Misaligned {
            trace: trace.len(),
            subgoals: subgoals.len(),
        });
    }
    if trace.is_empty() {
        return Err(grammar(1, "no subtasks"));
    }
    Ok(PolicyOutput { trace, subgoals })
}

/// Canonical text for an output; [`parse_output`] inverts it.
pub fn render_output(out: &PolicyOutput) -> String {
    let mut s = String::from("<trace>\n");
    for t in &out.trace {
        let _ = writeln!(s, "{}. {}", t.index, t.text);
    }
    s.push_str("</trace>\n");
    for g in &out.subgoals {
        let _ = writeln!(s, "<subgoal k={}>", g.index);
        let objs: Vec<&str> = g.objects.iter().map(String::as_str).collect();
        let _ = writeln!(s, "objects: {}", objs.join(" "));
        let lits: Vec<String> = g.literals.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "goals: {}", lits.join(" "));
        s.push_str("</subgoal>\n");
    }
    s
}
