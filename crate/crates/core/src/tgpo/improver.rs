//! Trace improvement: feedback from the planner and reviewer goes to an
//! improver service, which answers with a rewritten `<trace>` block.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::TgpoError;
use crate::llm_client::{ChatError, ChatMessage, ChatRequest, ChatResponse, ChatService};

/// What went wrong with one output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Feedback {
    /// `(k, status)` per attempted subtask, e.g. `(2, "unsolvable")`.
    pub subtasks: Vec<(usize, String)>,
    /// Set when the output did not parse or a problem could not be built.
    pub error: Option<String>,
    pub label: Option<String>,
    pub critique: String,
    pub unmet: Vec<String>,
}

impl Feedback {
    pub fn all_solved(&self) -> bool {
        self.error.is_none() && !self.subtasks.is_empty() && self.subtasks.iter().all(|(_, s)| s == "solved")
    }
}

pub const IMPROVER_SYSTEM: &str = "You revise task decompositions for a household robot. Given the task, the \
current numbered trace and feedback from the planner and a reviewer, reply with an improved trace as a \
`<trace>` block of numbered lines and nothing else.";

pub fn render_trace_block(trace: &[String]) -> String {
    let mut s = String::from("<trace>\n");
    for (i, t) in trace.iter().enumerate() {
        let _ = writeln!(s, "{}. {t}", i + 1);
    }
    s.push_str("</trace>\n");
    s
}

/// Extracts the numbered lines of the first `<trace>` block in `text`.
pub fn parse_trace_block(text: &str) -> Result<Vec<String>, TgpoError> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let start = lines
        .iter()
        .position(|l| *l == "<trace>")
        .ok_or_else(|| TgpoError::TraceParse("no `<trace>` line".into()))?;
    let mut out = Vec::new();
    for line in &lines[start + 1..] {
        if line.is_empty() {
            continue;
        }
        if *line == "</trace>" {
            if out.is_empty() {
                return Err(TgpoError::TraceParse("empty trace".into()));
            }
            return Ok(out);
        }
        let prefix = format!("{}.", out.len() + 1);
        let body = line
            .strip_prefix(&prefix)
            .map(str::trim)
            .filter(|b| !b.is_empty())
            .ok_or_else(|| TgpoError::TraceParse(format!("expected line `{prefix} ...`, found `{line}`")))?;
        out.push(body.to_string());
    }
    Err(TgpoError::TraceParse("no `</trace>` line".into()))
}

fn improver_request(model: &str, instruction: &str, trace: &[String], fb: &Feedback) -> ChatRequest {
    let mut user = format!("TASK: {instruction}\nTRACE:\n");
    for (i, t) in trace.iter().enumerate() {
        let _ = writeln!(user, "{}. {t}", i + 1);
    }
    user.push_str("FEEDBACK:\n");
    if let Some(e) = &fb.error {
        let _ = writeln!(user, "error: {e}");
    }
    for (k, status) in &fb.subtasks {
        let _ = writeln!(user, "subtask {k}: {status}");
    }
    if let Some(label) = &fb.label {
        let _ = writeln!(user, "reviewer: {label}");
    }
    for c in fb.critique.lines() {
        let _ = writeln!(user, "critique: {c}");
    }
    for u in &fb.unmet {
        let _ = writeln!(user, "UNMET: {u}");
    }
    user.push_str("END FEEDBACK\n");
    ChatRequest::new(model, vec![ChatMessage::system(IMPROVER_SYSTEM), ChatMessage::user(user)])
}

/// Asks `improver` for a rewritten trace.
pub fn improve_trace(
    improver: &dyn ChatService,
    model: &str,
    instruction: &str,
    trace: &[String],
    feedback: &Feedback,
) -> Result<Vec<String>, TgpoError> {
    let response = improver.complete(&improver_request(model, instruction, trace, feedback))?;
    parse_trace_block(&response.content)
}

/// A step that must come before some others and that another step undoes.
#[derive(Debug, Clone, PartialEq)]
pub struct Prerequisite {
    pub needs: String,
    pub undone_by: String,
    pub for_phrases: Vec<String>,
}

/// Rule-based improver for scripted environments.
///
/// 1. Every unmet literal with a known achiever gets it: appended if absent,
///    or moved to the end if the output was feasible (so a later step must
///    have undone it).
/// 2. Before the first phrase that depends on a prerequisite, the last
///    phrase affecting that prerequisite must establish it; otherwise the
///    establishing phrase is inserted right there.
///
/// With nothing to fix the trace is echoed back unchanged.
#[derive(Debug, Clone, Default)]
pub struct MicroImprover {
    pub achievers: HashMap<String, String>,
    pub prerequisites: Vec<Prerequisite>,
}

impl MicroImprover {
    pub fn rewrite(&self, trace: &[String], feasible: bool, unmet: &[String]) -> Vec<String> {
        let mut t = trace.to_vec();
        for lit in unmet {
            let Some(a) = self.achievers.get(lit) else { continue };
            if !t.contains(a) {
                t.push(a.clone());
            } else if feasible {
                t.retain(|p| p != a);
                t.push(a.clone());
            }
        }
        for pre in &self.prerequisites {
            let Some(first) = t.iter().position(|p| pre.for_phrases.contains(p)) else {
                continue;
            };
            let last_state = t[..first].iter().rposition(|p| *p == pre.needs || *p == pre.undone_by);
            if last_state.is_none_or(|i| t[i] != pre.needs) {
                t.insert(first, pre.needs.clone());
            }
        }
        t
    }

    fn answer(&self, prompt: &str) -> Result<String, ChatError> {
        let decode = |m: &str| ChatError::Decode(format!("mock improver: {m}"));
        let lines: Vec<&str> = prompt.lines().collect();
        let at = |tag: &str| lines.iter().position(|l| *l == tag).ok_or_else(|| decode(tag));
        let (trace_at, fb_at) = (at("TRACE:")?, at("FEEDBACK:")?);
        let mut trace = Vec::new();
        for (i, l) in lines[trace_at + 1..fb_at].iter().enumerate() {
            let body = l.strip_prefix(&format!("{}.", i + 1)).ok_or_else(|| decode("trace line"))?;
            trace.push(body.trim().to_string());
        }
        let feedback = &lines[fb_at + 1..];
        let solved = feedback.iter().filter(|l| l.starts_with("subtask ")).all(|l| l.ends_with(": solved"));
        let attempted = feedback.iter().any(|l| l.starts_with("subtask "));
        let errored = feedback.iter().any(|l| l.starts_with("error: "));
        let feasible = solved && attempted && !errored;
        let unmet: Vec<String> = feedback
            .iter()
            .filter_map(|l| l.strip_prefix("UNMET: "))
            .map(str::to_string)
            .collect();
        Ok(render_trace_block(&self.rewrite(&trace, feasible, &unmet)))
    }
}

impl ChatService for MicroImprover {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate()?;
        self.answer(req.last_user()).map(ChatResponse::text)
    }
}
