//! Word-level tokens for the policy output grammar.
//!
//! Tags such as `<subgoal k=2>` are single tokens, parentheses and newlines
//! are tokens of their own, and everything else splits on whitespace.

use std::collections::HashMap;

use super::TgpoError;

pub const NEWLINE: &str = "\n";

/// Splits text into token strings.
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '\n' => {
                out.push(NEWLINE.to_string());
                chars.next();
            }
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '<' => {
                let end = text[i..].find('>').map_or(text.len(), |e| i + e + 1);
                out.push(text[i..end].to_string());
                while chars.peek().is_some_and(|&(j, _)| j < end) {
                    chars.next();
                }
            }
            _ => {
                let mut end = text.len();
                for (j, d) in text[i..].char_indices() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        end = i + j;
                        break;
                    }
                }
                out.push(text[i..end].to_string());
                while chars.peek().is_some_and(|&(j, _)| j < end) {
                    chars.next();
                }
            }
        }
    }
    out
}

/// Joins token strings back into text: single spaces between words, none
/// after `(`, before `)`, or around newlines.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for t in tokens {
        let t = t.as_ref();
        if let Some(p) = prev {
            let tight = p == "(" || p == NEWLINE || t == ")" || t == NEWLINE;
            if !tight {
                out.push(' ');
            }
        }
        out.push_str(t);
        prev = Some(t);
    }
    out
}

/// A fixed token alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Structural tokens of the grammar plus `extra` words. `max_k` bounds
    /// the subtask numbering.
    pub fn new<S: AsRef<str>>(max_k: usize, extra: impl IntoIterator<Item = S>) -> Self {
        let mut v = Vocabulary {
            words: Vec::new(),
            ids: HashMap::new(),
        };
        for w in ["<trace>", "</trace>", "</subgoal>", NEWLINE, "(", ")", "not", "objects:", "goals:"] {
            v.add(w);
        }
        for k in 1..=max_k {
            v.add(&format!("<subgoal k={k}>"));
            v.add(&format!("{k}."));
        }
        for w in extra {
            v.add(w.as_ref());
        }
        v
    }

    fn add(&mut self, w: &str) {
        if !self.ids.contains_key(w) {
            self.ids.insert(w.to_string(), self.words.len() as u32);
            self.words.push(w.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>, TgpoError> {
        split_tokens(text)
            .into_iter()
            .map(|w| self.id(&w).ok_or(TgpoError::Vocabulary(w)))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String, TgpoError> {
        let words: Vec<&str> = ids
            .iter()
            .map(|&i| self.word(i).ok_or_else(|| TgpoError::Vocabulary(format!("#{i}"))))
            .collect::<Result<_, _>>()?;
        Ok(join_tokens(&words))
    }
}

/// A generated sequence with the generating policy's per-token logprobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub logprobs: Vec<f64>,
    /// True where the token was fixed from outside rather than sampled.
    pub forced: Vec<bool>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn check(&self) -> Result<(), TgpoError> {
        if self.logprobs.len() != self.tokens.len() || self.forced.len() != self.tokens.len() {
            return Err(TgpoError::Shape(format!(
                "{} tokens, {} logprobs, {} mask entries",
                self.tokens.len(),
                self.logprobs.len(),
                self.forced.len()
            )));
        }
        if let Some(i) = (0..self.len()).find(|&i| !self.forced[i] && !self.logprobs[i].is_finite()) {
            return Err(TgpoError::NonFinite(format!("logprob at unforced position {i}")));
        }
        Ok(())
    }

    /// Number of leading forced tokens.
    pub fn forced_prefix_len(&self) -> usize {
        self.forced.iter().take_while(|f| **f).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_grammar_text() {
        let text = "<trace>\n1. open the cabinet\n</trace>\n<subgoal k=1>\nobjects: kitchen_cabinet\ngoals: (open kitchen_cabinet) (not (closed kitchen_cabinet))\n</subgoal>\n";
        let toks = split_tokens(text);
        assert_eq!(&toks[..4], &["<trace>", "\n", "1.", "open"]);
        assert!(toks.contains(&"<subgoal k=1>".to_string()));
        assert_eq!(join_tokens(&toks), text);
    }

    #[test]
    fn unknown_word() {
        let v = Vocabulary::new(2, ["open", "the", "cabinet"]);
        assert!(v.encode("<trace>\n1. open the cabinet\n</trace>\n").is_ok());
        assert_eq!(
            v.encode("1. open the fridge"),
            Err(TgpoError::Vocabulary("fridge".into()))
        );
    }
}
