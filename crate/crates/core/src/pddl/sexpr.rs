//! Minimal s-expression reader for PDDL text.

use super::PddlError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Atom { text: String, line: usize },
    List { items: Vec<Sexpr>, line: usize },
}

impl Sexpr {
    pub fn line(&self) -> usize {
        match self {
            Sexpr::Atom { line, .. } | Sexpr::List { line, .. } => *line,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom { text, .. } => Some(text),
            Sexpr::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List { items, .. } => Some(items),
            Sexpr::Atom { .. } => None,
        }
    }

    /// Head symbol of a list, if the first element is an atom.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|items| items.first()).and_then(Sexpr::as_atom)
    }

    pub fn describe(&self) -> String {
        match self {
            Sexpr::Atom { text, .. } => text.clone(),
            Sexpr::List { items, .. } => match items.first().and_then(Sexpr::as_atom) {
                Some(h) => format!("({h} ...)"),
                None => "(...)".to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Word(String),
}

fn lex(text: &str) -> Vec<(Tok, usize)> {
    let mut out = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find(';') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let mut word = String::new();
        for ch in line.chars() {
            match ch {
                '(' | ')' => {
                    if !word.is_empty() {
                        out.push((Tok::Word(std::mem::take(&mut word)), line_no));
                    }
                    out.push((if ch == '(' { Tok::Open } else { Tok::Close }, line_no));
                }
                c if c.is_whitespace() => {
                    if !word.is_empty() {
                        out.push((Tok::Word(std::mem::take(&mut word)), line_no));
                    }
                }
                c => word.extend(c.to_lowercase()),
            }
        }
        if !word.is_empty() {
            out.push((Tok::Word(word), line_no));
        }
    }
    out
}

/// Parses exactly one top-level expression; trailing tokens are an error.
pub fn parse_one(text: &str) -> Result<Sexpr, PddlError> {
    let toks = lex(text);
    let mut pos = 0;
    let expr = parse_expr(&toks, &mut pos)?;
    if let Some((tok, line)) = toks.get(pos) {
        return Err(PddlError::Syntax {
            line: *line,
            token: tok_text(tok),
        });
    }
    Ok(expr)
}

fn tok_text(tok: &Tok) -> String {
    match tok {
        Tok::Open => "(".into(),
        Tok::Close => ")".into(),
        Tok::Word(w) => w.clone(),
    }
}

fn parse_expr(toks: &[(Tok, usize)], pos: &mut usize) -> Result<Sexpr, PddlError> {
    let Some((tok, line)) = toks.get(*pos) else {
        let line = toks.last().map(|(_, l)| *l).unwrap_or(1);
        return Err(PddlError::Syntax {
            line,
            token: "<eof>".into(),
        });
    };
    *pos += 1;
    match tok {
        Tok::Word(w) => Ok(Sexpr::Atom {
            text: w.clone(),
            line: *line,
        }),
        Tok::Close => Err(PddlError::Syntax {
            line: *line,
            token: ")".into(),
        }),
        Tok::Open => {
            let mut items = Vec::new();
            loop {
                match toks.get(*pos) {
                    Some((Tok::Close, _)) => {
                        *pos += 1;
                        return Ok(Sexpr::List { items, line: *line });
                    }
                    Some(_) => items.push(parse_expr(toks, pos)?),
                    None => {
                        let last = toks.last().map(|(_, l)| *l).unwrap_or(*line);
                        return Err(PddlError::Syntax {
                            line: last,
                            token: "<eof>".into(),
                        });
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_comments_and_lowercases() {
        let e = parse_one("(Define ; comment (\n (Domain X))").unwrap();
        assert_eq!(e.head(), Some("define"));
        let items = e.as_list().unwrap();
        assert_eq!(items[1].head(), Some("domain"));
        assert_eq!(items[1].line(), 2);
    }

    #[test]
    fn unbalanced_reports_line() {
        let err = parse_one("(a\n(b)\n").unwrap_err();
        assert!(matches!(err, PddlError::Syntax { line: 2, .. }), "{err:?}");
        let err = parse_one("(a))").unwrap_err();
        assert!(matches!(err, PddlError::Syntax { line: 1, ref token } if token == ")"));
    }
}
