//! Minimal double-brace substitution engine.
//!
//! Supported syntax:
//! - `{{ name }}` substitutes a scalar binding.
//! - `{{#each list}}` ... `{{/each}}` repeats its body once per item of a list
//!   binding; inside the body `{{ field }}` reads from the current item.
//!
//! A loop tag that sits alone on its line is removed together with that line.
//! Loops do not nest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Text(String),
    Var(String),
    Each { list: String, body: Vec<Node> },
}

/// Values substituted into a template, kept on the rendered prompt for audit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bindings {
    pub scalars: BTreeMap<String, String>,
    pub lists: BTreeMap<String, Vec<BTreeMap<String, String>>>,
}

impl Bindings {
    pub fn scalar(mut self, name: &str, value: impl Into<String>) -> Self {
        self.scalars.insert(name.to_string(), value.into());
        self
    }

    pub fn list<I, R>(mut self, name: &str, rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (&'static str, String)>,
    {
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
            .collect();
        self.lists.insert(name.to_string(), rows);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    nodes: Vec<Node>,
}

/// Names a template refers to: scalars at top level, and `(list, field)` pairs.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Placeholders {
    pub scalars: Vec<String>,
    pub list_fields: Vec<(String, String)>,
}

enum Token<'a> {
    Text(&'a str),
    Var(&'a str),
    Open(&'a str),
    Close,
}

impl Template {
    pub fn parse(source: &str) -> Result<Template> {
        let source = strip_standalone_loop_lines(source);
        let tokens = tokenize(&source)?;
        let mut top = Vec::new();
        let mut open: Option<(String, Vec<Node>)> = None;
        for token in tokens {
            let target = match open.as_mut() {
                Some((_, body)) => body,
                None => &mut top,
            };
            match token {
                Token::Text(t) => target.push(Node::Text(t.to_string())),
                Token::Var(v) => target.push(Node::Var(v.to_string())),
                Token::Open(list) => {
                    if open.is_some() {
                        return Err(Error::Template("nested loops are not supported".into()));
                    }
                    open = Some((list.to_string(), Vec::new()));
                }
                Token::Close => match open.take() {
                    Some((list, body)) => top.push(Node::Each { list, body }),
                    None => return Err(Error::Template("`{{/each}}` without open loop".into())),
                },
            }
        }
        if let Some((list, _)) = open {
            return Err(Error::Template(format!("unterminated loop over `{list}`")));
        }
        Ok(Template { nodes: top })
    }

    pub fn placeholders(&self) -> Placeholders {
        let mut out = Placeholders::default();
        for node in &self.nodes {
            match node {
                Node::Var(v) => out.scalars.push(v.clone()),
                Node::Each { list, body } => {
                    for inner in body {
                        if let Node::Var(v) = inner {
                            out.list_fields.push((list.clone(), v.clone()));
                        }
                    }
                }
                Node::Text(_) => {}
            }
        }
        out
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String> {
        let mut out = String::new();
        for node in &self.nodes {
            match node {
                Node::Text(t) => out.push_str(t),
                Node::Var(v) => out.push_str(
                    bindings
                        .scalars
                        .get(v)
                        .ok_or_else(|| Error::Template(format!("unbound variable `{v}`")))?,
                ),
                Node::Each { list, body } => {
                    let rows = bindings
                        .lists
                        .get(list)
                        .ok_or_else(|| Error::Template(format!("unbound list `{list}`")))?;
                    for row in rows {
                        for inner in body {
                            match inner {
                                Node::Text(t) => out.push_str(t),
                                Node::Var(v) => out.push_str(row.get(v).ok_or_else(|| {
                                    Error::Template(format!("unbound field `{list}.{v}`"))
                                })?),
                                Node::Each { .. } => unreachable!("parser rejects nesting"),
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn strip_standalone_loop_lines(source: &str) -> String {
    let mut out = String::with_capacity(source.len());
    for line in source.split_inclusive('\n') {
        let t = line.trim();
        let is_tag = t.starts_with("{{") && t.ends_with("}}") && t.matches("{{").count() == 1 && {
            let inner = t[2..t.len() - 2].trim();
            inner.starts_with("#each") || inner == "/each"
        };
        if is_tag {
            out.push_str(t);
        } else {
            out.push_str(line);
        }
    }
    out
}

fn tokenize(source: &str) -> Result<Vec<Token<'_>>> {
    let mut tokens = Vec::new();
    let mut rest = source;
    while let Some(start) = rest.find("{{") {
        if start > 0 {
            tokens.push(Token::Text(&rest[..start]));
        }
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| Error::Template("unterminated `{{`".into()))?;
        let inner = after[..end].trim();
        if let Some(list) = inner.strip_prefix("#each") {
            let list = list.trim();
            if !is_ident(list) {
                return Err(Error::Template(format!("bad loop target `{list}`")));
            }
            tokens.push(Token::Open(list));
        } else if inner == "/each" {
            tokens.push(Token::Close);
        } else if is_ident(inner) {
            tokens.push(Token::Var(inner));
        } else {
            return Err(Error::Template(format!(
                "bad placeholder `{{{{{inner}}}}}`"
            )));
        }
        rest = &after[end + 2..];
    }
    if rest.contains("}}") {
        return Err(Error::Template("stray `}}`".into()));
    }
    if !rest.is_empty() {
        tokens.push(Token::Text(rest));
    }
    Ok(tokens)
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}
