use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::LanguageError;

/// Constituent parse tree. Pre-terminals (`(NN ball)`) are the leaves; every
/// other node's children tile its token span in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParseTree {
    pub label: String,
    pub span: Range<usize>,
    pub text: String,
    pub children: Vec<ParseTree>,
}

impl ParseTree {
    pub fn leaf(label: impl Into<String>, index: usize, word: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            span: index..index + 1,
            text: word.into(),
            children: Vec::new(),
        }
    }

    /// Builds an interior node; span and text come from the children.
    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        let start = children.first().map_or(0, |c| c.span.start);
        let end = children.last().map_or(0, |c| c.span.end);
        let text = children.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(" ");
        Self {
            label: label.into(),
            span: start..end,
            text,
            children,
        }
    }

    pub fn is_preterminal(&self) -> bool {
        self.children.is_empty()
    }

    pub fn words(&self) -> Vec<&str> {
        self.text.split(' ').filter(|w| !w.is_empty()).collect()
    }

    /// Nodes in preorder; a node's position in this list is its id.
    pub fn preorder(&self) -> Vec<&ParseTree> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// Preorder ids of each node's children, indexed by node id.
    pub fn child_ids(&self) -> Vec<Vec<usize>> {
        fn walk(t: &ParseTree, next: &mut usize, out: &mut Vec<Vec<usize>>) -> usize {
            let id = *next;
            *next += 1;
            out.push(Vec::new());
            for c in &t.children {
                let cid = walk(c, next, out);
                out[id].push(cid);
            }
            id
        }
        let mut out = Vec::new();
        walk(self, &mut 0, &mut out);
        out
    }

    pub fn child(&self, label: &str) -> Option<&ParseTree> {
        self.children.iter().find(|c| c.label == label)
    }

    pub fn children_labeled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a ParseTree> + 'a {
        self.children.iter().filter(move |c| c.label == label)
    }

    /// Checks span bookkeeping: leaves hold one token, children are
    /// contiguous and tile the parent span, and `text` matches the leaves.
    pub fn validate(&self) -> Result<(), LanguageError> {
        let bad = |msg: String| Err(LanguageError::InvalidTree(msg));
        if self.is_preterminal() {
            if self.span.len() != 1 || self.text.is_empty() || self.text.contains(' ') {
                return bad(format!("leaf {} must hold exactly one token", self.label));
            }
            return Ok(());
        }
        let mut cursor = self.span.start;
        for c in &self.children {
            if c.span.start != cursor {
                return bad(format!("child {} of {} does not continue at token {cursor}", c.label, self.label));
            }
            c.validate()?;
            cursor = c.span.end;
        }
        if cursor != self.span.end {
            return bad(format!("children of {} do not cover its span", self.label));
        }
        let joined = self.children.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(" ");
        if joined != self.text {
            return bad(format!("text of {} disagrees with its leaves", self.label));
        }
        Ok(())
    }

    /// Single-line bracketed form, e.g. `(VP (VB go) (TO to) (NP ...))`.
    pub fn to_bracketed(&self) -> String {
        self.to_string()
    }

    /// Reads the bracketed form; token indices are assigned left to right.
    pub fn from_bracketed(s: &str) -> Result<Self, LanguageError> {
        let tokens = lex_brackets(s);
        let mut pos = 0;
        let mut word_index = 0;
        let tree = read_node(&tokens, &mut pos, &mut word_index)?;
        if pos != tokens.len() {
            return Err(LanguageError::Malformed(format!("trailing input after tree in {s:?}")));
        }
        tree.validate()?;
        Ok(tree)
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_preterminal() {
            return write!(f, "({} {})", self.label, self.text);
        }
        write!(f, "({}", self.label)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        write!(f, ")")
    }
}

fn lex_brackets(s: &str) -> Vec<String> {
    s.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn read_node(tokens: &[String], pos: &mut usize, word_index: &mut usize) -> Result<ParseTree, LanguageError> {
    let malformed = |m: &str| LanguageError::Malformed(m.to_string());
    if tokens.get(*pos).map(String::as_str) != Some("(") {
        return Err(malformed("expected '('"));
    }
    *pos += 1;
    let label = match tokens.get(*pos) {
        Some(t) if t != "(" && t != ")" => t.clone(),
        _ => return Err(malformed("expected a label after '('")),
    };
    *pos += 1;
    match tokens.get(*pos).map(String::as_str) {
        Some("(") => {
            let mut children = Vec::new();
            while tokens.get(*pos).map(String::as_str) == Some("(") {
                children.push(read_node(tokens, pos, word_index)?);
            }
            if tokens.get(*pos).map(String::as_str) != Some(")") {
                return Err(malformed("expected ')'"));
            }
            *pos += 1;
            Ok(ParseTree::node(label, children))
        }
        Some(")") | None => Err(malformed("empty constituent")),
        Some(word) => {
            let leaf = ParseTree::leaf(label, *word_index, word.to_lowercase());
            *word_index += 1;
            *pos += 1;
            if tokens.get(*pos).map(String::as_str) != Some(")") {
                return Err(malformed("a pre-terminal holds exactly one word"));
            }
            *pos += 1;
            Ok(leaf)
        }
    }
}
