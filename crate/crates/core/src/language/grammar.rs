use std::collections::HashMap;
use std::path::Path;

use super::tree::ParseTree;
use super::LanguageError;

type Sym = usize;

/// Context-free grammar held in a CKY-ready form.
///
/// Rules are written `LHS -> A B | C` with quoted terminals (`DT -> "the"`);
/// the first rule's left-hand side is the start symbol. Right-hand sides
/// longer than two are binarized with `@`-prefixed helper symbols, and both
/// `@` and `_` symbols are spliced out of the returned trees.
#[derive(Debug, Clone)]
pub struct Grammar {
    names: Vec<String>,
    ids: HashMap<String, Sym>,
    start: Sym,
    lexical: HashMap<String, Vec<Sym>>,
    binary: Vec<(Sym, Sym, Sym)>,
    /// Unary rules `(parent, child)` sorted so a child's closure is complete
    /// before any parent that uses it.
    unary: Vec<(Sym, Sym)>,
}

/// Result of a chart parse.
#[derive(Debug, Clone, PartialEq)]
pub struct Parse {
    pub tree: ParseTree,
    /// Number of distinct derivations of the sentence (saturating).
    pub derivations: u64,
}

#[derive(Clone, Copy)]
enum Back {
    Word,
    Unary(Sym),
    Binary(usize, Sym, Sym),
}

type ChartRow = Vec<Vec<Option<(u64, Back)>>>;
type Chart = Vec<ChartRow>;

/// Lowercases, drops sentence punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|c| !matches!(c, '.' | ',' | '!' | '?'))
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

impl Grammar {
    pub fn parse_rules(text: &str) -> Result<Self, LanguageError> {
        let mut g = Grammar {
            names: Vec::new(),
            ids: HashMap::new(),
            start: 0,
            lexical: HashMap::new(),
            binary: Vec::new(),
            unary: Vec::new(),
        };
        let mut start = None;
        let mut helper = 0usize;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| LanguageError::GrammarFormat {
                line: i + 1,
                message: m.to_string(),
            };
            let (lhs, rhs) = line.split_once("->").ok_or_else(|| err("expected `LHS -> RHS`"))?;
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) || lhs.starts_with('@') {
                return Err(err("bad left-hand side"));
            }
            let a = g.intern(lhs);
            start.get_or_insert(a);
            for alt in rhs.split('|') {
                let parts: Vec<&str> = alt.split_whitespace().collect();
                match parts.as_slice() {
                    [] => return Err(err("empty alternative")),
                    [t] if t.starts_with('"') => {
                        let word = t.trim_matches('"');
                        if word.is_empty() || t.len() < 2 || !t.ends_with('"') {
                            return Err(err("bad terminal"));
                        }
                        g.add_word(a, word);
                    }
                    _ if parts.iter().any(|p| p.starts_with('"')) => {
                        return Err(err("terminals must stand alone"));
                    }
                    [b] => {
                        let b = g.intern(b);
                        g.unary.push((a, b));
                    }
                    _ => {
                        let syms: Vec<Sym> = parts.iter().map(|p| g.intern(p)).collect();
                        let mut parent = a;
                        for &s in &syms[..syms.len() - 2] {
                            helper += 1;
                            let h = g.intern(&format!("@{lhs}{helper}"));
                            g.binary.push((parent, s, h));
                            parent = h;
                        }
                        g.binary.push((parent, syms[syms.len() - 2], syms[syms.len() - 1]));
                    }
                }
            }
        }
        g.start = start.ok_or(LanguageError::GrammarFormat {
            line: 0,
            message: "no rules".into(),
        })?;
        g.order_unary()?;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, LanguageError> {
        let text = std::fs::read_to_string(path).map_err(|e| LanguageError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_rules(&text)
    }

    /// Adds pre-terminal entries, e.g. from a vocabulary lexicon.
    pub fn with_lexicon<'a>(mut self, entries: impl IntoIterator<Item = (&'a str, String)>) -> Self {
        for (tag, word) in entries {
            let t = self.intern(tag);
            self.add_word(t, &word);
        }
        self
    }

    fn intern(&mut self, name: &str) -> Sym {
        if let Some(&s) = self.ids.get(name) {
            return s;
        }
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    fn add_word(&mut self, tag: Sym, word: &str) {
        let tags = self.lexical.entry(word.to_lowercase()).or_default();
        if !tags.contains(&tag) {
            tags.push(tag);
        }
    }

    fn order_unary(&mut self) -> Result<(), LanguageError> {
        // Kahn's algorithm over the child -> parent relation.
        let mut rules = std::mem::take(&mut self.unary);
        let mut ordered = Vec::with_capacity(rules.len());
        while !rules.is_empty() {
            let (ready, rest): (Vec<_>, Vec<_>) =
                rules.iter().partition(|(_, child)| !rules.iter().any(|(p, _)| p == child));
            if ready.is_empty() {
                return Err(LanguageError::GrammarFormat {
                    line: 0,
                    message: "unary rule cycle".into(),
                });
            }
            ordered.extend(ready);
            rules = rest;
        }
        self.unary = ordered;
        Ok(())
    }

    pub fn start_symbol(&self) -> &str {
        &self.names[self.start]
    }

    pub fn knows_word(&self, word: &str) -> bool {
        self.lexical.contains_key(word)
    }

    /// CKY parse of `text`. The chart counts derivations; when there is more
    /// than one the first backpointer found is returned.
    pub fn parse(&self, text: &str) -> Result<Parse, LanguageError> {
        let words = tokenize(text);
        if words.is_empty() {
            return Err(LanguageError::NoParse(text.to_string()));
        }
        if let Some(w) = words.iter().find(|w| !self.knows_word(w)) {
            return Err(LanguageError::UnknownToken(w.clone()));
        }
        let n = words.len();
        let nsym = self.names.len();
        // chart[i][j - i - 1][sym] = (derivation count, backpointer)
        let mut chart: Chart =
            (0..n).map(|i| vec![vec![None; nsym]; n - i]).collect();
        for (i, w) in words.iter().enumerate() {
            let cell = &mut chart[i][0];
            for &t in &self.lexical[w] {
                cell[t] = Some((1, Back::Word));
            }
            self.close_unary(cell);
        }
        for len in 2..=n {
            for i in 0..=n - len {
                let j = i + len;
                let mut cell: Vec<Option<(u64, Back)>> = vec![None; nsym];
                for k in i + 1..j {
                    for &(a, b, c) in &self.binary {
                        let (Some((nb, _)), Some((nc, _))) = (chart[i][k - i - 1][b], chart[k][j - k - 1][c]) else {
                            continue;
                        };
                        let add = nb.saturating_mul(nc);
                        match &mut cell[a] {
                            Some((count, _)) => *count = count.saturating_add(add),
                            slot @ None => *slot = Some((add, Back::Binary(k, b, c))),
                        }
                    }
                }
                self.close_unary(&mut cell);
                chart[i][len - 1] = cell;
            }
        }
        let Some((derivations, _)) = chart[0][n - 1][self.start] else {
            return Err(LanguageError::NoParse(text.to_string()));
        };
        let mut built = self.build(&chart, &words, self.start, 0, n);
        let tree = built.pop().expect("start symbol yields one node");
        Ok(Parse { tree, derivations })
    }

    fn close_unary(&self, cell: &mut [Option<(u64, Back)>]) {
        for &(a, b) in &self.unary {
            if let Some((nb, _)) = cell[b] {
                match &mut cell[a] {
                    Some((count, _)) => *count = count.saturating_add(nb),
                    slot @ None => *slot = Some((nb, Back::Unary(b))),
                }
            }
        }
    }

    /// Rebuilds the subtree for `sym` over `[i, j)`. Helper symbols return
    /// their children for splicing into the parent.
    fn build(&self, chart: &[ChartRow], words: &[String], sym: Sym, i: usize, j: usize) -> Vec<ParseTree> {
        let (_, back) = chart[i][j - i - 1][sym].expect("backpointer to a filled cell");
        let children = match back {
            Back::Word => return vec![ParseTree::leaf(self.names[sym].clone(), i, words[i].clone())],
            Back::Unary(b) => self.build(chart, words, b, i, j),
            Back::Binary(k, b, c) => {
                let mut v = self.build(chart, words, b, i, k);
                v.extend(self.build(chart, words, c, k, j));
                v
            }
        };
        let name = &self.names[sym];
        if name.starts_with('@') || name.starts_with('_') {
            children
        } else {
            vec![ParseTree::node(name.clone(), children)]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULES: &str = r#"
S -> NP VP
NP -> "she" | DT N | NP PP
VP -> V NP | VP PP
PP -> P NP
DT -> "the" | "a"
N -> "fish" | "fork"
V -> "eats"
P -> "with"
"#;

    #[test]
    fn counts_attachment_ambiguity() {
        let g = Grammar::parse_rules(RULES).unwrap();
        let p = g.parse("she eats the fish with a fork").unwrap();
        assert_eq!(p.derivations, 2);
        let p = g.parse("she eats the fish").unwrap();
        assert_eq!(p.derivations, 1);
        assert_eq!(
            p.tree.to_bracketed(),
            "(S (NP she) (VP (V eats) (NP (DT the) (N fish))))"
        );
    }

    #[test]
    fn errors() {
        let g = Grammar::parse_rules(RULES).unwrap();
        assert_eq!(g.parse("she eats the spoon"), Err(LanguageError::UnknownToken("spoon".into())));
        assert!(matches!(g.parse("eats the fish"), Err(LanguageError::NoParse(_))));
        assert!(matches!(g.parse("  "), Err(LanguageError::NoParse(_))));
        assert!(Grammar::parse_rules("A -> B\nB -> A").is_err());
    }

    #[test]
    fn long_rules_are_binarized_and_spliced() {
        let g = Grammar::parse_rules("X -> A B C D\nA -> \"a\"\nB -> \"b\"\nC -> \"c\"\nD -> \"d\"").unwrap();
        let p = g.parse("a b c d").unwrap();
        assert_eq!(p.tree.to_bracketed(), "(X (A a) (B b) (C c) (D d))");
    }
}
