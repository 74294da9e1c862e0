use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use super::grammar::{tokenize, Grammar};
use super::tree::ParseTree;
use super::{noun_phrase, LanguageError};
use crate::rng::{purpose, stream_rng};
use crate::symbols::{AnnotationSymbol, BehaviorType, Vocabulary};

/// An utterance and its parse, stamped with the cycle it was issued at.
#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub raw_text: String,
    pub tree: ParseTree,
    pub issue_time: u64,
}

impl Instruction {
    pub fn new(raw_text: impl Into<String>, tree: ParseTree, issue_time: u64) -> Self {
        Self {
            raw_text: raw_text.into(),
            tree,
            issue_time,
        }
    }
}

/// Behavior annotation: a type plus the object type of its goal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BehaviorTemplate {
    pub behavior: BehaviorType,
    pub goal_type: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub instruction: Instruction,
    pub detectors: BTreeSet<String>,
    pub annotations: BTreeSet<AnnotationSymbol>,
    pub behavior: BehaviorTemplate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    pub provenance: String,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copy without entry `k` (for leave-one-out evaluation).
    pub fn without(&self, k: usize) -> Corpus {
        let mut c = self.clone();
        c.entries.remove(k);
        c
    }

    /// Serializes to the block format read by [`load_corpus`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "provenance: {}", self.provenance).unwrap();
        for e in &self.entries {
            out.push('\n');
            writeln!(out, "text: {}", e.instruction.raw_text).unwrap();
            writeln!(out, "tree: {}", e.instruction.tree).unwrap();
            let dets: Vec<&str> = e.detectors.iter().map(String::as_str).collect();
            writeln!(out, "detectors: {}", dets.join(", ")).unwrap();
            let anns: Vec<String> = e.annotations.iter().map(ToString::to_string).collect();
            writeln!(out, "annotations: {}", anns.join(", ")).unwrap();
            writeln!(out, "behavior: {} {}", e.behavior.behavior, e.behavior.goal_type).unwrap();
        }
        out
    }
}

/// Splits on commas that are not inside parentheses.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur);
    out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Parses and validates corpus text against a vocabulary.
pub fn parse_corpus(text: &str, vocab: &Vocabulary) -> Result<Corpus, LanguageError> {
    let mut provenance = String::new();
    let mut entries = Vec::new();
    let mut block: Vec<(usize, &str, &str)> = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    for (i, raw) in lines.iter().enumerate().chain(std::iter::once((lines.len(), &""))) {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !block.is_empty() {
                if let Some(e) = read_entry(&block, vocab, &mut provenance)? {
                    entries.push(e);
                }
                block.clear();
            }
            continue;
        }
        let (key, value) = line.split_once(':').ok_or(LanguageError::FormatError {
            line: i + 1,
            message: "expected `key: value`".into(),
        })?;
        block.push((i + 1, key.trim(), value.trim()));
    }
    Ok(Corpus { entries, provenance })
}

fn read_entry(
    block: &[(usize, &str, &str)],
    vocab: &Vocabulary,
    provenance: &mut String,
) -> Result<Option<CorpusEntry>, LanguageError> {
    let first_line = block[0].0;
    if let [(_, "provenance", p)] = block {
        *provenance = p.to_string();
        return Ok(None);
    }
    let field = |name: &str| -> Result<(usize, &str), LanguageError> {
        block
            .iter()
            .find(|(_, k, _)| *k == name)
            .map(|(l, _, v)| (*l, *v))
            .ok_or_else(|| LanguageError::FormatError {
                line: first_line,
                message: format!("missing `{name}:`"),
            })
    };
    for (line, key, _) in block {
        if !["text", "tree", "detectors", "annotations", "behavior"].contains(key) {
            return Err(LanguageError::FormatError {
                line: *line,
                message: format!("unknown field `{key}`"),
            });
        }
    }
    let (_, text) = field("text")?;
    let (tree_line, tree_text) = field("tree")?;
    let tree = ParseTree::from_bracketed(tree_text).map_err(|e| LanguageError::FormatError {
        line: tree_line,
        message: e.to_string(),
    })?;
    if tokenize(text).join(" ") != tree.text {
        return Err(LanguageError::FormatError {
            line: tree_line,
            message: "tree leaves do not spell the text".into(),
        });
    }
    let (_, dets) = field("detectors")?;
    let mut detectors = BTreeSet::new();
    for d in split_top_level(dets) {
        if vocab.classifier_type(&d).is_none() {
            return Err(LanguageError::UnknownSymbol(d));
        }
        detectors.insert(d);
    }
    let (ann_line, anns) = field("annotations")?;
    let mut annotations = BTreeSet::new();
    for a in split_top_level(anns) {
        let sym: AnnotationSymbol = a.parse().map_err(|m| LanguageError::FormatError {
            line: ann_line,
            message: m,
        })?;
        if let Some(t) = sym.types().into_iter().find(|t| !vocab.has_type(t)) {
            return Err(LanguageError::UnknownSymbol(t.to_string()));
        }
        annotations.insert(sym);
    }
    let (beh_line, beh) = field("behavior")?;
    let mut parts = beh.split_whitespace();
    let (Some(b), Some(goal), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(LanguageError::FormatError {
            line: beh_line,
            message: "expected `behavior: <type> <goal-type>`".into(),
        });
    };
    let behavior = b.parse::<BehaviorType>().map_err(LanguageError::UnknownSymbol)?;
    if !vocab.has_type(goal) {
        return Err(LanguageError::UnknownSymbol(goal.to_string()));
    }
    Ok(Some(CorpusEntry {
        instruction: Instruction::new(text, tree, 0),
        detectors,
        annotations,
        behavior: BehaviorTemplate {
            behavior,
            goal_type: goal.to_string(),
        },
    }))
}

pub fn load_corpus(path: &Path, vocab: &Vocabulary) -> Result<Corpus, LanguageError> {
    let text = std::fs::read_to_string(path).map_err(|e| LanguageError::Io(format!("{}: {e}", path.display())))?;
    parse_corpus(&text, vocab)
}

/// Derives the three annotation layers of an instruction from its parse.
pub fn annotate(tree: &ParseTree, vocab: &Vocabulary) -> Result<CorpusEntry, LanguageError> {
    let verb = tree
        .child("VB")
        .ok_or_else(|| LanguageError::InvalidTree("instruction has no verb".into()))?;
    let behavior = vocab
        .behavior_for(&verb.text)
        .ok_or_else(|| LanguageError::UnknownSymbol(verb.text.clone()))?;
    let object = tree
        .child("NP")
        .ok_or_else(|| LanguageError::InvalidTree("instruction has no object".into()))?;
    let mut detectors = BTreeSet::new();
    let mut annotations = BTreeSet::new();
    let mut stack = vec![object];
    while let Some(np) = stack.pop() {
        let info = noun_phrase(np, vocab).ok_or_else(|| LanguageError::UnknownSymbol(np.text.clone()))?;
        if let Some(c) = vocab.classifier_for_type(info.type_name) {
            detectors.insert(c.to_string());
        }
        annotations.insert(AnnotationSymbol::Type(info.type_name.to_string()));
        if let Some((relation, inner)) = info.relation {
            let landmark = noun_phrase(inner, vocab).ok_or_else(|| LanguageError::UnknownSymbol(inner.text.clone()))?;
            annotations.insert(AnnotationSymbol::Relation {
                relation,
                subject: info.type_name.to_string(),
                landmark: landmark.type_name.to_string(),
            });
            stack.push(inner);
        }
    }
    let goal = noun_phrase(object, vocab).expect("checked above").type_name.to_string();
    Ok(CorpusEntry {
        instruction: Instruction::new(tree.text.clone(), tree.clone(), 0),
        detectors,
        annotations,
        behavior: BehaviorTemplate { behavior, goal_type: goal },
    })
}

/// Phrases that must appear in the generated corpus.
const FIXED: [&str; 4] = [
    "retrieve the ball inside the box",
    "pick up the crackers box inside the box",
    "go to the crackers box",
    "get the drill from the box",
];

/// Expands verb x object x relation templates, keeps the fixed phrases and
/// a seeded sample of the rest, and annotates each by rule.
pub fn generate_corpus(vocab: &Vocabulary, grammar: &Grammar, seed: u64, count: usize) -> Result<Corpus, LanguageError> {
    let verbs = [
        "retrieve", "get", "fetch", "pick up", "grab", "go to", "drive to",
    ];
    let objects: Vec<String> = vocab
        .types()
        .iter()
        .map(|t| t.phrases[0].clone())
        .collect();
    let containers = ["box", "bowl", "backpack"];
    let surfaces = ["table", "chair", "box"];
    let side_preps = ["near", "by", "left of", "right of"];
    let inside_preps = ["inside", "in", "from"];

    let mut pool: Vec<String> = Vec::new();
    for v in verbs {
        for (oi, o) in objects.iter().enumerate() {
            pool.push(format!("{v} the {o}"));
            if let Some(c) = vocab.colors().get(oi % vocab.colors().len().max(1)) {
                pool.push(format!("{v} the {c} {o}"));
            }
            for c in containers {
                if o != c {
                    for p in inside_preps {
                        pool.push(format!("{v} the {o} {p} the {c}"));
                    }
                }
            }
            for s in surfaces {
                if o != s {
                    for p in side_preps {
                        pool.push(format!("{v} the {o} {p} the {s}"));
                    }
                }
            }
        }
    }
    pool.retain(|s| !FIXED.contains(&s.as_str()));
    pool.sort();
    pool.dedup();
    let mut rng = stream_rng(seed, &[purpose::FIXTURE]);
    pool.shuffle(&mut rng);
    let mut texts: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    texts.extend(pool.into_iter().take(count.saturating_sub(FIXED.len())));

    let mut entries = Vec::with_capacity(texts.len());
    for t in texts {
        let tree = grammar.parse(&t)?.tree;
        entries.push(annotate(&tree, vocab)?);
    }
    Ok(Corpus {
        entries,
        provenance: format!("generated-templates seed={seed} count={count}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::Relation;

    #[test]
    fn top_level_split_keeps_relation_arguments() {
        assert_eq!(
            split_top_level("type(ball), inside(ball,box)"),
            vec!["type(ball)".to_string(), "inside(ball,box)".to_string()]
        );
        assert!(split_top_level("  ").is_empty());
    }

    #[test]
    fn relation_of_inner_phrase() {
        let vocab = Vocabulary::parse(
            "type ball: ball\ntype box: box\nrelation inside: inside\nverb retrieve: retrieve\nclassifier ball_detector: ball",
        )
        .unwrap();
        let tree = ParseTree::from_bracketed(
            "(VP (VB retrieve) (NP (DT the) (NN ball) (PP (IN inside) (NP (DT the) (NN box)))))",
        )
        .unwrap();
        let e = annotate(&tree, &vocab).unwrap();
        assert_eq!(e.behavior.goal_type, "ball");
        assert_eq!(e.detectors.iter().collect::<Vec<_>>(), ["ball_detector"]);
        assert!(e.annotations.contains(&AnnotationSymbol::Relation {
            relation: Relation::Inside,
            subject: "ball".into(),
            landmark: "box".into(),
        }));
    }
}
