use std::path::Path;
use std::sync::Arc;

use super::relations::Relation;
use super::symbol::BehaviorType;
use super::SymbolError;
use crate::semantic_map::NodeKind;

#[derive(Debug, Clone, PartialEq)]
pub struct TypeEntry {
    pub name: String,
    pub kind: NodeKind,
    /// Noun phrases naming the type, each a space-separated word sequence.
    pub phrases: Vec<String>,
}

/// Closed word-to-symbol vocabulary shared by the parser lexicon, the
/// symbol spaces and the corpus validator.
///
/// Text format, one declaration per line (`#` starts a comment):
///
/// ```text
/// type crackers_box: crackers box, cracker box
/// region kitchen: kitchen
/// color red
/// relation left_of: left of
/// verb pickup: pick up, grab
/// classifier ball_detector: ball
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    types: Vec<TypeEntry>,
    type_names: Arc<[String]>,
    colors: Vec<String>,
    relations: Vec<(Relation, Vec<String>)>,
    verbs: Vec<(BehaviorType, Vec<String>)>,
    classifiers: Vec<(String, String)>,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|p| !p.is_empty())
        .collect()
}

impl Vocabulary {
    pub fn parse(text: &str) -> Result<Self, SymbolError> {
        let mut types = Vec::new();
        let mut colors = Vec::new();
        let mut relations = Vec::new();
        let mut verbs = Vec::new();
        let mut classifiers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| SymbolError::Format {
                line: line_no,
                message: msg.to_string(),
            };
            let (keyword, rest) = line.split_once(char::is_whitespace).ok_or_else(|| err("missing name"))?;
            let rest = rest.trim();
            if keyword == "color" {
                colors.push(rest.to_string());
                continue;
            }
            let (name, list) = rest.split_once(':').ok_or_else(|| err("expected `name: phrases`"))?;
            let name = name.trim().to_string();
            let list = split_list(list);
            if list.is_empty() {
                return Err(err("empty phrase list"));
            }
            match keyword {
                "type" | "region" => types.push(TypeEntry {
                    name,
                    kind: if keyword == "type" { NodeKind::Object } else { NodeKind::Region },
                    phrases: list,
                }),
                "relation" => {
                    let r = name.parse::<Relation>().map_err(|r| err(&format!("unknown relation {r:?}")))?;
                    relations.push((r, list));
                }
                "verb" => {
                    let b = name
                        .parse::<BehaviorType>()
                        .map_err(|b| err(&format!("unknown behavior {b:?}")))?;
                    verbs.push((b, list));
                }
                "classifier" => {
                    if list.len() != 1 {
                        return Err(err("a classifier detects exactly one type"));
                    }
                    classifiers.push((name, list[0].clone()));
                }
                other => return Err(err(&format!("unknown declaration {other:?}"))),
            }
        }
        for (id, t) in &classifiers {
            if !types.iter().any(|e| &e.name == t) {
                return Err(SymbolError::UnknownSymbol(format!("{id} detects undeclared type {t}")));
            }
        }
        let type_names: Arc<[String]> = types.iter().map(|t| t.name.clone()).collect::<Vec<_>>().into();
        Ok(Self {
            types,
            type_names,
            colors,
            relations,
            verbs,
            classifiers,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SymbolError> {
        let text = std::fs::read_to_string(path).map_err(|e| SymbolError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn types(&self) -> &[TypeEntry] {
        &self.types
    }

    /// Type names in declaration order; this order indexes the Dirichlet
    /// counts of every map node.
    pub fn type_names(&self) -> &Arc<[String]> {
        &self.type_names
    }

    pub fn object_types(&self) -> impl Iterator<Item = &str> {
        self.types
            .iter()
            .filter(|t| t.kind == NodeKind::Object)
            .map(|t| t.name.as_str())
    }

    pub fn has_type(&self, name: &str) -> bool {
        self.types.iter().any(|t| t.name == name)
    }

    pub fn colors(&self) -> &[String] {
        &self.colors
    }

    pub fn is_color(&self, word: &str) -> bool {
        self.colors.iter().any(|c| c == word)
    }

    pub fn relations(&self) -> impl Iterator<Item = Relation> + '_ {
        self.relations.iter().map(|(r, _)| *r)
    }

    pub fn classifiers(&self) -> &[(String, String)] {
        &self.classifiers
    }

    pub fn classifier_type(&self, id: &str) -> Option<&str> {
        self.classifiers.iter().find(|(c, _)| c == id).map(|(_, t)| t.as_str())
    }

    pub fn classifier_for_type(&self, type_name: &str) -> Option<&str> {
        self.classifiers
            .iter()
            .find(|(_, t)| t == type_name)
            .map(|(c, _)| c.as_str())
    }

    /// Resolves a noun compound by the longest suffix that names a type, so
    /// "crackers box" is a crackers_box while "red box" is a box.
    pub fn resolve_type(&self, words: &[&str]) -> Option<&str> {
        for start in 0..words.len() {
            let phrase = words[start..].join(" ");
            if let Some(t) = self.types.iter().find(|t| t.phrases.contains(&phrase)) {
                return Some(&t.name);
            }
        }
        None
    }

    pub fn relation_for(&self, phrase: &str) -> Option<Relation> {
        self.relations
            .iter()
            .find(|(_, ps)| ps.iter().any(|p| p == phrase))
            .map(|(r, _)| *r)
    }

    /// Maps a verb (its first word, e.g. "pick" for "pick up") to a behavior.
    pub fn behavior_for(&self, verb: &str) -> Option<BehaviorType> {
        self.verbs
            .iter()
            .find(|(_, ps)| ps.iter().any(|p| p.split(' ').next() == Some(verb)))
            .map(|(b, _)| *b)
    }

    /// Part-of-speech lexicon implied by the declarations, as (tag, word).
    pub fn lexicon(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for t in &self.types {
            for p in &t.phrases {
                for w in p.split(' ') {
                    out.push(("NN", w.to_string()));
                }
            }
        }
        for c in &self.colors {
            out.push(("JJ", c.clone()));
        }
        for (_, ps) in &self.relations {
            for p in ps {
                let words: Vec<&str> = p.split(' ').collect();
                match words.as_slice() {
                    [w] => out.push(("IN", w.to_string())),
                    [adv, prep] => {
                        out.push(("RB", adv.to_string()));
                        out.push(("IN", prep.to_string()));
                    }
                    _ => {}
                }
            }
        }
        for (_, ps) in &self.verbs {
            for p in ps {
                let mut words = p.split(' ');
                if let Some(v) = words.next() {
                    out.push(("VB", v.to_string()));
                }
                if let Some(particle) = words.next() {
                    out.push((if particle == "to" { "TO" } else { "RP" }, particle.to_string()));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "
type ball: ball
type box: box
type crackers_box: crackers box   # compound
color red
relation inside: inside, in, from
relation left_of: left of
verb pickup: pick up, grab
verb navigate: go to
classifier ball_detector: ball
";

    #[test]
    fn compound_nouns_resolve_longest_suffix() {
        let v = Vocabulary::parse(TEXT).unwrap();
        assert_eq!(v.resolve_type(&["crackers", "box"]), Some("crackers_box"));
        assert_eq!(v.resolve_type(&["box"]), Some("box"));
        assert_eq!(v.resolve_type(&["ball", "box"]), Some("box"));
        assert_eq!(v.resolve_type(&["mug"]), None);
    }

    #[test]
    fn lexicon_tags_particles() {
        let v = Vocabulary::parse(TEXT).unwrap();
        let lex = v.lexicon();
        assert!(lex.contains(&("RP", "up".to_string())));
        assert!(lex.contains(&("TO", "to".to_string())));
        assert!(lex.contains(&("RB", "left".to_string())));
        assert!(lex.contains(&("IN", "of".to_string())));
        assert_eq!(v.behavior_for("pick"), Some(BehaviorType::Pickup));
        assert_eq!(v.relation_for("left of"), Some(Relation::LeftOf));
    }

    #[test]
    fn classifier_for_undeclared_type_is_rejected() {
        let err = Vocabulary::parse("type ball: ball\nclassifier x: fly").unwrap_err();
        assert!(matches!(err, SymbolError::UnknownSymbol(_)));
        let err = Vocabulary::parse("type ball ball").unwrap_err();
        assert!(matches!(err, SymbolError::Format { line: 1, .. }));
    }
}
