//! Instructions as constituent parse trees, the shipped grammar and the
//! annotated training corpus.

mod corpus;
mod grammar;
mod tree;

pub use corpus::{
    annotate, generate_corpus, load_corpus, parse_corpus, BehaviorTemplate, Corpus, CorpusEntry, Instruction,
};
pub use grammar::{tokenize, Grammar, Parse};
pub use tree::ParseTree;

use crate::symbols::{Relation, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LanguageError {
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("no parse for {0:?}")]
    NoParse(String),
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("grammar line {line}: {message}")]
    GrammarFormat { line: usize, message: String },
    #[error("corpus line {line}: {message}")]
    FormatError { line: usize, message: String },
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("{0}")]
    Io(String),
}

/// Parses an instruction with the given grammar.
pub fn parse(text: &str, grammar: &Grammar) -> Result<ParseTree, LanguageError> {
    grammar.parse(text).map(|p| p.tree)
}

/// What a noun phrase says about its referent.
#[derive(Debug, Clone, PartialEq)]
pub struct NounPhrase<'a> {
    pub type_name: &'a str,
    pub color: Option<&'a str>,
    /// Relation introduced by a prepositional modifier, with its object.
    pub relation: Option<(Relation, &'a ParseTree)>,
}

/// Reads the head type, color and relational modifier of an NP.
pub fn noun_phrase<'a>(np: &'a ParseTree, vocab: &'a Vocabulary) -> Option<NounPhrase<'a>> {
    let nouns: Vec<&str> = np.children_labeled("NN").map(|c| c.text.as_str()).collect();
    let type_name = vocab.resolve_type(&nouns)?;
    let color = np
        .children_labeled("JJ")
        .map(|c| c.text.as_str())
        .find(|w| vocab.is_color(w));
    let relation = np.child("PP").and_then(|pp| prepositional(pp, vocab));
    Some(NounPhrase {
        type_name,
        color,
        relation,
    })
}

/// Relation and object NP of a PP such as "left of the box".
pub fn prepositional<'a>(pp: &'a ParseTree, vocab: &Vocabulary) -> Option<(Relation, &'a ParseTree)> {
    let words: Vec<&str> = pp
        .children
        .iter()
        .filter(|c| c.is_preterminal())
        .map(|c| c.text.as_str())
        .collect();
    let relation = vocab.relation_for(&words.join(" "))?;
    Some((relation, pp.child("NP")?))
}
