//! Loaders for the files shipped under [`crate::data_dir`].

use std::path::PathBuf;

use crate::language::{generate_corpus, load_corpus, Corpus, Grammar, LanguageError};
use crate::perception::{PerceptionError, Registry};
use crate::symbols::{SymbolError, Vocabulary};

/// Seed and size of the shipped templated corpus.
pub const CORPUS_SEED: u64 = 7;
pub const CORPUS_SIZE: usize = 115;

pub fn path(name: &str) -> PathBuf {
    crate::data_dir().join(name)
}

pub fn vocabulary() -> Result<Vocabulary, SymbolError> {
    Vocabulary::load(&path("vocabulary.vocab"))
}

/// The instruction grammar extended with the vocabulary's lexicon.
pub fn grammar(vocab: &Vocabulary) -> Result<Grammar, LanguageError> {
    Ok(Grammar::load(&path("grammar.cfg"))?.with_lexicon(vocab.lexicon()))
}

pub fn corpus(vocab: &Vocabulary) -> Result<Corpus, LanguageError> {
    load_corpus(&path("corpus.txt"), vocab)
}

/// Regenerates the shipped corpus from its templates.
pub fn generated_corpus(vocab: &Vocabulary, grammar: &Grammar) -> Result<Corpus, LanguageError> {
    generate_corpus(vocab, grammar, CORPUS_SEED, CORPUS_SIZE)
}

/// `indoor` or `outdoor`.
pub fn registry(profile: &str) -> Result<Registry, PerceptionError> {
    Registry::load(&path(&format!("{profile}.reg")))
}
