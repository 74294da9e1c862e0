use std::path::Path;

use crate::dcg::{train, DcgError, DcgModel, Head, TrainConfig};
use crate::language::Corpus;
use crate::symbols::Vocabulary;

/// The three trained grounding heads the executive needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub detector: DcgModel,
    pub annotation: DcgModel,
    pub behavior: DcgModel,
}

impl Models {
    pub fn train(corpus: &Corpus, vocab: &Vocabulary, config: &TrainConfig) -> Result<Self, DcgError> {
        Ok(Self {
            detector: train(corpus, Head::Perception, vocab, config)?.0,
            annotation: train(corpus, Head::Annotation, vocab, config)?.0,
            behavior: train(corpus, Head::Behavior, vocab, config)?.0,
        })
    }

    pub fn file_name(head: Head) -> String {
        format!("{head}.model")
    }

    pub fn save(&self, dir: &Path) -> Result<(), DcgError> {
        std::fs::create_dir_all(dir).map_err(|e| DcgError::Io(format!("{}: {e}", dir.display())))?;
        for m in [&self.detector, &self.annotation, &self.behavior] {
            m.save(&dir.join(Self::file_name(m.head)))?;
        }
        Ok(())
    }

    /// Loads `perception.model`, `annotation.model` and `behavior.model`.
    pub fn load(dir: &Path) -> Result<Self, DcgError> {
        let load = |head: Head| -> Result<DcgModel, DcgError> {
            let m = DcgModel::load(&dir.join(Self::file_name(head)))?;
            if m.head != head {
                return Err(DcgError::Malformed(format!("expected a {head} model, found {}", m.head)));
            }
            Ok(m)
        };
        Ok(Self {
            detector: load(Head::Perception)?,
            annotation: load(Head::Annotation)?,
            behavior: load(Head::Behavior)?,
        })
    }
}
