use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;

use super::infer::sigmoid;
use super::DcgError;

const MAGIC: &str = "dcg-model";
const VERSION: u32 = 1;

/// Which grounding problem a model solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Head {
    /// Classifier selection.
    Perception,
    Annotation,
    Behavior,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Perception, Head::Annotation, Head::Behavior];

    pub fn as_str(self) -> &'static str {
        match self {
            Head::Perception => "perception",
            Head::Annotation => "annotation",
            Head::Behavior => "behavior",
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Head {
    type Err = DcgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "perception" | "detector" => Ok(Head::Perception),
            "annotation" => Ok(Head::Annotation),
            "behavior" => Ok(Head::Behavior),
            _ => Err(DcgError::Malformed(format!("unknown head {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    /// Final regularized objective (mean log-likelihood per annotated
    /// assignment).
    pub objective: f64,
}

/// Log-linear factor weights keyed by feature name. Unknown features weigh
/// zero, so an empty model gives probability 0.5 everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct DcgModel {
    pub head: Head,
    pub extractor: String,
    pub weights: IndexMap<String, f64>,
    pub meta: TrainingMeta,
}

impl DcgModel {
    pub fn empty(head: Head) -> Self {
        Self {
            head,
            extractor: super::features::EXTRACTOR_ID.to_string(),
            weights: IndexMap::new(),
            meta: TrainingMeta {
                epochs: 0,
                learning_rate: 0.0,
                l2: 0.0,
                seed: 0,
                objective: f64::NAN,
            },
        }
    }

    pub fn weight(&self, feature: &str) -> f64 {
        self.weights.get(feature).copied().unwrap_or(0.0)
    }

    pub fn logit<S: AsRef<str>>(&self, features: &[S]) -> f64 {
        features.iter().map(|f| self.weight(f.as_ref())).sum()
    }

    /// `p(phi | features)` of a logistic factor.
    pub fn prob<S: AsRef<str>>(&self, phi: bool, features: &[S]) -> f64 {
        let p = sigmoid(self.logit(features));
        if phi {
            p
        } else {
            1.0 - p
        }
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        writeln!(out, "{MAGIC} v{VERSION}").unwrap();
        writeln!(out, "head {}", self.head).unwrap();
        writeln!(out, "extractor {}", self.extractor).unwrap();
        writeln!(out, "epochs {}", m.epochs).unwrap();
        writeln!(out, "learning_rate {:?}", m.learning_rate).unwrap();
        writeln!(out, "l2 {:?}", m.l2).unwrap();
        writeln!(out, "seed {}", m.seed).unwrap();
        writeln!(out, "objective {:?}", m.objective).unwrap();
        writeln!(out, "features {}", self.weights.len()).unwrap();
        for (name, w) in &self.weights {
            // `{:?}` prints the shortest string that round-trips.
            writeln!(out, "{name}\t{w:?}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DcgError> {
        let bad = |line: usize, m: &str| DcgError::Format {
            line,
            message: m.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (n, first) = lines.next().ok_or_else(|| bad(1, "empty model file"))?;
        if first.trim() != format!("{MAGIC} v{VERSION}") {
            return Err(bad(n, "unsupported model header"));
        }
        let mut header = |key: &str| -> Result<(usize, String), DcgError> {
            let (n, l) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            let rest = l
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(n, &format!("expected `{key}`")))?;
            Ok((n, rest.trim().to_string()))
        };
        let num = |(n, s): (usize, String)| s.parse::<f64>().map_err(|_| bad(n, "bad number"));
        let int = |(n, s): (usize, String)| s.parse::<u64>().map_err(|_| bad(n, "bad integer"));
        let head: Head = header("head")?.1.parse()?;
        let extractor = header("extractor")?.1;
        let epochs = int(header("epochs")?)? as usize;
        let learning_rate = num(header("learning_rate")?)?;
        let l2 = num(header("l2")?)?;
        let seed = int(header("seed")?)?;
        let objective = num(header("objective")?)?;
        let count = int(header("features")?)? as usize;
        let mut weights = IndexMap::with_capacity(count);
        for (n, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let (name, w) = l.split_once('\t').ok_or_else(|| bad(n, "expected `name<TAB>weight`"))?;
            let w: f64 = w.trim().parse().map_err(|_| bad(n, "bad weight"))?;
            if !w.is_finite() {
                return Err(bad(n, "weight is not finite"));
            }
            if weights.insert(name.to_string(), w).is_some() {
                return Err(bad(n, "duplicate feature"));
            }
        }
        if weights.len() != count {
            return Err(bad(0, "feature count does not match header"));
        }
        Ok(Self {
            head,
            extractor,
            weights,
            meta: TrainingMeta {
                epochs,
                learning_rate,
                l2,
                seed,
                objective,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DcgError> {
        std::fs::write(path, self.to_text()).map_err(|e| DcgError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, DcgError> {
        let text = std::fs::read_to_string(path).map_err(|e| DcgError::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip_is_exact() {
        let mut m = DcgModel::empty(Head::Behavior);
        m.weights.insert("b|x".into(), 0.1 + 0.2);
        m.weights.insert("a|y".into(), -1e-300);
        m.meta.objective = -0.25;
        let back = DcgModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.weights.get_index(0).unwrap().0, "b|x");
    }

    #[test]
    fn logistic_values() {
        let mut m = DcgModel::empty(Head::Perception);
        assert_eq!(m.prob(true, &["anything"]), 0.5);
        m.weights.insert("f".into(), 10.0);
        assert!((m.prob(true, &["f"]) - 1.0 / (1.0 + (-10f64).exp())).abs() < 1e-15);
        m.weights["f"] = -10.0;
        assert!((m.prob(false, &["f"]) - 1.0 / (1.0 + (-10f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(DcgModel::from_text("nope").is_err());
        let mut text = DcgModel::empty(Head::Annotation).to_text();
        text = text.replace("features 0", "features 1");
        assert!(DcgModel::from_text(&text).is_err());
    }
}
