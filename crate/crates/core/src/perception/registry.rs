use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PerceptionError;

/// A simulated object classifier and its runtime cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub id: String,
    pub type_name: String,
    /// Simulated seconds per frame.
    pub cost: f64,
    /// Maximum detection range in meters.
    pub range: f64,
    pub miss_rate: f64,
}

/// Registered classifiers plus the fixed per-frame cost of the pipeline.
///
/// Text format: `base <seconds>` once, then one `id type cost range miss`
/// record per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub base_cost: f64,
    pub classifiers: Vec<ClassifierSpec>,
}

impl Registry {
    pub fn parse(text: &str) -> Result<Self, PerceptionError> {
        let mut base_cost = None;
        let mut classifiers: Vec<ClassifierSpec> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| PerceptionError::Format {
                line: i + 1,
                message: m.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number {s:?}")));
            match fields.as_slice() {
                ["base", c] => base_cost = Some(num(c)?),
                [id, t, cost, range, miss] => {
                    let spec = ClassifierSpec {
                        id: id.to_string(),
                        type_name: t.to_string(),
                        cost: num(cost)?,
                        range: num(range)?,
                        miss_rate: num(miss)?,
                    };
                    if !(spec.cost > 0.0 && spec.range > 0.0 && (0.0..1.0).contains(&spec.miss_rate)) {
                        return Err(err("cost and range must be positive and miss rate in [0, 1)"));
                    }
                    if classifiers.iter().any(|c| c.id == spec.id) {
                        return Err(err("duplicate classifier id"));
                    }
                    classifiers.push(spec);
                }
                _ => return Err(err("expected `id type cost range miss`")),
            }
        }
        Ok(Self {
            base_cost: base_cost.unwrap_or(0.10),
            classifiers,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PerceptionError> {
        let text = std::fs::read_to_string(path).map_err(|e| PerceptionError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, id: &str) -> Option<&ClassifierSpec> {
        self.classifiers.iter().find(|c| c.id == id)
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.classifiers.iter().map(|c| c.id.clone()).collect()
    }

    /// Same registry with every miss rate replaced (0 for deterministic
    /// test profiles).
    pub fn with_miss_rate(mut self, miss: f64) -> Self {
        for c in &mut self.classifiers {
            c.miss_rate = miss;
        }
        self
    }

    /// Sum of costs of the given classifiers.
    pub fn cost_of<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> f64 {
        ids.into_iter().filter_map(|id| self.get(id)).map(|c| c.cost).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "AP")]
    Adaptive,
    #[serde(rename = "EP")]
    Exhaustive,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Adaptive => "AP",
            Mode::Exhaustive => "EP",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ap" | "adaptive" => Ok(Mode::Adaptive),
            "ep" | "exhaustive" => Ok(Mode::Exhaustive),
            _ => Err(format!("unknown perception mode {s:?} (expected AP or EP)")),
        }
    }
}

/// Which classifiers run each frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub mode: Mode,
    pub active: BTreeSet<String>,
    pub base_cost: f64,
}

impl PerceptionConfig {
    /// Exhaustive starts with everything on; adaptive starts with nothing.
    pub fn new(mode: Mode, registry: &Registry) -> Self {
        let active = match mode {
            Mode::Exhaustive => registry.ids(),
            Mode::Adaptive => BTreeSet::new(),
        };
        Self {
            mode,
            active,
            base_cost: registry.base_cost,
        }
    }

    pub fn loop_cost(&self, registry: &Registry) -> f64 {
        self.base_cost + registry.cost_of(&self.active)
    }

    pub fn active_types(&self, registry: &Registry) -> BTreeSet<String> {
        self.active
            .iter()
            .filter_map(|id| registry.get(id))
            .map(|c| c.type_name.clone())
            .collect()
    }
}

/// Adaptive mode adopts `p_star` as the active set and returns the
/// classifiers it newly switched on; exhaustive mode is left unchanged.
pub fn configure(
    config: &mut PerceptionConfig,
    registry: &Registry,
    p_star: &BTreeSet<String>,
) -> Result<BTreeSet<String>, PerceptionError> {
    if let Some(id) = p_star.iter().find(|id| registry.get(id).is_none()) {
        return Err(PerceptionError::UnknownClassifier(id.clone()));
    }
    if config.mode == Mode::Exhaustive {
        return Ok(BTreeSet::new());
    }
    let added = p_star.difference(&config.active).cloned().collect();
    config.active = p_star.clone();
    Ok(added)
}
