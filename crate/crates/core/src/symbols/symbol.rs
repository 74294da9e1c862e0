use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::relations::Relation;
use crate::semantic_map::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorType {
    Navigate,
    Retrieve,
    Pickup,
}

impl BehaviorType {
    pub const ALL: [BehaviorType; 3] = [BehaviorType::Navigate, BehaviorType::Retrieve, BehaviorType::Pickup];

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorType::Navigate => "navigate",
            BehaviorType::Retrieve => "retrieve",
            BehaviorType::Pickup => "pickup",
        }
    }

    /// Retrieve and pickup end with contact at the goal.
    pub fn needs_contact(self) -> bool {
        !matches!(self, BehaviorType::Navigate)
    }
}

impl fmt::Display for BehaviorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BehaviorType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BehaviorType::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Language-derived assertion about the environment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnnotationSymbol {
    /// At least one object of this type exists.
    Type(String),
    Relation {
        relation: Relation,
        subject: String,
        landmark: String,
    },
}

impl AnnotationSymbol {
    /// Object types the assertion mentions.
    pub fn types(&self) -> Vec<&str> {
        match self {
            AnnotationSymbol::Type(t) => vec![t],
            AnnotationSymbol::Relation { subject, landmark, .. } => vec![subject, landmark],
        }
    }
}

impl fmt::Display for AnnotationSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotationSymbol::Type(t) => write!(f, "type({t})"),
            AnnotationSymbol::Relation {
                relation,
                subject,
                landmark,
            } => write!(f, "{relation}({subject},{landmark})"),
        }
    }
}

impl FromStr for AnnotationSymbol {
    type Err = String;

    /// Parses `type(ball)` or `inside(ball,box)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| format!("missing '(' in {s:?}"))?;
        if !s.ends_with(')') {
            return Err(format!("missing ')' in {s:?}"));
        }
        let head = s[..open].trim();
        let args: Vec<&str> = s[open + 1..s.len() - 1].split(',').map(str::trim).collect();
        if args.iter().any(|a| a.is_empty()) {
            return Err(format!("empty argument in {s:?}"));
        }
        match (head, args.as_slice()) {
            ("type", [t]) => Ok(AnnotationSymbol::Type(t.to_string())),
            (rel, [a, b]) => Ok(AnnotationSymbol::Relation {
                relation: rel.parse().map_err(|r| format!("unknown relation {r:?}"))?,
                subject: a.to_string(),
                landmark: b.to_string(),
            }),
            _ => Err(format!("malformed annotation {s:?}")),
        }
    }
}

/// Candidate grounding for a phrase. Variant order defines the kind order
/// used when sorting candidate lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroundingSymbol {
    Object {
        node: NodeId,
        type_name: String,
        color: Option<String>,
    },
    Region {
        node: NodeId,
        type_name: String,
    },
    SpatialRelation {
        relation: Relation,
        landmark: NodeId,
    },
    Behavior {
        behavior: BehaviorType,
        goal: NodeId,
    },
    Detector {
        classifier: String,
    },
    Annotation(AnnotationSymbol),
}

impl GroundingSymbol {
    pub fn kind(&self) -> &'static str {
        match self {
            GroundingSymbol::Object { .. } => "Object",
            GroundingSymbol::Region { .. } => "Region",
            GroundingSymbol::SpatialRelation { .. } => "SpatialRelation",
            GroundingSymbol::Behavior { .. } => "Behavior",
            GroundingSymbol::Detector { .. } => "Detector",
            GroundingSymbol::Annotation(AnnotationSymbol::Type(_)) => "AnnType",
            GroundingSymbol::Annotation(AnnotationSymbol::Relation { .. }) => "AnnRelation",
        }
    }
}

impl fmt::Display for GroundingSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundingSymbol::Object { node, type_name, color } => match color {
                Some(c) => write!(f, "Object({c} {type_name}#{})", node.0),
                None => write!(f, "Object({type_name}#{})", node.0),
            },
            GroundingSymbol::Region { node, type_name } => write!(f, "Region({type_name}#{})", node.0),
            GroundingSymbol::SpatialRelation { relation, landmark } => {
                write!(f, "{relation}(#{})", landmark.0)
            }
            GroundingSymbol::Behavior { behavior, goal } => write!(f, "{behavior}(goal=#{})", goal.0),
            GroundingSymbol::Detector { classifier } => write!(f, "Detector({classifier})"),
            GroundingSymbol::Annotation(a) => write!(f, "{a}"),
        }
    }
}
