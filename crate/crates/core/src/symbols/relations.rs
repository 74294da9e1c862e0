use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::semantic_map::Node;

/// Objects within this distance of a landmark count as inside its footprint.
pub const INSIDE_RADIUS: f64 = 0.4;
pub const NEAR_RADIUS: f64 = 1.5;
/// Lateral relations need this much offset along y and at most `SIDE_RANGE`
/// separation.
pub const SIDE_OFFSET: f64 = 0.3;
pub const SIDE_RANGE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Inside,
    Near,
    LeftOf,
    RightOf,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Inside, Relation::Near, Relation::LeftOf, Relation::RightOf];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Inside => "inside",
            Relation::Near => "near",
            Relation::LeftOf => "left_of",
            Relation::RightOf => "right_of",
        }
    }

    /// Whether `subject` stands in this relation to `landmark` in a map.
    pub fn holds(self, subject: &Node, landmark: &Node) -> bool {
        if subject.id == landmark.id {
            return false;
        }
        let d = subject.pose.distance(landmark.pose);
        let dy = subject.pose.y - landmark.pose.y;
        match self {
            Relation::Inside => subject.container == Some(landmark.id) || d <= INSIDE_RADIUS,
            Relation::Near => d <= NEAR_RADIUS,
            Relation::LeftOf => dy >= SIDE_OFFSET && d <= SIDE_RANGE,
            Relation::RightOf => -dy >= SIDE_OFFSET && d <= SIDE_RANGE,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}
