use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::grid::OccupancyGrid;
use crate::semantic_map::{in_cone, Pose2};

/// Ground-truth object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default)]
    pub color: Option<String>,
    pub pose: Pose2,
    #[serde(default)]
    pub container: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub grid: OccupancyGrid,
    pub objects: Vec<WorldObject>,
    pub robot_start: Pose2,
    pub sensor_range: f64,
}

/// An object the sensor could report from a given pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: String,
    pub type_name: String,
    pub color: Option<String>,
    /// Pose in the robot frame.
    pub relative: Pose2,
    pub range: f64,
}

/// Objects within range and the forward cone. Contained objects are
/// visible only from within `inspection_radius` of their container (and
/// then regardless of heading); `exclude` lists objects the robot carries.
pub fn ground_truth_query(
    objects: &[WorldObject],
    pose: Pose2,
    range: f64,
    fov: f64,
    inspection_radius: f64,
    exclude: &BTreeSet<String>,
) -> Vec<VisibleObject> {
    let position = |id: &str| objects.iter().find(|o| o.id == id).map(|o| o.pose);
    objects
        .iter()
        .filter(|o| !exclude.contains(&o.id))
        .filter(|o| match o.container.as_deref().and_then(position) {
            Some(c) => pose.distance(c) <= inspection_radius,
            None => in_cone(pose, o.pose, range, fov),
        })
        .map(|o| VisibleObject {
            id: o.id.clone(),
            type_name: o.type_name.clone(),
            color: o.color.clone(),
            relative: pose.between(o.pose),
            range: pose.distance(o.pose),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objects() -> Vec<WorldObject> {
        vec![
            WorldObject {
                id: "box".into(),
                type_name: "box".into(),
                color: None,
                pose: Pose2::new(3.0, 0.0, 0.0),
                container: None,
            },
            WorldObject {
                id: "ball".into(),
                type_name: "ball".into(),
                color: Some("red".into()),
                pose: Pose2::new(3.1, 0.0, 0.0),
                container: Some("box".into()),
            },
        ]
    }

    #[test]
    fn contents_hidden_until_inspection() {
        let fov = std::f64::consts::FRAC_PI_2;
        let none = BTreeSet::new();
        let far = ground_truth_query(&objects(), Pose2::origin(), 4.5, fov, 1.0, &none);
        assert_eq!(far.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(), ["box"]);
        // Facing away, but close enough to look inside.
        let near = ground_truth_query(&objects(), Pose2::new(2.2, 0.0, std::f64::consts::PI), 4.5, fov, 1.0, &none);
        assert_eq!(near.iter().map(|v| v.id.as_str()).collect::<Vec<_>>(), ["ball"]);
        assert!(ground_truth_query(&[], Pose2::origin(), 4.5, fov, 1.0, &none).is_empty());
    }
}
