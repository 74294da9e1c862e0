use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::env::{EnvironmentSpec, WorldObject};
use super::grid::OccupancyGrid;
use super::SimError;
use crate::semantic_map::Pose2;
use crate::symbols::INSIDE_RADIUS;

/// When a scripted instruction fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    AtCycle(u64),
    /// Fires once task `k` (1-based) has completed.
    AfterTask(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub trigger: Trigger,
    /// Instruction text, parsed with the shipped grammar.
    #[serde(default)]
    pub text: Option<String>,
    /// Pre-built bracketed tree; bypasses the grammar when present.
    #[serde(default)]
    pub tree: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub events: Vec<ScriptEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GridSpec {
    width: f64,
    height: f64,
    #[serde(default = "default_resolution")]
    resolution: f64,
    /// Axis-aligned obstacle rectangles `[x0, y0, x1, y1]` in meters.
    #[serde(default)]
    walls: Vec<[f64; 4]>,
    /// Border walls one cell thick.
    #[serde(default = "default_true")]
    border: bool,
}

fn default_resolution() -> f64 {
    0.25
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RobotSpec {
    pose: Pose2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioFile {
    name: String,
    grid: GridSpec,
    objects: Vec<WorldObject>,
    robot: RobotSpec,
    script: Vec<ScriptEvent>,
    #[serde(default)]
    config: serde_json::Value,
}

/// A validated scenario: environment, instruction script and run-config
/// overrides (merged over the executive's defaults by the caller).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub env: EnvironmentSpec,
    pub script: ScenarioScript,
    pub config: serde_json::Value,
    /// Directory the scenario was loaded from, for relative data paths.
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| SimError::Format(e.to_string()))?;
        let g = &file.grid;
        if !(g.resolution > 0.0 && g.width > 0.0 && g.height > 0.0) {
            return Err(SimError::Format("grid dimensions must be positive".into()));
        }
        let cols = (g.width / g.resolution).round() as usize;
        let rows = (g.height / g.resolution).round() as usize;
        let mut grid = OccupancyGrid::new(cols, rows, g.resolution);
        if g.border {
            let r = g.resolution;
            grid.fill_rect(0.0, 0.0, g.width, r * 0.5);
            grid.fill_rect(0.0, g.height - r * 0.5, g.width, g.height);
            grid.fill_rect(0.0, 0.0, r * 0.5, g.height);
            grid.fill_rect(g.width - r * 0.5, 0.0, g.width, g.height);
        }
        for w in &g.walls {
            grid.fill_rect(w[0], w[1], w[2], w[3]);
        }
        let range = file
            .config
            .pointer("/sensor/range")
            .and_then(serde_json::Value::as_f64)
            .unwrap_or(4.5);
        let scenario = Scenario {
            name: file.name,
            env: EnvironmentSpec {
                grid,
                objects: file.objects,
                robot_start: file.robot.pose,
                sensor_range: range,
            },
            script: ScenarioScript { events: file.script },
            config: file.config,
            base_dir: None,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvariantViolation(m));
        let env = &self.env;
        let start = env.robot_start;
        if !env.grid.is_free(env.grid.world_to_cell(start.x, start.y)) {
            return bad(format!("robot start ({:.2}, {:.2}) is not free", start.x, start.y));
        }
        let mut ids = BTreeSet::new();
        for o in &env.objects {
            if !ids.insert(o.id.as_str()) {
                return bad(format!("duplicate object id {}", o.id));
            }
            if !env.grid.in_bounds(env.grid.world_to_cell(o.pose.x, o.pose.y)) {
                return bad(format!("object {} lies outside the grid", o.id));
            }
        }
        for o in &env.objects {
            if let Some(c) = &o.container {
                let Some(container) = env.objects.iter().find(|x| &x.id == c) else {
                    return bad(format!("{} is inside unknown container {c}", o.id));
                };
                if container.container.is_some() {
                    return bad(format!("container {c} is itself contained"));
                }
                if container.pose.distance(o.pose) > INSIDE_RADIUS {
                    return bad(format!("{} lies outside the footprint of {c}", o.id));
                }
            }
        }
        if self.script.events.is_empty() {
            return bad("script has no events".into());
        }
        let mut last_cycle = 0;
        let mut last_task = 0;
        for (k, e) in self.script.events.iter().enumerate() {
            if e.text.is_none() && e.tree.is_none() {
                return bad(format!("event {} has neither text nor tree", k + 1));
            }
            match e.trigger {
                Trigger::AtCycle(c) => {
                    if c < last_cycle {
                        return bad("cycle triggers must be non-decreasing".into());
                    }
                    last_cycle = c;
                }
                Trigger::AfterTask(t) => {
                    if t < last_task || t == 0 || t > k {
                        return bad(format!("event {} waits for task {t}, which cannot precede it", k + 1));
                    }
                    last_task = t;
                }
            }
        }
        Ok(())
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    let mut s = Scenario::from_json(&text)?;
    s.base_dir = path.parent().map(Path::to_path_buf);
    Ok(s)
}
