use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::registry::{Mode, PerceptionConfig, Registry};
use crate::semantic_map::{Detection, Pose2};
use crate::simworld::{ground_truth_query, VisibleObject, WorldObject};

/// Sensor geometry and noise shared by live sensing and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub range: f64,
    pub fov: f64,
    pub inspection_radius: f64,
    /// Relative-pose noise (x, y, theta) applied to every raw observation.
    pub noise: [f64; 3],
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            range: 4.5,
            fov: std::f64::consts::FRAC_PI_2,
            inspection_radius: 1.0,
            noise: [0.05, 0.05, 0.3],
        }
    }
}

/// One stored observation: what was visible, before classifier filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub cycle: u64,
    /// Robot pose by odometry at capture time.
    pub odom_pose: Pose2,
    pub visible: Vec<VisibleObject>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseResult {
    pub detections: Vec<Detection>,
    /// Ground-truth ids behind each detection, parallel to `detections`.
    pub object_ids: Vec<String>,
    pub loop_cost: f64,
    pub frame: Frame,
}

fn filter_frame<R: Rng>(
    visible: &[VisibleObject],
    types: &BTreeSet<String>,
    config: &PerceptionConfig,
    registry: &Registry,
    rng: &mut R,
) -> (Vec<Detection>, Vec<String>) {
    let mut dets = Vec::new();
    let mut ids = Vec::new();
    for v in visible {
        let Some(spec) = registry
            .classifiers
            .iter()
            .find(|c| c.type_name == v.type_name && config.active.contains(&c.id) && types.contains(&c.type_name))
        else {
            continue;
        };
        if v.range > spec.range {
            continue;
        }
        if spec.miss_rate > 0.0 && rng.random::<f64>() < spec.miss_rate {
            continue;
        }
        dets.push(Detection {
            classifier: spec.id.clone(),
            type_name: v.type_name.clone(),
            relative: v.relative,
            range: v.range,
            color: v.color.clone(),
        });
        ids.push(v.id.clone());
    }
    (dets, ids)
}

/// Runs the active classifiers on the current view. Cost is exactly the
/// base frame cost plus the active classifiers' costs.
#[allow(clippy::too_many_arguments)]
pub fn sense<R: Rng>(
    objects: &[WorldObject],
    robot: Pose2,
    odom_pose: Pose2,
    cycle: u64,
    carried: &BTreeSet<String>,
    model: &SensorModel,
    config: &PerceptionConfig,
    registry: &Registry,
    rng: &mut R,
) -> SenseResult {
    let mut visible = ground_truth_query(objects, robot, model.range, model.fov, model.inspection_radius, carried);
    for v in &mut visible {
        let mut d = [v.relative.x, v.relative.y, v.relative.theta];
        for (k, s) in model.noise.iter().enumerate() {
            if *s > 0.0 {
                d[k] += Normal::new(0.0, *s).expect("finite sigma").sample(rng);
            }
        }
        v.relative = Pose2::new(d[0], d[1], crate::semantic_map::wrap_angle(d[2]));
    }
    let types = config.active_types(registry);
    let (detections, object_ids) = filter_frame(&visible, &types, config, registry, rng);
    SenseResult {
        detections,
        object_ids,
        loop_cost: config.loop_cost(registry),
        frame: Frame {
            cycle,
            odom_pose,
            visible,
        },
    }
}

/// Bounded FIFO of raw frames. A frame is stored only when its set of
/// visible objects differs from the last stored frame's.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLog {
    frames: VecDeque<Frame>,
    capacity: usize,
}

impl ObservationLog {
    pub fn new(capacity: usize) -> Self {
        Self {
            frames: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter()
    }

    /// Stores `frame` unless it shows the same objects as the previous one.
    /// Returns whether it was stored.
    pub fn record(&mut self, frame: Frame) -> bool {
        let ids = |f: &Frame| f.visible.iter().map(|v| v.id.clone()).collect::<BTreeSet<_>>();
        if frame.visible.is_empty() || self.frames.back().is_some_and(|last| ids(last) == ids(&frame)) {
            return false;
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        true
    }
}

/// Detections recovered from one stored frame, re-expressed relative to the
/// robot's current odometry pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayFrame {
    pub cycle: u64,
    pub detections: Vec<Detection>,
    pub object_ids: Vec<String>,
}

/// Re-filters every stored frame with the newly added classifiers. Costs
/// `frames × Σ cost(added)`; exhaustive mode never replays.
pub fn replay<R: Rng>(
    log: &ObservationLog,
    config: &PerceptionConfig,
    registry: &Registry,
    added: &BTreeSet<String>,
    current_odom: Pose2,
    rng: &mut R,
) -> (Vec<ReplayFrame>, f64) {
    if config.mode == Mode::Exhaustive || added.is_empty() {
        return (Vec::new(), 0.0);
    }
    let types: BTreeSet<String> = added
        .iter()
        .filter_map(|id| registry.get(id))
        .map(|c| c.type_name.clone())
        .collect();
    let cost = log.len() as f64 * registry.cost_of(added);
    let frames = log
        .frames()
        .map(|f| {
            let (mut detections, object_ids) = filter_frame(&f.visible, &types, config, registry, rng);
            for d in &mut detections {
                d.relative = current_odom.between(f.odom_pose.compose(d.relative));
            }
            ReplayFrame {
                cycle: f.cycle,
                detections,
                object_ids,
            }
        })
        .collect();
    (frames, cost)
}
