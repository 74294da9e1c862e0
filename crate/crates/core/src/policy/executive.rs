use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::models::Models;
use super::plan::plan_path;
use super::select::{select_behavior, Behavior, PSI_SCALE};
use super::PolicyError;
use crate::dcg::{infer_annotations, infer_behavior, infer_detectors, Beam};
use crate::language::{self, Grammar, ParseTree};
use crate::perception::{configure, replay, sense, Mode, ObservationLog, PerceptionConfig, Registry, SensorModel};
use crate::rng::{purpose, stream_rng};
use crate::semantic_map::{
    apply_annotations, predict, reweight, update_observations, AnnotationContext, CoverageGrid, FilterConfig,
    ParticleSet, Pose2, SensorContext, UpdateReport,
};
use crate::simworld::{Cell, Scenario, Trigger, WorldObject};
use crate::symbols::{AnnotationSymbol, BehaviorType, Vocabulary};

/// Everything tunable about a run. Scenario files and `--config` overrides
/// are merged over these defaults as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub filter: FilterConfig,
    pub sensor: SensorModel,
    /// Shipped registry profile (`indoor`, `outdoor`).
    pub registry: String,
    /// Replaces every classifier's miss rate when set.
    pub miss_rate: Option<f64>,
    /// Meters advanced per cycle.
    pub step: f64,
    /// Meters per simulated second.
    pub speed: f64,
    pub goal_tolerance: f64,
    pub stuck_cycles: u64,
    pub psi_scale: f64,
    pub beam: usize,
    /// Simulated seconds per behavior inference, plus a per-variable term.
    pub inference_base_cost: f64,
    pub inference_variable_cost: f64,
    pub log_capacity: usize,
    pub cycle_cap: u64,
    /// Radians turned per cycle while looking around.
    pub turn_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            sensor: SensorModel::default(),
            registry: "indoor".to_string(),
            miss_rate: None,
            step: 0.3,
            speed: 1.0,
            goal_tolerance: 0.5,
            stuck_cycles: 50,
            psi_scale: PSI_SCALE,
            beam: 8,
            inference_base_cost: 0.015,
            inference_variable_cost: 1e-4,
            log_capacity: 64,
            cycle_cap: 2000,
            turn_step: FRAC_PI_4,
        }
    }
}

fn merge(base: &mut serde_json::Value, over: &serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, o) => *b = o.clone(),
    }
}

impl RunConfig {
    /// Defaults, then each layer in order.
    pub fn layered(layers: &[&serde_json::Value]) -> Result<Self, PolicyError> {
        let mut v = serde_json::to_value(Self::default()).expect("config serializes");
        for l in layers {
            if !l.is_null() {
                merge(&mut v, l);
            }
        }
        serde_json::from_value(v).map_err(|e| PolicyError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    /// 1-based.
    pub index: usize,
    pub text: String,
    pub issued_cycle: u64,
    pub issued_time: f64,
    pub completed_cycle: Option<u64>,
    /// Simulated seconds from issue to completion.
    pub duration: Option<f64>,
    pub behavior: Option<BehaviorType>,
    /// Ground-truth object the task ended on.
    pub object: Option<String>,
}

/// Simulated time and counters accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Accounting {
    pub sim_time: f64,
    pub perception_time: f64,
    pub inference_time: f64,
    pub inference_worlds: u64,
    pub replay_time: f64,
    pub motion_time: f64,
    pub detected: BTreeSet<String>,
    /// Containers the robot came within inspection range of, in order.
    pub inspections: Vec<(u64, String)>,
    pub stuck_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: u64,
    pub pose: Pose2,
    pub sim_time: f64,
    pub detections: usize,
    pub weight_sum_after_reweight: f64,
    pub ess: f64,
    pub resampled: bool,
    pub weight_sum_after_resample: f64,
    pub inferred: bool,
    pub selected: Option<Behavior>,
    pub digest: u64,
}

struct ActiveTask {
    index: usize,
    tree: ParseTree,
    annotations: Vec<(AnnotationSymbol, f64)>,
    /// Head type of the object phrase, for exploration.
    goal_type: Option<String>,
}

struct Progress {
    goal: Pose2,
    best: f64,
    since: u64,
}

/// One simulated robot running the full pipeline on a scenario.
pub struct Executive {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub mode: Mode,
    pub seed: u64,
    vocab: Vocabulary,
    grammar: Grammar,
    models: Arc<Models>,
    registry: Registry,
    pub perception: PerceptionConfig,
    pub set: ParticleSet,
    coverage: CoverageGrid,
    log: ObservationLog,
    pub cycle: u64,
    /// True pose; odometry is exact, so this is also the odometry pose.
    pub pose: Pose2,
    pub objects: Vec<WorldObject>,
    pub carried: BTreeSet<String>,
    task: Option<ActiveTask>,
    next_event: usize,
    pub tasks: Vec<TaskRecord>,
    behaviors: Vec<Behavior>,
    pub selected: Option<Behavior>,
    waypoints: VecDeque<Pose2>,
    progress: Option<Progress>,
    blacklist: Vec<Pose2>,
    dirty: bool,
    pub acct: Accounting,
    pub trace: Vec<CycleRecord>,
    pub path: Vec<Pose2>,
}

impl Executive {
    pub fn new(
        scenario: Scenario,
        config: RunConfig,
        mode: Mode,
        seed: u64,
        vocab: Vocabulary,
        grammar: Grammar,
        models: Arc<Models>,
    ) -> Result<Self, PolicyError> {
        let mut registry = crate::assets::registry(&config.registry)?;
        if let Some(m) = config.miss_rate {
            registry = registry.with_miss_rate(m);
        }
        let perception = PerceptionConfig::new(mode, &registry);
        let start = scenario.env.robot_start;
        let set = ParticleSet::new(vocab.type_names().clone(), start, config.filter.clone())?;
        let coverage = CoverageGrid::for_grid(&scenario.env.grid);
        let log = ObservationLog::new(config.log_capacity);
        let objects = scenario.env.objects.clone();
        Ok(Self {
            config,
            scenario,
            mode,
            seed,
            vocab,
            grammar,
            models,
            registry,
            perception,
            set,
            coverage,
            log,
            cycle: 0,
            pose: start,
            objects,
            carried: BTreeSet::new(),
            task: None,
            next_event: 0,
            tasks: Vec::new(),
            behaviors: Vec::new(),
            selected: None,
            waypoints: VecDeque::new(),
            progress: None,
            blacklist: Vec::new(),
            dirty: false,
            acct: Accounting::default(),
            trace: Vec::new(),
            path: vec![start],
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn log(&self) -> &ObservationLog {
        &self.log
    }

    pub fn completed_tasks(&self) -> usize {
        self.tasks.iter().filter(|t| t.completed_cycle.is_some()).count()
    }

    pub fn has_active_task(&self) -> bool {
        self.task.is_some()
    }

    /// Every scripted event has fired and every issued task is complete.
    pub fn is_finished(&self) -> bool {
        self.next_event >= self.scenario.script.events.len() && self.task.is_none()
    }

    /// Parses and grounds a new instruction, reconfigures perception and
    /// replays stored observations for any newly enabled classifiers. The
    /// new instruction replaces an unfinished one.
    pub fn issue(&mut self, text: &str) -> Result<(), PolicyError> {
        let tree = language::parse(text, &self.grammar)?;
        self.issue_tree(text, tree)
    }

    pub fn issue_tree(&mut self, text: &str, tree: ParseTree) -> Result<(), PolicyError> {
        let beam = Beam::Width(self.config.beam);
        let p_star = infer_detectors(&self.models.detector, &tree, &self.vocab, beam)?;
        let annotations = infer_annotations(&self.models.annotation, &tree, &self.vocab, beam)?;
        let added = configure(&mut self.perception, &self.registry, &p_star)?;
        let mut rng = stream_rng(self.seed, &[purpose::REPLAY, self.cycle]);
        let (frames, cost) = replay(&self.log, &self.perception, &self.registry, &added, self.pose, &mut rng);
        for f in &frames {
            if f.detections.is_empty() {
                continue;
            }
            self.acct.detected.extend(f.object_ids.iter().cloned());
            let config = &self.set.config;
            let reports: Vec<Result<UpdateReport, _>> = self
                .set
                .particles
                .par_iter_mut()
                .map(|p| update_observations(p, &f.detections, config))
                .collect();
            for (p, r) in self.set.particles.iter_mut().zip(reports) {
                p.log_weight += r?.log_likelihood();
            }
            self.set.normalize()?;
        }
        self.acct.replay_time += cost;
        self.acct.sim_time += cost;
        let goal_type = tree
            .child("NP")
            .and_then(|np| language::noun_phrase(np, &self.vocab))
            .map(|np| np.type_name.to_string());
        let index = self.tasks.len() + 1;
        self.tasks.push(TaskRecord {
            index,
            text: text.to_string(),
            issued_cycle: self.cycle,
            issued_time: self.acct.sim_time - cost,
            completed_cycle: None,
            duration: None,
            behavior: None,
            object: None,
        });
        self.task = Some(ActiveTask {
            index,
            tree,
            annotations,
            goal_type,
        });
        self.selected = None;
        self.waypoints.clear();
        self.progress = None;
        self.blacklist.clear();
        self.dirty = true;
        Ok(())
    }

    fn fire_events(&mut self) -> Result<(), PolicyError> {
        while let Some(e) = self.scenario.script.events.get(self.next_event).cloned() {
            let due = match e.trigger {
                Trigger::AtCycle(c) => c <= self.cycle,
                Trigger::AfterTask(k) => self.completed_tasks() >= k && self.task.is_none(),
            };
            if !due {
                break;
            }
            self.next_event += 1;
            match (&e.tree, &e.text) {
                (Some(t), text) => {
                    let tree = ParseTree::from_bracketed(t)?;
                    let text = text.clone().unwrap_or_else(|| tree.text.clone());
                    self.issue_tree(&text, tree)?;
                }
                (None, Some(text)) => self.issue(text)?,
                (None, None) => unreachable!("validated scenario"),
            }
        }
        Ok(())
    }

    /// Moves along the current waypoints, or turns in place when there are
    /// none. Returns the distance travelled.
    fn advance(&mut self) -> f64 {
        let mut left = self.config.step;
        let mut moved = 0.0;
        let mut pose = self.pose;
        while left > 1e-12 {
            let Some(&w) = self.waypoints.front() else { break };
            let d = pose.distance(w);
            let heading = if d > 1e-9 { (w.y - pose.y).atan2(w.x - pose.x) } else { pose.theta };
            if d <= left {
                pose = Pose2::new(w.x, w.y, heading);
                self.waypoints.pop_front();
                left -= d;
                moved += d;
            } else {
                let f = left / d;
                pose = Pose2::new(pose.x + f * (w.x - pose.x), pose.y + f * (w.y - pose.y), heading);
                moved += left;
                left = 0.0;
            }
        }
        if moved < 1e-12 {
            pose.theta += self.config.turn_step;
        }
        self.pose = Pose2::new(pose.x, pose.y, crate::semantic_map::wrap_angle(pose.theta));
        moved
    }

    fn goal_type_index(&self) -> Option<usize> {
        let t = self.task.as_ref()?.goal_type.as_deref()?;
        self.vocab.type_names().iter().position(|n| n == t)
    }

    /// Nearest reachable free cell not yet searched for the task's goal
    /// type, at least one sensor step away.
    fn exploration_target(&self) -> Option<Cell> {
        let ti = self.goal_type_index()?;
        let grid = &self.scenario.env.grid;
        let start = grid.nearest_free(grid.world_to_cell(self.pose.x, self.pose.y))?;
        let mut seen = vec![false; grid.len()];
        let mut queue = VecDeque::from([start]);
        seen[grid.index(start)?] = true;
        while let Some(c) = queue.pop_front() {
            let (x, y) = grid.cell_center(c);
            if !self.coverage.is_covered(c, ti) && self.pose.distance(Pose2::new(x, y, 0.0)) >= self.config.step {
                return Some(c);
            }
            for (n, _) in grid.neighbors(c) {
                let i = grid.index(n).expect("in bounds");
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    fn route_to(&mut self, goal: Pose2) -> bool {
        let grid = &self.scenario.env.grid;
        let from = grid.nearest_free(grid.world_to_cell(self.pose.x, self.pose.y));
        let to = grid.nearest_free(grid.world_to_cell(goal.x, goal.y));
        let (Some(from), Some(to)) = (from, to) else { return false };
        match plan_path(grid, from, to) {
            Ok(t) => {
                self.waypoints = t.poses.into_iter().collect();
                self.waypoints.push_back(Pose2::new(goal.x, goal.y, 0.0));
                true
            }
            Err(_) => false,
        }
    }

    fn blacklisted(&self, p: Pose2) -> bool {
        self.blacklist.iter().any(|b| b.distance(p) <= self.config.goal_tolerance)
    }

    fn infer_behaviors(&mut self) -> f64 {
        let Some(task) = &self.task else {
            self.behaviors.clear();
            return 0.0;
        };
        let beam = Beam::Width(self.config.beam);
        let model = &self.models.behavior;
        let vocab = &self.vocab;
        let results: Vec<(Option<Behavior>, usize)> = self
            .set
            .particles
            .par_iter()
            .enumerate()
            .map(|(i, p)| match infer_behavior(model, &task.tree, &p.graph, vocab, beam) {
                Ok(g) => {
                    let goal = p.graph.node(g.goal).expect("grounded goal exists").pose;
                    let b = Behavior {
                        kind: g.behavior,
                        goal,
                        goal_node: g.goal,
                        particle: i,
                        likelihood: g.likelihood,
                    };
                    (Some(b), g.variables)
                }
                Err(_) => (None, 0),
            })
            .collect();
        let cost: f64 = results
            .iter()
            .map(|(_, v)| self.config.inference_base_cost + self.config.inference_variable_cost * *v as f64)
            .sum();
        self.acct.inference_time += cost;
        self.acct.inference_worlds += results.len() as u64;
        self.behaviors = results.into_iter().filter_map(|(b, _)| b).collect();
        cost
    }

    fn reselect(&mut self) {
        let candidates: Vec<Behavior> = self
            .behaviors
            .iter()
            .filter(|b| !self.blacklisted(b.goal))
            .cloned()
            .collect();
        let weights = self.set.weights();
        let chosen = select_behavior(&candidates, &weights, self.pose, self.config.psi_scale).ok().cloned();
        let changed = match (&chosen, &self.selected) {
            (Some(a), Some(b)) => a.goal.distance(b.goal) > 1e-9 || a.kind != b.kind,
            (None, None) => false,
            _ => true,
        };
        self.selected = chosen;
        if changed || self.waypoints.is_empty() {
            self.waypoints.clear();
            match self.selected.clone() {
                Some(b) => {
                    if !self.route_to(b.goal) {
                        self.blacklist.push(b.goal);
                        self.selected = None;
                    }
                }
                None => {
                    if let Some(c) = self.exploration_target() {
                        let (x, y) = self.scenario.env.grid.cell_center(c);
                        self.route_to(Pose2::new(x, y, 0.0));
                    }
                }
            }
            if changed {
                self.progress = None;
            }
        }
    }

    /// Ground-truth object within reach that matches the goal node's type.
    fn contact(&self, b: &Behavior) -> Option<String> {
        let graph = &self.set.particles.get(b.particle)?.graph;
        let t = graph.map_type(b.goal_node)?;
        let r = self.config.sensor.inspection_radius;
        self.objects
            .iter()
            .filter(|o| o.type_name == t && !self.carried.contains(&o.id))
            .map(|o| (self.pose.distance(o.pose), o))
            .filter(|(d, _)| *d <= r)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, o)| o.id.clone())
    }

    fn check_completion(&mut self) -> bool {
        let Some(b) = self.selected.clone() else { return false };
        let Some(p) = self.set.particles.get(b.particle) else { return false };
        let Some(node) = p.graph.node(b.goal_node) else { return false };
        if node.hypothesized || self.pose.distance(b.goal) > self.config.goal_tolerance {
            return false;
        }
        let object = self.contact(&b);
        if b.kind.needs_contact() {
            let Some(id) = &object else { return false };
            self.carried.insert(id.clone());
        }
        let task = self.task.take().expect("selection implies a task");
        let rec = &mut self.tasks[task.index - 1];
        rec.completed_cycle = Some(self.cycle);
        rec.duration = Some(self.acct.sim_time - rec.issued_time);
        rec.behavior = Some(b.kind);
        rec.object = object;
        self.selected = None;
        self.behaviors.clear();
        self.waypoints.clear();
        self.progress = None;
        true
    }

    fn track_progress(&mut self) {
        let Some(b) = &self.selected else {
            self.progress = None;
            return;
        };
        let d = self.pose.distance(b.goal);
        match &mut self.progress {
            Some(p) if p.goal.distance(b.goal) < 1e-9 => {
                if d < p.best - 1e-3 {
                    p.best = d;
                    p.since = self.cycle;
                } else if self.cycle - p.since >= self.config.stuck_cycles {
                    self.blacklist.push(b.goal);
                    self.acct.stuck_events += 1;
                    self.selected = None;
                    self.waypoints.clear();
                    self.progress = None;
                    self.dirty = true;
                }
            }
            _ => {
                self.progress = Some(Progress {
                    goal: b.goal,
                    best: d,
                    since: self.cycle,
                })
            }
        }
    }

    fn record_inspections(&mut self) {
        let r = self.config.sensor.inspection_radius;
        let containers: BTreeSet<&str> = self.objects.iter().filter_map(|o| o.container.as_deref()).collect();
        for o in &self.objects {
            if containers.contains(o.id.as_str())
                && self.pose.distance(o.pose) <= r
                && !self.acct.inspections.iter().any(|(_, id)| id == &o.id)
            {
                self.acct.inspections.push((self.cycle, o.id.clone()));
            }
        }
    }

    /// One perception-action cycle.
    pub fn step(&mut self) -> Result<(), PolicyError> {
        self.fire_events()?;

        let before = self.pose;
        let moved = self.advance();
        for id in &self.carried {
            if let Some(o) = self.objects.iter_mut().find(|o| &o.id == id) {
                o.pose = self.pose;
            }
        }
        self.path.push(self.pose);
        let u = before.between(self.pose);

        let mut rng = stream_rng(self.seed, &[purpose::SENSE, self.cycle]);
        let sensed = sense(
            &self.objects,
            self.pose,
            self.pose,
            self.cycle,
            &self.carried,
            &self.config.sensor,
            &self.perception,
            &self.registry,
            &mut rng,
        );
        self.log.record(sensed.frame.clone());
        self.acct.detected.extend(sensed.object_ids.iter().cloned());
        let active_types = self.perception.active_types(&self.registry);
        let mask = active_types
            .iter()
            .filter_map(|t| self.vocab.type_names().iter().position(|n| n == t))
            .fold(0u64, |m, i| m | (1 << i));
        self.coverage.mark(self.pose, self.config.sensor.range, self.config.sensor.fov, mask);
        self.record_inspections();

        let cycle = self.cycle;
        let seed = self.seed;
        self.set.cycle = cycle;
        let config = self.set.config.clone();
        let dets = &sensed.detections;
        let reports: Vec<UpdateReport> = self
            .set
            .particles
            .par_iter_mut()
            .map(|p| {
                predict(p, u, &config, seed, cycle)?;
                update_observations(p, dets, &config)
            })
            .collect::<Result<_, _>>()?;
        let sensor = SensorContext {
            range: self.config.sensor.range,
            fov: self.config.sensor.fov,
            active_types,
        };
        let pruned = reweight(&mut self.set, &reports, dets, &sensor)?;
        let weight_sum_after_reweight = self.set.weights().iter().sum();
        let ess = self.set.ess();
        let resampled = self.set.resample(seed);
        let weight_sum_after_resample = self.set.weights().iter().sum();
        let mut added = 0;
        if let Some(task) = &self.task {
            let ctx = AnnotationContext {
                grid: &self.scenario.env.grid,
                coverage: &self.coverage,
                seed,
                cycle,
            };
            added = apply_annotations(&mut self.set, &task.annotations, &ctx)?;
        }
        self.dirty |= pruned || resampled || added > 0 || reports.iter().any(UpdateReport::changed_topology);

        let inferred = self.dirty;
        let mut inference = 0.0;
        if self.dirty {
            inference = self.infer_behaviors();
            self.dirty = false;
            self.reselect();
        } else if self.task.is_some() && (self.selected.is_none() || self.waypoints.is_empty()) {
            self.reselect();
        }
        self.track_progress();

        self.acct.perception_time += sensed.loop_cost;
        let motion = moved / self.config.speed;
        self.acct.motion_time += motion;
        // Replay time is charged when the instruction is issued.
        self.acct.sim_time += sensed.loop_cost + inference + motion;
        self.check_completion();

        self.trace.push(CycleRecord {
            cycle,
            pose: self.pose,
            sim_time: self.acct.sim_time,
            detections: dets.len(),
            weight_sum_after_reweight,
            ess,
            resampled,
            weight_sum_after_resample,
            inferred,
            selected: self.selected.clone(),
            digest: self.set.digest(),
        });
        self.cycle += 1;
        Ok(())
    }

    /// Steps until the script is exhausted or the cycle cap is reached.
    pub fn run(&mut self) -> Result<(), PolicyError> {
        while !(self.cycle > 0 && self.is_finished()) {
            if self.cycle >= self.config.cycle_cap {
                return Err(PolicyError::CycleCapExceeded(self.config.cycle_cap));
            }
            self.step()?;
        }
        Ok(())
    }

    /// Weight vector and behavior ensemble of the latest inference.
    pub fn behaviors(&self) -> &[Behavior] {
        &self.behaviors
    }
}
