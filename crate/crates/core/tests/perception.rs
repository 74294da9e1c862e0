use std::collections::BTreeSet;

use langmap::assets;
use langmap::perception::*;
use langmap::semantic_map::{Pose2, wrap_angle};
use langmap::simworld::WorldObject;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn indoor() -> Registry {
    assets::registry("indoor").unwrap()
}

fn ids(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn object(id: &str, type_name: &str, x: f64, y: f64, container: Option<&str>) -> WorldObject {
    WorldObject {
        id: id.into(),
        type_name: type_name.into(),
        color: None,
        pose: Pose2::new(x, y, 0.0),
        container: container.map(str::to_string),
    }
}

fn noiseless() -> SensorModel {
    SensorModel {
        noise: [0.0; 3],
        ..SensorModel::default()
    }
}

fn sense_at(objects: &[WorldObject], robot: Pose2, config: &PerceptionConfig, registry: &Registry) -> SenseResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    sense(objects, robot, robot, 0, &BTreeSet::new(), &noiseless(), config, registry, &mut rng)
}

#[test]
fn shipped_registry_costs() {
    let r = indoor();
    assert_eq!(r.classifiers.len(), 16);
    let ep = PerceptionConfig::new(Mode::Exhaustive, &r);
    assert!((ep.loop_cost(&r) - 4.14).abs() < 0.01, "{}", ep.loop_cost(&r));
    let mut ap = PerceptionConfig::new(Mode::Adaptive, &r);
    configure(&mut ap, &r, &ids(&["ball_detector", "box_detector"])).unwrap();
    assert!((ap.loop_cost(&r) - 0.70).abs() < 1e-12);
}

#[test]
fn configure_contract() {
    let r = indoor();
    let mut ap = PerceptionConfig::new(Mode::Adaptive, &r);
    let added = configure(&mut ap, &r, &ids(&["ball_detector", "box_detector"])).unwrap();
    assert_eq!(ap.active.len(), 2);
    assert_eq!(added, ap.active);
    let added = configure(&mut ap, &r, &ids(&["box_detector", "crackers_box_detector"])).unwrap();
    assert_eq!(added, ids(&["crackers_box_detector"]));
    assert_eq!(ap.active, ids(&["box_detector", "crackers_box_detector"]));

    configure(&mut ap, &r, &BTreeSet::new()).unwrap();
    assert!(ap.active.is_empty());
    let objs = [object("b", "ball", 2.0, 0.0, None)];
    assert!(sense_at(&objs, Pose2::origin(), &ap, &r).detections.is_empty());

    let mut ep = PerceptionConfig::new(Mode::Exhaustive, &r);
    assert!(configure(&mut ep, &r, &ids(&["ball_detector"])).unwrap().is_empty());
    assert_eq!(ep.active.len(), 16);

    assert!(matches!(
        configure(&mut ap, &r, &ids(&["laser_detector"])),
        Err(PerceptionError::UnknownClassifier(id)) if id == "laser_detector"
    ));
}

#[test]
fn range_gate() {
    let r = indoor().with_miss_rate(0.0);
    let ep = PerceptionConfig::new(Mode::Exhaustive, &r);
    let objs = [object("far", "ball", 5.0, 0.0, None), object("near", "mug", 4.4, 0.0, None)];
    let s = sense_at(&objs, Pose2::origin(), &ep, &r);
    assert_eq!(s.object_ids, ["near"]);
}

#[test]
fn containment_needs_inspection() {
    let r = indoor().with_miss_rate(0.0);
    let ep = PerceptionConfig::new(Mode::Exhaustive, &r);
    let objs = [object("bx", "box", 3.0, 0.0, None), object("b", "ball", 3.05, 0.0, Some("bx"))];
    assert_eq!(sense_at(&objs, Pose2::origin(), &ep, &r).object_ids, ["bx"]);
    let close = sense_at(&objs, Pose2::new(2.2, 0.0, 0.0), &ep, &r);
    assert_eq!(close.object_ids, ["bx", "b"]);
}

fn frame(cycle: u64, visible: &[&str]) -> Frame {
    Frame {
        cycle,
        odom_pose: Pose2::origin(),
        visible: visible
            .iter()
            .map(|id| langmap::simworld::VisibleObject {
                id: id.to_string(),
                type_name: id.trim_end_matches(char::is_numeric).to_string(),
                color: None,
                relative: Pose2::new(1.0, 0.0, 0.0),
                range: 1.0,
            })
            .collect(),
    }
}

#[test]
fn replay_cost_is_frames_times_added_cost() {
    let r = indoor().with_miss_rate(0.0);
    let mut log = ObservationLog::new(64);
    for c in 0..28 {
        // Alternate contents so consecutive frames differ and all are kept.
        let f = if c % 2 == 0 { frame(c, &["crackers_box1", "box1"]) } else { frame(c, &["box1"]) };
        assert!(log.record(f));
    }
    assert_eq!(log.len(), 28);
    let mut ap = PerceptionConfig::new(Mode::Adaptive, &r);
    configure(&mut ap, &r, &ids(&["ball_detector", "box_detector"])).unwrap();
    let added = configure(&mut ap, &r, &ids(&["crackers_box_detector"])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (frames, cost) = replay(&log, &ap, &r, &added, Pose2::origin(), &mut rng);
    assert!((cost - 9.8).abs() < 1e-12, "{cost}");
    assert_eq!(frames.len(), 28);
    let found: usize = frames.iter().map(|f| f.detections.len()).sum();
    assert_eq!(found, 14);
    assert!(frames.iter().flat_map(|f| &f.detections).all(|d| d.type_name == "crackers_box"));

    let (frames, cost) = replay(&log, &ap, &r, &BTreeSet::new(), Pose2::origin(), &mut rng);
    assert!(frames.is_empty());
    assert_eq!(cost, 0.0);

    let ep = PerceptionConfig::new(Mode::Exhaustive, &r);
    let (frames, cost) = replay(&log, &ep, &r, &added, Pose2::origin(), &mut rng);
    assert!(frames.is_empty());
    assert_eq!(cost, 0.0);
}

#[test]
fn replay_reexpresses_detections_in_the_current_frame() {
    let r = indoor().with_miss_rate(0.0);
    let mut log = ObservationLog::new(8);
    let mut f = frame(0, &["ball1"]);
    f.odom_pose = Pose2::new(1.0, 2.0, 0.5);
    log.record(f.clone());
    let mut ap = PerceptionConfig::new(Mode::Adaptive, &r);
    let added = configure(&mut ap, &r, &ids(&["ball_detector"])).unwrap();
    let now = Pose2::new(3.0, -1.0, -1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (frames, _) = replay(&log, &ap, &r, &added, now, &mut rng);
    let d = &frames[0].detections[0];
    let world = f.odom_pose.compose(f.visible[0].relative);
    let back = now.compose(d.relative);
    assert!((back.x - world.x).abs() < 1e-12 && (back.y - world.y).abs() < 1e-12);
    assert!(wrap_angle(back.theta - world.theta).abs() < 1e-12);
}

#[test]
fn log_is_bounded_fifo_and_skips_repeats() {
    let mut log = ObservationLog::new(3);
    assert!(!log.record(frame(0, &[])));
    assert!(log.record(frame(1, &["a1"])));
    assert!(!log.record(frame(2, &["a1"])));
    for c in 3..8 {
        let id = format!("a{c}");
        assert!(log.record(frame(c, &[&id])));
    }
    let cycles: Vec<u64> = log.frames().map(|f| f.cycle).collect();
    assert_eq!(cycles, [5, 6, 7]);
}

fn registry_ids(r: &Registry) -> Vec<String> {
    r.classifiers.iter().map(|c| c.id.clone()).collect()
}

proptest! {
    #[test]
    fn loop_cost_is_exact(mask in 0u32..(1 << 16)) {
        let r = indoor();
        let all = registry_ids(&r);
        let p_star: BTreeSet<String> = all.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| s.clone()).collect();
        let mut ap = PerceptionConfig::new(Mode::Adaptive, &r);
        configure(&mut ap, &r, &p_star).unwrap();
        // Same summation order as the sorted active set.
        let mut expected = r.base_cost;
        let mut sum = 0.0;
        for id in &p_star {
            sum += r.classifiers.iter().find(|c| &c.id == id).unwrap().cost;
        }
        expected += sum;
        prop_assert_eq!(ap.loop_cost(&r).to_bits(), expected.to_bits());
        let ep = PerceptionConfig::new(Mode::Exhaustive, &r);
        prop_assert!(ap.loop_cost(&r) <= ep.loop_cost(&r));
    }

    #[test]
    fn detections_are_sound_and_complete_without_noise(
        mask in 0u32..(1 << 16),
        placements in proptest::collection::vec((0usize..16, -6.0f64..6.0, -6.0f64..6.0), 1..12),
        heading in -3.2f64..3.2,
    ) {
        let r = indoor().with_miss_rate(0.0);
        let all = registry_ids(&r);
        let p_star: BTreeSet<String> = all.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| s.clone()).collect();
        let mut ap = PerceptionConfig::new(Mode::Adaptive, &r);
        configure(&mut ap, &r, &p_star).unwrap();
        let objs: Vec<WorldObject> = placements
            .iter()
            .enumerate()
            .map(|(k, &(t, x, y))| object(&format!("o{k}"), &r.classifiers[t].type_name, x, y, None))
            .collect();
        let robot = Pose2::new(0.0, 0.0, heading);
        let s = sense_at(&objs, robot, &ap, &r);
        let model = noiseless();
        let eligible: BTreeSet<String> = objs
            .iter()
            .filter(|o| {
                let spec = r.classifiers.iter().find(|c| c.type_name == o.type_name).unwrap();
                let d = robot.distance(o.pose);
                let in_view = d < 1e-9 || robot.bearing_to(o.pose).abs() <= model.fov / 2.0;
                p_star.contains(&spec.id) && d <= model.range && d <= spec.range && in_view
            })
            .map(|o| o.id.clone())
            .collect();
        let got: BTreeSet<String> = s.object_ids.iter().cloned().collect();
        prop_assert_eq!(got, eligible);
        prop_assert_eq!(s.detections.len(), s.object_ids.len());
    }
}
