use std::collections::BTreeSet;
use std::sync::Arc;

use langmap::semantic_map::*;
use proptest::prelude::*;

fn types() -> Arc<[String]> {
    ["ball", "box", "mug"].iter().map(|s| s.to_string()).collect::<Vec<_>>().into()
}

fn set_with(log_weights: &[f64]) -> ParticleSet {
    let config = FilterConfig {
        particles: log_weights.len(),
        ..FilterConfig::default()
    };
    let mut set = ParticleSet::new(types(), Pose2::origin(), config).unwrap();
    for (p, &lw) in set.particles.iter_mut().zip(log_weights) {
        p.log_weight = lw;
    }
    set
}

fn detection(type_name: &str, x: f64, y: f64) -> Detection {
    Detection {
        classifier: format!("{type_name}_detector"),
        type_name: type_name.into(),
        relative: Pose2::new(x, y, 0.0),
        range: x.hypot(y),
        color: None,
    }
}

#[test]
fn new_detections_create_nodes_and_repeats_associate() {
    let mut set = set_with(&[0.0]);
    let cfg = set.config.clone();
    let p = &mut set.particles[0];
    let r = update_observations(p, &[detection("ball", 2.0, 0.5), detection("box", 3.0, -1.0)], &cfg).unwrap();
    assert!(r.associations.iter().all(|a| a.created));
    assert_eq!(r.associations.len(), 2);
    assert_eq!(r.log_likelihood(), 2.0 * cfg.new_node_log_likelihood);
    assert_eq!(p.graph.landmarks().count(), 2);

    predict(p, Pose2::new(0.3, 0.0, 0.0), &cfg, 0, 1).unwrap();
    let r = update_observations(p, &[detection("ball", 1.7, 0.5)], &cfg).unwrap();
    assert!(!r.associations[0].created);
    assert!(r.associations[0].log_likelihood > cfg.new_node_log_likelihood);
    assert_eq!(p.graph.landmarks().count(), 2);
    let ball = p.graph.landmarks().find(|n| n.name == "ball").unwrap();
    assert!(ball.pose.distance(Pose2::new(2.0, 0.5, 0.0)) < 0.1, "{:?}", ball.pose);
}

#[test]
fn type_mismatch_never_associates() {
    let mut set = set_with(&[0.0]);
    let cfg = set.config.clone();
    let p = &mut set.particles[0];
    update_observations(p, &[detection("ball", 2.0, 0.0)], &cfg).unwrap();
    let r = update_observations(p, &[detection("mug", 2.0, 0.0)], &cfg).unwrap();
    assert!(r.associations[0].created);
}

#[test]
fn predict_is_deterministic_per_seed_and_stream() {
    let run = |seed| {
        let mut set = set_with(&[0.0, 0.0]);
        let cfg = set.config.clone();
        for c in 0..5 {
            for p in &mut set.particles {
                predict(p, Pose2::new(0.3, 0.0, 0.1), &cfg, seed, c).unwrap();
            }
        }
        set.particles.iter().map(|p| p.graph.robot_pose().unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
    let poses = run(3);
    assert_ne!(poses[0], poses[1], "particles draw independent motion noise");
}

proptest! {
    #[test]
    fn normalize_sums_to_one(lw in proptest::collection::vec(-700.0f64..50.0, 1..40)) {
        let mut set = set_with(&lw);
        set.normalize().unwrap();
        let w = set.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        // Ratios survive normalization.
        for i in 1..lw.len() {
            let before = lw[i] - lw[0];
            let after = set.particles[i].log_weight - set.particles[0].log_weight;
            prop_assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));
        }
    }

    #[test]
    fn systematic_resampling(lw in proptest::collection::vec(-8.0f64..0.0, 2..30), seed in 0u64..1000) {
        let mut set = set_with(&lw);
        set.normalize().unwrap();
        let n = set.len();
        let w = set.weights();
        let ess = set.ess();
        // Tag each particle by a distinct robot x so copies can be counted.
        for (i, p) in set.particles.iter_mut().enumerate() {
            let r = p.graph.robot().unwrap();
            p.graph.set_pose(r, Pose2::new(i as f64, 0.0, 0.0));
        }
        let ran = set.resample(seed);
        prop_assert_eq!(ran, ess < n as f64 / 2.0);
        prop_assert_eq!(set.len(), n);
        prop_assert!((set.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        if ran {
            prop_assert!(set.weights().iter().all(|x| (x - 1.0 / n as f64).abs() < 1e-12));
            for (i, wi) in w.iter().enumerate() {
                let copies = set
                    .particles
                    .iter()
                    .filter(|p| p.graph.robot_pose().unwrap().x == i as f64)
                    .count() as f64;
                let expect = n as f64 * wi;
                prop_assert!(copies >= expect.floor() - 1e-9 && copies <= expect.ceil() + 1e-9,
                    "particle {} weight {} got {} copies", i, wi, copies);
            }
            let streams: BTreeSet<u64> = set.particles.iter().map(|p| p.stream).collect();
            prop_assert_eq!(streams.len(), n);
        }
    }

    #[test]
    fn compose_and_between_are_inverse(
        ax in -10.0f64..10.0, ay in -10.0f64..10.0, at in -3.1f64..3.1,
        bx in -10.0f64..10.0, by in -10.0f64..10.0, bt in -3.1f64..3.1,
    ) {
        let a = Pose2::new(ax, ay, at);
        let b = Pose2::new(bx, by, bt);
        let back = a.compose(a.between(b));
        prop_assert!((back.x - b.x).abs() < 1e-9 && (back.y - b.y).abs() < 1e-9);
        prop_assert!(wrap_angle(back.theta - b.theta).abs() < 1e-9);
        prop_assert!((a.between(b).x.hypot(a.between(b).y) - a.distance(b)).abs() < 1e-9);
    }

    #[test]
    fn wrap_angle_range(t in -100.0f64..100.0) {
        let w = wrap_angle(t);
        prop_assert!(w > -std::f64::consts::PI - 1e-12 && w <= std::f64::consts::PI + 1e-12);
        prop_assert!(((t - w) / std::f64::consts::TAU - ((t - w) / std::f64::consts::TAU).round()).abs() < 1e-9);
    }
}
